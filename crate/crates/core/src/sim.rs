//! Monte Carlo model of a pair source feeding two lossy, jittery detectors.
//!
//! The pipeline is fixed: pair creation, per-arm loss, timing jitter,
//! background merge, and finally non-paralyzable dead-time (the
//! discriminator).

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};
use crate::stream::{Channel, EventStream, PS_PER_S};

/// Largest expected number of events a single Poisson draw may produce.
pub const DEFAULT_EVENT_BUDGET: f64 = 5.0e8;

/// FWHM of a Gaussian divided by its standard deviation, `2 sqrt(2 ln 2)`.
pub fn fwhm_per_sigma() -> f64 {
    2.0 * (2.0 * std::f64::consts::LN_2).sqrt()
}

/// Ground-truth parameters of the simulated source and detectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub pair_rate_hz: f64,
    pub eta_signal: f64,
    pub eta_herald: f64,
    pub deadtime_signal_ps: i64,
    pub deadtime_herald_ps: i64,
    pub jitter_fwhm_signal_ps: i64,
    pub jitter_fwhm_herald_ps: i64,
    pub background_rate_signal_hz: f64,
    pub background_rate_herald_hz: f64,
    pub duration_ps: i64,
    pub rng_seed: u64,
}

impl SourceModel {
    /// Reference analog setup: 100 s of a
    /// ~57 kHz pair source, discriminator TTL lengths as dead-times.
    pub fn reference_setup(seed: u64) -> Self {
        Self {
            pair_rate_hz: 57_200.0,
            eta_signal: 0.822,
            eta_herald: 0.115,
            deadtime_signal_ps: 50_000,
            deadtime_herald_ps: 1_000_000,
            jitter_fwhm_signal_ps: 0,
            jitter_fwhm_herald_ps: 0,
            background_rate_signal_hz: 0.0,
            background_rate_herald_hz: 0.0,
            duration_ps: 100 * 1_000_000_000_000,
            rng_seed: seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rate_ok = |r: f64| r.is_finite() && r >= 0.0;
        let eta_ok = |e: f64| (0.0..=1.0).contains(&e);
        if self.duration_ps <= 0 {
            return Err(Error::validation("duration_ps must be positive"));
        }
        if !rate_ok(self.pair_rate_hz)
            || !rate_ok(self.background_rate_signal_hz)
            || !rate_ok(self.background_rate_herald_hz)
        {
            return Err(Error::validation("rates must be finite and non-negative"));
        }
        if !eta_ok(self.eta_signal) || !eta_ok(self.eta_herald) {
            return Err(Error::validation("efficiencies must lie in [0, 1]"));
        }
        if [self.deadtime_signal_ps, self.deadtime_herald_ps, self.jitter_fwhm_signal_ps, self.jitter_fwhm_herald_ps]
            .iter()
            .any(|&v| v < 0)
        {
            return Err(Error::validation("dead-times and jitter must be non-negative"));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_ps as f64 / PS_PER_S
    }

    pub fn eta(&self, arm: Channel) -> f64 {
        match arm {
            Channel::Signal => self.eta_signal,
            Channel::Herald => self.eta_herald,
        }
    }

    pub fn deadtime_ps(&self, arm: Channel) -> i64 {
        match arm {
            Channel::Signal => self.deadtime_signal_ps,
            Channel::Herald => self.deadtime_herald_ps,
        }
    }

    pub fn jitter_fwhm_ps(&self, arm: Channel) -> i64 {
        match arm {
            Channel::Signal => self.jitter_fwhm_signal_ps,
            Channel::Herald => self.jitter_fwhm_herald_ps,
        }
    }

    pub fn background_rate_hz(&self, arm: Channel) -> f64 {
        match arm {
            Channel::Signal => self.background_rate_signal_hz,
            Channel::Herald => self.background_rate_herald_hz,
        }
    }
}

/// Homogeneous Poisson arrival times in `[0, duration_ps)` via exponential
/// gaps accumulated in floating point and floored to whole picoseconds.
fn poisson_times<R: Rng>(rng: &mut R, rate_hz: f64, duration_ps: i64, budget: f64) -> Result<Vec<i64>> {
    if duration_ps <= 0 {
        return Err(Error::validation("duration_ps must be positive"));
    }
    if !(rate_hz.is_finite() && rate_hz >= 0.0) {
        return Err(Error::validation("rate must be finite and non-negative"));
    }
    let expected = rate_hz * duration_ps as f64 / PS_PER_S;
    if expected > budget {
        return Err(Error::validation(format!(
            "expected {expected:.3e} events exceeds the event budget of {budget:.3e}"
        )));
    }
    if rate_hz == 0.0 {
        return Ok(Vec::new());
    }
    let gap = Exp::new(rate_hz / PS_PER_S).expect("positive rate");
    let end = duration_ps as f64;
    let mut out = Vec::with_capacity((expected + 6.0 * expected.sqrt() + 16.0) as usize);
    let mut t = gap.sample(rng);
    while t < end {
        out.push(t as i64);
        t += gap.sample(rng);
    }
    Ok(out)
}

/// Pair creation times for trial 0 of the model's seed.
pub fn generate_pairs(model: &SourceModel) -> Result<Vec<i64>> {
    generate_pairs_trial(model, 0, DEFAULT_EVENT_BUDGET)
}

pub fn generate_pairs_trial(model: &SourceModel, trial: u64, budget: f64) -> Result<Vec<i64>> {
    model.validate()?;
    let mut rng = substream(model.rng_seed, trial, Purpose::Pairs);
    poisson_times(&mut rng, model.pair_rate_hz, model.duration_ps, budget)
}

pub fn thin_and_jitter(pairs: &[i64], arm: Channel, model: &SourceModel) -> Result<EventStream> {
    thin_and_jitter_trial(pairs, arm, model, 0)
}

/// Keeps each pair with the arm's efficiency and adds Gaussian timing
/// jitter with the arm's FWHM. Times pushed outside the run are dropped.
pub fn thin_and_jitter_trial(pairs: &[i64], arm: Channel, model: &SourceModel, trial: u64) -> Result<EventStream> {
    model.validate()?;
    if pairs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::validation("pair times must be sorted"));
    }
    let (thin_purpose, jitter_purpose) = match arm {
        Channel::Signal => (Purpose::ThinSignal, Purpose::JitterSignal),
        Channel::Herald => (Purpose::ThinHerald, Purpose::JitterHerald),
    };
    let eta = model.eta(arm);
    let mut thin_rng = substream(model.rng_seed, trial, thin_purpose);
    let kept: Vec<i64> = pairs.iter().copied().filter(|_| thin_rng.random::<f64>() < eta).collect();

    let fwhm = model.jitter_fwhm_ps(arm);
    if fwhm == 0 {
        return EventStream::from_sorted_with_ties(arm, kept, model.duration_ps);
    }
    let sigma = fwhm as f64 / fwhm_per_sigma();
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut jitter_rng = substream(model.rng_seed, trial, jitter_purpose);
    let jittered = kept.into_iter().map(|t| t + normal.sample(&mut jitter_rng).round() as i64).collect();
    EventStream::from_unsorted(arm, jittered, model.duration_ps)
}

pub fn merge_background(stream: &EventStream, rate_hz: f64, model: &SourceModel) -> Result<EventStream> {
    merge_background_trial(stream, rate_hz, model, 0)
}

/// Adds an independent Poisson background of `rate_hz` to `stream`. A
/// background event landing on an occupied tick is moved one tick later.
pub fn merge_background_trial(
    stream: &EventStream,
    rate_hz: f64,
    model: &SourceModel,
    trial: u64,
) -> Result<EventStream> {
    let purpose = match stream.channel() {
        Channel::Signal => Purpose::BackgroundSignal,
        Channel::Herald => Purpose::BackgroundHerald,
    };
    let mut rng = substream(model.rng_seed, trial, purpose);
    let background = poisson_times(&mut rng, rate_hz, stream.duration_ps(), DEFAULT_EVENT_BUDGET)?;
    if background.is_empty() {
        return Ok(stream.clone());
    }
    let base = stream.timestamps();
    let mut merged = Vec::with_capacity(base.len() + background.len());
    let (mut i, mut j) = (0, 0);
    while i < base.len() || j < background.len() {
        if j == background.len() || (i < base.len() && base[i] <= background[j]) {
            merged.push(base[i]);
            i += 1;
        } else {
            merged.push(background[j]);
            j += 1;
        }
    }
    EventStream::from_sorted_with_ties(stream.channel(), merged, stream.duration_ps())
}

/// Non-paralyzable dead-time: an event survives iff it comes at least
/// `deadtime_ps` after the previous surviving event.
pub fn apply_dead_time(stream: &EventStream, deadtime_ps: i64) -> Result<EventStream> {
    if deadtime_ps < 0 {
        return Err(Error::validation("dead-time must be non-negative"));
    }
    if deadtime_ps == 0 {
        return Ok(stream.clone());
    }
    let mut kept = Vec::with_capacity(stream.len());
    let mut last: Option<i64> = None;
    for &t in stream.timestamps() {
        if last.is_none_or(|l| t - l >= deadtime_ps) {
            kept.push(t);
            last = Some(t);
        }
    }
    EventStream::new(stream.channel(), kept, stream.duration_ps())
}

/// Rate observed behind a non-paralyzable dead-time for Poisson input of
/// rate `input_hz`.
pub fn saturated_rate(input_hz: f64, deadtime_s: f64) -> f64 {
    input_hz / (1.0 + input_hz * deadtime_s)
}

/// Full pipeline for trial 0: `(signal, herald)` detection streams.
pub fn simulate(model: &SourceModel) -> Result<(EventStream, EventStream)> {
    simulate_trial(model, 0)
}

/// Full pipeline on the RNG substreams of `trial`.
pub fn simulate_trial(model: &SourceModel, trial: u64) -> Result<(EventStream, EventStream)> {
    let pairs = generate_pairs_trial(model, trial, DEFAULT_EVENT_BUDGET)?;
    let arm = |channel: Channel| -> Result<EventStream> {
        let s = thin_and_jitter_trial(&pairs, channel, model, trial)?;
        let s = merge_background_trial(&s, model.background_rate_hz(channel), model, trial)?;
        apply_dead_time(&s, model.deadtime_ps(channel))
    };
    Ok((arm(Channel::Signal)?, arm(Channel::Herald)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(rate: f64, secs: i64) -> SourceModel {
        SourceModel {
            pair_rate_hz: rate,
            eta_signal: 1.0,
            eta_herald: 1.0,
            deadtime_signal_ps: 0,
            deadtime_herald_ps: 0,
            jitter_fwhm_signal_ps: 0,
            jitter_fwhm_herald_ps: 0,
            background_rate_signal_hz: 0.0,
            background_rate_herald_hz: 0.0,
            duration_ps: secs * 1_000_000_000_000,
            rng_seed: 11,
        }
    }

    #[test]
    fn zero_rate_gives_no_pairs() {
        assert!(generate_pairs(&model(0.0, 1)).unwrap().is_empty());
    }

    #[test]
    fn rejects_zero_duration_and_budget_overflow() {
        let mut m = model(10.0, 1);
        m.duration_ps = 0;
        assert!(matches!(generate_pairs(&m), Err(Error::Validation(_))));
        let m = model(1e12, 1);
        assert!(matches!(generate_pairs(&m), Err(Error::Validation(_))));
    }

    #[test]
    fn pair_count_is_poisson() {
        let m = model(57_000.0, 100);
        let n = generate_pairs(&m).unwrap().len() as f64;
        let mean = 5.7e6;
        assert!((n - mean).abs() < 4.0 * mean.sqrt(), "n = {n}");
    }

    #[test]
    fn generation_is_deterministic() {
        let m = model(1000.0, 1);
        assert_eq!(generate_pairs(&m).unwrap(), generate_pairs(&m).unwrap());
        let mut other = m.clone();
        other.rng_seed += 1;
        assert_ne!(generate_pairs(&m).unwrap(), generate_pairs(&other).unwrap());
    }

    #[test]
    fn identity_thinning() {
        let m = model(10_000.0, 1);
        let pairs = generate_pairs(&m).unwrap();
        let s = thin_and_jitter(&pairs, Channel::Signal, &m).unwrap();
        assert_eq!(s.timestamps(), pairs.as_slice());
    }

    #[test]
    fn thinning_fraction_is_binomial() {
        for eta in [0.5, 0.83] {
            let mut m = model(1e6, 1);
            m.eta_herald = eta;
            let pairs = generate_pairs(&m).unwrap();
            let n = pairs.len() as f64;
            let kept = thin_and_jitter(&pairs, Channel::Herald, &m).unwrap().len() as f64;
            let sigma = (n * eta * (1.0 - eta)).sqrt();
            assert!((kept - n * eta).abs() < 4.0 * sigma, "eta {eta}: kept {kept} of {n}");
        }
    }

    #[test]
    fn jitter_width_matches_fwhm() {
        let mut m = model(20_000.0, 10);
        m.jitter_fwhm_signal_ps = 155_000;
        let pairs: Vec<i64> = (0..200_000).map(|k| 1_000_000 + k * 40_000_000).collect();
        let s = thin_and_jitter(&pairs, Channel::Signal, &m).unwrap();
        let d: Vec<f64> = s.timestamps().iter().zip(&pairs).map(|(&t, &p)| (t - p) as f64).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64;
        let fwhm = var.sqrt() * fwhm_per_sigma();
        assert!((fwhm - 155_000.0).abs() < 0.01 * 155_000.0, "fwhm {fwhm}");
    }

    #[test]
    fn background_rate_zero_is_identity_and_pure_background_is_poisson() {
        let m = model(1000.0, 10);
        let s = EventStream::new(Channel::Signal, vec![1, 5, 9], m.duration_ps).unwrap();
        assert_eq!(merge_background(&s, 0.0, &m).unwrap(), s);

        let empty = EventStream::empty(Channel::Signal, m.duration_ps).unwrap();
        let bg = merge_background(&empty, 20_000.0, &m).unwrap();
        let mean = 2e5;
        assert!((bg.len() as f64 - mean).abs() < 4.0 * mean.sqrt());
    }

    #[test]
    fn background_keeps_all_input_events() {
        let m = model(0.0, 1);
        let s = EventStream::new(Channel::Herald, (0..1000).map(|k| k * 1_000_000).collect(), m.duration_ps).unwrap();
        let merged = merge_background(&s, 50_000.0, &m).unwrap();
        let mut it = merged.timestamps().iter();
        // input events are never displaced, only background ties move
        for t in s.timestamps() {
            assert!(it.any(|x| x == t));
        }
    }

    #[test]
    fn dead_time_example() {
        let s = EventStream::new(Channel::Signal, vec![0, 10, 20, 30], 100).unwrap();
        assert_eq!(apply_dead_time(&s, 15).unwrap().timestamps(), &[0, 20]);
        assert_eq!(apply_dead_time(&s, 0).unwrap(), s);
    }

    #[test]
    fn dead_time_saturation_law() {
        let mut m = model(1e5, 10);
        m.deadtime_signal_ps = 1_000_000;
        let (s, _) = simulate(&m).unwrap();
        let expected = saturated_rate(1e5, 1e-6);
        assert!((expected - 90_909.09).abs() < 0.01);
        let sigma = (expected * 10.0).sqrt() / 10.0;
        assert!((s.rate_hz() - expected).abs() < 4.0 * sigma, "rate {}", s.rate_hz());
        assert!(s.min_gap_ps().unwrap() >= 1_000_000);
    }
}
