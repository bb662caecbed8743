//! Detector-like analog traces and leading-edge discrimination.
//!
//! Pulses use the kernel `(1 - exp(-t / rise)) * exp(-t / decay)` scaled so
//! that its maximum equals the pulse amplitude, optionally followed by a
//! damped oscillation on the recovering edge.

use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};
use crate::stream::{Channel, EventStream};

/// Wiggle oscillation period in units of the rise time.
pub const WIGGLE_PERIOD_RISE_TIMES: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    #[default]
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }
}

/// Uniformly sampled trace. Sample `i` sits at `t0_ps + i * sample_period_ps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f32>,
    sample_period_ps: i64,
    t0_ps: i64,
    polarity: Polarity,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_period_ps: i64, t0_ps: i64, polarity: Polarity) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::validation("waveform has no samples"));
        }
        if sample_period_ps <= 0 {
            return Err(Error::validation("sample period must be positive"));
        }
        if t0_ps < 0 {
            return Err(Error::validation("waveform start time must be non-negative"));
        }
        Ok(Self { samples, sample_period_ps, t0_ps, polarity })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_period_ps(&self) -> i64 {
        self.sample_period_ps
    }

    pub fn t0_ps(&self) -> i64 {
        self.t0_ps
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn end_ps(&self) -> i64 {
        self.t0_ps + self.samples.len() as i64 * self.sample_period_ps
    }

    pub fn header(&self) -> WaveformHeader {
        WaveformHeader { sample_period_ps: self.sample_period_ps, t0_ps: self.t0_ps, polarity: self.polarity }
    }

    /// Raw little-endian `f32` samples.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.samples.iter().flat_map(|s| s.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(bytes: &[u8], header: &WaveformHeader) -> Result<Self> {
        if !bytes.len().is_multiple_of(4) {
            return Err(Error::validation("waveform byte length is not a multiple of 4"));
        }
        let samples = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Self::new(samples, header.sample_period_ps, header.t0_ps, header.polarity)
    }
}

/// JSON sidecar for the raw sample file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformHeader {
    pub sample_period_ps: i64,
    pub t0_ps: i64,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseShape {
    pub amplitude: f64,
    pub rise_time_ps: i64,
    pub decay_time_ps: i64,
    pub wiggle_amplitude: f64,
    pub wiggle_delay_ps: i64,
}

impl PulseShape {
    pub fn new(amplitude: f64, rise_time_ps: i64, decay_time_ps: i64) -> Result<Self> {
        let s = Self { amplitude, rise_time_ps, decay_time_ps, wiggle_amplitude: 0.0, wiggle_delay_ps: 0 };
        s.validate()?;
        Ok(s)
    }

    pub fn with_wiggle(mut self, amplitude: f64, delay_ps: i64) -> Self {
        self.wiggle_amplitude = amplitude;
        self.wiggle_delay_ps = delay_ps;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::validation("pulse amplitude must be positive"));
        }
        if self.rise_time_ps <= 0 || self.decay_time_ps <= 0 {
            return Err(Error::validation("rise and decay times must be positive"));
        }
        if self.rise_time_ps >= self.decay_time_ps {
            return Err(Error::validation("rise time must be shorter than decay time"));
        }
        if !(self.wiggle_amplitude.is_finite() && self.wiggle_amplitude >= 0.0) || self.wiggle_delay_ps < 0 {
            return Err(Error::validation("wiggle parameters must be non-negative"));
        }
        Ok(())
    }

    /// Time of the kernel maximum after the event, `rise ln((rise + decay) / rise)`.
    pub fn peak_time_ps(&self) -> f64 {
        let (r, d) = (self.rise_time_ps as f64, self.decay_time_ps as f64);
        r * ((r + d) / r).ln()
    }

    fn unit_peak(&self) -> f64 {
        let (r, d) = (self.rise_time_ps as f64, self.decay_time_ps as f64);
        d / (r + d) * (r / (r + d)).powf(r / d)
    }

    /// Pulse value `t_ps` after the photon arrival.
    pub fn value(&self, t_ps: f64) -> f64 {
        if t_ps < 0.0 {
            return 0.0;
        }
        let (r, d) = (self.rise_time_ps as f64, self.decay_time_ps as f64);
        let mut v = self.amplitude * (1.0 - (-t_ps / r).exp()) * (-t_ps / d).exp() / self.unit_peak();
        let u = t_ps - self.wiggle_delay_ps as f64;
        if self.wiggle_amplitude > 0.0 && u >= 0.0 {
            let period = WIGGLE_PERIOD_RISE_TIMES * r;
            v += self.wiggle_amplitude * (2.0 * PI * u / period).sin() * (-u / period).exp();
        }
        v
    }

    /// Time after which the pulse is negligible.
    fn support_ps(&self) -> f64 {
        let wiggle_end = if self.wiggle_amplitude > 0.0 {
            self.wiggle_delay_ps as f64 + 40.0 * WIGGLE_PERIOD_RISE_TIMES * self.rise_time_ps as f64
        } else {
            0.0
        };
        (40.0 * self.decay_time_ps as f64).max(wiggle_end)
    }
}

/// Superposition of identically shaped pulses plus white Gaussian noise.
pub fn synthesize(
    events_ps: &[i64],
    shape: &PulseShape,
    noise_rms: f64,
    duration_ps: i64,
    sample_period_ps: i64,
    seed: u64,
) -> Result<Waveform> {
    let pulses: Vec<(i64, PulseShape)> = events_ps.iter().map(|&t| (t, *shape)).collect();
    synthesize_pulses(&pulses, noise_rms, duration_ps, sample_period_ps, seed, Polarity::Positive)
}

/// Superposition of individually shaped pulses plus white Gaussian noise.
pub fn synthesize_pulses(
    pulses: &[(i64, PulseShape)],
    noise_rms: f64,
    duration_ps: i64,
    sample_period_ps: i64,
    seed: u64,
    polarity: Polarity,
) -> Result<Waveform> {
    if duration_ps <= 0 || sample_period_ps <= 0 {
        return Err(Error::validation("duration and sample period must be positive"));
    }
    if !(noise_rms.is_finite() && noise_rms >= 0.0) {
        return Err(Error::validation("noise rms must be non-negative"));
    }
    if pulses.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::validation("pulse times must be sorted"));
    }
    if pulses.iter().any(|p| p.0 < 0 || p.0 >= duration_ps) {
        return Err(Error::validation("pulse times must lie inside the trace"));
    }
    let n = (duration_ps / sample_period_ps).max(1) as usize;
    let mut acc = vec![0.0_f64; n];
    for (t, shape) in pulses {
        shape.validate()?;
        let first = (*t + sample_period_ps - 1) / sample_period_ps;
        let last = ((*t as f64 + shape.support_ps()) / sample_period_ps as f64).ceil() as usize;
        for (i, a) in acc.iter_mut().enumerate().take(last.min(n)).skip(first as usize) {
            *a += shape.value((i as i64 * sample_period_ps - t) as f64);
        }
    }
    if noise_rms > 0.0 {
        let normal = Normal::new(0.0, noise_rms).expect("finite noise");
        let mut rng = substream(seed, 0, Purpose::Noise);
        acc.iter_mut().for_each(|a| *a += normal.sample(&mut rng));
    }
    let sign = polarity.sign();
    Waveform::new(acc.into_iter().map(|v| (sign * v) as f32).collect(), sample_period_ps, 0, polarity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    /// Threshold above baseline, measured in the pulse direction.
    pub threshold: f64,
    pub rearm_dead_ps: i64,
    pub polarity: Polarity,
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::validation("threshold must be finite"));
        }
        if self.rearm_dead_ps < 0 {
            return Err(Error::validation("rearm_dead_ps must be non-negative"));
        }
        Ok(())
    }
}

/// Streaming leading-edge discriminator. Feeding a trace in chunks gives
/// the same events and pulse heights as a single pass.
#[derive(Debug, Clone)]
pub struct Discriminator {
    cfg: DiscriminatorConfig,
    sample_period_ps: i64,
    t0_ps: i64,
    next_index: i64,
    prev: Option<f64>,
    armed_at_ps: f64,
    events: Vec<i64>,
    heights: Vec<f64>,
    current_max: Option<f64>,
}

impl Discriminator {
    pub fn new(cfg: DiscriminatorConfig, sample_period_ps: i64, t0_ps: i64) -> Result<Self> {
        cfg.validate()?;
        if sample_period_ps <= 0 {
            return Err(Error::validation("sample period must be positive"));
        }
        Ok(Self {
            cfg,
            sample_period_ps,
            t0_ps,
            next_index: 0,
            prev: None,
            armed_at_ps: f64::NEG_INFINITY,
            events: Vec::new(),
            heights: Vec::new(),
            current_max: None,
        })
    }

    pub fn feed(&mut self, chunk: &[f32]) {
        let sign = self.cfg.polarity.sign();
        let thr = self.cfg.threshold;
        let period = self.sample_period_ps as f64;
        for &raw in chunk {
            let v = sign * raw as f64;
            let i = self.next_index;
            self.next_index += 1;
            if let Some(p) = self.prev {
                if p < thr && v >= thr {
                    let frac = (thr - p) / (v - p);
                    let t = self.t0_ps as f64 + (i as f64 - 1.0 + frac) * period;
                    if t >= self.armed_at_ps {
                        if let Some(m) = self.current_max.take() {
                            self.heights.push(m);
                        }
                        self.events.push(t.round() as i64);
                        self.armed_at_ps = t + self.cfg.rearm_dead_ps as f64;
                        self.current_max = Some(v);
                    }
                }
            }
            if let Some(m) = self.current_max.as_mut() {
                *m = m.max(v);
            }
            self.prev = Some(v);
        }
    }

    /// Event times so far and, for every event, the largest sample between
    /// it and the next event (or the end of the data).
    pub fn finish(mut self) -> (Vec<i64>, Vec<f64>) {
        if let Some(m) = self.current_max.take() {
            self.heights.push(m);
        }
        (self.events, self.heights)
    }
}

/// Leading-edge discrimination of a whole trace into an event stream on
/// `channel`, spanning the trace's time range.
pub fn discriminate(w: &Waveform, cfg: &DiscriminatorConfig, channel: Channel) -> Result<EventStream> {
    let mut d = Discriminator::new(*cfg, w.sample_period_ps(), w.t0_ps())?;
    d.feed(w.samples());
    let (events, _) = d.finish();
    EventStream::from_sorted_with_ties(channel, events, w.end_ps())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBins {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: &HistogramBins) -> Result<Self> {
        if bins.count == 0 || bins.max.is_nan() || bins.min.is_nan() || bins.max <= bins.min {
            return Err(Error::validation("histogram needs count > 0 and max > min"));
        }
        let width = (bins.max - bins.min) / bins.count as f64;
        let bin_edges = (0..=bins.count).map(|k| bins.min + k as f64 * width).collect();
        let mut counts = vec![0u64; bins.count];
        for &v in values {
            if v >= bins.min && v < bins.max {
                let k = (((v - bins.min) / width) as usize).min(bins.count - 1);
                counts[k] += 1;
            }
        }
        Ok(Self { bin_edges, counts })
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Per-pulse maxima between armed crossings.
pub fn pulse_heights(w: &Waveform, cfg: &DiscriminatorConfig) -> Result<Vec<f64>> {
    let mut d = Discriminator::new(*cfg, w.sample_period_ps(), w.t0_ps())?;
    d.feed(w.samples());
    Ok(d.finish().1)
}

pub fn pulse_height_histogram(w: &Waveform, cfg: &DiscriminatorConfig, bins: &HistogramBins) -> Result<Histogram> {
    Histogram::new(&pulse_heights(w, cfg)?, bins)
}

/// A four-photon trace with one undersized pulse and one pulse whose
/// recovering edge rings, plus the thresholds that split it three ways.
#[derive(Debug, Clone)]
pub struct ReplicaTrace {
    pub waveform: Waveform,
    pub photon_times_ps: Vec<i64>,
    /// Above the undersized pulse.
    pub high: DiscriminatorConfig,
    /// Between the undersized pulse and the ringing, with a short re-arm.
    pub mid: DiscriminatorConfig,
    /// Low threshold with a re-arm longer than the pulse recovery.
    pub low: DiscriminatorConfig,
}

pub fn replica_trace() -> Result<ReplicaTrace> {
    const NS: i64 = 1_000;
    const US: i64 = 1_000_000;
    let base = PulseShape::new(1.0, 100 * NS, 1_500 * NS)?;
    let photon_times_ps = vec![3 * US, 11 * US, 19 * US, 27 * US];
    let pulses = vec![
        (photon_times_ps[0], base.with_wiggle(0.25, 1_600 * NS)),
        (photon_times_ps[1], base.with_amplitude(0.9)),
        (photon_times_ps[2], base.with_amplitude(0.55)),
        (photon_times_ps[3], base),
    ];
    let waveform = synthesize_pulses(&pulses, 0.0, 36 * US, NS, 0, Polarity::Positive)?;
    let cfg = |threshold, rearm_dead_ps| DiscriminatorConfig { threshold, rearm_dead_ps, polarity: Polarity::Positive };
    Ok(ReplicaTrace {
        waveform,
        photon_times_ps,
        high: cfg(0.7, 200 * NS),
        mid: cfg(0.5, 200 * NS),
        low: cfg(0.2, 6 * US),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const NS: i64 = 1_000;

    fn shape() -> PulseShape {
        PulseShape::new(1.0, 50 * NS, 800 * NS).unwrap()
    }

    #[test]
    fn empty_trace_is_zero() {
        let w = synthesize(&[], &shape(), 0.0, 10_000 * NS, NS, 1).unwrap();
        assert!(w.samples().iter().all(|&s| s == 0.0));
        assert_eq!(w.samples().len(), 10_000);
    }

    #[test]
    fn kernel_peak_equals_amplitude() {
        let s = PulseShape::new(2.5, 70 * NS, 1_300 * NS).unwrap();
        // brute-force maximum on a 1 ps grid around the analytic peak time
        let t = s.peak_time_ps();
        let best = ((t as i64 - 20_000)..(t as i64 + 20_000)).map(|x| s.value(x as f64)).fold(f64::MIN, f64::max);
        assert!((best - 2.5).abs() < 1e-9, "{best}");
        assert!((s.value(t) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn single_event_peak_within_one_percent() {
        let w = synthesize(&[1_000 * NS], &shape(), 0.0, 10_000 * NS, NS, 1).unwrap();
        let peak = w.samples().iter().copied().fold(f32::MIN, f32::max) as f64;
        assert!((peak - 1.0).abs() < 0.01, "{peak}");
    }

    #[test]
    fn shape_validation() {
        assert!(PulseShape::new(1.0, 100, 50).is_err());
        assert!(PulseShape::new(0.0, 10, 50).is_err());
        assert!(PulseShape::new(1.0, 0, 50).is_err());
    }

    #[test]
    fn crossing_time_is_interpolated() {
        let w = Waveform::new(vec![0.0, 0.0, 1.0, 1.0], 1_000, 5_000, Polarity::Positive).unwrap();
        let cfg = DiscriminatorConfig { threshold: 0.25, rearm_dead_ps: 0, polarity: Polarity::Positive };
        let s = discriminate(&w, &cfg, Channel::Herald).unwrap();
        assert_eq!(s.timestamps(), &[6_250]);
        assert_eq!(s.duration_ps(), 9_000);
    }

    #[test]
    fn negative_polarity() {
        let w = Waveform::new(vec![0.0, -1.0, 0.0, -1.0], 1_000, 0, Polarity::Negative).unwrap();
        let cfg = DiscriminatorConfig { threshold: 0.5, rearm_dead_ps: 0, polarity: Polarity::Negative };
        assert_eq!(discriminate(&w, &cfg, Channel::Signal).unwrap().len(), 2);
    }

    #[test]
    fn replica_counts() {
        let r = replica_trace().unwrap();
        let count = |c: &DiscriminatorConfig| discriminate(&r.waveform, c, Channel::Signal).unwrap().len();
        assert_eq!(count(&r.high), 3);
        assert_eq!(count(&r.mid), 5);
        assert_eq!(count(&r.low), 4);
    }

    #[test]
    fn byte_round_trip_is_exact() {
        let w = synthesize(&[500 * NS], &shape(), 0.01, 3_000 * NS, NS, 4).unwrap();
        let back = Waveform::from_le_bytes(&w.to_le_bytes(), &w.header()).unwrap();
        assert_eq!(back, w);
        assert!(Waveform::from_le_bytes(&[0, 1, 2], &w.header()).is_err());
    }

    #[test]
    fn noise_only_heights_sit_near_zero() {
        let w = synthesize(&[], &shape(), 0.02, 2_000_000 * NS, NS, 9).unwrap();
        let cfg = DiscriminatorConfig { threshold: 0.0, rearm_dead_ps: 500 * NS, polarity: Polarity::Positive };
        let h = pulse_height_histogram(&w, &cfg, &HistogramBins { min: -0.5, max: 2.5, count: 60 }).unwrap();
        let (mode, _) = h.counts.iter().enumerate().max_by_key(|(_, &c)| c).unwrap();
        assert!(h.centers()[mode].abs() < 0.15);
        assert!(h.total() > 1000);
        let above: u64 = h.counts.iter().zip(h.centers()).filter(|(_, c)| *c > 0.3).map(|(n, _)| n).sum();
        assert_eq!(above, 0);
    }

    #[test]
    fn histogram_edges() {
        let h = Histogram::new(&[0.0, 0.5, 0.99, 1.0, -0.1], &HistogramBins { min: 0.0, max: 1.0, count: 2 }).unwrap();
        assert_eq!(h.bin_edges, vec![0.0, 0.5, 1.0]);
        assert_eq!(h.counts, vec![1, 2]);
    }
}
