//! CHSH statistics for a visibility-damped maximally entangled pair.
//!
//! Polarization correlations follow `E(a, b) = V cos 2(a - b)`. Each
//! analyzer setting pair is measured with all four outcome combinations,
//! and the coincidence counts are Poisson with means proportional to the
//! outcome probabilities and the overall transmission.

use std::f64::consts::PI;

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerAngles {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl AnalyzerAngles {
    /// 0, pi/4 for the first party and pi/8, 3 pi/8 for the second.
    pub fn canonical() -> Self {
        Self { a: 0.0, a_prime: PI / 4.0, b: PI / 8.0, b_prime: 3.0 * PI / 8.0 }
    }

    /// Setting pairs in the order they enter `S = E1 - E2 + E3 + E4`.
    pub fn settings(&self) -> [(f64, f64); 4] {
        [(self.a, self.b), (self.a, self.b_prime), (self.a_prime, self.b), (self.a_prime, self.b_prime)]
    }
}

const SIGNS: [f64; 4] = [1.0, -1.0, 1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntangledModel {
    pub visibility: f64,
    pub angles: AnalyzerAngles,
    pub heralding_eta: f64,
    pub analyzer_transmission: f64,
}

impl EntangledModel {
    pub fn new(visibility: f64) -> Self {
        Self { visibility, angles: AnalyzerAngles::canonical(), heralding_eta: 0.797, analyzer_transmission: 0.85 }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.visibility) || !unit(self.heralding_eta) || !unit(self.analyzer_transmission) {
            return Err(Error::validation("visibility and transmissions must lie in [0, 1]"));
        }
        let a = &self.angles;
        if ![a.a, a.a_prime, a.b, a.b_prime].iter().all(|x| x.is_finite()) {
            return Err(Error::validation("analyzer angles must be finite"));
        }
        Ok(())
    }

    /// Probability that a pair yields a coincidence at all, with one
    /// polarizer in each arm.
    pub fn detection_probability(&self) -> f64 {
        self.heralding_eta * self.analyzer_transmission * self.analyzer_transmission
    }
}

pub fn correlation(a: f64, b: f64, m: &EntangledModel) -> f64 {
    m.visibility * (2.0 * (a - b)).cos()
}

/// Outcome probabilities `[++, +-, -+, --]` for one setting pair, given a
/// coincidence.
pub fn outcome_probabilities(a: f64, b: f64, m: &EntangledModel) -> [f64; 4] {
    let e = correlation(a, b, m);
    [(1.0 + e) / 4.0, (1.0 - e) / 4.0, (1.0 - e) / 4.0, (1.0 + e) / 4.0]
}

pub fn chsh_s(m: &EntangledModel) -> f64 {
    m.angles.settings().iter().zip(SIGNS).map(|(&(a, b), sign)| sign * correlation(a, b, m)).sum()
}

/// Correlation recovered from four outcome weights (counts or expected counts).
pub fn correlation_from_counts(c: [f64; 4]) -> Option<f64> {
    let total: f64 = c.iter().sum();
    (total > 0.0).then(|| (c[0] + c[3] - c[1] - c[2]) / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SettingResult {
    pub a: f64,
    pub b: f64,
    /// Coincidences for outcomes `[++, +-, -+, --]`.
    pub counts: [u64; 4],
    pub correlation: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub settings: Vec<SettingResult>,
    pub s: f64,
    pub std_error: f64,
}

/// Expected coincidences per outcome combination for one setting pair.
pub fn expected_counts(a: f64, b: f64, m: &EntangledModel, pair_rate_hz: f64, integration_s: f64) -> [f64; 4] {
    let scale = pair_rate_hz * integration_s * m.detection_probability();
    outcome_probabilities(a, b, m).map(|p| scale * p)
}

/// One simulated CHSH run. Every outcome combination of every setting is
/// integrated for `integration_s_per_setting`.
pub fn simulate_chsh(
    m: &EntangledModel,
    pair_rate_hz: f64,
    integration_s_per_setting: f64,
    seed: u64,
) -> Result<ChshResult> {
    simulate_chsh_trial(m, pair_rate_hz, integration_s_per_setting, seed, 0)
}

pub fn simulate_chsh_trial(
    m: &EntangledModel,
    pair_rate_hz: f64,
    integration_s_per_setting: f64,
    seed: u64,
    trial: u64,
) -> Result<ChshResult> {
    m.validate()?;
    if !(pair_rate_hz.is_finite() && pair_rate_hz >= 0.0)
        || integration_s_per_setting.is_nan()
        || integration_s_per_setting <= 0.0
    {
        return Err(Error::validation("pair rate and integration time must be positive"));
    }
    let mut rng = substream(seed, trial, Purpose::Bell);
    let mut settings = Vec::with_capacity(4);
    for (a, b) in m.angles.settings() {
        let mean = expected_counts(a, b, m, pair_rate_hz, integration_s_per_setting);
        let counts = mean.map(|mu| if mu > 0.0 { Poisson::new(mu).unwrap().sample(&mut rng) as u64 } else { 0 });
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::ModelViolation(format!(
                "no coincidences at setting ({a:.4}, {b:.4}); correlation undefined"
            )));
        }
        let same = (counts[0] + counts[3]) as f64;
        let diff = (counts[1] + counts[2]) as f64;
        let total = n as f64;
        settings.push(SettingResult {
            a,
            b,
            counts,
            correlation: (same - diff) / total,
            std_error: (4.0 * same * diff / total.powi(3)).sqrt(),
        });
    }
    let s = settings.iter().zip(SIGNS).map(|(r, sign)| sign * r.correlation).sum();
    let std_error = settings.iter().map(|r| r.std_error * r.std_error).sum::<f64>().sqrt();
    Ok(ChshResult { settings, s, std_error })
}

/// Independent repetitions on per-trial RNG substreams.
pub fn simulate_chsh_trials(
    m: &EntangledModel,
    pair_rate_hz: f64,
    integration_s_per_setting: f64,
    seed: u64,
    trials: u64,
) -> Result<Vec<ChshResult>> {
    (0..trials)
        .into_par_iter()
        .map(|k| simulate_chsh_trial(m, pair_rate_hz, integration_s_per_setting, seed, k))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_limits() {
        let m = EntangledModel::new(1.0);
        assert_eq!(correlation(0.3, 0.3, &m), 1.0);
        let m0 = EntangledModel::new(0.0);
        assert_eq!(correlation(0.1, 1.2, &m0), 0.0);
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn s_values() {
        assert!((chsh_s(&EntangledModel::new(1.0)) - 2.0 * 2f64.sqrt()).abs() < 1e-9);
        assert!((chsh_s(&EntangledModel::new(0.7071)) - 2.0).abs() < 1e-4);
        assert!((chsh_s(&EntangledModel::new(0.8874)) - 2.510).abs() < 1e-3);
    }

    #[test]
    fn visibility_from_s() {
        let v = 2.51 / (2.0 * 2f64.sqrt());
        assert!((v - 0.8874).abs() < 1e-4);
    }

    #[test]
    fn analytic_counts_reproduce_s_independent_of_loss() {
        let mut m = EntangledModel::new(1.0);
        let s_of = |m: &EntangledModel| -> f64 {
            m.angles
                .settings()
                .iter()
                .zip(SIGNS)
                .map(|(&(a, b), sign)| sign * correlation_from_counts(expected_counts(a, b, m, 1e5, 10.0)).unwrap())
                .sum()
        };
        assert!((s_of(&m) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        m.analyzer_transmission = 0.3;
        m.heralding_eta = 0.2;
        assert!((s_of(&m) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_rate_is_flagged() {
        let r = simulate_chsh(&EntangledModel::new(0.9), 0.0, 10.0, 1);
        assert!(matches!(r, Err(Error::ModelViolation(_))));
    }

    #[test]
    fn simulation_is_deterministic() {
        let m = EntangledModel::new(0.8874);
        assert_eq!(simulate_chsh(&m, 5000.0, 1.0, 3).unwrap(), simulate_chsh(&m, 5000.0, 1.0, 3).unwrap());
    }
}
