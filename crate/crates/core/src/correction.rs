//! Accidental-coincidence and dead-time model of a two-detector pair source.
//!
//! Forward model, with pair rate `R`, arm efficiencies `eta1` (signal) and
//! `eta2` (herald):
//!
//! ```text
//! S1 = R eta1 (1 - S1 tau_d1)          S2 = R eta2 (1 - S2 tau_d2)
//! CC = CC0 + R10 + R01 + R11
//! CC0 = R eta1 eta2
//! R10 = R01 = 1/2 tau_w R^2 eta1 eta2 (1 - eta1)(1 - eta2)
//! R11 = -tau_sat R^2 eta1^2 eta2^2
//! ```
//!
//! `tau_sat` is the longer pulse length, or the longest detector dead-time
//! if that is longer still. For equal pulse lengths it is `tau_w / 2`.
//!
//! The inverse problem recovers `(R, eta1, eta2)` from measured
//! `(S1, S2, CC)` by damped Newton iteration, and the measurement
//! uncertainty is carried through either by a finite-difference Jacobian or
//! by Poisson resampling.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coincidence::{CoincidenceConfig, CountsSummary};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::{substream, Purpose};
use crate::stream::PS_PER_S;

/// Upper limit on `R tau_w` and `R eta tau_d`; the model is first order in
/// these products.
pub const MAX_RATE_WINDOW_PRODUCT: f64 = 0.5;

const MAX_ITERATIONS: usize = 100;
const RESIDUAL_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowParams {
    pub tau_w_ps: i64,
    pub tau_max_ps: i64,
    pub tau_d_signal_ps: i64,
    pub tau_d_herald_ps: i64,
}

impl Default for WindowParams {
    /// 1.05 us window, 1 us longest pulse, TTL lengths as dead-times.
    fn default() -> Self {
        Self::from_coincidence(&CoincidenceConfig::default())
    }
}

impl WindowParams {
    /// Window parameters implied by the coincidence logic, with each
    /// channel's pulse length acting as its dead-time.
    pub fn from_coincidence(cfg: &CoincidenceConfig) -> Self {
        Self {
            tau_w_ps: cfg.window_ps(),
            tau_max_ps: cfg.pulse_len_signal_ps.max(cfg.pulse_len_herald_ps),
            tau_d_signal_ps: cfg.pulse_len_signal_ps,
            tau_d_herald_ps: cfg.pulse_len_herald_ps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.tau_w_ps, self.tau_max_ps, self.tau_d_signal_ps, self.tau_d_herald_ps].iter().any(|&t| t < 0) {
            return Err(Error::validation("window times must be non-negative"));
        }
        if self.tau_max_ps > self.tau_w_ps {
            return Err(Error::validation("tau_max_ps must not exceed tau_w_ps"));
        }
        Ok(())
    }

    pub fn tau_w_s(&self) -> f64 {
        self.tau_w_ps as f64 / PS_PER_S
    }

    /// Effective blind time for a second coincidence.
    pub fn tau_sat_s(&self) -> f64 {
        self.tau_max_ps.max(self.tau_d_signal_ps).max(self.tau_d_herald_ps) as f64 / PS_PER_S
    }

    pub fn tau_d_signal_s(&self) -> f64 {
        self.tau_d_signal_ps as f64 / PS_PER_S
    }

    pub fn tau_d_herald_s(&self) -> f64 {
        self.tau_d_herald_ps as f64 / PS_PER_S
    }
}

/// Recovered source parameters with one-standard-deviation uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedEstimate {
    pub pair_rate_hz: f64,
    pub eta_signal: f64,
    pub eta_herald: f64,
    pub sigma_eta_signal: f64,
    pub sigma_eta_herald: f64,
    pub sigma_pair_rate: f64,
}

/// Central solution of the inverse problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub pair_rate_hz: f64,
    pub eta_signal: f64,
    pub eta_herald: f64,
    pub iterations: usize,
    pub max_relative_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uncertainty {
    pub sigma_pair_rate: f64,
    pub sigma_eta_signal: f64,
    pub sigma_eta_herald: f64,
}

/// The three rate corrections to the uncorrelated coincidence rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccidentalTerms {
    pub r10: f64,
    pub r01: f64,
    pub r11: f64,
}

impl AccidentalTerms {
    pub fn total(&self) -> f64 {
        self.r10 + self.r01 + self.r11
    }
}

fn check_params(r0: f64, eta1: f64, eta2: f64, w: &WindowParams) -> Result<()> {
    w.validate()?;
    if !(r0.is_finite() && r0 >= 0.0) {
        return Err(Error::validation("pair rate must be finite and non-negative"));
    }
    if !(0.0..=1.0).contains(&eta1) || !(0.0..=1.0).contains(&eta2) {
        return Err(Error::validation("efficiencies must lie in [0, 1]"));
    }
    if r0 * w.tau_w_s() >= MAX_RATE_WINDOW_PRODUCT {
        return Err(Error::validation(format!(
            "R0 tau_w = {:.3} outside model validity (< {MAX_RATE_WINDOW_PRODUCT})",
            r0 * w.tau_w_s()
        )));
    }
    Ok(())
}

/// Detected singles rate behind a non-paralyzable dead-time,
/// `S = R eta / (1 + R eta tau_d)`.
pub fn forward_singles(r0: f64, eta: f64, tau_d_s: f64) -> Result<f64> {
    if !(r0.is_finite() && r0 >= 0.0 && (0.0..=1.0).contains(&eta) && tau_d_s >= 0.0) {
        return Err(Error::validation("invalid singles parameters"));
    }
    let a = r0 * eta;
    if a * tau_d_s >= MAX_RATE_WINDOW_PRODUCT {
        return Err(Error::validation(format!("R0 eta tau_d = {:.3} outside model validity", a * tau_d_s)));
    }
    Ok(a / (1.0 + a * tau_d_s))
}

pub fn accidental_rate(r0: f64, eta1: f64, eta2: f64, w: &WindowParams) -> Result<AccidentalTerms> {
    check_params(r0, eta1, eta2, w)?;
    let pair = r0 * r0 * eta1 * eta2;
    let r10 = 0.5 * w.tau_w_s() * pair * (1.0 - eta1) * (1.0 - eta2);
    Ok(AccidentalTerms { r10, r01: r10, r11: -w.tau_sat_s() * pair * eta1 * eta2 })
}

/// Observed coincidence rate, summed from its four contributions.
pub fn forward_cc(r0: f64, eta1: f64, eta2: f64, w: &WindowParams) -> Result<f64> {
    let terms = accidental_rate(r0, eta1, eta2, w)?;
    Ok(r0 * eta1 * eta2 + terms.r10 + terms.r01 + terms.r11)
}

/// Same rate in factored form, `CC0 (1 + tau_w R a - tau_sat R eta1 eta2)`.
pub fn forward_cc_factored(r0: f64, eta1: f64, eta2: f64, w: &WindowParams) -> Result<f64> {
    check_params(r0, eta1, eta2, w)?;
    let cc0 = r0 * eta1 * eta2;
    Ok(cc0 * (1.0 + w.tau_w_s() * r0 * (1.0 - eta1) * (1.0 - eta2) - w.tau_sat_s() * r0 * eta1 * eta2))
}

/// Model rates and their Jacobian with respect to `(R, eta1, eta2)`.
fn model_with_jacobian(x: [f64; 3], w: &WindowParams) -> ([f64; 3], [[f64; 3]; 3]) {
    let [r, e1, e2] = x;
    let (td1, td2) = (w.tau_d_signal_s(), w.tau_d_herald_s());
    let (tw, ts) = (w.tau_w_s(), w.tau_sat_s());

    let d1 = 1.0 + r * e1 * td1;
    let d2 = 1.0 + r * e2 * td2;
    let s1 = r * e1 / d1;
    let s2 = r * e2 / d2;

    let p = e1 * e2;
    let a = (1.0 - e1) * (1.0 - e2);
    let cc = r * p + tw * r * r * p * a - ts * r * r * p * p;

    let jac = [
        [e1 / (d1 * d1), r / (d1 * d1), 0.0],
        [e2 / (d2 * d2), 0.0, r / (d2 * d2)],
        [
            p + 2.0 * tw * r * p * a - 2.0 * ts * r * p * p,
            r * e2 + tw * r * r * e2 * (1.0 - e2) * (1.0 - 2.0 * e1) - 2.0 * ts * r * r * e1 * e2 * e2,
            r * e1 + tw * r * r * e1 * (1.0 - e1) * (1.0 - 2.0 * e2) - 2.0 * ts * r * r * e1 * e1 * e2,
        ],
    ];
    ([s1, s2, cc], jac)
}

fn relative_residual(x: [f64; 3], target: [f64; 3], w: &WindowParams) -> [f64; 3] {
    let (m, _) = model_with_jacobian(x, w);
    [m[0] / target[0] - 1.0, m[1] / target[1] - 1.0, m[2] / target[2] - 1.0]
}

fn max_abs(v: [f64; 3]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn norm2(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Damped Newton solve of the three rate equations from the uncorrected
/// seed `R = S1 S2 / CC`, `eta1 = CC / S2`, `eta2 = CC / S1`.
pub fn solve_rates(s1: f64, s2: f64, cc: f64, w: &WindowParams) -> Result<Solution> {
    w.validate()?;
    if ![s1, s2, cc].iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(Error::validation("measured rates must be positive"));
    }
    if cc > s1.min(s2) {
        return Err(Error::validation(format!("coincidence rate {cc} exceeds a singles rate ({s1}, {s2})")));
    }
    let target = [s1, s2, cc];
    let mut x = [s1 * s2 / cc, cc / s2, cc / s1];
    let mut f = relative_residual(x, target, w);
    let mut iterations = 0;
    while max_abs(f) > RESIDUAL_TOLERANCE {
        if iterations == MAX_ITERATIONS {
            return Err(Error::Convergence { iterations, residual: max_abs(f) });
        }
        iterations += 1;
        let (_, jac) = model_with_jacobian(x, w);
        let mut scaled = jac;
        for (row, t) in scaled.iter_mut().zip(target) {
            row.iter_mut().for_each(|v| *v /= t);
        }
        let step = linalg::solve(scaled, [-f[0], -f[1], -f[2]])
            .ok_or(Error::Convergence { iterations, residual: max_abs(f) })?;
        let mut damping = 1.0;
        loop {
            let trial = [x[0] + damping * step[0], x[1] + damping * step[1], x[2] + damping * step[2]];
            if trial.iter().all(|v| *v > 0.0) {
                let ft = relative_residual(trial, target, w);
                if norm2(ft) < norm2(f) || damping < 1e-3 && norm2(ft).is_finite() {
                    x = trial;
                    f = ft;
                    break;
                }
            }
            damping *= 0.5;
            if damping < 1e-10 {
                return Err(Error::Convergence { iterations, residual: max_abs(f) });
            }
        }
    }
    let [r, e1, e2] = x;
    if !(e1 > 0.0 && e1 <= 1.0 && e2 > 0.0 && e2 <= 1.0) {
        return Err(Error::ModelViolation(format!("solved efficiencies ({e1:.4}, {e2:.4}) fall outside (0, 1]")));
    }
    if r * w.tau_w_s() >= MAX_RATE_WINDOW_PRODUCT {
        return Err(Error::ModelViolation(format!("solved pair rate {r:.1} Hz outside model validity")));
    }
    Ok(Solution { pair_rate_hz: r, eta_signal: e1, eta_herald: e2, iterations, max_relative_residual: max_abs(f) })
}

/// How the three measured counts fluctuate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountModel {
    /// Each of `N1`, `N2`, `Ncc` is an independent Poisson variable.
    #[default]
    Independent,
    /// Coincidences are shared by both singles counts:
    /// `N1 = Ncc + U1`, `N2 = Ncc + U2` with `Ncc`, `U1`, `U2` independent
    /// Poisson variables.
    SharedCoincidences,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMode {
    /// Central finite-difference Jacobian with steps of one hundredth of
    /// each rate's standard deviation.
    Jacobian,
    /// Resample the counts and re-solve `draws` times.
    MonteCarlo { draws: usize, seed: u64 },
}

/// Smallest number of resampling draws accepted in Monte Carlo mode.
pub const MIN_MONTE_CARLO_DRAWS: usize = 10_000;

fn measured_rates(m: &CountsSummary) -> [f64; 3] {
    [m.singles_signal_hz, m.singles_herald_hz, m.coincidences_hz]
}

/// Rate covariance matrix under the chosen count model.
fn rate_covariance(m: &CountsSummary, model: CountModel) -> [[f64; 3]; 3] {
    let t = m.duration_s;
    let v = measured_rates(m).map(|r| r / t);
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        cov[i][i] = v[i];
    }
    if model == CountModel::SharedCoincidences {
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            cov[i][j] = v[2];
            cov[j][i] = v[2];
        }
    }
    cov
}

pub fn propagate_errors(
    measured: &CountsSummary,
    w: &WindowParams,
    mode: PropagationMode,
    counts: CountModel,
) -> Result<Uncertainty> {
    if !(measured.duration_s.is_finite() && measured.duration_s > 0.0) {
        return Err(Error::validation("duration_s must be positive"));
    }
    let rates = measured_rates(measured);
    solve_rates(rates[0], rates[1], rates[2], w)?;
    match mode {
        PropagationMode::Jacobian => jacobian_errors(measured, w, counts),
        PropagationMode::MonteCarlo { draws, seed } => monte_carlo_errors(measured, w, counts, draws, seed),
    }
}

fn solution_vector(rates: [f64; 3], w: &WindowParams) -> Result<[f64; 3]> {
    let s = solve_rates(rates[0], rates[1], rates[2], w)?;
    Ok([s.pair_rate_hz, s.eta_signal, s.eta_herald])
}

fn jacobian_errors(measured: &CountsSummary, w: &WindowParams, counts: CountModel) -> Result<Uncertainty> {
    let rates = measured_rates(measured);
    let cov = rate_covariance(measured, counts);
    // jac[k][i] = d output_k / d rate_i
    let mut jac = [[0.0; 3]; 3];
    for i in 0..3 {
        let h = cov[i][i].sqrt() / 100.0;
        let mut up = rates;
        let mut down = rates;
        up[i] += h;
        down[i] -= h;
        let (xu, xd) = (solution_vector(up, w)?, solution_vector(down, w)?);
        for k in 0..3 {
            jac[k][i] = (xu[k] - xd[k]) / (2.0 * h);
        }
    }
    let var = |k: usize| -> f64 {
        (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| jac[k][i] * cov[i][j] * jac[k][j]).sum()
    };
    Ok(Uncertainty {
        sigma_pair_rate: var(0).max(0.0).sqrt(),
        sigma_eta_signal: var(1).max(0.0).sqrt(),
        sigma_eta_herald: var(2).max(0.0).sqrt(),
    })
}

fn poisson_draw<R: rand::Rng>(rng: &mut R, mean: f64) -> f64 {
    if mean <= 0.0 {
        0.0
    } else {
        Poisson::new(mean).expect("positive mean").sample(rng)
    }
}

fn monte_carlo_errors(
    measured: &CountsSummary,
    w: &WindowParams,
    counts: CountModel,
    draws: usize,
    seed: u64,
) -> Result<Uncertainty> {
    if draws < MIN_MONTE_CARLO_DRAWS {
        return Err(Error::validation(format!("Monte Carlo propagation needs at least {MIN_MONTE_CARLO_DRAWS} draws")));
    }
    let t = measured.duration_s;
    let [n1, n2, nc] = measured_rates(measured).map(|r| r * t);
    let samples: Vec<Option<[f64; 3]>> = (0..draws as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k, Purpose::Resample);
            let drawn = match counts {
                CountModel::Independent => {
                    [poisson_draw(&mut rng, n1), poisson_draw(&mut rng, n2), poisson_draw(&mut rng, nc)]
                }
                CountModel::SharedCoincidences => {
                    let c = poisson_draw(&mut rng, nc);
                    let u1 = poisson_draw(&mut rng, n1 - nc);
                    let u2 = poisson_draw(&mut rng, n2 - nc);
                    [c + u1, c + u2, c]
                }
            };
            solution_vector(drawn.map(|n| n / t), w).ok()
        })
        .collect();
    let ok: Vec<[f64; 3]> = samples.into_iter().flatten().collect();
    if ok.len() * 100 < draws * 99 {
        return Err(Error::ModelViolation(format!("{} of {draws} resampled solves failed", draws - ok.len())));
    }
    let n = ok.len() as f64;
    let sd = |k: usize| {
        let mean = ok.iter().map(|x| x[k]).sum::<f64>() / n;
        (ok.iter().map(|x| (x[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Ok(Uncertainty { sigma_pair_rate: sd(0), sigma_eta_signal: sd(1), sigma_eta_herald: sd(2) })
}

/// Solves for `(R, eta1, eta2)` and attaches Jacobian uncertainties under
/// independent Poisson counts.
pub fn solve_inverse(measured: &CountsSummary, w: &WindowParams) -> Result<CorrectedEstimate> {
    solve_inverse_with(measured, w, PropagationMode::Jacobian, CountModel::Independent)
}

pub fn solve_inverse_with(
    measured: &CountsSummary,
    w: &WindowParams,
    mode: PropagationMode,
    counts: CountModel,
) -> Result<CorrectedEstimate> {
    let r = measured_rates(measured);
    let s = solve_rates(r[0], r[1], r[2], w)?;
    let u = propagate_errors(measured, w, mode, counts)?;
    Ok(CorrectedEstimate {
        pair_rate_hz: s.pair_rate_hz,
        eta_signal: s.eta_signal,
        eta_herald: s.eta_herald,
        sigma_eta_signal: u.sigma_eta_signal,
        sigma_eta_herald: u.sigma_eta_herald,
        sigma_pair_rate: u.sigma_pair_rate,
    })
}
