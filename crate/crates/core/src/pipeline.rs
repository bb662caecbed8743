//! Simulate, count, correct, and compare the estimate with the truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coincidence::{count_coincidences, heralding_ratio, CoincidenceConfig, CountsSummary, HeraldingRatio};
use crate::correction::{
    propagate_errors, solve_inverse, CorrectedEstimate, CountModel, PropagationMode, Uncertainty, WindowParams,
};
use crate::error::{Error, Result};
use crate::sim::{simulate_trial, SourceModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub source: SourceModel,
    pub coincidence: CoincidenceConfig,
}

impl PipelineConfig {
    pub fn reference_setup(seed: u64) -> Self {
        Self { source: SourceModel::reference_setup(seed), coincidence: CoincidenceConfig::default() }
    }

    /// Correction window matching the simulated logic and detectors.
    pub fn window(&self) -> WindowParams {
        WindowParams {
            tau_w_ps: self.coincidence.window_ps(),
            tau_max_ps: self.coincidence.pulse_len_signal_ps.max(self.coincidence.pulse_len_herald_ps),
            tau_d_signal_ps: self.source.deadtime_signal_ps,
            tau_d_herald_ps: self.source.deadtime_herald_ps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScores {
    pub pair_rate: f64,
    pub eta_signal: f64,
    pub eta_herald: f64,
}

impl ZScores {
    fn new(truth: &SourceModel, est: &CorrectedEstimate, sigma: &Uncertainty) -> Self {
        Self {
            pair_rate: (est.pair_rate_hz - truth.pair_rate_hz) / sigma.sigma_pair_rate,
            eta_signal: (est.eta_signal - truth.eta_signal) / sigma.sigma_eta_signal,
            eta_herald: (est.eta_herald - truth.eta_herald) / sigma.sigma_eta_herald,
        }
    }
}

/// Corrected estimate of one run with its recovery z-scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub estimate: CorrectedEstimate,
    /// Uncertainties when the singles share the coincidence counts.
    pub shared_uncertainty: Uncertainty,
    /// Recovery z-scores against the independent-count uncertainties.
    pub z_scores: ZScores,
    /// Recovery z-scores against the shared-count uncertainties.
    pub z_scores_shared: ZScores,
}

/// One closed simulate-count-correct run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub trial: u64,
    pub measured: CountsSummary,
    pub raw_ratio: HeraldingRatio,
    /// Absent when the solved efficiencies leave (0, 1], which happens by
    /// chance when a true efficiency sits at 1.
    #[serde(flatten)]
    pub recovery: Option<Recovery>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_violation: Option<String>,
}

fn recover(cfg: &PipelineConfig, measured: &CountsSummary) -> Result<Recovery> {
    let window = cfg.window();
    let estimate = solve_inverse(measured, &window)?;
    let shared = propagate_errors(measured, &window, PropagationMode::Jacobian, CountModel::SharedCoincidences)?;
    let independent = Uncertainty {
        sigma_pair_rate: estimate.sigma_pair_rate,
        sigma_eta_signal: estimate.sigma_eta_signal,
        sigma_eta_herald: estimate.sigma_eta_herald,
    };
    Ok(Recovery {
        z_scores: ZScores::new(&cfg.source, &estimate, &independent),
        z_scores_shared: ZScores::new(&cfg.source, &estimate, &shared),
        estimate,
        shared_uncertainty: shared,
    })
}

pub fn run_pipeline(cfg: &PipelineConfig, trial: u64) -> Result<PipelineRun> {
    let (signal, herald) = simulate_trial(&cfg.source, trial)?;
    let measured = count_coincidences(&signal, &herald, &cfg.coincidence)?;
    let (recovery, model_violation) = match recover(cfg, &measured) {
        Ok(r) => (Some(r), None),
        Err(Error::ModelViolation(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    Ok(PipelineRun { trial, raw_ratio: heralding_ratio(&measured)?, measured, recovery, model_violation })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZSummary {
    pub mean: f64,
    pub std_dev: f64,
}

impl ZSummary {
    pub fn of(values: impl Iterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self { mean, std_dev: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub runs: Vec<PipelineRun>,
    /// Runs whose estimate fell outside the physical range; excluded from
    /// the z-score summaries.
    pub model_violations: usize,
    pub eta_signal_z: ZSummary,
    pub eta_signal_z_shared: ZSummary,
    pub eta_herald_z: ZSummary,
    pub eta_herald_z_shared: ZSummary,
}

/// Runs trials `0..trials` in parallel on independent RNG substreams.
pub fn run_batch(cfg: &PipelineConfig, trials: u64) -> Result<BatchReport> {
    let runs = (0..trials).into_par_iter().map(|k| run_pipeline(cfg, k)).collect::<Result<Vec<_>>>()?;
    let ok: Vec<&Recovery> = runs.iter().filter_map(|r| r.recovery.as_ref()).collect();
    Ok(BatchReport {
        model_violations: runs.len() - ok.len(),
        eta_signal_z: ZSummary::of(ok.iter().map(|r| r.z_scores.eta_signal)),
        eta_signal_z_shared: ZSummary::of(ok.iter().map(|r| r.z_scores_shared.eta_signal)),
        eta_herald_z: ZSummary::of(ok.iter().map(|r| r.z_scores.eta_herald)),
        eta_herald_z_shared: ZSummary::of(ok.iter().map(|r| r.z_scores_shared.eta_herald)),
        runs,
    })
}
