//! Gaussian-plus-baseline least-squares fit used for delay-scan profiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sim::fwhm_per_sigma;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub amplitude: f64,
    pub center: f64,
    pub sigma: f64,
    pub baseline: f64,
}

impl GaussianFit {
    pub fn fwhm(&self) -> f64 {
        self.sigma * fwhm_per_sigma()
    }

    /// FWHM after removing a rectangular acceptance window of the given
    /// width, convolved into the profile, in quadrature of variances.
    pub fn fwhm_deconvolved(&self, window: f64) -> f64 {
        let var = self.sigma * self.sigma - window * window / 12.0;
        var.max(0.0).sqrt() * fwhm_per_sigma()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.center) / self.sigma;
        self.baseline + self.amplitude * (-0.5 * u * u).exp()
    }
}

fn residual_norm(fit: &GaussianFit, x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(&xi, &yi)| (yi - fit.eval(xi)).powi(2)).sum()
}

/// Levenberg-Marquardt fit of `baseline + amplitude * exp(-(x-center)^2 / 2 sigma^2)`.
pub fn fit_gaussian(x: &[f64], y: &[f64]) -> Result<GaussianFit> {
    if x.len() != y.len() || x.len() < 5 {
        return Err(Error::validation("gaussian fit needs at least five matching points"));
    }
    let (imax, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let ymin = y.iter().copied().fold(f64::INFINITY, f64::min);
    let half = ymin + 0.5 * (ymax - ymin);
    let above: Vec<f64> = x.iter().zip(y).filter(|(_, &v)| v >= half).map(|(&u, _)| u).collect();
    let width = above.last().unwrap() - above.first().unwrap();
    let span = x.last().unwrap() - x.first().unwrap();
    let mut fit = GaussianFit {
        amplitude: ymax - ymin,
        center: x[imax],
        sigma: (width / fwhm_per_sigma()).max(span / (4.0 * x.len() as f64)),
        baseline: ymin,
    };
    let mut cost = residual_norm(&fit, x, y);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (&xi, &yi) in x.iter().zip(y) {
            let u = (xi - fit.center) / fit.sigma;
            let g = (-0.5 * u * u).exp();
            let grad = [g, fit.amplitude * g * u / fit.sigma, fit.amplitude * g * u * u / fit.sigma, 1.0];
            let r = yi - fit.eval(xi);
            for i in 0..4 {
                jtr[i] += grad[i] * r;
                for j in 0..4 {
                    jtj[i][j] += grad[i] * grad[j];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-300);
            }
            let Some(step) = linalg::solve(a, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = GaussianFit {
                amplitude: fit.amplitude + step[0],
                center: fit.center + step[1],
                sigma: (fit.sigma + step[2]).abs(),
                baseline: fit.baseline + step[3],
            };
            let trial_cost = residual_norm(&trial, x, y);
            if trial_cost < cost {
                let rel = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                fit = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if !(fit.sigma.is_finite() && fit.sigma > 0.0) {
        return Err(Error::ModelViolation("gaussian fit diverged".into()));
    }
    Ok(fit)
}
