//! Dose-response logistic regression with independent Cauchy priors on the
//! intercept and slope, summarized by the fitted binomial variances at the
//! penalized posterior mode.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use super::{labels, ModelSpec};
use crate::domain::SummaryVector;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats;

/// Raw dose levels; [`LogisticModel::default`] standardizes them.
pub const DEFAULT_DOSES: [f64; 4] = [-0.86, -0.30, -0.05, 0.73];
/// Animals per dose group.
pub const GROUP_SIZE: u64 = 5;
/// Variance of the normal penalty used to locate the posterior mode.
pub const PENALTY_VARIANCE: f64 = 100.0;
const MAX_NEWTON: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    doses: [f64; 4],
}

impl Default for LogisticModel {
    fn default() -> Self {
        Self::standardized(DEFAULT_DOSES).expect("default doses are distinct")
    }
}

impl LogisticModel {
    /// Uses `doses` as given.
    pub fn new(doses: [f64; 4]) -> Result<Self> {
        if doses.iter().any(|d| !d.is_finite()) {
            return Err(Error::Config("doses must be finite".into()));
        }
        Ok(Self { doses })
    }

    /// Centers the doses and scales them to unit sample standard deviation.
    pub fn standardized(doses: [f64; 4]) -> Result<Self> {
        let m = stats::mean(&doses);
        let sd = stats::std_dev(&doses);
        if !(sd > 0.0) {
            return Err(Error::Config("doses must not all be equal".into()));
        }
        Self::new(doses.map(|d| (d - m) / sd))
    }

    pub fn doses(&self) -> &[f64; 4] {
        &self.doses
    }

    /// Sum of fitted binomial variances `sum 5 p (1 - p)`.
    pub fn summary_from_fitted(p: &[f64]) -> f64 {
        p.iter().map(|p| GROUP_SIZE as f64 * p * (1.0 - p)).sum()
    }

    /// Posterior mode of `(beta0, beta1)` under independent `N(0, 100)` priors,
    /// by damped Newton. `None` if it fails to converge.
    pub fn penalized_mode(&self, y: &[u64; 4]) -> Option<[f64; 2]> {
        let n = GROUP_SIZE as f64;
        let objective = |b: [f64; 2]| -> f64 {
            let mut v = -(b[0] * b[0] + b[1] * b[1]) / (2.0 * PENALTY_VARIANCE);
            for (x, &yi) in self.doses.iter().zip(y) {
                let eta = b[0] + b[1] * x;
                v += yi as f64 * eta - n * softplus(eta);
            }
            v
        };
        let mut b = [0.0, 0.0];
        let mut f = objective(b);
        for _ in 0..MAX_NEWTON {
            let mut g = [-b[0] / PENALTY_VARIANCE, -b[1] / PENALTY_VARIANCE];
            let mut h = [1.0 / PENALTY_VARIANCE, 0.0, 1.0 / PENALTY_VARIANCE];
            for (x, &yi) in self.doses.iter().zip(y) {
                let p = logistic(b[0] + b[1] * x);
                let r = yi as f64 - n * p;
                let w = n * p * (1.0 - p);
                g[0] += r;
                g[1] += r * x;
                h[0] += w;
                h[1] += w * x;
                h[2] += w * x * x;
            }
            if g[0].abs().max(g[1].abs()) < 1e-10 {
                return Some(b);
            }
            let det = h[0] * h[2] - h[1] * h[1];
            let step = [(h[2] * g[0] - h[1] * g[1]) / det, (h[0] * g[1] - h[1] * g[0]) / det];
            // Near the mode the objective is flat to rounding and the line search cannot
            // see progress; the Newton step is then exact enough to take whole.
            if g[0] * step[0] + g[1] * step[1] < 1e-14 * (1.0 + f.abs()) {
                return Some([b[0] + step[0], b[1] + step[1]]);
            }
            let mut t = 1.0;
            loop {
                let cand = [b[0] + t * step[0], b[1] + t * step[1]];
                let fc = objective(cand);
                if fc >= f || t < 1e-12 {
                    b = cand;
                    f = fc;
                    break;
                }
                t *= 0.5;
            }
            if (t * step[0]).abs().max((t * step[1]).abs()) < 1e-14 {
                return Some(b);
            }
        }
        None
    }

    /// Summary at the penalized mode for observed counts `y`; `NaN` if Newton fails.
    pub fn summary_for(&self, y: &[u64; 4]) -> f64 {
        match self.penalized_mode(y) {
            Some(b) => {
                let p: Vec<f64> = self.doses.iter().map(|x| logistic(b[0] + b[1] * x)).collect();
                Self::summary_from_fitted(&p)
            }
            None => f64::NAN,
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

fn cauchy(scale: f64, u: f64) -> f64 {
    scale * libm::tan(PI * (u - 0.5))
}

impl ModelSpec for LogisticModel {
    fn name(&self) -> &str {
        "logistic"
    }
    fn dim(&self) -> usize {
        2
    }
    fn hyper_labels(&self) -> Vec<String> {
        labels(&["lambda1", "lambda2"])
    }
    fn summary_labels(&self) -> Vec<String> {
        labels(&["S1"])
    }
    fn simulate_summaries(&self, lambda: &[f64], seed: u64) -> Result<SummaryVector> {
        let mut g = rng::stream(seed);
        let b0 = cauchy(lambda[0], g.random());
        let b1 = cauchy(lambda[1], g.random());
        let mut y = [0u64; 4];
        for (yi, x) in y.iter_mut().zip(&self.doses) {
            *yi = Binomial::new(GROUP_SIZE, logistic(b0 + b1 * x))
                .map_err(|e| Error::Simulation { lambda: lambda.to_vec(), reason: format!("{e}") })?
                .sample(&mut g);
        }
        Ok(SummaryVector(vec![self.summary_for(&y)]))
    }
}
