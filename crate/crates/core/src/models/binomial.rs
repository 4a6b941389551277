//! One binomial proportion with a normal prior on its logit; the summary is the
//! plug-in variance of the estimated proportion.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use super::{labels, ModelSpec};
use crate::domain::SummaryVector;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinomialModel {
    pub trials: u64,
}

impl BinomialModel {
    pub fn new(trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::Config("binomial model needs at least one trial".into()));
        }
        Ok(Self { trials })
    }

    /// `(y/n)(1 - y/n)/n`.
    pub fn summary(&self, successes: u64) -> f64 {
        let n = self.trials as f64;
        let p = successes as f64 / n;
        p * (1.0 - p) / n
    }
}

impl ModelSpec for BinomialModel {
    fn name(&self) -> &str {
        "binomial"
    }
    fn dim(&self) -> usize {
        1
    }
    fn hyper_labels(&self) -> Vec<String> {
        labels(&["sigma_beta"])
    }
    fn summary_labels(&self) -> Vec<String> {
        labels(&["S"])
    }
    fn simulate_summaries(&self, lambda: &[f64], seed: u64) -> Result<SummaryVector> {
        let mut g = rng::stream(seed);
        let z: f64 = g.sample(StandardNormal);
        let p = 1.0 / (1.0 + libm::exp(-lambda[0] * z));
        let y = Binomial::new(self.trials, p)
            .map_err(|e| Error::Simulation { lambda: lambda.to_vec(), reason: format!("{e}") })?
            .sample(&mut g);
        Ok(SummaryVector(vec![self.summary(y)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes_give_zero_and_tiny_prior_gives_quarter() {
        let m = BinomialModel::new(20).unwrap();
        assert_eq!(m.summary(0), 0.0);
        assert_eq!(m.summary(20), 0.0);
        let near = (0..2000)
            .map(|s| m.simulate_summaries(&[1e-6], s).unwrap().0[0])
            .filter(|v| (v - 0.25 / 20.0).abs() < 0.0025)
            .count();
        assert!(near > 1900, "{near}");
    }

    #[test]
    fn diffuse_prior_piles_up_near_zero() {
        let m = BinomialModel::new(20).unwrap();
        let cut = 0.25 / 80.0;
        let frac = |sd: f64| {
            (0..20_000).filter(|&s| m.simulate_summaries(&[sd], s).unwrap().0[0] < cut).count() as f64 / 20_000.0
        };
        assert!(frac(100.0) >= 0.9);
        assert!(frac(0.5) <= 0.1);
    }
}
