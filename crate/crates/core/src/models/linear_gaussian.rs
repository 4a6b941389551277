//! `S | lambda ~ N(a + b lambda, c^2)`: a one-parameter model with a closed-form predictive.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{labels, ModelSpec};
use crate::domain::SummaryVector;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearGaussianModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LinearGaussianModel {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite() && a.is_finite() && b.is_finite()) {
            return Err(Error::Config(format!("linear-Gaussian model needs finite a, b and c > 0; got c = {c}")));
        }
        Ok(Self { a, b, c })
    }

    pub fn predictive_mean(&self, lambda: f64) -> f64 {
        self.a + self.b * lambda
    }
}

impl ModelSpec for LinearGaussianModel {
    fn name(&self) -> &str {
        "linear_gaussian"
    }
    fn dim(&self) -> usize {
        1
    }
    fn hyper_labels(&self) -> Vec<String> {
        labels(&["lambda"])
    }
    fn summary_labels(&self) -> Vec<String> {
        labels(&["S"])
    }
    fn simulate_summaries(&self, lambda: &[f64], seed: u64) -> Result<SummaryVector> {
        let z: f64 = rng::stream(seed).sample(StandardNormal);
        Ok(SummaryVector(vec![self.predictive_mean(lambda[0]) + self.c * z]))
    }
}
