//! Generative models: prior, data model and summary statistics in one pure function.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::domain::SummaryVector;
use crate::error::{Error, Result};
use crate::rng::{self, tags};

pub mod binomial;
pub mod linear_gaussian;
pub mod logistic;
pub mod shrinkage;

pub use binomial::BinomialModel;
pub use linear_gaussian::LinearGaussianModel;
pub use logistic::LogisticModel;
pub use shrinkage::{refitted_cv_r2, synth_design, DesignMatrix, PriorKind, ShrinkageModel, ShrinkagePriorConfig};

/// Extra attempts, each with a fresh derived seed, after a failed simulation.
pub const SIMULATION_RETRIES: usize = 3;

/// A prior predictive simulator for `J` univariate summaries.
///
/// `simulate_summaries` takes natural-scale hyperparameters and must be a pure
/// function of `(lambda, seed)`. A draw whose summary is undefined comes back
/// with a non-finite entry rather than an error; errors are reserved for
/// failures worth retrying.
pub trait ModelSpec: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn hyper_labels(&self) -> Vec<String>;
    fn summary_labels(&self) -> Vec<String>;
    fn summary_count(&self) -> usize {
        self.summary_labels().len()
    }
    fn simulate_summaries(&self, lambda: &[f64], seed: u64) -> Result<SummaryVector>;
}

/// Runs `model` with up to [`SIMULATION_RETRIES`] reseeded retries.
pub fn simulate_with_retries(model: &dyn ModelSpec, lambda: &[f64], seed: u64) -> Result<SummaryVector> {
    let mut last = String::new();
    for attempt in 0..=SIMULATION_RETRIES {
        let s = if attempt == 0 { seed } else { rng::derive_path(seed, &[tags::RETRY, attempt as u64]) };
        match model.simulate_summaries(lambda, s) {
            Ok(v) if v.len() == model.summary_count() => return Ok(v),
            Ok(v) => {
                return Err(Error::Simulation {
                    lambda: lambda.to_vec(),
                    reason: format!("model returned {} summaries, expected {}", v.len(), model.summary_count()),
                })
            }
            Err(e) => last = format!("{e}"),
        }
    }
    Err(Error::Simulation {
        lambda: lambda.to_vec(),
        reason: format!("failed after {} attempts: {last}", SIMULATION_RETRIES + 1),
    })
}

pub(crate) fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| String::from(*s)).collect()
}
