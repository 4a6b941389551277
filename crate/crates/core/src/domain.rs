//! Value types shared by every stage of a history match.
//!
//! Hyperparameters live in two coordinate systems. The *natural* scale is what a
//! model consumes; the *search* scale takes the logarithm of every log-scaled
//! coordinate. Designs, perturbations, neighbor distances and regressions all work
//! in search coordinates, so a [`HyperPoint`] always holds search coordinates and
//! [`HyperBox`] converts.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A hyperparameter vector in search coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HyperPoint(Vec<f64>);

impl HyperPoint {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidPoint(format!("non-finite coordinate {v}")));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl core::ops::Index<usize> for HyperPoint {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

impl Scale {
    fn forward(self, x: f64) -> f64 {
        match self {
            Scale::Linear => x,
            Scale::Log => libm::log(x),
        }
    }

    fn inverse(self, x: f64) -> f64 {
        match self {
            Scale::Linear => x,
            Scale::Log => libm::exp(x),
        }
    }
}

/// The admissible rectangle of hyperparameters, bounds given on the natural scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    scale: Vec<Scale>,
}

impl HyperBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, scale: Vec<Scale>) -> Result<Self> {
        let d = lower.len();
        if d == 0 || upper.len() != d || scale.len() != d {
            return Err(Error::InvalidBox(format!(
                "bound lengths disagree (lower {}, upper {}, scale {})",
                d,
                upper.len(),
                scale.len()
            )));
        }
        for i in 0..d {
            let (lo, hi) = (lower[i], upper[i]);
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidBox(format!("coordinate {i} has a non-finite bound")));
            }
            if lo >= hi {
                return Err(Error::InvalidBox(format!(
                    "coordinate {i}: lower {lo} is not below upper {hi}"
                )));
            }
            if scale[i] == Scale::Log && lo <= 0.0 {
                return Err(Error::InvalidBox(format!(
                    "coordinate {i} is log-scaled but its lower bound {lo} is not positive"
                )));
            }
        }
        Ok(Self { lower, upper, scale })
    }

    pub fn linear(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = lower.len();
        Self::new(lower, upper, alloc::vec![Scale::Linear; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn natural_lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn natural_upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn scales(&self) -> &[Scale] {
        &self.scale
    }

    pub fn search_lower(&self, i: usize) -> f64 {
        self.scale[i].forward(self.lower[i])
    }

    pub fn search_upper(&self, i: usize) -> f64 {
        self.scale[i].forward(self.upper[i])
    }

    pub fn search_width(&self, i: usize) -> f64 {
        self.search_upper(i) - self.search_lower(i)
    }

    pub fn to_natural(&self, p: &HyperPoint) -> Vec<f64> {
        p.0.iter()
            .zip(&self.scale)
            .map(|(&x, s)| s.inverse(x))
            .collect()
    }

    /// Converts a natural-scale vector, rejecting values outside the box.
    pub fn from_natural(&self, natural: &[f64]) -> Result<HyperPoint> {
        if natural.len() != self.dim() {
            return Err(Error::InvalidPoint(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                natural.len()
            )));
        }
        for (i, &x) in natural.iter().enumerate() {
            if !(x >= self.lower[i] && x <= self.upper[i]) {
                return Err(Error::InvalidPoint(format!(
                    "coordinate {i} = {x} lies outside [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        HyperPoint::new(
            natural
                .iter()
                .zip(&self.scale)
                .map(|(&x, s)| s.forward(x))
                .collect(),
        )
    }

    /// Membership in search coordinates, bounds inclusive.
    pub fn contains(&self, p: &HyperPoint) -> bool {
        p.dim() == self.dim()
            && (0..self.dim()).all(|i| p[i] >= self.search_lower(i) && p[i] <= self.search_upper(i))
    }

    /// Maps search coordinates into `[0, 1]^d`.
    pub fn to_unit(&self, p: &[f64]) -> Vec<f64> {
        (0..self.dim())
            .map(|i| (p[i] - self.search_lower(i)) / self.search_width(i))
            .collect()
    }

    /// Folds a search-coordinate vector back into the box by mirror reflection.
    pub fn reflect(&self, values: &mut [f64]) {
        for (i, v) in values.iter_mut().enumerate() {
            let lo = self.search_lower(i);
            let w = self.search_width(i);
            let mut t = libm::fmod(*v - lo, 2.0 * w);
            if t < 0.0 {
                t += 2.0 * w;
            }
            if t > w {
                t = 2.0 * w - t;
            }
            *v = (lo + t).clamp(lo, lo + w);
        }
    }
}

/// One simulated value of each summary statistic.
///
/// Non-finite entries mark a degenerate draw (for example `log |median|` of a
/// response with median exactly zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SummaryVector(pub Vec<f64>);

impl SummaryVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.0.iter().any(|v| !v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Implausible,
    Plausible,
}

/// Hypothetical values declared for one summary statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryConstraint {
    pub summary: usize,
    #[serde(default)]
    pub implausible: Vec<f64>,
    #[serde(default)]
    pub plausible: Vec<f64>,
    pub alpha: f64,
}

/// A single prior predictive check: one hypothetical value with its cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub summary: usize,
    pub kind: CheckKind,
    /// Position within this summary's list of values of the same kind.
    pub index: usize,
    pub value: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SummaryConstraint>", into = "Vec<SummaryConstraint>")]
pub struct ConstraintSet {
    entries: Vec<SummaryConstraint>,
}

impl ConstraintSet {
    pub fn new(entries: Vec<SummaryConstraint>) -> Result<Self> {
        let total: usize = entries
            .iter()
            .map(|e| e.implausible.len() + e.plausible.len())
            .sum();
        if total == 0 {
            return Err(Error::InvalidConstraints("no hypothetical values given".into()));
        }
        for (n, e) in entries.iter().enumerate() {
            if !(e.alpha > 0.0 && e.alpha < 1.0) {
                return Err(Error::InvalidConstraints(format!(
                    "summary {}: alpha {} is outside (0, 1)",
                    e.summary, e.alpha
                )));
            }
            if e.implausible.iter().chain(&e.plausible).any(|v| !v.is_finite()) {
                return Err(Error::InvalidConstraints(format!(
                    "summary {}: hypothetical values must be finite",
                    e.summary
                )));
            }
            if entries[..n].iter().any(|o| o.summary == e.summary) {
                return Err(Error::InvalidConstraints(format!(
                    "summary {} is listed twice",
                    e.summary
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[SummaryConstraint] {
        &self.entries
    }

    /// Flattened checks: per entry, implausible values first, then plausible ones.
    pub fn checks(&self) -> Vec<Check> {
        let mut out = Vec::new();
        for e in &self.entries {
            for (index, &value) in e.implausible.iter().enumerate() {
                out.push(Check { summary: e.summary, kind: CheckKind::Implausible, index, value, alpha: e.alpha });
            }
            for (index, &value) in e.plausible.iter().enumerate() {
                out.push(Check { summary: e.summary, kind: CheckKind::Plausible, index, value, alpha: e.alpha });
            }
        }
        out
    }

    /// Total number of hypothetical values, B.
    pub fn len(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.implausible.len() + e.plausible.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Summary indices referenced, ascending.
    pub fn summaries(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.entries.iter().map(|e| e.summary).collect();
        s.sort_unstable();
        s
    }

    /// Largest value the implausibility can take for this set.
    pub fn max_implausibility(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.implausible.len() as f64 * (1.0 - e.alpha) + e.plausible.len() as f64 * e.alpha)
            .sum()
    }

    /// Fails when a constraint names a summary the model does not produce.
    pub fn check_summary_count(&self, summary_count: usize) -> Result<()> {
        match self.entries.iter().find(|e| e.summary >= summary_count) {
            Some(e) => Err(Error::InvalidConstraints(format!(
                "summary index {} out of range for a model with {summary_count} summaries",
                e.summary
            ))),
            None => Ok(()),
        }
    }
}

impl TryFrom<Vec<SummaryConstraint>> for ConstraintSet {
    type Error = Error;
    fn try_from(entries: Vec<SummaryConstraint>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<ConstraintSet> for Vec<SummaryConstraint> {
    fn from(c: ConstraintSet) -> Self {
        c.entries
    }
}

/// Estimated prior predictive p-value for one hypothetical value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValueEstimate {
    pub summary: usize,
    pub kind: CheckKind,
    pub index: usize,
    pub value: f64,
    pub estimate: f64,
    /// Number of predictive samples behind the estimate.
    pub samples: usize,
}

/// A p-value judged against its cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub pvalue: PValueEstimate,
    pub alpha: f64,
    /// This check's hinge term in the implausibility sum.
    pub penalty: f64,
    /// Whether the check holds: `p < alpha` for implausible values, `p >= alpha` for plausible ones.
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImplausibilityResult {
    pub lambda: HyperPoint,
    pub outcomes: Vec<CheckOutcome>,
    pub implausibility: f64,
    /// Some implausible-value p-value sits exactly at its cutoff: zero penalty, yet the check fails.
    pub boundary: bool,
}

impl ImplausibilityResult {
    pub fn pvalues(&self) -> impl Iterator<Item = &PValueEstimate> {
        self.outcomes.iter().map(|o| &o.pvalue)
    }

    /// Smallest signed distance of any p-value from its cutoff on the satisfying side.
    pub fn slack(&self) -> f64 {
        self.outcomes
            .iter()
            .map(|o| match o.pvalue.kind {
                CheckKind::Implausible => o.alpha - o.pvalue.estimate,
                CheckKind::Plausible => o.pvalue.estimate - o.alpha,
            })
            .fold(f64::INFINITY, f64::min)
    }
}
