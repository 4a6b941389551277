//! Paired hyperparameter and summary draws, and scaled nearest-neighbor lookup.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{HyperBox, HyperPoint};
use crate::error::{Error, Result};
use crate::models::{simulate_with_retries, ModelSpec};
use crate::par;
use crate::rng::{self, tags};
use crate::stats;

/// Center used by the per-coordinate mean absolute deviation that scales distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Centering {
    #[default]
    Mean,
    Median,
}

/// Simulated `(lambda_i, S_i)` rows in search coordinates.
///
/// Rows whose summaries contain a non-finite value are kept but marked
/// unusable; they never enter neighbor searches or regressions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationBank {
    dim: usize,
    summary_count: usize,
    lambdas: Vec<f64>,
    summaries: Vec<f64>,
    waves: Vec<u32>,
    usable: Vec<bool>,
    scale: Vec<f64>,
    centering: Centering,
    model: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    /// Euclidean distance after dividing each coordinate by the bank scale.
    pub distance: f64,
}

impl SimulationBank {
    /// Assembles a bank from row-major buffers, recomputing usability and scales.
    pub fn from_parts(
        model: String,
        dim: usize,
        summary_count: usize,
        lambdas: Vec<f64>,
        summaries: Vec<f64>,
        waves: Vec<u32>,
        centering: Centering,
    ) -> Result<Self> {
        let n = waves.len();
        if dim == 0 || summary_count == 0 {
            return Err(Error::Bank("dimension and summary count must be positive".into()));
        }
        if lambdas.len() != n * dim || summaries.len() != n * summary_count {
            return Err(Error::Bank(format!(
                "buffer sizes {} and {} do not match {n} rows of {dim} + {summary_count} columns",
                lambdas.len(),
                summaries.len()
            )));
        }
        if lambdas.iter().any(|v| !v.is_finite()) {
            return Err(Error::Bank("non-finite hyperparameter value".into()));
        }
        let usable = summaries.chunks(summary_count).map(|s| s.iter().all(|v| v.is_finite())).collect();
        let mut bank = Self {
            dim,
            summary_count,
            lambdas,
            summaries,
            waves,
            usable,
            scale: Vec::new(),
            centering,
            model,
        };
        bank.scale = bank.compute_scale();
        Ok(bank)
    }

    fn compute_scale(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|c| {
                let col: Vec<f64> = self.lambdas.iter().skip(c).step_by(self.dim).copied().collect();
                let center = match self.centering {
                    Centering::Mean => stats::mean(&col),
                    Centering::Median => stats::median(&col),
                };
                let s = stats::mean_abs_deviation_about(&col, center);
                // A column with no spread carries no distance information; leave it unscaled.
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.waves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waves.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn summary_count(&self) -> usize {
        self.summary_count
    }

    pub fn model_name(&self) -> &str {
        &self.model
    }

    pub fn centering(&self) -> Centering {
        self.centering
    }

    pub fn lambda(&self, i: usize) -> &[f64] {
        &self.lambdas[i * self.dim..(i + 1) * self.dim]
    }

    pub fn summaries(&self, i: usize) -> &[f64] {
        &self.summaries[i * self.summary_count..(i + 1) * self.summary_count]
    }

    pub fn summary(&self, i: usize, j: usize) -> f64 {
        self.summaries[i * self.summary_count + j]
    }

    pub fn lambda_buffer(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn summary_buffer(&self) -> &[f64] {
        &self.summaries
    }

    pub fn waves(&self) -> &[u32] {
        &self.waves
    }

    pub fn is_usable(&self, i: usize) -> bool {
        self.usable[i]
    }

    pub fn usable_count(&self) -> usize {
        self.usable.iter().filter(|u| **u).count()
    }

    pub fn degenerate_count(&self) -> usize {
        self.len() - self.usable_count()
    }

    /// Per-coordinate mean absolute deviation used to scale distances.
    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Row counts per wave tag, ascending by tag.
    pub fn provenance(&self) -> Vec<(u32, usize)> {
        let mut out: Vec<(u32, usize)> = Vec::new();
        let mut tags: Vec<u32> = self.waves.clone();
        tags.sort_unstable();
        for t in tags {
            match out.last_mut() {
                Some((w, c)) if *w == t => *c += 1,
                _ => out.push((t, 1)),
            }
        }
        out
    }

    fn scaled_sq_distance(&self, i: usize, target: &[f64]) -> f64 {
        self.lambda(i)
            .iter()
            .zip(target)
            .zip(&self.scale)
            .map(|((x, t), s)| {
                let z = (x - t) / s;
                z * z
            })
            .sum()
    }
}

/// Draws `n` hyperparameters uniformly over the box (search coordinates) and simulates each.
pub fn build_bank(model: &dyn ModelSpec, bx: &HyperBox, n: usize, seed: u64) -> Result<SimulationBank> {
    build_bank_with(model, bx, n, seed, Centering::Mean)
}

pub fn build_bank_with(
    model: &dyn ModelSpec,
    bx: &HyperBox,
    n: usize,
    seed: u64,
    centering: Centering,
) -> Result<SimulationBank> {
    if n == 0 {
        return Err(Error::Bank("bank size must be at least 1".into()));
    }
    check_model(model, bx)?;
    let d = bx.dim();
    let rows = par::map_range(n, |i| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut g = rng::stream(rng::derive_path(seed, &[tags::BANK, i as u64, 0]));
        let lambda: Vec<f64> =
            (0..d).map(|c| bx.search_lower(c) + bx.search_width(c) * g.random::<f64>()).collect();
        let natural = bx.to_natural(&HyperPoint::from_vec_unchecked(lambda.clone()));
        let s = simulate_with_retries(model, &natural, rng::derive_path(seed, &[tags::BANK, i as u64, 1]))?;
        Ok((lambda, s.0))
    });
    assemble(model, d, rows, |_| 0, centering)
}

/// Appends `per_point` fresh simulations at each of `points`, tagged with `wave`.
///
/// Existing rows are copied unchanged and the distance scales are recomputed.
pub fn augment_bank(
    bank: &SimulationBank,
    model: &dyn ModelSpec,
    bx: &HyperBox,
    points: &[HyperPoint],
    per_point: usize,
    wave: u32,
    seed: u64,
) -> Result<SimulationBank> {
    if points.is_empty() {
        return Err(Error::Bank("augmentation needs at least one point".into()));
    }
    check_model(model, bx)?;
    if bank.dim() != bx.dim() || bank.summary_count() != model.summary_count() {
        return Err(Error::Bank("bank shape does not match the model".into()));
    }
    if let Some(p) = points.iter().find(|p| p.dim() != bx.dim()) {
        return Err(Error::InvalidPoint(format!("point of dimension {} in a {}-dimensional box", p.dim(), bx.dim())));
    }
    if per_point == 0 {
        return Ok(bank.clone());
    }
    let total = points.len() * per_point;
    let fresh = par::map_range(total, |t| -> Result<(Vec<f64>, Vec<f64>)> {
        let (k, rep) = (t / per_point, t % per_point);
        let p = &points[k];
        let natural = bx.to_natural(p);
        let s = simulate_with_retries(
            model,
            &natural,
            rng::derive_path(seed, &[tags::AUGMENT, wave as u64, k as u64, rep as u64]),
        )?;
        Ok((p.as_slice().to_vec(), s.0))
    });
    let mut lambdas = bank.lambdas.clone();
    let mut summaries = bank.summaries.clone();
    let mut waves = bank.waves.clone();
    for row in fresh {
        let (l, s) = row?;
        lambdas.extend(l);
        summaries.extend(s);
        waves.push(wave);
    }
    SimulationBank::from_parts(
        bank.model.clone(),
        bank.dim,
        bank.summary_count,
        lambdas,
        summaries,
        waves,
        bank.centering,
    )
}

fn check_model(model: &dyn ModelSpec, bx: &HyperBox) -> Result<()> {
    if model.dim() != bx.dim() {
        return Err(Error::Config(format!(
            "model {} has {} hyperparameters but the box has {}",
            model.name(),
            model.dim(),
            bx.dim()
        )));
    }
    Ok(())
}

fn assemble(
    model: &dyn ModelSpec,
    d: usize,
    rows: Vec<Result<(Vec<f64>, Vec<f64>)>>,
    wave: impl Fn(usize) -> u32,
    centering: Centering,
) -> Result<SimulationBank> {
    let j = model.summary_count();
    let mut lambdas = Vec::with_capacity(rows.len() * d);
    let mut summaries = Vec::with_capacity(rows.len() * j);
    let mut waves = Vec::with_capacity(rows.len());
    for (i, row) in rows.into_iter().enumerate() {
        let (l, s) = row?;
        lambdas.extend(l);
        summaries.extend(s);
        waves.push(wave(i));
    }
    SimulationBank::from_parts(String::from(model.name()), d, j, lambdas, summaries, waves, centering)
}

fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` usable rows closest to `target` in scaled distance, nearest first.
///
/// Ties go to the lower row index.
pub fn neighbors(bank: &SimulationBank, target: &HyperPoint, k: usize) -> Result<Vec<Neighbor>> {
    if target.dim() != bank.dim() {
        return Err(Error::InvalidPoint(format!(
            "target of dimension {} for a {}-dimensional bank",
            target.dim(),
            bank.dim()
        )));
    }
    let usable = bank.usable_count();
    if k == 0 || k > usable {
        return Err(Error::Bank(format!("asked for {k} neighbors but the bank has {usable} usable rows")));
    }
    let t = target.as_slice();
    let mut d: Vec<(f64, usize)> =
        (0..bank.len()).filter(|&i| bank.usable[i]).map(|i| (bank.scaled_sq_distance(i, t), i)).collect();
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, by_distance);
        d.truncate(k);
    }
    d.sort_unstable_by(by_distance);
    Ok(d.into_iter().map(|(sq, index)| Neighbor { index, distance: libm::sqrt(sq) }).collect())
}

/// Row indices of the `k` nearest usable rows.
pub fn nearest(bank: &SimulationBank, target: &HyperPoint, k: usize) -> Result<Vec<usize>> {
    Ok(neighbors(bank, target, k)?.into_iter().map(|n| n.index).collect())
}
