//! Gaussian kernel density estimates and density-ordered predictive p-values.
//!
//! The p-value of a hypothetical value `h` under a sample is the fraction of
//! sample points whose estimated density does not exceed the density at `h`.
//! Densities are compared on the log scale so far-tail values never collapse to
//! a tie at zero.
//!
//! Small samples are evaluated exactly (kernel truncated at nine bandwidths,
//! with a full log-sum-exp when nothing lies that close). Larger samples are
//! linearly binned onto a grid, convolved once and interpolated; every point,
//! sampled or hypothetical, goes through the same evaluator, so equal inputs get
//! equal densities.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use crate::domain::{ConstraintSet, PValueEstimate};
use crate::error::{Error, Result};
use crate::stats;

/// Samples up to this size are evaluated exactly.
pub const EXACT_LIMIT: usize = 4096;
const CUTOFF: f64 = 9.0;
const STEPS_1D: f64 = 16.0;
const STEPS_2D: f64 = 6.0;
const MARGIN_1D: f64 = 8.0;
const MARGIN_2D: f64 = 6.0;
const MAX_NODES_1D: usize = 1 << 18;
const MAX_NODES_2D: usize = 1 << 22;

/// `0.9 min(sd, iqr / 1.34) n^(-1/5)`; falls back to `sd` when the IQR is zero.
pub fn rule_bandwidth(sd: f64, iqr: f64, n: usize) -> f64 {
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * libm::pow(n as f64, -0.2)
}

/// Rule-of-thumb bandwidth of a sample, floored at `1e-9 max(1, |mean|)`.
pub fn sample_bandwidth(xs: &[f64]) -> f64 {
    let sd = if xs.len() > 1 { stats::std_dev(xs) } else { 0.0 };
    let h = rule_bandwidth(sd, stats::iqr(xs), xs.len());
    let floor = 1e-9 * stats::mean(xs).abs().max(1.0);
    if h > floor {
        h
    } else {
        floor
    }
}

fn check_sample(xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Density("empty sample".into()));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Density("non-finite sample value".into()));
    }
    Ok(())
}

fn log_sum_exp_neg_half(z2: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = z2.clone().fold(f64::INFINITY, f64::min);
    let s: f64 = z2.map(|v| libm::exp(-0.5 * (v - m))).sum();
    -0.5 * m + libm::log(s)
}

#[derive(Debug, Clone)]
struct Grid1 {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl Grid1 {
    fn build(sorted: &[f64], h: f64) -> Option<Self> {
        let step = h / STEPS_1D;
        let start = sorted[0] - MARGIN_1D * h;
        let span = sorted[sorted.len() - 1] + MARGIN_1D * h - start;
        let nodes = libm::ceil(span / step) as usize + 2;
        if nodes > MAX_NODES_1D {
            return None;
        }
        let mut counts = vec![0.0; nodes];
        for &x in sorted {
            let t = (x - start) / step;
            let l = (libm::floor(t) as usize).min(nodes - 2);
            let f = t - l as f64;
            counts[l] += 1.0 - f;
            counts[l + 1] += f;
        }
        let reach = libm::ceil(CUTOFF * STEPS_1D) as usize;
        let kernel: Vec<f64> = (0..=reach)
            .map(|j| {
                let z = j as f64 / STEPS_1D;
                libm::exp(-0.5 * z * z)
            })
            .collect();
        let mut values = vec![0.0; nodes];
        for (m, &c) in counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let lo = m.saturating_sub(reach);
            let hi = (m + reach).min(nodes - 1);
            for (g, v) in values.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *v += c * kernel[g.abs_diff(m)];
            }
        }
        Some(Self { start, step, values })
    }

    fn sum_at(&self, x: f64) -> Option<f64> {
        let t = (x - self.start) / self.step;
        let last = (self.values.len() - 1) as f64;
        if !(t >= 0.0 && t <= last) {
            return None;
        }
        let l = (libm::floor(t) as usize).min(self.values.len() - 2);
        let f = t - l as f64;
        let v = (1.0 - f) * self.values[l] + f * self.values[l + 1];
        (v > 0.0).then_some(v)
    }
}

/// Univariate Gaussian KDE.
#[derive(Debug, Clone)]
pub struct Kde1D {
    sorted: Vec<f64>,
    bandwidth: f64,
    degenerate: bool,
    grid: Option<Grid1>,
}

impl Kde1D {
    /// Fits with [`sample_bandwidth`].
    pub fn fit(sample: &[f64]) -> Result<Self> {
        check_sample(sample)?;
        Self::with_bandwidth(sample, sample_bandwidth(sample))
    }

    pub fn with_bandwidth(sample: &[f64], bandwidth: f64) -> Result<Self> {
        check_sample(sample)?;
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Density(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let sorted = stats::sorted_copy(sample);
        let degenerate = sorted[0] == sorted[sorted.len() - 1];
        let grid = if !degenerate && sorted.len() > EXACT_LIMIT { Grid1::build(&sorted, bandwidth) } else { None };
        Ok(Self { sorted, bandwidth, degenerate, grid })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// All sample values coincide: the estimate is treated as a point mass.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// The sample in ascending order.
    pub fn sorted_sample(&self) -> &[f64] {
        &self.sorted
    }

    fn log_norm(&self) -> f64 {
        libm::log(self.sorted.len() as f64 * self.bandwidth * libm::sqrt(2.0 * PI))
    }

    fn exact_log_sum(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let lo = self.sorted.partition_point(|s| *s < x - CUTOFF * h);
        let hi = self.sorted.partition_point(|s| *s <= x + CUTOFF * h);
        let sum: f64 = self.sorted[lo..hi]
            .iter()
            .map(|s| {
                let z = (x - s) / h;
                libm::exp(-0.5 * z * z)
            })
            .sum();
        if sum > 0.0 {
            libm::log(sum)
        } else {
            log_sum_exp_neg_half(self.sorted.iter().map(|s| {
                let z = (x - s) / h;
                z * z
            }))
        }
    }

    /// Log of the estimated density at `x`.
    pub fn log_density(&self, x: f64) -> f64 {
        let s = match self.grid.as_ref().and_then(|g| g.sum_at(x)) {
            Some(v) => libm::log(v),
            None => self.exact_log_sum(x),
        };
        s - self.log_norm()
    }

    pub fn density(&self, x: f64) -> f64 {
        libm::exp(self.log_density(x))
    }

    /// Log densities at the sample points, ascending.
    pub fn ordering(&self) -> DensityOrdering {
        DensityOrdering::new(self.sorted.iter().map(|&x| self.log_density(x)).collect())
    }
}

/// Sorted log densities of an evaluation sample.
#[derive(Debug, Clone)]
pub struct DensityOrdering {
    sorted: Vec<f64>,
}

impl DensityOrdering {
    pub fn new(mut log_densities: Vec<f64>) -> Self {
        log_densities.sort_by(f64::total_cmp);
        Self { sorted: log_densities }
    }

    /// Fraction of entries with log density at most `log_density`.
    pub fn pvalue(&self, log_density: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= log_density) as f64 / self.sorted.len() as f64
    }
}

/// Fits the rule-of-thumb Gaussian KDE.
pub fn kde_fit(sample: &[f64]) -> Result<Kde1D> {
    Kde1D::fit(sample)
}

/// Fraction of `samples_eval` whose estimated density is at most the density at `h`.
///
/// A degenerate estimate returns 1 when `h` equals the point mass and 0 otherwise.
pub fn kde_pvalue(kde: &Kde1D, samples_eval: &[f64], h: f64) -> Result<f64> {
    if samples_eval.is_empty() {
        return Err(Error::Density("empty evaluation sample".into()));
    }
    if kde.is_degenerate() {
        return Ok(if h == kde.sorted[0] { 1.0 } else { 0.0 });
    }
    let ordering = if samples_eval.len() == kde.len() && stats::sorted_copy(samples_eval) == kde.sorted {
        kde.ordering()
    } else {
        DensityOrdering::new(samples_eval.iter().map(|&x| kde.log_density(x)).collect())
    };
    Ok(ordering.pvalue(kde.log_density(h)))
}

/// One p-value per check, in the order of [`ConstraintSet::checks`].
///
/// `samples` maps a summary index to its (adjusted or directly simulated) sample;
/// each sample gets one KDE shared by all of that summary's checks.
pub fn constraint_pvalues(samples: &BTreeMap<usize, Vec<f64>>, constraints: &ConstraintSet) -> Result<Vec<PValueEstimate>> {
    let mut cache: BTreeMap<usize, (Kde1D, DensityOrdering)> = BTreeMap::new();
    let mut out = Vec::with_capacity(constraints.len());
    for c in constraints.checks() {
        if !cache.contains_key(&c.summary) {
            let s = samples
                .get(&c.summary)
                .ok_or_else(|| Error::Structural(format!("no sample for summary {}", c.summary)))?;
            let kde = Kde1D::fit(s)?;
            let ord = kde.ordering();
            cache.insert(c.summary, (kde, ord));
        }
        let (kde, ord) = &cache[&c.summary];
        let estimate = if kde.is_degenerate() {
            if c.value == kde.sorted[0] {
                1.0
            } else {
                0.0
            }
        } else {
            ord.pvalue(kde.log_density(c.value))
        };
        out.push(PValueEstimate {
            summary: c.summary,
            kind: c.kind,
            index: c.index,
            value: c.value,
            estimate,
            samples: kde.len(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Grid2 {
    start: [f64; 2],
    step: [f64; 2],
    nodes: [usize; 2],
    /// Row-major with the first axis fastest.
    values: Vec<f64>,
}

impl Grid2 {
    fn build(pts: &[(f64, f64)], h: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> Option<Self> {
        let step = [h[0] / STEPS_2D, h[1] / STEPS_2D];
        let start = [lo[0] - MARGIN_2D * h[0], lo[1] - MARGIN_2D * h[1]];
        let mut nodes = [0usize; 2];
        for a in 0..2 {
            let span = hi[a] + MARGIN_2D * h[a] - start[a];
            nodes[a] = libm::ceil(span / step[a]) as usize + 2;
        }
        if nodes[0].saturating_mul(nodes[1]) > MAX_NODES_2D {
            return None;
        }
        let (nx, ny) = (nodes[0], nodes[1]);
        let mut counts = vec![0.0; nx * ny];
        for &(x, y) in pts {
            let tx = (x - start[0]) / step[0];
            let ty = (y - start[1]) / step[1];
            let lx = (libm::floor(tx) as usize).min(nx - 2);
            let ly = (libm::floor(ty) as usize).min(ny - 2);
            let (fx, fy) = (tx - lx as f64, ty - ly as f64);
            counts[ly * nx + lx] += (1.0 - fx) * (1.0 - fy);
            counts[ly * nx + lx + 1] += fx * (1.0 - fy);
            counts[(ly + 1) * nx + lx] += (1.0 - fx) * fy;
            counts[(ly + 1) * nx + lx + 1] += fx * fy;
        }
        let reach = libm::ceil((CUTOFF - 2.0) * STEPS_2D) as usize;
        let kernel: Vec<f64> = (0..=reach)
            .map(|j| {
                let z = j as f64 / STEPS_2D;
                libm::exp(-0.5 * z * z)
            })
            .collect();
        let convolve = |src: &[f64], len: usize, stride: usize, count: usize, lane_stride: usize| -> Vec<f64> {
            let mut dst = vec![0.0; src.len()];
            for lane in 0..count {
                let base = lane * lane_stride;
                for m in 0..len {
                    let c = src[base + m * stride];
                    if c == 0.0 {
                        continue;
                    }
                    let lo = m.saturating_sub(reach);
                    let hi = (m + reach).min(len - 1);
                    for g in lo..=hi {
                        dst[base + g * stride] += c * kernel[g.abs_diff(m)];
                    }
                }
            }
            dst
        };
        let along_x = convolve(&counts, nx, 1, ny, nx);
        let values = convolve(&along_x, ny, nx, nx, 1);
        Some(Self { start, step, nodes, values })
    }

    fn sum_at(&self, x: f64, y: f64) -> Option<f64> {
        let (nx, ny) = (self.nodes[0], self.nodes[1]);
        let tx = (x - self.start[0]) / self.step[0];
        let ty = (y - self.start[1]) / self.step[1];
        if !(tx >= 0.0 && tx <= (nx - 1) as f64 && ty >= 0.0 && ty <= (ny - 1) as f64) {
            return None;
        }
        let lx = (libm::floor(tx) as usize).min(nx - 2);
        let ly = (libm::floor(ty) as usize).min(ny - 2);
        let (fx, fy) = (tx - lx as f64, ty - ly as f64);
        let v = |i: usize, j: usize| self.values[j * nx + i];
        let s = (1.0 - fx) * (1.0 - fy) * v(lx, ly)
            + fx * (1.0 - fy) * v(lx + 1, ly)
            + (1.0 - fx) * fy * v(lx, ly + 1)
            + fx * fy * v(lx + 1, ly + 1);
        (s > 0.0).then_some(s)
    }
}

/// Product-Gaussian KDE on pairs, one rule-of-thumb bandwidth per axis.
#[derive(Debug, Clone)]
pub struct Kde2D {
    /// Sorted by the first coordinate.
    points: Vec<(f64, f64)>,
    bandwidth: [f64; 2],
    degenerate: bool,
    grid: Option<Grid2>,
}

impl Kde2D {
    pub fn fit(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.is_empty() || pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::Density("pairs must be non-empty and finite".into()));
        }
        let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let bandwidth = [sample_bandwidth(&xs), sample_bandwidth(&ys)];
        let mut points = pairs.to_vec();
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let degenerate = points.iter().all(|p| *p == points[0]);
        let lo = [points[0].0, ys.iter().copied().fold(f64::INFINITY, f64::min)];
        let hi = [points[points.len() - 1].0, ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)];
        let grid = if !degenerate && points.len() > EXACT_LIMIT { Grid2::build(&points, bandwidth, lo, hi) } else { None };
        Ok(Self { points, bandwidth, degenerate, grid })
    }

    pub fn bandwidth(&self) -> [f64; 2] {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    fn log_norm(&self) -> f64 {
        libm::log(self.points.len() as f64 * self.bandwidth[0] * self.bandwidth[1] * 2.0 * PI)
    }

    fn exact_log_sum(&self, x: f64, y: f64) -> f64 {
        let [hx, hy] = self.bandwidth;
        let lo = self.points.partition_point(|p| p.0 < x - CUTOFF * hx);
        let hi = self.points.partition_point(|p| p.0 <= x + CUTOFF * hx);
        let z2 = |p: &(f64, f64)| {
            let (a, b) = ((x - p.0) / hx, (y - p.1) / hy);
            a * a + b * b
        };
        let sum: f64 = self.points[lo..hi].iter().map(|p| libm::exp(-0.5 * z2(p))).sum();
        if sum > 0.0 {
            libm::log(sum)
        } else {
            log_sum_exp_neg_half(self.points.iter().map(z2))
        }
    }

    pub fn log_density(&self, x: f64, y: f64) -> f64 {
        let s = match self.grid.as_ref().and_then(|g| g.sum_at(x, y)) {
            Some(v) => libm::log(v),
            None => self.exact_log_sum(x, y),
        };
        s - self.log_norm()
    }

    pub fn density(&self, x: f64, y: f64) -> f64 {
        libm::exp(self.log_density(x, y))
    }

    pub fn ordering(&self) -> DensityOrdering {
        DensityOrdering::new(self.points.iter().map(|p| self.log_density(p.0, p.1)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointCheck {
    pub density: f64,
    /// Fraction of sample pairs whose estimated density is at most that of the point.
    pub pvalue: f64,
    pub bandwidth: [f64; 2],
    pub samples: usize,
}

/// Density-ordered p-value of `point` in the joint predictive of two summaries.
pub fn joint_density_check(samples: &[(f64, f64)], point: (f64, f64)) -> Result<JointCheck> {
    if samples.len() < 100 {
        return Err(Error::Density(format!("joint check needs at least 100 pairs, got {}", samples.len())));
    }
    let kde = Kde2D::fit(samples)?;
    if kde.is_degenerate() {
        let hit = point == kde.points[0];
        return Ok(JointCheck {
            density: if hit { f64::INFINITY } else { 0.0 },
            pvalue: if hit { 1.0 } else { 0.0 },
            bandwidth: kde.bandwidth,
            samples: kde.len(),
        });
    }
    let ld = kde.log_density(point.0, point.1);
    Ok(JointCheck { density: libm::exp(ld), pvalue: kde.ordering().pvalue(ld), bandwidth: kde.bandwidth, samples: kde.len() })
}
