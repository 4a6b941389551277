//! High-dimensional linear model `y = beta0 + X beta + delta + eps` with a
//! horseshoe+ (or normal) prior on `beta` and optional sparse mean shifts.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{labels, ModelSpec};
use crate::domain::SummaryVector;
use crate::error::{Error, Result};
use crate::linalg::weighted_least_squares;
use crate::rng::{self, StreamRng};
use crate::stats::{self, MAD_TO_SD};

/// Huber tuning constant.
pub const HUBER_C: f64 = 1.345;
const HUBER_MAX_ITER: usize = 50;
const SPLIT_REDRAWS: usize = 10;

/// Design matrix with centered columns of unit sample standard deviation, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DesignMatrix {
    /// Centers and scales each column of a column-major `rows x cols` buffer.
    pub fn standardize(rows: usize, cols: usize, mut data: Vec<f64>) -> Result<Self> {
        if rows < 2 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Config(format!(
                "design buffer of length {} does not describe a {rows} x {cols} matrix with at least 2 rows",
                data.len()
            )));
        }
        for (e, col) in data.chunks_mut(rows).enumerate() {
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("design column {e} has a non-finite entry")));
            }
            let m = stats::mean(col);
            let sd = stats::std_dev(col);
            if !(sd > 0.0) {
                return Err(Error::Config(format!("design column {e} is constant")));
            }
            for v in col.iter_mut() {
                *v = (*v - m) / sd;
            }
        }
        Ok(Self { rows, cols, data })
    }

    /// Standardizes a matrix given as rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let e = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != e) {
            return Err(Error::Config("design rows have different lengths".into()));
        }
        let mut data = Vec::with_capacity(m * e);
        for c in 0..e {
            data.extend(rows.iter().map(|r| r[c]));
        }
        Self::standardize(m, e, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, e: usize) -> &[f64] {
        &self.data[e * self.rows..(e + 1) * self.rows]
    }

    pub fn get(&self, i: usize, e: usize) -> f64 {
        self.data[e * self.rows + i]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| (0..self.cols).map(|e| self.get(i, e)).collect()).collect()
    }
}

/// Standard normal design with AR(1) correlation `rho` between neighboring columns.
pub fn synth_design(rows: usize, cols: usize, seed: u64, rho: f64) -> Result<DesignMatrix> {
    if rows < 2 || cols == 0 {
        return Err(Error::Config(format!("cannot build a {rows} x {cols} design")));
    }
    if !(rho.abs() < 1.0) {
        return Err(Error::Config(format!("AR(1) correlation must lie in (-1, 1), got {rho}")));
    }
    let mut g = rng::stream(seed);
    let innov = libm::sqrt(1.0 - rho * rho);
    let mut data = vec![0.0; rows * cols];
    for i in 0..rows {
        let mut prev: f64 = g.sample(StandardNormal);
        data[i] = prev;
        for e in 1..cols {
            let z: f64 = g.sample(StandardNormal);
            prev = rho * prev + innov * z;
            data[e * rows + i] = prev;
        }
    }
    DesignMatrix::standardize(rows, cols, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// `beta_e ~ N(0, s_e^2)`, `s_e ~ HC(0, A_beta g_e)`, `g_e ~ HC(0, 1)`.
    HorseshoePlus,
    /// `beta_e ~ N(0, A_beta)`; `A_beta` is a variance.
    Normal,
}

/// Hyperparameters that may be searched over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShrinkageHyper {
    Sigma0,
    ASigma,
    ABeta,
    ADelta,
}

impl ShrinkageHyper {
    pub fn label(self) -> &'static str {
        match self {
            Self::Sigma0 => "sigma0",
            Self::ASigma => "A_sigma",
            Self::ABeta => "A_beta",
            Self::ADelta => "A_delta",
        }
    }
}

/// Fixed prior settings; searched hyperparameters override the matching field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShrinkagePriorConfig {
    /// Intercept prior standard deviation.
    pub sigma0: f64,
    /// Half-Cauchy scale of the noise standard deviation.
    pub a_sigma: f64,
    pub a_beta: f64,
    /// Mean-shift scale, used only with outliers enabled.
    pub a_delta: f64,
    pub prior: PriorKind,
    pub outliers: bool,
}

impl Default for ShrinkagePriorConfig {
    fn default() -> Self {
        Self { sigma0: 10.0, a_sigma: 1.0, a_beta: 1e-3, a_delta: 1e-3, prior: PriorKind::HorseshoePlus, outliers: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShrinkageOptions {
    /// Random half-splits in the refitted cross-validation summaries.
    pub splits: usize,
    /// Huber fits and MAD scale in place of least squares and `s^2`.
    pub robust: bool,
    /// Adds `log |median y|` and the log residual kurtosis.
    pub extended: bool,
}

impl Default for ShrinkageOptions {
    fn default() -> Self {
        Self { splits: 10, robust: false, extended: false }
    }
}

#[derive(Debug, Clone)]
pub struct ShrinkageModel {
    x: DesignMatrix,
    base: ShrinkagePriorConfig,
    free: Vec<ShrinkageHyper>,
    options: ShrinkageOptions,
}

mod stream_tags {
    pub const INTERCEPT: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const BETA: u64 = 3;
    pub const DELTA: u64 = 4;
    pub const SPLITS: u64 = 5;
}

impl ShrinkageModel {
    pub fn new(
        x: DesignMatrix,
        base: ShrinkagePriorConfig,
        free: Vec<ShrinkageHyper>,
        options: ShrinkageOptions,
    ) -> Result<Self> {
        let scales = [base.sigma0, base.a_sigma, base.a_beta, base.a_delta];
        if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("shrinkage prior scales must be positive and finite".into()));
        }
        if free.is_empty() {
            return Err(Error::Config("at least one shrinkage hyperparameter must be searched".into()));
        }
        for (i, h) in free.iter().enumerate() {
            if free[..i].contains(h) {
                return Err(Error::Config(format!("hyperparameter {} listed twice", h.label())));
            }
        }
        if free.contains(&ShrinkageHyper::ADelta) && !base.outliers {
            return Err(Error::Config("A_delta is only searchable with outliers enabled".into()));
        }
        if options.splits == 0 {
            return Err(Error::Config("refitted cross-validation needs at least one split".into()));
        }
        if x.rows() < 8 {
            return Err(Error::Config(format!("refitted cross-validation needs at least 8 rows, got {}", x.rows())));
        }
        Ok(Self { x, base, free, options })
    }

    /// `(A_sigma, A_beta)` searched; intercept sd 10, no mean shifts, summaries `log s^2` and the CV R^2.
    pub fn two_parameter(x: DesignMatrix, prior: PriorKind, splits: usize) -> Result<Self> {
        Self::new(
            x,
            ShrinkagePriorConfig { prior, ..Default::default() },
            vec![ShrinkageHyper::ASigma, ShrinkageHyper::ABeta],
            ShrinkageOptions { splits, robust: false, extended: false },
        )
    }

    /// All four scales searched, mean shifts on, robust fits and four summaries.
    pub fn four_parameter(x: DesignMatrix, prior: PriorKind, splits: usize) -> Result<Self> {
        Self::new(
            x,
            ShrinkagePriorConfig { prior, outliers: true, ..Default::default() },
            vec![ShrinkageHyper::Sigma0, ShrinkageHyper::ASigma, ShrinkageHyper::ABeta, ShrinkageHyper::ADelta],
            ShrinkageOptions { splits, robust: true, extended: true },
        )
    }

    pub fn design(&self) -> &DesignMatrix {
        &self.x
    }

    pub fn options(&self) -> ShrinkageOptions {
        self.options
    }

    /// Prior settings with the searched hyperparameters set from `lambda`.
    pub fn resolve(&self, lambda: &[f64]) -> ShrinkagePriorConfig {
        let mut c = self.base;
        for (h, &v) in self.free.iter().zip(lambda) {
            match h {
                ShrinkageHyper::Sigma0 => c.sigma0 = v,
                ShrinkageHyper::ASigma => c.a_sigma = v,
                ShrinkageHyper::ABeta => c.a_beta = v,
                ShrinkageHyper::ADelta => c.a_delta = v,
            }
        }
        c
    }

    /// One response vector from the prior predictive, each component on its own stream.
    pub fn simulate_response(&self, cfg: &ShrinkagePriorConfig, seed: u64) -> Vec<f64> {
        use stream_tags::*;
        let m = self.x.rows();
        let sub = |t: u64| rng::stream(rng::derive(seed, t));

        let mut g = sub(INTERCEPT);
        let beta0 = cfg.sigma0 * g.sample::<f64, _>(StandardNormal);
        let mut y = vec![beta0; m];

        let mut g = sub(NOISE);
        let sigma = half_cauchy(&mut g, cfg.a_sigma);
        for v in y.iter_mut() {
            *v += sigma * g.sample::<f64, _>(StandardNormal);
        }

        let mut g = sub(BETA);
        let sd_normal = libm::sqrt(cfg.a_beta);
        for e in 0..self.x.cols() {
            let sd = match cfg.prior {
                PriorKind::HorseshoePlus => {
                    let local = half_cauchy(&mut g, 1.0);
                    half_cauchy(&mut g, cfg.a_beta * local)
                }
                PriorKind::Normal => sd_normal,
            };
            let b = sd * g.sample::<f64, _>(StandardNormal);
            for (v, xv) in y.iter_mut().zip(self.x.column(e)) {
                *v += b * xv;
            }
        }

        if cfg.outliers {
            let mut g = sub(DELTA);
            for v in y.iter_mut() {
                let local = half_cauchy(&mut g, 1.0);
                let tau = half_cauchy(&mut g, cfg.a_delta * local);
                *v += tau * g.sample::<f64, _>(StandardNormal);
            }
        }
        y
    }

    /// Summaries of a response vector; `seed` drives the random splits.
    pub fn summarize(&self, y: &[f64], seed: u64) -> Vec<f64> {
        let o = self.options;
        let s1 = if o.robust {
            let s = MAD_TO_SD * stats::median_abs_deviation(y);
            libm::log(s * s)
        } else {
            libm::log(stats::variance(y))
        };
        let cv = refitted_cv(y, &self.x, o.splits, rng::derive(seed, stream_tags::SPLITS), o.robust).ok();
        let s2 = cv.as_ref().map_or(f64::NAN, |c| c.r2);
        if !o.extended {
            return vec![s1, s2];
        }
        let s3 = libm::log(stats::median(y).abs());
        let s4 = cv.map_or(f64::NAN, |c| libm::log(c.kurtosis));
        vec![s1, s2, s3, s4]
    }
}

fn half_cauchy(g: &mut StreamRng, scale: f64) -> f64 {
    scale * libm::tan(PI * (g.random::<f64>() - 0.5)).abs()
}

impl ModelSpec for ShrinkageModel {
    fn name(&self) -> &str {
        "shrinkage"
    }
    fn dim(&self) -> usize {
        self.free.len()
    }
    fn hyper_labels(&self) -> Vec<String> {
        self.free.iter().map(|h| String::from(h.label())).collect()
    }
    fn summary_labels(&self) -> Vec<String> {
        if self.options.extended {
            labels(&["S1", "S2", "S3", "S4"])
        } else {
            labels(&["S1", "S2"])
        }
    }
    fn simulate_summaries(&self, lambda: &[f64], seed: u64) -> Result<SummaryVector> {
        if lambda.len() != self.free.len() || lambda.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Simulation {
                lambda: lambda.to_vec(),
                reason: "shrinkage scales must be positive and finite".into(),
            });
        }
        let cfg = self.resolve(lambda);
        let y = self.simulate_response(&cfg, seed);
        Ok(SummaryVector(self.summarize(&y, seed)))
    }
}

/// Refitted cross-validation output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefittedCv {
    /// Mean over splits of the two halves' adjusted R^2.
    pub r2: f64,
    /// Mean over splits of the `m4 / m2^2` kurtosis of both halves' residuals.
    pub kurtosis: f64,
    /// Splits drawn again because a half had constant responses.
    pub redraws: usize,
}

/// Refitted cross-validation adjusted R^2.
pub fn refitted_cv_r2(y: &[f64], x: &DesignMatrix, splits: usize, seed: u64, robust: bool) -> Result<f64> {
    refitted_cv(y, x, splits, seed, robust).map(|c| c.r2)
}

/// Splits rows into halves, selects `floor(M/4)` columns on each half by absolute
/// correlation, and fits each half on the columns chosen by the other.
pub fn refitted_cv(y: &[f64], x: &DesignMatrix, splits: usize, seed: u64, robust: bool) -> Result<RefittedCv> {
    let m = x.rows();
    if y.len() != m {
        return Err(Error::Fit(format!("{} responses for a design with {m} rows", y.len())));
    }
    if m < 8 {
        return Err(Error::Fit(format!("refitted cross-validation needs at least 8 rows, got {m}")));
    }
    if splits == 0 {
        return Err(Error::Fit("need at least one split".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite response".into()));
    }
    let q = (m / 4).min(x.cols());
    let (mut r2, mut kurt, mut redraws) = (0.0, 0.0, 0);
    for s in 0..splits {
        let mut halves = None;
        for attempt in 0..SPLIT_REDRAWS {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(&mut rng::stream(rng::derive_path(seed, &[s as u64, attempt as u64])));
            let (a, b) = order.split_at(m / 2);
            if is_constant(y, a) || is_constant(y, b) {
                redraws += 1;
                continue;
            }
            halves = Some((a.to_vec(), b.to_vec()));
            break;
        }
        let (a, b) = halves.ok_or_else(|| Error::Fit("every split had a half with constant responses".into()))?;
        let sel_a = top_correlated(y, x, &a, q);
        let sel_b = top_correlated(y, x, &b, q);
        let fa = fit_half(y, x, &a, &sel_b, robust)?;
        let fb = fit_half(y, x, &b, &sel_a, robust)?;
        r2 += 0.5 * (fa.adjusted_r2 + fb.adjusted_r2);
        let mut res = fa.residuals;
        res.extend(fb.residuals);
        kurt += stats::kurtosis(&res);
    }
    let n = splits as f64;
    Ok(RefittedCv { r2: r2 / n, kurtosis: kurt / n, redraws })
}

fn is_constant(y: &[f64], idx: &[usize]) -> bool {
    idx.iter().all(|&i| y[i] == y[idx[0]])
}

/// Columns with the `q` largest absolute correlations with `y` on rows `idx`; ties by column index.
fn top_correlated(y: &[f64], x: &DesignMatrix, idx: &[usize], q: usize) -> Vec<usize> {
    let n = idx.len() as f64;
    let ym = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
    let yc: Vec<f64> = idx.iter().map(|&i| y[i] - ym).collect();
    let syy: f64 = yc.iter().map(|v| v * v).sum();
    let mut score: Vec<(f64, usize)> = (0..x.cols())
        .map(|e| {
            let col = x.column(e);
            let (mut sx, mut sxx, mut sxy) = (0.0, 0.0, 0.0);
            for (&i, &yv) in idx.iter().zip(&yc) {
                let v = col[i];
                sx += v;
                sxx += v * v;
                sxy += v * yv;
            }
            let vx = sxx - sx * sx / n;
            let c = if vx > 0.0 { (sxy / libm::sqrt(vx * syy)).abs() } else { f64::NAN };
            (if c.is_finite() { c } else { -1.0 }, e)
        })
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if q < score.len() {
        score.select_nth_unstable_by(q, cmp);
        score.truncate(q);
    }
    score.sort_unstable_by(cmp);
    score.into_iter().map(|(_, e)| e).collect()
}

struct HalfFit {
    adjusted_r2: f64,
    residuals: Vec<f64>,
}

fn fit_half(y: &[f64], x: &DesignMatrix, rows: &[usize], cols: &[usize], robust: bool) -> Result<HalfFit> {
    let n = rows.len();
    let p = cols.len();
    if n <= p + 1 {
        return Err(Error::Fit(format!("{n} rows cannot support {p} predictors and an intercept")));
    }
    let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x.get(rows[i], cols[j - 1]) });
    let yy: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let (coef, weights) = if robust { huber(&a, &yy) } else { (weighted_least_squares(&a, &yy, None).coefficients, vec![1.0; n]) };
    let residuals: Vec<f64> = (0..n)
        .map(|i| yy[i] - (0..=p).map(|j| a[(i, j)] * coef[j]).sum::<f64>())
        .collect();
    let wsum: f64 = weights.iter().sum();
    let ybar = weights.iter().zip(&yy).map(|(w, v)| w * v).sum::<f64>() / wsum;
    let tss: f64 = weights.iter().zip(&yy).map(|(w, v)| w * (v - ybar) * (v - ybar)).sum();
    let rss: f64 = weights.iter().zip(&residuals).map(|(w, r)| w * r * r).sum();
    let r2 = 1.0 - rss / tss;
    let adjusted_r2 = 1.0 - (1.0 - r2) * (n - 1) as f64 / (n - p - 1) as f64;
    Ok(HalfFit { adjusted_r2, residuals })
}

/// Huber M-estimate by iteratively reweighted least squares with a MAD residual scale.
///
/// Returns the coefficients and the final weights.
pub fn huber(a: &DMatrix<f64>, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let mut coef = weighted_least_squares(a, y, None).coefficients;
    let mut weights = vec![1.0; n];
    let yscale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for _ in 0..HUBER_MAX_ITER {
        let r: Vec<f64> = (0..n).map(|i| y[i] - (0..coef.len()).map(|j| a[(i, j)] * coef[j]).sum::<f64>()).collect();
        let centered_mad = stats::median_abs_deviation(&r);
        let s = MAD_TO_SD * centered_mad;
        if !(s > 1e-12 * yscale) {
            weights = vec![1.0; n];
            break;
        }
        weights = r
            .iter()
            .map(|ri| {
                let u = (ri / s).abs();
                if u <= HUBER_C {
                    1.0
                } else {
                    HUBER_C / u
                }
            })
            .collect();
        let next = weighted_least_squares(a, y, Some(&weights)).coefficients;
        let size = coef.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let change = next.iter().zip(&coef).fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
        coef = next;
        if change <= 1e-8 * (1.0 + size) {
            break;
        }
    }
    (coef, weights)
}
