//! Space-filling initial designs and the wave-to-wave perturbation kernel.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::domain::{HyperBox, HyperPoint};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, sample_covariance};
use crate::rng::{self, tags, StreamRng};

/// Random Latin hypercubes tried when maximizing the minimum distance.
pub const DEFAULT_RESTARTS: usize = 100;

/// Maximin Latin hypercube of `r` points over the box, in search coordinates.
///
/// Each coordinate places exactly one point in every stratum of width `1/r` of its
/// search range. Of `restarts` independent hypercubes, the one whose smallest
/// pairwise distance (measured in the unit cube) is largest wins.
pub fn lhs_maximin(bx: &HyperBox, r: usize, seed: u64, restarts: usize) -> Result<Vec<HyperPoint>> {
    if r < 2 {
        return Err(Error::Design(format!("a Latin hypercube needs at least 2 points, got {r}")));
    }
    let d = bx.dim();
    for i in 0..d {
        let w = bx.search_width(i);
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::Design(format!("coordinate {i} has zero search width")));
        }
    }
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = rng::stream(rng::derive_path(seed, &[tags::DESIGN, restart as u64]));
        let unit = latin_hypercube_unit(r, d, &mut rng);
        let score = min_pairwise_sq(&unit);
        if best.as_ref().map_or(true, |(s, _)| score > *s) {
            best = Some((score, unit));
        }
    }
    let (_, unit) = best.expect("at least one restart");
    Ok(unit
        .into_iter()
        .map(|u| {
            let v = (0..d)
                .map(|i| bx.search_lower(i) + u[i] * bx.search_width(i))
                .collect();
            HyperPoint::from_vec_unchecked(v)
        })
        .collect())
}

fn latin_hypercube_unit(r: usize, d: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    let mut pts = alloc::vec![alloc::vec![0.0; d]; r];
    let mut strata: Vec<usize> = (0..r).collect();
    for i in 0..d {
        strata.shuffle(rng);
        for (p, &s) in pts.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            let mut x = (s as f64 + u) / r as f64;
            // rounding must never push a point into the next stratum
            if libm::floor(x * r as f64) as usize != s {
                x = (s as f64 + 0.5) / r as f64;
            }
            p[i] = x;
        }
    }
    pts
}

fn min_pairwise_sq(pts: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, p) in pts.iter().enumerate() {
        for q in &pts[a + 1..] {
            let d2: f64 = p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum();
            best = best.min(d2);
        }
    }
    best
}

/// Kernel bandwidth `(4 / ((2d + 1) Q))^(1 / (d + 4))`.
pub fn bandwidth(dim: usize, survivors: usize) -> f64 {
    let d = dim as f64;
    libm::pow(4.0 / ((2.0 * d + 1.0) * survivors as f64), 1.0 / (d + 4.0))
}

/// How the kernel covariance was obtained when the sample covariance could not be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFallback {
    /// Fewer than `d + 1` survivors: squared box half-widths on the diagonal.
    TooFewSurvivors,
    /// Singular wave covariance: its diagonal plus jitter.
    SingularCovariance,
}

/// Gaussian perturbation kernel `N(center, h^2 V_w)` for generating the next wave.
#[derive(Debug, Clone)]
pub struct PerturbationKernel {
    pub survivors: usize,
    pub dim: usize,
    /// Sample covariance of all current-wave points.
    pub wave_covariance: DMatrix<f64>,
    pub bandwidth: f64,
    /// `h^2 V_w`, or the fallback matrix.
    pub covariance: DMatrix<f64>,
    pub fallback: Option<KernelFallback>,
    factor: DMatrix<f64>,
}

impl PerturbationKernel {
    /// Builds the kernel for `survivors` retained points from the current wave.
    ///
    /// `multiplier` scales the bandwidth; 1 reproduces the formula exactly.
    pub fn new(bx: &HyperBox, wave_points: &[HyperPoint], survivors: usize, multiplier: f64) -> Result<Self> {
        let d = bx.dim();
        if wave_points.len() < 2 {
            return Err(Error::Design("need at least two wave points for a covariance".into()));
        }
        if !(multiplier > 0.0 && multiplier.is_finite()) {
            return Err(Error::Design(format!("bandwidth multiplier must be positive, got {multiplier}")));
        }
        let rows: Vec<&[f64]> = wave_points.iter().map(|p| p.as_slice()).collect();
        let wave_covariance = sample_covariance(&rows, d);
        let h = bandwidth(d, survivors) * multiplier;
        let h2 = h * h;

        let half_widths = DMatrix::from_diagonal(&DVector::from_iterator(
            d,
            (0..d).map(|i| 0.25 * bx.search_width(i) * bx.search_width(i) * h2),
        ));
        let (covariance, fallback) = if survivors < d + 1 {
            (half_widths, Some(KernelFallback::TooFewSurvivors))
        } else {
            let cov = &wave_covariance * h2;
            if cholesky_lower(&cov).is_some() {
                (cov, None)
            } else {
                let jitter = 1e-10 * (0..d).map(|i| bx.search_width(i) * bx.search_width(i)).sum::<f64>() / d as f64;
                let diag = DMatrix::from_diagonal(&DVector::from_iterator(
                    d,
                    (0..d).map(|i| wave_covariance[(i, i)] * h2 + jitter),
                ));
                (diag, Some(KernelFallback::SingularCovariance))
            }
        };
        let factor = cholesky_lower(&covariance)
            .ok_or_else(|| Error::Design("kernel covariance is not positive definite".into()))?;
        Ok(Self { survivors, dim: d, wave_covariance, bandwidth: h, covariance, fallback, factor })
    }

    /// Draws `m` points around `center` whose empirical covariance equals the kernel
    /// covariance exactly and whose mean equals `center` exactly (no box handling).
    ///
    /// Raw normals are centered, whitened by their own empirical covariance factor,
    /// and recolored by the kernel factor. With `m <= d` the empirical covariance is
    /// singular and plain draws are returned instead.
    pub fn sample_batch(&self, center: &HyperPoint, m: usize, rng: &mut StreamRng) -> (Vec<Vec<f64>>, bool) {
        let d = self.dim;
        let z = DMatrix::from_fn(m, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let corrected = if m > d {
            let mean = z.row_mean();
            let mut zc = z.clone();
            for mut row in zc.row_iter_mut() {
                row -= &mean;
            }
            let cov = zc.transpose() * &zc / (m - 1) as f64;
            cholesky_lower(&cov).and_then(|l| {
                let inv = l.solve_lower_triangular(&DMatrix::identity(d, d))?;
                // rows are draws: x = W (z - zbar) with W = L_sigma L_c^-1
                Some(zc * (&self.factor * inv).transpose())
            })
        } else {
            None
        };
        let exact = corrected.is_some();
        let offsets = corrected.unwrap_or_else(|| z * self.factor.transpose());
        let pts = offsets
            .row_iter()
            .map(|row| (0..d).map(|i| center[i] + row[i]).collect())
            .collect();
        (pts, exact)
    }
}

/// Next-wave points and any conditions worth reporting.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub points: Vec<HyperPoint>,
    pub kernel_bandwidth: f64,
    pub warnings: Vec<String>,
}

/// Draws `1/gamma` kernel points around each survivor, reflecting them into the box.
///
/// Output is survivor-major: the first `1/gamma` points belong to survivor 0.
pub fn perturb_survivors(
    bx: &HyperBox,
    survivors: &[HyperPoint],
    wave_points: &[HyperPoint],
    gamma: f64,
    seed: u64,
    multiplier: f64,
) -> Result<Perturbation> {
    let r = wave_points.len();
    let (per, q) = survivor_split(r, gamma)?;
    if survivors.len() != q {
        return Err(Error::Design(format!(
            "expected {q} survivors for r = {r}, gamma = {gamma}; got {}",
            survivors.len()
        )));
    }
    let kernel = PerturbationKernel::new(bx, wave_points, q, multiplier)?;
    let mut warnings = Vec::new();
    match kernel.fallback {
        Some(KernelFallback::TooFewSurvivors) => warnings.push(format!(
            "{q} survivors cannot estimate a {}-dimensional covariance; using box half-widths",
            bx.dim()
        )),
        Some(KernelFallback::SingularCovariance) => {
            warnings.push("wave covariance is singular; using its diagonal plus jitter".into())
        }
        None => {}
    }
    let mut points = Vec::with_capacity(r);
    let mut inexact = false;
    for (k, s) in survivors.iter().enumerate() {
        let mut rng = rng::stream(rng::derive_path(seed, &[tags::PERTURB, k as u64]));
        let (batch, exact) = kernel.sample_batch(s, per, &mut rng);
        inexact |= !exact;
        for mut v in batch {
            bx.reflect(&mut v);
            points.push(HyperPoint::from_vec_unchecked(v));
        }
    }
    if inexact {
        warnings.push(format!(
            "batches of {per} cannot match a {}-dimensional covariance exactly; plain draws used",
            bx.dim()
        ));
    }
    Ok(Perturbation { points, kernel_bandwidth: kernel.bandwidth, warnings })
}

/// Returns `(1/gamma, gamma r)`, both required to be integers.
pub fn survivor_split(r: usize, gamma: f64) -> Result<(usize, usize)> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Config(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    let per = 1.0 / gamma;
    let q = gamma * r as f64;
    let (per_i, q_i) = (libm::round(per), libm::round(q));
    if (per - per_i).abs() > 1e-9 || (q - q_i).abs() > 1e-9 || q_i < 1.0 {
        return Err(Error::Config(format!(
            "1/gamma = {per} and gamma * r = {q} must both be positive integers"
        )));
    }
    Ok((per_i as usize, q_i as usize))
}
