//! Local-linear regression adjustment of bank summaries toward a target hyperparameter.
//!
//! Around a target `lambda*` the summaries are modeled as
//! `S_i = mu(lambda_i) + sigma(lambda_i) e_i`. Mean and log variance are fitted by
//! weighted least squares over the nearest bank rows, and each neighbor is moved to
//! `mu(lambda*) + sigma(lambda*) / sigma(lambda_i) * (S_i - mu(lambda_i))`.

use alloc::format;
use alloc::vec::Vec;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::HyperPoint;
use crate::error::{Error, Result};
use crate::linalg::weighted_least_squares;
use crate::simbank::{neighbors, Neighbor, SimulationBank};

/// Default neighborhood size.
pub const DEFAULT_NEIGHBORS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMode {
    /// Constant spread: residuals are shifted, never rescaled.
    Homoscedastic,
    /// Log squared residuals regressed on the hyperparameters.
    #[default]
    Heteroscedastic,
}

/// Nearest rows to a target with their Epanechnikov weights.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    pub target: HyperPoint,
    pub neighbors: Vec<Neighbor>,
    /// `1 - (d / d_k)^2`, zero at the farthest neighbor; all ones if every neighbor sits on the target.
    pub weights: Vec<f64>,
    design: DMatrix<f64>,
}

/// Finds the `k` nearest usable rows and builds the centered local design.
pub fn neighborhood(bank: &SimulationBank, target: &HyperPoint, k: usize) -> Result<Neighborhood> {
    let d = bank.dim();
    if k < 2 * (d + 2) {
        return Err(Error::Fit(format!("{k} neighbors is too few for a {d}-dimensional local fit; need {}", 2 * (d + 2))));
    }
    let nb = neighbors(bank, target, k)?;
    let dk = nb.last().map_or(0.0, |n| n.distance);
    let weights = nb
        .iter()
        .map(|n| if dk > 0.0 { (1.0 - (n.distance / dk) * (n.distance / dk)).max(0.0) } else { 1.0 })
        .collect();
    let t = target.as_slice();
    let scale = bank.scale();
    let design = DMatrix::from_fn(k, d + 1, |i, c| {
        if c == 0 {
            1.0
        } else {
            (bank.lambda(nb[i].index)[c - 1] - t[c - 1]) / scale[c - 1]
        }
    });
    Ok(Neighborhood { target: target.clone(), neighbors: nb, weights, design })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitFlags {
    /// The mean regression dropped collinear directions.
    pub rank_deficient: bool,
    /// The log-variance regression dropped collinear directions.
    pub variance_rank_deficient: bool,
    /// Residuals vanished; spread fixed at the floor and no rescaling applied.
    pub zero_residuals: bool,
}

/// Local fit of one summary around a target.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub summary: usize,
    pub mode: VarianceMode,
    pub target: HyperPoint,
    pub neighbors: Vec<usize>,
    pub weights: Vec<f64>,
    /// Intercept and one slope per coordinate, in search coordinates.
    pub mean_coefficients: Vec<f64>,
    /// Same layout for `log sigma^2`; `None` in homoscedastic mode.
    pub log_variance_coefficients: Option<Vec<f64>>,
    pub mean_at_target: f64,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `sigma(lambda*) / sigma(lambda_i)` for each neighbor.
    pub scale_ratios: Vec<f64>,
    pub flags: FitFlags,
}

/// Fits summary `j` over the `k` nearest rows of `bank` to `target`.
pub fn fit_local(
    bank: &SimulationBank,
    target: &HyperPoint,
    j: usize,
    k: usize,
    mode: VarianceMode,
) -> Result<RegressionFit> {
    let nb = neighborhood(bank, target, k)?;
    fit_neighborhood(bank, &nb, j, mode)
}

/// Fits summary `j` on a precomputed neighborhood.
pub fn fit_neighborhood(
    bank: &SimulationBank,
    nb: &Neighborhood,
    j: usize,
    mode: VarianceMode,
) -> Result<RegressionFit> {
    if j >= bank.summary_count() {
        return Err(Error::Fit(format!("summary {j} out of range for a bank with {}", bank.summary_count())));
    }
    let d = bank.dim();
    let k = nb.neighbors.len();
    let s: Vec<f64> = nb.neighbors.iter().map(|n| bank.summary(n.index, j)).collect();
    let w = &nb.weights;
    let mut flags = FitFlags::default();

    let (lo, hi) = s.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let beta = if lo == hi {
        let mut c = alloc::vec![0.0; d + 1];
        c[0] = lo;
        c
    } else {
        let mean = weighted_least_squares(&nb.design, &s, Some(w));
        flags.rank_deficient = mean.rank_deficient;
        mean.coefficients
    };
    let fitted: Vec<f64> = (0..k).map(|i| row_dot(&nb.design, i, &beta)).collect();
    let residuals: Vec<f64> = s.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    let mean_at_target = beta[0];

    let largest = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    if largest <= 1e-12 * (hi - lo) || largest == 0.0 {
        flags.zero_residuals = true;
    }

    let (log_variance_coefficients, scale_ratios) = match mode {
        VarianceMode::Homoscedastic => (None, alloc::vec![1.0; k]),
        VarianceMode::Heteroscedastic if flags.zero_residuals => (None, alloc::vec![1.0; k]),
        VarianceMode::Heteroscedastic => {
            let wsum: f64 = w.iter().sum();
            let mean_sq = if wsum > 0.0 {
                w.iter().zip(&residuals).map(|(wi, r)| wi * r * r).sum::<f64>() / wsum
            } else {
                residuals.iter().map(|r| r * r).sum::<f64>() / k as f64
            };
            let floor = (1e-12 * mean_sq).max(f64::MIN_POSITIVE);
            let z: Vec<f64> = residuals.iter().map(|r| libm::log((r * r).max(floor))).collect();
            let var = weighted_least_squares(&nb.design, &z, Some(w));
            flags.variance_rank_deficient = var.rank_deficient;
            let gamma = var.coefficients;
            let ratios: Vec<f64> = (0..k).map(|i| libm::exp(0.5 * (gamma[0] - row_dot(&nb.design, i, &gamma)))).collect();
            if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                return Err(Error::Fit("fitted spread overflowed at a neighbor".into()));
            }
            (Some(to_search_coordinates(&gamma, nb, bank)), ratios)
        }
    };

    Ok(RegressionFit {
        summary: j,
        mode,
        target: nb.target.clone(),
        neighbors: nb.neighbors.iter().map(|n| n.index).collect(),
        weights: w.clone(),
        mean_coefficients: to_search_coordinates(&beta, nb, bank),
        log_variance_coefficients,
        mean_at_target,
        fitted,
        residuals,
        scale_ratios,
        flags,
    })
}

fn row_dot(m: &DMatrix<f64>, i: usize, c: &[f64]) -> f64 {
    (0..c.len()).map(|j| m[(i, j)] * c[j]).sum()
}

/// Undoes the centering at the target and the per-coordinate bank scaling.
fn to_search_coordinates(c: &[f64], nb: &Neighborhood, bank: &SimulationBank) -> Vec<f64> {
    let t = nb.target.as_slice();
    let slopes: Vec<f64> = c[1..].iter().zip(bank.scale()).map(|(b, s)| b / s).collect();
    let intercept = c[0] - slopes.iter().zip(t).map(|(b, x)| b * x).sum::<f64>();
    core::iter::once(intercept).chain(slopes).collect()
}

impl RegressionFit {
    /// Approximate draws from the summary's predictive distribution at the target.
    pub fn adjusted_samples(&self) -> Vec<f64> {
        self.residuals
            .iter()
            .zip(&self.scale_ratios)
            .map(|(r, q)| self.mean_at_target + q * r)
            .collect()
    }

    /// Fitted mean at any point, from the search-coordinate coefficients.
    pub fn mean_at(&self, lambda: &[f64]) -> f64 {
        self.mean_coefficients[0] + self.mean_coefficients[1..].iter().zip(lambda).map(|(b, x)| b * x).sum::<f64>()
    }
}

/// Same as [`RegressionFit::adjusted_samples`].
pub fn adjusted_samples(fit: &RegressionFit) -> Vec<f64> {
    fit.adjusted_samples()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{HyperBox, SummaryVector};
    use crate::models::{labels, LinearGaussianModel, ModelSpec};
    use crate::simbank::{build_bank, Centering};
    use alloc::string::String;
    use alloc::vec;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn unit_box() -> HyperBox {
        HyperBox::linear(vec![0.0], vec![1.0]).unwrap()
    }

    fn point(x: f64) -> HyperPoint {
        HyperPoint::new(vec![x]).unwrap()
    }

    struct Line;

    impl ModelSpec for Line {
        fn name(&self) -> &str {
            "line"
        }
        fn dim(&self) -> usize {
            1
        }
        fn hyper_labels(&self) -> Vec<String> {
            labels(&["x"])
        }
        fn summary_labels(&self) -> Vec<String> {
            labels(&["s"])
        }
        fn simulate_summaries(&self, lambda: &[f64], _seed: u64) -> Result<SummaryVector> {
            Ok(SummaryVector(vec![2.0 + 3.0 * lambda[0]]))
        }
    }

    #[test]
    fn noiseless_line_is_recovered() {
        let bank = build_bank(&Line, &unit_box(), 2000, 1).unwrap();
        for mode in [VarianceMode::Homoscedastic, VarianceMode::Heteroscedastic] {
            let fit = fit_local(&bank, &point(0.4), 0, 200, mode).unwrap();
            assert!((fit.mean_coefficients[0] - 2.0).abs() < 1e-10);
            assert!((fit.mean_coefficients[1] - 3.0).abs() < 1e-10);
            assert!(fit.flags.zero_residuals);
            for v in fit.adjusted_samples() {
                assert!((v - 3.2).abs() < 1e-10);
            }
        }
    }

    struct Constant;

    impl ModelSpec for Constant {
        fn name(&self) -> &str {
            "constant"
        }
        fn dim(&self) -> usize {
            1
        }
        fn hyper_labels(&self) -> Vec<String> {
            labels(&["x"])
        }
        fn summary_labels(&self) -> Vec<String> {
            labels(&["s"])
        }
        fn simulate_summaries(&self, _lambda: &[f64], _seed: u64) -> Result<SummaryVector> {
            Ok(SummaryVector(vec![7.0]))
        }
    }

    #[test]
    fn constant_model_adjusts_to_itself() {
        let bank = build_bank(&Constant, &unit_box(), 300, 1).unwrap();
        let fit = fit_local(&bank, &point(0.9), 0, 100, VarianceMode::Heteroscedastic).unwrap();
        assert!(fit.adjusted_samples().iter().all(|v| *v == 7.0));
    }

    #[test]
    fn homoscedastic_adjustment_shifts_residuals() {
        let m = LinearGaussianModel::new(1.0, 2.0, 0.3).unwrap();
        let bank = build_bank(&m, &unit_box(), 5000, 2).unwrap();
        let fit = fit_local(&bank, &point(0.5), 0, 500, VarianceMode::Homoscedastic).unwrap();
        let adj = fit.adjusted_samples();
        for (a, r) in adj.iter().zip(&fit.residuals) {
            assert_eq!(a.to_bits(), (fit.mean_at_target + r).to_bits());
        }
        let mut back: Vec<f64> = adj.iter().map(|a| a - fit.mean_at_target).collect();
        let mut res = fit.residuals.clone();
        back.sort_by(f64::total_cmp);
        res.sort_by(f64::total_cmp);
        for (u, v) in back.iter().zip(&res) {
            assert!((u - v).abs() <= 4.0 * f64::EPSILON * fit.mean_at_target.abs().max(1.0));
        }
    }

    #[test]
    fn target_on_a_neighbor_returns_its_summary() {
        let m = LinearGaussianModel::new(1.0, 2.0, 0.3).unwrap();
        let bank = build_bank(&m, &unit_box(), 3000, 3).unwrap();
        let i = 17;
        let target = point(bank.lambda(i)[0]);
        let fit = fit_local(&bank, &target, 0, 300, VarianceMode::Homoscedastic).unwrap();
        let pos = fit.neighbors.iter().position(|&n| n == i).unwrap();
        assert!((fit.adjusted_samples()[pos] - bank.summary(i, 0)).abs() < 1e-12);
    }

    #[test]
    fn homoscedastic_slope_within_three_standard_errors() {
        let (a, b, c) = (0.5, -1.5, 0.4);
        let m = LinearGaussianModel::new(a, b, c).unwrap();
        let bank = build_bank(&m, &unit_box(), 20_000, 4).unwrap();
        let fit = fit_local(&bank, &point(0.5), 0, 1000, VarianceMode::Homoscedastic).unwrap();
        // WLS slope variance c^2 sum w^2 (x - xw)^2 / (sum w (x - xw)^2)^2.
        let xs: Vec<f64> = fit.neighbors.iter().map(|&n| bank.lambda(n)[0]).collect();
        let ws = &fit.weights;
        let sw: f64 = ws.iter().sum();
        let xw = ws.iter().zip(&xs).map(|(w, x)| w * x).sum::<f64>() / sw;
        let sxx: f64 = ws.iter().zip(&xs).map(|(w, x)| w * (x - xw) * (x - xw)).sum();
        let sxx2: f64 = ws.iter().zip(&xs).map(|(w, x)| w * w * (x - xw) * (x - xw)).sum();
        let se = c * sxx2.sqrt() / sxx;
        assert!((fit.mean_coefficients[1] - b).abs() < 3.0 * se, "{} vs {b}, se {se}", fit.mean_coefficients[1]);
    }

    struct Spread;

    impl ModelSpec for Spread {
        fn name(&self) -> &str {
            "spread"
        }
        fn dim(&self) -> usize {
            1
        }
        fn hyper_labels(&self) -> Vec<String> {
            labels(&["x"])
        }
        fn summary_labels(&self) -> Vec<String> {
            labels(&["s"])
        }
        fn simulate_summaries(&self, lambda: &[f64], seed: u64) -> Result<SummaryVector> {
            let z: f64 = crate::rng::stream(seed).sample(StandardNormal);
            Ok(SummaryVector(vec![libm::exp(lambda[0]) * z]))
        }
    }

    #[test]
    fn log_variance_slope_is_two() {
        let bx = HyperBox::linear(vec![-1.0], vec![1.0]).unwrap();
        let bank = build_bank(&Spread, &bx, 200_000, 5).unwrap();
        let fit = fit_local(&bank, &point(0.0), 0, 100_000, VarianceMode::Heteroscedastic).unwrap();
        let slope = fit.log_variance_coefficients.unwrap()[1];
        assert!((slope - 2.0).abs() < 0.1, "{slope}");
    }

    #[test]
    fn affine_equivariance() {
        let m = LinearGaussianModel::new(1.0, 2.0, 0.3).unwrap();
        let bank = build_bank(&m, &unit_box(), 4000, 6).unwrap();
        let (u, v) = (-2.5, 10.0);
        let mapped = SimulationBank::from_parts(
            "mapped".into(),
            1,
            1,
            bank.lambda_buffer().to_vec(),
            bank.summary_buffer().iter().map(|s| u * s + v).collect(),
            bank.waves().to_vec(),
            Centering::Mean,
        )
        .unwrap();
        for mode in [VarianceMode::Homoscedastic, VarianceMode::Heteroscedastic] {
            let a = fit_local(&bank, &point(0.3), 0, 400, mode).unwrap().adjusted_samples();
            let b = fit_local(&mapped, &point(0.3), 0, 400, mode).unwrap().adjusted_samples();
            for (x, y) in a.iter().zip(&b) {
                assert!((u * x + v - y).abs() < 1e-9, "{mode:?}");
            }
        }
    }

    #[test]
    fn too_small_neighborhood_is_rejected() {
        let m = LinearGaussianModel::new(1.0, 2.0, 0.3).unwrap();
        let bank = build_bank(&m, &unit_box(), 100, 6).unwrap();
        assert!(matches!(fit_local(&bank, &point(0.3), 0, 5, VarianceMode::Homoscedastic), Err(Error::Fit(_))));
        assert!(fit_local(&bank, &point(0.3), 1, 50, VarianceMode::Homoscedastic).is_err());
    }
}
