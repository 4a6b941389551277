//! Small descriptive statistics used across the crate.

use alloc::vec::Vec;

/// Consistency constant turning a median absolute deviation into a normal-sd estimate.
pub const MAD_TO_SD: f64 = 1.4826;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the `n - 1` divisor.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    libm::sqrt(variance(xs))
}

/// Linear-interpolation quantile (R type 7) of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn sorted_copy(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn median(xs: &[f64]) -> f64 {
    quantile_sorted(&sorted_copy(xs), 0.5)
}

/// Interquartile range (type 7 quartiles).
pub fn iqr(xs: &[f64]) -> f64 {
    let s = sorted_copy(xs);
    quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25)
}

/// Median absolute deviation about the median, unscaled.
pub fn median_abs_deviation(xs: &[f64]) -> f64 {
    let m = median(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m).abs()).collect();
    median(&dev)
}

/// Mean absolute deviation about `center`.
pub fn mean_abs_deviation_about(xs: &[f64], center: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().map(|x| (x - center).abs()).sum::<f64>() / xs.len() as f64
}

/// Non-excess sample kurtosis `m4 / m2^2` with central moments about the mean.
///
/// Always at least 1 when defined; `NaN` when all values coincide.
pub fn kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let (m2, m4) = xs.iter().fold((0.0, 0.0), |(a, b), x| {
        let d2 = (x - m) * (x - m);
        (a + d2, b + d2 * d2)
    });
    let n = xs.len() as f64;
    let (m2, m4) = (m2 / n, m4 / n);
    if m2 <= 0.0 {
        return f64::NAN;
    }
    m4 / (m2 * m2)
}

/// Pearson correlation; `NaN` when either side is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return f64::NAN;
    }
    sxy / libm::sqrt(sxx * syy)
}
