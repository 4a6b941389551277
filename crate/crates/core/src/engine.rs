//! Wave-by-wave history match over a hyperparameter box.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::density::constraint_pvalues;
use crate::design::{self, perturb_survivors, survivor_split};
use crate::domain::{ConstraintSet, HyperBox, HyperPoint, ImplausibilityResult, PValueEstimate};
use crate::emulator::{fit_neighborhood, neighborhood, VarianceMode, DEFAULT_NEIGHBORS};
use crate::error::{Error, Result};
use crate::implausibility::{implausibility, satisfies};
use crate::models::{simulate_with_retries, ModelSpec};
use crate::par;
use crate::rng::{self, tags};
use crate::simbank::{augment_bank, build_bank, SimulationBank};

/// Fewest direct simulations accepted by [`validate_lambda`].
pub const MIN_VALIDATION_SIMS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaluationMode {
    /// p-values from regression-adjusted bank samples.
    #[default]
    Emulated,
    /// p-values from fresh simulations at every point.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveConfig {
    /// Points per wave.
    pub r: usize,
    /// Fraction of each wave kept as survivors.
    pub gamma: f64,
    /// Cutoff for constraints that do not set their own.
    pub alpha: f64,
    /// Neighbors per local regression.
    pub k: usize,
    pub mode: EvaluationMode,
    pub variance: VarianceMode,
    /// Initial bank size when no bank is supplied.
    pub bank_size: usize,
    /// Fresh simulations added at each survivor between waves; 0 disables.
    pub augment_per_survivor: usize,
    /// Augment only at this many of the best survivors; `None` uses all of them.
    pub augment_top: Option<usize>,
    pub max_waves: usize,
    /// Stop after this many waves without a decrease of the best implausibility.
    pub patience: Option<usize>,
    pub stop_on_zero: bool,
    /// Direct simulations per point in oracle mode.
    pub oracle_sims: usize,
    pub lhs_restarts: usize,
    /// Scales the perturbation bandwidth.
    pub bandwidth_multiplier: f64,
    /// Zero-implausibility points validated by direct simulation; the rest stay pending.
    pub validate_top: usize,
    pub validation_sims: usize,
    pub seed: u64,
}

impl Default for WaveConfig {
    fn default() -> Self {
        Self {
            r: 100,
            gamma: 0.1,
            alpha: 0.05,
            k: DEFAULT_NEIGHBORS,
            mode: EvaluationMode::Emulated,
            variance: VarianceMode::Heteroscedastic,
            bank_size: 100_000,
            augment_per_survivor: 0,
            augment_top: None,
            max_waves: 5,
            patience: None,
            stop_on_zero: true,
            oracle_sims: 5000,
            lhs_restarts: design::DEFAULT_RESTARTS,
            bandwidth_multiplier: 1.0,
            validate_top: 1,
            validation_sims: 10_000,
            seed: 1,
        }
    }
}

impl WaveConfig {
    pub fn validate(&self) -> Result<()> {
        let (per, q) = survivor_split(self.r, self.gamma)?;
        if self.r < per {
            return Err(Error::Config(format!("r = {} is smaller than 1/gamma = {per}", self.r)));
        }
        if q == 0 {
            return Err(Error::Config("no survivors per wave".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.augment_top == Some(0) {
            return Err(Error::Config("augment_top must be at least 1 when set".into()));
        }
        if self.max_waves == 0 {
            return Err(Error::Config("max_waves must be at least 1".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be at least 1 when set".into()));
        }
        if !(self.bandwidth_multiplier > 0.0 && self.bandwidth_multiplier.is_finite()) {
            return Err(Error::Config("bandwidth_multiplier must be positive".into()));
        }
        if self.mode == EvaluationMode::Oracle && self.oracle_sims < 2 {
            return Err(Error::Config("oracle mode needs at least 2 simulations per point".into()));
        }
        if self.validate_top > 0 && self.validation_sims < MIN_VALIDATION_SIMS {
            return Err(Error::Config(format!(
                "validation_sims must be at least {MIN_VALIDATION_SIMS}, got {}",
                self.validation_sims
            )));
        }
        Ok(())
    }
}

/// Outcome at one candidate point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub lambda: HyperPoint,
    /// Natural-scale coordinates.
    pub natural: Vec<f64>,
    /// Infinite when the point could not be evaluated.
    pub implausibility: f64,
    pub result: Option<ImplausibilityResult>,
    pub failure: Option<String>,
}

impl Evaluation {
    pub fn is_degenerate(&self) -> bool {
        self.result.is_none()
    }

    pub fn satisfied(&self) -> bool {
        self.result.as_ref().is_some_and(satisfies)
    }

    pub fn pvalues(&self) -> Vec<PValueEstimate> {
        self.result.as_ref().map(|r| r.pvalues().copied().collect()).unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    /// 1-based wave number.
    pub wave: usize,
    pub points: Vec<HyperPoint>,
    pub results: Vec<Evaluation>,
    /// The `gamma r` lowest-implausibility points, ties by index.
    pub survivors: Vec<usize>,
    pub min_implausibility: f64,
    /// Running minimum over this and all earlier waves.
    pub best_so_far: f64,
    /// Bank rows available while this wave was scored.
    pub bank_rows: usize,
    pub warnings: Vec<String>,
}

impl WaveState {
    pub fn degenerate_count(&self) -> usize {
        self.results.iter().filter(|e| e.is_degenerate()).count()
    }

    pub fn zero_count(&self) -> usize {
        self.results.iter().filter(|e| e.implausibility == 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ZeroFound,
    Patience,
    MaxWaves,
}

/// Direct-simulation check of one hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub natural: Vec<f64>,
    pub pvalues: Vec<PValueEstimate>,
    pub implausibility: f64,
    pub satisfies: bool,
    pub boundary: bool,
    pub simulations: usize,
    /// Draws dropped because a summary was undefined.
    pub degenerate_draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ValidationRecord {
    Pending,
    Completed(Validation),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroPoint {
    pub wave: usize,
    pub index: usize,
    pub lambda: HyperPoint,
    pub natural: Vec<f64>,
    /// Smallest margin of any check on its satisfying side.
    pub slack: f64,
    pub pvalues: Vec<PValueEstimate>,
    pub validation: ValidationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveSummary {
    pub wave: usize,
    pub min_implausibility: f64,
    pub best_so_far: f64,
    pub zero_points: usize,
    pub degenerate_points: usize,
    pub bank_rows: usize,
    pub survivors: Vec<usize>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestPoint {
    pub wave: usize,
    pub index: usize,
    pub natural: Vec<f64>,
    pub implausibility: f64,
    pub pvalues: Vec<PValueEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSummary {
    /// `(wave tag, rows)`; tag 0 is the initial pseudo-prior bank.
    pub rows_by_wave: Vec<(u32, usize)>,
    pub total_rows: usize,
    pub degenerate_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub model: String,
    pub hyperparameters: Vec<String>,
    pub summaries: Vec<String>,
    pub config: WaveConfig,
    pub stop_reason: StopReason,
    pub waves: Vec<WaveSummary>,
    pub best: Option<BestPoint>,
    /// Ordered by decreasing slack.
    pub zero_points: Vec<ZeroPoint>,
    pub bank: Option<BankSummary>,
    /// Simulations spent on validation records.
    pub validation_simulations: usize,
}

impl MatchReport {
    pub fn found_zero(&self) -> bool {
        !self.zero_points.is_empty()
    }
}

/// Everything a run produces: the report, the full wave trace, and the final bank.
#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub report: MatchReport,
    pub waves: Vec<WaveState>,
    pub bank: Option<SimulationBank>,
}

/// Scores one point. Failures become an infinite implausibility with the reason kept.
pub fn evaluate_point(
    model: &dyn ModelSpec,
    bx: &HyperBox,
    constraints: &ConstraintSet,
    cfg: &WaveConfig,
    bank: Option<&SimulationBank>,
    lambda: &HyperPoint,
    seed: u64,
) -> Evaluation {
    let natural = bx.to_natural(lambda);
    let scored = match (cfg.mode, bank) {
        (EvaluationMode::Emulated, Some(bank)) => emulated_pvalues(bank, constraints, cfg, lambda),
        (EvaluationMode::Emulated, None) => Err(Error::Bank("emulated evaluation needs a bank".into())),
        (EvaluationMode::Oracle, _) => direct_pvalues(model, constraints, &natural, cfg.oracle_sims, seed).map(|(p, _)| p),
    }
    .and_then(|p| implausibility(lambda.clone(), &p, constraints));
    match scored {
        Ok(r) => Evaluation { lambda: lambda.clone(), natural, implausibility: r.implausibility, result: Some(r), failure: None },
        Err(e) => Evaluation {
            lambda: lambda.clone(),
            natural,
            implausibility: f64::INFINITY,
            result: None,
            failure: Some(format!("{e}")),
        },
    }
}

fn emulated_pvalues(
    bank: &SimulationBank,
    constraints: &ConstraintSet,
    cfg: &WaveConfig,
    lambda: &HyperPoint,
) -> Result<Vec<PValueEstimate>> {
    let nb = neighborhood(bank, lambda, cfg.k)?;
    let mut samples = BTreeMap::new();
    for j in constraints.summaries() {
        let fit = fit_neighborhood(bank, &nb, j, cfg.variance)?;
        samples.insert(j, fit.adjusted_samples());
    }
    constraint_pvalues(&samples, constraints)
}

/// Prior predictive draws of selected summaries at one natural-scale point.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDraws {
    pub samples: BTreeMap<usize, Vec<f64>>,
    /// Draws dropped because some summary was undefined.
    pub dropped: usize,
}

/// Simulates `n` draws at `natural`; draw `i` uses seed `derive(seed, i)`.
pub fn simulate_predictive(
    model: &dyn ModelSpec,
    natural: &[f64],
    summaries: &[usize],
    n: usize,
    seed: u64,
) -> Result<PredictiveDraws> {
    if let Some(&j) = summaries.iter().find(|&&j| j >= model.summary_count()) {
        return Err(Error::Config(format!("model {} has no summary {j}", model.name())));
    }
    let draws = par::map_range(n, |i| simulate_with_retries(model, natural, rng::derive(seed, i as u64)));
    let mut samples: BTreeMap<usize, Vec<f64>> = summaries.iter().map(|&j| (j, Vec::with_capacity(n))).collect();
    let mut dropped = 0;
    for d in draws {
        let s = d?;
        if s.is_degenerate() {
            dropped += 1;
            continue;
        }
        for (&j, v) in samples.iter_mut() {
            v.push(s.0[j]);
        }
    }
    if dropped == n {
        return Err(Error::Simulation { lambda: natural.to_vec(), reason: "every draw was degenerate".into() });
    }
    Ok(PredictiveDraws { samples, dropped })
}

fn direct_pvalues(
    model: &dyn ModelSpec,
    constraints: &ConstraintSet,
    natural: &[f64],
    n: usize,
    seed: u64,
) -> Result<(Vec<PValueEstimate>, PredictiveDraws)> {
    let draws = simulate_predictive(model, natural, &constraints.summaries(), n, seed)?;
    Ok((constraint_pvalues(&draws.samples, constraints)?, draws))
}

/// Direct prior predictive check at `lambda` (search coordinates) with `n_sims` fresh draws.
pub fn validate_lambda(
    model: &dyn ModelSpec,
    bx: &HyperBox,
    lambda: &HyperPoint,
    constraints: &ConstraintSet,
    n_sims: usize,
    seed: u64,
) -> Result<Validation> {
    validate_lambda_with_draws(model, bx, lambda, constraints, n_sims, seed).map(|(v, _)| v)
}

/// [`validate_lambda`] that also hands back the simulated summaries.
pub fn validate_lambda_with_draws(
    model: &dyn ModelSpec,
    bx: &HyperBox,
    lambda: &HyperPoint,
    constraints: &ConstraintSet,
    n_sims: usize,
    seed: u64,
) -> Result<(Validation, PredictiveDraws)> {
    if n_sims < MIN_VALIDATION_SIMS {
        return Err(Error::Config(format!("validation needs at least {MIN_VALIDATION_SIMS} simulations, got {n_sims}")));
    }
    if !bx.contains(lambda) {
        return Err(Error::InvalidPoint("validation point lies outside the box".into()));
    }
    constraints.check_summary_count(model.summary_count())?;
    let natural = bx.to_natural(lambda);
    let (pvalues, draws) = direct_pvalues(model, constraints, &natural, n_sims, rng::derive(seed, tags::VALIDATE))?;
    let r = implausibility(lambda.clone(), &pvalues, constraints)?;
    let v = Validation {
        natural,
        satisfies: satisfies(&r),
        boundary: r.boundary,
        implausibility: r.implausibility,
        pvalues,
        simulations: n_sims,
        degenerate_draws: draws.dropped,
    };
    Ok((v, draws))
}

fn check_inputs(model: &dyn ModelSpec, bx: &HyperBox, constraints: &ConstraintSet) -> Result<()> {
    if model.dim() != bx.dim() {
        return Err(Error::Config(format!(
            "model {} has {} hyperparameters but the box has {}",
            model.name(),
            model.dim(),
            bx.dim()
        )));
    }
    if constraints.is_empty() {
        return Err(Error::InvalidConstraints("no constraints".into()));
    }
    constraints.check_summary_count(model.summary_count())
}

/// Runs the history match.
///
/// In emulated mode `bank` seeds the emulator; without one, a pseudo-prior bank of
/// `cfg.bank_size` rows is simulated first.
pub fn run_history_match(
    model: &dyn ModelSpec,
    bx: &HyperBox,
    constraints: &ConstraintSet,
    cfg: &WaveConfig,
    bank: Option<SimulationBank>,
) -> Result<MatchOutcome> {
    cfg.validate()?;
    check_inputs(model, bx, constraints)?;
    let (_, q) = survivor_split(cfg.r, cfg.gamma)?;
    let mut bank = match (cfg.mode, bank) {
        (EvaluationMode::Oracle, b) => b,
        (EvaluationMode::Emulated, Some(b)) => {
            if b.dim() != bx.dim() || b.summary_count() != model.summary_count() {
                return Err(Error::Bank("supplied bank does not match the model".into()));
            }
            Some(b)
        }
        (EvaluationMode::Emulated, None) => {
            Some(build_bank(model, bx, cfg.bank_size, rng::derive(cfg.seed, tags::BANK))?)
        }
    };

    let mut points = design::lhs_maximin(bx, cfg.r, cfg.seed, cfg.lhs_restarts)?;
    let mut waves: Vec<WaveState> = Vec::new();
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let stop_reason;
    let mut pending_warnings: Vec<String> = Vec::new();

    loop {
        let w = waves.len() + 1;
        let results = par::map_range(points.len(), |i| {
            evaluate_point(
                model,
                bx,
                constraints,
                cfg,
                bank.as_ref(),
                &points[i],
                rng::derive_path(cfg.seed, &[tags::ORACLE, w as u64, i as u64]),
            )
        });
        if results.iter().all(Evaluation::is_degenerate) {
            return Err(Error::DegenerateWave {
                wave: w,
                reason: results[0].failure.clone().unwrap_or_default(),
            });
        }
        let mut order: Vec<usize> = (0..results.len()).collect();
        order.sort_by(|&a, &b| results[a].implausibility.total_cmp(&results[b].implausibility).then(a.cmp(&b)));
        let survivors: Vec<usize> = order[..q].to_vec();
        let min_i = results[order[0]].implausibility;
        if min_i < best {
            best = min_i;
            stale = 0;
        } else {
            stale += 1;
        }
        let zero_found = results.iter().any(|e| e.implausibility == 0.0);
        waves.push(WaveState {
            wave: w,
            points: points.clone(),
            results,
            survivors,
            min_implausibility: min_i,
            best_so_far: best,
            bank_rows: bank.as_ref().map_or(0, |b| b.len()),
            warnings: core::mem::take(&mut pending_warnings),
        });

        if cfg.stop_on_zero && zero_found {
            stop_reason = StopReason::ZeroFound;
            break;
        }
        if cfg.patience.is_some_and(|p| stale >= p) {
            stop_reason = StopReason::Patience;
            break;
        }
        if w >= cfg.max_waves {
            stop_reason = StopReason::MaxWaves;
            break;
        }

        let state = waves.last().expect("wave just pushed");
        let surv: Vec<HyperPoint> = state.survivors.iter().map(|&i| state.points[i].clone()).collect();
        if cfg.mode == EvaluationMode::Emulated && cfg.augment_per_survivor > 0 {
            let b = bank.as_ref().expect("emulated mode has a bank");
            let at = cfg.augment_top.map_or(surv.len(), |t| t.min(surv.len()));
            bank = Some(augment_bank(
                b,
                model,
                bx,
                &surv[..at],
                cfg.augment_per_survivor,
                w as u32,
                rng::derive(cfg.seed, tags::AUGMENT),
            )?);
        }
        let next = perturb_survivors(
            bx,
            &surv,
            &state.points,
            cfg.gamma,
            rng::derive(cfg.seed, w as u64),
            cfg.bandwidth_multiplier,
        )?;
        pending_warnings = next.warnings;
        points = next.points;
    }

    let report = build_report(model, bx, constraints, cfg, &waves, bank.as_ref(), stop_reason)?;
    Ok(MatchOutcome { report, waves, bank })
}

fn build_report(
    model: &dyn ModelSpec,
    bx: &HyperBox,
    constraints: &ConstraintSet,
    cfg: &WaveConfig,
    waves: &[WaveState],
    bank: Option<&SimulationBank>,
    stop_reason: StopReason,
) -> Result<MatchReport> {
    let mut zero: Vec<ZeroPoint> = Vec::new();
    let mut best: Option<BestPoint> = None;
    for s in waves {
        for (i, e) in s.results.iter().enumerate() {
            if best.as_ref().is_none_or(|b| e.implausibility < b.implausibility) && e.implausibility.is_finite() {
                best = Some(BestPoint {
                    wave: s.wave,
                    index: i,
                    natural: e.natural.clone(),
                    implausibility: e.implausibility,
                    pvalues: e.pvalues(),
                });
            }
            if let (Some(r), true) = (&e.result, e.implausibility == 0.0) {
                zero.push(ZeroPoint {
                    wave: s.wave,
                    index: i,
                    lambda: e.lambda.clone(),
                    natural: e.natural.clone(),
                    slack: r.slack(),
                    pvalues: e.pvalues(),
                    validation: ValidationRecord::Pending,
                });
            }
        }
    }
    zero.sort_by(|a, b| b.slack.total_cmp(&a.slack).then(a.wave.cmp(&b.wave)).then(a.index.cmp(&b.index)));
    let mut validation_simulations = 0;
    for (rank, z) in zero.iter_mut().enumerate().take(cfg.validate_top) {
        let v = validate_lambda(
            model,
            bx,
            &z.lambda,
            constraints,
            cfg.validation_sims,
            rng::derive_path(cfg.seed, &[tags::VALIDATE, rank as u64]),
        )?;
        validation_simulations += v.simulations;
        z.validation = ValidationRecord::Completed(v);
    }
    Ok(MatchReport {
        model: String::from(model.name()),
        hyperparameters: model.hyper_labels(),
        summaries: model.summary_labels(),
        config: cfg.clone(),
        stop_reason,
        waves: waves
            .iter()
            .map(|s| WaveSummary {
                wave: s.wave,
                min_implausibility: s.min_implausibility,
                best_so_far: s.best_so_far,
                zero_points: s.zero_count(),
                degenerate_points: s.degenerate_count(),
                bank_rows: s.bank_rows,
                survivors: s.survivors.clone(),
                warnings: s.warnings.clone(),
            })
            .collect(),
        best,
        zero_points: zero,
        bank: bank.map(|b| BankSummary {
            rows_by_wave: b.provenance(),
            total_rows: b.len(),
            degenerate_rows: b.degenerate_count(),
        }),
        validation_simulations,
    })
}

/// One cell of a two-dimensional p-value map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub lambda: HyperPoint,
    pub natural: Vec<f64>,
    pub pvalues: Vec<PValueEstimate>,
    pub implausibility: f64,
}

/// Equally spaced search coordinates; a single count means the midpoint.
pub fn grid_axis(lower: f64, upper: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![0.5 * (lower + upper)],
        _ => (0..count).map(|i| lower + (upper - lower) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// p-values and implausibility over a `counts[0] x counts[1]` grid, second coordinate fastest.
pub fn grid_pvalue_map(
    model: &dyn ModelSpec,
    bx: &HyperBox,
    constraints: &ConstraintSet,
    counts: [usize; 2],
    cfg: &WaveConfig,
    bank: Option<&SimulationBank>,
) -> Result<Vec<GridCell>> {
    if bx.dim() != 2 {
        return Err(Error::Unsupported(format!("p-value maps need a 2-dimensional box, got {}", bx.dim())));
    }
    if counts.contains(&0) {
        return Err(Error::Config("grid counts must be positive".into()));
    }
    check_inputs(model, bx, constraints)?;
    let a = grid_axis(bx.search_lower(0), bx.search_upper(0), counts[0]);
    let b = grid_axis(bx.search_lower(1), bx.search_upper(1), counts[1]);
    let cells = par::map_range(a.len() * b.len(), |t| {
        let p = HyperPoint::from_vec_unchecked(alloc::vec![a[t / b.len()], b[t % b.len()]]);
        let e = evaluate_point(model, bx, constraints, cfg, bank, &p, rng::derive_path(cfg.seed, &[tags::ORACLE, 0, t as u64]));
        GridCell { pvalues: e.pvalues(), implausibility: e.implausibility, natural: e.natural, lambda: e.lambda }
    });
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{CheckKind, SummaryConstraint};
    use crate::models::LinearGaussianModel;
    use alloc::vec;

    fn unit_box() -> HyperBox {
        HyperBox::linear(vec![0.0], vec![1.0]).unwrap()
    }

    fn constraints(implausible: Vec<f64>, plausible: Vec<f64>) -> ConstraintSet {
        ConstraintSet::new(vec![SummaryConstraint { summary: 0, implausible, plausible, alpha: 0.05 }]).unwrap()
    }

    fn small_cfg() -> WaveConfig {
        WaveConfig { r: 20, gamma: 0.1, k: 200, bank_size: 5000, validation_sims: 2000, lhs_restarts: 10, ..Default::default() }
    }

    #[test]
    fn trivially_satisfiable_stops_after_first_wave() {
        let m = LinearGaussianModel::new(0.0, 0.0, 1.0).unwrap();
        let out = run_history_match(&m, &unit_box(), &constraints(vec![], vec![0.0]), &small_cfg(), None).unwrap();
        assert_eq!(out.waves.len(), 1);
        assert_eq!(out.report.stop_reason, StopReason::ZeroFound);
        assert!(out.report.found_zero());
        assert!(matches!(out.report.zero_points[0].validation, ValidationRecord::Completed(_)));
        assert!(out.report.zero_points[1..].iter().all(|z| z.validation == ValidationRecord::Pending));
    }

    #[test]
    fn infeasible_runs_out_of_patience_with_monotone_best() {
        let m = LinearGaussianModel::new(0.0, 0.0, 1.0).unwrap();
        let cfg = WaveConfig { max_waves: 10, patience: Some(2), ..small_cfg() };
        let out = run_history_match(&m, &unit_box(), &constraints(vec![0.0], vec![]), &cfg, None).unwrap();
        assert!(!out.report.found_zero());
        assert!(out.report.best.is_some());
        for pair in out.waves.windows(2) {
            assert!(pair[1].best_so_far <= pair[0].best_so_far);
        }
        assert!(matches!(out.report.stop_reason, StopReason::Patience | StopReason::MaxWaves));
    }

    #[test]
    fn survivors_are_lowest_implausibility_and_waves_keep_size() {
        let m = LinearGaussianModel::new(0.0, 4.0, 1.0).unwrap();
        let cfg = WaveConfig { max_waves: 3, stop_on_zero: false, patience: None, ..small_cfg() };
        let out = run_history_match(&m, &unit_box(), &constraints(vec![0.0], vec![3.5]), &cfg, None).unwrap();
        assert_eq!(out.waves.len(), 3);
        for s in &out.waves {
            assert_eq!(s.points.len(), 20);
            assert_eq!(s.survivors.len(), 2);
            let worst_kept = s.survivors.iter().map(|&i| s.results[i].implausibility).fold(f64::NEG_INFINITY, f64::max);
            let dropped = (0..20).filter(|i| !s.survivors.contains(i));
            for i in dropped {
                assert!(s.results[i].implausibility >= worst_kept);
            }
        }
    }

    #[test]
    fn augmentation_grows_the_bank_between_waves() {
        let m = LinearGaussianModel::new(0.0, 4.0, 1.0).unwrap();
        let cfg = WaveConfig { max_waves: 3, stop_on_zero: false, patience: None, augment_per_survivor: 50, ..small_cfg() };
        let out = run_history_match(&m, &unit_box(), &constraints(vec![0.0], vec![3.5]), &cfg, None).unwrap();
        let rows: Vec<usize> = out.waves.iter().map(|s| s.bank_rows).collect();
        assert_eq!(rows, vec![5000, 5100, 5200]);
        assert_eq!(out.report.bank.unwrap().rows_by_wave, vec![(0, 5000), (1, 100), (2, 100)]);
        let top = WaveConfig { augment_top: Some(1), ..cfg };
        let out = run_history_match(&m, &unit_box(), &constraints(vec![0.0], vec![3.5]), &top, None).unwrap();
        assert_eq!(out.bank.unwrap().len(), 5100);
    }

    #[test]
    fn identical_seeds_reproduce_the_report() {
        let m = LinearGaussianModel::new(0.0, 4.0, 1.0).unwrap();
        let cfg = WaveConfig { max_waves: 2, stop_on_zero: false, patience: None, ..small_cfg() };
        let c = constraints(vec![0.0], vec![3.5]);
        let a = run_history_match(&m, &unit_box(), &c, &cfg, None).unwrap();
        let b = run_history_match(&m, &unit_box(), &c, &cfg, None).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.waves, b.waves);
    }

    #[test]
    fn oracle_and_emulated_zero_sets_mostly_agree() {
        let m = LinearGaussianModel::new(0.0, 4.0, 1.0).unwrap();
        let bx = unit_box();
        let c = constraints(vec![0.0], vec![3.0]);
        let emu = WaveConfig { bank_size: 50_000, k: 1000, ..small_cfg() };
        let orc = WaveConfig { mode: EvaluationMode::Oracle, oracle_sims: 2000, ..emu.clone() };
        let bank = build_bank(&m, &bx, emu.bank_size, 3).unwrap();
        let pts: Vec<HyperPoint> = (0..50).map(|i| HyperPoint::new(vec![(i as f64 + 0.5) / 50.0]).unwrap()).collect();
        let zero = |cfg: &WaveConfig| -> Vec<bool> {
            pts.iter()
                .enumerate()
                .map(|(i, p)| evaluate_point(&m, &bx, &c, cfg, Some(&bank), p, i as u64).implausibility == 0.0)
                .collect()
        };
        let (a, b) = (zero(&emu), zero(&orc));
        let either = a.iter().zip(&b).filter(|(x, y)| **x || **y).count();
        let both = a.iter().zip(&b).filter(|(x, y)| **x && **y).count();
        assert!(either > 0);
        assert!(both as f64 >= 0.8 * either as f64, "{both} of {either}");
    }

    #[test]
    fn validation_of_the_analytic_model() {
        let m = LinearGaussianModel::new(0.0, 1.0, 1.0).unwrap();
        let bx = HyperBox::linear(vec![-1.0], vec![1.0]).unwrap();
        let c = constraints(vec![-40.0], vec![]);
        let v = validate_lambda(&m, &bx, &HyperPoint::new(vec![0.0]).unwrap(), &c, 5000, 1).unwrap();
        assert!(v.satisfies);
        assert_eq!(v.pvalues[0].kind, CheckKind::Implausible);
        assert_eq!(v.pvalues[0].estimate, 0.0);
        assert!(validate_lambda(&m, &bx, &HyperPoint::new(vec![0.0]).unwrap(), &c, 999, 1).is_err());
        assert!(validate_lambda(&m, &bx, &HyperPoint::new(vec![3.0]).unwrap(), &c, 5000, 1).is_err());
    }

    #[test]
    fn grid_ordering_and_single_cell_consistency() {
        let m = crate::models::LogisticModel::default();
        let bx = HyperBox::linear(vec![0.5, 0.5], vec![10.0, 10.0]).unwrap();
        let c = ConstraintSet::new(vec![SummaryConstraint { summary: 0, implausible: vec![0.198], plausible: vec![1.974], alpha: 0.05 }]).unwrap();
        let cfg = WaveConfig { k: 300, ..WaveConfig::default() };
        let bank = build_bank(&m, &bx, 5000, 2).unwrap();
        let g = grid_pvalue_map(&m, &bx, &c, [2, 2], &cfg, Some(&bank)).unwrap();
        let coords: Vec<Vec<f64>> = g.iter().map(|c| c.natural.clone()).collect();
        assert_eq!(coords, vec![vec![0.5, 0.5], vec![0.5, 10.0], vec![10.0, 0.5], vec![10.0, 10.0]]);
        let one = grid_pvalue_map(&m, &bx, &c, [1, 1], &cfg, Some(&bank)).unwrap();
        assert_eq!(one[0].natural, vec![5.25, 5.25]);
        let direct = evaluate_point(&m, &bx, &c, &cfg, Some(&bank), &one[0].lambda, 0);
        assert_eq!(direct.pvalues(), one[0].pvalues);
        let lg = LinearGaussianModel::new(0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            grid_pvalue_map(&lg, &unit_box(), &constraints(vec![0.0], vec![]), [2, 2], &cfg, None),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn bad_configurations_are_rejected() {
        let bad = [
            WaveConfig { gamma: 0.3, ..small_cfg() },
            WaveConfig { r: 5, gamma: 0.1, ..small_cfg() },
            WaveConfig { max_waves: 0, ..small_cfg() },
            WaveConfig { validation_sims: 10, ..small_cfg() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        let m = LinearGaussianModel::new(0.0, 1.0, 1.0).unwrap();
        let wrong = ConstraintSet::new(vec![SummaryConstraint { summary: 3, implausible: vec![0.0], plausible: vec![], alpha: 0.05 }]).unwrap();
        assert!(run_history_match(&m, &unit_box(), &wrong, &small_cfg(), None).is_err());
    }
}
