//! Subcommand implementations. Each returns the process exit code on success.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use histmatch_core::density::{joint_density_check, Kde2D};
use histmatch_core::domain::{Check, CheckKind, HyperBox, HyperPoint, PValueEstimate};
use histmatch_core::engine::{
    grid_axis, grid_pvalue_map, run_history_match, simulate_predictive, validate_lambda_with_draws, EvaluationMode,
    MatchOutcome,
};
use histmatch_core::rng::{self, tags};
use histmatch_core::simbank::{augment_bank, build_bank_with, SimulationBank};
use histmatch_core::stats;
use serde::{Deserialize, Serialize};

use crate::config::{Resolved, SummaryRef};
use crate::io::{self, fmt_f64, Manifest};
use crate::plot;

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNSATISFIED: i32 = 2;

/// Settings shared by every subcommand after flags and environment overrides.
#[derive(Debug, Clone, Default)]
pub struct Globals {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub deterministic: bool,
    pub oracle: bool,
    pub plots: bool,
}

impl Globals {
    pub fn apply(&self, r: &mut Resolved) {
        if let Some(s) = self.seed {
            r.config.wave.seed = s;
        }
        if self.oracle {
            r.config.wave.mode = EvaluationMode::Oracle;
        }
        r.config.output.plots |= self.plots;
    }

    pub fn out_dir(&self, r: &Resolved) -> Result<PathBuf> {
        let dir = match &self.out {
            Some(d) => d.clone(),
            None if r.config.output.dir.is_absolute() => r.config.output.dir.clone(),
            None => r.base_dir.join(&r.config.output.dir),
        };
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    fn manifest(&self, r: &Resolved, command: &str) -> Manifest {
        Manifest {
            tool: "histmatch".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: r.digest.clone(),
            seed: r.config.wave.seed,
            threads: self.threads,
            deterministic: self.deterministic,
            outputs: Vec::new(),
        }
    }
}

fn resolve_path(r: &Resolved, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        r.base_dir.join(p)
    }
}

/// The bank a command should emulate from: a given file, the configured file, or a fresh simulation.
fn obtain_bank(r: &Resolved, file: Option<&Path>) -> Result<Option<SimulationBank>> {
    if r.config.wave.mode == EvaluationMode::Oracle {
        return Ok(None);
    }
    let file = file.map(Path::to_path_buf).or_else(|| r.config.bank.path.as_ref().map(|p| resolve_path(r, p)));
    if let Some(path) = file {
        let (bank, bx) = io::read_bank(&path)?;
        ensure!(bx == r.bx, "bank {} was simulated over a different box", path.display());
        ensure!(
            bank.model_name() == r.model.name() && bank.summary_count() == r.model.summary_count(),
            "bank {} holds {} simulations, not {}",
            path.display(),
            bank.model_name(),
            r.model.name()
        );
        return Ok(Some(bank));
    }
    let w = &r.config.wave;
    let bank = build_bank_with(r.model.as_ref(), &r.bx, w.bank_size, rng::derive(w.seed, tags::BANK), r.config.bank.centering)?;
    Ok(Some(bank))
}

fn check_label(labels: &[String], c: &Check) -> String {
    let kind = match c.kind {
        CheckKind::Implausible => "implausible",
        CheckKind::Plausible => "plausible",
    };
    format!("p_{}_{}{}", labels[c.summary], kind, c.index)
}

fn pvalue_cells(checks: &[Check], pvalues: &[PValueEstimate]) -> Vec<String> {
    checks
        .iter()
        .map(|c| {
            pvalues
                .iter()
                .find(|p| p.summary == c.summary && p.kind == c.kind && p.index == c.index)
                .map_or_else(String::new, |p| fmt_f64(p.estimate))
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct MatchArgs {
    pub bank: Option<PathBuf>,
    pub save_bank: bool,
}

pub fn cmd_match(r: &mut Resolved, g: &Globals, args: &MatchArgs) -> Result<i32> {
    g.apply(r);
    let dir = g.out_dir(r)?;
    let bank = obtain_bank(r, args.bank.as_deref())?;
    let outcome = run_history_match(r.model.as_ref(), &r.bx, &r.constraints, &r.config.wave, bank)?;
    let mut files = write_match_outputs(r, &dir, &outcome)?;
    if args.save_bank {
        if let Some(b) = &outcome.bank {
            let p = dir.join("bank.hmb");
            io::write_bank(&p, b, &r.bx)?;
            files.push(p);
        }
    }
    io::write_manifest(&dir, g.manifest(r, "match"), &files)?;

    let rep = &outcome.report;
    for w in &rep.waves {
        eprintln!(
            "wave {}: min I = {:.6}, zero-I points = {}, bank rows = {}",
            w.wave, w.min_implausibility, w.zero_points, w.bank_rows
        );
    }
    if rep.found_zero() {
        let z = &rep.zero_points[0];
        eprintln!("found {} zero-implausibility points; most slack at {:?}", rep.zero_points.len(), z.natural);
        Ok(EXIT_OK)
    } else {
        if let Some(b) = &rep.best {
            eprintln!("no zero-implausibility point; best I = {:.6} at {:?} (wave {})", b.implausibility, b.natural, b.wave);
        }
        Ok(EXIT_UNSATISFIED)
    }
}

fn write_match_outputs(r: &Resolved, dir: &Path, outcome: &MatchOutcome) -> Result<Vec<PathBuf>> {
    let hyper = r.model.hyper_labels();
    let summaries = r.model.summary_labels();
    let checks = r.constraints.checks();
    let mut files = Vec::new();

    let trace = dir.join("waves.csv");
    let mut w = csv::Writer::from_path(&trace)?;
    let mut header: Vec<String> = vec!["wave".into(), "index".into()];
    header.extend(hyper.iter().cloned());
    header.extend(["implausibility", "survivor", "degenerate"].map(String::from));
    header.extend(checks.iter().map(|c| check_label(&summaries, c)));
    w.write_record(&header)?;
    for s in &outcome.waves {
        for (i, e) in s.results.iter().enumerate() {
            let mut row = vec![s.wave.to_string(), i.to_string()];
            row.extend(e.natural.iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(e.implausibility));
            row.push(s.survivors.contains(&i).to_string());
            row.push(e.is_degenerate().to_string());
            row.extend(pvalue_cells(&checks, &e.pvalues()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    files.push(trace);

    if r.bx.dim() == 2 {
        let p = dir.join("points.csv");
        let mut w = csv::Writer::from_path(&p)?;
        w.write_record(["wave", "index", &hyper[0], &hyper[1], "implausibility", "survivor"])?;
        for s in &outcome.waves {
            for (i, e) in s.results.iter().enumerate() {
                w.write_record([
                    s.wave.to_string(),
                    i.to_string(),
                    fmt_f64(e.natural[0]),
                    fmt_f64(e.natural[1]),
                    fmt_f64(e.implausibility),
                    s.survivors.contains(&i).to_string(),
                ])?;
            }
        }
        w.flush()?;
        files.push(p);
    }

    let report = dir.join("report.json");
    io::write_json(&report, &outcome.report)?;
    files.push(report);

    if r.config.output.plots && r.bx.dim() > 2 {
        let plots = dir.join("plots");
        fs::create_dir_all(&plots)?;
        let labels = search_labels(&r.bx, &hyper);
        for s in &outcome.waves {
            let pts: Vec<Vec<f64>> = s.points.iter().map(|p| p.as_slice().to_vec()).collect();
            let surv: Vec<bool> = (0..pts.len()).map(|i| s.survivors.contains(&i)).collect();
            let p = plots.join(format!("wave_{}.svg", s.wave));
            fs::write(&p, plot::scatter_matrix(&labels, &pts, &surv, &format!("wave {}", s.wave)))?;
            files.push(p);
        }
    }
    if r.config.output.export_design {
        if let Some(x) = &r.design {
            let p = dir.join("design.csv");
            io::write_design_csv(&p, x)?;
            files.push(p);
        }
    }
    Ok(files)
}

fn search_labels(bx: &HyperBox, hyper: &[String]) -> Vec<String> {
    hyper
        .iter()
        .zip(bx.scales())
        .map(|(l, s)| match s {
            histmatch_core::domain::Scale::Log => format!("log {l}"),
            histmatch_core::domain::Scale::Linear => l.clone(),
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct GridArgs {
    pub counts: Option<[usize; 2]>,
    pub overlay: Option<PathBuf>,
    pub bank: Option<PathBuf>,
}

pub fn parse_resolution(s: &str) -> Result<[usize; 2], String> {
    let (a, b) = s.split_once(['x', 'X', ',']).ok_or_else(|| format!("expected NxM, got '{s}'"))?;
    let p = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}"));
    Ok([p(a)?, p(b)?])
}

pub fn cmd_grid(r: &mut Resolved, g: &Globals, args: &GridArgs) -> Result<i32> {
    g.apply(r);
    if r.bx.dim() != 2 {
        bail!("grid maps need a 2-dimensional box, this one has {} coordinates", r.bx.dim());
    }
    let counts = args.counts.unwrap_or(r.config.grid.counts);
    let dir = g.out_dir(r)?;
    let bank = obtain_bank(r, args.bank.as_deref())?;
    let cells = grid_pvalue_map(r.model.as_ref(), &r.bx, &r.constraints, counts, &r.config.wave, bank.as_ref())?;
    let hyper = r.model.hyper_labels();
    let summaries = r.model.summary_labels();
    let checks = r.constraints.checks();
    let mut files = Vec::new();

    let p = dir.join("grid.csv");
    let mut w = csv::Writer::from_path(&p)?;
    let mut header: Vec<String> = vec!["i".into(), "j".into(), hyper[0].clone(), hyper[1].clone(), "implausibility".into()];
    header.extend(checks.iter().map(|c| check_label(&summaries, c)));
    w.write_record(&header)?;
    for (t, c) in cells.iter().enumerate() {
        let mut row = vec![(t / counts[1]).to_string(), (t % counts[1]).to_string()];
        row.extend(c.natural.iter().map(|v| fmt_f64(*v)));
        row.push(fmt_f64(c.implausibility));
        row.extend(pvalue_cells(&checks, &c.pvalues));
        w.write_record(&row)?;
    }
    w.flush()?;
    files.push(p);

    let overlay_path = args.overlay.clone().or_else(|| r.config.grid.overlay.as_ref().map(|p| resolve_path(r, p)));
    let overlay: Vec<(f64, f64)> = match &overlay_path {
        Some(p) => io::read_points_csv(p, &hyper)?
            .into_iter()
            .filter_map(|v| r.bx.from_natural(&v).ok())
            .map(|h| (h[0], h[1]))
            .collect(),
        None => Vec::new(),
    };
    let xs = grid_axis(r.bx.search_lower(0), r.bx.search_upper(0), counts[0]);
    let ys = grid_axis(r.bx.search_lower(1), r.bx.search_upper(1), counts[1]);
    let labels = search_labels(&r.bx, &hyper);
    let plots = dir.join("plots");
    if r.config.output.plots {
        fs::create_dir_all(&plots)?;
    }
    for c in checks.iter().filter(|_| r.config.output.plots) {
        let name = check_label(&summaries, c);
        let z: Vec<f64> = cells
            .iter()
            .map(|cell| {
                cell.pvalues
                    .iter()
                    .find(|p| p.summary == c.summary && p.kind == c.kind && p.index == c.index)
                    .map_or(f64::NAN, |p| p.estimate)
            })
            .collect();
        let ov = overlay_path.as_ref().map(|_| plot::Overlay { points: &overlay });
        let title = format!("{} = {}", name, c.value);
        let p = plots.join(format!("{name}.svg"));
        fs::write(&p, plot::heatmap(&xs, &ys, &z, c.alpha, ov, &title, &labels[0], &labels[1]))?;
        files.push(p);
    }
    io::write_manifest(&dir, g.manifest(r, "grid"), &files)?;
    eprintln!("wrote {} grid cells to {}", cells.len(), dir.join("grid.csv").display());
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidatedPoint {
    pub natural: Vec<f64>,
    pub satisfies: bool,
    pub boundary: bool,
    pub implausibility: f64,
    pub degenerate_draws: usize,
    pub checks: Vec<ValidatedCheck>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidatedCheck {
    pub summary: String,
    pub kind: CheckKind,
    pub value: f64,
    pub pvalue: f64,
    pub alpha: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub model: String,
    pub hyperparameters: Vec<String>,
    pub simulations: usize,
    pub seed: u64,
    pub points: Vec<ValidatedPoint>,
}

#[derive(Debug, Clone, Default)]
pub struct ValidateArgs {
    pub lambdas: Vec<Vec<f64>>,
    pub sims: Option<usize>,
}

pub fn cmd_validate(r: &mut Resolved, g: &Globals, args: &ValidateArgs) -> Result<i32> {
    g.apply(r);
    let points = if args.lambdas.is_empty() { r.config.validate.points.clone() } else { args.lambdas.clone() };
    ensure!(!points.is_empty(), "no points to validate: pass --lambda or set validate.points");
    let sims = args.sims.or(r.config.validate.sims).unwrap_or(r.config.wave.validation_sims);
    let lambdas: Vec<HyperPoint> = points
        .iter()
        .map(|p| r.bx.from_natural(p).with_context(|| format!("point {p:?}")))
        .collect::<Result<_>>()?;
    let dir = g.out_dir(r)?;
    let hyper = r.model.hyper_labels();
    let summaries = r.model.summary_labels();
    let seed = r.config.wave.seed;
    let mut report = ValidationReport {
        model: r.model.name().into(),
        hyperparameters: hyper.clone(),
        simulations: sims,
        seed,
        points: Vec::new(),
    };
    let mut files = Vec::new();
    let plots = dir.join("plots");
    if r.config.output.plots {
        fs::create_dir_all(&plots)?;
    }
    for (k, lambda) in lambdas.iter().enumerate() {
        let (v, draws) = validate_lambda_with_draws(
            r.model.as_ref(),
            &r.bx,
            lambda,
            &r.constraints,
            sims,
            rng::derive_path(seed, &[tags::VALIDATE, k as u64]),
        )?;
        let checks = r
            .constraints
            .checks()
            .iter()
            .map(|c| {
                let p = v
                    .pvalues
                    .iter()
                    .find(|p| p.summary == c.summary && p.kind == c.kind && p.index == c.index)
                    .expect("one p-value per check");
                let holds = match c.kind {
                    CheckKind::Implausible => p.estimate < c.alpha,
                    CheckKind::Plausible => p.estimate >= c.alpha,
                };
                ValidatedCheck { summary: summaries[c.summary].clone(), kind: c.kind, value: c.value, pvalue: p.estimate, alpha: c.alpha, holds }
            })
            .collect();
        for e in r.constraints.entries().iter().filter(|_| r.config.output.plots) {
            let p = plots.join(format!("validate_{}_{}.svg", k, summaries[e.summary]));
            let title = format!("{} at {:?}", summaries[e.summary], v.natural);
            fs::write(&p, plot::histogram(&draws.samples[&e.summary], &e.plausible, &e.implausible, &title, &summaries[e.summary]))?;
            files.push(p);
        }
        eprintln!("{:?}: satisfies = {}, I = {:.6}", v.natural, v.satisfies, v.implausibility);
        report.points.push(ValidatedPoint {
            natural: v.natural,
            satisfies: v.satisfies,
            boundary: v.boundary,
            implausibility: v.implausibility,
            degenerate_draws: v.degenerate_draws,
            checks,
        });
    }

    let p = dir.join("validation.csv");
    let mut w = csv::Writer::from_path(&p)?;
    let mut header: Vec<String> = vec!["point".into()];
    header.extend(hyper.iter().cloned());
    header.extend(["summary", "kind", "value", "pvalue", "alpha", "holds"].map(String::from));
    w.write_record(&header)?;
    for (k, pt) in report.points.iter().enumerate() {
        for c in &pt.checks {
            let mut row = vec![k.to_string()];
            row.extend(pt.natural.iter().map(|v| fmt_f64(*v)));
            let kind = if c.kind == CheckKind::Implausible { "implausible" } else { "plausible" };
            row.extend([c.summary.clone(), kind.into(), fmt_f64(c.value), fmt_f64(c.pvalue), fmt_f64(c.alpha), c.holds.to_string()]);
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    files.insert(0, p);
    let json = dir.join("validation.json");
    io::write_json(&json, &report)?;
    files.insert(0, json);
    io::write_manifest(&dir, g.manifest(r, "validate"), &files)?;
    Ok(if report.points.iter().all(|p| p.satisfies) { EXIT_OK } else { EXIT_UNSATISFIED })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointReport {
    pub model: String,
    pub lambda: Vec<f64>,
    pub summaries: [String; 2],
    pub point: [f64; 2],
    /// Sample means of the two summaries.
    pub centroid: [f64; 2],
    pub pvalue: f64,
    pub density: f64,
    pub bandwidth: [f64; 2],
    pub samples: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, Default)]
pub struct JointArgs {
    pub lambda: Option<Vec<f64>>,
    pub pair: Option<[SummaryRef; 2]>,
    pub point: Option<[f64; 2]>,
    pub sims: Option<usize>,
}

pub fn cmd_jointcheck(r: &mut Resolved, g: &Globals, args: &JointArgs) -> Result<i32> {
    g.apply(r);
    let base = r.config.jointcheck.clone();
    let lambda = args.lambda.clone().or_else(|| base.as_ref().map(|b| b.lambda.clone()));
    let pair = args.pair.clone().or_else(|| base.as_ref().map(|b| b.summaries.clone()));
    let point = args.point.or_else(|| base.as_ref().map(|b| b.point));
    let sims = args.sims.or_else(|| base.as_ref().map(|b| b.sims)).unwrap_or(10_000);
    let (Some(lambda), Some(pair), Some(point)) = (lambda, pair, point) else {
        bail!("jointcheck needs a lambda, a summary pair and a point (flags or a [jointcheck] section)");
    };
    let labels = r.model.summary_labels();
    let a = pair[0].resolve(&labels).context("first summary")?;
    let b = pair[1].resolve(&labels).context("second summary")?;
    ensure!(a != b, "the two summaries must differ");
    let hp = r.bx.from_natural(&lambda)?;
    let natural = r.bx.to_natural(&hp);
    let draws = simulate_predictive(r.model.as_ref(), &natural, &[a, b], sims, rng::derive(r.config.wave.seed, tags::VALIDATE))?;
    let pairs: Vec<(f64, f64)> = draws.samples[&a].iter().copied().zip(draws.samples[&b].iter().copied()).collect();
    let jc = joint_density_check(&pairs, (point[0], point[1]))?;
    let dir = g.out_dir(r)?;
    let report = JointReport {
        model: r.model.name().into(),
        lambda: natural,
        summaries: [labels[a].clone(), labels[b].clone()],
        point,
        centroid: [stats::mean(&draws.samples[&a]), stats::mean(&draws.samples[&b])],
        pvalue: jc.pvalue,
        density: jc.density,
        bandwidth: jc.bandwidth,
        samples: jc.samples,
        dropped: draws.dropped,
    };
    let json = dir.join("jointcheck.json");
    io::write_json(&json, &report)?;

    let mut files = vec![json];
    if r.config.output.plots {
        files.push(joint_plot(&dir, &pairs, &draws.samples[&a], &draws.samples[&b], point, jc.pvalue, [&labels[a], &labels[b]])?);
    }
    io::write_manifest(&dir, g.manifest(r, "jointcheck"), &files)?;
    eprintln!("joint p-value of {:?} for ({}, {}): {:.6}", point, labels[a], labels[b], jc.pvalue);
    Ok(EXIT_OK)
}

fn joint_plot(dir: &Path, pairs: &[(f64, f64)], xa: &[f64], xb: &[f64], point: [f64; 2], pvalue: f64, labels: [&str; 2]) -> Result<PathBuf> {
    let kde = Kde2D::fit(pairs)?;
    let span = |v: &[f64]| {
        let s = stats::sorted_copy(v);
        let (lo, hi) = (stats::quantile_sorted(&s, 0.005), stats::quantile_sorted(&s, 0.995));
        let pad = 0.1 * (hi - lo).max(1e-9);
        (lo - pad, hi + pad)
    };
    let (xr, yr) = (span(xa), span(xb));
    let xs = grid_axis(xr.0, xr.1, 80);
    let ys = grid_axis(yr.0, yr.1, 80);
    let z: Vec<f64> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).map(|(x, y)| kde.density(x, y)).collect();
    let svg = dir.join("jointcheck.svg");
    let title = format!("p = {:.4} at ({}, {})", pvalue, point[0], point[1]);
    fs::write(&svg, plot::density_contours(&xs, &ys, &z, (point[0], point[1]), &title, labels[0], labels[1]))?;
    Ok(svg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BankInfo {
    pub model: String,
    pub dim: usize,
    pub summary_count: usize,
    pub rows: usize,
    pub degenerate_rows: usize,
    pub centering: histmatch_core::simbank::Centering,
    pub scale: Vec<f64>,
    pub rows_by_wave: BTreeMap<String, usize>,
    #[serde(rename = "box")]
    pub bounds: HyperBox,
}

pub fn bank_info(bank: &SimulationBank, bx: &HyperBox) -> BankInfo {
    BankInfo {
        model: bank.model_name().into(),
        dim: bank.dim(),
        summary_count: bank.summary_count(),
        rows: bank.len(),
        degenerate_rows: bank.degenerate_count(),
        centering: bank.centering(),
        scale: bank.scale().to_vec(),
        rows_by_wave: bank.provenance().into_iter().map(|(w, n)| (w.to_string(), n)).collect(),
        bounds: bx.clone(),
    }
}

pub fn cmd_bank_build(r: &mut Resolved, g: &Globals, size: Option<usize>) -> Result<i32> {
    g.apply(r);
    let w = &r.config.wave;
    let n = size.unwrap_or(w.bank_size);
    let bank = build_bank_with(r.model.as_ref(), &r.bx, n, rng::derive(w.seed, tags::BANK), r.config.bank.centering)?;
    let dir = g.out_dir(r)?;
    let p = dir.join("bank.hmb");
    io::write_bank(&p, &bank, &r.bx)?;
    let info = dir.join("bank.json");
    io::write_json(&info, &bank_info(&bank, &r.bx))?;
    io::write_manifest(&dir, g.manifest(r, "bank build"), &[p.clone(), info])?;
    eprintln!("wrote {} rows ({} degenerate) to {}", bank.len(), bank.degenerate_count(), p.display());
    Ok(EXIT_OK)
}

pub struct AugmentArgs {
    pub bank: PathBuf,
    pub points: PathBuf,
    pub per_point: usize,
    pub wave: u32,
}

pub fn cmd_bank_augment(r: &mut Resolved, g: &Globals, args: &AugmentArgs) -> Result<i32> {
    g.apply(r);
    let bank = obtain_bank(r, Some(&args.bank))?.context("bank augmentation needs emulated mode")?;
    let pts: Vec<HyperPoint> = io::read_points_csv(&args.points, &r.model.hyper_labels())?
        .iter()
        .map(|p| r.bx.from_natural(p).with_context(|| format!("point {p:?}")))
        .collect::<Result<_>>()?;
    let seed = rng::derive(r.config.wave.seed, tags::AUGMENT);
    let bigger = augment_bank(&bank, r.model.as_ref(), &r.bx, &pts, args.per_point, args.wave, seed)?;
    let dir = g.out_dir(r)?;
    let p = dir.join("bank.hmb");
    io::write_bank(&p, &bigger, &r.bx)?;
    let info = dir.join("bank.json");
    io::write_json(&info, &bank_info(&bigger, &r.bx))?;
    io::write_manifest(&dir, g.manifest(r, "bank augment"), &[p.clone(), info])?;
    eprintln!("augmented {} -> {} rows at {} points", bank.len(), bigger.len(), pts.len());
    Ok(EXIT_OK)
}

pub fn cmd_bank_inspect(path: &Path) -> Result<i32> {
    let (bank, bx) = io::read_bank(path)?;
    println!("{}", serde_json::to_string_pretty(&bank_info(&bank, &bx))?);
    Ok(EXIT_OK)
}
