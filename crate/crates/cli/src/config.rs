//! TOML run configuration.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use histmatch_core::domain::{ConstraintSet, HyperBox, Scale, SummaryConstraint};
use histmatch_core::engine::WaveConfig;
use histmatch_core::models::{
    synth_design, BinomialModel, DesignMatrix, LinearGaussianModel, LogisticModel, ModelSpec, ShrinkageModel,
    ShrinkagePriorConfig,
};
use histmatch_core::models::shrinkage::{ShrinkageHyper, ShrinkageOptions};
use histmatch_core::simbank::Centering;
use serde::{Deserialize, Serialize};

use crate::io::read_design_csv;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(rename = "box")]
    pub bounds: BoxConfig,
    pub constraints: Vec<ConstraintConfig>,
    #[serde(default)]
    pub wave: WaveConfig,
    #[serde(default)]
    pub bank: BankConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub jointcheck: Option<JointConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Logistic {
        #[serde(default)]
        doses: Option<[f64; 4]>,
        /// Center and scale the doses to unit sample sd.
        #[serde(default = "yes")]
        standardize: bool,
    },
    Binomial {
        trials: u64,
    },
    LinearGaussian {
        a: f64,
        b: f64,
        c: f64,
    },
    Shrinkage {
        design: DesignSource,
        /// Hyperparameters searched, in box order.
        free: Vec<ShrinkageHyper>,
        #[serde(default)]
        fixed: ShrinkagePriorConfig,
        #[serde(default)]
        options: ShrinkageOptions,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSource {
    Synthetic {
        rows: usize,
        cols: usize,
        seed: u64,
        #[serde(default)]
        rho: f64,
    },
    /// Headered CSV, one row per observation; relative paths resolve against the config file.
    Csv(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub scale: Option<Vec<Scale>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SummaryRef {
    Index(usize),
    Label(String),
}

impl SummaryRef {
    pub fn resolve(&self, labels: &[String]) -> Result<usize> {
        match self {
            SummaryRef::Index(i) if *i < labels.len() => Ok(*i),
            SummaryRef::Index(i) => bail!("summary index {i} out of range (model has {})", labels.len()),
            SummaryRef::Label(s) => labels
                .iter()
                .position(|l| l == s)
                .ok_or_else(|| anyhow!("unknown summary '{s}' (model has {})", labels.join(", "))),
        }
    }
}

impl std::str::FromStr for SummaryRef {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(s.parse().map(SummaryRef::Index).unwrap_or_else(|_| SummaryRef::Label(s.to_string())))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub summary: SummaryRef,
    #[serde(default)]
    pub implausible: Vec<f64>,
    #[serde(default)]
    pub plausible: Vec<f64>,
    /// Falls back to `wave.alpha`.
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BankConfig {
    /// Existing bank file to start from instead of simulating one.
    pub path: Option<PathBuf>,
    pub centering: Centering,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Natural-scale points checked by `validate` when none are given on the command line.
    pub points: Vec<Vec<f64>>,
    /// Defaults to `wave.validation_sims`.
    pub sims: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub counts: [usize; 2],
    /// Points CSV drawn over the heat maps.
    pub overlay: Option<PathBuf>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { counts: [50, 50], overlay: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    pub lambda: Vec<f64>,
    pub summaries: [SummaryRef; 2],
    pub point: [f64; 2],
    #[serde(default = "default_joint_sims")]
    pub sims: usize,
}

fn default_joint_sims() -> usize {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// SVG figures next to the CSV/JSON outputs; `--plots` turns them back on.
    pub plots: bool,
    /// Write the resolved design matrix of a shrinkage model as `design.csv`.
    pub export_design: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("histmatch-out"), plots: true, export_design: false }
    }
}

/// A parsed configuration with its model, box and constraints built.
pub struct Resolved {
    pub config: RunConfig,
    pub model: Box<dyn ModelSpec>,
    pub design: Option<DesignMatrix>,
    pub bx: HyperBox,
    pub constraints: ConstraintSet,
    /// SHA-256 of the configuration text.
    pub digest: String,
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow!("{e}"))
    }
}

pub fn load(path: &Path) -> Result<Resolved> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = RunConfig::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    resolve(config, crate::io::sha256_hex(text.as_bytes()), base_dir)
}

pub fn resolve(config: RunConfig, digest: String, base_dir: PathBuf) -> Result<Resolved> {
    let (model, design) = build_model(&config.model, &base_dir).context("model")?;
    let b = &config.bounds;
    let scale = b.scale.clone().unwrap_or_else(|| vec![Scale::Linear; b.lower.len()]);
    let bx = HyperBox::new(b.lower.clone(), b.upper.clone(), scale).context("box")?;
    if bx.dim() != model.dim() {
        bail!(
            "box: {} coordinates but model {} has {} hyperparameters ({})",
            bx.dim(),
            model.name(),
            model.dim(),
            model.hyper_labels().join(", ")
        );
    }
    let labels = model.summary_labels();
    let mut entries = Vec::with_capacity(config.constraints.len());
    for (i, c) in config.constraints.iter().enumerate() {
        let summary = c.summary.resolve(&labels).with_context(|| format!("constraints[{i}].summary"))?;
        entries.push(SummaryConstraint {
            summary,
            implausible: c.implausible.clone(),
            plausible: c.plausible.clone(),
            alpha: c.alpha.unwrap_or(config.wave.alpha),
        });
    }
    let constraints = ConstraintSet::new(entries).context("constraints")?;
    config.wave.validate().context("wave")?;
    Ok(Resolved { config, model, design, bx, constraints, digest, base_dir })
}

fn build_model(m: &ModelConfig, base: &Path) -> Result<(Box<dyn ModelSpec>, Option<DesignMatrix>)> {
    Ok(match m {
        ModelConfig::Logistic { doses: None, .. } => (Box::new(LogisticModel::default()), None),
        ModelConfig::Logistic { doses: Some(d), standardize: true } => (Box::new(LogisticModel::standardized(*d)?), None),
        ModelConfig::Logistic { doses: Some(d), standardize: false } => (Box::new(LogisticModel::new(*d)?), None),
        ModelConfig::Binomial { trials } => (Box::new(BinomialModel::new(*trials)?), None),
        ModelConfig::LinearGaussian { a, b, c } => (Box::new(LinearGaussianModel::new(*a, *b, *c)?), None),
        ModelConfig::Shrinkage { design, free, fixed, options } => {
            let x = match design {
                DesignSource::Synthetic { rows, cols, seed, rho } => synth_design(*rows, *cols, *seed, *rho)?,
                DesignSource::Csv(p) => {
                    let p = if p.is_absolute() { p.clone() } else { base.join(p) };
                    read_design_csv(&p).with_context(|| format!("design {}", p.display()))?
                }
            };
            let model = ShrinkageModel::new(x.clone(), *fixed, free.clone(), *options)?;
            (Box::new(model), Some(x))
        }
    })
}
