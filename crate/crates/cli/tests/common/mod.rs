#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the binary with `HISTMATCH_*` variables cleared unless passed in `env`.
pub fn histmatch(cwd: &Path, args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_histmatch"));
    cmd.current_dir(cwd).args(args);
    for (k, _) in std::env::vars() {
        if k.starts_with("HISTMATCH_") {
            cmd.env_remove(k);
        }
    }
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

pub fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))).unwrap()
}

pub fn csv_rows(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

/// S ~ N(4 lambda, 1) on [0, 1]; feasible for lambda above roughly 0.5.
pub const LINEAR: &str = r#"
[model]
kind = "linear_gaussian"
a = 0.0
b = 4.0
c = 1.0

[box]
lower = [0.0]
upper = [1.0]

[[constraints]]
summary = "S"
implausible = [0.0]
plausible = [3.0]

[wave]
r = 40
gamma = 0.25
k = 200
bank_size = 4000
max_waves = 3
validation_sims = 1000
oracle_sims = 500

[output]
dir = "out"
"#;

/// The implausible value sits at the predictive mode for every lambda.
pub const INFEASIBLE: &str = r#"
[model]
kind = "linear_gaussian"
a = 0.0
b = 0.0
c = 1.0

[box]
lower = [0.0]
upper = [1.0]

[[constraints]]
summary = "S"
implausible = [0.0]

[wave]
r = 20
gamma = 0.25
k = 200
bank_size = 2000
max_waves = 2

[output]
dir = "out"
"#;

pub const LOGISTIC: &str = r#"
[model]
kind = "logistic"

[box]
lower = [0.1, 0.5]
upper = [10.0, 10.0]

[[constraints]]
summary = "S1"
implausible = [0.198]
plausible = [1.974]

[wave]
r = 40
gamma = 0.25
k = 300
bank_size = 20000
max_waves = 2
validation_sims = 2000

[validate]
points = [[0.23, 0.73]]

[output]
dir = "out"
"#;

/// Three searched scales of a small shrinkage model with two summaries.
pub const SHRINKAGE: &str = r#"
[model]
kind = "shrinkage"
free = ["a_sigma", "a_beta", "sigma0"]
design = { synthetic = { rows = 30, cols = 12, seed = 1 } }
options = { splits = 2 }

[box]
lower = [0.05, 0.001, 0.1]
upper = [2.0, 1.0, 5.0]
scale = ["log", "log", "log"]

[[constraints]]
summary = "S2"
plausible = [0.05, 0.95]

[wave]
r = 30
gamma = 0.2
k = 100
bank_size = 1500
max_waves = 2
stop_on_zero = false
validate_top = 0

[jointcheck]
lambda = [0.5, 0.05, 1.0]
summaries = ["S1", "S2"]
point = [0.0, 0.5]
sims = 1000

[output]
dir = "out"
"#;
