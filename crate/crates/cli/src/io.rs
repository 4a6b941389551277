//! File formats: design CSV, points CSV, JSON reports, the bank snapshot and the run manifest.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use histmatch_core::domain::{HyperBox, Scale};
use histmatch_core::models::DesignMatrix;
use histmatch_core::simbank::{Centering, SimulationBank};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads a headered numeric CSV into a standardized design matrix.
pub fn read_design_csv(path: &Path) -> Result<DesignMatrix> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().with_context(|| format!("row {}: '{f}' is not a number", i + 1)))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(DesignMatrix::from_rows(&rows)?)
}

pub fn write_design_csv(path: &Path, x: &DesignMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..x.cols()).map(|e| format!("x{}", e + 1)))?;
    for row in x.to_rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads natural-scale points from the `d` columns named in `labels`; other columns are ignored.
pub fn read_points_csv(path: &Path, labels: &[String]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = rdr.headers()?.clone();
    let cols: Vec<usize> = labels
        .iter()
        .map(|l| {
            header
                .iter()
                .position(|h| h == l)
                .with_context(|| format!("{} has no column '{l}'", path.display()))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        out.push(cols.iter().map(|&c| rec[c].parse::<f64>().context("non-numeric point")).collect::<Result<_>>()?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

const BANK_MAGIC: &[u8; 6] = b"HMBANK";
const BANK_VERSION: u16 = 1;

/// Writes a bank snapshot: header (d, J, N, model, centering, box), wave tags, then
/// row-major search-coordinate hyperparameters and summaries, all little-endian.
pub fn write_bank(path: &Path, bank: &SimulationBank, bx: &HyperBox) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + bank.len() * 4 + (bank.lambda_buffer().len() + bank.summary_buffer().len()) * 8);
    buf.extend_from_slice(BANK_MAGIC);
    buf.extend_from_slice(&BANK_VERSION.to_le_bytes());
    for n in [bank.dim(), bank.summary_count(), bank.len()] {
        buf.extend_from_slice(&(n as u64).to_le_bytes());
    }
    let name = bank.model_name().as_bytes();
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name);
    buf.push(match bank.centering() {
        Centering::Mean => 0,
        Centering::Median => 1,
    });
    for i in 0..bx.dim() {
        buf.extend_from_slice(&bx.natural_lower()[i].to_le_bytes());
        buf.extend_from_slice(&bx.natural_upper()[i].to_le_bytes());
        buf.push(match bx.scales()[i] {
            Scale::Linear => 0,
            Scale::Log => 1,
        });
    }
    for w in bank.waves() {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    for v in bank.lambda_buffer().iter().chain(bank.summary_buffer()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        ensure!(self.0.len() >= n, "bank file is truncated");
        let (a, b) = self.0.split_at(n);
        self.0 = b;
        Ok(a)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into()?))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        ensure!(self.0.len() / 8 >= n, "bank file is truncated");
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Reads a bank snapshot along with the box it was simulated over.
pub fn read_bank(path: &Path) -> Result<(SimulationBank, HyperBox)> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))?
        .read_to_end(&mut bytes)?;
    let mut c = Cursor(&bytes);
    if c.take(6)? != BANK_MAGIC {
        bail!("{} is not a bank file", path.display());
    }
    let version = c.u16()?;
    ensure!(version == BANK_VERSION, "unsupported bank version {version}");
    let (d, j, n) = (c.u64()? as usize, c.u64()? as usize, c.u64()? as usize);
    let name_len = c.u32()? as usize;
    let model = String::from_utf8(c.take(name_len)?.to_vec()).context("model name is not UTF-8")?;
    let centering = match c.u8()? {
        0 => Centering::Mean,
        1 => Centering::Median,
        other => bail!("unknown centering tag {other}"),
    };
    let (mut lower, mut upper, mut scale) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..d {
        lower.push(c.f64()?);
        upper.push(c.f64()?);
        scale.push(match c.u8()? {
            0 => Scale::Linear,
            1 => Scale::Log,
            other => bail!("unknown scale tag {other}"),
        });
    }
    let bx = HyperBox::new(lower, upper, scale)?;
    let waves = (0..n).map(|_| c.u32()).collect::<Result<Vec<u32>>>()?;
    let lambdas = c.f64s(n * d)?;
    let summaries = c.f64s(n * j)?;
    ensure!(c.0.is_empty(), "trailing bytes after bank data");
    Ok((SimulationBank::from_parts(model, d, j, lambdas, summaries, waves, centering)?, bx))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Enough to rerun a command and check its outputs bit for bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub deterministic: bool,
    pub outputs: Vec<OutputFile>,
}

pub fn write_manifest(dir: &Path, mut manifest: Manifest, files: &[PathBuf]) -> Result<()> {
    for f in files {
        let bytes = fs::read(f).with_context(|| format!("reading {}", f.display()))?;
        let name = f.strip_prefix(dir).unwrap_or(f).to_string_lossy().replace('\\', "/");
        manifest.outputs.push(OutputFile { file: name, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
    }
    write_json(&dir.join("manifest.json"), &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use histmatch_core::models::LinearGaussianModel;
    use histmatch_core::simbank::build_bank_with;

    #[test]
    fn digest_of_known_input() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn bank_round_trips() {
        let m = LinearGaussianModel::new(0.0, 1.0, 1.0).unwrap();
        let bx = HyperBox::new(vec![0.1], vec![4.0], vec![Scale::Log]).unwrap();
        let bank = build_bank_with(&m, &bx, 300, 9, Centering::Median).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.hmb");
        write_bank(&p, &bank, &bx).unwrap();
        let (back, bx2) = read_bank(&p).unwrap();
        assert_eq!(bx2, bx);
        assert_eq!(back.lambda_buffer(), bank.lambda_buffer());
        assert_eq!(back.summary_buffer(), bank.summary_buffer());
        assert_eq!(back.waves(), bank.waves());
        assert_eq!(back.scale(), bank.scale());
        assert_eq!(back.model_name(), "linear_gaussian");
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(read_bank(&p).is_err());
    }

    #[test]
    fn design_csv_round_trips() {
        let x = histmatch_core::models::synth_design(12, 3, 4, 0.3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_design_csv(&p, &x).unwrap();
        let back = read_design_csv(&p).unwrap();
        for e in 0..3 {
            for (a, b) in back.column(e).iter().zip(x.column(e)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
