use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use tamecert::certify::{build_fp, verify_inverse, FpSpec};

/// FP spec file: weights and degree as rationals written `p/q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpFile {
    pub weights: Vec<String>,
    pub degree: String,
    pub generator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpSummary {
    pub spec: String,
    pub fp_map: String,
    pub fq_map: String,
    pub conjugate_degree: String,
    pub probes: usize,
    pub seed: u64,
    pub max_error: f64,
}

pub const INVERSE_TOL: f64 = 1e-8;

pub fn load_spec(path: &Path) -> Result<FpSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: FpFile =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(FpSpec::parse(&file.weights, &file.degree, &file.generator)?)
}

/// Writes `<stem>.fp.tmap` and `<stem>.fq.tmap` to `out_dir` and checks
/// that they are mutually inverse.
pub fn run_fp(spec_path: &Path, out_dir: &Path, probes: usize, seed: u64) -> Result<FpSummary> {
    let spec = load_spec(spec_path)?;
    let (fp, fq) = build_fp(&spec)?;
    let stem = spec_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("fp");
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let p: PathBuf = out_dir.join(format!("{stem}.fp.tmap"));
    let q: PathBuf = out_dir.join(format!("{stem}.fq.tmap"));
    std::fs::write(&p, format!("{fp}\n"))?;
    std::fs::write(&q, format!("{fq}\n"))?;
    let max_error = verify_inverse(&fp, &fq, probes, seed)?;
    Ok(FpSummary {
        spec: spec_path.display().to_string(),
        fp_map: p.display().to_string(),
        fq_map: q.display().to_string(),
        conjugate_degree: spec.conjugate_degree().to_string(),
        probes,
        seed,
        max_error,
    })
}
