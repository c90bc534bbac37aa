use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use tamecert::certify::Verdict;

use crate::check::run_check;
use crate::config::RunConfig;
use crate::fp::run_fp;

pub const CORPUS_ENV: &str = "TAMECERT_CORPUS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub map: Vec<MapEntry>,
    #[serde(default)]
    pub fp: Vec<FpEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapEntry {
    pub file: String,
    #[serde(default)]
    pub note: String,
    pub src_perm: Option<Vec<usize>>,
    pub tgt_perm: Option<Vec<usize>>,
    /// Expected verdict per checker.
    pub expect: BTreeMap<String, Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpEntry {
    pub file: String,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub file: String,
    pub checker: String,
    pub expected: String,
    pub got: String,
    pub ok: bool,
}

/// `--dir`, then the environment variable, then the corpus shipped with
/// the sources.
pub fn corpus_dir(arg: Option<&Path>) -> PathBuf {
    if let Some(p) = arg {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(CORPUS_ENV) {
        return PathBuf::from(p);
    }
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join("manifest.toml");
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Runs every manifest entry and compares verdicts.
pub fn run_corpus(dir: &Path, seed: u64, scratch: &Path) -> Result<Vec<Outcome>> {
    let manifest = load_manifest(dir)?;
    let mut out = Vec::new();
    for e in &manifest.map {
        let cfg = RunConfig {
            map: Some(dir.join(&e.file)),
            checkers: e.expect.keys().cloned().collect(),
            src_perm: e.src_perm.clone(),
            tgt_perm: e.tgt_perm.clone(),
            seed,
            ..RunConfig::default()
        };
        let report = run_check(&cfg)?;
        for c in &report.certificates {
            let want = e.expect[&c.checker];
            out.push(Outcome {
                file: e.file.clone(),
                checker: c.checker.clone(),
                expected: want.to_string(),
                got: c.verdict.to_string(),
                ok: want == c.verdict,
            });
        }
    }
    for e in &manifest.fp {
        let s = run_fp(&dir.join(&e.file), scratch, 1000, seed)?;
        out.push(Outcome {
            file: e.file.clone(),
            checker: "fp".into(),
            expected: format!("max_error <= {:e}", e.max_error),
            got: format!("max_error = {:e}", s.max_error),
            ok: s.max_error <= e.max_error,
        });
    }
    Ok(out)
}
