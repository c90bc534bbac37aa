use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tamecert::certify::{Budgets, CheckOptions, SampleStrategy, Tolerances};
use tamecert::mapdsl::Domain;

/// Checker names in report order.
pub const CHECKERS: [&str; 9] = [
    "thm1", "thm12", "ce", "cce", "s", "thm3", "thm4", "winding", "probe",
];

/// Run configuration, from a TOML file and/or command-line flags. Unknown
/// keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub map: Option<PathBuf>,
    /// Replaces the domain declared in the map file.
    pub domain: Option<Domain>,
    pub strategy: StrategyConfig,
    pub tol: Tolerances,
    pub budgets: Budgets,
    /// Empty means every checker.
    pub checkers: Vec<String>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// 1-based source coordinate order for the minor conditions.
    pub src_perm: Option<Vec<usize>>,
    /// 1-based target coordinate order for the minor conditions.
    pub tgt_perm: Option<Vec<usize>>,
    pub winding_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    pub grid: usize,
    pub random: usize,
    pub boundary_refine: usize,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        let s = SampleStrategy::default();
        StrategyConfig {
            grid: s.grid,
            random: s.random,
            boundary_refine: s.boundary_refine,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        // relative paths inside the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.map, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.checkers {
            if !CHECKERS.contains(&c.as_str()) {
                bail!("unknown checker `{c}` (known: {})", CHECKERS.join(", "));
            }
        }
        for (k, v) in self.tol.as_map() {
            if !(v.is_finite() && v > 0.0) {
                bail!("tolerance {k} must be positive and finite, got {v}");
            }
        }
        Ok(())
    }

    /// Selected checkers in canonical order.
    pub fn selected(&self) -> Vec<&'static str> {
        CHECKERS
            .iter()
            .copied()
            .filter(|c| self.checkers.is_empty() || self.checkers.iter().any(|s| s == c))
            .collect()
    }

    pub fn strategy(&self, diameter: f64) -> SampleStrategy {
        SampleStrategy {
            grid: self.strategy.grid,
            random: self.strategy.random,
            boundary_refine: self.strategy.boundary_refine,
            seed: self.seed,
            eps_bdry: Some(self.tol.bdry * diameter),
            ..SampleStrategy::default()
        }
    }

    pub fn options(&self, n: usize) -> Result<CheckOptions> {
        let perm = |p: &Option<Vec<usize>>, what: &str| -> Result<Option<Vec<usize>>> {
            let Some(p) = p else { return Ok(None) };
            let mut seen = vec![false; n];
            let mut out = Vec::with_capacity(p.len());
            for &i in p {
                if i == 0 || i > n || seen[i - 1] {
                    bail!("{what} {p:?} is not a permutation of 1..={n}");
                }
                seen[i - 1] = true;
                out.push(i - 1);
            }
            if out.len() != n {
                bail!("{what} {p:?} is not a permutation of 1..={n}");
            }
            Ok(Some(out))
        };
        Ok(CheckOptions {
            tol: self.tol.clone(),
            budgets: self.budgets.clone(),
            seed: self.seed,
            src_perm: perm(&self.src_perm, "src_perm")?,
            tgt_perm: perm(&self.tgt_perm, "tgt_perm")?,
            winding_radius: self.winding_radius,
            ..CheckOptions::default()
        })
    }
}

/// `1,2,3` or `2 1` into a list of indices.
pub fn parse_perm(s: &str) -> Result<Vec<usize>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .with_context(|| format!("bad index `{t}` in permutation"))
        })
        .collect()
}

/// `name=value` tolerance override.
pub fn parse_tol(s: &str) -> Result<(String, f64)> {
    let (k, v) = s
        .split_once('=')
        .with_context(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v
        .trim()
        .parse()
        .with_context(|| format!("bad tolerance value in `{s}`"))?;
    Ok((k.trim().to_string(), v))
}
