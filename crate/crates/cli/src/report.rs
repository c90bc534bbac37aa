use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tamecert::certify::{Certificate, Verdict};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tool {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapInfo {
    pub path: String,
    /// SHA-256 of the canonical printed map.
    pub hash: String,
    pub m: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub count: usize,
    pub nondifferentiable: usize,
    pub sigma_max: f64,
    pub map_scale: f64,
    pub eps_bdry: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: Tool,
    pub map: MapInfo,
    pub config: RunConfig,
    pub samples: Option<SampleInfo>,
    pub certificates: Vec<Certificate>,
    pub verdict: Verdict,
    /// Wall-clock milliseconds per checker (and `sampling`); the only
    /// nondeterministic field.
    pub timings_ms: BTreeMap<String, f64>,
}

impl Report {
    pub fn new(map: MapInfo, config: RunConfig) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            tool: Tool {
                name: "tamecert".into(),
                version: env!("CARGO_PKG_VERSION").into(),
            },
            map,
            config,
            samples: None,
            certificates: Vec::new(),
            verdict: Verdict::Pass,
            timings_ms: BTreeMap::new(),
        }
    }

    /// Pass only if every certificate passes (heuristically or not).
    pub fn overall(&self) -> Verdict {
        if self.certificates.iter().all(|c| c.verdict.is_pass()) {
            Verdict::Pass
        } else if self.certificates.iter().any(|c| c.verdict == Verdict::Fail) {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
