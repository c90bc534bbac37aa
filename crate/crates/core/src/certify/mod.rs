//! Sampled certificates for the injectivity criteria.
//!
//! Every checker works from a finite [`JacobianSampleSet`] (or from direct
//! evaluations of the map) and returns a [`Certificate`]. Pass verdicts are
//! sampled estimates, never proofs; conditions that can only be refuted by
//! sampling report `pass-heuristic` at best.

mod certificate;
mod extremal;
mod fp;
mod minors;
mod probe;
mod sampling;
mod segments;
mod thm1;
mod winding;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::par::Exec;

pub use certificate::{Certificate, Condition, TheoremTag, Verdict, Witness};
pub use extremal::{
    check_cce, check_ce, directional_hull, kernel_pair_witness, DirectionalHull, KernelWitness,
};
pub use fp::{build_fp, verify_inverse, FpError, FpSpec};
pub use minors::{approach_slope, check_thm3, check_thm4};
pub use probe::{collision_search, injectivity_probe, lipschitz_inverse_estimate};
pub use sampling::{
    sample_jacobians, JacobianSampleSet, MatrixSample, SampleOrigin, SampleStrategy,
};
pub use segments::{check_s, constant_segment};
pub use thm1::{check_thm1, check_thm12, sphere_grid};
pub use winding::{check_winding, winding_number, WindingError, WindingResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CertifyError {
    #[error("no differentiable sample points (all {0} candidates rejected)")]
    NoSamples(usize),
    #[error("invalid strategy: {0}")]
    Strategy(String),
    #[error(transparent)]
    Map(#[from] crate::mapdsl::MapError),
}

/// Relative tolerance factors. Absolute values are resolved against the
/// relevant scale (domain diameter, largest singular value, map magnitude,
/// cloud radius) and recorded in each certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Boundary exclusion, times the domain diameter.
    pub bdry: f64,
    /// "Singular" decisions, times the largest sampled singular value.
    pub sing: f64,
    /// Kernel threshold, times the largest sampled singular value.
    pub ker: f64,
    /// Constant-value decisions, times the map magnitude.
    pub r#const: f64,
    /// Extremality, times the cloud radius.
    pub ext: f64,
    /// Min-norm certificate, times the squared cloud radius.
    pub qp: f64,
    /// Divergence threshold for directional derivatives.
    pub div: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            bdry: crate::mapdsl::BOUNDARY_REL_TOL,
            sing: crate::matgeo::SINGULAR_REL_TOL,
            ker: 1e-7,
            r#const: 1e-9,
            ext: crate::convexgeo::EXT_REL_TOL,
            qp: crate::convexgeo::QP_REL_TOL,
            div: 1e-3,
        }
    }
}

impl Tolerances {
    pub const NAMES: [&'static str; 7] = ["bdry", "sing", "ker", "const", "ext", "qp", "div"];

    /// Sets a factor by name (`sing`, `ker`, ...; an `eps_` prefix is accepted).
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), String> {
        if !(value.is_finite() && value > 0.0) {
            return Err(format!(
                "tolerance {name} must be positive and finite, got {value}"
            ));
        }
        let slot = match name.strip_prefix("eps_").unwrap_or(name) {
            "bdry" => &mut self.bdry,
            "sing" => &mut self.sing,
            "ker" => &mut self.ker,
            "const" => &mut self.r#const,
            "ext" => &mut self.ext,
            "qp" => &mut self.qp,
            "div" => &mut self.div,
            other => {
                return Err(format!(
                    "unknown tolerance `{other}` (known: {})",
                    Self::NAMES.join(", ")
                ))
            }
        };
        *slot = value;
        Ok(())
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        [
            ("bdry", self.bdry),
            ("sing", self.sing),
            ("ker", self.ker),
            ("const", self.r#const),
            ("ext", self.ext),
            ("qp", self.qp),
            ("div", self.div),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Work limits for the sampled searches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Budgets {
    /// Unit directions for `m = 3`; `m = 2` uses `circle_points`.
    pub sphere_points: usize,
    pub circle_points: usize,
    /// Matrix pairs for the kernel criterion when the sample set is large.
    pub pairs: usize,
    /// All pairs are used up to this many samples.
    pub all_pairs_below: usize,
    /// Random segments for the non-constancy test.
    pub segments: usize,
    /// Degenerate points used as segment anchors.
    pub anchors: usize,
    /// Random pairs for the injectivity probe.
    pub probe_pairs: usize,
    /// Random starts for the collision search.
    pub collision_starts: usize,
    /// Points sampled on a declared locus for the injectivity-on-B test.
    pub locus_points: usize,
    pub winding_samples: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            sphere_points: 2000,
            circle_points: 720,
            pairs: 40_000,
            all_pairs_below: 200,
            segments: 200,
            anchors: 64,
            probe_pairs: 10_000,
            collision_starts: 32,
            locus_points: 200,
            winding_samples: 720,
        }
    }
}

/// Everything a checker needs besides the map and its samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckOptions {
    pub tol: Tolerances,
    pub budgets: Budgets,
    pub seed: u64,
    pub exec: Exec,
    /// Source coordinate order for the minor conditions (0-based).
    pub src_perm: Option<Vec<usize>>,
    /// Target coordinate order for the minor conditions (0-based).
    pub tgt_perm: Option<Vec<usize>>,
    /// Circle radius for the winding checker; defaults to half the
    /// distance from the origin to the domain boundary.
    pub winding_radius: Option<f64>,
}

impl CheckOptions {
    pub(crate) fn perms(&self, n: usize) -> (Vec<usize>, Vec<usize>) {
        let id: Vec<usize> = (0..n).collect();
        (
            self.src_perm.clone().unwrap_or_else(|| id.clone()),
            self.tgt_perm.clone().unwrap_or(id),
        )
    }

    /// Derived seed for an independent stream.
    pub(crate) fn stream(&self, salt: u64) -> u64 {
        self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)
    }
}
