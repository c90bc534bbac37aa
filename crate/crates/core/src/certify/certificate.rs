use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TheoremTag {
    Thm1,
    Thm12,
    Thm2,
    Thm21,
    Thm3,
    Thm4,
    Winding,
    Fp,
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    /// Nothing refuted the condition, but the test can only refute.
    PassHeuristic,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn is_pass(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::PassHeuristic)
    }

    /// Combines sub-verdicts: any fail wins, then inconclusive, then heuristic.
    pub fn combine<I: IntoIterator<Item = Verdict>>(vs: I) -> Verdict {
        let mut out = Verdict::Pass;
        for v in vs {
            out = match (out, v) {
                (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
                (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
                (Verdict::PassHeuristic, _) | (_, Verdict::PassHeuristic) => Verdict::PassHeuristic,
                _ => Verdict::Pass,
            };
        }
        out
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::PassHeuristic => "pass-heuristic",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// One named sub-condition of a certificate, e.g. `R1-lower` or `I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Point {
        label: String,
        x: Vec<f64>,
    },
    Pair {
        label: String,
        x: Vec<f64>,
        y: Vec<f64>,
    },
    Direction {
        label: String,
        v: Vec<f64>,
    },
    /// Row-major entries.
    Matrix {
        label: String,
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    },
    /// `None` encodes a non-finite value.
    Scalar {
        label: String,
        value: Option<f64>,
    },
    Segment {
        label: String,
        a: Vec<f64>,
        b: Vec<f64>,
    },
}

impl Witness {
    pub fn label(&self) -> &str {
        match self {
            Witness::Point { label, .. }
            | Witness::Pair { label, .. }
            | Witness::Direction { label, .. }
            | Witness::Matrix { label, .. }
            | Witness::Scalar { label, .. }
            | Witness::Segment { label, .. } => label,
        }
    }

    pub fn point(label: impl Into<String>, x: &[f64]) -> Self {
        Witness::Point {
            label: label.into(),
            x: x.to_vec(),
        }
    }
    pub fn pair(label: impl Into<String>, x: &[f64], y: &[f64]) -> Self {
        Witness::Pair {
            label: label.into(),
            x: x.to_vec(),
            y: y.to_vec(),
        }
    }
    pub fn direction(label: impl Into<String>, v: &[f64]) -> Self {
        Witness::Direction {
            label: label.into(),
            v: v.to_vec(),
        }
    }
    pub fn matrix(label: impl Into<String>, a: &DMatrix<f64>) -> Self {
        Witness::Matrix {
            label: label.into(),
            rows: a.nrows(),
            cols: a.ncols(),
            data: crate::convexgeo::flatten_row_major(a),
        }
    }
    pub fn scalar(label: impl Into<String>, value: f64) -> Self {
        Witness::Scalar {
            label: label.into(),
            value: value.is_finite().then_some(value),
        }
    }
    pub fn segment(label: impl Into<String>, a: &[f64], b: &[f64]) -> Self {
        Witness::Segment {
            label: label.into(),
            a: a.to_vec(),
            b: b.to_vec(),
        }
    }

    /// Matrix witnesses as `DMatrix`.
    pub fn as_matrix(&self) -> Option<DMatrix<f64>> {
        match self {
            Witness::Matrix {
                rows, cols, data, ..
            } => Some(DMatrix::from_row_slice(*rows, *cols, data)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub tag: TheoremTag,
    /// Name of the checker that produced it (`thm1`, `ce`, ...).
    pub checker: String,
    pub verdict: Verdict,
    pub conditions: Vec<Condition>,
    pub witnesses: Vec<Witness>,
    /// Absolute tolerances actually used.
    pub tolerances: BTreeMap<String, f64>,
    /// Set on every verdict reached from finitely many samples.
    pub sampled_only: bool,
    pub note: String,
}

impl Certificate {
    pub fn new(tag: TheoremTag, checker: &str) -> Self {
        Certificate {
            tag,
            checker: checker.to_string(),
            verdict: Verdict::Inconclusive,
            conditions: Vec::new(),
            witnesses: Vec::new(),
            tolerances: BTreeMap::new(),
            sampled_only: true,
            note: String::new(),
        }
    }

    pub fn condition(&mut self, name: &str, verdict: Verdict, detail: impl Into<String>) {
        self.conditions.push(Condition {
            name: name.to_string(),
            verdict,
            detail: detail.into(),
        });
    }

    pub fn witness(&mut self, w: Witness) {
        self.witnesses.push(w);
    }

    pub fn tol(&mut self, name: &str, value: f64) {
        self.tolerances.insert(name.to_string(), value);
    }

    pub fn condition_verdict(&self, name: &str) -> Option<Verdict> {
        self.conditions
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.verdict)
    }

    pub fn find_witness(&self, label: &str) -> Option<&Witness> {
        self.witnesses.iter().find(|w| w.label() == label)
    }

    pub fn scalar(&self, label: &str) -> Option<f64> {
        match self.find_witness(label)? {
            Witness::Scalar { value, .. } => *value,
            _ => None,
        }
    }

    /// Sets the overall verdict from the conditions. A fail without a
    /// witness is downgraded to inconclusive so that every fail carries
    /// evidence.
    pub fn finish(mut self) -> Self {
        self.verdict = Verdict::combine(self.conditions.iter().map(|c| c.verdict));
        if self.verdict == Verdict::Fail && self.witnesses.is_empty() {
            self.verdict = Verdict::Inconclusive;
        }
        self
    }

    /// Explicit overall verdict for certificates without sub-conditions.
    pub fn finish_with(mut self, verdict: Verdict) -> Self {
        self.verdict = verdict;
        if self.verdict == Verdict::Fail && self.witnesses.is_empty() {
            self.verdict = Verdict::Inconclusive;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_combination() {
        use Verdict::*;
        assert_eq!(Verdict::combine([Pass, PassHeuristic]), PassHeuristic);
        assert_eq!(
            Verdict::combine([Pass, Inconclusive, PassHeuristic]),
            Inconclusive
        );
        assert_eq!(Verdict::combine([Inconclusive, Fail]), Fail);
        assert_eq!(Verdict::combine([]), Pass);
    }

    #[test]
    fn fail_needs_a_witness() {
        let mut c = Certificate::new(TheoremTag::Thm2, "ce");
        c.condition("kernel-pairs", Verdict::Fail, "");
        assert_eq!(c.clone().finish().verdict, Verdict::Inconclusive);
        c.witness(Witness::direction("u", &[1.0, 0.0]));
        assert_eq!(c.finish().verdict, Verdict::Fail);
    }

    #[test]
    fn json_shape() {
        let mut c = Certificate::new(TheoremTag::Thm12, "thm12");
        c.witness(Witness::matrix(
            "A",
            &nalgebra::dmatrix![1.0, 2.0; 3.0, 4.0],
        ));
        c.witness(Witness::scalar("L", f64::INFINITY));
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"tag\":\"THM12\""), "{s}");
        assert!(s.contains("\"data\":[1.0,2.0,3.0,4.0]"), "{s}");
        assert!(s.contains("\"verdict\":\"inconclusive\""), "{s}");
        let back: Certificate = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
    }
}
