use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{Certificate, CheckOptions, TheoremTag, Verdict, Witness};
use crate::mapdsl::{Domain, JacobianAt, PiecewiseMap};

/// Accumulated angle must be within this many turns of an integer.
const SNAP_TOL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingResult {
    /// Degree of `f / |f|` on the circle.
    pub degree: i64,
    /// Winding of the rotation factor of `df` on the circle.
    pub df_winding: i64,
    /// `df` mapped into `GL-`, so it was composed with `diag(1, -1)` first.
    pub flipped: bool,
    pub degree_turns: f64,
    pub df_turns: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WindingError {
    #[error("winding needs a planar map R2->R2, got R{0}->R{1}")]
    NotPlanar(usize, usize),
    #[error("circle of radius {0} leaves the domain")]
    OffDomain(f64),
    #[error("f vanishes or is undefined on the circle at {0:?}")]
    ZeroValue(Vec<f64>),
    #[error("df is singular, undefined or changes orientation on the circle at {0:?}")]
    Singular(Vec<f64>),
    #[error("accumulated angle {0} turns is not an integer")]
    NonInteger(f64),
}

fn unwrap_turns(angles: &[f64]) -> f64 {
    let mut total = 0.0;
    for k in 0..angles.len() {
        let mut d = angles[(k + 1) % angles.len()] - angles[k];
        while d > std::f64::consts::PI {
            d -= TAU;
        }
        while d < -std::f64::consts::PI {
            d += TAU;
        }
        total += d;
    }
    total / TAU
}

fn snap(turns: f64) -> Result<i64, WindingError> {
    let r = turns.round();
    if (turns - r).abs() > SNAP_TOL {
        return Err(WindingError::NonInteger(turns));
    }
    Ok(r as i64)
}

/// Degree of `f/|f|` and winding of the polar rotation of `df` along the
/// circle of the given radius about the origin.
pub fn winding_number(
    f: &PiecewiseMap,
    radius: f64,
    samples: usize,
) -> Result<WindingResult, WindingError> {
    if f.m != 2 || f.n != 2 {
        return Err(WindingError::NotPlanar(f.m, f.n));
    }
    let samples = samples.max(8);
    let mut val_angles = Vec::with_capacity(samples);
    let mut mats = Vec::with_capacity(samples);
    for k in 0..samples {
        let t = TAU * k as f64 / samples as f64;
        let p = vec![radius * t.cos(), radius * t.sin()];
        if !f.domain.contains(&p) {
            return Err(WindingError::OffDomain(radius));
        }
        let v = f.eval(&p).map_err(|_| WindingError::ZeroValue(p.clone()))?;
        if v[0] == 0.0 && v[1] == 0.0 {
            return Err(WindingError::ZeroValue(p));
        }
        val_angles.push(v[1].atan2(v[0]));
        let a = match f.jacobian(&p) {
            Ok(JacobianAt::Matrix(a)) => a,
            _ => f
                .jacobian_fd(&p, 1e-7 * radius)
                .map_err(|_| WindingError::Singular(p.clone()))?,
        };
        mats.push((p, a));
    }
    let dets: Vec<f64> = mats
        .iter()
        .map(|(_, a)| a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)])
        .collect();
    let flipped = dets[0] < 0.0;
    let mut rot = Vec::with_capacity(samples);
    for ((p, a), d) in mats.iter().zip(&dets) {
        if *d == 0.0 || (*d < 0.0) != flipped {
            return Err(WindingError::Singular(p.clone()));
        }
        let (a11, mut a12, a21, mut a22) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
        if flipped {
            a12 = -a12;
            a22 = -a22;
        }
        // rotation factor of the polar decomposition of [[a, b], [c, d]]
        rot.push((a21 - a12).atan2(a11 + a22));
    }
    let degree_turns = unwrap_turns(&val_angles);
    let df_turns = unwrap_turns(&rot);
    Ok(WindingResult {
        degree: snap(degree_turns)?,
        df_winding: snap(df_turns)?,
        flipped,
        degree_turns,
        df_turns,
    })
}

/// Half the distance from the origin to the boundary, or the middle of an
/// annulus around it.
fn default_radius(d: &Domain) -> Option<f64> {
    match d {
        Domain::Box { lo, hi } => {
            let r = lo
                .iter()
                .zip(hi)
                .map(|(a, b)| (-a).min(*b))
                .fold(f64::INFINITY, f64::min);
            (r > 0.0).then_some(0.5 * r)
        }
        Domain::Ball {
            center,
            radius,
            inner,
        } => {
            let c = center.iter().map(|x| x * x).sum::<f64>().sqrt();
            if *inner > 0.0 && c == 0.0 {
                return Some(0.5 * (inner + radius));
            }
            let r = radius - c;
            (r > 0.0 && *inner == 0.0).then_some(0.5 * r)
        }
    }
}

/// Homotopy test of `df` on a circle about the origin: winding zero
/// certifies the null-homotopic case; a degree other than `+-1` refutes
/// injectivity near the origin.
pub fn check_winding(f: &PiecewiseMap, opts: &CheckOptions) -> Certificate {
    let mut cert = Certificate::new(TheoremTag::Winding, "winding");
    let Some(radius) = opts.winding_radius.or_else(|| default_radius(&f.domain)) else {
        cert.condition(
            "circle",
            Verdict::Inconclusive,
            "the origin is not inside the domain",
        );
        return cert.finish();
    };
    cert.tol("radius", radius);
    cert.tol("snap", SNAP_TOL);
    match winding_number(f, radius, opts.budgets.winding_samples) {
        Err(e) => cert.condition("winding", Verdict::Inconclusive, e.to_string()),
        Ok(w) => {
            cert.witness(Witness::scalar("degree", w.degree as f64));
            cert.witness(Witness::scalar("df_winding", w.df_winding as f64));
            let flip = if w.flipped {
                ", df composed with diag(1,-1)"
            } else {
                ""
            };
            let detail = format!(
                "degree {}, winding of p(df) {}{flip}",
                w.degree, w.df_winding
            );
            let v = if w.df_winding == 0 {
                Verdict::Pass
            } else if w.degree.abs() != 1 {
                Verdict::Fail
            } else {
                Verdict::Inconclusive
            };
            cert.condition("winding", v, detail);
        }
    }
    cert.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapdsl::parse_map;

    #[test]
    fn identity_and_reflection() {
        let f =
            parse_map("map R2->R2 { domain box [-2, 2] x [-2, 2]; piece true: (x, y) }").unwrap();
        let w = winding_number(&f, 1.0, 720).unwrap();
        assert_eq!((w.degree, w.df_winding, w.flipped), (1, 0, false));
        let g =
            parse_map("map R2->R2 { domain box [-2, 2] x [-2, 2]; piece true: (x, -y) }").unwrap();
        let w = winding_number(&g, 1.0, 720).unwrap();
        assert_eq!((w.degree, w.df_winding, w.flipped), (-1, 0, true));
    }

    #[test]
    fn fold_is_rejected() {
        let f =
            parse_map("map R2->R2 { domain box [-2, 2] x [-2, 2]; piece true: (x^2 + 0.5, y) }")
                .unwrap();
        assert!(matches!(
            winding_number(&f, 1.0, 720),
            Err(WindingError::Singular(_))
        ));
    }

    #[test]
    fn default_radius_of_the_square() {
        let f = parse_map("map R2->R2 { piece true: (x, y) }").unwrap();
        let c = check_winding(&f, &CheckOptions::default());
        assert_eq!(c.tolerances["radius"], 0.5);
        assert_eq!(c.verdict, Verdict::Pass);
    }
}
