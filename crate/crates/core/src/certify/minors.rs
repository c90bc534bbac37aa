use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sampling::JacobianSampleSet;
use super::segments::{axis, chord, random_unit, segment_spread, thin};
use super::{Certificate, CheckOptions, TheoremTag, Verdict, Witness};
use crate::mapdsl::{JacobianAt, PiecewiseMap};
use crate::matgeo::{is_permutation, minor_profile};

/// Log-log slope threshold separating "tends to 0 / infinity" from "stays bounded".
const SLOPE_TOL: f64 = 0.1;

fn leading_minor(a: &DMatrix<f64>, src: &[usize], tgt: &[usize], j: usize) -> f64 {
    minor_profile(a, src, tgt).minors[j - 1]
}

/// Power-law exponent `alpha` of `g(df(z + t u)) ~ t^alpha` fitted over
/// `t = diam * 10^-k`, `k = 2..6` in half-decade steps. `None` if any
/// point leaves the domain, has no Jacobian or gives a zero or non-finite
/// value. Also returns the values.
pub(crate) fn ray_slope<G: Fn(&DMatrix<f64>) -> f64>(
    f: &PiecewiseMap,
    z: &[f64],
    u: &[f64],
    g: G,
) -> Option<(f64, Vec<f64>)> {
    let diam = f.domain.diameter();
    let mut logs = Vec::new();
    let mut vals = Vec::new();
    for h in 0..=8 {
        let t = diam * 10f64.powf(-2.0 - 0.5 * h as f64);
        let p: Vec<f64> = z.iter().zip(u).map(|(a, b)| a + t * b).collect();
        if !f.domain.contains(&p) {
            return None;
        }
        let a = match f.jacobian(&p) {
            Ok(JacobianAt::Matrix(a)) => a,
            _ => return None,
        };
        let d = g(&a);
        if !(d.is_finite() && d != 0.0) {
            return None;
        }
        logs.push((t.ln(), d.abs().ln()));
        vals.push(d);
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some((sxy / sxx, vals))
}

/// Power-law exponent of the leading minor `d_j` along the ray `z + t u`
/// (see [`ray_slope`]).
pub fn approach_slope(
    f: &PiecewiseMap,
    z: &[f64],
    u: &[f64],
    src: &[usize],
    tgt: &[usize],
    j: usize,
) -> Option<(f64, Vec<f64>)> {
    ray_slope(f, z, u, |a| leading_minor(a, src, tgt, j))
}

/// Rays into `anchors`: both axis directions and four random ones each.
pub(crate) fn rays(anchors: &[Vec<f64>], m: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for z in anchors {
        for k in 0..m {
            let e = axis(m, k);
            out.push((z.clone(), e.iter().map(|v| -v).collect::<Vec<_>>()));
            out.push((z.clone(), e));
        }
        for _ in 0..4 {
            out.push((z.clone(), random_unit(m, &mut rng)));
        }
    }
    out
}

pub(crate) fn monotone(vals: &[f64], decreasing: bool) -> bool {
    vals.windows(2).all(|w| {
        if decreasing {
            w[1].abs() <= w[0].abs()
        } else {
            w[1].abs() >= w[0].abs()
        }
    })
}

struct Approach {
    z: Vec<f64>,
    u: Vec<f64>,
    slope: f64,
}

/// Searches rays into the degenerate points for `d_j -> 0` (`lower`) or
/// `|d_j| -> infinity` (`!lower`).
fn approach_search(
    f: &PiecewiseMap,
    anchors: &[Vec<f64>],
    src: &[usize],
    tgt: &[usize],
    j: usize,
    lower: bool,
    opts: &CheckOptions,
) -> Option<Approach> {
    let rays = rays(anchors, f.m, opts.stream(5 + j as u64));
    opts.exec.find_map_first(&rays, |(z, u)| {
        let (slope, vals) = approach_slope(f, z, u, src, tgt, j)?;
        let hit = if lower {
            slope >= SLOPE_TOL
        } else {
            slope <= -SLOPE_TOL
        };
        (hit && monotone(&vals, lower)).then(|| Approach {
            z: z.clone(),
            u: u.clone(),
            slope,
        })
    })
}

fn anchors(samples: &JacobianSampleSet, eps_sing: f64, opts: &CheckOptions) -> Vec<Vec<f64>> {
    thin(samples.degenerate_points(eps_sing), opts.budgets.anchors)
}

fn checked_perms(
    f: &PiecewiseMap,
    opts: &CheckOptions,
    cert: &mut Certificate,
) -> Option<(Vec<usize>, Vec<usize>)> {
    if f.m != f.n {
        cert.condition(
            "n=m",
            Verdict::Inconclusive,
            format!("needs a square map, got {}->{}", f.m, f.n),
        );
        return None;
    }
    let (src, tgt) = opts.perms(f.n);
    if !is_permutation(&src, f.n) || !is_permutation(&tgt, f.n) {
        cert.condition(
            "perms",
            Verdict::Inconclusive,
            "coordinate orders are not permutations",
        );
        return None;
    }
    Some((src, tgt))
}

fn minima(samples: &JacobianSampleSet, src: &[usize], tgt: &[usize]) -> Vec<Vec<f64>> {
    samples
        .samples
        .iter()
        .map(|s| minor_profile(&s.matrix, src, tgt).minors)
        .collect()
}

/// Two-sided bounds on the leading minors: `K_j <= d_j <= L_j` for `j < n`
/// and `K_n <= d_n`.
pub fn check_thm3(
    f: &PiecewiseMap,
    samples: &JacobianSampleSet,
    opts: &CheckOptions,
) -> Certificate {
    let mut cert = Certificate::new(TheoremTag::Thm3, "thm3");
    let Some((src, tgt)) = checked_perms(f, opts, &mut cert) else {
        return cert.finish();
    };
    let n = f.n;
    let profiles = minima(samples, &src, &tgt);
    let eps_sing = opts.tol.sing * samples.sigma_max;
    let anchors = anchors(samples, eps_sing, opts);
    cert.tol("eps_sing", eps_sing);
    cert.tol("slope", SLOPE_TOL);

    for j in 1..=n {
        let col: Vec<f64> = profiles.iter().map(|p| p[j - 1]).collect();
        let (imin, kmin) = col
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let (imax, lmax) = col
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let eps_j = opts.tol.sing * samples.sigma_max.powi(j as i32);
        cert.witness(Witness::scalar(format!("K{j}"), kmin));
        if j < n {
            cert.witness(Witness::scalar(format!("L{j}"), lmax));
        }
        let name = format!("R{j}-lower");
        if kmin <= eps_j {
            cert.witness(Witness::point(
                format!("R{j}-lower argmin"),
                &samples.samples[imin].point,
            ));
            cert.condition(
                &name,
                Verdict::Fail,
                format!("min d{j} = {kmin:.6e} <= {eps_j:.3e}"),
            );
        } else if let Some(a) = approach_search(f, &anchors, &src, &tgt, j, true, opts) {
            cert.witness(Witness::point(format!("R{j}-lower approach point"), &a.z));
            cert.witness(Witness::direction(
                format!("R{j}-lower approach direction"),
                &a.u,
            ));
            cert.witness(Witness::scalar(format!("R{j}-lower slope"), a.slope));
            cert.condition(
                &name,
                Verdict::Fail,
                format!(
                    "d{j} ~ t^{:.3} -> 0 approaching a degenerate point",
                    a.slope
                ),
            );
        } else {
            cert.condition(
                &name,
                Verdict::Pass,
                format!("min d{j} = {kmin:.6e} over {} samples", samples.len()),
            );
        }
        if j < n {
            let name = format!("R{j}-upper");
            if let Some(a) = approach_search(f, &anchors, &src, &tgt, j, false, opts) {
                cert.witness(Witness::point(format!("R{j}-upper approach point"), &a.z));
                cert.witness(Witness::direction(
                    format!("R{j}-upper approach direction"),
                    &a.u,
                ));
                cert.witness(Witness::scalar(format!("R{j}-upper slope"), a.slope));
                cert.condition(
                    &name,
                    Verdict::Fail,
                    format!("|d{j}| ~ t^{:.3} -> infinity", a.slope),
                );
            } else {
                let _ = imax;
                cert.condition(&name, Verdict::Pass, format!("max d{j} = {lmax:.6e}"));
            }
        }
    }
    cert.finish()
}

/// Nonnegative leading minors and finiteness of the partial maps
/// `x -> (f_1..f_j, x_{j+1}..x_n)` (refuted by constant chords).
pub fn check_thm4(
    f: &PiecewiseMap,
    samples: &JacobianSampleSet,
    opts: &CheckOptions,
) -> Certificate {
    let mut cert = Certificate::new(TheoremTag::Thm4, "thm4");
    let Some((src, tgt)) = checked_perms(f, opts, &mut cert) else {
        return cert.finish();
    };
    let n = f.n;
    let profiles = minima(samples, &src, &tgt);
    let eps_sing = opts.tol.sing * samples.sigma_max;
    let eps_const = opts.tol.r#const * samples.map_scale;
    cert.tol("eps_sing", eps_sing);
    cert.tol("eps_const", eps_const);
    let diam = f.domain.diameter();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.stream(20));

    for j in 1..=n {
        let col: Vec<f64> = profiles.iter().map(|p| p[j - 1]).collect();
        let (imin, kmin) = col
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let eps_j = opts.tol.sing * samples.sigma_max.powi(j as i32);
        let name = format!("P{j}");
        if kmin < -eps_j {
            cert.witness(Witness::point(
                format!("P{j} negative at"),
                &samples.samples[imin].point,
            ));
            cert.witness(Witness::scalar(format!("P{j} min"), kmin));
            cert.condition(&name, Verdict::Fail, format!("min d{j} = {kmin:.6e}"));
        } else {
            cert.condition(
                &name,
                Verdict::Pass,
                format!("min d{j} = {kmin:.6e} >= -{eps_j:.3e}"),
            );
        }
    }

    for j in 1..=n {
        // anchors: degenerate points and samples where d_j nearly vanishes
        let eps_j = opts.tol.sing * samples.sigma_max.powi(j as i32);
        let mut pts = samples.degenerate_points(eps_sing);
        pts.extend(
            samples
                .samples
                .iter()
                .zip(&profiles)
                .filter(|(_, p)| p[j - 1].abs() <= eps_j)
                .map(|(s, _)| s.point.clone()),
        );
        let mut pts = thin(pts, opts.budgets.anchors);
        pts.extend((0..opts.budgets.anchors / 2).map(|_| f.domain.sample(&mut rng)));
        let mut segs = Vec::new();
        for p in &pts {
            let mut dirs: Vec<Vec<f64>> = (0..j).map(|k| axis(n, src[k])).collect();
            if j > 1 {
                for _ in 0..2 {
                    let c = random_unit(j, &mut rng);
                    let mut d = vec![0.0; n];
                    for k in 0..j {
                        d[src[k]] = c[k];
                    }
                    dirs.push(d);
                }
            }
            for d in dirs {
                segs.extend(chord(f, p, &d, 0.25 * diam));
            }
        }
        let phi = |p: &[f64]| -> Option<Vec<f64>> {
            let y = f.eval(p).ok()?;
            let mut out: Vec<f64> = tgt[..j].iter().map(|&i| y[i]).collect();
            out.extend(src[j..].iter().map(|&i| p[i]));
            Some(out)
        };
        let hit = opts.exec.find_map_first(&segs, |(a, b)| {
            segment_spread(phi, a, b)
                .filter(|s| *s <= eps_const)
                .map(|_| (a.clone(), b.clone()))
        });
        let name = format!("F{j}");
        match hit {
            Some((a, b)) => {
                cert.witness(Witness::segment(
                    format!("F{j} constant fiber segment"),
                    &a,
                    &b,
                ));
                cert.condition(
                    &name,
                    Verdict::Fail,
                    format!("phi_{j} is constant on a segment"),
                );
            }
            None => cert.condition(
                &name,
                Verdict::PassHeuristic,
                format!("{} chords, no constant fiber", segs.len()),
            ),
        }
    }
    cert.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{sample_jacobians, SampleStrategy};
    use crate::mapdsl::parse_map;

    fn run(src: &str, opts: &CheckOptions) -> (Certificate, Certificate) {
        let f = parse_map(src).unwrap();
        let s = sample_jacobians(&f, &SampleStrategy::default()).unwrap();
        (check_thm3(&f, &s, opts), check_thm4(&f, &s, opts))
    }

    #[test]
    fn cubic() {
        let (t3, t4) = run(
            "map R2->R2 { piece true: (x^3, y^3) }",
            &CheckOptions::default(),
        );
        assert_eq!(t3.condition_verdict("R1-lower"), Some(Verdict::Fail));
        assert_eq!(t4.verdict, Verdict::PassHeuristic, "{t4:#?}");
    }

    #[test]
    fn non_proper() {
        let (t3, t4) = run(
            "map R2->R2 { piece true: (x, x^2*y) }",
            &CheckOptions::default(),
        );
        assert_eq!(t3.condition_verdict("R1-lower"), Some(Verdict::Pass));
        assert_eq!(t3.condition_verdict("R1-upper"), Some(Verdict::Pass));
        assert_eq!(t3.condition_verdict("R2-lower"), Some(Verdict::Fail));
        assert_eq!(t4.condition_verdict("P1"), Some(Verdict::Pass));
        assert_eq!(t4.condition_verdict("P2"), Some(Verdict::Pass));
        assert_eq!(t4.condition_verdict("F1"), Some(Verdict::PassHeuristic));
        assert_eq!(t4.condition_verdict("F2"), Some(Verdict::Fail));
    }

    #[test]
    fn fractional_power_map() {
        let (t3, t4) = run(
            "map R2->R2 { locus y; piece true: (x*y^(2/3), y^(1/3)) }",
            &CheckOptions::default(),
        );
        assert_eq!(
            t3.condition_verdict("R1-lower"),
            Some(Verdict::Fail),
            "{t3:#?}"
        );
        assert_eq!(
            t3.condition_verdict("R2-lower"),
            Some(Verdict::Pass),
            "{t3:#?}"
        );
        assert_eq!(t4.condition_verdict("P1"), Some(Verdict::Pass));
        assert_eq!(t4.condition_verdict("P2"), Some(Verdict::Pass));
        assert_eq!(t4.condition_verdict("F2"), Some(Verdict::Fail));
    }

    #[test]
    fn slope_of_a_power() {
        let f = parse_map("map R2->R2 { piece true: (x^3, y) }").unwrap();
        let (s, _) = approach_slope(&f, &[0.0, 0.5], &[1.0, 0.0], &[0, 1], &[0, 1], 1).unwrap();
        assert!((s - 2.0).abs() < 1e-9, "{s}");
    }
}
