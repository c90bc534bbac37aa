use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::minors::{monotone, ray_slope, rays};
use super::probe::collision_search;
use super::sampling::{zero_set_points, JacobianSampleSet};
use super::segments::thin;
use super::{Certificate, CheckOptions, TheoremTag, Verdict, Witness};
use crate::convexgeo::{min_norm_point, PointCloud};
use crate::mapdsl::PiecewiseMap;
use crate::matgeo::spectral_norm;

/// Unit directions covering `S^(m-1)`: `{+-1}` for `m = 1`, `circle`
/// uniform angles for `m = 2`, a Fibonacci lattice of `sphere` points for
/// `m = 3`, and seeded Gaussian directions above.
pub fn sphere_grid(m: usize, circle: usize, sphere: usize, seed: u64) -> Vec<Vec<f64>> {
    match m {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..circle)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / circle as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..sphere)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / sphere as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..sphere)
                .map(|_| {
                    let v: Vec<f64> = (0..m)
                        .map(|_| rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.into_iter().map(|x| x / n).collect()
                })
                .collect()
        }
    }
}

pub(crate) fn grid_for(m: usize, opts: &CheckOptions) -> Vec<Vec<f64>> {
    sphere_grid(
        m,
        opts.budgets.circle_points,
        opts.budgets.sphere_points,
        opts.stream(1),
    )
}

/// `dist(0, conv{A v})` over the samples.
pub(crate) fn hull_distance(
    samples: &JacobianSampleSet,
    v: &[f64],
) -> (f64, PointCloud, Vec<(usize, f64)>) {
    let pts: Vec<Vec<f64>> = samples
        .matrices()
        .map(|a| {
            (a * nalgebra::DVector::from_column_slice(v))
                .iter()
                .copied()
                .collect()
        })
        .collect();
    let cloud = PointCloud::new(samples.n, pts);
    let r = min_norm_point(&cloud);
    let active = r
        .active()
        .into_iter()
        .map(|(i, w)| (cloud.source(i), w))
        .collect();
    (r.distance, cloud, active)
}

fn normalize(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Local minimization of `h(v)` around a grid minimizer: golden section in
/// the angle for `m = 2`, shrinking coordinate search in the tangent space
/// otherwise.
pub(crate) fn refine<F: Fn(&[f64]) -> f64>(
    h: F,
    v0: &[f64],
    h0: f64,
    step: f64,
) -> (Vec<f64>, f64) {
    let m = v0.len();
    let mut best = (v0.to_vec(), h0);
    if m == 2 {
        let t0 = v0[1].atan2(v0[0]);
        let at = |t: f64| h(&[t.cos(), t.sin()]);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (t0 - step, t0 + step);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (at(c), at(d));
        for _ in 0..60 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = at(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = at(d);
            }
        }
        for (t, ft) in [(c, fc), (d, fd)] {
            if ft < best.1 {
                best = (vec![t.cos(), t.sin()], ft);
            }
        }
        return best;
    }
    if m < 2 {
        return best;
    }
    let mut s = step;
    while s > 1e-9 {
        let mut improved = false;
        for k in 0..m {
            for sign in [1.0, -1.0] {
                let mut w = best.0.clone();
                w[k] += sign * s;
                let w = normalize(w);
                let hw = h(&w);
                if hw < best.1 {
                    best = (w, hw);
                    improved = true;
                }
            }
        }
        if !improved {
            s *= 0.5;
        }
    }
    best
}

/// `delta = min_v dist(0, conv{A v : A sampled})`, which equals the smallest
/// `nu` over the hull of the sampled Jacobians.
pub(crate) fn delta_hat(
    samples: &JacobianSampleSet,
    opts: &CheckOptions,
) -> (f64, Vec<f64>, Vec<(usize, f64)>) {
    let grid = grid_for(samples.m, opts);
    let dists = opts.exec.map(&grid, |v| hull_distance(samples, v).0);
    let (imin, dmin) = dists
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty grid");
    let step = if samples.m == 2 {
        std::f64::consts::TAU / grid.len() as f64
    } else {
        (4.0 / grid.len() as f64).sqrt()
    };
    let (v, d) = refine(|v| hull_distance(samples, v).0, &grid[imin], dmin, step);
    let (_, _, active) = hull_distance(samples, &v);
    (d, v, active)
}

/// Both hull criteria assume a locally Lipschitz map. Looks for `|df|`
/// growing like a negative power along rays into the points where the
/// map is not differentiable; such growth makes the hull test inconclusive.
pub(crate) fn lipschitz_condition(
    f: &PiecewiseMap,
    samples: &JacobianSampleSet,
    opts: &CheckOptions,
    cert: &mut Certificate,
) {
    let mut anchors = samples.nondifferentiable.clone();
    anchors.extend(f.excluded.iter().filter(|p| f.domain.contains(p)).cloned());
    let anchors = thin(anchors, opts.budgets.anchors);
    if anchors.is_empty() {
        cert.condition(
            "lipschitz",
            Verdict::Pass,
            "no nondifferentiable points met",
        );
        return;
    }
    let rays = rays(&anchors, f.m, opts.stream(6));
    let hit = opts.exec.find_map_first(&rays, |(z, u)| {
        let (slope, vals) = ray_slope(f, z, u, spectral_norm)?;
        (slope <= -0.1 && monotone(&vals, false)).then(|| (z.clone(), u.clone(), slope))
    });
    match hit {
        Some((z, u, slope)) => {
            cert.witness(Witness::point("unbounded df near", &z));
            cert.witness(Witness::direction("unbounded df along", &u));
            cert.witness(Witness::scalar("|df| slope", slope));
            cert.condition(
                "lipschitz",
                Verdict::Inconclusive,
                format!("|df| ~ t^{slope:.3} near a nondifferentiable point; the map is not locally Lipschitz"),
            );
        }
        None => cert.condition(
            "lipschitz",
            Verdict::PassHeuristic,
            format!(
                "{} rays into {} nondifferentiable points, |df| stays bounded",
                rays.len(),
                anchors.len()
            ),
        ),
    }
}

/// Distance of the sampled hull from the singular matrices, as a lower
/// bound for the injectivity modulus.
pub fn check_thm1(
    f: &PiecewiseMap,
    samples: &JacobianSampleSet,
    opts: &CheckOptions,
) -> Certificate {
    let mut cert = Certificate::new(TheoremTag::Thm1, "thm1");
    let eps_sing = opts.tol.sing * samples.sigma_max;
    cert.tol("eps_sing", eps_sing);
    if samples.m > samples.n {
        cert.condition(
            "m<=n",
            Verdict::Inconclusive,
            format!(
                "source dimension {} exceeds target {}",
                samples.m, samples.n
            ),
        );
        return cert.finish();
    }
    let (delta, v, active) = delta_hat(samples, opts);
    cert.witness(Witness::scalar("delta", delta));
    cert.witness(Witness::direction("v_min", &v));
    for (i, w) in active.iter().take(4) {
        let s = &samples.samples[*i];
        cert.witness(Witness::matrix(
            format!("active[{i}] weight {w:.6}"),
            &s.matrix,
        ));
        cert.witness(Witness::point(format!("active[{i}] point"), &s.point));
    }
    let verdict = if delta > eps_sing {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    cert.condition(
        "dist(co,Sigma)",
        verdict,
        format!(
            "delta = {delta:.6e} over {} samples, eps_sing = {eps_sing:.3e}",
            samples.len()
        ),
    );
    lipschitz_condition(f, samples, opts, &mut cert);
    cert.finish()
}

/// Generic variant: the hull condition off the declared locus plus a
/// pairwise injectivity test on points of the locus.
pub fn check_thm12(
    f: &PiecewiseMap,
    samples: &JacobianSampleSet,
    opts: &CheckOptions,
) -> Certificate {
    let mut cert = Certificate::new(TheoremTag::Thm12, "thm12");
    let eps_sing = opts.tol.sing * samples.sigma_max;
    let eps_const = opts.tol.r#const * samples.map_scale;
    cert.tol("eps_sing", eps_sing);
    cert.tol("eps_const", eps_const);

    // samples already avoid the locus by eps_bdry
    let (delta, v, _) = delta_hat(samples, opts);
    cert.witness(Witness::scalar("delta_off_B", delta));
    let cr = if delta > eps_sing {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    if cr == Verdict::Fail {
        cert.witness(Witness::direction("v_min", &v));
    }
    cert.condition(
        "C_r",
        cr,
        format!("delta off B = {delta:.6e}, eps_sing = {eps_sing:.3e}"),
    );
    lipschitz_condition(f, samples, opts, &mut cert);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.stream(2));
    let mut b_points: Vec<Vec<f64>> = f
        .excluded
        .iter()
        .filter(|p| f.domain.contains(p))
        .cloned()
        .collect();
    for g in &f.locus {
        b_points.extend(zero_set_points(f, g, opts.budgets.locus_points, &mut rng));
    }
    if f.locus.is_empty() && f.excluded.is_empty() {
        cert.condition("I", Verdict::Pass, "B is empty");
    } else {
        let vals: Vec<Option<Vec<f64>>> = opts.exec.map(&b_points, |p| f.eval(p).ok());
        let mut hit = None;
        let mut pairs = 0usize;
        'outer: for i in 0..b_points.len() {
            for j in i + 1..b_points.len() {
                if pairs >= opts.budgets.pairs {
                    break 'outer;
                }
                pairs += 1;
                let (Some(a), Some(b)) = (&vals[i], &vals[j]) else {
                    continue;
                };
                let dx = crate::mapdsl::dist(&b_points[i], &b_points[j]);
                if dx > 100.0 * eps_const && crate::mapdsl::dist(a, b) <= eps_const {
                    hit = Some((i, j));
                    break 'outer;
                }
            }
        }
        match hit {
            Some((i, j)) => {
                cert.witness(Witness::pair("collision_on_B", &b_points[i], &b_points[j]));
                cert.condition("I", Verdict::Fail, "two points of B share an image");
            }
            None => cert.condition(
                "I",
                Verdict::PassHeuristic,
                format!(
                    "{} points on B, {pairs} pairs, no collision",
                    b_points.len()
                ),
            ),
        }
    }

    if cert.conditions.iter().any(|c| c.verdict == Verdict::Fail) {
        if let Some((x, y)) = collision_search(f, eps_const, opts) {
            cert.witness(Witness::pair("non_injective", &x, &y));
        }
    }
    cert.finish()
}
