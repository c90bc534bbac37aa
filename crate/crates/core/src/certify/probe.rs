use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Certificate, CheckOptions, Exec, TheoremTag, Verdict, Witness};
use crate::mapdsl::{dist, JacobianAt, PiecewiseMap};

/// Smallest observed ratio `|f(x') - f(x)| / |x' - x|` over `pairs` random
/// pairs, with the pair attaining it.
pub fn lipschitz_inverse_estimate(
    f: &PiecewiseMap,
    pairs: usize,
    seed: u64,
    exec: Exec,
) -> Option<(f64, Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..pairs)
        .map(|_| (f.domain.sample(&mut rng), f.domain.sample(&mut rng)))
        .collect();
    let ratios = exec.map(&pts, |(x, y)| {
        let d = dist(x, y);
        if d == 0.0 {
            return None;
        }
        let fx = f.eval(x).ok()?;
        let fy = f.eval(y).ok()?;
        Some(dist(&fx, &fy) / d)
    });
    ratios
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|r| (i, r)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, r)| (r, pts[i].0.clone(), pts[i].1.clone()))
}

fn jacobian_any(f: &PiecewiseMap, x: &[f64]) -> Option<DMatrix<f64>> {
    match f.jacobian(x) {
        Ok(JacobianAt::Matrix(a)) => Some(a),
        _ => f.jacobian_fd(x, 1e-7 * f.domain.diameter()).ok(),
    }
}

/// Levenberg-Marquardt solve of `f(y) = target` from `y0`, staying in the
/// domain. Returns the final point and residual.
fn solve_for(f: &PiecewiseMap, target: &[f64], y0: &[f64]) -> Option<(Vec<f64>, f64)> {
    let resid = |y: &[f64]| -> Option<f64> {
        if !f.domain.contains(y) {
            return None;
        }
        f.eval(y).ok().map(|v| dist(&v, target))
    };
    let mut y = y0.to_vec();
    let mut r = resid(&y)?;
    let mut lambda = 1e-3;
    for _ in 0..300 {
        if r == 0.0 {
            break;
        }
        let a = jacobian_any(f, &y)?;
        let fy = DVector::from_vec(f.eval(&y).ok()?);
        let e = fy - DVector::from_column_slice(target);
        let jt = a.transpose();
        let g = &jt * &e;
        let h = &jt * &a;
        // Marquardt scaling: flat coordinates still get Gauss-Newton steps
        let floor = 1e-30 * h.diagonal().max().max(f64::MIN_POSITIVE);
        let mut accepted = false;
        while lambda < 1e16 {
            let mut hl = h.clone();
            for i in 0..hl.nrows() {
                hl[(i, i)] += lambda * h[(i, i)].max(floor);
            }
            let Some(step) = hl.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let len = step.norm();
            if len == 0.0 {
                break;
            }
            let dir: Vec<f64> = step.iter().map(|s| s / len).collect();
            let t = f.domain.clip_ray(&y, &dir, len);
            let cand: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
            match resid(&cand) {
                Some(rc) if rc < r => {
                    y = cand;
                    r = rc;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    break;
                }
                _ => lambda *= 10.0,
            }
        }
        if !accepted {
            break;
        }
    }
    Some((y, r))
}

/// Smallest separation of a collision pair: `100 eps_const`, and at least
/// `1e-6` of the diameter so that flat but injective maps do not qualify.
fn separation(f: &PiecewiseMap, eps_const: f64) -> f64 {
    (100.0 * eps_const).max(1e-6 * f.domain.diameter())
}

fn coarse_grid(f: &PiecewiseMap, k: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = f.domain.bounds();
    let total = k.pow(f.m as u32);
    (0..total)
        .map(|mut idx| {
            (0..f.m)
                .map(|i| {
                    let c = idx % k;
                    idx /= k;
                    lo[i] + (hi[i] - lo[i]) * c as f64 / (k - 1) as f64
                })
                .collect::<Vec<f64>>()
        })
        .filter(|p| f.domain.contains(p))
        .collect()
}

/// Searches for `x != x'` with `f(x) = f(x')` (within `eps_const`) by
/// solving `f(x') = f(x)` from several starts, with `x` on the excluded
/// points, a coarse grid and random points.
pub fn collision_search(
    f: &PiecewiseMap,
    eps_const: f64,
    opts: &CheckOptions,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.stream(7));
    let mut bases: Vec<Vec<f64>> = f
        .excluded
        .iter()
        .filter(|p| f.domain.contains(p))
        .cloned()
        .collect();
    // a coarse grid reaches coordinate planes, where folds often live
    bases.extend(coarse_grid(f, if f.m <= 3 { 5 } else { 3 }));
    bases.extend((0..opts.budgets.collision_starts).map(|_| f.domain.sample(&mut rng)));
    let mut jobs = Vec::new();
    for x in &bases {
        for _ in 0..8 {
            jobs.push((x.clone(), f.domain.sample(&mut rng)));
        }
    }
    let sep = separation(f, eps_const);
    opts.exec.find_map_first(&jobs, |(x, y0)| {
        let fx = f.eval(x).ok()?;
        let (y, r) = solve_for(f, &fx, y0)?;
        (r <= eps_const && dist(x, &y) > sep).then(|| (x.clone(), y))
    })
}

/// Sampled injectivity test: random pairs for the inverse Lipschitz ratio,
/// then a collision search.
pub fn injectivity_probe(f: &PiecewiseMap, opts: &CheckOptions) -> Certificate {
    let mut cert = Certificate::new(TheoremTag::Probe, "probe");
    let mut rng = ChaCha8Rng::seed_from_u64(opts.stream(8));
    let scale_pts: Vec<Vec<f64>> = (0..256).map(|_| f.domain.sample(&mut rng)).collect();
    let scale = scale_pts
        .iter()
        .filter_map(|p| f.eval(p).ok())
        .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let eps_const = opts.tol.r#const * scale;
    cert.tol("eps_const", eps_const);

    let est = lipschitz_inverse_estimate(f, opts.budgets.probe_pairs, opts.stream(9), opts.exec);
    let mut collision = None;
    if let Some((ell, x, y)) = &est {
        cert.witness(Witness::scalar("ell_hat", *ell));
        cert.witness(Witness::pair("ell_hat attained", x, y));
        let fx = f.eval(x).ok();
        let fy = f.eval(y).ok();
        if let (Some(fx), Some(fy)) = (fx, fy) {
            if dist(&fx, &fy) <= eps_const && dist(x, y) > separation(f, eps_const) {
                collision = Some((x.clone(), y.clone()));
            }
        }
    } else {
        cert.witness(Witness::Scalar {
            label: "ell_hat".into(),
            value: None,
        });
    }
    if collision.is_none() {
        collision = collision_search(f, eps_const, opts);
    }
    match collision {
        Some((x, y)) => {
            cert.witness(Witness::pair("collision", &x, &y));
            cert.condition(
                "injective",
                Verdict::Fail,
                format!("f(x) = f(x') with |x - x'| = {:.6e}", dist(&x, &y)),
            );
        }
        None => cert.condition(
            "injective",
            Verdict::PassHeuristic,
            format!(
                "{} pairs and a collision search found no coincidence",
                opts.budgets.probe_pairs
            ),
        ),
    }
    cert.finish()
}
