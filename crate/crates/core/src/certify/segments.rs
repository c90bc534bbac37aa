use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::sampling::JacobianSampleSet;
use super::{Certificate, CheckOptions, TheoremTag, Verdict, Witness};
use crate::mapdsl::{dist, JacobianAt, PiecewiseMap};
use crate::matgeo;

/// Points per tested segment.
pub const SEGMENT_POINTS: usize = 17;

/// Largest pairwise distance between the values of `g` at the 17 equally
/// spaced points of `[a, b]`, or `None` if `g` fails somewhere.
pub fn segment_spread<G: Fn(&[f64]) -> Option<Vec<f64>>>(
    g: G,
    a: &[f64],
    b: &[f64],
) -> Option<f64> {
    let vals: Option<Vec<Vec<f64>>> = (0..SEGMENT_POINTS)
        .map(|k| {
            let t = k as f64 / (SEGMENT_POINTS - 1) as f64;
            let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
            g(&p)
        })
        .collect();
    let vals = vals?;
    let mut spread = 0.0f64;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            spread = spread.max(dist(&vals[i], &vals[j]));
        }
    }
    Some(spread)
}

/// Whether `f` is constant (within `eps_const`) on `[a, b]`.
pub fn constant_segment(f: &PiecewiseMap, a: &[f64], b: &[f64], eps_const: f64) -> bool {
    segment_spread(|p| f.eval(p).ok(), a, b).is_some_and(|s| s <= eps_const)
}

/// The chord of the domain through `p` along `dir`, at most `half` long on
/// each side. `None` when it degenerates to a point.
pub(crate) fn chord(
    f: &PiecewiseMap,
    p: &[f64],
    dir: &[f64],
    half: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let neg: Vec<f64> = dir.iter().map(|v| -v).collect();
    let t1 = f.domain.clip_ray(p, dir, half);
    let t0 = f.domain.clip_ray(p, &neg, half);
    if t0 + t1 <= 1e-6 * f.domain.diameter() {
        return None;
    }
    let a = p.iter().zip(dir).map(|(x, d)| x - t0 * d).collect();
    let b = p.iter().zip(dir).map(|(x, d)| x + t1 * d).collect();
    Some((a, b))
}

/// Evenly spaced subset of at most `k` points.
pub(crate) fn thin(points: Vec<Vec<f64>>, k: usize) -> Vec<Vec<f64>> {
    if points.len() <= k || k == 0 {
        return points;
    }
    let step = points.len() as f64 / k as f64;
    (0..k)
        .map(|i| points[(i as f64 * step) as usize].clone())
        .collect()
}

pub(crate) fn random_unit<R: Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub(crate) fn axis(m: usize, k: usize) -> Vec<f64> {
    let mut e = vec![0.0; m];
    e[k] = 1.0;
    e
}

/// Kernel directions of the Jacobian at `p`, when it exists and is singular.
pub(crate) fn kernel_directions(f: &PiecewiseMap, p: &[f64], eps_sing: f64) -> Vec<Vec<f64>> {
    match f.jacobian(p) {
        Ok(JacobianAt::Matrix(a)) => {
            let k: DMatrix<f64> = matgeo::kernel_abs(&a, eps_sing.max(f64::MIN_POSITIVE));
            (0..k.ncols())
                .map(|c| k.column(c).iter().copied().collect())
                .collect()
        }
        _ => Vec::new(),
    }
}

/// Refutation test for "f is not constant on any segment": random chords
/// plus axis and kernel chords through degenerate points.
pub fn check_s(f: &PiecewiseMap, samples: &JacobianSampleSet, opts: &CheckOptions) -> Certificate {
    let mut cert = Certificate::new(TheoremTag::Thm2, "s");
    let eps_sing = opts.tol.sing * samples.sigma_max;
    let eps_const = opts.tol.r#const * samples.map_scale;
    cert.tol("eps_const", eps_const);
    cert.tol("eps_sing", eps_sing);
    let m = f.m;
    let diam = f.domain.diameter();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.stream(4));

    let mut segs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let anchors = thin(samples.degenerate_points(eps_sing), opts.budgets.anchors);
    for p in &anchors {
        let mut dirs: Vec<Vec<f64>> = (0..m).map(|k| axis(m, k)).collect();
        dirs.extend(kernel_directions(f, p, eps_sing));
        for d in dirs {
            segs.extend(chord(f, p, &d, 0.25 * diam));
        }
    }
    let anchored = segs.len();
    for _ in 0..opts.budgets.segments {
        let p = f.domain.sample(&mut rng);
        let d = random_unit(m, &mut rng);
        let half = rng.random_range(0.025..0.25) * diam;
        segs.extend(chord(f, &p, &d, half));
    }

    let hit = opts.exec.find_map_first(&segs, |(a, b)| {
        constant_segment(f, a, b, eps_const).then(|| (a.clone(), b.clone()))
    });
    match hit {
        Some((a, b)) => {
            cert.witness(Witness::segment("constant_segment", &a, &b));
            cert.condition("S", Verdict::Fail, "f is constant on a segment");
        }
        None => cert.condition(
            "S",
            Verdict::PassHeuristic,
            format!(
                "{} segments ({anchored} through degenerate points), none constant",
                segs.len()
            ),
        ),
    }
    cert.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{sample_jacobians, SampleStrategy};
    use crate::mapdsl::parse_map;

    fn run(src: &str) -> Certificate {
        let f = parse_map(src).unwrap();
        let s = sample_jacobians(&f, &SampleStrategy::default()).unwrap();
        check_s(&f, &s, &CheckOptions::default())
    }

    #[test]
    fn examples() {
        let c = run("map R2->R2 { piece true: (x, x^2*y) }");
        assert_eq!(c.verdict, Verdict::Fail);
        match c.find_witness("constant_segment").unwrap() {
            Witness::Segment { a, b, .. } => {
                assert!(a[0].abs() < 1e-12 && b[0].abs() < 1e-12 && a[1] != b[1])
            }
            w => panic!("{w:?}"),
        }
        assert_eq!(
            run("map R2->R2 { piece true: (x^3, y^3) }").verdict,
            Verdict::PassHeuristic
        );
        assert_eq!(
            run("map R2->R2 { piece true: (x, y) }").verdict,
            Verdict::PassHeuristic
        );
    }

    #[test]
    fn spread_of_a_line() {
        let s = segment_spread(|p| Some(vec![2.0 * p[0]]), &[0.0], &[1.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-15);
    }
}
