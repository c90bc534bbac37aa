use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sampling::JacobianSampleSet;
use super::thm1::{grid_for, refine};
use super::{Certificate, CheckOptions, TheoremTag, Verdict, Witness};
use crate::convexgeo::{min_norm_point, origin_margin, PointCloud};
use crate::matgeo;

/// The cloud `{A v}` of one direction with its extremality verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalHull {
    pub v: Vec<f64>,
    pub cloud: PointCloud,
    pub distance: f64,
    /// Min-norm distance of the normalized punctured cloud (cone margin).
    pub margin: f64,
    /// `0` is a vertex of `conv({A v} ∪ {0})`.
    pub extremal: bool,
    /// The cone generated by `{A v}` is pointed.
    pub conic: bool,
}

pub fn directional_hull(samples: &JacobianSampleSet, v: &[f64], ext_rel: f64) -> DirectionalHull {
    let vv = DVector::from_column_slice(v);
    let pts: Vec<Vec<f64>> = samples
        .matrices()
        .map(|a| (a * &vv).iter().copied().collect())
        .collect();
    let cloud = PointCloud::new(samples.n, pts);
    let distance = min_norm_point(&cloud).distance;
    let eps = ext_rel * cloud.radius();
    // the origin itself is punctured away, so both tests share one margin
    let margin = origin_margin(&cloud, eps);
    DirectionalHull {
        v: v.to_vec(),
        distance,
        margin,
        extremal: margin > ext_rel,
        conic: margin > ext_rel,
        cloud,
    }
}

/// A pair `(A, B)` and unit `u` with `(A + B) u ≈ 0` but `A u` clearly nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelWitness {
    pub a: usize,
    pub b: usize,
    pub u: Vec<f64>,
    pub sum_residual: f64,
    pub a_image: f64,
}

/// Tests `ker(A + B) ⊆ ker A` with kernel threshold `eps_ker`; returns the
/// unit vector of `ker(A + B)` maximizing `|A u|` when that exceeds
/// `10 eps_ker`.
pub fn kernel_pair_witness(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    eps_ker: f64,
) -> Option<(Vec<f64>, f64, f64)> {
    let s = a + b;
    let k = matgeo::kernel_abs(&s, eps_ker);
    if k.ncols() == 0 {
        return None;
    }
    let ak = a * &k;
    let svd = ak.clone().svd(false, true);
    let vt = svd.v_t.expect("V^T requested");
    let (imax, smax) = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(&y.1))?;
    if smax <= 10.0 * eps_ker {
        return None;
    }
    let z = vt.row(imax).transpose();
    let u = &k * z;
    let u = u.normalize();
    let res = (&s * &u).norm();
    let img = (a * &u).norm();
    Some((u.iter().copied().collect(), res, img))
}

fn pair_list(n: usize, opts: &CheckOptions) -> Vec<(usize, usize)> {
    if n <= opts.budgets.all_pairs_below {
        let mut v = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
        for i in 0..n {
            for j in i + 1..n {
                v.push((i, j));
            }
        }
        v
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.stream(3));
        (0..opts.budgets.pairs)
            .map(|_| {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (i.min(j), i.max(j))
            })
            .collect()
    }
}

/// Direction whose cone margin is at most `ext_rel`: the grid first, then
/// local refinement of the smallest grid margins (the margin is continuous
/// in `v`, so failures on thin sets such as great circles are reachable).
fn worst_direction(
    samples: &JacobianSampleSet,
    opts: &CheckOptions,
) -> (Option<DirectionalHull>, usize) {
    let ext = opts.tol.ext;
    let grid = grid_for(samples.m, opts);
    let margins = opts
        .exec
        .map(&grid, |v| directional_hull(samples, v, ext).margin);
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| margins[a].total_cmp(&margins[b]));
    if let Some(&i) = order.first() {
        if margins[i] <= ext {
            return (Some(directional_hull(samples, &grid[i], ext)), grid.len());
        }
    }
    if samples.m < 2 {
        return (None, grid.len());
    }
    let step = if samples.m == 2 {
        std::f64::consts::TAU / grid.len() as f64
    } else {
        (4.0 / grid.len() as f64).sqrt()
    };
    let starts: Vec<usize> = order.into_iter().take(4).collect();
    let found = opts.exec.find_map_first(&starts, |&i| {
        let (v, h) = refine(
            |w| directional_hull(samples, w, ext).margin,
            &grid[i],
            margins[i],
            step,
        );
        (h <= ext).then(|| directional_hull(samples, &v, ext))
    });
    (found, grid.len())
}

/// Extremality of every kernel slice: the pairwise kernel criterion plus
/// the per-direction vertex test.
pub fn check_ce(samples: &JacobianSampleSet, opts: &CheckOptions) -> Certificate {
    let mut cert = Certificate::new(TheoremTag::Thm2, "ce");
    let eps_ker = opts.tol.ker * samples.sigma_max;
    cert.tol("eps_ker", eps_ker);
    cert.note = "sampled criterion: extremal and semi-extremal coincide for finite clouds".into();

    let pairs = pair_list(samples.len(), opts);
    let mats: Vec<&DMatrix<f64>> = samples.matrices().collect();
    let found = opts.exec.find_map_first(&pairs, |&(i, j)| {
        // (A+B)u = 0 and Au = 0 force Bu = 0, so one orientation suffices
        kernel_pair_witness(mats[i], mats[j], eps_ker).map(|(u, res, img)| KernelWitness {
            a: i,
            b: j,
            u,
            sum_residual: res,
            a_image: img,
        })
    });
    match &found {
        Some(w) => {
            cert.witness(Witness::direction("u", &w.u));
            cert.witness(Witness::matrix("A", mats[w.a]));
            cert.witness(Witness::matrix("B", mats[w.b]));
            cert.witness(Witness::point("A at", &samples.samples[w.a].point));
            cert.witness(Witness::point("B at", &samples.samples[w.b].point));
            cert.witness(Witness::scalar("|(A+B)u|", w.sum_residual));
            cert.witness(Witness::scalar("|Au|", w.a_image));
            cert.condition(
                "kernel-pairs",
                Verdict::Fail,
                format!("ker(A+B) not in ker A, {} pairs scanned", pairs.len()),
            );
        }
        None => cert.condition(
            "kernel-pairs",
            Verdict::Pass,
            format!("{} pairs, no witness", pairs.len()),
        ),
    }

    match worst_direction(samples, opts) {
        (Some(h), _) => {
            cert.witness(Witness::direction("v_not_extremal", &h.v));
            cert.witness(Witness::scalar("margin", h.margin));
            cert.condition(
                "vertex",
                Verdict::Fail,
                "0 is not a vertex of the directional hull",
            );
        }
        (None, k) => cert.condition(
            "vertex",
            Verdict::Pass,
            format!("{k} directions plus local refinement"),
        ),
    }
    cert.finish()
}

/// Pointedness of the cone of `{A v}` for every grid direction.
pub fn check_cce(samples: &JacobianSampleSet, opts: &CheckOptions) -> Certificate {
    let mut cert = Certificate::new(TheoremTag::Thm21, "cce");
    cert.tol("eps_ext_rel", opts.tol.ext);
    cert.note = "sampled criterion: extremal and semi-extremal coincide for finite clouds".into();
    match worst_direction(samples, opts) {
        (Some(h), _) => {
            cert.witness(Witness::direction("v_not_pointed", &h.v));
            cert.witness(Witness::scalar("margin", h.margin));
            cert.condition("conic", Verdict::Fail, "cone of {Av} contains a line");
        }
        (None, k) => cert.condition(
            "conic",
            Verdict::Pass,
            format!("{k} directions plus local refinement"),
        ),
    }
    cert.finish()
}
