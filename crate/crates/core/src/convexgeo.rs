//! Convex and conic geometry on finite point clouds in `R^d`.
//!
//! Hulls are only ever represented by their generators. Everything reduces
//! to the nearest point of a hull to the origin, computed with Wolfe's
//! active-set method, plus a nonnegative least-squares projection onto the
//! generated cone for relative-boundary questions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Default duplicate tolerance, relative to the cloud radius.
pub const DUP_REL_TOL: f64 = 1e-12;
/// Default extremality tolerance, relative to the cloud radius.
pub const EXT_REL_TOL: f64 = 1e-8;
/// Default certificate tolerance of the min-norm point, relative to `max |p|^2`.
pub const QP_REL_TOL: f64 = 1e-10;
/// Default rank tolerance for affine dimension, relative to the largest singular value.
pub const RANK_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    dim: usize,
    points: Vec<Vec<f64>>,
    /// Index of each kept point in the input sequence.
    source: Vec<usize>,
    eps_dup: f64,
}

impl PointCloud {
    /// Builds a cloud, merging points closer than `DUP_REL_TOL * radius`.
    pub fn new<I: IntoIterator<Item = Vec<f64>>>(dim: usize, points: I) -> Self {
        let pts: Vec<Vec<f64>> = points.into_iter().collect();
        let radius = pts.iter().map(|p| norm(p)).fold(0.0, f64::max);
        Self::build(dim, pts, DUP_REL_TOL * radius)
    }

    pub fn with_dup_tol<I: IntoIterator<Item = Vec<f64>>>(
        dim: usize,
        points: I,
        eps_dup: f64,
    ) -> Self {
        Self::build(dim, points.into_iter().collect(), eps_dup)
    }

    /// Flattens matrices row-major into `R^(n*m)`.
    pub fn from_matrices<'a, I: IntoIterator<Item = &'a DMatrix<f64>>>(mats: I) -> Self {
        let flat: Vec<Vec<f64>> = mats.into_iter().map(flatten_row_major).collect();
        let dim = flat.first().map_or(0, Vec::len);
        Self::new(dim, flat)
    }

    fn build(dim: usize, pts: Vec<Vec<f64>>, eps_dup: f64) -> Self {
        for p in &pts {
            assert_eq!(
                p.len(),
                dim,
                "point dimension {} differs from cloud dimension {dim}",
                p.len()
            );
        }
        let keep = dedup_mask(&pts, eps_dup);
        let mut points = Vec::new();
        let mut source = Vec::new();
        for (i, p) in pts.into_iter().enumerate() {
            if keep[i] {
                points.push(p);
                source.push(i);
            }
        }
        PointCloud {
            dim,
            points,
            source,
            eps_dup,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }
    /// Input index of the `i`-th kept point.
    pub fn source(&self, i: usize) -> usize {
        self.source[i]
    }
    pub fn eps_dup(&self) -> f64 {
        self.eps_dup
    }
    pub fn radius(&self) -> f64 {
        self.points.iter().map(|p| norm(p)).fold(0.0, f64::max)
    }

    /// Drops points of norm `<= eps` and scales the rest to unit length.
    /// Source indices are carried through.
    pub fn normalized(&self, eps: f64) -> PointCloud {
        let mut pts = Vec::new();
        let mut src = Vec::new();
        for (i, p) in self.points.iter().enumerate() {
            let r = norm(p);
            if r > eps {
                pts.push(p.iter().map(|v| v / r).collect::<Vec<_>>());
                src.push(self.source[i]);
            }
        }
        let mut out = Self::build(self.dim, pts, DUP_REL_TOL);
        out.source = out.source.iter().map(|&k| src[k]).collect();
        out
    }

    /// `self` with the given points appended (no source mapping for them).
    pub fn with_points<I: IntoIterator<Item = Vec<f64>>>(&self, extra: I) -> PointCloud {
        let n0 = self.source.iter().copied().max().map_or(0, |m| m + 1);
        let mut pts = self.points.clone();
        pts.extend(extra);
        let mut out = Self::build(self.dim, pts, self.eps_dup);
        let orig = self.source.clone();
        out.source = out
            .source
            .iter()
            .map(|&k| {
                if k < orig.len() {
                    orig[k]
                } else {
                    n0 + k - orig.len()
                }
            })
            .collect();
        out
    }
}

pub fn flatten_row_major(a: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            v.push(a[(i, j)]);
        }
    }
    v
}

/// Marks the points to keep: a point is dropped if an earlier kept point in
/// projection order lies within `eps`.
fn dedup_mask(pts: &[Vec<f64>], eps: f64) -> Vec<bool> {
    let n = pts.len();
    if n == 0 || eps <= 0.0 {
        return vec![true; n];
    }
    let d = pts[0].len();
    // fixed irrational-ish direction so that ties on axes are rare
    let dir: Vec<f64> = (0..d)
        .map(|k| 1.0 + 0.618_033_988_749_895 * (k as f64 + 1.0).sqrt())
        .collect();
    let dn = norm(&dir);
    let proj: Vec<f64> = pts.iter().map(|p| dot(p, &dir) / dn).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
    let mut keep = vec![false; n];
    // kept points in projection order; only these are scanned
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let dup = kept
            .iter()
            .rev()
            .take_while(|&&k| proj[i] - proj[k] <= eps)
            .any(|&k| dist(&pts[i], &pts[k]) <= eps);
        if !dup {
            keep[i] = true;
            kept.push(i);
        }
    }
    keep
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinNormResult {
    pub point: Vec<f64>,
    /// Simplex weights over the cloud's points (zero off the active set).
    pub weights: Vec<f64>,
    pub distance: f64,
    /// `max(0, |w|^2 - min_i <w, p_i>)`: how far the support certificate is from holding exactly.
    pub residual: f64,
    /// `QP_REL_TOL * max |p|^2`, the tolerance the residual is judged against.
    pub eps_qp: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; the best iterate is returned.
    pub converged: bool,
}

impl MinNormResult {
    /// `(index, weight)` for the points with positive weight.
    pub fn active(&self) -> Vec<(usize, f64)> {
        self.weights
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, w)| w > 0.0)
            .collect()
    }

    pub fn certificate_holds(&self) -> bool {
        self.residual <= self.eps_qp
    }
}

/// Nearest point of `conv(c)` to the origin.
///
/// # Panics
/// On an empty cloud.
pub fn min_norm_point(c: &PointCloud) -> MinNormResult {
    assert!(!c.is_empty(), "min_norm_point of an empty cloud");
    let pts = c.points();
    let n = pts.len();
    let d = c.dim();
    let sq: Vec<f64> = pts.iter().map(|p| dot(p, p)).collect();
    let scale = sq
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let stop_tol = 1e-12 * scale;
    let max_iter = 50 * (n + d) + 100;

    let s0 = (0..n).min_by(|&a, &b| sq[a].total_cmp(&sq[b])).unwrap();
    let mut active = vec![s0];
    let mut lam = vec![1.0];
    let mut x = pts[s0].clone();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let xx = dot(&x, &x);
        if xx <= 1e-30 * scale {
            converged = true;
            break;
        }
        let (j, xj) = (0..n)
            .map(|i| (i, dot(&x, &pts[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if xj >= xx - stop_tol || active.contains(&j) {
            converged = true;
            break;
        }
        active.push(j);
        lam.push(0.0);
        let mut stalled = false;
        for minor in 0..=active.len() + 1 {
            let alpha = affine_min_norm(pts, &active);
            if alpha.iter().all(|&a| a > 0.0) {
                lam = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for (l, a) in lam.iter().zip(&alpha) {
                if *a <= 0.0 {
                    let t = l / (l - a);
                    if t < theta {
                        theta = t;
                    }
                }
            }
            for (l, a) in lam.iter_mut().zip(&alpha) {
                *l = (1.0 - theta) * *l + theta * a;
            }
            // drop the blocking coordinate(s)
            let before = active.len();
            let mut k = 0;
            while k < active.len() {
                if lam[k] <= 1e-15 || alpha[k] <= 0.0 && lam[k] <= 1e-12 {
                    if minor == 0 && active[k] == j {
                        stalled = true;
                    }
                    active.remove(k);
                    lam.remove(k);
                } else {
                    k += 1;
                }
            }
            if active.len() == before {
                // numerical stagnation: remove the smallest weight
                let kmin = (0..lam.len())
                    .min_by(|&a, &b| lam[a].total_cmp(&lam[b]))
                    .unwrap();
                active.remove(kmin);
                lam.remove(kmin);
            }
            let s: f64 = lam.iter().sum();
            lam.iter_mut().for_each(|l| *l /= s);
            if stalled {
                break;
            }
        }
        x = combine(pts, &active, &lam, d);
        if stalled {
            converged = true;
            break;
        }
    }

    let mut weights = vec![0.0; n];
    for (k, &i) in active.iter().enumerate() {
        weights[i] = lam[k];
    }
    let xx = dot(&x, &x);
    let min_dot = pts.iter().map(|p| dot(&x, p)).fold(f64::INFINITY, f64::min);
    MinNormResult {
        distance: xx.sqrt(),
        point: x,
        weights,
        residual: (xx - min_dot).max(0.0),
        eps_qp: QP_REL_TOL * scale,
        iterations,
        converged,
    }
}

fn combine(pts: &[Vec<f64>], idx: &[usize], w: &[f64], d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    for (&i, &l) in idx.iter().zip(w) {
        for (xk, pk) in x.iter_mut().zip(&pts[i]) {
            *xk += l * pk;
        }
    }
    x
}

/// Affine weights (summing to one, possibly negative) of the minimum-norm
/// point of the affine hull of `pts[idx]`, by least squares in the
/// difference coordinates.
fn affine_min_norm(pts: &[Vec<f64>], idx: &[usize]) -> Vec<f64> {
    if idx.len() == 1 {
        return vec![1.0];
    }
    let p0 = &pts[idx[0]];
    let d = p0.len();
    let k = idx.len() - 1;
    let dm = DMatrix::from_fn(d, k, |r, c| pts[idx[c + 1]][r] - p0[r]);
    let rhs = DVector::from_iterator(d, p0.iter().map(|v| -v));
    let beta = lstsq(dm, &rhs);
    let mut alpha = Vec::with_capacity(idx.len());
    alpha.push(1.0 - beta.iter().sum::<f64>());
    alpha.extend(beta.iter());
    alpha
}

/// Minimum-norm least-squares solution via SVD with a relative cutoff.
fn lstsq(a: DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let ncols = a.ncols();
    // pad wide systems so nalgebra returns the full right basis
    let a = if a.nrows() < ncols {
        let mut p = DMatrix::zeros(ncols, ncols);
        p.view_mut((0, 0), (a.nrows(), ncols)).copy_from(&a);
        p
    } else {
        a
    };
    let mut bb = DVector::zeros(a.nrows());
    bb.rows_mut(0, b.len()).copy_from(b);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DVector::zeros(ncols);
    }
    svd.solve(&bb, 1e-12 * smax).expect("U and V^T requested")
}

/// Lawson-Hanson nonnegative least squares: `argmin_{mu >= 0} |A mu - b|`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let k = a.ncols();
    let mut x = DVector::zeros(k);
    let mut passive = vec![false; k];
    let tol = 1e-12 * a.norm().max(1.0) * b.norm().max(1.0);
    for _ in 0..3 * k + 10 {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&p, &q| w[p].total_cmp(&w[q]));
        let Some(j) = cand else { break };
        passive[j] = true;
        for _ in 0..3 * k + 10 {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let sub = a.select_columns(idx.iter());
            let s_p = lstsq(sub, b);
            if s_p.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (t, &i) in idx.iter().enumerate() {
                    x[i] = s_p[t];
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (t, &i) in idx.iter().enumerate() {
                if s_p[t] <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - s_p[t]));
                }
            }
            for (t, &i) in idx.iter().enumerate() {
                x[i] += alpha * (s_p[t] - x[i]);
                if x[i] <= 1e-15 {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    x
}

/// Outcome of [`supporting_direction`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Support {
    /// `0` is outside the hull: unit `w/|w|` with `<w/|w|, p> >= |w| - eps` for all `p`.
    Separating(Vec<f64>),
    /// `0` is on the relative boundary: unit `u` in the linear span with
    /// `<u, p> >= 0` for all `p` and `> 0` for some `p`.
    RelativeBoundary(Vec<f64>),
    /// `0` is in the relative interior. `weak` is a unit normal to the
    /// span when the span is not the whole space.
    Interior { weak: Option<Vec<f64>> },
}

impl Support {
    pub fn direction(&self) -> Option<&[f64]> {
        match self {
            Support::Separating(w) | Support::RelativeBoundary(w) => Some(w),
            Support::Interior { .. } => None,
        }
    }
}

pub fn supporting_direction(c: &PointCloud) -> Support {
    let mn = min_norm_point(c);
    let radius = c.radius();
    let zero_tol = EXT_REL_TOL * radius.max(f64::MIN_POSITIVE);
    if mn.distance > zero_tol {
        return Support::Separating(mn.point.iter().map(|v| v / mn.distance).collect());
    }
    let d = c.dim();
    let cols = DMatrix::from_fn(d, c.len(), |r, k| c.point(k)[r]);
    for p in c.points() {
        if norm(p) <= zero_tol {
            continue;
        }
        let y = DVector::from_iterator(d, p.iter().map(|v| -v));
        let mu = nnls(&cols, &y);
        let r = &y - &cols * mu;
        if r.norm() > zero_tol {
            let u: Vec<f64> = r.iter().map(|v| -v / r.norm()).collect();
            return Support::RelativeBoundary(u);
        }
    }
    let k = crate::matgeo::kernel(&cols.transpose(), RANK_REL_TOL);
    let weak = (k.ncols() > 0 && !c.is_empty())
        .then(|| canonical_sign(k.column(0).iter().copied().collect()));
    Support::Interior { weak }
}

fn canonical_sign(mut v: Vec<f64>) -> Vec<f64> {
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    v
}

/// Absolute puncture radius / decision threshold used by default.
pub fn default_eps_ext(c: &PointCloud) -> f64 {
    EXT_REL_TOL * c.radius()
}

/// Whether `0` is a vertex of `conv(c ∪ {0})`: true iff `0` is not in the hull
/// of the points outside `Ball(0, eps_ext)`.
///
/// Decided on the normalized punctured cloud, which is scale-free: the
/// min-norm distance there is the angular margin of the generated cone.
pub fn is_extremal_origin(c: &PointCloud, eps_ext: f64) -> bool {
    origin_margin(c, eps_ext) > EXT_REL_TOL
}

/// Min-norm distance of the normalized punctured cloud; `+inf` when no
/// point survives the puncture.
pub fn origin_margin(c: &PointCloud, eps_ext: f64) -> f64 {
    let nc = c.normalized(eps_ext);
    if nc.is_empty() {
        return f64::INFINITY;
    }
    min_norm_point(&nc).distance
}

/// Whether the closed cone generated by `c` is pointed, i.e. the hulls of the
/// normalized cloud and its negation meet only near `0`.
///
/// The difference cloud `{p_i + p_j}` of the two hulls has hull `2 conv(N)`,
/// so the decision is the min-norm distance of the normalized cloud `N`.
pub fn conic_extremality(c: &PointCloud, eps_ext: f64) -> bool {
    is_extremal_origin(c, eps_ext)
}

/// Dimension of the affine hull.
pub fn affine_dim(c: &PointCloud) -> usize {
    affine_dim_tol(c, RANK_REL_TOL)
}

pub fn affine_dim_tol(c: &PointCloud, rel_tol: f64) -> usize {
    if c.len() <= 1 {
        return 0;
    }
    let p0 = c.point(0);
    let m = DMatrix::from_fn(c.len() - 1, c.dim(), |i, k| c.point(i + 1)[k] - p0[k]);
    let s = crate::matgeo::singular_values(&m);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * smax).count()
}

/// Whether `c.point(i)` is a vertex of `conv(c)`.
pub fn is_vertex(c: &PointCloud, i: usize) -> bool {
    let p = c.point(i);
    let shifted = PointCloud::with_dup_tol(
        c.dim(),
        c.points()
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, q)| sub(q, p)),
        0.0,
    );
    if shifted.is_empty() {
        return true;
    }
    is_extremal_origin(&shifted, 0.0)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
