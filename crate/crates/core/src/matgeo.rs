//! Matrix-space geometry: distance to the singular matrices, the cofactor
//! surrogate for that distance, kernels, and leading-minor profiles.
//!
//! Matrices are `n x m` (rows = target dimension, columns = source dimension).
//! Operator norms are spectral norms throughout.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Relative tolerance for treating a determinant or singular value as zero.
pub const SINGULAR_REL_TOL: f64 = 1e-9;

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Distance from `a` to the matrices that are not injective, i.e.
/// `inf |A v|` over unit `v`. This is the smallest singular value when
/// `m <= n`, and zero for wide matrices.
pub fn nu(a: &DMatrix<f64>) -> f64 {
    if a.ncols() > a.nrows() {
        return 0.0;
    }
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// `max_I |det A_I| / sqrt(sum_ij (cofactor minor_ij of A_I)^2)` over all
/// `m x m` row selections `A_I`; zero when every selection is singular.
///
/// For square `A` this is `1/|A^-1|_F`, so `g <= nu <= sqrt(m) g`.
/// Enumerates `C(n, m)` selections; meant for small matrices.
pub fn g_surrogate(a: &DMatrix<f64>) -> f64 {
    let (n, m) = a.shape();
    if m > n || m == 0 {
        return 0.0;
    }
    let mut best = 0.0f64;
    for rows in combinations(n, m) {
        let sub = a.select_rows(rows.iter());
        let det = sub.determinant();
        if det == 0.0 {
            continue;
        }
        let mut sq = 0.0;
        for i in 0..m {
            for j in 0..m {
                let minor = if m == 1 {
                    1.0
                } else {
                    sub.clone().remove_row(i).remove_column(j).determinant()
                };
                sq += minor * minor;
            }
        }
        if sq > 0.0 {
            best = best.max(det.abs() / sq.sqrt());
        }
    }
    best
}

/// Empirical constants `(a, b)` with `a g <= nu <= b g` over the given
/// matrices (the min and max of `nu/g` where `g > 0`).
pub fn surrogate_constants<'a, I>(mats: I) -> Option<(f64, f64)>
where
    I: IntoIterator<Item = &'a DMatrix<f64>>,
{
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for a in mats {
        let g = g_surrogate(a);
        if g > 0.0 {
            let r = nu(a) / g;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    lo.is_finite().then_some((lo, hi))
}

/// All increasing `k`-subsets of `0..n`.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Orthonormal basis (as columns) of the right singular vectors whose
/// singular value is at most `tol * sigma_max`, or at most `tol` when `a` is
/// zero. Wide matrices are padded with zero rows so the full right basis is
/// available.
pub fn kernel(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (n, m) = a.shape();
    if m == 0 {
        return DMatrix::zeros(0, 0);
    }
    let padded = if n < m {
        let mut p = DMatrix::zeros(m, m);
        p.view_mut((0, 0), (n, m)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let sigma = &svd.singular_values;
    let smax = sigma.iter().copied().fold(0.0, f64::max);
    let thr = if smax > 0.0 { tol * smax } else { tol };
    let cols: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] <= thr).collect();
    let mut basis = DMatrix::zeros(m, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        for j in 0..m {
            basis[(j, k)] = vt[(i, j)];
        }
    }
    basis
}

/// Kernel with an absolute singular-value threshold.
pub fn kernel_abs(a: &DMatrix<f64>, threshold: f64) -> DMatrix<f64> {
    let smax = spectral_norm(a);
    if smax == 0.0 {
        return kernel(a, threshold.max(f64::MIN_POSITIVE));
    }
    kernel(a, threshold / smax)
}

/// `B[i][k] = A[tgt[i]][src[k]]`: rows follow the target coordinate order,
/// columns the source order.
pub fn permute(a: &DMatrix<f64>, src: &[usize], tgt: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(tgt.len(), src.len(), |i, k| a[(tgt[i], src[k])])
}

/// Leading principal minors `d_1..d_n` of a permuted square matrix and the
/// ratios `d_j / d_{j-1}` (with `d_0 = 1`), the latter undefined where the
/// previous minor is numerically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorProfile {
    pub minors: Vec<f64>,
    pub ratios: Vec<Option<f64>>,
}

impl MinorProfile {
    /// Product of the defined ratios; equals `det` when all are defined.
    pub fn ratio_product(&self) -> Option<f64> {
        self.ratios
            .iter()
            .try_fold(1.0, |acc, r| r.map(|r| acc * r))
    }
}

pub fn minor_profile(a: &DMatrix<f64>, src: &[usize], tgt: &[usize]) -> MinorProfile {
    assert_eq!(a.nrows(), a.ncols(), "minor profile needs a square matrix");
    assert!(is_permutation(src, a.ncols()) && is_permutation(tgt, a.nrows()));
    let b = permute(a, src, tgt);
    let n = b.nrows();
    let smax = spectral_norm(&b).max(f64::MIN_POSITIVE);
    let mut minors = Vec::with_capacity(n);
    let mut ratios = Vec::with_capacity(n);
    let mut prev = 1.0f64;
    for j in 1..=n {
        let d = b.view((0, 0), (j, j)).clone_owned().determinant();
        // a (j-1)-minor scales like sigma_max^(j-1)
        let zero_tol = SINGULAR_REL_TOL * smax.powi(j as i32 - 1);
        ratios.push(if j == 1 || prev.abs() > zero_tol {
            Some(d / prev)
        } else {
            None
        });
        minors.push(d);
        prev = d;
    }
    MinorProfile { minors, ratios }
}

pub fn is_permutation(p: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    p.len() == n
        && p.iter()
            .all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
    }

    fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        random_matrix(rng, n, n).qr().q()
    }

    /// Laplace expansion, independent of the LU path.
    fn laplace_det(a: &DMatrix<f64>) -> f64 {
        let n = a.nrows();
        match n {
            0 => 1.0,
            1 => a[(0, 0)],
            _ => (0..n)
                .map(|j| {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    sign * a[(0, j)] * laplace_det(&a.clone().remove_row(0).remove_column(j))
                })
                .sum(),
        }
    }

    #[test]
    fn nu_examples() {
        assert!((nu(&DMatrix::identity(2, 2)) - 1.0).abs() < 1e-15);
        assert!((nu(&dmatrix![1.0, 0.0; 0.0, 3.0]) - 1.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 3, 3);
        let inv = a.clone().try_inverse().unwrap();
        assert!((nu(&a) * spectral_norm(&inv) - 1.0).abs() < 1e-10);
        assert_eq!(nu(&dmatrix![1.0, 0.0, 0.0; 0.0, 1.0, 0.0]), 0.0);
        // tall: |(1,0;0,2;0,0) v| >= 1
        assert!((nu(&dmatrix![1.0, 0.0; 0.0, 2.0; 0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn g_surrogate_examples() {
        // det = 1, minors of the identity square-sum to 2
        assert!((g_surrogate(&DMatrix::identity(2, 2)) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(g_surrogate(&dmatrix![1.0, 2.0; 2.0, 4.0]), 0.0);
        assert_eq!(g_surrogate(&DMatrix::zeros(3, 3)), 0.0);
        // 1-column: max |a_i|
        assert_eq!(g_surrogate(&dmatrix![0.5; -2.0; 1.0]), 2.0);
    }

    #[test]
    fn g_surrogate_matches_cofactor_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_matrix(&mut rng, 4, 2);
            let mut best = 0.0f64;
            for rows in combinations(4, 2) {
                let s = a.select_rows(rows.iter());
                let det = laplace_det(&s);
                let sq: f64 = s.iter().map(|v| v * v).sum(); // 1x1 minors are the entries
                best = best.max(det.abs() / sq.sqrt());
            }
            assert!((g_surrogate(&a) - best).abs() < 1e-12);
        }
    }

    #[test]
    fn surrogate_brackets_nu_on_random_3x3() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mats: Vec<_> = (0..100).map(|_| random_matrix(&mut rng, 3, 3)).collect();
        let (a, b) = surrogate_constants(&mats).unwrap();
        assert!(a > 0.0 && b >= a);
        // square case: |X|_2 <= |X|_F <= sqrt(m) |X|_2 applied to the inverse
        assert!(a >= 1.0 - 1e-9 && b <= 3f64.sqrt() + 1e-9, "{a} {b}");
    }

    #[test]
    fn kernel_examples() {
        let k = kernel(&DMatrix::zeros(2, 2), 1e-9);
        assert_eq!(k.ncols(), 2);
        let a = |t: f64| dmatrix![0.0, 0.0, 0.0; 0.0, 0.0, 0.0; 1.0, 0.0, t];
        let k = kernel(&a(0.5), 1e-9);
        assert_eq!(k.ncols(), 2);
        let v = nalgebra::dvector![-0.5, 0.0, 1.0].normalize();
        assert!((&k * (k.transpose() * &v) - &v).norm() < 1e-12);
        let e2 = nalgebra::dvector![0.0, 1.0, 0.0];
        assert!((&k * (k.transpose() * &e2) - &e2).norm() < 1e-12);
        let k = kernel(&(a(0.5) + a(1.5)), 1e-9);
        let u = nalgebra::dvector![1.0, 0.0, -1.0].normalize();
        assert!((&k * (k.transpose() * &u) - &u).norm() < 1e-12);
        // wide matrix: kernel of (1 1 0) is 2-dimensional
        assert_eq!(kernel(&dmatrix![1.0, 1.0, 0.0], 1e-9).ncols(), 2);
    }

    #[test]
    fn minor_profile_examples() {
        let p = minor_profile(&dmatrix![3.0, 0.0; 0.0, 12.0], &[0, 1], &[0, 1]);
        assert_eq!(p.minors, vec![3.0, 36.0]);
        assert_eq!(p.ratios, vec![Some(3.0), Some(12.0)]);
        let p = minor_profile(&dmatrix![0.0, 1.0; 1.0, 0.0], &[0, 1], &[0, 1]);
        assert_eq!(p.ratios[1], None);
        let p = minor_profile(&dmatrix![0.0, 1.0; 2.0, 0.0], &[0, 1], &[1, 0]);
        assert_eq!(p.minors, vec![2.0, 2.0]);
    }

    #[test]
    fn orthogonal_invariance_of_nu() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.random_range(1..=5);
            let m = rng.random_range(1..=n);
            let a = random_matrix(&mut rng, n, m);
            let u = random_orthogonal(&mut rng, n);
            let v = random_orthogonal(&mut rng, m);
            assert!((nu(&(&u * &a * &v)) - nu(&a)).abs() <= 1e-10);
        }
    }

    #[test]
    fn nu_lower_bounds_distance_to_singular() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..1000 {
            let n = rng.random_range(2..=4);
            let a = random_matrix(&mut rng, n, n);
            // rank-deficient S: drop one rank from a random matrix
            let r = random_matrix(&mut rng, n, n);
            let svd = r.svd(true, true);
            let mut s = svd.singular_values.clone();
            let imin = s.imin();
            s[imin] = 0.0;
            let sing = svd.u.unwrap() * DMatrix::from_diagonal(&s) * svd.v_t.unwrap();
            assert!(nu(&a) <= spectral_norm(&(&a - &sing)) + 1e-12);
        }
    }

    #[test]
    fn kernel_vectors_are_annihilated() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..200 {
            let n = rng.random_range(1..=5);
            let m = rng.random_range(1..=5);
            // rank-deficient product
            let r = rng.random_range(0..=n.min(m));
            let a = random_matrix(&mut rng, n, r) * random_matrix(&mut rng, r, m);
            let tol = 1e-9;
            let k = kernel(&a, tol);
            assert!(k.ncols() >= m - r);
            let smax = spectral_norm(&a);
            for c in 0..k.ncols() {
                let u = k.column(c);
                assert!((&a * u).norm() <= 10.0 * tol * smax.max(1.0));
            }
        }
    }

    proptest! {
        #[test]
        fn minor_ratios_telescope_to_det(entries in prop::collection::vec(-2.0f64..2.0, 16), n in 1usize..=4) {
            let a = DMatrix::from_iterator(n, n, entries.into_iter().take(n * n));
            let p = minor_profile(&a, &(0..n).collect::<Vec<_>>(), &(0..n).collect::<Vec<_>>());
            if let Some(prod) = p.ratio_product() {
                let det = laplace_det(&a);
                prop_assert!((prod - det).abs() <= 1e-9 * det.abs().max(1e-3));
            }
        }
    }
}
