use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CertifyError;
use crate::mapdsl::{bisect_zero, Expr, JacobianAt, PiecewiseMap};
use crate::matgeo;
use crate::par::Exec;

/// How to choose Jacobian sample points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleStrategy {
    /// Grid points per axis over the domain's bounding box.
    pub grid: usize,
    pub random: usize,
    /// Attempts to place sample pairs just off guard and locus zero sets.
    pub boundary_refine: usize,
    pub seed: u64,
    /// Absolute boundary exclusion; `None` uses the map's default.
    pub eps_bdry: Option<f64>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for SampleStrategy {
    fn default() -> Self {
        SampleStrategy {
            grid: 11,
            random: 500,
            boundary_refine: 100,
            seed: 0,
            eps_bdry: None,
            exec: Exec::default(),
        }
    }
}

impl SampleStrategy {
    pub fn validate(&self) -> Result<(), CertifyError> {
        if self.grid == 0 && self.random == 0 {
            return Err(CertifyError::Strategy(
                "grid and random counts are both zero".into(),
            ));
        }
        if self.grid == 1 {
            return Err(CertifyError::Strategy(
                "a grid needs at least 2 points per axis".into(),
            ));
        }
        if let Some(e) = self.eps_bdry {
            if !(e.is_finite() && e > 0.0) {
                return Err(CertifyError::Strategy(format!(
                    "eps_bdry must be positive, got {e}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleOrigin {
    Grid,
    Random,
    Boundary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    pub point: Vec<f64>,
    pub matrix: DMatrix<f64>,
    pub piece: usize,
    pub origin: SampleOrigin,
}

/// Finite stand-in for the set of Jacobians over the differentiable points.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianSampleSet {
    pub samples: Vec<MatrixSample>,
    /// Candidate points with no Jacobian (boundary, locus, kink, excluded, pole).
    pub nondifferentiable: Vec<Vec<f64>>,
    pub map_hash: String,
    pub strategy: SampleStrategy,
    pub m: usize,
    pub n: usize,
    /// Largest singular value over the samples.
    pub sigma_max: f64,
    /// Largest `|f(x)|` over sample points, or 1 if that is zero.
    pub map_scale: f64,
    pub eps_bdry: f64,
}

impl JacobianSampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
    pub fn matrices(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.samples.iter().map(|s| &s.matrix)
    }

    /// Restriction to the samples satisfying `keep`.
    pub fn filtered<F: Fn(&MatrixSample) -> bool>(&self, keep: F) -> JacobianSampleSet {
        let samples: Vec<MatrixSample> = self.samples.iter().filter(|s| keep(s)).cloned().collect();
        let sigma_max = samples
            .iter()
            .map(|s| matgeo::spectral_norm(&s.matrix))
            .fold(0.0, f64::max);
        JacobianSampleSet {
            samples,
            sigma_max,
            ..self.clone()
        }
    }

    /// Points where the map is likely degenerate: non-differentiable
    /// candidates plus samples whose smallest singular value is at most
    /// `eps_sing`.
    pub fn degenerate_points(&self, eps_sing: f64) -> Vec<Vec<f64>> {
        let mut out = self.nondifferentiable.clone();
        out.extend(
            self.samples
                .iter()
                .filter(|s| matgeo::nu(&s.matrix) <= eps_sing)
                .map(|s| s.point.clone()),
        );
        out
    }
}

fn grid_points(f: &PiecewiseMap, per_axis: usize) -> Vec<Vec<f64>> {
    if per_axis < 2 {
        return Vec::new();
    }
    let (lo, hi) = f.domain.bounds();
    let m = lo.len();
    let total = per_axis.pow(m as u32);
    let mut out = Vec::with_capacity(total);
    for idx in 0..total {
        let mut k = idx;
        let mut p = vec![0.0; m];
        for (axis, slot) in p.iter_mut().enumerate() {
            let i = k % per_axis;
            k /= per_axis;
            let t = i as f64 / (per_axis - 1) as f64;
            *slot = lo[axis] + t * (hi[axis] - lo[axis]);
        }
        if f.domain.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Guard and locus zero-set functions of the map.
pub(crate) fn boundary_functions(f: &PiecewiseMap) -> Vec<Expr> {
    let mut gs: Vec<Expr> = f
        .pieces
        .iter()
        .flat_map(|p| p.region.guards.iter().map(|g| g.slack_expr()))
        .collect();
    gs.extend(f.locus.iter().cloned());
    gs
}

/// Points on the zero set of `g` found by bisecting random chords.
pub(crate) fn zero_set_points<R: Rng>(
    f: &PiecewiseMap,
    g: &Expr,
    attempts: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for _ in 0..attempts {
        let a = f.domain.sample(rng);
        let b = f.domain.sample(rng);
        let (Ok(ga), Ok(gb)) = (g.eval(&a), g.eval(&b)) else {
            continue;
        };
        if ga == 0.0 {
            out.push(a);
        } else if ga * gb < 0.0 {
            if let Some(z) = bisect_zero(g, &a, &b) {
                out.push(z);
            }
        }
    }
    out
}

/// Jacobians at grid, random and boundary-refined points.
pub fn sample_jacobians(
    f: &PiecewiseMap,
    strategy: &SampleStrategy,
) -> Result<JacobianSampleSet, CertifyError> {
    strategy.validate()?;
    let eps_bdry = strategy.eps_bdry.unwrap_or_else(|| f.boundary_tolerance());
    let mut rng = ChaCha8Rng::seed_from_u64(strategy.seed);

    let mut candidates: Vec<(Vec<f64>, SampleOrigin)> = grid_points(f, strategy.grid)
        .into_iter()
        .map(|p| (p, SampleOrigin::Grid))
        .collect();
    candidates
        .extend((0..strategy.random).map(|_| (f.domain.sample(&mut rng), SampleOrigin::Random)));

    let gs = boundary_functions(f);
    if strategy.boundary_refine > 0 && !gs.is_empty() {
        let per_g = strategy.boundary_refine.div_ceil(gs.len());
        for g in &gs {
            for z in zero_set_points(f, g, per_g, &mut rng) {
                let Ok(d) = g.eval_dual(&z) else { continue };
                let gn = d.grad.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(gn.is_finite() && gn > 0.0) {
                    continue;
                }
                // offsets of 2..9 eps_bdry along the normal, both sides
                let s = eps_bdry * rng.random_range(2.0..9.0);
                for sign in [1.0, -1.0] {
                    let p: Vec<f64> = z
                        .iter()
                        .zip(&d.grad)
                        .map(|(x, gi)| x + sign * s * gi / gn)
                        .collect();
                    if f.domain.contains(&p) {
                        candidates.push((p, SampleOrigin::Boundary));
                    }
                }
            }
        }
    }

    let total = candidates.len();
    let evaluated = strategy.exec.map(&candidates, |(p, origin)| {
        let jac = f.jacobian_with(p, eps_bdry);
        match jac {
            Ok(JacobianAt::Matrix(a)) if a.iter().all(|v| v.is_finite()) => {
                let piece = f.piece_index(p).ok()?;
                let val = f.eval(p).ok()?;
                let norm = val.iter().map(|v| v * v).sum::<f64>().sqrt();
                Some(Ok((
                    MatrixSample {
                        point: p.clone(),
                        matrix: a,
                        piece,
                        origin: *origin,
                    },
                    norm,
                )))
            }
            _ => Some(Err(p.clone())),
        }
    });

    let mut samples = Vec::new();
    let mut nondifferentiable = Vec::new();
    let mut scale = 0.0f64;
    for r in evaluated.into_iter().flatten() {
        match r {
            Ok((s, norm)) => {
                scale = scale.max(norm);
                samples.push(s);
            }
            Err(p) => nondifferentiable.push(p),
        }
    }
    if samples.is_empty() {
        return Err(CertifyError::NoSamples(total));
    }
    let sigma_max = samples
        .iter()
        .map(|s| matgeo::spectral_norm(&s.matrix))
        .fold(0.0, f64::max);
    Ok(JacobianSampleSet {
        samples,
        nondifferentiable,
        map_hash: f.fingerprint(),
        strategy: strategy.clone(),
        m: f.m,
        n: f.n,
        sigma_max,
        map_scale: if scale > 0.0 { scale } else { 1.0 },
        eps_bdry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapdsl::parse_map;

    fn strategy(grid: usize, random: usize) -> SampleStrategy {
        SampleStrategy {
            grid,
            random,
            ..SampleStrategy::default()
        }
    }

    #[test]
    fn cubic_grid_is_diagonal() {
        let f = parse_map("map R2->R2 { piece true: (x^3, y^3) }").unwrap();
        let s = sample_jacobians(&f, &strategy(11, 0)).unwrap();
        assert_eq!(s.len(), 121);
        for smp in &s.samples {
            let (x, y) = (smp.point[0], smp.point[1]);
            let want = nalgebra::dmatrix![3.0 * x * x, 0.0; 0.0, 3.0 * y * y];
            assert!((&smp.matrix - want).abs().max() < 1e-14);
        }
    }

    #[test]
    fn two_piece_has_both_forms() {
        let f = parse_map("map R2->R2 { piece x>=0: (x+y^3, x); piece true: (x+y^3, 0) }").unwrap();
        let s = sample_jacobians(&f, &strategy(11, 100)).unwrap();
        let mut seen = [false, false];
        for smp in &s.samples {
            let a = &smp.matrix;
            assert_eq!(a[(0, 0)], 1.0);
            assert!(a[(0, 1)] >= 0.0 && a[(1, 1)] == 0.0);
            seen[if a[(1, 0)] == 1.0 { 0 } else { 1 }] = true;
        }
        assert_eq!(seen, [true, true]);
        // grid column x = 0 lies on the boundary
        assert!(s.nondifferentiable.iter().filter(|p| p[0] == 0.0).count() >= 11);
        let boundary: Vec<_> = s
            .samples
            .iter()
            .filter(|x| x.origin == SampleOrigin::Boundary)
            .collect();
        assert!(!boundary.is_empty());
        for b in boundary {
            let d = b.point[0].abs();
            assert!(d >= s.eps_bdry && d <= 10.0 * s.eps_bdry, "{d}");
        }
    }

    #[test]
    fn excluded_origin_is_not_sampled() {
        let f = parse_map(
            "map R2->R2 { domain ball center (0,0) radius 1; exclude (0,0);
             piece x^2+y^2 > 0: (x*(x^2-3*y^2)/(x^2+y^2), y*(3*x^2-y^2)/(x^2+y^2)); piece true: (0,0) }",
        )
        .unwrap();
        let s = sample_jacobians(&f, &strategy(11, 200)).unwrap();
        assert!(s.samples.iter().all(|x| x.point.iter().any(|v| *v != 0.0)));
        assert!(s.nondifferentiable.iter().any(|p| p == &vec![0.0, 0.0]));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let f = parse_map("map R2->R2 { piece x>=0: (x+y^3, x); piece true: (x+y^3, 0) }").unwrap();
        let mut st = strategy(7, 50);
        st.exec = Exec::Sequential;
        let a = sample_jacobians(&f, &st).unwrap();
        st.exec = Exec::Parallel;
        let b = sample_jacobians(&f, &st).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn rejects_bad_strategy() {
        let f = parse_map("map R1->R1 { piece true: (x) }").unwrap();
        assert!(sample_jacobians(&f, &strategy(0, 0)).is_err());
        assert!(sample_jacobians(&f, &strategy(1, 10)).is_err());
    }
}
