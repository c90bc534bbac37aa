use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::expr::{var_name, EvalFault, Expr};
use super::MapError;

/// Default relative boundary-exclusion tolerance (times domain diameter).
pub const BOUNDARY_REL_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Ge,
    Gt,
    Le,
    Lt,
}

/// One guard inequality `lhs op rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
}

impl Comparison {
    /// Signed slack, nonnegative (positive for strict ops) when the guard holds.
    pub fn slack(&self, x: &[f64]) -> Result<f64, EvalFault> {
        let l = self.lhs.eval(x)?;
        let r = self.rhs.eval(x)?;
        Ok(match self.op {
            CmpOp::Ge | CmpOp::Gt => l - r,
            CmpOp::Le | CmpOp::Lt => r - l,
        })
    }

    pub fn holds(&self, x: &[f64]) -> Result<bool, EvalFault> {
        let s = self.slack(x)?;
        Ok(match self.op {
            CmpOp::Ge | CmpOp::Le => s >= 0.0,
            CmpOp::Gt | CmpOp::Lt => s > 0.0,
        })
    }

    /// Slack as an expression, for gradient queries.
    pub fn slack_expr(&self) -> Expr {
        match self.op {
            CmpOp::Ge | CmpOp::Gt => {
                Expr::Sub(Box::new(self.lhs.clone()), Box::new(self.rhs.clone()))
            }
            CmpOp::Le | CmpOp::Lt => {
                Expr::Sub(Box::new(self.rhs.clone()), Box::new(self.lhs.clone()))
            }
        }
    }
}

/// First-order estimate of the distance from `x` to the zero set of `g`:
/// `|g| / |grad g|`. Zero when `g` vanishes; falls back to `|g|` where the
/// gradient is unavailable.
pub fn zero_set_distance(g: &Expr, x: &[f64]) -> Result<f64, EvalFault> {
    match g.eval_dual(x) {
        Ok(d) => {
            if d.val == 0.0 {
                return Ok(0.0);
            }
            let gn = d.grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            Ok(if gn > 0.0 {
                d.val.abs() / gn
            } else {
                f64::INFINITY
            })
        }
        Err(EvalFault::Kink) => Ok(g.eval(x)?.abs()),
        Err(e) => Err(e),
    }
}

/// Conjunction of guards; empty means `true`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PieceRegion {
    pub guards: Vec<Comparison>,
}

impl PieceRegion {
    pub fn contains(&self, x: &[f64]) -> Result<bool, EvalFault> {
        for g in &self.guards {
            if !g.holds(x)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub region: PieceRegion,
    pub components: Vec<Expr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    /// Closed ball, optionally with an open inner hole (annulus).
    Ball {
        center: Vec<f64>,
        radius: f64,
        inner: f64,
    },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lo, .. } => lo.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt(),
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Membership with a small absolute slack for points on the boundary.
    pub fn contains(&self, x: &[f64]) -> bool {
        let slack = 1e-12 * self.diameter().max(1.0);
        match self {
            Domain::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *v >= a - slack && *v <= b + slack),
            Domain::Ball {
                center,
                radius,
                inner,
            } => {
                let r = dist(x, center);
                r <= radius + slack && (*inner == 0.0 || r >= inner - slack)
            }
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Domain::Box { lo, hi } => (lo.clone(), hi.clone()),
            Domain::Ball { center, radius, .. } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Uniform point in the domain (rejection sampling for balls).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let (lo, hi) = self.bounds();
        loop {
            let p: Vec<f64> = lo
                .iter()
                .zip(&hi)
                .map(|(a, b)| a + (b - a) * rng.random::<f64>())
                .collect();
            if self.contains(&p) {
                return p;
            }
        }
    }

    /// Largest `t <= t_max` with `p + t*dir` inside, assuming `p` is inside
    /// (convex domains only; annuli are treated through their outer ball).
    pub fn clip_ray(&self, p: &[f64], dir: &[f64], t_max: f64) -> f64 {
        match self {
            Domain::Box { lo, hi } => {
                let mut t = t_max;
                for i in 0..p.len() {
                    if dir[i] > 0.0 {
                        t = t.min((hi[i] - p[i]) / dir[i]);
                    } else if dir[i] < 0.0 {
                        t = t.min((lo[i] - p[i]) / dir[i]);
                    }
                }
                t.max(0.0)
            }
            Domain::Ball { center, radius, .. } => {
                // |p - c + t d|^2 = r^2
                let pc: Vec<f64> = p.iter().zip(center).map(|(a, b)| a - b).collect();
                let a = dot(dir, dir);
                let b = 2.0 * dot(&pc, dir);
                let c = dot(&pc, &pc) - radius * radius;
                if a == 0.0 {
                    return t_max;
                }
                let disc = (b * b - 4.0 * a * c).max(0.0);
                let t = (-b + disc.sqrt()) / (2.0 * a);
                t.clamp(0.0, t_max)
            }
        }
    }
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Why a Jacobian is not reported at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NonDiffReason {
    PieceBoundary,
    DeclaredLocus,
    Kink,
    Excluded,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JacobianAt {
    Matrix(DMatrix<f64>),
    NonDifferentiable(NonDiffReason),
}

impl JacobianAt {
    pub fn matrix(self) -> Option<DMatrix<f64>> {
        match self {
            JacobianAt::Matrix(m) => Some(m),
            JacobianAt::NonDifferentiable(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DirectionalDerivative {
    Finite(Vec<f64>),
    /// Difference quotients grow without bound as the step shrinks.
    Infinite,
}

/// A map `R^m -> R^n` given by guarded closed-form pieces, first match wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseMap {
    pub m: usize,
    pub n: usize,
    pub pieces: Vec<Piece>,
    pub domain: Domain,
    pub excluded: Vec<Vec<f64>>,
    /// Expressions whose zero sets are declared nondifferentiable.
    pub locus: Vec<Expr>,
}

impl PiecewiseMap {
    pub fn new(
        m: usize,
        n: usize,
        pieces: Vec<Piece>,
        domain: Domain,
        excluded: Vec<Vec<f64>>,
        locus: Vec<Expr>,
    ) -> Result<Self, MapError> {
        if domain.dim() != m {
            return Err(MapError::Dimension(format!(
                "domain has dimension {}, expected {m}",
                domain.dim()
            )));
        }
        for p in &pieces {
            if p.components.len() != n {
                return Err(MapError::Dimension(format!(
                    "piece has {} components, expected {n}",
                    p.components.len()
                )));
            }
            let arity = p
                .components
                .iter()
                .map(Expr::arity)
                .chain(
                    p.region
                        .guards
                        .iter()
                        .map(|g| g.lhs.arity().max(g.rhs.arity())),
                )
                .max()
                .unwrap_or(0);
            if arity > m {
                return Err(MapError::Dimension(format!(
                    "piece uses {} variables but the domain is R{m}",
                    arity
                )));
            }
        }
        Ok(PiecewiseMap {
            m,
            n,
            pieces,
            domain,
            excluded,
            locus,
        })
    }

    /// Single-piece map on the default box `[-1,1]^m`.
    pub fn from_components(m: usize, components: Vec<Expr>) -> Result<Self, MapError> {
        let n = components.len();
        PiecewiseMap::new(
            m,
            n,
            vec![Piece {
                region: PieceRegion::default(),
                components,
            }],
            Domain::Box {
                lo: vec![-1.0; m],
                hi: vec![1.0; m],
            },
            Vec::new(),
            Vec::new(),
        )
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self, MapError> {
        if domain.dim() != self.m {
            return Err(MapError::Dimension("domain dimension mismatch".into()));
        }
        self.domain = domain;
        Ok(self)
    }

    /// Stable hex digest of the canonical printed form.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_string().as_bytes()))
    }

    pub fn boundary_tolerance(&self) -> f64 {
        BOUNDARY_REL_TOL * self.domain.diameter()
    }

    fn fault(e: EvalFault, x: &[f64]) -> MapError {
        match e {
            EvalFault::Pole | EvalFault::Kink => MapError::Pole(x.to_vec()),
        }
    }

    /// Index of the first piece whose region contains `x`.
    pub fn piece_index(&self, x: &[f64]) -> Result<usize, MapError> {
        for (k, p) in self.pieces.iter().enumerate() {
            if p.region.contains(x).map_err(|e| Self::fault(e, x))? {
                return Ok(k);
            }
        }
        Err(MapError::NoMatchingPiece(x.to_vec()))
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, MapError> {
        let k = self.piece_index(x)?;
        self.eval_piece(k, x)
    }

    /// Evaluates piece `k`'s components at `x`, ignoring its guards.
    pub fn eval_piece(&self, k: usize, x: &[f64]) -> Result<Vec<f64>, MapError> {
        self.pieces[k]
            .components
            .iter()
            .map(|c| c.eval(x).map_err(|e| Self::fault(e, x)))
            .collect()
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<JacobianAt, MapError> {
        self.jacobian_with(x, self.boundary_tolerance())
    }

    /// Forward-mode Jacobian, or the reason none is reported: `x` within
    /// `eps_bdry` of a piece boundary, a declared locus or an excluded point,
    /// or a kink of `abs`/fractional roots.
    pub fn jacobian_with(&self, x: &[f64], eps_bdry: f64) -> Result<JacobianAt, MapError> {
        if self.excluded.iter().any(|e| dist(e, x) <= eps_bdry) {
            return Ok(JacobianAt::NonDifferentiable(NonDiffReason::Excluded));
        }
        let k = self.piece_index(x)?;
        for piece in &self.pieces[..=k] {
            for g in &piece.region.guards {
                let d = zero_set_distance(&g.slack_expr(), x).map_err(|e| Self::fault(e, x))?;
                if d <= eps_bdry {
                    return Ok(JacobianAt::NonDifferentiable(NonDiffReason::PieceBoundary));
                }
            }
        }
        for g in &self.locus {
            let d = zero_set_distance(g, x).map_err(|e| Self::fault(e, x))?;
            if d <= eps_bdry {
                return Ok(JacobianAt::NonDifferentiable(NonDiffReason::DeclaredLocus));
            }
        }
        let mut jac = DMatrix::zeros(self.n, self.m);
        for (i, c) in self.pieces[k].components.iter().enumerate() {
            match c.eval_dual(x) {
                Ok(d) => {
                    if d.grad.iter().any(|v| !v.is_finite()) {
                        return Ok(JacobianAt::NonDifferentiable(NonDiffReason::Kink));
                    }
                    for (j, g) in d.grad.iter().enumerate() {
                        jac[(i, j)] = *g;
                    }
                }
                Err(EvalFault::Kink) => {
                    return Ok(JacobianAt::NonDifferentiable(NonDiffReason::Kink))
                }
                Err(EvalFault::Pole) => return Err(MapError::Pole(x.to_vec())),
            }
        }
        Ok(JacobianAt::Matrix(jac))
    }

    /// Central finite-difference Jacobian with step `h`, evaluated through
    /// `eval` (used as an independent cross-check and as a fallback).
    pub fn jacobian_fd(&self, x: &[f64], h: f64) -> Result<DMatrix<f64>, MapError> {
        let mut jac = DMatrix::zeros(self.n, self.m);
        let mut xp = x.to_vec();
        for j in 0..self.m {
            xp[j] = x[j] + h;
            let fp = self.eval(&xp)?;
            xp[j] = x[j] - h;
            let fm = self.eval(&xp)?;
            xp[j] = x[j];
            for i in 0..self.n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }

    /// One-sided derivative along unit `v` by difference quotients at
    /// `h, h/2` with one Richardson step. Reports `Infinite` when the quotient
    /// norms keep growing over five halvings and end above `1/eps_div`.
    pub fn directional_derivative(
        &self,
        x: &[f64],
        v: &[f64],
        h: f64,
        eps_div: f64,
    ) -> Result<DirectionalDerivative, MapError> {
        assert!(h > 0.0, "step must be positive");
        let f0 = self.eval(x)?;
        if !self.domain.contains(x) {
            return Err(MapError::DomainExit(x.to_vec()));
        }
        let quotient = |step: f64| -> Result<Vec<f64>, MapError> {
            let xs: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + step * b).collect();
            if !self.domain.contains(&xs) {
                return Err(MapError::DomainExit(xs));
            }
            let fs = self.eval(&xs)?;
            Ok(fs.iter().zip(&f0).map(|(a, b)| (a - b) / step).collect())
        };
        let qs = (0..5)
            .map(|k| quotient(h / f64::powi(2.0, k)))
            .collect::<Result<Vec<_>, _>>()?;
        let norms: Vec<f64> = qs.iter().map(|q| dot(q, q).sqrt()).collect();
        let growing = norms.windows(2).all(|w| w[1] >= 1.05 * w[0]);
        if growing && norms[4] > 1.0 / eps_div {
            return Ok(DirectionalDerivative::Infinite);
        }
        let rich = qs[1].iter().zip(&qs[0]).map(|(a, b)| 2.0 * a - b).collect();
        Ok(DirectionalDerivative::Finite(rich))
    }

    /// Samples boundary points between adjacent pieces and returns the
    /// largest value gap between the two pieces' formulas there.
    pub fn continuity_audit(
        &self,
        points_per_guard: usize,
        seed: u64,
    ) -> Result<ContinuityAudit, MapError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eta = 1e-6 * self.domain.diameter();
        let mut audit = ContinuityAudit::default();
        for (pk, piece) in self.pieces.iter().enumerate() {
            for (gk, guard) in piece.region.guards.iter().enumerate() {
                let g = guard.slack_expr();
                let mut found = 0;
                for _ in 0..points_per_guard * 40 {
                    if found >= points_per_guard {
                        break;
                    }
                    let a = self.domain.sample(&mut rng);
                    let b = self.domain.sample(&mut rng);
                    let Some(p) = bisect_zero(&g, &a, &b) else {
                        continue;
                    };
                    let Ok(gd) = g.eval_dual(&p) else { continue };
                    let gn = dot(&gd.grad, &gd.grad).sqrt();
                    if gn == 0.0 {
                        continue;
                    }
                    let plus: Vec<f64> = p
                        .iter()
                        .zip(&gd.grad)
                        .map(|(x, d)| x + eta * d / gn)
                        .collect();
                    let minus: Vec<f64> = p
                        .iter()
                        .zip(&gd.grad)
                        .map(|(x, d)| x - eta * d / gn)
                        .collect();
                    let (Ok(i), Ok(j)) = (self.piece_index(&plus), self.piece_index(&minus)) else {
                        continue;
                    };
                    found += 1;
                    audit.boundary_points += 1;
                    if i == j {
                        continue;
                    }
                    let fi = self.eval_piece(i, &p)?;
                    let fj = self.eval_piece(j, &p)?;
                    let gap = dist(&fi, &fj);
                    if gap > audit.max_gap {
                        audit.max_gap = gap;
                        audit.worst = Some((p.clone(), pk, gk));
                    }
                }
            }
        }
        Ok(audit)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContinuityAudit {
    pub boundary_points: usize,
    pub max_gap: f64,
    /// Point, piece index and guard index of the largest gap.
    pub worst: Option<(Vec<f64>, usize, usize)>,
}

/// Zero of `g` on the segment `[a, b]` by bisection, when `g` changes sign.
pub fn bisect_zero(g: &Expr, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let at = |t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    let ga = g.eval(a).ok()?;
    let gb = g.eval(b).ok()?;
    if ga == 0.0 {
        return Some(a.to_vec());
    }
    if ga.signum() == gb.signum() {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let gm = g.eval(&at(mid)).ok()?;
        if gm == 0.0 {
            return Some(at(mid));
        }
        if gm.signum() == ga.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(at(0.5 * (lo + hi)))
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
        };
        write!(f, "{} {op} {}", self.lhs, self.rhs)
    }
}

fn fmt_tuple(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|c| format!("{c:?}")).collect();
    format!("({})", parts.join(", "))
}

impl fmt::Display for PiecewiseMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "map R{}->R{} {{", self.m, self.n)?;
        match &self.domain {
            Domain::Box { lo, hi } => {
                let ivs: Vec<String> = lo
                    .iter()
                    .zip(hi)
                    .map(|(a, b)| format!("[{a:?}, {b:?}]"))
                    .collect();
                writeln!(f, "  domain box {};", ivs.join(" x "))?;
            }
            Domain::Ball {
                center,
                radius,
                inner,
            } => {
                write!(
                    f,
                    "  domain ball center {} radius {radius:?}",
                    fmt_tuple(center)
                )?;
                if *inner > 0.0 {
                    write!(f, " inner {inner:?}")?;
                }
                writeln!(f, ";")?;
            }
        }
        for e in &self.excluded {
            writeln!(f, "  exclude {};", fmt_tuple(e))?;
        }
        for l in &self.locus {
            writeln!(f, "  locus {l};")?;
        }
        for p in &self.pieces {
            let guard = if p.region.guards.is_empty() {
                "true".to_string()
            } else {
                p.region
                    .guards
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(" && ")
            };
            let comps: Vec<String> = p.components.iter().map(ToString::to_string).collect();
            writeln!(f, "  piece {guard}: ({});", comps.join(", "))?;
        }
        write!(f, "}}")
    }
}

/// Name of coordinate `i` as printed.
pub fn coordinate_name(i: usize) -> String {
    var_name(i)
}
