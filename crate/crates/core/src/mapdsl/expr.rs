//! Expression trees over the variables `x1..xm` and their evaluation, both
//! plain (`f64`) and forward-mode (`Dual`).

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Why an expression could not be evaluated (or differentiated) at a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalFault {
    /// Division by zero, or a negative power of zero.
    Pole,
    /// `abs` at zero, or a fractional root with exponent in (0,1) at zero.
    /// Only raised when derivatives are requested.
    Kink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    /// Zero-based variable index.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Integer power, exponent may be negative.
    Pow(Box<Expr>, i32),
    /// Sign-aware real power `t^(p/q)` with `q` odd, `gcd(p,q) = 1`, `q > 1`.
    Root(Box<Expr>, i64, i64),
    Abs(Box<Expr>),
}

impl Expr {
    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    /// Largest variable index used plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Root(a, _, _) | Expr::Abs(a) => a.arity(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.arity().max(b.arity())
            }
        }
    }

    /// Builds `base^(p/q)`, reducing the fraction and picking the integer form
    /// when the denominator collapses to one. `q` must be odd after reduction.
    pub fn rational_power(base: Expr, p: i64, q: i64) -> Option<Expr> {
        if q == 0 {
            return None;
        }
        let (mut p, mut q) = if q < 0 { (-p, -q) } else { (p, q) };
        let g = gcd(p.unsigned_abs(), q.unsigned_abs()) as i64;
        if g > 1 {
            p /= g;
            q /= g;
        }
        if q == 1 {
            return i32::try_from(p).ok().map(|k| Expr::Pow(Box::new(base), k));
        }
        if q % 2 == 0 {
            return None;
        }
        Some(Expr::Root(Box::new(base), p, q))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalFault> {
        self.eval_generic::<f64>(x, &())
    }

    /// Value and gradient with respect to all `x.len()` variables.
    pub fn eval_dual(&self, x: &[f64]) -> Result<Dual, EvalFault> {
        self.eval_generic::<Dual>(x, &x.len())
    }

    fn eval_generic<S: Scalar>(&self, x: &[f64], ctx: &S::Ctx) -> Result<S, EvalFault> {
        Ok(match self {
            Expr::Const(c) => S::constant(*c, ctx),
            Expr::Var(i) => S::variable(x[*i], *i, ctx),
            Expr::Neg(a) => -a.eval_generic::<S>(x, ctx)?,
            Expr::Add(a, b) => a.eval_generic::<S>(x, ctx)? + b.eval_generic::<S>(x, ctx)?,
            Expr::Sub(a, b) => a.eval_generic::<S>(x, ctx)? - b.eval_generic::<S>(x, ctx)?,
            Expr::Mul(a, b) => a.eval_generic::<S>(x, ctx)? * b.eval_generic::<S>(x, ctx)?,
            Expr::Div(a, b) => {
                let den = b.eval_generic::<S>(x, ctx)?;
                if den.value() == 0.0 {
                    return Err(EvalFault::Pole);
                }
                a.eval_generic::<S>(x, ctx)? / den
            }
            Expr::Pow(a, k) => a.eval_generic::<S>(x, ctx)?.powi(*k)?,
            Expr::Root(a, p, q) => a.eval_generic::<S>(x, ctx)?.signed_root(*p, *q)?,
            Expr::Abs(a) => a.eval_generic::<S>(x, ctx)?.abs()?,
        })
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.max(1)
}

/// Real `t^(p/q)` for odd `q`, extended to negative `t` through the real
/// odd root: equals `|t|^(p/q)` for even `p` and `sign(t)|t|^(p/q)` for odd `p`.
pub fn sroot(t: f64, p: i64, q: i64) -> f64 {
    let mag = t.abs().powf(p as f64 / q as f64);
    if t < 0.0 && p % 2 != 0 {
        -mag
    } else {
        mag
    }
}

trait Scalar:
    Sized
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    type Ctx;
    fn constant(c: f64, ctx: &Self::Ctx) -> Self;
    fn variable(v: f64, index: usize, ctx: &Self::Ctx) -> Self;
    fn value(&self) -> f64;
    fn powi(self, k: i32) -> Result<Self, EvalFault>;
    fn signed_root(self, p: i64, q: i64) -> Result<Self, EvalFault>;
    fn abs(self) -> Result<Self, EvalFault>;
}

impl Scalar for f64 {
    type Ctx = ();

    fn constant(c: f64, _: &()) -> Self {
        c
    }
    fn variable(v: f64, _: usize, _: &()) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn powi(self, k: i32) -> Result<Self, EvalFault> {
        if k < 0 && self == 0.0 {
            return Err(EvalFault::Pole);
        }
        Ok(f64::powi(self, k))
    }
    fn signed_root(self, p: i64, q: i64) -> Result<Self, EvalFault> {
        if p < 0 && self == 0.0 {
            return Err(EvalFault::Pole);
        }
        Ok(sroot(self, p, q))
    }
    fn abs(self) -> Result<Self, EvalFault> {
        Ok(f64::abs(self))
    }
}

/// First-order multivariate dual number: a value and its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub val: f64,
    pub grad: Vec<f64>,
}

impl Dual {
    fn scale_grad(mut self, factor: f64, new_val: f64) -> Self {
        for g in &mut self.grad {
            *g *= factor;
        }
        self.val = new_val;
        self
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(mut self, rhs: Dual) -> Dual {
        self.val += rhs.val;
        self.grad
            .iter_mut()
            .zip(&rhs.grad)
            .for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(mut self, rhs: Dual) -> Dual {
        self.val -= rhs.val;
        self.grad
            .iter_mut()
            .zip(&rhs.grad)
            .for_each(|(a, b)| *a -= b);
        self
    }
}

impl Mul for Dual {
    type Output = Dual;
    // product rule
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(mut self, rhs: Dual) -> Dual {
        let (u, v) = (self.val, rhs.val);
        self.grad
            .iter_mut()
            .zip(&rhs.grad)
            .for_each(|(a, b)| *a = *a * v + u * b);
        self.val = u * v;
        self
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(mut self, rhs: Dual) -> Dual {
        let (u, v) = (self.val, rhs.val);
        let v2 = v * v;
        self.grad
            .iter_mut()
            .zip(&rhs.grad)
            .for_each(|(a, b)| *a = (*a * v - u * b) / v2);
        self.val = u / v;
        self
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        let v = -self.val;
        self.scale_grad(-1.0, v)
    }
}

impl Scalar for Dual {
    type Ctx = usize;

    fn constant(c: f64, nvars: &usize) -> Self {
        Dual {
            val: c,
            grad: vec![0.0; *nvars],
        }
    }
    fn variable(v: f64, index: usize, nvars: &usize) -> Self {
        let mut grad = vec![0.0; *nvars];
        grad[index] = 1.0;
        Dual { val: v, grad }
    }
    fn value(&self) -> f64 {
        self.val
    }
    fn powi(self, k: i32) -> Result<Self, EvalFault> {
        let t = self.val;
        if k == 0 {
            return Ok(self.scale_grad(0.0, 1.0));
        }
        if k < 0 && t == 0.0 {
            return Err(EvalFault::Pole);
        }
        let d = f64::from(k) * t.powi(k - 1);
        Ok(self.scale_grad(d, t.powi(k)))
    }
    fn signed_root(self, p: i64, q: i64) -> Result<Self, EvalFault> {
        let t = self.val;
        let r = p as f64 / q as f64;
        if t == 0.0 {
            if p < 0 {
                return Err(EvalFault::Pole);
            }
            if r < 1.0 {
                return Err(EvalFault::Kink);
            }
            return Ok(self.scale_grad(0.0, 0.0));
        }
        let s = sroot(t, p, q);
        Ok(self.scale_grad(r * s / t, s))
    }
    fn abs(self) -> Result<Self, EvalFault> {
        let t = self.val;
        if t == 0.0 {
            return Err(EvalFault::Kink);
        }
        Ok(self.scale_grad(t.signum(), t.abs()))
    }
}

// Printing. Every compound node is parenthesised so the output re-parses to
// the same tree; numbers use the shortest round-trip representation.

pub(crate) fn var_name(i: usize) -> String {
    format!("x{}", i + 1)
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "({c:?})")
            }
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => f.write_str(&var_name(*i)),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) if *k < 0 => write!(f, "({a}^({k}))"),
            Expr::Pow(a, k) => write!(f, "({a}^{k})"),
            Expr::Root(a, p, q) => write!(f, "({a}^({p}/{q}))"),
            Expr::Abs(a) => write!(f, "abs({a})"),
        }
    }
}
