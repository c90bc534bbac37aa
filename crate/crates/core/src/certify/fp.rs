use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mapdsl::{
    dist, parse_expr, CmpOp, Comparison, Domain, Expr, MapError, Piece, PieceRegion, PiecewiseMap,
};

/// Quasi-homogeneous generator `P` with `P(t^w x) = t^d P(x)` and the
/// weights of the map `F_P(x) = (P^w1 x1, ..., P^wn xn)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FpSpec {
    pub weights: Vec<Ratio<i64>>,
    pub degree: Ratio<i64>,
    pub generator: Expr,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FpError {
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error("exponent {0} has an even denominator")]
    EvenDenominator(Ratio<i64>),
    #[error("P is not positive at {0:?}")]
    NonPositive(Vec<f64>),
    #[error("P(t^w x) != t^d P(x) at x = {x:?}, t = {t} (relative error {rel:.3e})")]
    Homogeneity { x: Vec<f64>, t: f64, rel: f64 },
    #[error("{0:?} leaves the domain of the second map")]
    DomainExit(Vec<f64>),
    #[error("evaluation failed at {0:?}")]
    Eval(Vec<f64>),
    #[error(transparent)]
    Map(#[from] MapError),
}

const HOMOGENEITY_TOL: f64 = 1e-8;
const PROBES: usize = 100;

impl FpSpec {
    /// Parses weights and degree written as `p/q` or integers and the
    /// generator in the map expression syntax.
    pub fn parse(weights: &[String], degree: &str, generator: &str) -> Result<Self, FpError> {
        let rat = |s: &str| -> Result<Ratio<i64>, FpError> {
            s.trim()
                .parse::<Ratio<i64>>()
                .map_err(|e| FpError::Invalid(format!("bad rational {s:?}: {e}")))
        };
        let weights = weights
            .iter()
            .map(|w| rat(w))
            .collect::<Result<Vec<_>, _>>()?;
        let spec = FpSpec {
            generator: parse_expr(generator, Some(weights.len()))?,
            degree: rat(degree)?,
            weights,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// `d'` with `(d + 1)(d' + 1) = 1`.
    pub fn conjugate_degree(&self) -> Ratio<i64> {
        let one = Ratio::from_integer(1);
        one / (self.degree + one) - one
    }

    pub fn validate(&self) -> Result<(), FpError> {
        let zero = Ratio::from_integer(0);
        if self.weights.is_empty() {
            return Err(FpError::Invalid("no weights".into()));
        }
        if let Some(w) = self.weights.iter().find(|w| **w <= zero) {
            return Err(FpError::Invalid(format!("weight {w} is not positive")));
        }
        if self.degree + Ratio::from_integer(1) <= zero {
            return Err(FpError::Invalid(format!(
                "degree {} needs d + 1 > 0",
                self.degree
            )));
        }
        if self.generator.arity() > self.dim() {
            return Err(FpError::Invalid(
                "generator uses more variables than weights".into(),
            ));
        }
        let q = self.conjugate_degree() + Ratio::from_integer(1);
        for w in &self.weights {
            for e in [*w, -q * w] {
                if e.denom() % 2 == 0 {
                    return Err(FpError::EvenDenominator(e));
                }
            }
        }
        Ok(())
    }

    /// Homogeneity at `t = 1/2, 2` and positivity on seeded points of the
    /// cube `[-1, 1]^n`.
    pub fn check_generator(&self, seed: u64) -> Result<(), FpError> {
        let n = self.dim();
        let cube = Domain::Box {
            lo: vec![-1.0; n],
            hi: vec![1.0; n],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = *self.degree.numer() as f64 / *self.degree.denom() as f64;
        for _ in 0..PROBES {
            let x = cube.sample(&mut rng);
            let p = self
                .generator
                .eval(&x)
                .map_err(|_| FpError::Eval(x.clone()))?;
            if p.is_nan() || p <= 0.0 {
                return Err(FpError::NonPositive(x));
            }
            for t in [0.5f64, 2.0] {
                let tx: Vec<f64> = x
                    .iter()
                    .zip(&self.weights)
                    .map(|(xi, w)| t.powf(*w.numer() as f64 / *w.denom() as f64) * xi)
                    .collect();
                let lhs = self
                    .generator
                    .eval(&tx)
                    .map_err(|_| FpError::Eval(tx.clone()))?;
                let rhs = t.powf(d) * p;
                let rel = (lhs - rhs).abs() / rhs.abs();
                if rel > HOMOGENEITY_TOL {
                    return Err(FpError::Homogeneity { x, t, rel });
                }
            }
        }
        Ok(())
    }
}

fn scaled_map(
    n: usize,
    generator: &Expr,
    exps: &[Ratio<i64>],
    domain: Domain,
) -> Result<PiecewiseMap, FpError> {
    let components = exps
        .iter()
        .enumerate()
        .map(|(i, e)| {
            Expr::rational_power(generator.clone(), *e.numer(), *e.denom())
                .map(|pw| Expr::Mul(Box::new(pw), Box::new(Expr::Var(i))))
                .ok_or(FpError::EvenDenominator(*e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut r2 = Expr::Pow(Box::new(Expr::Var(0)), 2);
    for i in 1..n {
        r2 = Expr::Add(Box::new(r2), Box::new(Expr::Pow(Box::new(Expr::Var(i)), 2)));
    }
    let guard = Comparison {
        lhs: r2,
        op: CmpOp::Gt,
        rhs: Expr::Const(0.0),
    };
    let pieces = vec![
        Piece {
            region: PieceRegion {
                guards: vec![guard],
            },
            components,
        },
        Piece {
            region: PieceRegion::default(),
            components: vec![Expr::Const(0.0); n],
        },
    ];
    Ok(PiecewiseMap::new(
        n,
        n,
        pieces,
        domain,
        vec![vec![0.0; n]],
        Vec::new(),
    )?)
}

/// Builds `F_P` on `[-1, 1]^n` and its inverse `F_Q`, `Q = P^-(d'+1)`, on a
/// box covering the image of `F_P`.
pub fn build_fp(spec: &FpSpec) -> Result<(PiecewiseMap, PiecewiseMap), FpError> {
    spec.validate()?;
    spec.check_generator(0)?;
    let n = spec.dim();
    let cube = Domain::Box {
        lo: vec![-1.0; n],
        hi: vec![1.0; n],
    };
    let fp = scaled_map(n, &spec.generator, &spec.weights, cube.clone())?;

    // image bound from dense samples, padded
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bound = vec![0.0f64; n];
    for _ in 0..4000 {
        let x = cube.sample(&mut rng);
        let y = fp.eval(&x)?;
        for (b, v) in bound.iter_mut().zip(&y) {
            *b = b.max(v.abs());
        }
    }
    let hi: Vec<f64> = bound.iter().map(|b| (1.5 * b).max(1.0)).collect();
    let image_box = Domain::Box {
        lo: hi.iter().map(|h| -h).collect(),
        hi,
    };

    let q = spec.conjugate_degree() + Ratio::from_integer(1);
    let exps: Vec<Ratio<i64>> = spec.weights.iter().map(|w| -q * w).collect();
    let fq = scaled_map(n, &spec.generator, &exps, image_box)?;
    Ok((fp, fq))
}

/// Largest of `|G(F(x)) - x|` and `|F(G(y)) - y|` over seeded probes `x`
/// in the domain of `F` and `y = F(x')`.
pub fn verify_inverse(
    f: &PiecewiseMap,
    g: &PiecewiseMap,
    probes: usize,
    seed: u64,
) -> Result<f64, FpError> {
    if f.m != g.n || f.n != g.m {
        return Err(FpError::Invalid(format!(
            "R{}->R{} and R{}->R{} do not compose",
            f.m, f.n, g.m, g.n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let x = f.domain.sample(&mut rng);
        let y = f.eval(&x)?;
        if !g.domain.contains(&y) {
            return Err(FpError::DomainExit(y));
        }
        worst = worst.max(dist(&g.eval(&y)?, &x));
        let x2 = f.domain.sample(&mut rng);
        let y2 = f.eval(&x2)?;
        if !g.domain.contains(&y2) {
            return Err(FpError::DomainExit(y2));
        }
        let back = g.eval(&y2)?;
        worst = worst.max(dist(&f.eval(&back)?, &y2));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapdsl::parse_map;

    fn spec(w: &[&str], d: &str, p: &str) -> Result<FpSpec, FpError> {
        FpSpec::parse(&w.iter().map(|s| s.to_string()).collect::<Vec<_>>(), d, p)
    }

    #[test]
    fn trivial_generator_gives_identity() {
        let s = spec(&["1", "1"], "0", "1").unwrap();
        let (fp, fq) = build_fp(&s).unwrap();
        let id = parse_map("map R2->R2 { piece true: (x, y) }").unwrap();
        for x in [[0.3, -0.7], [1.0, 1.0], [0.0, 0.0]] {
            assert_eq!(fp.eval(&x).unwrap(), id.eval(&x).unwrap());
            assert_eq!(fq.eval(&x).unwrap(), id.eval(&x).unwrap());
        }
        assert_eq!(verify_inverse(&fp, &fq, 100, 0).unwrap(), 0.0);
    }

    #[test]
    fn conjugate_degree() {
        let s = FpSpec {
            weights: vec![Ratio::from_integer(1); 2],
            degree: Ratio::from_integer(1),
            generator: parse_expr("x^2+y^2", Some(2)).unwrap(),
        };
        assert_eq!(s.conjugate_degree(), Ratio::new(-1, 2));
        // (d'+1) w = 1/2 has an even denominator
        assert!(matches!(build_fp(&s), Err(FpError::EvenDenominator(_))));
    }

    #[test]
    fn rejects_bad_generators() {
        let s = spec(&["1", "1"], "0", "x - 2").unwrap();
        assert!(matches!(s.check_generator(0), Err(FpError::NonPositive(_))));
        let s = spec(&["1", "1"], "0", "1 + x^2").unwrap();
        assert!(matches!(
            s.check_generator(0),
            Err(FpError::Homogeneity { .. })
        ));
        assert!(spec(&["0", "1"], "0", "1").is_err());
        assert!(spec(&["1", "1"], "-1", "1").is_err());
    }

    #[test]
    fn quasi_homogeneous_quotient_inverts() {
        let s = spec(&["3", "2"], "0", "(2*x^4 + y^6)/(x^4 + y^6)").unwrap();
        let (fp, fq) = build_fp(&s).unwrap();
        assert!(verify_inverse(&fp, &fq, 1000, 3).unwrap() <= 1e-8);
        // the printed form parses back to the same map
        assert_eq!(parse_map(&fp.to_string()).unwrap(), fp);
    }
}
