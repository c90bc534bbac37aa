//! Piecewise closed-form maps: the `.tmap` language, evaluation, forward-mode
//! Jacobians and one-sided directional derivatives.
//!
//! A map is an ordered list of pieces `piece <guard>: (<expr>, ...)`; the
//! first piece whose guard holds defines the value. Points within the
//! boundary tolerance of any guard that could have decided the piece, of a
//! declared `locus`, or of an `exclude`d point get no Jacobian. Together with
//! kinks of `abs` and fractional roots this is the working approximation of
//! the nondifferentiability set.

mod expr;
mod map;
mod parser;

pub use expr::{sroot, Dual, EvalFault, Expr};
pub use map::{
    bisect_zero, coordinate_name, zero_set_distance, CmpOp, Comparison, ContinuityAudit,
    DirectionalDerivative, Domain, JacobianAt, NonDiffReason, Piece, PieceRegion, PiecewiseMap,
    BOUNDARY_REL_TOL,
};
pub use parser::{parse_expr, parse_map};

pub(crate) use map::dist;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MapError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("even denominator in rational power at line {line}, column {col}")]
    EvenRoot { line: usize, col: usize },
    #[error("no piece matches the point {0:?}")]
    NoMatchingPiece(Vec<f64>),
    #[error("pole encountered at {0:?}")]
    Pole(Vec<f64>),
    #[error("point {0:?} leaves the domain")]
    DomainExit(Vec<f64>),
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBIC: &str = "map R2->R2 { piece true: (x1^3, x2^3) }";
    const TWO_PIECE: &str = "map R2->R2 { piece x1>=0: (x1+x2^3, x1); piece true: (x1+x2^3, 0) }";
    const THREE_SHEET: &str = "map R2->R2 {
        domain ball center (0,0) radius 1;
        exclude (0,0);
        piece x1^2 + x2^2 > 0: (x1*(x1^2 - 3*x2^2)/(x1^2 + x2^2), x2*(3*x1^2 - x2^2)/(x1^2 + x2^2));
        piece true: (0, 0)
    }";
    const BILIP: &str = "map R2->R2 {
        piece x^2 + y^2 > 0: ((x^4 - x^2*y^2 + 2*y^4)/(x^4 - x^2*y^2 + y^4)*x, (x^4 - x^2*y^2 + 2*y^4)/(x^4 - x^2*y^2 + y^4)*y);
        piece true: (0, 0)
    }";

    fn mat(f: &PiecewiseMap, x: &[f64]) -> nalgebra::DMatrix<f64> {
        f.jacobian(x).unwrap().matrix().expect("differentiable")
    }

    #[test]
    fn parse_examples() {
        let f = parse_map(CUBIC).unwrap();
        assert_eq!((f.m, f.n, f.pieces.len()), (2, 2, 1));
        let id = parse_map("map R1->R1 { piece true: (x1) }").unwrap();
        assert_eq!(id.eval(&[0.25]).unwrap(), vec![0.25]);
        let tp = parse_map(TWO_PIECE).unwrap();
        assert_eq!(tp.pieces.len(), 2);
        assert_eq!(tp.pieces[0].region.guards.len(), 1);
    }

    #[test]
    fn eval_examples() {
        let f = parse_map(CUBIC).unwrap();
        assert_eq!(f.eval(&[2.0, -1.0]).unwrap(), vec![8.0, -1.0]);
        let b = parse_map(BILIP).unwrap();
        assert_eq!(b.eval(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let s = parse_map(THREE_SHEET).unwrap();
        let th = std::f64::consts::PI / 6.0;
        let v = s.eval(&[th.cos(), th.sin()]).unwrap();
        assert!(v[0].abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12, "{v:?}");
    }

    #[test]
    fn jacobian_examples() {
        let f = parse_map(CUBIC).unwrap();
        let j = mat(&f, &[1.0, 2.0]);
        assert_eq!(j, nalgebra::dmatrix![3.0, 0.0; 0.0, 12.0]);
        let s = parse_map(THREE_SHEET).unwrap();
        let j = mat(&s, &[1.0, 0.0]);
        assert!((j - nalgebra::dmatrix![1.0, 0.0; 0.0, 3.0]).abs().max() < 1e-12);
        let tp = parse_map(TWO_PIECE).unwrap();
        assert_eq!(
            tp.jacobian(&[0.0, 0.5]).unwrap(),
            JacobianAt::NonDifferentiable(NonDiffReason::PieceBoundary)
        );
        assert_eq!(
            s.jacobian(&[0.0, 0.0]).unwrap(),
            JacobianAt::NonDifferentiable(NonDiffReason::Excluded)
        );
    }

    #[test]
    fn pole_is_an_error() {
        let f = parse_map("map R1->R1 { piece true: (1/x1) }").unwrap();
        assert_eq!(f.eval(&[0.0]), Err(MapError::Pole(vec![0.0])));
        assert!(matches!(f.jacobian(&[0.0]), Err(MapError::Pole(_))));
    }

    #[test]
    fn no_matching_piece() {
        let f = parse_map("map R1->R1 { piece x1 > 0: (x1) }").unwrap();
        assert!(matches!(f.eval(&[-1.0]), Err(MapError::NoMatchingPiece(_))));
    }

    #[test]
    fn directional_derivative_examples() {
        let f = parse_map("map R2->R2 { domain box [-2, 2]; piece true: (x1^3, x2^3) }").unwrap();
        match f
            .directional_derivative(&[1.0, 1.0], &[1.0, 0.0], 1e-4, 1e-3)
            .unwrap()
        {
            DirectionalDerivative::Finite(d) => {
                assert!((d[0] - 3.0).abs() < 1e-6 && d[1].abs() < 1e-6, "{d:?}")
            }
            other => panic!("{other:?}"),
        }
        let root = parse_map("map R1->R1 { piece true: (x1^(1/3)) }").unwrap();
        assert_eq!(
            root.directional_derivative(&[0.0], &[1.0], 1e-6, 1e-3)
                .unwrap(),
            DirectionalDerivative::Infinite
        );
        // x <= 0 branch (x + y^3, 0) along (-1, 0): ((-h, 0) - (0, 0)) / h
        let tp = parse_map(TWO_PIECE).unwrap();
        match tp
            .directional_derivative(&[0.0, 0.0], &[-1.0, 0.0], 1e-4, 1e-3)
            .unwrap()
        {
            DirectionalDerivative::Finite(d) => {
                assert!((d[0] + 1.0).abs() < 1e-6 && d[1].abs() < 1e-6, "{d:?}")
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            f.directional_derivative(&[1.0, 1.0], &[1.0, 0.0], 1.5, 1e-3),
            Err(MapError::DomainExit(_))
        ));
    }

    #[test]
    fn printer_round_trip_on_examples() {
        for src in [
            CUBIC,
            TWO_PIECE,
            THREE_SHEET,
            BILIP,
            "map R1->R1 { piece true: (abs(x)^(-2/5) - -3.5e-9) }",
        ] {
            let a = parse_map(src).unwrap();
            let b = parse_map(&a.to_string()).unwrap();
            assert_eq!(a, b, "{}", a);
        }
    }

    #[test]
    fn continuity_audit_on_two_piece() {
        let tp = parse_map(TWO_PIECE).unwrap();
        let audit = tp.continuity_audit(100, 7).unwrap();
        assert_eq!(audit.boundary_points, 100);
        assert!(audit.max_gap <= 1e-9);
        let broken = parse_map("map R1->R1 { piece x1 >= 0: (x1 + 1); piece true: (x1) }").unwrap();
        let audit = broken.continuity_audit(10, 7).unwrap();
        assert!((audit.max_gap - 1.0).abs() < 1e-9);
    }
}
