use std::f64::consts::PI;
use std::path::Path;

use nalgebra::DMatrix;
use tamecert::certify::{
    build_fp, check_ce, check_s, check_thm3, check_thm4, injectivity_probe, kernel_pair_witness,
    sample_jacobians, verify_inverse, winding_number, CheckOptions, FpSpec, SampleStrategy,
    Verdict, Witness,
};
use tamecert::convexgeo::{min_norm_point, PointCloud};
use tamecert::mapdsl::JacobianAt;
use tamecert::matgeo::minor_profile;
use tamecert::{parse_map, PiecewiseMap};

fn corpus(name: &str) -> PiecewiseMap {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name);
    parse_map(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn jac(f: &PiecewiseMap, x: &[f64]) -> DMatrix<f64> {
    match f.jacobian(x).unwrap() {
        JacobianAt::Matrix(a) => a,
        other => panic!("no Jacobian at {x:?}: {other:?}"),
    }
}

fn bilip_p(x: f64, y: f64) -> f64 {
    let (x2, y2) = (x * x, y * y);
    (x2 * x2 - x2 * y2 + 2.0 * y2 * y2) / (x2 * x2 - x2 * y2 + y2 * y2)
}

fn nonlip_p(x: f64, y: f64) -> f64 {
    let (x4, y6) = (x.powi(4), y.powi(6));
    (2.0 * x4 + y6) / (x4 + y6)
}

#[test]
fn kernel3d_pair_near_the_displayed_matrices() {
    let f = corpus("kernel3d.tmap");
    let s = sample_jacobians(&f, &SampleStrategy::default()).unwrap();
    // A(a) = (0 0 0; 0 0 0; 1 0 a)
    let target =
        |a: f64| DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, a]);
    // members of the family: samples on y = 0, where the first two rows vanish
    let family: Vec<_> = s
        .samples
        .iter()
        .filter(|p| p.matrix.rows(0, 2).norm() <= 1e-12)
        .collect();
    assert!(family.len() >= 10);
    let nearest = |t: &DMatrix<f64>| {
        family
            .iter()
            .min_by(|p, q| (&p.matrix - t).norm().total_cmp(&(&q.matrix - t).norm()))
            .unwrap()
    };
    let a = nearest(&target(0.5));
    let b = nearest(&target(1.5));
    let (u, res, img) =
        kernel_pair_witness(&a.matrix, &b.matrix, 1e-7 * s.sigma_max).expect("kernel witness");
    let v = [1.0 / 2f64.sqrt(), 0.0, -1.0 / 2f64.sqrt()];
    let align: f64 = u.iter().zip(v).map(|(p, q)| p * q).sum();
    assert!(align.abs() >= 0.99, "alignment {align}");
    assert!(res <= 1e-6 && img > 1e-3);

    let c = check_ce(&s, &CheckOptions::default());
    assert_eq!(c.verdict, Verdict::Fail);
    assert!(c.find_witness("u").is_some());
}

#[test]
fn threesheet_jacobians() {
    let f = corpus("threesheet.tmap");
    let s = sample_jacobians(&f, &SampleStrategy::default()).unwrap();
    assert!(s.len() > 500);
    for m in s.matrices() {
        assert!(
            (m.determinant() - 3.0).abs() <= 1e-9,
            "det {}",
            m.determinant()
        );
    }
    let mats: Vec<DMatrix<f64>> = [0.0, 2.0 * PI / 3.0, -2.0 * PI / 3.0]
        .iter()
        .map(|t| jac(&f, &[0.5 * t.cos(), 0.5 * t.sin()]))
        .collect();
    let r = min_norm_point(&PointCloud::from_matrices(&mats));
    assert!(r.distance <= 1e-9, "distance {}", r.distance);
    for w in &r.weights {
        assert!((w - 1.0 / 3.0).abs() <= 1e-6, "weights {:?}", r.weights);
    }
    for radius in [0.2, 0.5, 0.9] {
        assert_eq!(winding_number(&f, radius, 720).unwrap().degree, 3);
    }
}

#[test]
fn threesheet_collision_has_equal_radii() {
    let f = corpus("threesheet.tmap");
    let c = injectivity_probe(&f, &CheckOptions::default());
    assert_eq!(c.verdict, Verdict::Fail);
    let Some(Witness::Pair { x, y, .. }) = c.find_witness("collision") else {
        panic!("no collision witness");
    };
    let (rx, ry) = (x[0].hypot(x[1]), y[0].hypot(y[1]));
    assert!((rx - ry).abs() <= 1e-6 * rx, "radii {rx} {ry}");
    let fx = f.eval(x).unwrap();
    let fy = f.eval(y).unwrap();
    assert!((fx[0] - fy[0]).hypot(fx[1] - fy[1]) <= 1e-8);
}

#[test]
fn bilipschitz_determinant_and_swapped_minors() {
    let f = corpus("bilipschitz.tmap");
    let s = sample_jacobians(
        &f,
        &SampleStrategy {
            random: 1000,
            ..SampleStrategy::default()
        },
    )
    .unwrap();
    assert!(s.len() >= 1000);
    for smp in &s.samples {
        let p = bilip_p(smp.point[0], smp.point[1]);
        let det = smp.matrix.determinant();
        assert!(
            (det - p * p).abs() <= 1e-8 * p * p,
            "det {det} vs {} at {:?}",
            p * p,
            smp.point
        );
        let prof = minor_profile(&smp.matrix, &[1, 0], &[1, 0]);
        assert!(prof.minors[0] >= 1.0 - 1e-6 && prof.minors[1] >= 1.0 - 1e-6);
    }
    let opts = CheckOptions {
        src_perm: Some(vec![1, 0]),
        tgt_perm: Some(vec![1, 0]),
        ..CheckOptions::default()
    };
    let c = check_thm3(&f, &s, &opts);
    assert!(c.scalar("K1").unwrap() >= 1.0 - 1e-6);
    assert!(c.scalar("K2").unwrap() >= 1.0 - 1e-6);

    let spec = FpSpec::parse(
        &["1".into(), "1".into()],
        "0",
        "(x^4 - x^2*y^2 + 2*y^4)/(x^4 - x^2*y^2 + y^4)",
    )
    .unwrap();
    let (fp, fq) = build_fp(&spec).unwrap();
    assert!(verify_inverse(&fp, &fq, 1000, 3).unwrap() <= 1e-8);
    for x in [[0.3, -0.7], [-0.9, 0.1], [0.5, 0.5]] {
        let a = fp.eval(&x).unwrap();
        let b = f.eval(&x).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }
}

#[test]
fn nonlip_determinant_and_first_partial() {
    let f = corpus("nonlip.tmap");
    let s = sample_jacobians(
        &f,
        &SampleStrategy {
            random: 1000,
            ..SampleStrategy::default()
        },
    )
    .unwrap();
    for smp in &s.samples {
        let p = nonlip_p(smp.point[0], smp.point[1]);
        let det = smp.matrix.determinant();
        assert!(
            (det - p.powi(5)).abs() <= 1e-8 * p.powi(5),
            "det {det} at {:?}",
            smp.point
        );
        assert!(smp.matrix[(0, 0)] >= 1.0 - 1e-6);
    }
    let spec = FpSpec::parse(&["3".into(), "2".into()], "0", "(2*x^4 + y^6)/(x^4 + y^6)").unwrap();
    let (fp, fq) = build_fp(&spec).unwrap();
    assert!(verify_inverse(&fp, &fq, 1000, 5).unwrap() <= 1e-8);
}

#[test]
fn nonproper_condition_list() {
    let f = corpus("nonproper.tmap");
    let s = sample_jacobians(&f, &SampleStrategy::default()).unwrap();
    let opts = CheckOptions::default();
    assert_eq!(check_ce(&s, &opts).verdict, Verdict::Pass);
    assert_eq!(check_s(&f, &s, &opts).verdict, Verdict::Fail);
    let t4 = check_thm4(&f, &s, &opts);
    assert_eq!(t4.condition_verdict("P1"), Some(Verdict::Pass));
    assert_eq!(t4.condition_verdict("P2"), Some(Verdict::Pass));
    assert_eq!(t4.condition_verdict("F2"), Some(Verdict::Fail));
}

#[test]
fn fractional_power_condition_list() {
    let f = corpus("ydeg_a.tmap");
    let s = sample_jacobians(&f, &SampleStrategy::default()).unwrap();
    let opts = CheckOptions::default();
    let t3 = check_thm3(&f, &s, &opts);
    assert_eq!(t3.condition_verdict("R1-lower"), Some(Verdict::Fail));
    assert_eq!(t3.condition_verdict("R2-lower"), Some(Verdict::Pass));
    let t4 = check_thm4(&f, &s, &opts);
    assert_eq!(t4.condition_verdict("P1"), Some(Verdict::Pass));
    assert_eq!(t4.condition_verdict("P2"), Some(Verdict::Pass));
}

#[test]
fn cubic_passes_extremality_without_kernel_witness() {
    let f = corpus("cubic.tmap");
    let s = sample_jacobians(&f, &SampleStrategy::default()).unwrap();
    assert_eq!(s.len(), 621);
    let c = check_ce(&s, &CheckOptions::default());
    assert_eq!(c.verdict, Verdict::Pass);
    assert!(c.find_witness("u").is_none());
}
