use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tamecert::certify::{
    build_fp, check_ce, check_thm1, injectivity_probe, lipschitz_inverse_estimate,
    sample_jacobians, verify_inverse, winding_number, CheckOptions, FpSpec, SampleStrategy,
    Verdict,
};
use tamecert::mapdsl::Domain;
use tamecert::{parse_map, Exec, PiecewiseMap};

fn corpus(name: &str) -> PiecewiseMap {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(name);
    parse_map(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn random_linear(rng: &mut ChaCha8Rng) -> PiecewiseMap {
    let n = rng.random_range(2..=3);
    let vars = ["x1", "x2", "x3"];
    let rows: Vec<String> = (0..n)
        .map(|_| {
            (0..n)
                .map(|j| format!("({:?})*{}", rng.random_range(-2.0..2.0f64), vars[j]))
                .collect::<Vec<_>>()
                .join(" + ")
        })
        .collect();
    parse_map(&format!(
        "map R{n}->R{n} {{ piece true: ({}) }}",
        rows.join(", ")
    ))
    .unwrap()
}

/// Small box away from the singular sets of the chosen corpus map.
fn random_restriction(rng: &mut ChaCha8Rng) -> PiecewiseMap {
    let (name, lo_r, hi_r) = match rng.random_range(0..3) {
        0 => ("cubic.tmap", 0.2, 1.0),
        1 => ("bilipschitz.tmap", 0.3, 1.0),
        _ => ("threesheet.tmap", 0.4, 1.0),
    };
    let f = corpus(name);
    let side = rng.random_range(0.05..0.2);
    let lo: Vec<f64> = (0..2)
        .map(|_| {
            let a: f64 = rng.random_range(lo_r..hi_r - side);
            if rng.random_bool(0.5) {
                a
            } else {
                -a - side
            }
        })
        .collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + side).collect();
    f.with_domain(Domain::Box { lo, hi }).unwrap()
}

fn consistent(f: &PiecewiseMap, seed: u64) -> Option<(f64, f64)> {
    let s = sample_jacobians(
        f,
        &SampleStrategy {
            seed,
            ..SampleStrategy::default()
        },
    )
    .unwrap();
    let c = check_thm1(
        f,
        &s,
        &CheckOptions {
            seed,
            ..CheckOptions::default()
        },
    );
    if c.verdict != Verdict::Pass {
        return None;
    }
    let delta = c.scalar("delta").unwrap();
    let (ell, _, _) = lipschitz_inverse_estimate(f, 10_000, seed, Exec::Parallel).unwrap();
    Some((delta, ell))
}

#[test]
fn injectivity_modulus_bounds_observed_ratios() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut linear = 0;
    while linear < 20 {
        let f = random_linear(&mut rng);
        if let Some((delta, ell)) = consistent(&f, linear) {
            assert!(
                ell >= delta - 1e-6,
                "linear map {f}: ell {ell} < delta {delta}"
            );
            linear += 1;
        }
    }
    let mut smooth = 0;
    let mut tries = 0;
    while smooth < 10 {
        tries += 1;
        assert!(tries < 100, "too few passing restrictions");
        let f = random_restriction(&mut rng);
        if let Some((delta, ell)) = consistent(&f, tries) {
            assert!(
                ell >= delta - 1e-6,
                "restriction to {:?}: ell {ell} < delta {delta}",
                f.domain
            );
            smooth += 1;
        }
    }
}

/// Integer weights `w`, even exponents `p_i = 2L / w_i` so every monomial
/// `x_i^p_i` has weighted degree `D = 2L`.
struct RandomSpec {
    weights: Vec<i64>,
    scale_third: bool,
    quotient: bool,
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RandomSpec {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        let n = rng.random_range(2..=3);
        RandomSpec {
            weights: (0..n).map(|_| rng.random_range(1..=3)).collect(),
            scale_third: rng.random_bool(0.3),
            quotient: rng.random_bool(0.5),
            num: (0..n).map(|_| rng.random_range(0.5..2.0)).collect(),
            den: (0..n).map(|_| rng.random_range(0.5..2.0)).collect(),
        }
    }

    fn big_d(&self) -> i64 {
        let lcm = self.weights.iter().fold(1i64, |a, &b| a * b / gcd(a, b));
        2 * lcm
    }

    fn exps(&self) -> Vec<i64> {
        self.weights.iter().map(|w| self.big_d() / w).collect()
    }

    fn sum(&self, coef: &[f64]) -> String {
        let e = self.exps();
        coef.iter()
            .enumerate()
            .map(|(i, c)| format!("{c:?}*x{}^{}", i + 1, e[i]))
            .collect::<Vec<_>>()
            .join(" + ")
    }

    fn spec(&self) -> FpSpec {
        let div = if self.scale_third { 3 } else { 1 };
        let w: Vec<String> = self.weights.iter().map(|w| format!("{w}/{div}")).collect();
        let (d, g) = if self.quotient {
            (
                "0".to_string(),
                format!("({})/({})", self.sum(&self.num), self.sum(&self.den)),
            )
        } else {
            (format!("{}/{div}", self.big_d()), self.sum(&self.num))
        };
        FpSpec::parse(&w, &d, &g).unwrap_or_else(|e| panic!("{w:?} {d} {g}: {e}"))
    }

    /// `P(x)` computed directly.
    fn p(&self, x: &[f64]) -> f64 {
        let e = self.exps();
        let s = |c: &[f64]| -> f64 {
            c.iter()
                .enumerate()
                .map(|(i, c)| c * x[i].powi(e[i] as i32))
                .sum()
        };
        if self.quotient {
            s(&self.num) / s(&self.den)
        } else {
            s(&self.num)
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[test]
fn random_generators_give_mutual_inverses() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..50 {
        let r = RandomSpec::draw(&mut rng);
        let spec = r.spec();
        let (fp, fq) = build_fp(&spec).unwrap();
        let err = verify_inverse(&fp, &fq, 200, case).unwrap();
        assert!(err <= 1e-8, "case {case}: inverse error {err}");
        let div = if r.scale_third { 3.0 } else { 1.0 };
        for _ in 0..20 {
            let x: Vec<f64> = (0..r.weights.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let p = r.p(&x);
            let want: Vec<f64> = x
                .iter()
                .zip(&r.weights)
                .map(|(xi, w)| p.powf(*w as f64 / div) * xi)
                .collect();
            let got = fp.eval(&x).unwrap();
            for (a, b) in got.iter().zip(&want) {
                assert!(
                    (a - b).abs() <= 1e-12 * (1.0 + b.abs()),
                    "case {case}: {got:?} vs {want:?}"
                );
            }
        }
    }
}

#[test]
fn winding_degree_is_radius_independent() {
    for (name, degree) in [
        ("identity.tmap", 1),
        ("z2.tmap", 2),
        ("z3.tmap", 3),
        ("threesheet.tmap", 3),
    ] {
        let f = corpus(name);
        for r in [0.1, 0.35, 0.6, 0.95] {
            assert_eq!(
                winding_number(&f, r, 720).unwrap().degree,
                degree,
                "{name} at radius {r}"
            );
        }
    }
}

#[test]
fn parallel_and_sequential_agree() {
    for name in ["cubic.tmap", "kernel3d.tmap", "threesheet.tmap"] {
        let f = corpus(name);
        let seq = SampleStrategy {
            exec: Exec::Sequential,
            ..SampleStrategy::default()
        };
        let par = SampleStrategy {
            exec: Exec::Parallel,
            ..SampleStrategy::default()
        };
        let s1 = sample_jacobians(&f, &seq).unwrap();
        let s2 = sample_jacobians(&f, &par).unwrap();
        assert_eq!(s1.samples, s2.samples, "{name}");
        let o1 = CheckOptions {
            exec: Exec::Sequential,
            ..CheckOptions::default()
        };
        let o2 = CheckOptions {
            exec: Exec::Parallel,
            ..CheckOptions::default()
        };
        assert_eq!(check_ce(&s1, &o1), check_ce(&s2, &o2), "{name}");
        assert_eq!(check_thm1(&f, &s1, &o1), check_thm1(&f, &s2, &o2), "{name}");
        assert_eq!(
            injectivity_probe(&f, &o1),
            injectivity_probe(&f, &o2),
            "{name}"
        );
    }
}

#[test]
fn reruns_are_identical_and_seeds_matter() {
    let f = corpus("nonlip.tmap");
    let a = sample_jacobians(&f, &SampleStrategy::default()).unwrap();
    let b = sample_jacobians(&f, &SampleStrategy::default()).unwrap();
    assert_eq!(a.samples, b.samples);
    let c = sample_jacobians(
        &f,
        &SampleStrategy {
            seed: 9,
            ..SampleStrategy::default()
        },
    )
    .unwrap();
    assert_ne!(a.samples, c.samples);
}
