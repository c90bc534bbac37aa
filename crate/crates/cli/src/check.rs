use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use tamecert::certify::{
    check_cce, check_ce, check_s, check_thm1, check_thm12, check_thm3, check_thm4, check_winding,
    injectivity_probe, sample_jacobians, Certificate, CheckOptions, JacobianSampleSet,
};
use tamecert::{parse_map, PiecewiseMap};

use crate::config::RunConfig;
use crate::report::{MapInfo, Report, SampleInfo};

pub fn load_map(path: &Path, cfg: &RunConfig) -> Result<PiecewiseMap> {
    let src =
        std::fs::read_to_string(path).with_context(|| format!("reading map {}", path.display()))?;
    let f = parse_map(&src).with_context(|| format!("parsing map {}", path.display()))?;
    match &cfg.domain {
        Some(d) => Ok(f.with_domain(d.clone())?),
        None => Ok(f),
    }
}

fn needs_samples(checker: &str) -> bool {
    !matches!(checker, "winding" | "probe")
}

fn run_one(
    name: &str,
    f: &PiecewiseMap,
    s: Option<&JacobianSampleSet>,
    opts: &CheckOptions,
) -> Certificate {
    let s = || s.expect("samples were drawn");
    match name {
        "thm1" => check_thm1(f, s(), opts),
        "thm12" => check_thm12(f, s(), opts),
        "ce" => check_ce(s(), opts),
        "cce" => check_cce(s(), opts),
        "s" => check_s(f, s(), opts),
        "thm3" => check_thm3(f, s(), opts),
        "thm4" => check_thm4(f, s(), opts),
        "winding" => check_winding(f, opts),
        "probe" => injectivity_probe(f, opts),
        other => unreachable!("unknown checker {other}"),
    }
}

/// Runs the selected checkers on the map named by `cfg.map`.
pub fn run_check(cfg: &RunConfig) -> Result<Report> {
    cfg.validate()?;
    let path = cfg.map.as_deref().context("no map file given")?;
    let f = load_map(path, cfg)?;
    let opts = cfg.options(f.n.max(f.m))?;
    let selected = cfg.selected();
    let mut report = Report::new(
        MapInfo {
            path: path.display().to_string(),
            hash: f.fingerprint(),
            m: f.m,
            n: f.n,
        },
        cfg.clone(),
    );

    let samples = if selected.iter().any(|c| needs_samples(c)) {
        let t = Instant::now();
        let s = sample_jacobians(&f, &cfg.strategy(f.domain.diameter()))?;
        report
            .timings_ms
            .insert("sampling".into(), t.elapsed().as_secs_f64() * 1e3);
        report.samples = Some(SampleInfo {
            count: s.len(),
            nondifferentiable: s.nondifferentiable.len(),
            sigma_max: s.sigma_max,
            map_scale: s.map_scale,
            eps_bdry: s.eps_bdry,
        });
        Some(s)
    } else {
        None
    };

    for name in selected {
        let t = Instant::now();
        let cert = run_one(name, &f, samples.as_ref(), &opts);
        report
            .timings_ms
            .insert(name.into(), t.elapsed().as_secs_f64() * 1e3);
        report.certificates.push(cert);
    }
    report.verdict = report.overall();
    Ok(report)
}
