use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tamecert::PiecewiseMap;

/// Segment `a:b` with comma-separated coordinates, e.g. `-0.2,0.1:0.2,0.1`.
pub fn parse_segment(s: &str, m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (a, b) = s
        .split_once(':')
        .with_context(|| format!("expected a:b, got `{s}`"))?;
    let coords = |t: &str| -> Result<Vec<f64>> {
        let v = t
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad coordinate `{c}` in `{s}`"))
            })
            .collect::<Result<Vec<_>>>()?;
        if v.len() != m {
            bail!(
                "segment endpoint `{t}` has {} coordinates, the map needs {m}",
                v.len()
            );
        }
        Ok(v)
    };
    Ok((coords(a)?, coords(b)?))
}

/// CSV polyline of `t -> f(a + t (b - a))` over `points` equally spaced `t`.
pub fn trace_segment(f: &PiecewiseMap, a: &[f64], b: &[f64], points: usize) -> Result<String> {
    let mut out = String::from("t");
    for i in 1..=f.m {
        write!(out, ",x{i}").unwrap();
    }
    for i in 1..=f.n {
        write!(out, ",f{i}").unwrap();
    }
    out.push('\n');
    let points = points.max(2);
    for k in 0..points {
        let t = k as f64 / (points - 1) as f64;
        let x: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect();
        if !f.domain.contains(&x) {
            bail!("segment point {x:?} leaves the domain");
        }
        let y = f.eval(&x).with_context(|| format!("evaluating at {x:?}"))?;
        write!(out, "{t:?}").unwrap();
        for v in x.iter().chain(&y) {
            write!(out, ",{v:?}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes `curve_<k>.csv` per segment; returns the paths.
pub fn run_trace(
    f: &PiecewiseMap,
    segments: &[String],
    points: usize,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if segments.is_empty() {
        bail!("no --segment given");
    }
    let curves = segments
        .iter()
        .map(|s| {
            let (a, b) = parse_segment(s, f.m)?;
            trace_segment(f, &a, &b, points)
        })
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut paths = Vec::new();
    for (k, c) in curves.iter().enumerate() {
        let p = out_dir.join(format!("curve_{k}.csv"));
        std::fs::write(&p, c)?;
        paths.push(p);
    }
    Ok(paths)
}
