//! `tamecert` command-line front end.
//!
//! Exit codes: 0 when every selected verdict is `pass` or `pass-heuristic`,
//! 1 when some verdict is `fail` or `inconclusive` (or a corpus mismatch),
//! 2 on usage, parse, configuration and I/O errors.

mod check;
mod config;
mod corpus;
mod fp;
mod report;
mod trace;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_perm, parse_tol, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "tamecert",
    version,
    about = "Sampled injectivity certificates for piecewise maps"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run certificate checkers on a map file and write a JSON report.
    Check(CheckArgs),
    /// Build F_P and its inverse from a generator spec and verify them.
    Fp(FpArgs),
    /// Write CSV polylines of the images of segments.
    Trace(TraceArgs),
    /// Run the bundled corpus against its manifest.
    Corpus(CorpusArgs),
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Map file (`.tmap`); may also come from the config.
    map: Option<PathBuf>,
    #[arg(long)]
    thm1: bool,
    #[arg(long)]
    thm12: bool,
    #[arg(long)]
    ce: bool,
    #[arg(long)]
    cce: bool,
    #[arg(long)]
    s: bool,
    #[arg(long)]
    thm3: bool,
    #[arg(long)]
    thm4: bool,
    #[arg(long)]
    winding: bool,
    #[arg(long)]
    probe: bool,
    /// Every checker (also the default when none is selected).
    #[arg(long)]
    all: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance factor override, e.g. `--tol sing=1e-8` (repeatable).
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Report path; `-` for stdout only.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// 1-based source coordinate order for thm3/thm4, e.g. `2,1`.
    #[arg(long)]
    src_perm: Option<String>,
    /// 1-based target coordinate order for thm3/thm4.
    #[arg(long)]
    tgt_perm: Option<String>,
    /// Print the full report to stdout.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct FpArgs {
    /// Spec file with `weights`, `degree` and `generator`.
    spec: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1000)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TraceArgs {
    map: PathBuf,
    /// Segment `a1,a2,..:b1,b2,..` (repeatable).
    #[arg(long = "segment", required = true)]
    segments: Vec<String>,
    #[arg(long, default_value_t = 401)]
    points: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct CorpusArgs {
    /// Corpus directory; defaults to $TAMECERT_CORPUS, then the bundled one.
    #[arg(long)]
    dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where generated F_P/F_Q maps go.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn check_config(a: &CheckArgs) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &a.map {
        cfg.map = Some(m.clone());
    }
    let flags = [
        ("thm1", a.thm1),
        ("thm12", a.thm12),
        ("ce", a.ce),
        ("cce", a.cce),
        ("s", a.s),
        ("thm3", a.thm3),
        ("thm4", a.thm4),
        ("winding", a.winding),
        ("probe", a.probe),
    ];
    if a.all {
        cfg.checkers.clear();
    } else if flags.iter().any(|f| f.1) {
        cfg.checkers = flags
            .iter()
            .filter(|f| f.1)
            .map(|f| f.0.to_string())
            .collect();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    for t in &a.tol {
        let (k, v) = parse_tol(t)?;
        cfg.tol.set(&k, v).map_err(anyhow::Error::msg)?;
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    if let Some(p) = &a.src_perm {
        cfg.src_perm = Some(parse_perm(p)?);
    }
    if let Some(p) = &a.tgt_perm {
        cfg.tgt_perm = Some(parse_perm(p)?);
    }
    Ok(cfg)
}

fn cmd_check(a: &CheckArgs) -> Result<bool> {
    let cfg = check_config(a)?;
    let report = check::run_check(&cfg)?;
    let json = report.to_json();
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("report.json"));
    if out != Path::new("-") {
        std::fs::write(&out, format!("{json}\n"))
            .with_context(|| format!("writing {}", out.display()))?;
    }
    if a.json || out == Path::new("-") {
        println!("{json}");
    }
    for c in &report.certificates {
        let conds: Vec<String> = c
            .conditions
            .iter()
            .map(|k| format!("{}={}", k.name, k.verdict))
            .collect();
        eprintln!(
            "{:<8} {:<15} {}",
            c.checker,
            c.verdict.to_string(),
            conds.join(" ")
        );
    }
    Ok(report.certificates.iter().all(|c| c.verdict.is_pass()))
}

fn cmd_fp(a: &FpArgs) -> Result<bool> {
    let s = fp::run_fp(&a.spec, &a.out_dir, a.probes, a.seed)?;
    println!("{}", serde_json::to_string_pretty(&s)?);
    Ok(s.max_error <= fp::INVERSE_TOL)
}

fn cmd_trace(a: &TraceArgs) -> Result<bool> {
    let f = check::load_map(&a.map, &RunConfig::default())?;
    for p in trace::run_trace(&f, &a.segments, a.points, &a.out_dir)? {
        println!("{}", p.display());
    }
    Ok(true)
}

fn cmd_corpus(a: &CorpusArgs) -> Result<bool> {
    let dir = corpus::corpus_dir(a.dir.as_deref());
    let scratch = a.out_dir.clone().unwrap_or_else(std::env::temp_dir);
    let outcomes = corpus::run_corpus(&dir, a.seed, &scratch)?;
    for o in &outcomes {
        let mark = if o.ok { "ok  " } else { "FAIL" };
        println!(
            "{mark} {:<20} {:<8} expected {:<28} got {}",
            o.file, o.checker, o.expected, o.got
        );
    }
    Ok(outcomes.iter().all(|o| o.ok))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let res = match &cli.cmd {
        Cmd::Check(a) => cmd_check(a),
        Cmd::Fp(a) => cmd_fp(a),
        Cmd::Trace(a) => cmd_trace(a),
        Cmd::Corpus(a) => cmd_corpus(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
