//! `halfweight` command-line front end.

use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use halfweight_core::autfactors::{j_half, j_m_star};
use halfweight_core::suites::{run_suite, Suite, SuiteConfig};
use halfweight_core::theta::{theta_eval, Counterexample, ThetaParams, DEFAULT_MAX_RADIUS};
use halfweight_core::{
    validate_siegel, CMat, ElementJson, Error, IndexMatrix, JacobiPoint, MatrixJson,
};
use num_complex::Complex64;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "halfweight", version, about = "Half-integral weight Jacobi forms: evaluation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Theta series evaluation.
    #[command(subcommand)]
    Theta(ThetaCommand),
    /// Automorphic factor evaluation.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run a randomized verification suite and print a JSON report.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum ThetaCommand {
    /// Evaluate the theta series at (Omega, Z).
    Eval(ThetaEvalArgs),
}

#[derive(Args)]
struct ThetaEvalArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    /// Index matrix: a JSON file, inline JSON or "identity".
    #[arg(long = "M")]
    index: String,
    /// Siegel point as matrix JSON (inline or a file path).
    #[arg(long)]
    omega: String,
    /// m x n matrix JSON, or "zero".
    #[arg(long)]
    z: String,
    #[arg(long)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_RADIUS)]
    max_radius: usize,
    #[arg(long)]
    pretty: bool,
}

#[derive(Subcommand)]
enum EvalCommand {
    /// J_{1/2}(x, Omega) for a metaplectic element.
    Jhalf(FactorArgs),
    /// J*_M(x, (Omega, Z)) for a meta-Jacobi element.
    Jstar(FactorArgs),
}

#[derive(Args)]
struct FactorArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long = "M", default_value = "identity")]
    index: String,
    /// Element JSON (inline or a file path).
    #[arg(long)]
    element: String,
    #[arg(long)]
    omega: String,
    #[arg(long, default_value = "zero")]
    z: String,
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_parser = parse_suite)]
    suite: Suite,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long = "M")]
    index: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 1e-12)]
    truncation_tol: f64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    pretty: bool,
    /// odd-diagonal or det2.
    #[arg(long, value_parser = parse_counterexample)]
    counterexample: Option<Counterexample>,
    /// Report runtime_ms = 0 so reports are byte-identical across runs.
    #[arg(long)]
    no_timing: bool,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    Suite::parse(s).ok_or_else(|| {
        let names: Vec<_> = halfweight_core::suites::SUITES.iter().map(|s| s.name()).collect();
        format!("unknown suite '{s}' (expected one of {})", names.join(", "))
    })
}

fn parse_counterexample(s: &str) -> Result<Counterexample, String> {
    Counterexample::parse(s).ok_or_else(|| format!("unknown counterexample '{s}' (odd-diagonal, det2)"))
}

type CliResult<T> = Result<T, String>;

fn read_json<T: serde::de::DeserializeOwned>(what: &str, arg: &str) -> CliResult<T> {
    let text = if arg.trim_start().starts_with(['{', '[']) {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| format!("{what}: cannot read '{arg}': {e}"))?
    };
    serde_json::from_str(&text).map_err(|e| format!("{what}: bad JSON: {e}"))
}

fn core<T>(what: &str, r: Result<T, Error>) -> CliResult<T> {
    r.map_err(|e| format!("{what}: {e}"))
}

fn index_arg(arg: &str, m: usize) -> CliResult<IndexMatrix> {
    let index = if arg == "identity" {
        IndexMatrix::identity(m)
    } else {
        let mj: MatrixJson = read_json("--M", arg)?;
        core("--M", mj.to_real().and_then(IndexMatrix::new))?
    };
    if index.degree() != m {
        return Err(format!("--M is {0}x{0} but --m is {m}", index.degree()));
    }
    Ok(index)
}

fn point_args(omega: &str, z: &str, n: usize, m: usize) -> CliResult<JacobiPoint> {
    let om: MatrixJson = read_json("--omega", omega)?;
    let om = core("--omega", om.to_complex())?;
    if om.nrows() != n || om.ncols() != n {
        return Err(format!("--omega is {}x{} but --n is {n}", om.nrows(), om.ncols()));
    }
    let om = core("--omega", validate_siegel(&om))?;
    let z = if z == "zero" {
        CMat::zeros(m, n)
    } else {
        let zj: MatrixJson = read_json("--z", z)?;
        core("--z", zj.to_complex())?
    };
    core("--z", JacobiPoint::new(om, z))
}

fn pair(v: Complex64) -> Value {
    json!([v.re, v.im])
}

fn print(v: &Value, pretty: bool) {
    let s = if pretty {
        serde_json::to_string_pretty(v)
    } else {
        serde_json::to_string(v)
    };
    println!("{}", s.expect("JSON serializes"));
}

fn cmd_theta_eval(a: &ThetaEvalArgs) -> CliResult<()> {
    let index = index_arg(&a.index, a.m)?;
    let p = point_args(&a.omega, &a.z, a.n, a.m)?;
    let params = core("--tol", ThetaParams::new(index, a.tol))?.with_max_radius(a.max_radius);
    let v = core("theta", theta_eval(&p, &params))?;
    print(
        &json!({"theta": pair(v.value), "radius": v.radius, "certified_tol": v.certified_tol}),
        a.pretty,
    );
    Ok(())
}

fn cmd_factor(a: &FactorArgs, star: bool) -> CliResult<()> {
    let index = index_arg(&a.index, a.m)?;
    let p = point_args(&a.omega, &a.z, a.n, a.m)?;
    let el: ElementJson = read_json("--element", &a.element)?;
    let x = core("--element", el.to_meta_jacobi(a.n, a.m))?;
    let (name, v) = if star {
        ("j_star", core("jstar", j_m_star(&x, &p, &index))?)
    } else {
        ("j_half", core("jhalf", j_half(&x.base, &p.omega))?)
    };
    print(&json!({ name: pair(v) }), a.pretty);
    Ok(())
}

fn cmd_verify(a: &VerifyArgs) -> CliResult<bool> {
    let mut cfg = SuiteConfig::new(a.suite);
    cfg.n = a.n;
    cfg.m = a.m;
    if let Some(arg) = &a.index {
        let m = match (a.m, arg.as_str()) {
            (Some(m), _) => m,
            (None, "identity") => return Err("--M identity needs --m".into()),
            (None, _) => {
                let mj: MatrixJson = read_json("--M", arg)?;
                mj.re.len()
            }
        };
        cfg.m = Some(m);
        cfg.index = Some(index_arg(arg, m)?);
    }
    cfg.seed = a.seed;
    cfg.trials = a.trials;
    cfg.tol = a.tol;
    cfg.truncation_tol = a.truncation_tol;
    cfg.jobs = a.jobs;
    cfg.counterexample = a.counterexample;
    cfg.timing = !a.no_timing;
    let report = core(&format!("verify {}", a.suite.name()), run_suite(&cfg))?;
    println!("{}", report.to_json(a.pretty));
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Theta(ThetaCommand::Eval(a)) => cmd_theta_eval(a).map(|_| true),
        Command::Eval(EvalCommand::Jhalf(a)) => cmd_factor(a, false).map(|_| true),
        Command::Eval(EvalCommand::Jstar(a)) => cmd_factor(a, true).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
