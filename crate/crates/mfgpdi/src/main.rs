//! `mfgpdi`: solve one stationary mean-field-game system, reproduce one of
//! the canned studies, or sweep the regularization parameter.
//!
//! Exit codes: 0 when the run converged, 2 when it finished but did not
//! converge (artifacts are still written), 1 on any error.

use clap::{error::ErrorKind, Args, Parser, Subcommand};
use mfg_pdi::{
    mollify, moreau_yosida, shifted_abs, shifted_xabs, solve_mfg, CouplingKind, CouplingSpec,
    Hamiltonian, MfgConfig, Mesh1d, MollifierSpec, RegularizedHamiltonian,
};
use mfgpdi::{fnv1a64, ExperimentConfig, ExperimentKind};
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mfgpdi",
    version,
    about = "Stationary mean-field games with nonsmooth convex Hamiltonians: \
             one-off solves, canned reproductions, regularization rate sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one coupled system and write the solution curve plus diagnostics
    Solve(SolveArgs),
    /// Re-run a canned study: ex33, prop71, or prop72
    Reproduce(ReproduceArgs),
    /// Regularization error sweep against a nonsmooth reference solve
    Rate(RateArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Base Hamiltonian: abs | xabs | quad | control:<spec.json>
    #[arg(long)]
    ham: String,
    /// Regularization: none | my | mollify | shift71 | shift72
    /// (the shift families fix their own base; --ham is ignored for them)
    #[arg(long, default_value = "none", verbatim_doc_comment)]
    reg: String,
    /// Regularization parameter; required unless --reg none
    #[arg(long)]
    lambda: Option<f64>,
    /// Coupling: zero | identity | scaled:<kappa> | nonmono33
    #[arg(long, default_value = "zero")]
    coupling: String,
    /// Viscosity
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// Number of mesh elements
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Left endpoint; defaults to -1 with the nonmono33 coupling, else 0
    #[arg(long)]
    xmin: Option<f64>,
    /// Right endpoint; defaults to 1
    #[arg(long)]
    xmax: Option<f64>,
    /// Picard damping factor in (0, 1]
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Outer fixed-point tolerance on the density increment
    #[arg(long, default_value_t = 1e-10)]
    outer_tol: f64,
    /// Outer iteration budget
    #[arg(long, default_value_t = 200)]
    max_outer: usize,
    /// Directory to write solution.csv and diagnostics.json into
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Which study to re-run: ex33 | prop71 | prop72
    target: String,
    /// Oscillation indices, comma separated or repeated (prop71, prop72)
    #[arg(long = "j", value_delimiter = ',', num_args = 1..)]
    js: Vec<usize>,
    /// Mesh resolution budget
    #[arg(long)]
    n: Option<usize>,
    /// Viscosity
    #[arg(long)]
    nu: Option<f64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file holding a full run configuration; the subcommand target and
    /// any explicit flags override fields read from it
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RateArgs {
    /// Envelope family to sweep: my | mollify
    family: String,
    /// Regularization parameters, strictly decreasing
    #[arg(long = "lambda", value_delimiter = ',', num_args = 1..)]
    lambdas: Vec<f64>,
    /// Mesh resolution
    #[arg(long)]
    n: Option<usize>,
    /// Viscosity
    #[arg(long)]
    nu: Option<f64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON file holding a full run configuration; the subcommand family and
    /// any explicit flags override fields read from it
    #[arg(long)]
    config: Option<PathBuf>,
}

type DynError = Box<dyn std::error::Error>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool, DynError> {
    match cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Reproduce(args) => {
            let cfg = reproduce_config(args)?;
            finish_experiment(&cfg)
        }
        Command::Rate(args) => {
            let cfg = rate_config(args)?;
            finish_experiment(&cfg)
        }
    }
}

fn finish_experiment(cfg: &ExperimentConfig) -> Result<bool, DynError> {
    let converged = mfgpdi::run(cfg)?;
    println!(
        "{}: artifacts written to {}",
        cfg.experiment.tag(),
        cfg.out.display()
    );
    if !converged {
        eprintln!("warning: run did not fully converge; see the report for details");
    }
    Ok(converged)
}

fn load_or_default(
    kind: ExperimentKind,
    config: Option<PathBuf>,
) -> Result<ExperimentConfig, DynError> {
    match config {
        Some(path) => {
            let text = fs::read_to_string(&path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            Ok(serde_json::from_str(&text)?)
        }
        None => Ok(ExperimentConfig::defaults(kind, PathBuf::new())),
    }
}

fn require_out(cfg: ExperimentConfig) -> Result<ExperimentConfig, DynError> {
    if cfg.out.as_os_str().is_empty() {
        return Err("an output directory is required (--out or the config file's \"out\")".into());
    }
    Ok(cfg)
}

fn reproduce_config(args: ReproduceArgs) -> Result<ExperimentConfig, DynError> {
    let kind = match args.target.as_str() {
        "ex33" => ExperimentKind::Ex33,
        "prop71" => ExperimentKind::Prop71,
        "prop72" => ExperimentKind::Prop72,
        other => {
            return Err(format!(
                "unknown reproduction target {other:?} (expected ex33, prop71, or prop72)"
            )
            .into())
        }
    };
    let mut cfg = load_or_default(kind, args.config)?;
    cfg.experiment = kind;
    if !args.js.is_empty() {
        cfg.js = args.js;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(nu) = args.nu {
        cfg.nu = nu;
    }
    if let Some(out) = args.out {
        cfg.out = out;
    }
    require_out(cfg)
}

fn rate_config(args: RateArgs) -> Result<ExperimentConfig, DynError> {
    let kind = match args.family.as_str() {
        "my" => ExperimentKind::RateMy,
        "mollify" => ExperimentKind::RateMollify,
        other => {
            return Err(format!("unknown envelope family {other:?} (expected my or mollify)").into())
        }
    };
    let mut cfg = load_or_default(kind, args.config)?;
    cfg.experiment = kind;
    if !args.lambdas.is_empty() {
        cfg.lambdas = args.lambdas;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(nu) = args.nu {
        cfg.nu = nu;
    }
    if let Some(out) = args.out {
        cfg.out = out;
    }
    require_out(cfg)
}

/// Everything that determines a one-off solve, in canonical field order for
/// hashing.
#[derive(Serialize)]
struct SolveSpec {
    ham: String,
    reg: String,
    lambda: Option<f64>,
    coupling: String,
    nu: f64,
    n: usize,
    xmin: f64,
    xmax: f64,
    theta: f64,
    outer_tol: f64,
    max_outer: usize,
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    config: &'a SolveSpec,
    config_hash: &'a str,
    lambda: Option<f64>,
    diagnostics: &'a mfg_pdi::MfgDiagnostics,
}

enum AnyHam {
    Raw(Hamiltonian),
    Reg(RegularizedHamiltonian),
}

fn run_solve(args: SolveArgs) -> Result<bool, DynError> {
    let coupling = CouplingSpec::by_name(&args.coupling)?;
    let nonmono = matches!(coupling.kind(), CouplingKind::NonmonotonePair);
    let xmin = args.xmin.unwrap_or(if nonmono { -1.0 } else { 0.0 });
    let xmax = args.xmax.unwrap_or(1.0);
    if !(xmin < xmax) || !xmin.is_finite() || !xmax.is_finite() {
        return Err(format!("domain ({xmin}, {xmax}) is not an interval").into());
    }
    if args.n < 16 {
        return Err(format!("mesh resolution must be at least 16, got {}", args.n).into());
    }
    if !(args.nu > 0.0) {
        return Err(format!("viscosity must be positive, got {}", args.nu).into());
    }

    let base = Hamiltonian::by_name(&args.ham, (xmin, xmax))?;
    let ham = match args.reg.as_str() {
        "none" => AnyHam::Raw(base),
        tag => {
            let lambda = args
                .lambda
                .ok_or_else(|| format!("--reg {tag} needs --lambda"))?;
            AnyHam::Reg(match tag {
                "my" => moreau_yosida(base, lambda)?,
                "mollify" => mollify(base, lambda, MollifierSpec::default())?,
                "shift71" => shifted_xabs(lambda)?,
                "shift72" => shifted_abs(lambda)?,
                other => {
                    return Err(format!(
                        "unknown regularization {other:?} (none, my, mollify, shift71, shift72)"
                    )
                    .into())
                }
            })
        }
    };

    let mesh = Mesh1d::uniform(xmin, xmax, args.n);
    let mcfg = MfgConfig {
        theta: args.theta,
        outer_tol: args.outer_tol,
        max_outer: args.max_outer,
        ..MfgConfig::default()
    };
    let sol = match &ham {
        AnyHam::Raw(h) => solve_mfg(&mesh, args.nu, h, &coupling, &|_| 1.0, &mcfg)?,
        AnyHam::Reg(h) => solve_mfg(&mesh, args.nu, h, &coupling, &|_| 1.0, &mcfg)?,
    };

    let spec = SolveSpec {
        ham: args.ham,
        reg: args.reg,
        lambda: args.lambda,
        coupling: args.coupling,
        nu: args.nu,
        n: args.n,
        xmin,
        xmax,
        theta: args.theta,
        outer_tol: args.outer_tol,
        max_outer: args.max_outer,
    };
    let hash = format!("{:016x}", fnv1a64(serde_json::to_string(&spec)?.as_bytes()));

    let mut csv = String::from("x,u,m,drift,config\n");
    for (i, &x) in mesh.nodes().iter().enumerate() {
        writeln!(
            csv,
            "{},{},{},{},{hash}",
            x,
            sol.u.values()[i],
            sol.m.values()[i],
            sol.drift.eval(x)
        )?;
    }
    fs::create_dir_all(&args.out)?;
    fs::write(args.out.join("solution.csv"), csv)?;
    let summary = SolveSummary {
        config: &spec,
        config_hash: &hash,
        lambda: sol.lambda,
        diagnostics: &sol.diagnostics,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(args.out.join("diagnostics.json"), text)?;

    println!(
        "converged: {} after {} outer iterations (hjb residual {:.3e}, kfp residual {:.3e}, \
         inclusion defect {:.3e}); artifacts written to {}",
        sol.diagnostics.converged,
        sol.diagnostics.outer_iters,
        sol.diagnostics.hjb_residual,
        sol.diagnostics.kfp_residual,
        sol.diagnostics.inclusion_defect,
        args.out.display()
    );
    Ok(sol.diagnostics.converged)
}
