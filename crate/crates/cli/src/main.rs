//! `nmgm`: run benchmark cases, build order tables, time Jacobian assembly.

mod commands;
mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use nmgm_core::cases::{find_case, CaseSpec};
use nmgm_core::model::DEFAULT_GRAVITY;
use nmgm_core::newton::Outcome;

use config::{Cells, JacobianChoice, RawConfig};

const EXIT_NOT_CONVERGED: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(name = "nmgm", version, about = "Steady shallow-water and channel flow by Newton multigrid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one case and write solution.csv, history.csv and summary.txt.
    Run(RunArgs),
    /// L1 errors and observed orders against the case oracle.
    OrderTable(OrderArgs),
    /// Time the full and simplified 2D Jacobian assembly.
    JacobianBench(BenchArgs),
    /// Print the case registry.
    ListCases,
    /// Write the exact solution of a case.
    DumpOracle(OracleArgs),
}

/// Flags that mirror the config-file keys.
#[derive(Args, Default)]
struct SolverFlags {
    /// `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<String>,
    /// `n` in 1D, `nx x ny` (e.g. 64x32) in 2D.
    #[arg(long)]
    cells: Option<Cells>,
    /// simplified, full, or J3/J5/J9/J21.
    #[arg(long)]
    jacobian: Option<JacobianChoice>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    omega_sor: Option<f64>,
    #[arg(long)]
    nu_pre: Option<usize>,
    #[arg(long)]
    nu_post: Option<usize>,
    #[arg(long)]
    n_mg: Option<usize>,
    #[arg(long)]
    max_newton: Option<usize>,
    #[arg(long)]
    tol_abs: Option<f64>,
    #[arg(long)]
    tol_rel: Option<f64>,
    #[arg(long)]
    gravity: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl SolverFlags {
    fn raw(&self) -> Result<RawConfig> {
        let file = match &self.config {
            Some(path) => RawConfig::from_file(path)?,
            None => RawConfig::default(),
        };
        let flags = RawConfig {
            case: self.case.clone(),
            cells: self.cells,
            jacobian: self.jacobian,
            alpha: self.alpha,
            tau: self.tau,
            omega_sor: self.omega_sor,
            nu_pre: self.nu_pre,
            nu_post: self.nu_post,
            n_mg: self.n_mg,
            max_newton: self.max_newton,
            tol_abs: self.tol_abs,
            tol_rel: self.tol_rel,
            gravity: self.gravity,
            epsilon: self.epsilon,
            output_dir: self.output_dir.clone(),
        };
        Ok(file.merged(flags))
    }
}

#[derive(Args)]
struct RunArgs {
    /// Case name; same as --case.
    name: Option<String>,
    #[command(flatten)]
    flags: SolverFlags,
    /// Exit 0 when the residual stagnates instead of converging.
    #[arg(long)]
    allow_stall: bool,
}

#[derive(Args)]
struct OrderArgs {
    name: Option<String>,
    #[command(flatten)]
    flags: SolverFlags,
    /// Comma-separated 1D cell counts.
    #[arg(long, value_delimiter = ',', default_value = "80,160,320,640")]
    meshes: Vec<usize>,
    /// Minimum finest-pair order for both h and hu.
    #[arg(long, default_value_t = 2.5)]
    threshold: f64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "swe2d-hump")]
    case: String,
    #[arg(long, default_value = "64x32")]
    cells: Cells,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long, default_value_t = DEFAULT_GRAVITY)]
    gravity: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    name: Option<String>,
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_GRAVITY)]
    gravity: f64,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// A failure that maps to a specific exit status.
struct Failure(u8, anyhow::Error);

fn invalid(e: anyhow::Error) -> Failure {
    Failure(EXIT_INVALID, e)
}

fn failed(e: anyhow::Error) -> Failure {
    Failure(EXIT_NOT_CONVERGED, e)
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn with_name(mut raw: RawConfig, name: &Option<String>) -> RawConfig {
    if name.is_some() {
        raw.case = name.clone();
    }
    raw
}

fn run(args: RunArgs) -> std::result::Result<(), Failure> {
    let raw = with_name(args.flags.raw().map_err(invalid)?, &args.name);
    let config = raw.validate().map_err(invalid)?;
    let report = commands::cmd_run(&config).map_err(failed)?;
    match report.outcome {
        Outcome::Converged => Ok(()),
        Outcome::Stalled if args.allow_stall => Ok(()),
        other => Err(failed(anyhow::anyhow!("solver {}", other.as_str()))),
    }
}

fn order_table(args: OrderArgs) -> std::result::Result<(), Failure> {
    let raw = with_name(args.flags.raw().map_err(invalid)?, &args.name);
    let config = raw.validate().map_err(invalid)?;
    let CaseSpec::OneD(case) = &config.case else {
        return Err(invalid(anyhow::anyhow!("order tables need a 1D case")));
    };
    if args.meshes.len() < 2 {
        return Err(invalid(anyhow::anyhow!("at least two meshes are needed")));
    }
    let rows = commands::order_table(case, &args.meshes, &config.options).map_err(failed)?;
    let mut out = sink(&args.output).map_err(invalid)?;
    commands::write_order_table(&rows, &mut out).map_err(failed)?;
    out.flush().map_err(|e| failed(e.into()))?;
    match commands::finest_orders(&rows) {
        Some((h, hu)) if h >= args.threshold && hu >= args.threshold => Ok(()),
        Some((h, hu)) => Err(failed(anyhow::anyhow!(
            "finest orders {h:.3} (h) and {hu:.3} (hu) below {}",
            args.threshold
        ))),
        None => Err(failed(anyhow::anyhow!("orders undefined: errors are not positive"))),
    }
}

fn jacobian_bench(args: BenchArgs) -> std::result::Result<(), Failure> {
    let case = match find_case(&args.case).map_err(|e| invalid(e.into()))? {
        CaseSpec::TwoD(c) => c,
        CaseSpec::OneD(_) => return Err(invalid(anyhow::anyhow!("jacobian-bench needs a 2D case"))),
    };
    let Cells::TwoD(nx, ny) = args.cells else {
        return Err(invalid(anyhow::anyhow!("give cells as nx x ny")));
    };
    let rows = commands::jacobian_bench(&case, nx, ny, args.repetitions, args.gravity).map_err(failed)?;
    let mut out = sink(&args.output).map_err(invalid)?;
    commands::write_bench(&rows, &mut out).map_err(failed)?;
    out.flush().map_err(|e| failed(e.into()))
}

fn dump_oracle(args: OracleArgs) -> std::result::Result<(), Failure> {
    let Some(name) = args.name.or(args.case) else {
        return Err(invalid(anyhow::anyhow!("no case given")));
    };
    let case = find_case(&name).map_err(|e| invalid(e.into()))?;
    let mut out = sink(&args.output).map_err(invalid)?;
    commands::dump_oracle(&case, args.cells, args.gravity, &mut out).map_err(invalid)?;
    out.flush().map_err(|e| failed(e.into()))
}

fn dispatch(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::Run(a) => run(a),
        Command::OrderTable(a) => order_table(a),
        Command::JacobianBench(a) => jacobian_bench(a),
        Command::ListCases => commands::list_cases(&mut std::io::stdout().lock()).map_err(failed),
        Command::DumpOracle(a) => dump_oracle(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
