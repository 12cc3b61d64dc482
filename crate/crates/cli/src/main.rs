//! `dht`: exponent computations, sweeps and simulations from JSON problem
//! documents.
//!
//! Exit status: 0 on success, 2 for malformed input, 3 when the problem or
//! the given auxiliary is infeasible, 4 when a search ends without a
//! feasible point, 1 for anything else (I/O).

mod commands;
mod docs;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dht_core::dmc::DmcScheme;
use dht_core::repro::BINDING_TOL;
use dht_core::Error;

use commands::{Budget, SimulateArgs, Status, Sweep};
use docs::InputError;

#[derive(Parser)]
#[command(name = "dht", version, about = "Error exponents for distributed hypothesis testing over noisy channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random starts of the multi-start search.
    #[arg(long)]
    starts: Option<usize>,
    /// Objective evaluations per start.
    #[arg(long)]
    evals: Option<usize>,
}

impl SearchArgs {
    fn budget(&self) -> Budget {
        Budget { seed: self.seed, starts: self.starts, evals: self.evals }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Uep,
    NoUep,
}

#[derive(Subcommand)]
enum Command {
    /// Point-to-point exponent: evaluates the given auxiliary, or searches
    /// for one when the document has none.
    Dmc {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "uep")]
        scheme: Scheme,
        /// Components within this many bits of the minimum are listed as active.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// MAC exponent with its nine components.
    Mac {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Per-component CSV rows.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Broadcast exponent region for one auxiliary choice.
    Bc {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Pareto vertices as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Gaussian closed forms and the hybrid-coding search for one spec.
    Gauss {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Monte Carlo error estimates of the point-to-point scheme.
    Simulate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Blocklengths, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [20, 40, 60])]
        n: Vec<usize>,
        /// Fixed typicality slack; by default it follows mu60 * (60/n)^(1/3).
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        mu60: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rate slack added to the quantizer and channel rates (default: mu).
        #[arg(long)]
        rate_margin: Option<f64>,
        /// Send a random codeword instead of the fallback sequence.
        #[arg(long)]
        no_uep: bool,
    },
    /// Exponent with and without UEP over the crossover probability.
    ReproFig3 {
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        lo: f64,
        #[arg(long, default_value_t = 0.49)]
        hi: f64,
        #[arg(long, default_value_t = 0.005)]
        step: f64,
        /// Skip the binding-component labels (four extra searches per point).
        #[arg(long)]
        no_labels: bool,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Crossover values where the binding components change.
    ReproTable1 {
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        lo: f64,
        #[arg(long, default_value_t = 0.49)]
        hi: f64,
        /// Coarse scan step before bisection.
        #[arg(long, default_value_t = 0.02)]
        step: f64,
        #[arg(long, default_value_t = 1e-3)]
        resolution: f64,
        /// A component binds when dropping it raises the exponent by more than this.
        #[arg(long, default_value_t = BINDING_TOL)]
        tol: f64,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Gaussian MAC bounds over the transmit power.
    ReproFig7 {
        /// Spec overriding the built-in setup; its power is ignored.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        lo: f64,
        #[arg(long, default_value_t = 10.0)]
        hi: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[command(flatten)]
        search: SearchArgs,
    },
}

fn scheme(s: Scheme) -> DmcScheme {
    match s {
        Scheme::Uep => DmcScheme::Uep,
        Scheme::NoUep => DmcScheme::NoUep,
    }
}

fn configure_threads() -> Result<(), InputError> {
    let Ok(v) = std::env::var("DHT_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| InputError(format!("DHT_THREADS = {v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| InputError(format!("DHT_THREADS: {e}")))
}

fn run(cmd: Command) -> anyhow::Result<Status> {
    configure_threads()?;
    match cmd {
        Command::Dmc { input, output, scheme: s, tol, search } => commands::dmc(&input, output.as_deref(), scheme(s), &search.budget(), tol),
        Command::Mac { input, output, csv, tol, search } => commands::mac(&input, output.as_deref(), csv.as_deref(), &search.budget(), tol),
        Command::Bc { input, output, csv } => commands::bc(&input, output.as_deref(), csv.as_deref()),
        Command::Gauss { input, output, search } => commands::gauss(&input, output.as_deref(), &search.budget()),
        Command::Simulate { input, output, n, mu, mu60, trials, seed, rate_margin, no_uep } => {
            commands::simulate(&SimulateArgs { input, output, n, mu, mu60, trials, seed, rate_margin, no_uep })
        }
        Command::ReproFig3 { output, lo, hi, step, no_labels, search } => {
            commands::repro_fig3(output.as_deref(), &Sweep { lo, hi, step }, !no_labels, &search.budget())
        }
        Command::ReproTable1 { output, lo, hi, step, resolution, tol, search } => {
            commands::repro_table1(output.as_deref(), &Sweep { lo, hi, step }, resolution, tol, &search.budget())
        }
        Command::ReproFig7 { input, output, lo, hi, points, search } => {
            commands::repro_fig7(input.as_deref(), output.as_deref(), lo, hi, points, &search.budget())
        }
    }
}

fn classify(e: &anyhow::Error) -> (u8, &'static str) {
    if e.downcast_ref::<InputError>().is_some() {
        return (2, "input");
    }
    match e.downcast_ref::<Error>() {
        Some(Error::Infeasible(_)) => (3, "infeasible"),
        Some(Error::BudgetExhausted(_)) => (4, "budget_exhausted"),
        Some(_) => (2, "input"),
        None => (1, "internal"),
    }
}

/// One JSON line on stderr, so that scripted sweeps can parse failures.
fn error_record(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Infeasible(msg)) => {
            error_record("infeasible", &msg);
            ExitCode::from(3)
        }
        Err(e) => {
            let (code, kind) = classify(&e);
            error_record(kind, &format!("{e:#}"));
            ExitCode::from(code)
        }
    }
}
