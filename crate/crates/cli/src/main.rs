//! `ehsense`: threshold design, parameter sweeps and Monte Carlo validation
//! for decentralized detection with energy-harvesting sensors.
//!
//! Exit codes: 0 success, 2 input error, 3 degenerate objective, 1 output
//! failure.

mod commands;
mod output;
mod scenario;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::GridOptions;
use output::Table;
use scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("degenerate objective: {0}")]
    Degenerate(String),
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    fn output(e: impl std::fmt::Display) -> Self {
        CliError::Output(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Degenerate(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

impl From<ehsense_core::Error> for CliError {
    fn from(e: ehsense_core::Error) -> Self {
        match e {
            ehsense_core::Error::DegenerateObjective => {
                CliError::Degenerate("the Bhattacharyya distance is zero at every threshold".into())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ehsense",
    version,
    about = "Decentralized detection with energy-harvesting sensors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Adapted and unconstrained thresholds for every sensor.
    Design(Common),
    /// Network BD and error probability along the scenario's sweep block.
    Sweep(Common),
    /// Monte Carlo run checked against the analytic values.
    Simulate(Common),
    /// Capacity-limited BD ceiling of every sensor.
    Bound(Common),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Write results here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; `simulate` defaults to json, the others to csv.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Coarse threshold grid size.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Largest threshold searched.
    #[arg(long)]
    grid_max: Option<f64>,
    /// Refinement rounds around the incumbent.
    #[arg(long)]
    refine: Option<u32>,
    /// Worker threads for design and sweep evaluation. Results do not
    /// depend on it; the simulator is single-threaded.
    #[arg(long, env = "EHSENSE_WORKERS")]
    workers: Option<usize>,
    /// Simulation seed, overriding the scenario file.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn grid(&self) -> GridOptions {
        GridOptions {
            points: self.grid_points,
            max: self.grid_max,
            refine: self.refine,
        }
    }
}

fn render(table: &Table, format: Format) -> Result<String, CliError> {
    match format {
        Format::Csv => table.to_csv(),
        Format::Json => output::pretty(&table.to_json_value()),
    }
}

fn execute(command: &Command) -> Result<String, CliError> {
    let (common, default_format) = match command {
        Command::Simulate(c) => (c, Format::Json),
        Command::Design(c) | Command::Sweep(c) | Command::Bound(c) => (c, Format::Csv),
    };
    let format = common.format.unwrap_or(default_format);
    let scenario = Scenario::load(&common.scenario)?;
    let grid = common.grid();
    match command {
        Command::Design(_) => render(&commands::design(&scenario, &grid)?, format),
        Command::Sweep(_) => render(&commands::sweep(&scenario, &grid)?, format),
        Command::Bound(_) => render(&commands::bound(&scenario)?, format),
        Command::Simulate(_) => {
            let sim = commands::simulate(&scenario, &grid, common.seed)?;
            eprint!("{}", commands::summary(&sim.comparison));
            match format {
                Format::Json => output::pretty(&sim.to_json()),
                Format::Csv => sim.comparison.to_csv(),
            }
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Design(c) | Command::Sweep(c) | Command::Simulate(c) | Command::Bound(c) => c,
    };
    let text = match common.workers {
        Some(0) => return Err(CliError::Input("--workers must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(CliError::output)?
            .install(|| execute(&cli.command))?,
        None => execute(&cli.command)?,
    };
    match &common.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::output(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(CliError::output),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
