//! `suolson run` drives one experiment from a config file; `suolson verify`
//! runs acceptance suites. Log level comes from `RUST_LOG` (default `warn`).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use suolson_core::experiments::{parse_override, run_experiment, ExperimentConfig, SolverKind};
use suolson_core::verify::{run_suite, Suite};
use suolson_core::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser)]
#[command(name = "suolson", version, about = "Su-Olson radiative transfer: full and low-rank solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSV diagnostics, snapshots and plots.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// full, advection or dlra; overrides the config file.
        #[arg(long, value_parser = SolverKind::parse)]
        solver: Option<SolverKind>,
        /// Override one config key, `key=value`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run acceptance criteria: all, fast, slow or a criterion number.
    Verify {
        #[arg(long, default_value = "fast")]
        suite: String,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            solver,
            sets,
            output_dir,
        } => run(config, solver, &sets, output_dir),
        Command::Verify { suite } => verify(&suite),
    }
}

fn run(config: PathBuf, solver: Option<SolverKind>, sets: &[String], output_dir: Option<PathBuf>) -> ExitCode {
    let mut overrides = Vec::new();
    if let Some(s) = solver {
        overrides.push(("solver".to_string(), s.name().to_string()));
    }
    for s in sets {
        match parse_override(s) {
            Ok(pair) => overrides.push(pair),
            Err(e) => return fail(&e),
        }
    }
    if let Some(dir) = output_dir {
        overrides.push(("output_dir".to_string(), dir.display().to_string()));
    }
    let cfg = match ExperimentConfig::load(&config, &overrides) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&e),
    };
    match run_experiment(&cfg) {
        Ok(summary) => {
            println!("{summary}");
            println!("output            {}", cfg.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Config(_) | Error::InvalidParameter(_) => ExitCode::from(EXIT_CONFIG),
        _ => ExitCode::from(EXIT_SOLVER),
    }
}

fn verify(suite: &str) -> ExitCode {
    let suite = match Suite::parse(suite) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let reports = run_suite(suite, |r| println!("{r}"));
    let passed = reports.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria pass", reports.len());
    if passed == reports.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ACCEPTANCE)
    }
}
