//! `subriem`: scenario-driven front end for the sub-Riemannian graph toolkit.

mod commands;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use serde_json::json;
use subriem_core::geometry::GeometryError;
use thiserror::Error;

use crate::commands::Outcome;
use crate::scenario::{parse_grid, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] subriem_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Area,
    Volume,
    VariationCheck,
    Trace,
    Solve,
    SolveConstrained,
    Regularity,
    GeometryCheck,
    SurfaceVariation,
}

impl Command {
    fn name(self) -> String {
        self.to_possible_value()
            .map(|v| v.get_name().to_string())
            .unwrap_or_default()
    }
}

#[derive(Parser, Debug)]
#[command(
    version,
    about = "Intrinsic graphs, characteristic curves and prescribed mean curvature in contact 3-manifolds"
)]
struct Args {
    #[arg(value_enum)]
    command: Command,

    /// Scenario file (`key = value` lines). Defaults describe the Heisenberg
    /// group over the unit square.
    #[arg(long)]
    scenario: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Seed for the randomized suites.
    #[arg(long)]
    seed: Option<u64>,

    /// Grid override, `NXxNT`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<(usize, usize)>,
}

fn load(args: &Args) -> Result<(Scenario, u64), CliError> {
    let mut sc = match &args.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::parse("", Path::new("."))?,
    };
    if let Some((nx, nt)) = args.grid {
        sc.set("nx", nx.to_string());
        sc.set("nt", nt.to_string());
    }
    let seed = match args.seed {
        Some(s) => s,
        None => sc.number("seed", 0)?,
    };
    Ok((sc, seed))
}

fn run(args: &Args, sc: &Scenario, seed: u64) -> Result<Outcome, CliError> {
    let out = args.out.as_path();
    match args.command {
        Command::Area => commands::area_cmd(sc, out, seed),
        Command::Volume => commands::volume_cmd(sc, out, seed),
        Command::VariationCheck => commands::variation_check(sc, out, seed),
        Command::Trace => commands::trace_cmd(sc, out, seed),
        Command::Solve => commands::solve_cmd(sc, out, seed),
        Command::SolveConstrained => commands::solve_constrained(sc, out, seed),
        Command::Regularity => commands::regularity(sc, out, seed),
        Command::GeometryCheck => commands::geometry_check(sc, out, seed),
        Command::SurfaceVariation => commands::surface_variation(sc, out, seed),
    }
}

fn write_summary(out: &Path, summary: &serde_json::Value) {
    let text = serde_json::to_string_pretty(summary).unwrap_or_default();
    if let Err(e) = std::fs::write(out.join("summary.json"), text + "\n") {
        eprintln!("cannot write summary.json: {e}");
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = args.command.name();
    if let Err(e) = std::fs::create_dir_all(&args.out) {
        eprintln!("error: cannot create {}: {e}", args.out.display());
        return ExitCode::from(1);
    }
    let result = load(&args).and_then(|(sc, seed)| run(&args, &sc, seed).map(|o| (o, seed)));
    match result {
        Ok((o, seed)) => {
            let status = if o.passed { "ok" } else { "failed" };
            write_summary(
                &args.out,
                &json!({ "command": command, "status": status, "seed": seed, "result": o.summary }),
            );
            println!("{command}: {}", o.line);
            if o.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            let code = e.exit_code();
            write_summary(
                &args.out,
                &json!({ "command": command, "status": "error", "exit_code": code, "message": e.to_string() }),
            );
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
