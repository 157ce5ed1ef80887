use std::path::PathBuf;
use std::process::ExitCode;

use algebroid_cli::{
    identities, jet_report, load_fixture, modular, mu, run_suite, Options, Report, Suite,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "algebroid-cc",
    version,
    about = "Identity checks and class representatives for Lie algebroid morphisms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Fixture JSON file
    fixture: PathBuf,
    /// Number of seeded probe points
    #[arg(long, default_value_t = 100)]
    points: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Base residual tolerance
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        suite: Suite,
    },
    /// Modular form of an algebroid
    Modular {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        algebroid: String,
    },
    /// Representative of the class of degree 4h−3 of a morphism
    Mu {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        morphism: String,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        h: u64,
    },
    /// Jet prolongation checks and jet-relative classes
    Jet {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        algebroid: String,
    },
    /// Transgression, cocycle, composition and class identities
    Identities {
        #[command(flatten)]
        common: Common,
    },
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Verify { common, .. }
        | Command::Modular { common, .. }
        | Command::Mu { common, .. }
        | Command::Jet { common, .. }
        | Command::Identities { common } => common,
    };
    if common.points == 0 || common.tol.is_nan() || common.tol < 0.0 {
        return usage_error("--points must be positive and --tol non-negative");
    }
    let fixture = match load_fixture(&common.fixture) {
        Ok(f) => f,
        Err(e) => return usage_error(e),
    };
    let options = Options {
        points: common.points,
        seed: common.seed,
        tol: common.tol,
    };
    let report: Report = match &cli.command {
        Command::Verify { suite, .. } => run_suite(&fixture, *suite, &options),
        Command::Modular { algebroid, .. } => match fixture.algebroid(algebroid) {
            Ok(_) => modular(&fixture, algebroid, &options),
            Err(e) => return usage_error(e),
        },
        Command::Mu { morphism, h, .. } => match fixture.morphism(morphism) {
            Ok(_) => mu(&fixture, morphism, *h as usize, &options),
            Err(e) => return usage_error(e),
        },
        Command::Jet { algebroid, .. } => match fixture.algebroid(algebroid) {
            Ok(_) => jet_report(&fixture, algebroid, &options),
            Err(e) => return usage_error(e),
        },
        Command::Identities { .. } => identities(&fixture, &options),
    };
    let json = report.to_json();
    match &common.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &json) {
                return usage_error(format!("cannot write {}: {e}", path.display()));
            }
        }
        None => print!("{json}"),
    }
    for c in report.failures() {
        eprintln!(
            "FAIL {} (residual {:e}, tolerance {:e}){}",
            c.name,
            c.max_residual,
            c.tolerance,
            c.detail
                .as_deref()
                .map(|d| format!(": {d}"))
                .unwrap_or_default()
        );
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
