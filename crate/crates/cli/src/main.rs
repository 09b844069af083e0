//! Command-line front end: `run`, `validate` and `orbit`.
//!
//! Results go to stdout as JSON. Failures exit nonzero with a one-line JSON
//! object `{"error": <kind>, "message": <text>}` on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use shrinking_targets::experiment::{self, ExperimentConfig};
use shrinking_targets::orbit::enumerate_orbit;
use shrinking_targets::Error;

#[derive(Parser)]
#[command(name = "shrinking-targets", version, about = "Shrinking-target experiments on Teichmüller curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Write into this directory instead of a timestamped one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config and classify its schedule without simulating.
    Validate { config: PathBuf },
    /// Enumerate the orbit of an origami given in cycle notation.
    Orbit {
        origami: PathBuf,
        /// Also write the orbit graph as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn fail(kind: &str, message: String) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(2)
}

fn print(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn execute(cmd: Command) -> Result<ExitCode, Error> {
    match cmd {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let manifest = match out {
                Some(dir) => experiment::run_into(&cfg, &dir)?,
                None => experiment::run(&cfg)?,
            };
            print(&manifest);
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let diag = experiment::validate(&cfg);
            print(&diag);
            Ok(if diag.ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Orbit { origami, csv } => {
            let o = experiment::parse_origami(&std::fs::read_to_string(&origami)?)?;
            let orbit = enumerate_orbit(&o)?;
            let action = orbit.coset_action()?;
            let s = o.stratum();
            if let Some(path) = csv {
                orbit.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))?;
            }
            print(&json!({
                "origami": o.to_string(),
                "n_squares": o.n_squares(),
                "stratum": s.to_string(),
                "genus": s.genus,
                "index": orbit.index(),
                "projective_index": orbit.projective_index(),
                "cusp_widths": action.cusp_widths(),
            }));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string()),
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
