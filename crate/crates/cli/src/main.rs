//! Scenario-driven command line front end: parses a declarative JSON
//! scenario, dispatches to the library, and emits deterministic JSON or
//! text reports plus optional DOT graphs.
//!
//! Exit codes: 0 on success, 1 on schema errors (with a JSON pointer),
//! 2 on domain errors (with the failing operation).

mod runner;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "adic", version, about = "Exact geometry over ordered groups")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file and print its report.
    Run {
        /// Path to the scenario JSON file.
        file: PathBuf,
        /// Output format; the ADIC_FORMAT environment variable sets the
        /// default.
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Write the last produced graph as DOT to this path.
        #[arg(long)]
        dot: Option<PathBuf>,
        /// Seed recorded in the report, reserved for sampling commands.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Run {
            file,
            format,
            dot,
            seed,
        } => run_command(file, format, dot, seed),
    }
}

fn run_command(
    file: PathBuf,
    format: Option<Format>,
    dot: Option<PathBuf>,
    seed: u64,
) -> ExitCode {
    let format = format.unwrap_or_else(|| {
        match std::env::var("ADIC_FORMAT").as_deref() {
            Ok("text") => Format::Text,
            _ => Format::Json,
        }
    });
    let raw = match std::fs::read_to_string(&file) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return ExitCode::from(1);
        }
    };
    let value: serde_json::Value = match serde_json::from_str(&raw) {
        Ok(v) => v,
        Err(e) => {
            let report = serde_json::json!({
                "version": runner::REPORT_VERSION,
                "error": format!("invalid JSON: {e}"),
                "pointer": "",
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("report"));
            return ExitCode::from(1);
        }
    };
    let scenario = match scenario::parse_scenario(&value) {
        Ok(s) => s,
        Err(e) => {
            let report = serde_json::json!({
                "version": runner::REPORT_VERSION,
                "error": e.message,
                "pointer": e.pointer,
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("report"));
            return ExitCode::from(1);
        }
    };
    match runner::run(&scenario, seed) {
        Ok(output) => {
            match format {
                Format::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&output.report).expect("report")
                ),
                Format::Text => print!("{}", runner::render_text(&output.report)),
            }
            if let Some(path) = dot {
                match &output.dot {
                    Some(contents) => {
                        if let Err(e) = std::fs::write(&path, contents) {
                            eprintln!("error: cannot write {}: {e}", path.display());
                            return ExitCode::from(2);
                        }
                    }
                    None => {
                        eprintln!("warning: no graph-producing command; DOT file not written")
                    }
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = serde_json::json!({
                "version": runner::REPORT_VERSION,
                "error": e.error.to_string(),
                "op": e.op,
                "op_index": e.op_index,
            });
            println!("{}", serde_json::to_string_pretty(&report).expect("report"));
            ExitCode::from(2)
        }
    }
}
