//! `berkline`: run experiments from TOML configs and write JSON/CSV reports.
//!
//! Exit status: 0 all assertions pass, 1 an assertion failed, 2 parse or
//! usage error, 3 validation error, 4 i/o error.

mod config;
mod error;
mod kinds;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;
use crate::kinds::RunOptions;
use crate::report::{Envelope, TOOL, VERSION};

#[derive(Parser)]
#[command(name = "berkline", version, about = "Exact potential-theory experiments on the Berkovich line")]
struct Cli {
    /// Worker threads for the experiment legs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[arg(long, env = "BERKLINE_OUT_DIR", default_value = "reports")]
        out_dir: PathBuf,
        /// Overrides params.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides params.m_max.
        #[arg(long)]
        m_max: Option<u32>,
    },
    /// List experiment kinds.
    List,
    /// Print what an experiment kind checks.
    Describe { kind: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Run { config, out_dir, seed, m_max } => run(&config, &out_dir, RunOptions { m_max, seed }),
        Command::List => {
            for (_, name) in kinds::KINDS {
                println!("{name}");
            }
            Ok(true)
        }
        Command::Describe { kind } => kinds::lookup(&kind).map(|k| {
            println!("{}", kinds::describe(k));
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status() as u8)
        }
    }
}

/// Returns whether every assertion passed.
fn run(path: &Path, out_dir: &Path, opts: RunOptions) -> Result<bool, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let config = config::parse(&text)?;
    let outcome = kinds::run(&config, &opts)?;
    let passed = outcome.assertions.iter().all(|a| a.passed);
    let envelope = Envelope {
        tool: TOOL,
        version: VERSION,
        config_sha256: report::sha256_hex(&bytes),
        kind: kinds::name(config.kind).to_string(),
        seed: outcome.seed,
        p: config.field.p,
        ramification: outcome.ramification,
        levels: outcome.levels,
        results: outcome.results,
        assertions: outcome.assertions,
        passed,
    };
    let stem = match &config.output.stem {
        Some(s) => s.clone(),
        None => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into()),
    };
    let mut json = serde_json::to_vec_pretty(&envelope).expect("report serializes");
    json.push(b'\n');
    let json_path = out_dir.join(format!("{stem}.json"));
    report::write_atomic(&json_path, &json)?;
    println!("wrote {}", json_path.display());
    if config.output.csv.unwrap_or(true) && !outcome.rows.is_empty() {
        let csv_path = out_dir.join(format!("{stem}.csv"));
        report::write_atomic(&csv_path, &report::csv_bytes(&outcome.rows)?)?;
        println!("wrote {}", csv_path.display());
    }
    for a in envelope.assertions.iter().filter(|a| !a.passed) {
        eprintln!("assertion failed: {} ({})", a.name, a.detail);
    }
    Ok(passed)
}
