use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lil_lab::config::{ExperimentConfig, VerifyConfig, MODULES};
use lil_lab::{execute, resolve_threads, SchemaError};

#[derive(Parser)]
#[command(name = "lil-lab", version, about = "Run LIL experiments and invariant suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads (falls back to the config, then LIL_LAB_THREADS).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory (falls back to the config's `output`, then `out`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suites; exits 1 if any check fails.
    Verify {
        /// Restrict to a module; may be repeated.
        #[arg(long = "module", value_name = "NAME")]
        modules: Vec<String>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const SCHEMA_EXIT: u8 = 2;
const FAILURE_EXIT: u8 = 1;

fn schema_failure(source: &str, e: &SchemaError) -> ExitCode {
    eprintln!("error: {source}: {e}");
    ExitCode::from(SCHEMA_EXIT)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, source, flag_threads, flag_out) = match cli.command {
        Command::Run { config, threads, out } => {
            let source = config.display().to_string();
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: reading {source}: {e}");
                    return ExitCode::from(FAILURE_EXIT);
                }
            };
            match ExperimentConfig::from_json(&text) {
                Ok(c) => (c, source, threads, out),
                Err(e) => return schema_failure(&source, &e),
            }
        }
        Command::Verify { modules, threads, out } => {
            if let Some(bad) = modules.iter().find(|m| !MODULES.contains(&m.as_str())) {
                let e = SchemaError {
                    field: "--module".into(),
                    message: format!("unknown module `{bad}`; expected one of {}", MODULES.join(", ")),
                    location: None,
                };
                return schema_failure("verify", &e);
            }
            let cfg = ExperimentConfig::Verify(VerifyConfig::new((!modules.is_empty()).then_some(modules)));
            (cfg, "verify".to_string(), threads, out)
        }
    };
    if flag_threads == Some(0) {
        let e = SchemaError {
            field: "--threads".into(),
            message: "must be at least 1".into(),
            location: None,
        };
        return schema_failure(&source, &e);
    }
    let threads = match resolve_threads(flag_threads, cfg.threads()) {
        Ok(t) => t,
        Err(e) => return schema_failure(&source, &e),
    };
    let out_dir = flag_out
        .or_else(|| cfg.output().cloned())
        .unwrap_or_else(|| PathBuf::from("out"));
    let (report, written) = match execute(&cfg, threads, &out_dir) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(FAILURE_EXIT);
        }
    };
    if matches!(cfg, ExperimentConfig::Verify(_)) {
        for row in &report.table.rows {
            println!(
                "{} {}/{}: {}",
                if row[2] == "true" { "ok  " } else { "FAIL" },
                row[0],
                row[1],
                row[3]
            );
        }
    }
    println!("wrote {} and {}", written.csv.display(), written.summary.display());
    match (&cfg, report.passed) {
        (ExperimentConfig::Verify(_), Some(false)) => ExitCode::from(FAILURE_EXIT),
        _ => ExitCode::SUCCESS,
    }
}
