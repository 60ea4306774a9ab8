//! `fieldlock` command line.
//!
//! * `fieldlock analyze <file.adt>` — print static access vectors and the
//!   commutativity matrix.
//! * `fieldlock run --mode <m> [--seed N] [--workers N] [--iterations N]
//!   [--trace PATH] [--log PATH] [--json] <file.wl>` — run a workload,
//!   verify it against the serializability oracle, print metrics.
//!
//! Exit codes: 0 pass, 1 verification failure, 2 usage or parse error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fieldlock::harness::{analyze_report, run_workload, RunConfig, Verdict};
use fieldlock::oracle::parse_workload;
use fieldlock::txn::SchedulerMode;

#[derive(Parser)]
#[command(name = "fieldlock", version, about = "Field-granularity concurrency control for tuple ADTs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print per-operation access vectors and the commutativity matrix.
    Analyze {
        /// ADT source file (.adt).
        file: PathBuf,
    },
    /// Run a workload under a scheduler mode and verify serializability.
    Run {
        /// Workload file (.wl).
        file: PathBuf,
        /// Scheduler mode: compat, static-av, or dynamic-av.
        #[arg(long, default_value = "dynamic-av")]
        mode: SchedulerMode,
        /// Seed for the deterministic interleaving scheduler.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// 0 runs the seeded deterministic scheduler; N >= 1 runs N OS
        /// worker threads.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Repeat the workload this many times (deterministic runs use
        /// seed, seed+1, ...).
        #[arg(long, default_value_t = 1)]
        iterations: u32,
        /// Write the scheduler event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write undo-log lines here.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Emit the report as JSON.
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Analyze { file } => {
            let source = fs::read_to_string(&file)
                .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", file.display()))?;
            for decl in fieldlock::dsl::parse_adts(&source)
                .map_err(|e| anyhow::anyhow!("{}: {e}", file.display()))?
            {
                print!("{}", analyze_report(&decl));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            file,
            mode,
            seed,
            workers,
            iterations,
            trace,
            log,
            json,
        } => {
            let source = fs::read_to_string(&file)
                .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", file.display()))?;
            let base = file.parent().unwrap_or(Path::new(".")).to_path_buf();
            let mut load = |path: &str| -> Result<String, String> {
                let resolved = base.join(path);
                fs::read_to_string(&resolved).map_err(|e| format!("{}: {e}", resolved.display()))
            };
            let workload = parse_workload(&source, &mut load)
                .map_err(|e| anyhow::anyhow!("{}: {e}", file.display()))?;
            let cfg = RunConfig {
                mode,
                seed,
                workers,
                iterations,
            };
            let (report, runs, verdict) = run_workload(&workload, &cfg);
            if let Some(path) = trace {
                let mut text = String::new();
                for (i, run) in runs.iter().enumerate() {
                    for event in &run.trace {
                        text.push_str(&format!("run={i} {event}\n"));
                    }
                }
                fs::write(&path, text)
                    .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
            }
            if let Some(path) = log {
                let mut text = String::new();
                for run in &runs {
                    for line in &run.log_lines {
                        text.push_str(line);
                        text.push('\n');
                    }
                }
                fs::write(&path, text)
                    .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
            }
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{report}");
            }
            match verdict {
                Verdict::Pass => Ok(ExitCode::SUCCESS),
                Verdict::Skipped => {
                    eprintln!(
                        "warning: committed set exceeds the permutation bound; verification skipped"
                    );
                    Ok(ExitCode::SUCCESS)
                }
                Verdict::Fail => {
                    eprintln!("error: outcome matches no serial execution");
                    Ok(ExitCode::from(1))
                }
            }
        }
    }
}
