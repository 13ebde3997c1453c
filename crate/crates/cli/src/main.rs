use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anoncloud_core::manager::PaymentMode;
use anoncloud_core::scenario::{self, read_trace, replay, write_trace, RunReport, ScenarioConfig};
use anoncloud_core::simnet::Adversary;
use clap::{Parser, Subcommand};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "anoncloud",
    version,
    about = "Run and analyse anonymous-cloud scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and check every invariant.
    Run {
        /// Scenario file; the built-in two-customer scenario if omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, env = "ANONCLOUD_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        payment_mode: Option<PaymentMode>,
        /// Replaces the scenario's adversary list. Repeatable.
        #[arg(long = "adversary")]
        adversaries: Vec<Adversary>,
        #[arg(long)]
        step_budget: Option<u64>,
        /// Override the number of slave nodes.
        #[arg(long)]
        slaves: Option<u32>,
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Write the JSON run report here.
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
    /// Recompute a run's verdicts from its trace file.
    Replay {
        trace: PathBuf,
        /// Additional adversary model to evaluate. Repeatable.
        #[arg(long = "adversary")]
        adversaries: Vec<Adversary>,
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
    /// Load and validate a scenario file.
    CheckConfig {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn write_report(path: &Path, report: &RunReport) -> Result<(), String> {
    let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), report)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn finish(report: &RunReport, report_out: Option<&Path>) -> ExitCode {
    print!("{}", report.render());
    if let Some(path) = report_out {
        if let Err(e) = write_report(path, report) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed: {}", report.failed_invariants().join(", "));
        ExitCode::from(EXIT_FAIL)
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    scenario: Option<PathBuf>,
    seed: Option<u64>,
    payment_mode: Option<PaymentMode>,
    adversaries: Vec<Adversary>,
    step_budget: Option<u64>,
    slaves: Option<u32>,
    trace_out: Option<PathBuf>,
    report_out: Option<PathBuf>,
) -> ExitCode {
    let mut config = match &scenario {
        Some(path) => match ScenarioConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => ScenarioConfig::canonical(1, 3),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(mode) = payment_mode {
        config.payment_mode = mode;
    }
    if !adversaries.is_empty() {
        config.adversaries = adversaries;
    }
    if let Some(budget) = step_budget {
        config.step_budget = budget;
    }
    if let Some(n) = slaves {
        config.nodes.slaves = n;
    }
    if let Err(e) = config.validate() {
        eprintln!("config error: {e}");
        return ExitCode::from(EXIT_CONFIG);
    }

    let outcome = match scenario::run(&config) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("run failed: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    };
    let mut report = outcome.report;
    if let Some(path) = &trace_out {
        let written = File::create(path).and_then(|f| {
            write_trace(
                BufWriter::new(f),
                &config,
                &outcome.transcript,
                &outcome.sessions,
            )
        });
        if let Err(e) = written {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(EXIT_FAIL);
        }
        report.transcript = Some(path.display().to_string());
    }
    finish(&report, report_out.as_deref())
}

fn cmd_replay(
    trace: PathBuf,
    adversaries: Vec<Adversary>,
    report_out: Option<PathBuf>,
) -> ExitCode {
    let parsed = File::open(&trace)
        .map_err(|e| e.to_string())
        .and_then(|f| read_trace(BufReader::new(f)).map_err(|e| e.to_string()));
    let trace_data = match parsed {
        Ok(t) => t,
        Err(e) => {
            eprintln!("trace error: {}: {e}", trace.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut report = replay(&trace_data, &adversaries);
    report.transcript = Some(trace.display().to_string());
    finish(&report, report_out.as_deref())
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            scenario,
            seed,
            payment_mode,
            adversaries,
            step_budget,
            slaves,
            trace_out,
            report_out,
        } => cmd_run(
            scenario,
            seed,
            payment_mode,
            adversaries,
            step_budget,
            slaves,
            trace_out,
            report_out,
        ),
        Command::Replay {
            trace,
            adversaries,
            report_out,
        } => cmd_replay(trace, adversaries, report_out),
        Command::CheckConfig { scenario } => match ScenarioConfig::load(&scenario) {
            Ok(c) => {
                println!(
                    "ok: {} slave nodes, circuit length {}, {} events",
                    c.nodes.slaves,
                    c.circuit_length,
                    c.events.len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("config error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}
