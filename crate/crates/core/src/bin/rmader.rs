use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rmader::harness::{self, emit_report, run_experiment, ExperimentSpec, HarnessError};
use rmader::netsim::{log_to_jsonl, DelayModel};
use rmader::protocol::Mode;

#[derive(Parser)]
#[command(
    name = "rmader",
    version,
    about = "Multi-agent trajectory deconfliction under communication delay"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and write a report directory.
    Run {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the spec's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
    },
    /// Run one scripted two-agent case and print its outcome.
    Case {
        #[arg(long)]
        name: String,
        #[arg(long, value_parser = parse_mode)]
        mode: Mode,
        /// Writes the event log as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Print delay percentiles for each δ_introd of a spec.
    Calibrate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "mader" => Ok(Mode::Mader),
        "rmader" => Ok(Mode::Rmader),
        _ => Err(format!("unknown mode {s:?}")),
    }
}

fn load_spec(path: &PathBuf) -> Result<ExperimentSpec, HarnessError> {
    ExperimentSpec::from_json(&fs::read_to_string(path)?)
}

fn execute(cmd: Command) -> Result<bool, HarnessError> {
    match cmd {
        Command::Run {
            spec,
            out,
            seed,
            parallel,
        } => {
            let mut spec = load_spec(&spec)?;
            if let Some(s) = seed {
                spec.base_seed = s;
            }
            let report = run_experiment(&spec, parallel)?;
            emit_report(&report, &out)?;
            for c in &report.summaries {
                println!(
                    "cell {:>3} {:<6} introd {:.3} dc {:<10} runs {:>4} errors {:>3} collisions {:>6.2}% stops {:.3} travel {:.3}",
                    c.cell,
                    c.mode,
                    c.delta_introd,
                    c.delta_dc_label,
                    c.runs,
                    c.errors,
                    c.collision_pct,
                    c.avg_stops,
                    c.avg_travel_time
                );
            }
            for r in report.runs.iter().filter(|r| !r.error.is_empty()) {
                eprintln!("cell {} seed {}: {}", r.cell, r.seed, r.error);
            }
            Ok(!report.any_errors())
        }
        Command::Case { name, mode, log } => {
            let r = harness::run_case(&name, mode)?;
            println!("{name} {mode}: collisions {}", r.collisions);
            for d in &r.discards {
                println!("  t {:.3} agent {} discarded at {}", d.t, d.agent, d.stage);
            }
            for (t, a) in &r.commits {
                println!("  t {t:.3} agent {a} committed");
            }
            if let Some(path) = log {
                fs::write(path, log_to_jsonl(&r.output.log))?;
            }
            Ok(true)
        }
        Command::Calibrate { spec, samples } => {
            let spec = load_spec(&spec)?;
            let n = samples.unwrap_or(spec.calibration_samples);
            for &introd in &spec.delta_introd {
                let model = DelayModel {
                    delta_introd: introd,
                    jitter: spec.jitter,
                };
                let stats = harness::calibrate(&model, n, spec.base_seed);
                let p = |q| stats.percentile(q).unwrap_or(f64::NAN);
                println!(
                    "introd {introd:.3}: min {:.4} p50 {:.4} p75 {:.4} p90 {:.4} p99 {:.4} max {:.4} cap {:.4}",
                    stats.min().unwrap_or(f64::NAN),
                    p(50.0),
                    p(75.0),
                    p(90.0),
                    p(99.0),
                    stats.max().unwrap_or(f64::NAN),
                    model.max_delay()
                );
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
