use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use swarmleak::harness::{run_scenario, selfcheck, sweep, write_outputs, write_sweep, ScenarioConfig};
use swarmleak::Error;

#[derive(Parser)]
#[command(name = "swarmleak", version, about = "Membership leakage experiments on simulated swarm learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its report files.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write per-target MMD distances (differential attacks).
        #[arg(long)]
        trace: bool,
    },
    /// Run the scenario once per value of one config field.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// JSON list, e.g. '[2,3,4]'.
        #[arg(long)]
        values: String,
        #[arg(long, default_value = "sweep-out")]
        out: PathBuf,
    },
    /// Backprop against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Kernel-trick MMD against the explicit double sum.
    Mmdcheck {
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn execute(cmd: Command) -> Result<bool, Error> {
    match cmd {
        Command::Run { config, out, trace } => {
            let cfg = ScenarioConfig::from_path(&config)?;
            let outcome = run_scenario(&cfg)?;
            write_outputs(&outcome, &out, trace)?;
            let m = &outcome.report.metrics;
            println!(
                "{:?}: accuracy {:.4} macro_f1 {:.4} baseline {:.4} ({} targets) -> {}",
                cfg.attack,
                m.accuracy,
                m.macro_f1,
                m.baseline,
                m.count,
                out.display()
            );
            Ok(true)
        }
        Command::Sweep { config, axis, values, out } => {
            let cfg = ScenarioConfig::from_path(&config)?;
            let values: Vec<serde_json::Value> = serde_json::from_str(&values).map_err(|e| Error::Config {
                path: "--values".into(),
                message: format!("expected a JSON list: {e}"),
            })?;
            let result = sweep(&cfg, &axis, &values)?;
            write_sweep(&result, &out)?;
            for p in result.points() {
                println!(
                    "{}={} accuracy {:.4} macro_f1 {:.4} baseline {:.4}",
                    p.axis, p.value, p.accuracy, p.macro_f1, p.baseline
                );
            }
            Ok(true)
        }
        Command::Gradcheck { trials, seed } => report(selfcheck::gradcheck(trials, seed)?),
        Command::Mmdcheck { trials, seed } => report(selfcheck::mmdcheck(trials, seed)?),
    }
}

fn report(s: selfcheck::CheckSummary) -> Result<bool, Error> {
    println!(
        "{}: {} trials, max error {:.3e} (tolerance {:.0e}) {}",
        s.name,
        s.trials,
        s.max_error,
        s.tolerance,
        if s.passed { "PASS" } else { "FAIL" }
    );
    Ok(s.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) if e.is_config_error() => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
