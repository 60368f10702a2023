use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use polyshare_cli::commands::{cmd_bench, cmd_eval, cmd_simulate, metrics_path, BenchArgs, EvalArgs, SimulateArgs};

#[derive(Debug, Parser)]
#[command(name = "polyshare", version, about = "Secret-shared evaluation of polynomial control laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the law once on a given state and compare with plaintext.
    Eval(EvalArgs),
    /// Run the closed loop against the plant model.
    Simulate(SimulateArgs),
    /// Count operations and messages per step for every scheme.
    Bench(BenchArgs),
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Eval(args) => {
            let report = cmd_eval(&args)?;
            emit(args.common.out.as_deref(), &report.text)?;
            if !report.matched {
                eprintln!("error: secure result differs from plaintext");
                return Ok(ExitCode::from(2));
            }
        }
        Command::Simulate(args) => {
            let report = cmd_simulate(&args)?;
            let metrics_out = args.metrics_out.clone().or_else(|| args.common.out.as_deref().map(metrics_path));
            match &args.common.out {
                Some(p) => {
                    write(p, &report.trajectory_csv)?;
                    print!("{}", report.summary);
                    println!("trajectory: {}", p.display());
                }
                None => {
                    print!("{}", report.trajectory_csv);
                    eprint!("{}", report.summary);
                }
            }
            if let Some(m) = metrics_out {
                if !report.run.step_metrics.is_empty() {
                    write(&m, &report.metrics_csv)?;
                    eprintln!("metrics: {}", m.display());
                }
            }
            if report.run.diverged {
                eprintln!("error: the state left the safety box");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Bench(args) => {
            let report = cmd_bench(&args)?;
            emit(args.common.out.as_deref(), &report.render())?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
