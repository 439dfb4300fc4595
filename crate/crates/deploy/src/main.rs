use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sls_core::architectures::Architecture;
use sls_deploy::commands::{cmd_compare, cmd_costs, cmd_probe, cmd_simulate, cmd_synthesize, DEFAULT_COMPARE_TOL};
use sls_deploy::{Context, DeployError};

#[derive(Parser)]
#[command(name = "sls", version, about = "Synthesize, deploy, and simulate FIR system-level controllers")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Solve the synthesis program; write the response and its constraint residuals.
    Synthesize(Common),
    /// Simulate the closed loop; write the trace and the message ledger.
    Simulate(Common),
    /// Deviation of each architecture's trace from the reference realization.
    Compare(Common),
    /// Predicted and measured memory, flops, and traffic per architecture.
    Costs(Common),
    /// Impulse responses from every injection point to every loop signal.
    Probe(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; defaults to the scenario's `outputs.dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated architecture ids; overrides the scenario.
    #[arg(long, value_delimiter = ',')]
    arch: Option<Vec<String>>,
    /// Comparison tolerance on the relative trace deviation.
    #[arg(long)]
    tol: Option<f64>,
}

fn architectures(names: &[String]) -> Result<Vec<Architecture>, DeployError> {
    names
        .iter()
        .map(|n| Architecture::from_name(n).ok_or_else(|| DeployError::Usage(format!("unknown architecture {n:?}"))))
        .collect()
}

fn run(cli: Cli) -> Result<i32, DeployError> {
    let (Verb::Synthesize(c) | Verb::Simulate(c) | Verb::Compare(c) | Verb::Costs(c) | Verb::Probe(c)) = &cli.verb;
    let mut ctx = Context::from_path(&c.scenario, c.seed)?;
    let out = c
        .out
        .clone()
        .or_else(|| ctx.scenario.outputs.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let archs = match &c.arch {
        Some(names) => architectures(names)?,
        None => ctx.scenario.compared(),
    };
    match &cli.verb {
        Verb::Synthesize(_) => {
            let s = cmd_synthesize(&ctx, &out)?;
            println!("objective {:.16e}", s.objective);
        }
        Verb::Simulate(_) => {
            if c.arch.is_some() {
                let [a] = archs.as_slice() else {
                    return Err(DeployError::Usage("simulate takes a single architecture".into()));
                };
                ctx.scenario.architecture = Some(a.name().into());
            }
            let s = cmd_simulate(&ctx, &out)?;
            println!("{} steps, {} messages", s.steps, s.messages);
        }
        Verb::Compare(_) => {
            let cmp = cmd_compare(&ctx, &archs, c.tol.unwrap_or(DEFAULT_COMPARE_TOL), &out)?;
            for (name, d) in cmp.names.iter().zip(&cmp.deviation[0]) {
                println!("{name:<24} {d:.3e}");
            }
            if !cmp.passed() {
                eprintln!("max deviation {:.3e} exceeds tolerance {:.3e}", cmp.max_vs_reference(), cmp.tol);
                return Ok(3);
            }
        }
        Verb::Costs(_) => {
            let s = cmd_costs(&ctx, &archs, &out)?;
            for r in &s.reports {
                println!(
                    "{:<24} memory {:>8}  flops/step {:>8}",
                    r.architecture.name(),
                    r.measured.memory.total(),
                    r.measured.flops_per_step
                );
            }
        }
        Verb::Probe(_) => {
            let g = cmd_probe(&ctx, &out)?;
            println!("max tail {:.3e}, all decayed: {}", g.max_tail(), g.all_decayed());
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
