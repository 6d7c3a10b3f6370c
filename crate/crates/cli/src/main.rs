mod error;
mod horizon;
mod instance;
mod output;
mod simulate;
mod solve;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use error::CliError;
use instance::FamilyArg;
use output::{Format, Report, RunManifest};

/// Optimal dynamic contracts against no-regret learning agents.
#[derive(Parser)]
#[command(name = "dyncontract", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Static and free-fall optima, and sequence LPs for general contracts.
    Solve(solve::SolveArgs),
    /// Play a contract trajectory against a learning agent.
    Simulate(simulate::SimulateArgs),
    /// Unknown-horizon analysis: potential, threshold and robust schedule.
    #[command(args_conflicts_with_subcommands = true)]
    Horizon(horizon::HorizonCommand),
}

#[derive(Args, Serialize, Clone)]
pub struct Common {
    /// Built-in id (fig1, counterexample-4x4, winwin-N) or path to an instance JSON file.
    #[arg(long, default_value = "fig1")]
    pub instance: String,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Base contract of the scaled family, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub base: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Output directory; defaults to $DYNCONTRACT_OUT_DIR when set.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn flags<T: Serialize>(args: &T) -> BTreeMap<String, Value> {
    match serde_json::to_value(args).expect("arguments serialize") {
        Value::Object(m) => m.into_iter().filter(|(_, v)| !v.is_null()).collect(),
        _ => BTreeMap::new(),
    }
}

fn execute<T: Serialize>(
    name: &str,
    common: &Common,
    args: &T,
    seed: Option<u64>,
    run: impl FnOnce(&dyncontract::setting::ContractSetting) -> Result<Report, CliError> + Send,
) -> Result<(), CliError> {
    let setting = instance::load(&common.instance)?;
    let manifest = RunManifest {
        command: name.to_string(),
        instance: common.instance.clone(),
        instance_hash: instance::content_hash(&setting),
        flags: flags(args),
        seed,
        outputs: Vec::new(),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let report = match common.jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| run(&setting))?,
        None => run(&setting)?,
    };
    output::emit(report, manifest, common.format, common.out.clone())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(a) => execute("solve", &a.common, &a, None, |s| solve::run(s, &a)),
        Command::Simulate(a) => execute("simulate", &a.common, &a, Some(a.seed), |s| simulate::run(s, &a)),
        Command::Horizon(h) => match h.action {
            Some(horizon::HorizonAction::Probe(p)) => {
                execute("horizon probe", &p.common, &p, Some(p.seed), |s| horizon::run_probe(s, &p))
            }
            None => execute("horizon", &h.args.common, &h.args, None, |s| horizon::run(s, &h.args)),
        },
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
