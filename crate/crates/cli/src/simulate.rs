use std::fs;

use clap::{Args, ValueEnum};
use dyncontract::dynlp::{optimal_freefall_by_lp, trajectory_value};
use dyncontract::freefall::optimal_freefall;
use dyncontract::learner::{Algorithm, Feedback, LearnerConfig, LearningRate};
use dyncontract::setting::ContractSetting;
use dyncontract::sim::{
    default_perturbation, default_window, extrapolate_schedule, mean_based_violation, run_simulation_windowed,
    windows_csv, SimError, SimulationResult,
};
use dyncontract::statics::optimal_static;
use dyncontract::trajectory::{validate_trajectory, Segment, Trajectory};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::instance;
use crate::output::{num, table, Report};
use crate::Common;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerArg {
    Ftl,
    Mw,
    Exp3,
    Adversarial,
    Laggard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackArg {
    ExpectedFull,
    RealizedFull,
    Bandit,
}

#[derive(Args, Serialize, Clone)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// optimal-freefall, static-opt, or a trajectory JSON file.
    #[arg(long, visible_alias = "schedule", default_value = "optimal-freefall")]
    pub plan: String,
    #[arg(long, value_enum, default_value = "mw")]
    pub learner: LearnerArg,
    /// Defaults to bandit for EXP3 and expected-full otherwise.
    #[arg(long, value_enum)]
    pub feedback: Option<FeedbackArg>,
    #[arg(long = "T", default_value_t = 200_000)]
    pub t: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive seeds to run, starting at --seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Perturbation added to nonzero payments; 1e-3 times the largest reward by default.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Rounds per CSV window; T/200 by default.
    #[arg(long)]
    pub window: Option<u64>,
    /// Fixed learning rate instead of the default schedule.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Near-leader window of the adversarial learner and of the mean-based diagnostic; T^-1/2 by default.
    #[arg(long)]
    pub gamma: Option<f64>,
}

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::ZeroHorizon | SimError::ZeroWindow | SimError::BadPerturbation(_) | SimError::Config(_) => {
            CliError::Usage(e.to_string())
        }
        e => CliError::Solver(e.to_string()),
    }
}

fn trajectory(setting: &ContractSetting, args: &SimulateArgs) -> Result<Trajectory, CliError> {
    let family = instance::family(setting, args.common.family, args.common.base.as_deref())?;
    let solver = |e: &dyn std::fmt::Display| CliError::Solver(e.to_string());
    match args.plan.as_str() {
        "optimal-freefall" if family.is_scalar() => {
            Ok(optimal_freefall(setting, &family).map_err(|e| solver(&e))?.trajectory)
        }
        "optimal-freefall" => Ok(optimal_freefall_by_lp(setting).map_err(|e| solver(&e))?.trajectory),
        "static-opt" => {
            let s = optimal_static(setting, &family).map_err(|e| solver(&e))?;
            let seg = match s.alpha {
                Some(a) => Segment::scalar(a, 1.0, s.action),
                None => Segment::general(s.contract, 1.0, s.action),
            };
            Ok(Trajectory::new(family, vec![seg]))
        }
        path => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
            let t: Trajectory =
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid trajectory {path}: {e}")))?;
            let v = validate_trajectory(setting, &t, 1e-7);
            if !v.is_empty() {
                return Err(CliError::Usage(format!("trajectory {path} is invalid: {v:?}")));
            }
            Ok(t)
        }
    }
}

fn config(args: &SimulateArgs, seed: u64) -> LearnerConfig {
    let algorithm = match args.learner {
        LearnerArg::Ftl => Algorithm::FollowTheLeader,
        LearnerArg::Mw => Algorithm::MultiplicativeWeights,
        LearnerArg::Exp3 => Algorithm::Exp3,
        LearnerArg::Adversarial => Algorithm::AdversarialMeanBased,
        LearnerArg::Laggard => Algorithm::FollowTheLaggard,
    };
    let feedback = match args.feedback {
        Some(FeedbackArg::ExpectedFull) => Feedback::ExpectedFull,
        Some(FeedbackArg::RealizedFull) => Feedback::RealizedFull,
        Some(FeedbackArg::Bandit) => Feedback::Bandit,
        None if algorithm == Algorithm::Exp3 => Feedback::Bandit,
        None => Feedback::ExpectedFull,
    };
    let mut c = LearnerConfig::new(algorithm, feedback, seed);
    if let Some(eta) = args.eta {
        c.learning_rate = LearningRate::Fixed(eta);
    }
    c.gamma = args.gamma;
    c
}

pub fn run(setting: &ContractSetting, args: &SimulateArgs) -> Result<Report, CliError> {
    if args.t == 0 {
        return Err(CliError::Usage("--T must be at least 1".into()));
    }
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let traj = trajectory(setting, args)?;
    let delta = args.delta.unwrap_or_else(|| default_perturbation(setting));
    let window = args.window.unwrap_or_else(|| default_window(args.t));
    let schedule = extrapolate_schedule(setting, &traj, args.t, delta).map_err(sim_error)?;
    let gamma = args.gamma.unwrap_or(1.0 / (args.t as f64).sqrt());
    let results: Vec<Result<SimulationResult, SimError>> = (0..args.seeds)
        .into_par_iter()
        .map(|k| run_simulation_windowed(setting, &schedule, &config(args, args.seed + k), args.t, window))
        .collect();
    let results: Vec<SimulationResult> = results.into_iter().collect::<Result<_, _>>().map_err(sim_error)?;
    for (k, r) in results.iter().enumerate() {
        if r.max_identity_error_expected > 1e-9 {
            return Err(CliError::Invariant(format!(
                "welfare identity off by {} for seed {}",
                r.max_identity_error_expected,
                args.seed + k as u64
            )));
        }
    }
    let target = trajectory_value(setting, &traj);
    let rounds = args.t as f64;
    let runs: Vec<_> = results
        .iter()
        .enumerate()
        .map(|(k, r)| {
            json!({
                "seed": args.seed + k as u64,
                "principal_avg": r.principal_avg,
                "agent_avg": r.agent_avg,
                "realized_principal_avg": r.realized_principal_total / rounds,
                "realized_agent_avg": r.realized_agent_total / rounds,
                "external_regret": r.external_regret,
                "mean_based_violation": mean_based_violation(r, gamma),
                "action_frequencies": r.action_counts.iter().map(|&c| c as f64 / rounds).collect::<Vec<_>>(),
                "max_identity_error_expected": r.max_identity_error_expected,
                "max_identity_error_realized": r.max_identity_error_realized,
            })
        })
        .collect();
    let mean = results.iter().map(|r| r.principal_avg).sum::<f64>() / results.len() as f64;
    let sd = (results.iter().map(|r| (r.principal_avg - mean).powi(2)).sum::<f64>() / results.len() as f64).sqrt();
    let json = json!({
        "trajectory": traj,
        "target_principal_avg": target,
        "delta": delta,
        "window": window,
        "diagnostic_gamma": gamma,
        "learner": results[0].config,
        "mean_principal_avg": mean,
        "sd_principal_avg": sd,
        "runs": runs,
    });
    let rows: Vec<Vec<String>> = results
        .iter()
        .enumerate()
        .map(|(k, r)| {
            vec![
                (args.seed + k as u64).to_string(),
                num(r.principal_avg),
                num(r.agent_avg),
                num(r.external_regret),
                num(mean_based_violation(r, gamma)),
            ]
        })
        .collect();
    let mut text = table(&["seed", "principal", "agent", "regret", "mb_violation"], &rows);
    text += &format!("mean principal {} (target {}, sd {})\n", num(mean), num(target), num(sd));
    let mut csv = String::new();
    let mut files = Vec::new();
    for (k, r) in results.iter().enumerate() {
        let seed = args.seed + k as u64;
        let body = windows_csv(r);
        for (i, line) in body.lines().enumerate() {
            if i == 0 {
                if k == 0 {
                    csv += &format!("seed,{line}\n");
                }
            } else {
                csv += &format!("{seed},{line}\n");
            }
        }
        if args.seeds > 1 {
            files.push((format!("simulate-seed-{seed}.csv"), body));
        }
    }
    Ok(Report { json, text, csv: Some(csv), files })
}
