use clap::{Args, Subcommand};
use dyncontract::freefall::optimal_freefall;
use dyncontract::horizon::{
    infeasibility_gamma, infeasibility_probe, potential_audit, potential_function, robust_schedule, static_value,
    HorizonError, RobustCase,
};
use dyncontract::ladder::Family;
use dyncontract::setting::ContractSetting;
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::instance;
use crate::output::{num, table, Report};
use crate::Common;

#[derive(Args)]
pub struct HorizonCommand {
    #[command(subcommand)]
    pub action: Option<HorizonAction>,
    #[command(flatten)]
    pub args: HorizonArgs,
}

#[derive(Subcommand)]
pub enum HorizonAction {
    /// Search random schedules for one that keeps a 1 + eps advantage.
    Probe(ProbeArgs),
}

#[derive(Args, Serialize, Clone)]
pub struct HorizonArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Target advantage; defaults to the known-horizon advantage minus one.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Ratio between the longest and shortest possible horizon.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
}

#[derive(Args, Serialize, Clone)]
pub struct ProbeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn horizon_error(e: HorizonError) -> CliError {
    match e {
        HorizonError::BadGamma(_)
        | HorizonError::BadEps(_)
        | HorizonError::NonPositiveStatic(_)
        | HorizonError::BadWeights(_)
        | HorizonError::EmptySchedule
        | HorizonError::InvalidComponent { .. }
        | HorizonError::NotScalar
        | HorizonError::BadGrid
        | HorizonError::Ladder(_) => CliError::Usage(e.to_string()),
        e => CliError::Solver(e.to_string()),
    }
}

struct Checked {
    family: Family,
    eps: f64,
    r_star: f64,
}

fn check(setting: &ContractSetting, common: &Common, eps: Option<f64>, gamma: f64) -> Result<Checked, CliError> {
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(CliError::Usage(format!("--gamma must be at least 1, got {gamma}")));
    }
    let family = instance::family(setting, common.family, common.base.as_deref())?;
    if !family.is_scalar() {
        return Err(CliError::Usage("horizon analysis needs a linear or scaled family".into()));
    }
    let r_star = static_value(setting, &family).map_err(horizon_error)?;
    let eps = match eps {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => return Err(CliError::Usage(format!("--eps must be positive, got {e}"))),
        None => {
            let plan = optimal_freefall(setting, &family).map_err(|e| CliError::Solver(e.to_string()))?;
            let e = (plan.utility + setting.reward_shift()) / r_star - 1.0;
            if e <= 0.0 {
                return Err(CliError::Usage("no dynamic advantage on this instance; pass --eps".into()));
            }
            e
        }
    };
    Ok(Checked { family, eps, r_star })
}

pub fn run(setting: &ContractSetting, args: &HorizonArgs) -> Result<Report, CliError> {
    let Checked { family, eps, r_star } = check(setting, &args.common, args.eps, args.gamma)?;
    let pf = potential_function(setting, &family).map_err(horizon_error)?;
    let gamma_bar = infeasibility_gamma(&pf, eps, r_star);
    let robust = robust_schedule(setting, &family, args.gamma).map_err(horizon_error)?;
    if robust.certified > robust.plan_advantage.max(1.0) + 1e-9 {
        return Err(CliError::Invariant(format!(
            "certified advantage {} exceeds the known-horizon advantage {}",
            robust.certified, robust.plan_advantage
        )));
    }
    if matches!(robust.case, RobustCase::EndsAbove | RobustCase::KnownHorizon | RobustCase::NoAdvantage)
        && robust.measured.value < robust.certified - 1e-9
    {
        return Err(CliError::Invariant(format!(
            "measured advantage {} is below the certified {}",
            robust.measured.value, robust.certified
        )));
    }
    let plan = optimal_freefall(setting, &family).map_err(|e| CliError::Solver(e.to_string()))?;
    let audit = potential_audit(setting, &family, &plan.trajectory).map_err(horizon_error)?;
    if audit.min_slack < -1e-6 {
        return Err(CliError::Invariant(format!("potential audit slack {} at t = {}", audit.min_slack, audit.at)));
    }
    let json = json!({
        "family": family,
        "psi": pf,
        "static_value": r_star,
        "eps": eps,
        "gamma": args.gamma,
        "gamma_bar": gamma_bar,
        "robust": robust,
        "plan_audit_min_slack": audit.min_slack,
    });
    let rows: Vec<Vec<String>> = (0..pf.breakpoints.len())
        .map(|r| vec![(r + 1).to_string(), num(pf.breakpoints[r]), num(pf.values[r]), num(pf.slopes[r])])
        .collect();
    let mut text = table(&["breakpoint", "alpha", "psi", "slope"], &rows);
    text += &format!("static value       {}\n", num(r_star));
    text += &format!("eps                {}\n", num(eps));
    text += &format!("gamma bar          {}\n", num(gamma_bar));
    text += &format!("robust case        {}\n", serde_json::to_value(robust.case).expect("case serializes").as_str().unwrap_or(""));
    text += &format!("plan advantage     {}\n", num(robust.plan_advantage));
    text += &format!("certified          {}\n", num(robust.certified));
    text += &format!("worst case at {}   {}\n", num(args.gamma), num(robust.measured.value));
    let mut csv = String::from("alpha,psi\n");
    for r in 0..pf.breakpoints.len() {
        csv += &format!("{},{}\n", pf.breakpoints[r], pf.values[r]);
    }
    Ok(Report { json, text, csv: Some(csv), files: Vec::new() })
}

pub fn run_probe(setting: &ContractSetting, args: &ProbeArgs) -> Result<Report, CliError> {
    let Checked { family, eps, .. } = check(setting, &args.common, args.eps, args.gamma)?;
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let r = infeasibility_probe(setting, &family, eps, args.gamma, args.samples, args.seed).map_err(horizon_error)?;
    let json = json!({ "eps": eps, "gamma": args.gamma, "probe": r });
    let text = format!(
        "samples            {}\nbest advantage     {} (sample {})\ntarget             {}\ngamma bar          {}\nwitness found      {}\n",
        r.samples,
        num(r.max_advantage),
        r.best_sample,
        num(1.0 + eps),
        num(r.threshold_gamma),
        r.feasible_witness
    );
    Ok(Report { json, text, csv: None, files: Vec::new() })
}
