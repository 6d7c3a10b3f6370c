use clap::Args;
use dyncontract::dynlp::{build_sequence_lp, optimal_for_sequence, optimal_freefall_by_lp, DynLpError, SequenceResult};
use dyncontract::freefall::optimal_freefall;
use dyncontract::ladder::{ladder_for, Family};
use dyncontract::setting::ContractSetting;
use dyncontract::statics::optimal_static;
use dyncontract::trajectory::{validate_trajectory, Trajectory};
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::instance;
use crate::output::{num, table, Report};
use crate::Common;

#[derive(Args, Serialize, Clone)]
pub struct SolveArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Restrict the general-contract search to free-fall LPs.
    #[arg(long)]
    pub freefall: bool,
    /// Explicit action sequence for the general-contract LP, comma separated (0-based).
    #[arg(long, value_delimiter = ',')]
    pub sequence: Option<Vec<usize>>,
    /// Print each sequence LP to stderr.
    #[arg(long)]
    pub dump_lp: bool,
}

fn lp_error(e: DynLpError) -> CliError {
    match e {
        DynLpError::EmptySequence | DynLpError::BadAction(_) | DynLpError::TooManyActions(_) => {
            CliError::Usage(e.to_string())
        }
        e => CliError::Solver(e.to_string()),
    }
}

fn segments_csv(setting: &ContractSetting, t: &Trajectory) -> String {
    let mut out = String::from("t_start,t_end,offer,action,principal_rate\n");
    let mut start = 0.0;
    for (k, s) in t.segments.iter().enumerate() {
        let c = t.contract(setting, k);
        let offer = match s.alpha() {
            Some(a) => a.to_string(),
            None => c.payments().iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" "),
        };
        let rate = setting.principal_utility(&c, s.action) + setting.reward_shift();
        out += &format!("{},{},{},{},{}\n", start, start + s.duration, offer, s.action, rate);
        start += s.duration;
    }
    out
}

fn check_valid(setting: &ContractSetting, t: &Trajectory, what: &str) -> Result<(), CliError> {
    let v = validate_trajectory(setting, t, 1e-7);
    if v.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(format!("{what} is not a valid trajectory: {v:?}")))
    }
}

pub fn run(setting: &ContractSetting, args: &SolveArgs) -> Result<Report, CliError> {
    let family = instance::family(setting, args.common.family, args.common.base.as_deref())?;
    if family.is_scalar() {
        if args.sequence.is_some() || args.freefall {
            return Err(CliError::Usage("--sequence and --freefall need --family general".into()));
        }
        scalar(setting, &family)
    } else {
        general(setting, args)
    }
}

fn scalar(setting: &ContractSetting, family: &Family) -> Result<Report, CliError> {
    let solver = |e: &dyn std::fmt::Display| CliError::Solver(e.to_string());
    let ladder = ladder_for(setting, family).map_err(|e| CliError::Usage(e.to_string()))?;
    let stat = optimal_static(setting, family).map_err(|e| solver(&e))?;
    let plan = optimal_freefall(setting, family).map_err(|e| solver(&e))?;
    check_valid(setting, &plan.trajectory, "the free-fall plan")?;
    let shift = setting.reward_shift();
    let (static_value, plan_value) = (stat.utility + shift, plan.utility + shift);
    let json = json!({
        "family": family,
        "ladder": { "order": ladder.order, "breakpoints": ladder.breakpoints },
        "static": stat,
        "static_value": static_value,
        "freefall": plan,
        "freefall_value": plan_value,
        "advantage": if static_value > 0.0 { Some(plan_value / static_value) } else { None },
        "start_breakpoint": plan.start_rung + 1,
        "end_breakpoint": plan.end_rung + 1,
    });
    let rows: Vec<Vec<String>> = (0..ladder.len())
        .map(|r| {
            vec![
                (r + 1).to_string(),
                ladder.order[r].to_string(),
                num(ladder.breakpoints[r]),
                num(ladder.expected_rewards[r] + shift),
            ]
        })
        .collect();
    let mut text = table(&["breakpoint", "action", "alpha", "reward"], &rows);
    text += &format!(
        "static optimum     {} (action {}, alpha {})\n",
        num(static_value),
        stat.action,
        num(stat.alpha.unwrap_or(0.0))
    );
    text += &format!(
        "free-fall optimum  {} (start alpha {}, lambda {}, breakpoints {} -> {} of {})\n",
        num(plan_value),
        num(plan.start_alpha),
        num(plan.lambda),
        plan.start_rung + 1,
        plan.end_rung + 1,
        ladder.len()
    );
    Ok(Report { json, text, csv: Some(segments_csv(setting, &plan.trajectory)), files: Vec::new() })
}

fn sequence_line(label: &str, r: &SequenceResult) -> String {
    let seq: Vec<String> = r.sequence.iter().map(|a| a.to_string()).collect();
    format!("{label:<20}{} (sequence {})\n", num(r.value), seq.join(","))
}

fn general(setting: &ContractSetting, args: &SolveArgs) -> Result<Report, CliError> {
    let stat = optimal_static(setting, &Family::General).map_err(|e| CliError::Solver(e.to_string()))?;
    let dump = |seq: &[usize], ff: bool| -> Result<(), CliError> {
        if args.dump_lp {
            let slp = build_sequence_lp(setting, seq, ff).map_err(lp_error)?;
            eprintln!("# sequence {seq:?} freefall={ff}\n{}", slp.lp);
        }
        Ok(())
    };
    let solve_seq = |seq: &[usize], ff: bool| -> Result<SequenceResult, CliError> {
        dump(seq, ff)?;
        let r = optimal_for_sequence(setting, seq, ff)
            .map_err(lp_error)?
            .ok_or_else(|| CliError::Solver(format!("sequence {seq:?} admits no valid trajectory")))?;
        check_valid(setting, &r.trajectory, "the LP trajectory")?;
        Ok(r)
    };
    let mut text = format!("static optimum      {} (action {})\n", num(stat.utility), stat.action);
    let (json, csv) = if let Some(seq) = &args.sequence {
        let r = solve_seq(seq, args.freefall)?;
        text += &sequence_line(if args.freefall { "free-fall LP" } else { "sequence LP" }, &r);
        let csv = segments_csv(setting, &r.trajectory);
        (json!({ "static": stat, "sequence": r, "freefall_only": args.freefall }), csv)
    } else {
        let ff = optimal_freefall_by_lp(setting).map_err(lp_error)?;
        dump(&ff.sequence, true)?;
        check_valid(setting, &ff.trajectory, "the free-fall LP trajectory")?;
        text += &sequence_line("best free-fall LP", &ff);
        let mut csv = segments_csv(setting, &ff.trajectory);
        let general = if args.freefall {
            None
        } else {
            let g = solve_seq(&ff.sequence, false)?;
            text += &sequence_line("general LP", &g);
            text += &format!("{:<20}{}\n", "gap", num(g.value - ff.value));
            csv = segments_csv(setting, &g.trajectory);
            Some(g)
        };
        let gap = general.as_ref().map(|g| g.value - ff.value);
        (json!({ "static": stat, "freefall": ff, "general": general, "gap": gap }), csv)
    };
    Ok(Report { json, text, csv: Some(csv), files: Vec::new() })
}
