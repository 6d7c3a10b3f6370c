//! Discrete-time simulation of a principal's schedule against a learning agent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learner::{ConfigError, Context, Learner, LearnerConfig};
use crate::setting::{Contract, ContractSetting};
use crate::trajectory::Trajectory;

const LEARNER_STREAM: u64 = 0;
const OUTCOME_STREAM: u64 = 1;
const FEEDBACK_STREAM: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("horizon must be at least one round")]
    ZeroHorizon,
    #[error("window must be at least one round")]
    ZeroWindow,
    #[error("schedule covers {got} rounds, expected {expected}")]
    Length { got: u64, expected: u64 },
    #[error("perturbation must be finite and non-negative, got {0}")]
    BadPerturbation(f64),
    #[error("invalid contract in run {run}: {reason}")]
    BadContract { run: usize, reason: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub contract: Contract,
    pub rounds: u64,
}

/// Per-round contracts as runs of identical contracts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSchedule {
    pub runs: Vec<Run>,
}

impl DiscreteSchedule {
    pub fn constant(contract: Contract, rounds: u64) -> Self {
        DiscreteSchedule { runs: vec![Run { contract, rounds }] }
    }

    pub fn total_rounds(&self) -> u64 {
        self.runs.iter().map(|r| r.rounds).sum()
    }

    pub fn check(&self, setting: &ContractSetting) -> Result<(), SimError> {
        for (run, r) in self.runs.iter().enumerate() {
            setting.check_contract(&r.contract).map_err(|reason| SimError::BadContract { run, reason })?;
        }
        Ok(())
    }
}

/// Default perturbation: `1e-3` times the largest reward.
pub fn default_perturbation(setting: &ContractSetting) -> f64 {
    1e-3 * setting.rewards().iter().cloned().fold(0.0, f64::max)
}

/// Offers each segment's contract for its share of `horizon` rounds, with
/// `delta` added to every nonzero payment. The rounding residue goes to the
/// last segment.
pub fn extrapolate_schedule(
    setting: &ContractSetting,
    trajectory: &Trajectory,
    horizon: u64,
    delta: f64,
) -> Result<DiscreteSchedule, SimError> {
    if horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(SimError::BadPerturbation(delta));
    }
    let total = trajectory.total_duration();
    let k = trajectory.len();
    let mut runs = Vec::with_capacity(k);
    let mut used = 0u64;
    for i in 0..k {
        let rounds = if i + 1 == k {
            horizon - used
        } else {
            let r = (trajectory.segments[i].duration / total * horizon as f64).round() as u64;
            r.min(horizon - used)
        };
        used += rounds;
        let c = trajectory.contract(setting, i);
        let contract = Contract(c.payments().iter().map(|&p| if p != 0.0 { p + delta } else { p }).collect());
        runs.push(Run { contract, rounds });
    }
    let schedule = DiscreteSchedule { runs };
    schedule.check(setting)?;
    Ok(schedule)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowStats {
    /// Last round (1-based) covered by the window.
    pub end: u64,
    pub frequencies: Vec<f64>,
    pub avg_principal: f64,
    pub avg_agent: f64,
    pub cumulative_regret: f64,
    pub sigma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub rounds: u64,
    pub config: LearnerConfig,
    /// Principal and agent utility with the learner's mixed strategy and expected outcomes.
    pub principal_total: f64,
    pub principal_avg: f64,
    pub agent_total: f64,
    pub agent_avg: f64,
    /// The same along the sampled actions and outcomes.
    pub realized_principal_total: f64,
    pub realized_agent_total: f64,
    /// Expected utility of the sampled actions, summed.
    pub learner_total: f64,
    pub sigma: Vec<f64>,
    pub action_counts: Vec<u64>,
    pub external_regret: f64,
    pub max_identity_error_expected: f64,
    pub max_identity_error_realized: f64,
    pub windows: Vec<WindowStats>,
    /// For each round, how far the sampled action's cumulative utility trailed the leader.
    #[serde(skip)]
    pub decision_gaps: Vec<f64>,
}

fn utility_range(setting: &ContractSetting, schedule: &DiscreteSchedule) -> f64 {
    let mut u = 0.0_f64;
    for run in &schedule.runs {
        for a in 0..setting.n() {
            for (o, &prob) in setting.forecast()[a].iter().enumerate() {
                if prob > 0.0 {
                    u = u.max((run.contract.payments()[o] - setting.costs()[a]).abs());
                }
            }
        }
    }
    u
}

fn sample(dist: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let x: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if x < acc {
            return i;
        }
    }
    dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn run_simulation(
    setting: &ContractSetting,
    schedule: &DiscreteSchedule,
    learner: &LearnerConfig,
    horizon: u64,
) -> Result<SimulationResult, SimError> {
    run_simulation_windowed(setting, schedule, learner, horizon, default_window(horizon))
}

/// Window length used when none is given: `T/200` rounds.
pub fn default_window(horizon: u64) -> u64 {
    (horizon / 200).max(1)
}

/// [`run_simulation`] with `window` rounds per reported window.
pub fn run_simulation_windowed(
    setting: &ContractSetting,
    schedule: &DiscreteSchedule,
    learner: &LearnerConfig,
    horizon: u64,
    window: u64,
) -> Result<SimulationResult, SimError> {
    if horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    if window == 0 {
        return Err(SimError::ZeroWindow);
    }
    if schedule.total_rounds() != horizon {
        return Err(SimError::Length { got: schedule.total_rounds(), expected: horizon });
    }
    schedule.check(setting)?;
    let range = learner.utility_range.unwrap_or_else(|| utility_range(setting, schedule));
    let mut run_of_round = schedule.runs.iter().flat_map(|r| std::iter::repeat_n(&r.contract, r.rounds as usize));
    simulate(setting, learner, horizon, range, window, &mut |_, _| run_of_round.next().expect("schedule length").clone())
}

/// Like [`run_simulation`], but the principal picks each contract from the
/// round index and the previous round's sampled action.
pub fn run_adaptive(
    setting: &ContractSetting,
    learner: &LearnerConfig,
    horizon: u64,
    utility_range: f64,
    principal: &mut dyn FnMut(u64, Option<usize>) -> Contract,
) -> Result<SimulationResult, SimError> {
    if horizon == 0 {
        return Err(SimError::ZeroHorizon);
    }
    simulate(setting, learner, horizon, utility_range, default_window(horizon), principal)
}

struct Round {
    contract: Contract,
    agent: Vec<f64>,
    principal: Vec<f64>,
}

fn simulate(
    setting: &ContractSetting,
    config: &LearnerConfig,
    horizon: u64,
    range: f64,
    window: u64,
    next_contract: &mut dyn FnMut(u64, Option<usize>) -> Contract,
) -> Result<SimulationResult, SimError> {
    config.validate()?;
    let n = setting.n();
    let m = setting.m();
    let forecast = setting.forecast();
    let rewards = setting.rewards();
    let costs = setting.costs();
    let welfare: Vec<f64> = (0..n).map(|a| setting.welfare(a)).collect();

    let mut base = ChaCha8Rng::seed_from_u64(config.seed);
    base.set_stream(LEARNER_STREAM);
    let mut learner_rng = base.clone();
    let mut outcome_rng = base.clone();
    outcome_rng.set_stream(OUTCOME_STREAM);
    let mut feedback_rng = base;
    feedback_rng.set_stream(FEEDBACK_STREAM);

    let mut learner = Learner::new(config.clone(), n, horizon, range);

    let mut sigma = vec![0.0; n];
    let mut counts = vec![0u64; n];
    let mut gaps = Vec::with_capacity(horizon as usize);
    let mut windows = Vec::new();
    let (mut p_total, mut a_total, mut rp_total, mut ra_total, mut learner_total) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut err_exp, mut err_real) = (0.0_f64, 0.0_f64);
    let (mut w_counts, mut w_p, mut w_a) = (vec![0u64; n], 0.0, 0.0);
    let mut round: Option<Round> = None;
    let mut last_action = None;

    for t in 0..horizon {
        let contract = next_contract(t, last_action);
        if round.as_ref().is_none_or(|r| r.contract != contract) {
            setting
                .check_contract(&contract)
                .map_err(|reason| SimError::BadContract { run: t as usize, reason })?;
            let agent = (0..n).map(|a| setting.agent_utility(&contract, a)).collect();
            let principal = (0..n).map(|a| setting.principal_utility(&contract, a)).collect();
            round = Some(Round { contract, agent, principal });
        }
        let r = round.as_ref().unwrap();

        let ctx = Context { round: t, horizon, sigma: &sigma, principal_utility: &r.principal };
        let dist = learner.distribution(&ctx).to_vec();
        let a = sample(&dist, &mut learner_rng);
        let o = sample(&forecast[a], &mut outcome_rng);
        let pay = r.contract.payments()[o];

        let (mut ep, mut ea, mut ew) = (0.0, 0.0, 0.0);
        for i in 0..n {
            ep += dist[i] * r.principal[i];
            ea += dist[i] * r.agent[i];
            ew += dist[i] * welfare[i];
        }
        err_exp = err_exp.max((ep + ea - ew).abs());
        let (rp, ra) = (rewards[o] - pay, pay - costs[a]);
        err_real = err_real.max((rp + ra - (rewards[o] - costs[a])).abs());
        p_total += ep;
        a_total += ea;
        rp_total += rp;
        ra_total += ra;
        learner_total += r.agent[a];

        let leader = sigma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        gaps.push(leader - sigma[a]);

        let contract = &r.contract;
        let mut sample_utility = |i: usize, rng: &mut ChaCha8Rng| {
            let oi = sample(&forecast[i], rng);
            contract.payments()[oi] - costs[i]
        };
        learner.update(a, &r.agent, ra, &mut feedback_rng, &mut sample_utility);
        for i in 0..n {
            sigma[i] += r.agent[i];
        }
        counts[a] += 1;
        last_action = Some(a);

        w_counts[a] += 1;
        w_p += ep;
        w_a += ea;
        let done = t + 1;
        if done % window == 0 || done == horizon {
            let len = w_counts.iter().sum::<u64>() as f64;
            let best = sigma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            windows.push(WindowStats {
                end: done,
                frequencies: w_counts.iter().map(|&c| c as f64 / len).collect(),
                avg_principal: w_p / len,
                avg_agent: w_a / len,
                cumulative_regret: best - learner_total,
                sigma: sigma.clone(),
            });
            w_counts = vec![0; n];
            w_p = 0.0;
            w_a = 0.0;
        }
    }
    let _ = m;
    let best = sigma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tf = horizon as f64;
    Ok(SimulationResult {
        rounds: horizon,
        config: config.clone(),
        principal_total: p_total,
        principal_avg: p_total / tf,
        agent_total: a_total,
        agent_avg: a_total / tf,
        realized_principal_total: rp_total,
        realized_agent_total: ra_total,
        learner_total,
        sigma,
        action_counts: counts,
        external_regret: best - learner_total,
        max_identity_error_expected: err_exp,
        max_identity_error_realized: err_real,
        windows,
        decision_gaps: gaps,
    })
}

/// Fraction of rounds whose sampled action trailed the leader by more than `gamma * T`.
pub fn mean_based_violation(result: &SimulationResult, gamma: f64) -> f64 {
    let limit = gamma * result.rounds as f64;
    let bad = result.decision_gaps.iter().filter(|&&g| g > limit).count();
    bad as f64 / result.rounds as f64
}

pub fn external_regret(result: &SimulationResult) -> f64 {
    result.external_regret
}

/// CSV with one row per window.
pub fn windows_csv(result: &SimulationResult) -> String {
    let n = result.sigma.len();
    let mut out = String::from("t_window");
    for a in 0..n {
        out.push_str(&format!(",freq_{a}"));
    }
    out.push_str(",avg_principal,avg_agent,cumulative_regret\n");
    for w in &result.windows {
        out.push_str(&w.end.to_string());
        for f in &w.frequencies {
            out.push_str(&format!(",{f}"));
        }
        out.push_str(&format!(",{},{},{}\n", w.avg_principal, w.avg_agent, w.cumulative_regret));
    }
    out
}
