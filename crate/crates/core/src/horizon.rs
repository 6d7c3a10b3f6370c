//! Robustness to an unknown time horizon.
//!
//! The horizon is only known to lie in `[T/gamma, T]`. Schedules are compared
//! with the best static contract by their worst ratio over that window.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freefall::{freefall_plan, freefall_utility, optimal_freefall, FreeFallError, FreeFallPlan};
use crate::ladder::{ladder_for, BreakpointLadder, Family, LadderError};
use crate::setting::ContractSetting;
use crate::statics::{optimal_static, StaticError};
use crate::trajectory::{prefix_util, realize_on, validate_trajectory, Trajectory, TrajectoryError, Violation};

pub const DEFAULT_GRID: usize = 1000;
const WEIGHT_TOL: f64 = 1e-12;
const MAX_COMPONENTS: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum HorizonError {
    #[error("gamma must be at least 1, got {0}")]
    BadGamma(f64),
    #[error("eps must be positive, got {0}")]
    BadEps(f64),
    #[error("the static optimum earns {0}; advantages need a positive baseline")]
    NonPositiveStatic(f64),
    #[error("weights must be positive and sum to 1 (sum {0})")]
    BadWeights(f64),
    #[error("schedule has no components")]
    EmptySchedule,
    #[error("component {component} is invalid: {violations:?}")]
    InvalidComponent { component: usize, violations: Vec<Violation> },
    #[error("trajectory is not scalar")]
    NotScalar,
    #[error("grid needs at least 2 points")]
    BadGrid,
    #[error(transparent)]
    Ladder(#[from] LadderError),
    #[error(transparent)]
    FreeFall(#[from] FreeFallError),
    #[error(transparent)]
    Static(#[from] StaticError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// Convex piecewise-linear potential of the running average scalar.
/// On rung `r` its slope is the rung's payment per unit scalar, which is the
/// expected reward for linear contracts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialFunction {
    pub breakpoints: Vec<f64>,
    pub slopes: Vec<f64>,
    /// `values[r]` is the potential at `breakpoints[r]`.
    pub values: Vec<f64>,
}

impl PotentialFunction {
    pub fn new(ladder: &BreakpointLadder) -> Self {
        let mut values = vec![0.0];
        for r in 1..ladder.len() {
            let prev = values[r - 1];
            values.push(prev + (ladder.breakpoints[r] - ladder.breakpoints[r - 1]) * ladder.slopes[r - 1]);
        }
        PotentialFunction { breakpoints: ladder.breakpoints.clone(), slopes: ladder.slopes.clone(), values }
    }

    pub fn top(&self) -> f64 {
        *self.breakpoints.last().expect("nonempty ladder")
    }

    pub fn max_value(&self) -> f64 {
        *self.values.last().expect("nonempty ladder")
    }

    fn rung(&self, alpha: f64) -> usize {
        self.breakpoints.iter().rposition(|&b| b <= alpha).unwrap_or(0)
    }
}

pub fn potential_function(setting: &ContractSetting, family: &Family) -> Result<PotentialFunction, HorizonError> {
    Ok(PotentialFunction::new(&ladder_for(setting, family)?))
}

/// The potential at `alpha`, clamped to `[0, top breakpoint]`.
pub fn potential(pf: &PotentialFunction, alpha: f64) -> f64 {
    if alpha >= pf.top() {
        return pf.max_value();
    }
    let a = alpha.max(0.0);
    let r = pf.rung(a);
    pf.values[r] + (a - pf.breakpoints[r]) * pf.slopes[r]
}

/// Horizon ratio above which no schedule keeps a `1 + eps` advantage.
pub fn infeasibility_gamma(pf: &PotentialFunction, eps: f64, r_star: f64) -> f64 {
    (pf.max_value() / (eps * r_star)).exp()
}

/// Integral of the potential of `alpha + c / s` over `[s1, s2]`, `0 < s1 <= s2`.
fn potential_integral(pf: &PotentialFunction, alpha: f64, c: f64, s1: f64, s2: f64) -> f64 {
    if c == 0.0 {
        return potential(pf, alpha) * (s2 - s1);
    }
    // the average is monotone in s, so it crosses each breakpoint at most once
    let mut cuts = vec![s1, s2];
    for &b in &pf.breakpoints[1..] {
        if b != alpha {
            let s = c / (b - alpha);
            if s > s1 && s < s2 {
                cuts.push(s);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let top = pf.top();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = alpha + c / (0.5 * (a + b));
        if mid >= top {
            total += pf.max_value() * (b - a);
            continue;
        }
        let r = pf.rung(mid.max(0.0));
        let (base, slope) = (pf.values[r] - pf.breakpoints[r] * pf.slopes[r], pf.slopes[r]);
        total += (base + slope * alpha) * (b - a) + slope * c * (b / a).ln();
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub min_slack: f64,
    /// Time at which the smallest slack occurs.
    pub at: f64,
    /// `(t, slack)` at every audited time.
    pub points: Vec<(f64, f64)>,
}

/// Checks `(u_P(t) - u_static t) + psi(avg(t)) t <= integral_0^t psi(avg(s)) ds`
/// at every segment boundary and breakpoint crossing; returns the slack.
pub fn potential_audit(
    setting: &ContractSetting,
    family: &Family,
    trajectory: &Trajectory,
) -> Result<AuditReport, HorizonError> {
    let ladder = ladder_for(setting, family)?;
    let pf = PotentialFunction::new(&ladder);
    let u_star = optimal_static(setting, family)?.utility;
    let (mut area, mut time, mut profit, mut integral) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    let mut points = Vec::new();
    for k in 0..trajectory.len() {
        let seg = &trajectory.segments[k];
        let alpha = seg.alpha().ok_or(HorizonError::NotScalar)?;
        let rate = setting.principal_utility(&trajectory.contract(setting, k), seg.action);
        let c = area - alpha * time;
        let end = time + seg.duration;
        let mut stops: Vec<f64> = Vec::new();
        if time > 0.0 && c != 0.0 {
            for &b in &pf.breakpoints[1..] {
                if b != alpha {
                    let s = c / (b - alpha);
                    if s > time && s < end {
                        stops.push(s);
                    }
                }
            }
        }
        stops.sort_by(f64::total_cmp);
        stops.push(end);
        let mut t0 = time;
        for t1 in stops {
            integral += if time == 0.0 {
                potential(&pf, alpha) * (t1 - t0)
            } else {
                potential_integral(&pf, alpha, c, t0, t1)
            };
            let cum_area = area + alpha * (t1 - time);
            let cum_profit = profit + rate * (t1 - time);
            let lhs = (cum_profit - u_star * t1) + potential(&pf, cum_area / t1) * t1;
            points.push((t1, integral - lhs));
            t0 = t1;
        }
        area += alpha * seg.duration;
        profit += rate * seg.duration;
        time = end;
    }
    let (at, min_slack) = points
        .iter()
        .cloned()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0.0, 0.0));
    Ok(AuditReport { min_slack, at, points })
}

/// A finite mixture of trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedSchedule {
    pub components: Vec<(f64, Trajectory)>,
}

impl RandomizedSchedule {
    pub fn new(
        setting: &ContractSetting,
        components: Vec<(f64, Trajectory)>,
        tol: f64,
    ) -> Result<Self, HorizonError> {
        if components.is_empty() {
            return Err(HorizonError::EmptySchedule);
        }
        let sum: f64 = components.iter().map(|c| c.0).sum();
        if components.iter().any(|c| !(c.0 > 0.0)) || (sum - 1.0).abs() > WEIGHT_TOL {
            return Err(HorizonError::BadWeights(sum));
        }
        for (component, (_, t)) in components.iter().enumerate() {
            let violations = validate_trajectory(setting, t, tol);
            if !violations.is_empty() {
                return Err(HorizonError::InvalidComponent { component, violations });
            }
        }
        Ok(RandomizedSchedule { components })
    }

    pub fn single(trajectory: Trajectory) -> Self {
        RandomizedSchedule { components: vec![(1.0, trajectory)] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageReport {
    /// Exact minimum over `x` in `[1/gamma, 1]` of expected profit at `x T` over `x T R_star`.
    pub value: f64,
    pub argmin: f64,
    /// Minimum over the uniform grid alone.
    pub grid_value: f64,
    /// Lipschitz bound on how far the grid minimum can sit above the true minimum.
    pub error_band: f64,
}

fn expected_ratio(setting: &ContractSetting, schedule: &RandomizedSchedule, x: f64, r_star: f64) -> Result<f64, HorizonError> {
    let shift = setting.reward_shift();
    let mut total = 0.0;
    for (w, t) in &schedule.components {
        let horizon = x * t.total_duration();
        total += w * (prefix_util(setting, t, horizon)? + shift * horizon) / horizon;
    }
    Ok(total / r_star)
}

/// Absolute per-round profit of the best static contract.
pub fn static_value(setting: &ContractSetting, family: &Family) -> Result<f64, HorizonError> {
    let v = optimal_static(setting, family)?.utility + setting.reward_shift();
    if !(v > 0.0) {
        return Err(HorizonError::NonPositiveStatic(v));
    }
    Ok(v)
}

/// Worst-case advantage over the static optimum when the horizon is any
/// fraction in `[1/gamma, 1]` of each trajectory's length.
///
/// Between consecutive segment boundaries the ratio has the form `a + b / x`,
/// so its minimum sits at `1/gamma`, `1`, or a boundary; those points give the
/// exact value and the grid is reported alongside.
pub fn worst_case_advantage(
    setting: &ContractSetting,
    family: &Family,
    schedule: &RandomizedSchedule,
    gamma: f64,
    grid: usize,
) -> Result<AdvantageReport, HorizonError> {
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(HorizonError::BadGamma(gamma));
    }
    if grid < 2 {
        return Err(HorizonError::BadGrid);
    }
    if schedule.components.is_empty() {
        return Err(HorizonError::EmptySchedule);
    }
    let r_star = static_value(setting, family)?;
    let lo = 1.0 / gamma;
    let mut candidates = vec![lo, 1.0];
    for (_, t) in &schedule.components {
        let total = t.total_duration();
        let mut acc = 0.0;
        for s in &t.segments {
            acc += s.duration;
            let x = acc / total;
            if x > lo && x < 1.0 {
                candidates.push(x);
            }
        }
    }
    let mut value = f64::INFINITY;
    let mut argmin = 1.0;
    for &x in &candidates {
        let v = expected_ratio(setting, schedule, x, r_star)?;
        if v < value || (v == value && x < argmin) {
            value = v;
            argmin = x;
        }
    }
    let mut grid_value = f64::INFINITY;
    for g in 0..grid {
        let x = lo + (1.0 - lo) * g as f64 / (grid - 1) as f64;
        grid_value = grid_value.min(expected_ratio(setting, schedule, x, r_star)?);
    }
    let shift = setting.reward_shift();
    let max_rate = schedule
        .components
        .iter()
        .flat_map(|(_, t)| (0..t.len()).map(move |k| (t, k)))
        .map(|(t, k)| (setting.principal_utility(&t.contract(setting, k), t.segments[k].action) + shift).abs())
        .fold(0.0, f64::max);
    let step = (1.0 - lo) / (grid - 1) as f64;
    let error_band = 2.0 * max_rate * gamma * step / r_star;
    Ok(AdvantageReport { value, argmin, grid_value, error_band })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RobustCase {
    /// No dynamic plan beats the static optimum; the static contract is returned.
    NoAdvantage,
    /// `gamma = 1`: the known-horizon plan.
    KnownHorizon,
    /// The plan ends at or above the static breakpoint.
    EndsAbove,
    /// The plan starts at the static breakpoint.
    StartsAtStatic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustSchedule {
    pub case: RobustCase,
    pub schedule: RandomizedSchedule,
    /// Rungs `(start, end)` of the plan the construction is built on.
    pub plan_rungs: (usize, usize),
    /// Advantage of that plan with a known horizon.
    pub plan_advantage: f64,
    /// Lower bound implied by the construction.
    pub certified: f64,
    pub measured: AdvantageReport,
    /// Fraction of time after which the plan's running advantage reaches `1 + eps/2` (starts-at-static case).
    pub mu: Option<f64>,
}

fn plan_offers(plan: &FreeFallPlan, scale: f64) -> Vec<(f64, f64)> {
    plan.trajectory
        .segments
        .iter()
        .map(|s| (s.alpha().expect("scalar plan"), s.duration * scale))
        .collect()
}

/// Smallest fraction `x` at which the plan's running advantage reaches `target`.
fn first_fraction_reaching(
    setting: &ContractSetting,
    plan: &Trajectory,
    r_star: f64,
    target: f64,
) -> Option<f64> {
    let shift = setting.reward_shift();
    let total = plan.total_duration();
    let (mut start, mut acc) = (0.0, 0.0);
    for k in 0..plan.len() {
        let s = &plan.segments[k];
        let rate = setting.principal_utility(&plan.contract(setting, k), s.action) + shift;
        let end = start + s.duration;
        // (acc + rate (t - start)) / t = target r_star
        let goal = target * r_star;
        if acc + rate * s.duration >= goal * end - 1e-15 {
            let t = if (rate - goal).abs() < 1e-300 { end } else { (acc - rate * start) / (goal - rate) };
            let t = if t > start && t <= end { t } else { end };
            return Some(t / total);
        }
        acc += rate * s.duration;
        start = end;
    }
    None
}

/// A schedule that keeps an advantage over the static optimum for every
/// horizon in `[1/gamma, 1]`.
pub fn robust_schedule(setting: &ContractSetting, family: &Family, gamma: f64) -> Result<RobustSchedule, HorizonError> {
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(HorizonError::BadGamma(gamma));
    }
    let ladder = ladder_for(setting, family)?;
    let stat = optimal_static(setting, family)?;
    let r_star = static_value(setting, family)?;
    let shift = setting.reward_shift();
    let s = stat.rung.expect("scalar family");
    let b_s = ladder.breakpoints[s];
    let advantage = |u: f64| (u + shift) / r_star;

    let best = optimal_freefall(setting, family)?;
    let finish = |case, schedule: RandomizedSchedule, rungs, plan_advantage, certified, mu| {
        let measured = worst_case_advantage(setting, family, &schedule, gamma, DEFAULT_GRID)?;
        Ok(RobustSchedule { case, schedule, plan_rungs: rungs, plan_advantage, certified, measured, mu })
    };
    let static_traj = realize_on(&ladder, &[(b_s, 1.0)])?;
    if advantage(best.utility) <= 1.0 + 1e-12 {
        return finish(RobustCase::NoAdvantage, RandomizedSchedule::single(static_traj), (s, s), 1.0, 1.0, None);
    }
    if gamma == 1.0 {
        let a = advantage(best.utility);
        let t = best.trajectory.normalized();
        return finish(RobustCase::KnownHorizon, RandomizedSchedule::single(t), (best.start_rung, best.end_rung), a, a, None);
    }

    let (i, j) = (best.start_rung, best.end_rung);
    let (i, j) = if j >= s || i == s {
        (i, j)
    } else if i > s {
        // cut at the static breakpoint: the head ends there, the tail starts there
        let head = freefall_utility(&ladder, i, s)?;
        let tail = freefall_utility(&ladder, s, j)?;
        if head >= tail { (i, s) } else { (s, j) }
    } else {
        (s, j)
    };
    let plan = freefall_plan(&ladder, i, j)?;
    let plan_adv = advantage(plan.utility);
    let eps = plan_adv - 1.0;

    if j >= s {
        let lo = 1.0 / gamma;
        let mut offers = plan_offers(&plan, lo);
        let b_j = ladder.breakpoints[j];
        let fall = if b_s > 0.0 { (b_j * lo / b_s - lo).clamp(0.0, 1.0 - lo) } else { 1.0 - lo };
        offers.push((0.0, fall));
        offers.push((b_s, (1.0 - lo - fall).max(0.0)));
        let t = realize_on(&ladder, &offers)?;
        return finish(RobustCase::EndsAbove, RandomizedSchedule::single(t), (i, j), plan_adv, 1.0 + eps / gamma, None);
    }

    let mu = first_fraction_reaching(setting, &plan.trajectory, r_star, 1.0 + eps / 2.0).unwrap_or(1.0);
    let lo = 1.0 / gamma;
    let mut checkpoints = vec![1.0];
    while *checkpoints.last().unwrap() > lo && checkpoints.len() < MAX_COMPONENTS && mu < 1.0 {
        let next = checkpoints.last().unwrap() * mu;
        checkpoints.push(next);
    }
    let covered = *checkpoints.last().unwrap() <= lo;
    // checkpoints[p] is the first at or below the horizon floor; components end at S_0..S_{p-1}
    let p = checkpoints.len() - 1;
    let mut weights = vec![1.0];
    for level in 1..p {
        let e = (eps / 4.0).powi(level as i32);
        let w = (1.0 + eps / 2.0) / (1.0 + eps / 2.0 + e);
        for x in weights.iter_mut() {
            *x *= w;
        }
        weights.push(1.0 - w);
    }
    let mut components = Vec::with_capacity(p.max(1));
    for (idx, &w) in weights.iter().enumerate() {
        let end = checkpoints[idx];
        let mut offers = plan_offers(&plan, end);
        if end < 1.0 {
            offers.push((b_s, 1.0 - end));
        }
        components.push((w, realize_on(&ladder, &offers)?));
    }
    let certified = if !covered {
        1.0
    } else if p <= 1 {
        1.0 + eps / 2.0
    } else {
        1.0 + (eps / 4.0).powi(p as i32)
    };
    finish(
        RobustCase::StartsAtStatic,
        RandomizedSchedule { components },
        (i, j),
        plan_adv,
        certified,
        Some(mu),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub samples: usize,
    pub max_advantage: f64,
    /// Index of the best sample; sample 0 is the optimal free-fall plan.
    pub best_sample: usize,
    pub threshold_gamma: f64,
    /// Whether some sample kept a `1 + eps` advantage over the whole window.
    pub feasible_witness: bool,
}

fn random_schedule(ladder: &BreakpointLadder, rng: &mut ChaCha8Rng) -> Result<RandomizedSchedule, HorizonError> {
    let top = ladder.breakpoints[ladder.top()];
    let components = rng.gen_range(1..=3);
    let mut weights: Vec<f64> = (0..components).map(|_| rng.gen_range(0.05..1.0)).collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    let mut out = Vec::with_capacity(components);
    let freefall = rng.gen_bool(0.5);
    for w in weights {
        let offers: Vec<(f64, f64)> = if freefall {
            let lambda = rng.gen_range(0.01..=1.0);
            vec![(rng.gen_range(0.0..=top), lambda), (0.0, 1.0 - lambda)]
        } else {
            let k = rng.gen_range(1..=6);
            let d: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = d.iter().sum();
            d.iter().map(|x| (rng.gen_range(0.0..=top), x / total)).collect()
        };
        out.push((w, realize_on(ladder, &offers)?));
    }
    Ok(RandomizedSchedule { components: out })
}

/// Samples random free-fall mixtures and piecewise-constant schedules and
/// reports the best worst-case advantage found. A falsification sweep only.
pub fn infeasibility_probe(
    setting: &ContractSetting,
    family: &Family,
    eps: f64,
    gamma: f64,
    samples: usize,
    seed: u64,
) -> Result<ProbeReport, HorizonError> {
    if !(eps > 0.0) {
        return Err(HorizonError::BadEps(eps));
    }
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(HorizonError::BadGamma(gamma));
    }
    let ladder = ladder_for(setting, family)?;
    let pf = PotentialFunction::new(&ladder);
    let r_star = static_value(setting, family)?;
    let plan = optimal_freefall(setting, family)?;
    let values: Vec<Result<f64, HorizonError>> = (0..samples.max(1))
        .into_par_iter()
        .map(|k| {
            let schedule = if k == 0 {
                RandomizedSchedule::single(plan.trajectory.normalized())
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                random_schedule(&ladder, &mut rng)?
            };
            Ok(worst_case_advantage(setting, family, &schedule, gamma, 50)?.value)
        })
        .collect();
    let mut best = (0, f64::NEG_INFINITY);
    for (k, v) in values.into_iter().enumerate() {
        let v = v?;
        if v > best.1 {
            best = (k, v);
        }
    }
    Ok(ProbeReport {
        samples: samples.max(1),
        max_advantage: best.1,
        best_sample: best.0,
        threshold_gamma: infeasibility_gamma(&pf, eps, r_star),
        feasible_witness: best.1 >= 1.0 + eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{counterexample, fig1, random_binary, random_linear_trajectory};
    use crate::trajectory::is_valid;
    use crate::winwin::{shifted_family, win_win_instance};
    use proptest::prelude::*;

    fn fig1_pf() -> PotentialFunction {
        potential_function(&fig1(), &Family::Linear).unwrap()
    }

    #[test]
    fn fig1_potential_values() {
        let pf = fig1_pf();
        assert_eq!(potential(&pf, 0.0), 0.0);
        assert!((potential(&pf, 2.0 / 3.0) - 1.0 / 6.0).abs() < 1e-15);
        assert!((potential(&pf, 0.5) - 1.0 / 12.0).abs() < 1e-15);
        assert!((potential(&pf, 0.2)).abs() < 1e-15);
        assert!((potential(&pf, 5.0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn fig1_thresholds() {
        let pf = fig1_pf();
        let e = infeasibility_gamma(&pf, 0.5, 1.0 / 3.0);
        assert!((e - std::f64::consts::E).abs() < 1e-12);
        let g = infeasibility_gamma(&pf, 1.0 / 12.0, 1.0 / 3.0);
        assert!((g - 6f64.exp()).abs() < 1e-9 * g);
        assert!((infeasibility_gamma(&pf, 1e12, 1.0 / 3.0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn closed_form_integral_matches_quadrature() {
        let pf = potential_function(&counterexample(), &Family::Linear).unwrap();
        for &(alpha, c, s1, s2) in &[(0.0, 0.4, 0.5, 1.7), (1.2, -0.5, 0.6, 2.0), (0.3, 0.05, 0.1, 3.0)] {
            let exact = potential_integral(&pf, alpha, c, s1, s2);
            let n = 200_000;
            let h = (s2 - s1) / n as f64;
            let quad: f64 = (0..n).map(|i| potential(&pf, alpha + c / (s1 + (i as f64 + 0.5) * h)) * h).sum();
            assert!((exact - quad).abs() < 1e-8, "{exact} vs {quad}");
        }
    }

    #[test]
    fn audit_static_and_fig1_plan() {
        let s = fig1();
        let stat = Trajectory::linear(&[(1.0 / 3.0, 1.0, 1)]);
        let r = potential_audit(&s, &Family::Linear, &stat).unwrap();
        assert!(r.min_slack.abs() < 1e-12);
        let plan = optimal_freefall(&s, &Family::Linear).unwrap().trajectory;
        let r = potential_audit(&s, &Family::Linear, &plan).unwrap();
        assert!(r.min_slack >= -1e-9);
        // the fall earns ln(2)/6 - 1/12 of slack by t = 1
        let last = r.points.last().unwrap();
        assert!((last.1 - ((2f64).ln() / 6.0 - 1.0 / 12.0)).abs() < 1e-12);
    }

    #[test]
    fn advantage_examples() {
        let s = fig1();
        let stat = RandomizedSchedule::single(Trajectory::linear(&[(1.0 / 3.0, 1.0, 1)]));
        for g in [1.0, 2.0, 10.0] {
            let r = worst_case_advantage(&s, &Family::Linear, &stat, g, DEFAULT_GRID).unwrap();
            assert!((r.value - 1.0).abs() < 1e-12);
        }
        let plan = RandomizedSchedule::single(optimal_freefall(&s, &Family::Linear).unwrap().trajectory);
        let r = worst_case_advantage(&s, &Family::Linear, &plan, 1.0, DEFAULT_GRID).unwrap();
        assert!((r.value - 1.25).abs() < 1e-12);
        let r = worst_case_advantage(&s, &Family::Linear, &plan, 2.0, DEFAULT_GRID).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!((r.argmin - 0.5).abs() < 1e-12);
        assert!(r.grid_value >= r.value - 1e-12 && r.grid_value <= r.value + r.error_band);
        assert_eq!(
            worst_case_advantage(&s, &Family::Linear, &plan, 0.5, DEFAULT_GRID).unwrap_err(),
            HorizonError::BadGamma(0.5)
        );
    }

    #[test]
    fn schedule_validation() {
        let s = fig1();
        let t = Trajectory::linear(&[(1.0 / 3.0, 1.0, 1)]);
        assert!(RandomizedSchedule::new(&s, vec![(0.5, t.clone()), (0.5, t.clone())], 1e-9).is_ok());
        assert!(matches!(
            RandomizedSchedule::new(&s, vec![(0.5, t.clone())], 1e-9),
            Err(HorizonError::BadWeights(_))
        ));
        let bad = Trajectory::linear(&[(0.0, 1.0, 2)]);
        assert!(matches!(
            RandomizedSchedule::new(&s, vec![(1.0, bad)], 1e-9),
            Err(HorizonError::InvalidComponent { component: 0, .. })
        ));
    }

    #[test]
    fn fig1_robust_case_one() {
        let s = fig1();
        let r = robust_schedule(&s, &Family::Linear, 2.0).unwrap();
        assert_eq!(r.case, RobustCase::EndsAbove);
        assert!((r.certified - 1.125).abs() < 1e-12);
        assert!(r.measured.value >= 1.125 - 1e-3);
        assert!((r.measured.value - 1.125).abs() < 1e-12);
        assert!(is_valid(&s, &r.schedule.components[0].1, 1e-9));
    }

    #[test]
    fn known_horizon_returns_plan() {
        let s = fig1();
        let r = robust_schedule(&s, &Family::Linear, 1.0).unwrap();
        assert_eq!(r.case, RobustCase::KnownHorizon);
        assert!((r.measured.value - 1.25).abs() < 1e-12);
        assert!((r.certified - r.plan_advantage).abs() < 1e-15);
    }

    #[test]
    fn no_advantage_gives_static() {
        // two actions: the free-fall plan cannot beat holding the only breakpoint
        let s = ContractSetting::new(vec![0.0, 0.25], vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]], None).unwrap();
        let r = robust_schedule(&s, &Family::Linear, 3.0).unwrap();
        assert_eq!(r.case, RobustCase::NoAdvantage);
        assert!((r.measured.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn win_win_n8_gamma4() {
        let s = win_win_instance(8, 2.0, 1e-3).unwrap();
        let r = robust_schedule(&s, &shifted_family(&s), 4.0).unwrap();
        assert!(r.measured.value > 1.0, "{:?}", r.measured);
        assert!(r.certified <= r.plan_advantage + 1e-12);
    }

    #[test]
    fn starts_at_static_mixture() {
        // a ladder whose static optimum is the top rung, so every fall starts there
        let mut found = false;
        for seed in 0..400u64 {
            let s = random_binary(&mut ChaCha8Rng::seed_from_u64(seed), 4);
            let r = robust_schedule(&s, &Family::Linear, 3.0).unwrap();
            if r.case == RobustCase::StartsAtStatic {
                found = true;
                let sum: f64 = r.schedule.components.iter().map(|c| c.0).sum();
                assert!((sum - 1.0).abs() < 1e-12);
                for (_, t) in &r.schedule.components {
                    assert!(is_valid(&s, t, 1e-9));
                    assert!((t.total_duration() - 1.0).abs() < 1e-9);
                }
                assert!(r.measured.value >= r.certified - 1e-9, "seed {seed}: {:?} vs {}", r.measured, r.certified);
                assert!(r.certified <= r.plan_advantage + 1e-12);
            }
        }
        assert!(found);
    }

    #[test]
    fn probe_examples() {
        let s = fig1();
        let r = infeasibility_probe(&s, &Family::Linear, 0.5, 3.0, 500, 7).unwrap();
        assert!(r.max_advantage < 1.5);
        assert!(!r.feasible_witness);
        let r = infeasibility_probe(&s, &Family::Linear, 0.5, 1.0, 20, 7).unwrap();
        assert!((r.max_advantage - 1.25).abs() < 1e-12);
        let a = infeasibility_probe(&s, &Family::Linear, 0.5, 3.0, 100, 7).unwrap();
        let b = infeasibility_probe(&s, &Family::Linear, 0.5, 3.0, 100, 7).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn audit_slack_nonnegative(seed in 0u64..100_000, n in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = crate::instances::random_general(&mut rng, n, 3);
            let t = random_linear_trajectory(&mut rng, &s);
            let r = potential_audit(&s, &Family::Linear, &t).unwrap();
            prop_assert!(r.min_slack >= -1e-6, "{:?}", r);
        }

        #[test]
        fn potential_is_convex_and_monotone(seed in 0u64..100_000, n in 2usize..7) {
            let s = crate::instances::random_general(&mut ChaCha8Rng::seed_from_u64(seed), n, 3);
            let pf = potential_function(&s, &Family::Linear).unwrap();
            prop_assert_eq!(potential(&pf, 0.0), 0.0);
            prop_assert!(pf.slopes.windows(2).all(|w| w[0] <= w[1]));
            let top = pf.top();
            let xs: Vec<f64> = (0..=50).map(|i| top * i as f64 / 50.0).collect();
            for w in xs.windows(3) {
                let (a, b, c) = (potential(&pf, w[0]), potential(&pf, w[1]), potential(&pf, w[2]));
                prop_assert!(b >= a - 1e-12);
                prop_assert!(b <= 0.5 * (a + c) + 1e-12);
            }
        }

        #[test]
        fn advantage_non_increasing_in_gamma(seed in 0u64..100_000, g in 1.0f64..8.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_binary(&mut rng, 4);
            let ladder = ladder_for(&s, &Family::Linear).unwrap();
            let d = random_schedule(&ladder, &mut rng).unwrap();
            let a = worst_case_advantage(&s, &Family::Linear, &d, g, 50).unwrap().value;
            let b = worst_case_advantage(&s, &Family::Linear, &d, g * 1.5, 50).unwrap().value;
            prop_assert!(b <= a + 1e-12);
        }

        #[test]
        fn robust_never_beats_known_horizon(seed in 0u64..100_000, g in 1.0f64..20.0) {
            let s = random_binary(&mut ChaCha8Rng::seed_from_u64(seed), 4);
            let r = robust_schedule(&s, &Family::Linear, g).unwrap();
            let plan = optimal_freefall(&s, &Family::Linear).unwrap();
            let known = (plan.utility + s.reward_shift()) / static_value(&s, &Family::Linear).unwrap();
            prop_assert!(r.certified <= known.max(1.0) + 1e-12);
            prop_assert!(r.measured.value <= known.max(1.0) + 1e-9);
            if r.case == RobustCase::EndsAbove {
                prop_assert!(r.measured.value >= r.certified - 1e-9, "{:?} vs {}", r.measured, r.certified);
            }
        }
    }
}
