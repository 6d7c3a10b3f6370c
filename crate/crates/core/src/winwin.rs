//! A family of instances where the optimal dynamic contract raises both
//! players' utilities over the best static contract.
//!
//! Action `i` (1-based) has expected reward `v^i` after a constant reward
//! shift of `v`. The instance is stored as a success/failure setting whose
//! raw rewards are `(0, v^n - v)`; the shift is kept as metadata and the
//! incentives are evaluated along the direction `r + v`, which pays `v^i` in
//! expectation to action `i`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::freefall::{optimal_freefall, FreeFallError};
use crate::ladder::{ladder_for, Family};
use crate::setting::{Contract, ContractSetting, SettingError};
use crate::statics::{optimal_static, StaticError};
use crate::trajectory::Trajectory;

/// Largest `v^n` admitted; breakpoints `1 - 2^-i` must stay distinct in f64.
pub const MAX_TOP_REWARD: f64 = 1_099_511_627_776.0;

#[derive(Debug, Error)]
pub enum WinWinError {
    #[error("need n > 2, got {0}")]
    TooSmall(usize),
    #[error("v must exceed 1, got {0}")]
    BadBase(f64),
    #[error("eps must be a small non-negative number, got {0}")]
    BadEps(f64),
    #[error("v^n = {0:e} overflows the supported range")]
    Overflow(f64),
    #[error(transparent)]
    Setting(#[from] SettingError),
    #[error(transparent)]
    FreeFall(#[from] FreeFallError),
    #[error(transparent)]
    Static(#[from] StaticError),
}

pub fn win_win_instance(n: usize, v: f64, eps: f64) -> Result<ContractSetting, WinWinError> {
    if n <= 2 {
        return Err(WinWinError::TooSmall(n));
    }
    if !(v > 1.0 && v.is_finite()) {
        return Err(WinWinError::BadBase(v));
    }
    if !(0.0..0.25).contains(&eps) {
        return Err(WinWinError::BadEps(eps));
    }
    let top = v.powi(n as i32);
    if !(top <= MAX_TOP_REWARD) {
        return Err(WinWinError::Overflow(top));
    }
    let span = top - v;
    let reward: Vec<f64> = (1..=n).map(|i| v.powi(i as i32)).collect();
    let mut costs = vec![0.0];
    for i in 1..n {
        costs.push(costs[i - 1] + reward[i - 1] - 0.5);
    }
    costs[1] -= eps;
    let forecast = reward
        .iter()
        .map(|r| {
            let q = (r - v) / span;
            vec![1.0 - q, q]
        })
        .collect();
    Ok(ContractSetting::new(costs, vec![0.0, span], forecast, None)?.with_reward_shift(v))
}

/// The incentive direction of a shifted instance: raw rewards plus the shift.
pub fn shifted_family(setting: &ContractSetting) -> Family {
    let shift = setting.reward_shift();
    if shift == 0.0 {
        return Family::Linear;
    }
    Family::Scaled(Contract(setting.rewards().iter().map(|r| r + shift).collect()))
}

pub fn agent_average_utility(setting: &ContractSetting, trajectory: &Trajectory) -> f64 {
    let total: f64 = (0..trajectory.len())
        .map(|k| {
            let s = &trajectory.segments[k];
            s.duration * setting.agent_utility(&trajectory.contract(setting, k), s.action)
        })
        .sum();
    total / trajectory.total_duration()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinWinReport {
    pub n: usize,
    pub static_principal: f64,
    pub static_agent: f64,
    pub dynamic_principal: f64,
    pub dynamic_agent: f64,
    pub welfare_ratio: f64,
    /// `None` when the static agent utility is zero.
    pub agent_ratio: Option<f64>,
    /// Best static contract restricted to indifference points of non-null actions.
    pub indifference_static_principal: f64,
    pub indifference_static_agent: f64,
    pub indifference_static_action: usize,
    /// 0-based index of the action played first and last by the optimal plan.
    pub start_action: usize,
    pub end_action: usize,
    pub lambda: f64,
    /// Whether the plan starts at the top action and ends at or above action ceil(log2(n)/2) (1-based).
    pub starts_at_top: bool,
    pub ends_high: bool,
}

pub fn win_win_report(n: usize, eps: f64) -> Result<WinWinReport, WinWinError> {
    let setting = win_win_instance(n, 2.0, eps)?;
    let family = shifted_family(&setting);
    let shift = setting.reward_shift();
    let stat = optimal_static(&setting, &family)?;
    let plan = optimal_freefall(&setting, &family)?;
    let static_principal = stat.utility + shift;
    let static_agent = setting.agent_utility(&stat.contract, stat.action);
    let dynamic_principal = plan.utility + shift;
    let dynamic_agent = agent_average_utility(&setting, &plan.trajectory);
    let floor = ((n as f64).log2() / 2.0).ceil() as usize;
    let ladder = ladder_for(&setting, &family).map_err(FreeFallError::from)?;
    let mut best = 1;
    for r in 2..ladder.len() {
        if ladder.principal_utility(r, ladder.breakpoints[r]) > ladder.principal_utility(best, ladder.breakpoints[best]) + 1e-12 {
            best = r;
        }
    }
    let b = ladder.breakpoints[best];
    Ok(WinWinReport {
        n,
        static_principal,
        static_agent,
        dynamic_principal,
        dynamic_agent,
        welfare_ratio: (dynamic_principal + dynamic_agent) / (static_principal + static_agent),
        agent_ratio: (static_agent > 0.0).then(|| dynamic_agent / static_agent),
        indifference_static_principal: ladder.principal_utility(best, b) + shift,
        indifference_static_agent: ladder.agent_utility(best, b),
        indifference_static_action: ladder.order[best],
        start_action: plan.start_action,
        end_action: plan.end_action,
        lambda: plan.lambda,
        starts_at_top: plan.start_action == n - 1,
        ends_high: plan.end_action + 1 >= floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n4_costs_and_breakpoints() {
        let s = win_win_instance(4, 2.0, 0.0).unwrap();
        assert_eq!(s.costs(), &[0.0, 1.5, 5.0, 12.5]);
        let l = ladder_for(&s, &shifted_family(&s)).unwrap();
        assert_eq!(l.order, vec![0, 1, 2, 3]);
        let want = [0.0, 0.75, 0.875, 0.9375];
        for (b, w) in l.breakpoints.iter().zip(want) {
            assert!((b - w).abs() < 1e-12, "{b} vs {w}");
        }
    }

    #[test]
    fn breakpoint_utilities() {
        let n = 10;
        let s = win_win_instance(n, 2.0, 0.0).unwrap();
        let l = ladder_for(&s, &shifted_family(&s)).unwrap();
        for r in 1..n {
            let i = r + 1;
            let u_p = l.principal_utility(r, l.breakpoints[r]) + s.reward_shift();
            assert!((u_p - 1.0).abs() < 1e-9, "principal at rung {r}: {u_p}");
            let u_a = l.agent_utility(r, l.breakpoints[r]);
            assert!((u_a - 0.5 * (1.0 + i as f64)).abs() < 1e-9, "agent at rung {r}: {u_a}");
        }
    }

    #[test]
    fn perturbation_moves_static_optimum() {
        let eps = 1e-3;
        let s = win_win_instance(8, 2.0, eps).unwrap();
        // the zero contract keeps the null action, which is worth v to the principal
        let stat = optimal_static(&s, &shifted_family(&s)).unwrap();
        assert_eq!(stat.action, 0);
        assert!((stat.utility + s.reward_shift() - 2.0).abs() < 1e-12);
        let r = win_win_report(8, eps).unwrap();
        assert_eq!(r.indifference_static_action, 1);
        assert!((r.indifference_static_principal - (1.0 + 2.0 * eps)).abs() < 1e-9);
        assert!((r.indifference_static_agent - 1.5).abs() < 1e-2);
    }

    #[test]
    fn n16_report() {
        let r = win_win_report(16, 1e-3).unwrap();
        assert_eq!(r.start_action, 15);
        assert!(r.end_action + 1 >= 2);
        assert!(r.starts_at_top && r.ends_high);
        assert!(r.dynamic_agent >= r.static_agent);
    }

    #[test]
    fn welfare_ratio_grows() {
        let a = win_win_report(16, 1e-3).unwrap();
        let b = win_win_report(32, 1e-3).unwrap();
        assert!(b.welfare_ratio > a.welfare_ratio);
    }

    #[test]
    fn overflow_guard() {
        assert!(matches!(win_win_instance(64, 2.0, 1e-3), Err(WinWinError::Overflow(_))));
        assert!(matches!(win_win_instance(2, 2.0, 1e-3), Err(WinWinError::TooSmall(2))));
    }
}
