//! Breakpoint ladders for one-parameter contract families.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::setting::{Contract, ContractSetting};

/// A contract family. `Linear` pays `alpha * r`, `Scaled(p)` pays `alpha * p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Scaled(Contract),
    General,
}

impl Family {
    pub fn is_scalar(&self) -> bool {
        !matches!(self, Family::General)
    }

    /// The contract paying `alpha` along this family's direction.
    pub fn expand(&self, setting: &ContractSetting, alpha: f64) -> Contract {
        match self {
            Family::Linear => setting.linear_contract(alpha),
            Family::Scaled(p) => p.scaled(alpha),
            Family::General => panic!("general family has no scalar parameterization"),
        }
    }

    /// Expected payment to action `a` per unit of `alpha`.
    pub fn slope(&self, setting: &ContractSetting, a: usize) -> f64 {
        match self {
            Family::Linear => setting.expected_reward(a),
            Family::Scaled(p) => setting.expected_payment(p, a),
            Family::General => panic!("general family has no scalar parameterization"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LadderError {
    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),
    #[error("the general family has no breakpoint ladder")]
    GeneralFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakpointLadder {
    pub family: Family,
    /// Actions on the upper envelope in increasing-alpha order.
    pub order: Vec<usize>,
    /// `breakpoints[r]` is the smallest scalar at which `order[r]` is a best response.
    pub breakpoints: Vec<f64>,
    pub expected_rewards: Vec<f64>,
    pub slopes: Vec<f64>,
    pub costs: Vec<f64>,
}

impl BreakpointLadder {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn top(&self) -> usize {
        self.order.len() - 1
    }

    /// Rung containing `x`: the last rung whose breakpoint is `<= x`.
    pub fn rung_of(&self, x: f64) -> usize {
        self.breakpoints.iter().rposition(|&b| b <= x).unwrap_or(0)
    }

    pub fn rung_of_action(&self, a: usize) -> Option<usize> {
        self.order.iter().position(|&x| x == a)
    }

    /// Principal utility per unit time when rung `r`'s action plays under scalar `alpha`.
    pub fn principal_utility(&self, r: usize, alpha: f64) -> f64 {
        self.expected_rewards[r] - alpha * self.slopes[r]
    }

    pub fn agent_utility(&self, r: usize, alpha: f64) -> f64 {
        alpha * self.slopes[r] - self.costs[r]
    }

    /// Rungs that are best responses at `x` within `tol` of a breakpoint.
    pub fn rungs_at(&self, x: f64, tol: f64) -> Vec<usize> {
        let r = self.rung_of(x);
        let mut out = Vec::with_capacity(2);
        if r > 0 && (x - self.breakpoints[r]).abs() <= tol {
            out.push(r - 1);
        }
        out.push(r);
        if r + 1 < self.len() && (self.breakpoints[r + 1] - x).abs() <= tol {
            out.push(r + 1);
        }
        out
    }
}

pub fn linear_breakpoints(setting: &ContractSetting) -> BreakpointLadder {
    envelope(setting, Family::Linear).expect("linear ladders are never degenerate")
}

pub fn scaled_breakpoints(
    setting: &ContractSetting,
    p: &Contract,
) -> Result<BreakpointLadder, LadderError> {
    if p.payments().len() != setting.m() {
        return Err(LadderError::DegenerateDirection(format!(
            "base contract has {} payments for {} outcomes",
            p.payments().len(),
            setting.m()
        )));
    }
    if p.payments().iter().any(|v| !v.is_finite() || *v < 0.0) || p.is_zero() {
        return Err(LadderError::DegenerateDirection(
            "base contract must be non-negative and not all zero".into(),
        ));
    }
    envelope(setting, Family::Scaled(p.clone()))
}

pub fn ladder_for(setting: &ContractSetting, family: &Family) -> Result<BreakpointLadder, LadderError> {
    match family {
        Family::Linear => Ok(linear_breakpoints(setting)),
        Family::Scaled(p) => scaled_breakpoints(setting, p),
        Family::General => Err(LadderError::GeneralFamily),
    }
}

fn envelope(setting: &ContractSetting, family: Family) -> Result<BreakpointLadder, LadderError> {
    let n = setting.n();
    let slope: Vec<f64> = (0..n).map(|a| family.slope(setting, a)).collect();
    let cost = setting.costs();
    let mut order = vec![0];
    let mut breakpoints = vec![0.0];
    let mut cur = 0;
    loop {
        let mut next: Option<(usize, f64)> = None;
        for a in 0..n {
            if slope[a] <= slope[cur] {
                continue;
            }
            let x = (cost[a] - cost[cur]) / (slope[a] - slope[cur]);
            next = match next {
                None => Some((a, x)),
                Some((b, bx)) => {
                    let tie = (x - bx).abs() <= 1e-12 * (1.0 + bx.abs());
                    if x < bx && !tie || tie && slope[a] > slope[b] {
                        Some((a, x))
                    } else {
                        Some((b, bx))
                    }
                }
            };
        }
        let Some((a, x)) = next else { break };
        let last = *breakpoints.last().unwrap();
        if x <= last {
            // `a` overtakes `cur` exactly where `cur` entered: `cur` is never unique
            order.pop();
            breakpoints.pop();
            let prev = *order.last().unwrap();
            let x = (cost[a] - cost[prev]) / (slope[a] - slope[prev]);
            order.push(a);
            breakpoints.push(x.max(0.0));
        } else {
            order.push(a);
            breakpoints.push(x);
        }
        cur = a;
    }
    if order.len() < 2 {
        return Err(LadderError::DegenerateDirection(
            "no costly action is ever a best response along this direction".into(),
        ));
    }
    let expected_rewards = order.iter().map(|&a| setting.expected_reward(a)).collect();
    let slopes = order.iter().map(|&a| slope[a]).collect();
    let costs = order.iter().map(|&a| cost[a]).collect();
    Ok(BreakpointLadder { family, order, breakpoints, expected_rewards, slopes, costs })
}
