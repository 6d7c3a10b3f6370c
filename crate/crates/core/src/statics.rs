//! Optimal one-shot contracts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ladder::{ladder_for, Family, LadderError};
use crate::lp::{self, LinearProgram, LpError, LpStatus, Relation};
use crate::setting::{Contract, ContractSetting};

#[derive(Debug, Error, PartialEq)]
pub enum StaticError {
    #[error(transparent)]
    Ladder(#[from] LadderError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("no action can be incentivized")]
    NothingIncentivizable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticOptimum {
    pub contract: Contract,
    /// Scalar parameter for linear and scaled families.
    pub alpha: Option<f64>,
    pub rung: Option<usize>,
    pub action: usize,
    pub utility: f64,
}

pub fn optimal_static(setting: &ContractSetting, family: &Family) -> Result<StaticOptimum, StaticError> {
    if let Family::General = family {
        return optimal_static_general(setting);
    }
    let ladder = ladder_for(setting, family)?;
    let mut best = 0;
    let mut best_u = ladder.principal_utility(0, 0.0);
    for r in 1..ladder.len() {
        let u = ladder.principal_utility(r, ladder.breakpoints[r]);
        if u > best_u + 1e-12 {
            best = r;
            best_u = u;
        }
    }
    let alpha = ladder.breakpoints[best];
    Ok(StaticOptimum {
        contract: family.expand(setting, alpha),
        alpha: Some(alpha),
        rung: Some(best),
        action: ladder.order[best],
        utility: best_u,
    })
}

/// Cheapest contract making `a` a best response, as `(contract, expected payment)`.
pub fn min_payment_contract(
    setting: &ContractSetting,
    a: usize,
) -> Result<Option<(Contract, f64)>, LpError> {
    let m = setting.m();
    let f = setting.forecast();
    let c = setting.costs();
    let mut prog = LinearProgram::new(m);
    prog.objective = f[a].iter().map(|v| -v).collect();
    for b in 0..setting.n() {
        if b != a {
            let coeffs = (0..m).map(|o| f[a][o] - f[b][o]).collect();
            prog.add(coeffs, Relation::Ge, c[a] - c[b]);
        }
    }
    if let Some(cap) = setting.p_max() {
        for o in 0..m {
            let mut coeffs = vec![0.0; m];
            coeffs[o] = 1.0;
            prog.add(coeffs, Relation::Le, cap);
        }
    }
    let sol = lp::solve(&prog)?;
    Ok(match sol.status {
        LpStatus::Optimal => Some((Contract(sol.x), -sol.objective)),
        _ => None,
    })
}

fn optimal_static_general(setting: &ContractSetting) -> Result<StaticOptimum, StaticError> {
    let mut best: Option<StaticOptimum> = None;
    for a in 0..setting.n() {
        let Some((contract, pay)) = min_payment_contract(setting, a)? else { continue };
        let utility = setting.expected_reward(a) - pay;
        if best.as_ref().is_none_or(|b| utility > b.utility + 1e-12) {
            best = Some(StaticOptimum { contract, alpha: None, rung: None, action: a, utility });
        }
    }
    best.ok_or(StaticError::NothingIncentivizable)
}
