//! Contract settings, contracts, utilities and best responses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const BR_TOL: f64 = 1e-9;
const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SettingError {
    #[error("need at least two actions, got {0}")]
    TooFewActions(usize),
    #[error("need at least two outcomes, got {0}")]
    TooFewOutcomes(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("forecast row {action} sums to {sum}, expected 1")]
    NonStochasticRow { action: usize, sum: f64 },
    #[error("forecast entry ({action}, {outcome}) = {value} is outside [0, 1]")]
    BadProbability { action: usize, outcome: usize, value: f64 },
    #[error("the null action must put probability 1 on the first outcome")]
    BadNullAction,
    #[error("costs must start at 0 and be strictly increasing (violated at action {0})")]
    BadCosts(usize),
    #[error("rewards must start at 0 and be non-decreasing (violated at outcome {0})")]
    BadRewards(usize),
    #[error("action {action} is dominated: expected reward does not exceed that of action {prev}")]
    DominatedAction { action: usize, prev: usize },
    #[error("payment cap must be positive, got {0}")]
    BadPaymentCap(f64),
}

/// A payment per outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Contract(pub Vec<f64>);

impl Contract {
    pub fn zero(m: usize) -> Self {
        Contract(vec![0.0; m])
    }

    pub fn payments(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, alpha: f64) -> Contract {
        Contract(self.0.iter().map(|p| alpha * p).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&p| p == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawSetting {
    costs: Vec<f64>,
    rewards: Vec<f64>,
    forecast: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    reward_shift: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

/// A validated principal-agent setting `(c, F, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSetting", into = "RawSetting")]
pub struct ContractSetting {
    costs: Vec<f64>,
    rewards: Vec<f64>,
    forecast: Vec<Vec<f64>>,
    p_max: Option<f64>,
    reward_shift: f64,
    expected_rewards: Vec<f64>,
}

impl TryFrom<RawSetting> for ContractSetting {
    type Error = SettingError;

    fn try_from(raw: RawSetting) -> Result<Self, Self::Error> {
        let mut s = ContractSetting::new(raw.costs, raw.rewards, raw.forecast, raw.p_max)?;
        s.reward_shift = raw.reward_shift;
        Ok(s)
    }
}

impl From<ContractSetting> for RawSetting {
    fn from(s: ContractSetting) -> Self {
        RawSetting {
            costs: s.costs,
            rewards: s.rewards,
            forecast: s.forecast,
            p_max: s.p_max,
            reward_shift: s.reward_shift,
        }
    }
}

impl ContractSetting {
    pub fn new(
        costs: Vec<f64>,
        rewards: Vec<f64>,
        forecast: Vec<Vec<f64>>,
        p_max: Option<f64>,
    ) -> Result<Self, SettingError> {
        let n = costs.len();
        let m = rewards.len();
        if n < 2 {
            return Err(SettingError::TooFewActions(n));
        }
        if m < 2 {
            return Err(SettingError::TooFewOutcomes(m));
        }
        if forecast.len() != n {
            return Err(SettingError::Dimension(format!(
                "{} forecast rows for {n} actions",
                forecast.len()
            )));
        }
        if let Some((a, row)) = forecast.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(SettingError::Dimension(format!(
                "forecast row {a} has {} entries for {m} outcomes",
                row.len()
            )));
        }
        if costs.iter().any(|v| !v.is_finite()) {
            return Err(SettingError::NonFinite("costs"));
        }
        if rewards.iter().any(|v| !v.is_finite()) {
            return Err(SettingError::NonFinite("rewards"));
        }
        if forecast.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SettingError::NonFinite("forecast"));
        }
        for (a, row) in forecast.iter().enumerate() {
            for (o, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(SettingError::BadProbability { action: a, outcome: o, value: v });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOL {
                return Err(SettingError::NonStochasticRow { action: a, sum });
            }
        }
        if forecast[0][0] != 1.0 {
            return Err(SettingError::BadNullAction);
        }
        if costs[0] != 0.0 {
            return Err(SettingError::BadCosts(0));
        }
        if let Some(a) = (1..n).find(|&a| costs[a] <= costs[a - 1]) {
            return Err(SettingError::BadCosts(a));
        }
        if rewards[0] != 0.0 {
            return Err(SettingError::BadRewards(0));
        }
        if let Some(o) = (1..m).find(|&o| rewards[o] < rewards[o - 1]) {
            return Err(SettingError::BadRewards(o));
        }
        if let Some(cap) = p_max {
            if !(cap > 0.0 && cap.is_finite()) {
                return Err(SettingError::BadPaymentCap(cap));
            }
        }
        let expected_rewards: Vec<f64> = forecast.iter().map(|row| dot(row, &rewards)).collect();
        if let Some(a) = (1..n).find(|&a| expected_rewards[a] <= expected_rewards[a - 1]) {
            return Err(SettingError::DominatedAction { action: a, prev: a - 1 });
        }
        Ok(ContractSetting { costs, rewards, forecast, p_max, reward_shift: 0.0, expected_rewards })
    }

    /// Attaches a constant added to every reported principal utility per unit
    /// of time. It never enters incentive computations.
    pub fn with_reward_shift(mut self, shift: f64) -> Self {
        self.reward_shift = shift;
        self
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    pub fn m(&self) -> usize {
        self.rewards.len()
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn forecast(&self) -> &[Vec<f64>] {
        &self.forecast
    }

    pub fn p_max(&self) -> Option<f64> {
        self.p_max
    }

    pub fn reward_shift(&self) -> f64 {
        self.reward_shift
    }

    pub fn expected_rewards(&self) -> &[f64] {
        &self.expected_rewards
    }

    pub fn expected_reward(&self, a: usize) -> f64 {
        self.expected_rewards[a]
    }

    pub fn expected_payment(&self, contract: &Contract, a: usize) -> f64 {
        dot(&self.forecast[a], contract.payments())
    }

    pub fn agent_utility(&self, contract: &Contract, a: usize) -> f64 {
        self.expected_payment(contract, a) - self.costs[a]
    }

    pub fn principal_utility(&self, contract: &Contract, a: usize) -> f64 {
        self.expected_rewards[a] - self.expected_payment(contract, a)
    }

    pub fn welfare(&self, a: usize) -> f64 {
        self.expected_rewards[a] - self.costs[a]
    }

    /// Actions whose agent utility is within `tol` of the maximum, ascending.
    pub fn best_response_set(&self, contract: &Contract, tol: f64) -> Vec<usize> {
        let utils: Vec<f64> = (0..self.n()).map(|a| self.agent_utility(contract, a)).collect();
        let best = utils.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (0..self.n()).filter(|&a| utils[a] >= best - tol).collect()
    }

    pub fn linear_contract(&self, alpha: f64) -> Contract {
        Contract(self.rewards.iter().map(|r| alpha * r).collect())
    }

    /// Checks non-negativity and the payment cap.
    pub fn check_contract(&self, contract: &Contract) -> Result<(), String> {
        if contract.0.len() != self.m() {
            return Err(format!("contract has {} payments for {} outcomes", contract.0.len(), self.m()));
        }
        if contract.0.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err("payments must be finite and non-negative".into());
        }
        if let Some(cap) = self.p_max {
            if contract.0.iter().any(|&p| p > cap * (1.0 + 1e-12)) {
                return Err(format!("payment exceeds cap {cap}"));
            }
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{counterexample, fig1};

    #[test]
    fn fig1_expected_rewards() {
        let s = fig1();
        assert_eq!(s.expected_rewards(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn counterexample_expected_rewards() {
        let s = counterexample();
        let want = [0.0, 0.8, 1.15, 1.28];
        for (a, w) in want.iter().enumerate() {
            assert!((s.expected_reward(a) - w).abs() < 1e-12);
        }
    }

    #[test]
    fn dominated_action_rejected() {
        let f = vec![vec![1.0, 0.0], vec![1.0, 0.0]];
        let err = ContractSetting::new(vec![0.0, 0.1], vec![0.0, 1.0], f, None).unwrap_err();
        assert_eq!(err, SettingError::DominatedAction { action: 1, prev: 0 });
    }

    #[test]
    fn non_stochastic_row_rejected() {
        let f = vec![vec![1.0, 0.0], vec![0.5, 0.6]];
        let err = ContractSetting::new(vec![0.0, 0.1], vec![0.0, 1.0], f, None).unwrap_err();
        assert!(matches!(err, SettingError::NonStochasticRow { action: 1, .. }));
    }

    #[test]
    fn bad_null_action_rejected() {
        let f = vec![vec![0.9, 0.1], vec![0.5, 0.5]];
        let err = ContractSetting::new(vec![0.0, 0.1], vec![0.0, 1.0], f, None).unwrap_err();
        assert_eq!(err, SettingError::BadNullAction);
    }

    #[test]
    fn utilities_on_fig1() {
        let s = fig1();
        let half = s.linear_contract(0.5);
        assert!(s.agent_utility(&half, 2).abs() < 1e-15);
        let two_thirds = s.linear_contract(2.0 / 3.0);
        assert!((s.agent_utility(&two_thirds, 2) - 1.0 / 6.0).abs() < 1e-15);
        assert!((s.principal_utility(&two_thirds, 2) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.agent_utility(&Contract::zero(2), 0), 0.0);
    }

    #[test]
    fn zero_contract_principal_gets_expected_reward() {
        let s = counterexample();
        assert!((s.principal_utility(&Contract::zero(4), 1) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn best_responses_on_fig1() {
        let s = fig1();
        assert_eq!(s.best_response_set(&s.linear_contract(0.5), BR_TOL), vec![1]);
        assert_eq!(s.best_response_set(&s.linear_contract(1.0 / 3.0), BR_TOL), vec![0, 1]);
        assert_eq!(s.best_response_set(&Contract::zero(2), BR_TOL), vec![0]);
    }

    #[test]
    fn json_round_trip() {
        let s = counterexample().with_reward_shift(2.0);
        let text = serde_json::to_string(&s).unwrap();
        let back: ContractSetting = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let plain = serde_json::to_string(&fig1()).unwrap();
        assert!(!plain.contains("reward_shift") && !plain.contains("p_max"));
    }

    #[test]
    fn json_validation_applies() {
        let text = r#"{"costs":[0,0.1],"rewards":[0,1],"forecast":[[1,0],[1,0]]}"#;
        assert!(serde_json::from_str::<ContractSetting>(text).is_err());
    }
}
