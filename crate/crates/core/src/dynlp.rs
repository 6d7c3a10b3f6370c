//! Optimal dynamic contracts for a fixed action sequence, as a linear program.
//!
//! Segment `k` pays `p^k` for `tau^k` time while the agent plays `a^k`. With
//! `q^k = p^k tau^k` every constraint and the objective become linear in
//! `(q, tau)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ladder::Family;
use crate::lp::{self, LinearProgram, LpError, LpSolution, LpStatus, Relation};
use crate::setting::{dot, Contract, ContractSetting};
use crate::trajectory::{validate_trajectory, Segment, Trajectory, Violation};

pub const DROP_THRESHOLD: f64 = 1e-9;
pub const MAX_ACTIONS: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum DynLpError {
    #[error("empty action sequence")]
    EmptySequence,
    #[error("action {0} out of range")]
    BadAction(usize),
    #[error("{0} actions exceed the enumeration limit of {MAX_ACTIONS}")]
    TooManyActions(usize),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("LP status {0:?}")]
    NotOptimal(LpStatus),
    #[error("every segment has zero duration")]
    DegenerateSolution,
    #[error("segment {0} carries payment with zero duration; the value is a supremum only")]
    UnattainedSupremum(usize),
    #[error("recovered trajectory is invalid: {0:?}")]
    InvalidRecovery(Vec<Violation>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceLp {
    pub sequence: Vec<usize>,
    pub freefall: bool,
    pub m: usize,
    pub lp: LinearProgram,
}

impl SequenceLp {
    /// Column of `q^k_o`.
    pub fn q(&self, k: usize, o: usize) -> usize {
        k * (self.m + 1) + o
    }

    /// Column of `tau^k`.
    pub fn tau(&self, k: usize) -> usize {
        k * (self.m + 1) + self.m
    }
}

pub fn build_sequence_lp(
    setting: &ContractSetting,
    sequence: &[usize],
    freefall: bool,
) -> Result<SequenceLp, DynLpError> {
    if sequence.is_empty() {
        return Err(DynLpError::EmptySequence);
    }
    if let Some(&a) = sequence.iter().find(|&&a| a >= setting.n()) {
        return Err(DynLpError::BadAction(a));
    }
    let (n, m, big_k) = (setting.n(), setting.m(), sequence.len());
    let f = setting.forecast();
    let c = setting.costs();
    let mut slp = SequenceLp { sequence: sequence.to_vec(), freefall, m, lp: LinearProgram::new(big_k * (m + 1)) };
    let cols = slp.lp.num_vars();

    for (k, &a) in sequence.iter().enumerate() {
        let t = slp.tau(k);
        slp.lp.objective[t] = setting.expected_reward(a);
        for o in 0..m {
            let q = slp.q(k, o);
            slp.lp.objective[q] = -f[a][o];
        }
    }

    let mut row = vec![0.0; cols];
    for k in 0..big_k {
        row[slp.tau(k)] = 1.0;
    }
    slp.lp.add(row, Relation::Eq, 1.0);

    // a^k is a best response to the cumulative contract over segments 0..upto
    let best_response = |slp: &mut SequenceLp, a: usize, upto: usize| {
        for b in (0..n).filter(|&b| b != a) {
            let mut row = vec![0.0; cols];
            for k in 0..upto {
                for o in 0..m {
                    row[slp.q(k, o)] = f[a][o] - f[b][o];
                }
                row[slp.tau(k)] = c[b] - c[a];
            }
            slp.lp.add(row, Relation::Ge, 0.0);
        }
    };
    for (k, &a) in sequence.iter().enumerate() {
        if k > 0 {
            best_response(&mut slp, a, k);
        }
        best_response(&mut slp, a, k + 1);
    }

    if freefall {
        for k in 1..big_k {
            for o in 0..m {
                let mut row = vec![0.0; cols];
                row[slp.q(k, o)] = 1.0;
                slp.lp.add(row, Relation::Eq, 0.0);
            }
        }
    }
    if let Some(cap) = setting.p_max() {
        for k in 0..big_k {
            for o in 0..m {
                let mut row = vec![0.0; cols];
                row[slp.q(k, o)] = 1.0;
                row[slp.tau(k)] = -cap;
                slp.lp.add(row, Relation::Le, 0.0);
            }
        }
    }
    Ok(slp)
}

pub fn solve_sequence(slp: &SequenceLp) -> Result<LpSolution, DynLpError> {
    let sol = lp::solve(&slp.lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol),
        s => Err(DynLpError::NotOptimal(s)),
    }
}

/// Undoes the substitution `q = p tau`, dropping segments shorter than [`DROP_THRESHOLD`].
pub fn recover_trajectory(
    setting: &ContractSetting,
    slp: &SequenceLp,
    solution: &LpSolution,
    tol: f64,
) -> Result<Trajectory, DynLpError> {
    let mut segments = Vec::new();
    for (k, &a) in slp.sequence.iter().enumerate() {
        let tau = solution.x[slp.tau(k)];
        let mass: f64 = (0..slp.m).map(|o| solution.x[slp.q(k, o)]).sum();
        if tau <= DROP_THRESHOLD && mass > tol {
            return Err(DynLpError::UnattainedSupremum(k));
        }
        if tau > DROP_THRESHOLD {
            let p = (0..slp.m).map(|o| solution.x[slp.q(k, o)] / tau).collect();
            segments.push(Segment::general(Contract(p), tau, a));
        }
    }
    if segments.is_empty() {
        return Err(DynLpError::DegenerateSolution);
    }
    let t = Trajectory::new(Family::General, segments);
    let v = validate_trajectory(setting, &t, tol);
    if !v.is_empty() {
        return Err(DynLpError::InvalidRecovery(v));
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceResult {
    pub value: f64,
    pub sequence: Vec<usize>,
    pub trajectory: Trajectory,
}

pub fn optimal_for_sequence(
    setting: &ContractSetting,
    sequence: &[usize],
    freefall: bool,
) -> Result<Option<SequenceResult>, DynLpError> {
    let slp = build_sequence_lp(setting, sequence, freefall)?;
    let sol = match solve_sequence(&slp) {
        Ok(s) => s,
        Err(DynLpError::NotOptimal(LpStatus::Infeasible)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let trajectory = recover_trajectory(setting, &slp, &sol, 1e-7)?;
    Ok(Some(SequenceResult { value: sol.objective, sequence: sequence.to_vec(), trajectory }))
}

/// All fall sequences: a first action followed by a subset of cheaper actions in decreasing-cost order.
pub fn freefall_sequences(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for first in 0..n {
        for mask in 0u32..(1 << first) {
            let mut seq = vec![first];
            seq.extend((0..first).rev().filter(|&b| mask & (1 << b) != 0));
            out.push(seq);
        }
    }
    out
}

pub fn optimal_freefall_by_lp(setting: &ContractSetting) -> Result<SequenceResult, DynLpError> {
    if setting.n() > MAX_ACTIONS {
        return Err(DynLpError::TooManyActions(setting.n()));
    }
    let results: Vec<Result<Option<SequenceResult>, DynLpError>> = freefall_sequences(setting.n())
        .par_iter()
        .map(|seq| optimal_for_sequence(setting, seq, true))
        .collect();
    let mut best: Option<SequenceResult> = None;
    for r in results {
        let r = match r {
            Err(DynLpError::UnattainedSupremum(_)) => continue,
            r => r?,
        };
        if let Some(r) = r {
            if best.as_ref().is_none_or(|b| r.value > b.value + 1e-12) {
                best = Some(r);
            }
        }
    }
    best.ok_or(DynLpError::DegenerateSolution)
}

/// Time-averaged principal utility of a general trajectory.
pub fn trajectory_value(setting: &ContractSetting, t: &Trajectory) -> f64 {
    let f = setting.forecast();
    let total: f64 = (0..t.len())
        .map(|k| {
            let s = &t.segments[k];
            s.duration * (setting.expected_reward(s.action) - dot(&f[s.action], t.contract(setting, k).payments()))
        })
        .sum();
    total / t.total_duration()
}
