//! Optimal free-fall contracts: hold one breakpoint contract, then pay nothing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ladder::{ladder_for, BreakpointLadder, Family, LadderError};
use crate::setting::ContractSetting;
use crate::trajectory::{realize_on, util_unchecked, Segment, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FreeFallError {
    #[error(transparent)]
    Ladder(#[from] LadderError),
    #[error("rungs ({i}, {j}) invalid for a ladder of {len} rungs")]
    BadRungs { i: usize, j: usize, len: usize },
    #[error("a fall cannot complete at the zero breakpoint (start rung {0})")]
    ZeroEndBreakpoint(usize),
    #[error("grid counts must be at least 2")]
    BadGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeFallPlan {
    pub start_rung: usize,
    pub end_rung: usize,
    pub start_action: usize,
    pub end_action: usize,
    pub start_alpha: f64,
    pub lambda: f64,
    pub utility: f64,
    pub trajectory: Trajectory,
    /// Times at which the running average reaches each breakpoint from the start rung down to the end rung.
    pub crossing_times: Vec<f64>,
}

fn check_rungs(ladder: &BreakpointLadder, i: usize, j: usize) -> Result<(), FreeFallError> {
    if j > i || i >= ladder.len() {
        return Err(FreeFallError::BadRungs { i, j, len: ladder.len() });
    }
    if j == 0 && i > 0 {
        return Err(FreeFallError::ZeroEndBreakpoint(i));
    }
    Ok(())
}

/// Time-averaged principal utility of the fall from rung `i` to rung `j`, over unit total time.
pub fn freefall_utility(ladder: &BreakpointLadder, i: usize, j: usize) -> Result<f64, FreeFallError> {
    check_rungs(ladder, i, j)?;
    let b = &ladder.breakpoints;
    let head = ladder.principal_utility(i, b[i]);
    if i == j {
        return Ok(head);
    }
    let lambda = b[j] / b[i];
    let tail: f64 = (j..i).map(|k| ladder.expected_rewards[k] * (b[j] / b[k] - b[j] / b[k + 1])).sum();
    Ok(lambda * head + tail)
}

pub fn freefall_plan(ladder: &BreakpointLadder, i: usize, j: usize) -> Result<FreeFallPlan, FreeFallError> {
    let utility = freefall_utility(ladder, i, j)?;
    let b = &ladder.breakpoints;
    let lambda = if i == j { 1.0 } else { b[j] / b[i] };
    let mut segments = vec![Segment::scalar(b[i], lambda, ladder.order[i])];
    for k in (j..i).rev() {
        segments.push(Segment::scalar(0.0, b[j] / b[k] - b[j] / b[k + 1], ladder.order[k]));
    }
    let crossing_times = if i == j { Vec::new() } else { (j..=i).rev().map(|k| b[j] / b[k]).collect() };
    Ok(FreeFallPlan {
        start_rung: i,
        end_rung: j,
        start_action: ladder.order[i],
        end_action: ladder.order[j],
        start_alpha: b[i],
        lambda,
        utility,
        trajectory: Trajectory::new(ladder.family.clone(), segments),
        crossing_times,
    })
}

/// Best `(i, j)` over all rung pairs; ties go to the smallest `i`, then the smallest `j`.
pub fn best_pair(ladder: &BreakpointLadder) -> (usize, usize, f64) {
    let mut best = (0, 0, ladder.principal_utility(0, 0.0));
    for i in 1..ladder.len() {
        for j in 1..=i {
            let u = freefall_utility(ladder, i, j).expect("rungs in range");
            if u > best.2 + 1e-12 {
                best = (i, j, u);
            }
        }
    }
    best
}

pub fn optimal_freefall(setting: &ContractSetting, family: &Family) -> Result<FreeFallPlan, FreeFallError> {
    let ladder = ladder_for(setting, family)?;
    let (i, j, _) = best_pair(&ladder);
    freefall_plan(&ladder, i, j)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub utility: f64,
    pub start_alpha: f64,
    pub lambda: f64,
    pub trajectory: Trajectory,
}

fn evaluate(ladder: &BreakpointLadder, setting: &ContractSetting, alpha: f64, lambda: f64) -> f64 {
    let offers: &[(f64, f64)] =
        if lambda >= 1.0 { &[(alpha, 1.0)] } else { &[(alpha, lambda), (0.0, 1.0 - lambda)] };
    let t = realize_on(ladder, offers).expect("positive durations");
    util_unchecked(setting, &t)
}

fn grid_search(
    ladder: &BreakpointLadder,
    setting: &ContractSetting,
    alphas: &[f64],
    lambdas: &[f64],
) -> Vec<(f64, usize, usize)> {
    alphas
        .par_iter()
        .enumerate()
        .map(|(g, &a)| {
            lambdas
                .iter()
                .enumerate()
                .map(|(h, &l)| (evaluate(ladder, setting, a, l), g, h))
                .collect::<Vec<_>>()
        })
        .flatten()
        .collect()
}

fn top_cells(mut cells: Vec<(f64, usize, usize)>, k: usize) -> Vec<(f64, usize, usize)> {
    cells.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    cells.truncate(k);
    cells
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|g| lo + (hi - lo) * g as f64 / count as f64).collect()
}

/// Grid search over free-fall offers `(alpha, lambda)` with `alpha` in
/// `(0, alpha_max]` and `lambda` in `(0, 1]`, each evaluated by realizing the
/// induced trajectory. A second pass of the same resolution refines around
/// the best coarse cells.
pub fn brute_force_freefall_oracle(
    setting: &ContractSetting,
    family: &Family,
    grid_start: usize,
    grid_lambda: usize,
) -> Result<OracleResult, FreeFallError> {
    if grid_start < 2 || grid_lambda < 2 {
        return Err(FreeFallError::BadGrid);
    }
    let ladder = ladder_for(setting, family)?;
    let alpha_max = 1.25 * ladder.breakpoints[ladder.top()];
    let alphas = linspace(0.0, alpha_max, grid_start);
    let lambdas = linspace(0.0, 1.0, grid_lambda);
    let coarse = top_cells(grid_search(&ladder, setting, &alphas, &lambdas), 4);

    let (mut best_u, mut best_a, mut best_l) = (f64::NEG_INFINITY, 0.0, 1.0);
    for &(u, g, h) in &coarse {
        if u > best_u {
            (best_u, best_a, best_l) = (u, alphas[g], lambdas[h]);
        }
        let a_lo = if g == 0 { 0.0 } else { alphas[g - 1] };
        let a_hi = alphas[(g + 1).min(grid_start - 1)];
        let l_lo = if h == 0 { 0.0 } else { lambdas[h - 1] };
        let l_hi = lambdas[(h + 1).min(grid_lambda - 1)];
        let fine_a = linspace(a_lo, a_hi, grid_start);
        let fine_l = linspace(l_lo, l_hi, grid_lambda);
        if let Some(&(v, fg, fh)) = top_cells(grid_search(&ladder, setting, &fine_a, &fine_l), 1).first() {
            if v > best_u {
                (best_u, best_a, best_l) = (v, fine_a[fg], fine_l[fh]);
            }
        }
    }
    let offers: Vec<(f64, f64)> =
        if best_l >= 1.0 { vec![(best_a, 1.0)] } else { vec![(best_a, best_l), (0.0, 1.0 - best_l)] };
    let trajectory = realize_on(&ladder, &offers).expect("positive durations");
    Ok(OracleResult { utility: best_u, start_alpha: best_a, lambda: best_l, trajectory })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{counterexample, fig1, random_binary, random_general};
    use crate::ladder::linear_breakpoints;
    use crate::setting::{Contract, BR_TOL};
    use crate::statics::optimal_static;
    use crate::trajectory::{is_valid, util};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fig1_pairs() {
        let l = linear_breakpoints(&fig1());
        assert!((freefall_utility(&l, 2, 1).unwrap() - 5.0 / 12.0).abs() < 1e-15);
        assert!((freefall_utility(&l, 2, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((freefall_utility(&l, 1, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(freefall_utility(&l, 2, 0), Err(FreeFallError::ZeroEndBreakpoint(2)));
        assert!(freefall_utility(&l, 1, 2).is_err());
    }

    #[test]
    fn fig1_optimal_plan() {
        let s = fig1();
        let p = optimal_freefall(&s, &Family::Linear).unwrap();
        assert_eq!((p.start_rung, p.end_rung), (2, 1));
        assert!((p.lambda - 0.5).abs() < 1e-15);
        assert!((p.start_alpha - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.utility - 5.0 / 12.0).abs() < 1e-15);
        assert_eq!(p.trajectory.actions(), vec![2, 1]);
        assert!((util(&s, &p.trajectory, BR_TOL).unwrap() - p.utility).abs() < 1e-12);
        assert_eq!(p.crossing_times.len(), 2);
        assert!((p.crossing_times[0] - 0.5).abs() < 1e-15 && (p.crossing_times[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_action_setting_stays_static() {
        let s = ContractSetting::new(vec![0.0, 0.2], vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.3, 0.7]], None)
            .unwrap();
        let p = optimal_freefall(&s, &Family::Linear).unwrap();
        assert_eq!(p.start_rung, p.end_rung);
        assert_eq!(p.lambda, 1.0);
    }

    #[test]
    fn oracle_on_fig1() {
        let s = fig1();
        let o = brute_force_freefall_oracle(&s, &Family::Linear, 400, 400).unwrap();
        assert!((o.utility - 5.0 / 12.0).abs() < 1e-3);
        assert!(o.utility <= 5.0 / 12.0 + 1e-9);
        assert!(is_valid(&s, &o.trajectory, BR_TOL));
    }

    #[test]
    fn oracle_with_static_lambda_matches_static_scan() {
        // lambda = 1 only: the best realized static offer approaches the static optimum from above
        let s = fig1();
        let l = linear_breakpoints(&s);
        let best = linspace(0.0, 1.0, 2000)
            .into_iter()
            .map(|a| evaluate(&l, &s, a, 1.0))
            .fold(f64::NEG_INFINITY, f64::max);
        let stat = optimal_static(&s, &Family::Linear).unwrap().utility;
        assert!(best <= stat + 1e-12 && best >= stat - 1e-3);
    }

    #[test]
    fn scaled_by_rewards_equals_linear() {
        let s = counterexample();
        let a = optimal_freefall(&s, &Family::Linear).unwrap();
        let b = optimal_freefall(&s, &Family::Scaled(Contract(s.rewards().to_vec()))).unwrap();
        assert_eq!(a.utility, b.utility);
        assert_eq!((a.start_rung, a.end_rung), (b.start_rung, b.end_rung));
    }

    #[test]
    fn oracle_bounds_on_random_four_action_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let s = random_binary(&mut rng, 4);
            let best = optimal_freefall(&s, &Family::Linear).unwrap().utility;
            let o = brute_force_freefall_oracle(&s, &Family::Linear, 100, 100).unwrap();
            assert!(o.utility <= best + 1e-9, "{} > {}", o.utility, best);
            assert!(o.utility >= best - 1e-3, "{} < {}", o.utility, best);
        }
    }

    proptest! {
        #[test]
        fn plan_is_valid_and_dominates_static(seed in 0u64..4000, n in 2usize..7, m in 2usize..5) {
            let s = random_general(&mut ChaCha8Rng::seed_from_u64(seed), n, m);
            let p = optimal_freefall(&s, &Family::Linear).unwrap();
            let stat = optimal_static(&s, &Family::Linear).unwrap();
            prop_assert!(p.utility >= stat.utility - 1e-12);
            let u = util(&s, &p.trajectory, BR_TOL).unwrap();
            prop_assert!((u - p.utility).abs() < 1e-12);
            for seg in &p.trajectory.segments {
                prop_assert!(seg.alpha().unwrap() <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn every_pair_matches_its_realization(seed in 0u64..4000, n in 2usize..7) {
            let s = random_binary(&mut ChaCha8Rng::seed_from_u64(seed), n);
            let l = linear_breakpoints(&s);
            for i in 1..l.len() {
                for j in 1..=i {
                    let p = freefall_plan(&l, i, j).unwrap();
                    let u = util(&s, &p.trajectory, BR_TOL).unwrap();
                    prop_assert!((u - p.utility).abs() < 1e-12);
                    let stretched = util_unchecked(&s, &p.trajectory.scaled_time(3.7));
                    prop_assert!((stretched - p.utility).abs() < 1e-12);
                }
            }
        }
    }
}
