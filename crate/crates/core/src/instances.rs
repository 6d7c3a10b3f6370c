//! Built-in instances and random instance generators.

use rand::Rng;

use crate::ladder::linear_breakpoints;
use crate::setting::ContractSetting;
use crate::trajectory::{realize_on, Trajectory};

/// Three actions with costs 0, 1/6, 1/2 and success probabilities 0, 1/2, 1.
pub fn fig1() -> ContractSetting {
    ContractSetting::new(
        vec![0.0, 1.0 / 6.0, 0.5],
        vec![0.0, 1.0],
        vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]],
        None,
    )
    .expect("fig1 is valid")
}

/// Four actions, four outcomes; free-fall contracts are not optimal here.
pub fn counterexample() -> ContractSetting {
    ContractSetting::new(
        vec![0.0, 0.2, 0.4, 0.5],
        vec![0.0, 1.0, 1.6, 2.0],
        vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.45, 0.2, 0.25, 0.1],
            vec![0.35, 0.05, 0.25, 0.35],
            vec![0.15, 0.3, 0.3, 0.25],
        ],
        None,
    )
    .expect("counterexample is valid")
}

/// A random success/failure instance with `n` actions whose linear ladder
/// keeps every action.
pub fn random_binary<R: Rng>(rng: &mut R, n: usize) -> ContractSetting {
    loop {
        let mut q: Vec<f64> = (1..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        q.sort_by(|a, b| a.partial_cmp(b).unwrap());
        q.insert(0, 0.0);
        if q.windows(2).any(|w| w[1] - w[0] < 0.02) {
            continue;
        }
        // increasing marginal cost per unit of success keeps every action on the envelope
        let mut slopes: Vec<f64> = (1..n).map(|_| rng.gen_range(0.05..0.95)).collect();
        slopes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if slopes.windows(2).any(|w| w[1] - w[0] < 0.01) {
            continue;
        }
        let mut costs = vec![0.0];
        for i in 1..n {
            costs.push(costs[i - 1] + slopes[i - 1] * (q[i] - q[i - 1]));
        }
        let forecast = q.iter().map(|&p| vec![1.0 - p, p]).collect();
        if let Ok(s) = ContractSetting::new(costs, vec![0.0, 1.0], forecast, None) {
            return s;
        }
    }
}

/// A random instance with `n` actions and `m` outcomes. Rows are random
/// distributions ordered by expected reward; some actions may fall off the
/// linear envelope.
pub fn random_general<R: Rng>(rng: &mut R, n: usize, m: usize) -> ContractSetting {
    loop {
        let mut rewards: Vec<f64> = (1..m).map(|_| rng.gen_range(0.1..2.0)).collect();
        rewards.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rewards.insert(0, 0.0);
        let mut rows: Vec<Vec<f64>> = (1..n)
            .map(|_| {
                let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.iter().map(|x| x / s).collect()
            })
            .collect();
        rows.sort_by(|a, b| {
            let ra: f64 = a.iter().zip(&rewards).map(|(p, r)| p * r).sum();
            let rb: f64 = b.iter().zip(&rewards).map(|(p, r)| p * r).sum();
            ra.partial_cmp(&rb).unwrap()
        });
        let mut null = vec![0.0; m];
        null[0] = 1.0;
        rows.insert(0, null);
        for row in rows.iter_mut().skip(1) {
            let s: f64 = row[1..].iter().sum();
            row[0] = 1.0 - s;
        }
        let mut costs: Vec<f64> = (1..n).map(|_| rng.gen_range(0.0..0.8)).collect();
        costs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        costs.insert(0, 0.0);
        if let Ok(s) = ContractSetting::new(costs, rewards, rows, None) {
            return s;
        }
    }
}

/// A random valid linear trajectory: up to six scalar offers no higher than
/// the top breakpoint, played against a best-responding agent.
pub fn random_linear_trajectory<R: Rng>(rng: &mut R, setting: &ContractSetting) -> Trajectory {
    let ladder = linear_breakpoints(setting);
    let top = ladder.breakpoints[ladder.top()];
    let k = rng.gen_range(1..=6);
    let offers: Vec<(f64, f64)> = (0..k)
        .map(|_| {
            // land exactly on breakpoints now and then
            let alpha = if rng.gen_bool(0.3) {
                ladder.breakpoints[rng.gen_range(0..ladder.len())]
            } else {
                rng.gen_range(0.0..=top)
            };
            (alpha, rng.gen_range(0.05..1.0))
        })
        .collect();
    realize_on(&ladder, &offers).expect("positive durations")
}
