//! Continuous-time trajectories of play.
//!
//! A trajectory is a list of segments `(contract, duration, action)`. It is
//! valid when each action best-responds to the running-average contract at
//! both ends of its segment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ladder::{ladder_for, BreakpointLadder, Family, LadderError};
use crate::setting::{Contract, ContractSetting};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("invalid trajectory: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("time {t} outside [0, {total}]")]
    OutOfRange { t: f64, total: f64 },
    #[error("segment {0} does not match the trajectory family")]
    FamilyMismatch(usize),
    #[error("segment {0} has a non-positive or non-finite duration")]
    BadDuration(usize),
    #[error("trajectory has no segments")]
    Empty,
    #[error(transparent)]
    Ladder(#[from] LadderError),
}

/// The contract term of a segment.
#[derive(Debug, Clone, PartialEq)]
pub enum Offer {
    Scalar(f64),
    Payments(Contract),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSegment", into = "RawSegment")]
pub struct Segment {
    pub offer: Offer,
    pub duration: f64,
    pub action: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSegment {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payments: Option<Contract>,
    duration: f64,
    action: usize,
}

impl TryFrom<RawSegment> for Segment {
    type Error = String;

    fn try_from(raw: RawSegment) -> Result<Self, Self::Error> {
        let offer = match (raw.alpha, raw.payments) {
            (Some(a), None) => Offer::Scalar(a),
            (None, Some(p)) => Offer::Payments(p),
            _ => return Err("segment needs exactly one of `alpha` or `payments`".into()),
        };
        Ok(Segment { offer, duration: raw.duration, action: raw.action })
    }
}

impl From<Segment> for RawSegment {
    fn from(s: Segment) -> Self {
        let (alpha, payments) = match s.offer {
            Offer::Scalar(a) => (Some(a), None),
            Offer::Payments(p) => (None, Some(p)),
        };
        RawSegment { alpha, payments, duration: s.duration, action: s.action }
    }
}

impl Segment {
    pub fn scalar(alpha: f64, duration: f64, action: usize) -> Self {
        Segment { offer: Offer::Scalar(alpha), duration, action }
    }

    pub fn general(contract: Contract, duration: f64, action: usize) -> Self {
        Segment { offer: Offer::Payments(contract), duration, action }
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.offer {
            Offer::Scalar(a) => Some(a),
            Offer::Payments(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub family: Family,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Endpoint {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    NotBestResponse { segment: usize, at: Endpoint, action: usize, best_response: Vec<usize> },
    BadDuration { segment: usize },
    BadAction { segment: usize },
    NegativePayment { segment: usize },
    FamilyMismatch { segment: usize },
}

impl Trajectory {
    pub fn new(family: Family, segments: Vec<Segment>) -> Self {
        Trajectory { family, segments }
    }

    pub fn linear(segments: &[(f64, f64, usize)]) -> Self {
        let segments = segments.iter().map(|&(a, d, x)| Segment::scalar(a, d, x)).collect();
        Trajectory { family: Family::Linear, segments }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn actions(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.action).collect()
    }

    /// Full payment profile of segment `k`.
    pub fn contract(&self, setting: &ContractSetting, k: usize) -> Contract {
        match &self.segments[k].offer {
            Offer::Scalar(a) => self.family.expand(setting, *a),
            Offer::Payments(p) => p.clone(),
        }
    }

    /// Copy with every duration multiplied by `factor`.
    pub fn scaled_time(&self, factor: f64) -> Trajectory {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment { duration: s.duration * factor, ..s.clone() })
            .collect();
        Trajectory { family: self.family.clone(), segments }
    }

    /// Copy normalized to total duration 1.
    pub fn normalized(&self) -> Trajectory {
        self.scaled_time(1.0 / self.total_duration())
    }

    /// Running-average scalars: entry `k` is the average over the first `k + 1` segments.
    pub fn average_scalars(&self) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len());
        let (mut area, mut time) = (0.0, 0.0);
        for s in &self.segments {
            area += s.alpha()? * s.duration;
            time += s.duration;
            out.push(area / time);
        }
        Some(out)
    }

    fn average_contracts(&self, setting: &ContractSetting) -> Vec<Contract> {
        let m = setting.m();
        let mut acc = vec![0.0; m];
        let mut time = 0.0;
        let mut out = Vec::with_capacity(self.len());
        for k in 0..self.len() {
            let c = self.contract(setting, k);
            let d = self.segments[k].duration;
            for (a, p) in acc.iter_mut().zip(c.payments()) {
                *a += p * d;
            }
            time += d;
            out.push(Contract(acc.iter().map(|a| a / time).collect()));
        }
        out
    }
}

/// Duration-weighted mean of the first `k` contracts, `1 <= k <= K`.
pub fn average_contract(
    setting: &ContractSetting,
    trajectory: &Trajectory,
    k: usize,
) -> Result<Contract, TrajectoryError> {
    if k == 0 || k > trajectory.len() {
        return Err(TrajectoryError::OutOfRange { t: k as f64, total: trajectory.len() as f64 });
    }
    Ok(trajectory.average_contracts(setting).swap_remove(k - 1))
}

fn tolerance(setting: &ContractSetting, contract: &Contract, tol: f64) -> f64 {
    let scale = (0..setting.n())
        .map(|a| setting.expected_payment(contract, a).abs() + setting.costs()[a])
        .fold(1.0_f64, f64::max);
    tol + 1e-12 * scale
}

/// Best responses with slack for floating-point error on large payment scales.
pub fn best_responses(setting: &ContractSetting, contract: &Contract, tol: f64) -> Vec<usize> {
    setting.best_response_set(contract, tolerance(setting, contract, tol))
}

pub fn validate_trajectory(setting: &ContractSetting, trajectory: &Trajectory, tol: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut shape_ok = true;
    for (k, s) in trajectory.segments.iter().enumerate() {
        if !(s.duration > 0.0 && s.duration.is_finite()) {
            out.push(Violation::BadDuration { segment: k });
            shape_ok = false;
        }
        if s.action >= setting.n() {
            out.push(Violation::BadAction { segment: k });
            shape_ok = false;
        }
        let matches = match (&trajectory.family, &s.offer) {
            (Family::General, Offer::Payments(p)) => p.payments().len() == setting.m(),
            (Family::General, Offer::Scalar(_)) => false,
            (_, Offer::Scalar(a)) => a.is_finite(),
            (_, Offer::Payments(_)) => false,
        };
        if !matches {
            out.push(Violation::FamilyMismatch { segment: k });
            shape_ok = false;
        } else if trajectory.contract(setting, k).payments().iter().any(|&p| p < 0.0) {
            out.push(Violation::NegativePayment { segment: k });
        }
    }
    if !shape_ok {
        return out;
    }
    let averages = trajectory.average_contracts(setting);
    for (k, s) in trajectory.segments.iter().enumerate() {
        let start = if k == 0 { trajectory.contract(setting, 0) } else { averages[k - 1].clone() };
        for (at, c) in [(Endpoint::Start, &start), (Endpoint::End, &averages[k])] {
            let br = best_responses(setting, c, tol);
            if !br.contains(&s.action) {
                out.push(Violation::NotBestResponse { segment: k, at, action: s.action, best_response: br });
            }
        }
    }
    out
}

pub fn is_valid(setting: &ContractSetting, trajectory: &Trajectory, tol: f64) -> bool {
    validate_trajectory(setting, trajectory, tol).is_empty()
}

/// Cumulative principal utility without validation.
pub fn total_utility(setting: &ContractSetting, trajectory: &Trajectory) -> f64 {
    (0..trajectory.len())
        .map(|k| {
            let s = &trajectory.segments[k];
            s.duration * setting.principal_utility(&trajectory.contract(setting, k), s.action)
        })
        .sum()
}

/// Time-averaged principal utility without validation.
pub fn util_unchecked(setting: &ContractSetting, trajectory: &Trajectory) -> f64 {
    total_utility(setting, trajectory) / trajectory.total_duration()
}

pub fn util(setting: &ContractSetting, trajectory: &Trajectory, tol: f64) -> Result<f64, TrajectoryError> {
    if trajectory.is_empty() {
        return Err(TrajectoryError::Empty);
    }
    let v = validate_trajectory(setting, trajectory, tol);
    if !v.is_empty() {
        return Err(TrajectoryError::Invalid(v));
    }
    Ok(util_unchecked(setting, trajectory))
}

/// Cumulative principal utility over `[0, t]`.
pub fn prefix_util(setting: &ContractSetting, trajectory: &Trajectory, t: f64) -> Result<f64, TrajectoryError> {
    let total = trajectory.total_duration();
    if !(t >= 0.0 && t <= total * (1.0 + 1e-12)) {
        return Err(TrajectoryError::OutOfRange { t, total });
    }
    let mut acc = 0.0;
    let mut start = 0.0;
    for k in 0..trajectory.len() {
        let s = &trajectory.segments[k];
        let rate = setting.principal_utility(&trajectory.contract(setting, k), s.action);
        let end = start + s.duration;
        if t <= end {
            return Ok(acc + rate * (t - start).max(0.0));
        }
        acc += rate * s.duration;
        start = end;
    }
    Ok(acc)
}

/// Merges adjacent segments that share an action into their duration-weighted average.
pub fn merge_same_action(setting: &ContractSetting, trajectory: &Trajectory) -> Trajectory {
    let mut out: Vec<Segment> = Vec::with_capacity(trajectory.len());
    for (k, s) in trajectory.segments.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.action == s.action => {
                let d = last.duration + s.duration;
                let (w1, w2) = (last.duration / d, s.duration / d);
                last.offer = match (&last.offer, &s.offer) {
                    (Offer::Scalar(a), Offer::Scalar(b)) => Offer::Scalar(w1 * a + w2 * b),
                    _ => {
                        let a = match &last.offer {
                            Offer::Payments(p) => p.clone(),
                            Offer::Scalar(x) => trajectory.family.expand(setting, *x),
                        };
                        let b = trajectory.contract(setting, k);
                        Offer::Payments(Contract(
                            a.payments().iter().zip(b.payments()).map(|(x, y)| w1 * x + w2 * y).collect(),
                        ))
                    }
                };
                last.duration = d;
            }
            _ => out.push(s.clone()),
        }
    }
    Trajectory { family: trajectory.family.clone(), segments: out }
}

/// Replaces the action of every segment lying on a breakpoint by the side the
/// principal prefers. For linear trajectories ties go to the higher-reward action.
pub fn boundary_tiebreak_rewrite(
    setting: &ContractSetting,
    trajectory: &Trajectory,
    tol: f64,
) -> Result<Trajectory, TrajectoryError> {
    let ladder = ladder_for(setting, &trajectory.family)?;
    let averages = trajectory.average_scalars().ok_or(TrajectoryError::FamilyMismatch(0))?;
    let linear = matches!(trajectory.family, Family::Linear);
    let mut out = trajectory.clone();
    for (k, seg) in out.segments.iter_mut().enumerate() {
        let alpha = seg.alpha().ok_or(TrajectoryError::FamilyMismatch(k))?;
        let start = if k == 0 { alpha } else { averages[k - 1] };
        let end = averages[k];
        let r = ladder.rung_of(start + tol);
        if r == 0 || (start - ladder.breakpoints[r]).abs() > tol || (end - ladder.breakpoints[r]).abs() > tol {
            continue;
        }
        let (lo, hi) = (ladder.order[r - 1], ladder.order[r]);
        if seg.action != lo && seg.action != hi {
            continue;
        }
        let u_lo = ladder.principal_utility(r - 1, alpha);
        let u_hi = ladder.principal_utility(r, alpha);
        seg.action = if linear {
            if alpha <= 1.0 { hi } else { lo }
        } else if u_hi > u_lo && seg.action == lo {
            hi
        } else if u_lo > u_hi && seg.action == hi {
            lo
        } else {
            seg.action
        };
    }
    Ok(out)
}

/// True when some consecutive pair of actions is more than one rung apart.
pub fn skips_rung(ladder: &BreakpointLadder, trajectory: &Trajectory) -> bool {
    trajectory.segments.windows(2).any(|w| {
        match (ladder.rung_of_action(w[0].action), ladder.rung_of_action(w[1].action)) {
            (Some(a), Some(b)) => a.abs_diff(b) > 1,
            _ => true,
        }
    })
}

/// Plays the scalar offers `(alpha, duration)` against a best-responding agent
/// and records the induced segments, split at every breakpoint crossing of the
/// running average. On an exact tie the principal-preferred action is chosen.
pub fn realize(
    setting: &ContractSetting,
    family: &Family,
    offers: &[(f64, f64)],
) -> Result<Trajectory, TrajectoryError> {
    let ladder = ladder_for(setting, family)?;
    realize_on(&ladder, offers)
}

pub fn realize_on(ladder: &BreakpointLadder, offers: &[(f64, f64)]) -> Result<Trajectory, TrajectoryError> {
    let mut segments: Vec<Segment> = Vec::new();
    let (mut area, mut time) = (0.0_f64, 0.0_f64);
    for (i, &(alpha, tau)) in offers.iter().enumerate() {
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(TrajectoryError::BadDuration(i));
        }
        if tau == 0.0 {
            continue;
        }
        let start = if time == 0.0 { alpha } else { area / time };
        let end = (area + alpha * tau) / (time + tau);
        let mut cuts: Vec<f64> = Vec::new();
        if time > 0.0 {
            let (lo, hi) = if start < end { (start, end) } else { (end, start) };
            for &b in &ladder.breakpoints[1..] {
                if b > lo && b < hi {
                    let t = (area - alpha * time) / (b - alpha);
                    if t > time && t < time + tau {
                        cuts.push(t);
                    }
                }
            }
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        let mut t0 = time;
        for t1 in cuts.into_iter().chain(std::iter::once(time + tau)) {
            if t1 <= t0 {
                continue;
            }
            let mid = 0.5 * (t0 + t1);
            let avg = if time == 0.0 { alpha } else { (area + alpha * (mid - time)) / mid };
            let flat = (start - end).abs() <= 1e-15 * (1.0 + start.abs());
            let r = pick_rung(ladder, avg, alpha, flat);
            segments.push(Segment::scalar(alpha, t1 - t0, ladder.order[r]));
            t0 = t1;
        }
        area += alpha * tau;
        time += tau;
    }
    if segments.is_empty() {
        return Err(TrajectoryError::Empty);
    }
    Ok(Trajectory { family: ladder.family.clone(), segments })
}

fn pick_rung(ladder: &BreakpointLadder, avg: f64, alpha: f64, flat: bool) -> usize {
    let r = ladder.rung_of(avg);
    let on_boundary = r > 0 && (avg - ladder.breakpoints[r]).abs() <= 1e-12 * (1.0 + avg.abs());
    if flat && on_boundary {
        if ladder.principal_utility(r - 1, alpha) > ladder.principal_utility(r, alpha) {
            return r - 1;
        }
        return r;
    }
    // an average landing just below a breakpoint through rounding still sits on it
    if r + 1 < ladder.len() && flat && (ladder.breakpoints[r + 1] - avg).abs() <= 1e-12 * (1.0 + avg.abs())
        && ladder.principal_utility(r + 1, alpha) >= ladder.principal_utility(r, alpha) {
            return r + 1;
        }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::fig1;
    use crate::setting::BR_TOL;

    fn fig1_freefall() -> Trajectory {
        Trajectory::linear(&[(2.0 / 3.0, 0.5, 2), (0.0, 0.5, 1)])
    }

    #[test]
    fn averages() {
        let s = fig1();
        let t = fig1_freefall();
        let avg = average_contract(&s, &t, 2).unwrap();
        assert!((avg.payments()[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(average_contract(&s, &t, 1).unwrap(), s.linear_contract(2.0 / 3.0));
        let t3 = Trajectory::linear(&[(0.9, 1.0, 2), (0.0, 1.0, 2), (0.0, 2.0, 1)]);
        assert!((average_contract(&s, &t3, 3).unwrap().payments()[1] - 0.225).abs() < 1e-15);
        assert!(average_contract(&s, &t3, 0).is_err());
    }

    #[test]
    fn validation_examples() {
        let s = fig1();
        assert!(is_valid(&s, &fig1_freefall(), BR_TOL));
        let bad = Trajectory::linear(&[(1.0 / 3.0, 1.0, 2)]);
        let v = validate_trajectory(&s, &bad, BR_TOL);
        assert!(matches!(v[0], Violation::NotBestResponse { segment: 0, action: 2, .. }));
        assert!(is_valid(&s, &Trajectory::linear(&[(0.0, 1.0, 0)]), BR_TOL));
    }

    #[test]
    fn family_mismatch_is_reported() {
        let s = fig1();
        let t = Trajectory::new(Family::General, vec![Segment::scalar(0.0, 1.0, 0)]);
        assert_eq!(validate_trajectory(&s, &t, BR_TOL), vec![Violation::FamilyMismatch { segment: 0 }]);
    }

    #[test]
    fn util_examples() {
        let s = fig1();
        assert!((util(&s, &fig1_freefall(), BR_TOL).unwrap() - 5.0 / 12.0).abs() < 1e-15);
        let stat = Trajectory::linear(&[(1.0 / 3.0, 1.0, 1)]);
        assert!((util(&s, &stat, BR_TOL).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let zero = Trajectory::linear(&[(0.0, 3.0, 0)]);
        assert_eq!(util(&s, &zero, BR_TOL).unwrap(), 0.0);
        let bad = Trajectory::linear(&[(1.0 / 3.0, 1.0, 2)]);
        assert!(matches!(util(&s, &bad, BR_TOL), Err(TrajectoryError::Invalid(_))));
    }

    #[test]
    fn prefix_examples() {
        let s = fig1();
        let t = fig1_freefall();
        assert!((prefix_util(&s, &t, 0.5).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(prefix_util(&s, &t, 0.0).unwrap(), 0.0);
        let full = prefix_util(&s, &t, 1.0).unwrap();
        assert!((full - util_unchecked(&s, &t)).abs() < 1e-15);
        assert!(prefix_util(&s, &t, 1.5).is_err());
    }

    #[test]
    fn merge_examples() {
        let s = fig1();
        let t = Trajectory::linear(&[(0.5, 1.0, 1), (0.7, 1.0, 1)]);
        let m = merge_same_action(&s, &t);
        assert_eq!(m.len(), 1);
        assert!((m.segments[0].alpha().unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(m.segments[0].duration, 2.0);
        let f = fig1_freefall();
        assert_eq!(merge_same_action(&s, &f), f);
    }

    #[test]
    fn merge_four_segments() {
        let s = fig1();
        let t = Trajectory::linear(&[(0.9, 0.2, 2), (0.5, 0.28, 2), (0.0, 0.2, 1), (0.2, 0.3, 1)]);
        assert!(is_valid(&s, &t, BR_TOL));
        let m = merge_same_action(&s, &t);
        assert_eq!(m.actions(), vec![2, 1]);
        assert!(is_valid(&s, &m, BR_TOL));
        assert!((util_unchecked(&s, &m) - util_unchecked(&s, &t)).abs() < 1e-12);
    }

    #[test]
    fn tiebreak_on_upper_boundary() {
        let s = fig1();
        let t = Trajectory::linear(&[(2.0 / 3.0, 1.0, 1)]);
        assert!(is_valid(&s, &t, BR_TOL));
        let r = boundary_tiebreak_rewrite(&s, &t, BR_TOL).unwrap();
        assert_eq!(r.actions(), vec![2]);
        assert!(util_unchecked(&s, &r) >= util_unchecked(&s, &t));
    }

    #[test]
    fn tiebreak_interior_untouched() {
        let s = fig1();
        let t = Trajectory::linear(&[(0.5, 1.0, 1)]);
        assert_eq!(boundary_tiebreak_rewrite(&s, &t, BR_TOL).unwrap(), t);
    }

    #[test]
    fn tiebreak_at_alpha_one_keeps_utility() {
        // two-action setting with its breakpoint at exactly 1
        let s = ContractSetting::new(vec![0.0, 0.5], vec![0.0, 1.0], vec![vec![1.0, 0.0], vec![0.5, 0.5]], None)
            .unwrap();
        let t = Trajectory::linear(&[(1.0, 1.0, 0)]);
        let r = boundary_tiebreak_rewrite(&s, &t, BR_TOL).unwrap();
        assert_eq!(r.actions(), vec![1]);
        assert_eq!(util_unchecked(&s, &r), util_unchecked(&s, &t));
    }

    #[test]
    fn realize_freefall() {
        let s = fig1();
        let t = realize(&s, &Family::Linear, &[(2.0 / 3.0, 0.5), (0.0, 0.5)]).unwrap();
        assert_eq!(t.actions(), vec![2, 1]);
        assert!(is_valid(&s, &t, BR_TOL));
        assert!((util_unchecked(&s, &t) - 5.0 / 12.0).abs() < 1e-15);
        let longer = realize(&s, &Family::Linear, &[(2.0 / 3.0, 0.25), (0.0, 0.75)]).unwrap();
        assert_eq!(longer.actions(), vec![2, 1, 0]);
        assert!((longer.segments[1].duration - 0.25).abs() < 1e-15);
        assert!(is_valid(&s, &longer, BR_TOL));
    }

    #[test]
    fn realize_rising_average() {
        let s = fig1();
        let t = realize(&s, &Family::Linear, &[(0.0, 1.0), (0.9, 3.0)]).unwrap();
        assert_eq!(t.actions(), vec![0, 0, 1, 2]);
        assert!(is_valid(&s, &t, BR_TOL));
    }

    #[test]
    fn json_shape() {
        let text = serde_json::to_string(&fig1_freefall()).unwrap();
        assert!(text.starts_with(r#"{"family":"linear","segments":[{"alpha":"#));
        let back: Trajectory = serde_json::from_str(&text).unwrap();
        assert_eq!(back, fig1_freefall());
        let g = r#"{"family":"general","segments":[{"payments":[0,0.5],"duration":1,"action":1}]}"#;
        let t: Trajectory = serde_json::from_str(g).unwrap();
        assert!(is_valid(&fig1(), &t, BR_TOL));
        let scaled = r#"{"family":{"scaled":[0,1]},"segments":[{"alpha":0.5,"duration":1,"action":1}]}"#;
        let t: Trajectory = serde_json::from_str(scaled).unwrap();
        assert!(is_valid(&fig1(), &t, BR_TOL));
    }

    mod props {
        use super::*;
        use crate::instances::{random_general, random_linear_trajectory};
        use crate::ladder::linear_breakpoints;
        use proptest::prelude::*;
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;

        fn case(seed: u64, n: usize) -> (ContractSetting, Trajectory) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_general(&mut rng, n, 3);
            let t = random_linear_trajectory(&mut rng, &s);
            (s, t)
        }

        proptest! {
            #[test]
            fn realized_trajectories_are_valid_and_contiguous(seed in 0u64..100_000, n in 2usize..7) {
                let (s, t) = case(seed, n);
                prop_assert!(is_valid(&s, &t, BR_TOL), "{:?}", validate_trajectory(&s, &t, BR_TOL));
                prop_assert!(!skips_rung(&linear_breakpoints(&s), &t));
            }

            #[test]
            fn merge_preserves_utility(seed in 0u64..100_000, n in 2usize..7) {
                let (s, t) = case(seed, n);
                let m = merge_same_action(&s, &t);
                prop_assert!(m.len() <= t.len());
                prop_assert!(m.segments.windows(2).all(|w| w[0].action != w[1].action));
                prop_assert!((total_utility(&s, &m) - total_utility(&s, &t)).abs() < 1e-12);
                prop_assert!((m.total_duration() - t.total_duration()).abs() < 1e-12);
                prop_assert!(is_valid(&s, &m, BR_TOL));
            }

            #[test]
            fn tiebreak_never_lowers_utility(seed in 0u64..100_000, n in 2usize..7) {
                let (s, t) = case(seed, n);
                let r = boundary_tiebreak_rewrite(&s, &t, 1e-12).unwrap();
                prop_assert!(total_utility(&s, &r) >= total_utility(&s, &t) - 1e-12);
                prop_assert!(is_valid(&s, &r, BR_TOL));
            }

            #[test]
            fn time_scaling_scales_utility(seed in 0u64..100_000, n in 2usize..7, k in 0.1f64..10.0) {
                let (s, t) = case(seed, n);
                let u = total_utility(&s, &t);
                prop_assert!((total_utility(&s, &t.scaled_time(k)) - k * u).abs() < 1e-9 * (1.0 + u.abs() * k));
                prop_assert!((t.normalized().total_duration() - 1.0).abs() < 1e-12);
                prop_assert!(is_valid(&s, &t.scaled_time(k), BR_TOL));
            }
        }
    }
}
