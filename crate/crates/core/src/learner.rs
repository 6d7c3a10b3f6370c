//! Learning agents for the repeated game.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    FollowTheLeader,
    MultiplicativeWeights,
    Exp3,
    /// Plays the principal's least favourite action among the near-leaders.
    AdversarialMeanBased,
    /// Plays the action with the lowest cumulative utility; not mean-based.
    FollowTheLaggard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feedback {
    /// Exact expected utility of every action.
    ExpectedFull,
    /// A sampled utility of every action, each from its own outcome draw.
    RealizedFull,
    /// The realized utility of the chosen action only.
    Bandit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearningRate {
    /// `sqrt(ln n / T)` for multiplicative weights; the standard EXP3 schedule for EXP3.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    LowestIndex,
    HighestIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub feedback: Feedback,
    pub learning_rate: LearningRate,
    pub tie_break: TieBreak,
    pub seed: u64,
    /// Near-leader window `gamma` for the adversarial learner; `T^{-1/2}` when unset.
    pub gamma: Option<f64>,
    /// Utility range used to rescale payoffs into `[0, 1]`; derived from the schedule when unset.
    pub utility_range: Option<f64>,
}

impl LearnerConfig {
    pub fn new(algorithm: Algorithm, feedback: Feedback, seed: u64) -> Self {
        LearnerConfig {
            algorithm,
            feedback,
            learning_rate: LearningRate::Auto,
            tie_break: TieBreak::LowestIndex,
            seed,
            gamma: None,
            utility_range: None,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (self.algorithm, self.feedback) {
            (Algorithm::Exp3, Feedback::ExpectedFull) => return Err(ConfigError::Exp3NeedsSampledFeedback),
            (Algorithm::FollowTheLeader | Algorithm::MultiplicativeWeights, Feedback::Bandit) => {
                return Err(ConfigError::FullInformationOnly(self.algorithm))
            }
            _ => {}
        }
        if let LearningRate::Fixed(r) = self.learning_rate {
            if !(r > 0.0 && r.is_finite()) {
                return Err(ConfigError::BadRate(r));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return Err(ConfigError::BadGamma(g));
            }
        }
        if let Some(u) = self.utility_range {
            if !(u > 0.0 && u.is_finite()) {
                return Err(ConfigError::BadRange(u));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("exp3 requires bandit or realized feedback")]
    Exp3NeedsSampledFeedback,
    #[error("{0:?} needs full-information feedback")]
    FullInformationOnly(Algorithm),
    #[error("learning rate must be positive, got {0}")]
    BadRate(f64),
    #[error("gamma must be positive, got {0}")]
    BadGamma(f64),
    #[error("utility range must be positive, got {0}")]
    BadRange(f64),
}

/// What a learner may look at before choosing.
pub struct Context<'a> {
    pub round: u64,
    pub horizon: u64,
    /// Exact cumulative expected utilities before this round.
    pub sigma: &'a [f64],
    /// Principal utility of each action under this round's contract.
    pub principal_utility: &'a [f64],
}

pub(crate) struct Learner {
    config: LearnerConfig,
    n: usize,
    scores: Vec<f64>,
    dist: Vec<f64>,
    eta: f64,
    explore: f64,
    range: f64,
    gamma_t: f64,
}

fn argbest(values: &[f64], tie: TieBreak, better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        let replace = match tie {
            TieBreak::LowestIndex => better(values[i], values[best]),
            TieBreak::HighestIndex => !better(values[best], values[i]),
        };
        if replace {
            best = i;
        }
    }
    best
}

/// Principal-utility-minimizing action in `near_leaders`, lowest index on ties.
pub fn adversarial_learner_step(near_leaders: &[usize], principal_utility: &[f64]) -> usize {
    let mut best = near_leaders[0];
    for &j in &near_leaders[1..] {
        if principal_utility[j] < principal_utility[best] {
            best = j;
        }
    }
    best
}

impl Learner {
    pub(crate) fn new(config: LearnerConfig, n: usize, horizon: u64, range: f64) -> Self {
        let t = horizon.max(1) as f64;
        let nf = n as f64;
        let (eta, explore) = match (config.algorithm, config.learning_rate) {
            (Algorithm::Exp3, LearningRate::Auto) => {
                let g = (nf * nf.ln() / ((std::f64::consts::E - 1.0) * t)).sqrt().min(1.0);
                (g / nf, g)
            }
            (Algorithm::Exp3, LearningRate::Fixed(g)) => (g.min(1.0) / nf, g.min(1.0)),
            (_, LearningRate::Auto) => ((nf.ln() / t).sqrt(), 0.0),
            (_, LearningRate::Fixed(r)) => (r, 0.0),
        };
        let gamma_t = config.gamma.unwrap_or(1.0 / t.sqrt()) * t;
        Learner {
            config,
            n,
            scores: vec![0.0; n],
            dist: vec![1.0 / nf; n],
            eta,
            explore,
            range: range.max(f64::MIN_POSITIVE),
            gamma_t,
        }
    }

    fn rescale(&self, u: f64) -> f64 {
        (u + self.range) / (2.0 * self.range)
    }

    fn one_hot(&mut self, a: usize) {
        self.dist.iter_mut().for_each(|p| *p = 0.0);
        self.dist[a] = 1.0;
    }

    fn softmax(&mut self) {
        let max = self.scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (p, s) in self.dist.iter_mut().zip(&self.scores) {
            *p = (s - max).exp();
            total += *p;
        }
        let mix = self.explore;
        let nf = self.n as f64;
        for p in self.dist.iter_mut() {
            *p = (1.0 - mix) * *p / total + mix / nf;
        }
    }

    /// Mixed strategy for this round.
    pub(crate) fn distribution(&mut self, ctx: &Context<'_>) -> &[f64] {
        match self.config.algorithm {
            Algorithm::FollowTheLeader => {
                let a = argbest(&self.scores, self.config.tie_break, |x, y| x > y);
                self.one_hot(a);
            }
            Algorithm::FollowTheLaggard => {
                let a = argbest(&self.scores, self.config.tie_break, |x, y| x < y);
                self.one_hot(a);
            }
            Algorithm::MultiplicativeWeights | Algorithm::Exp3 => self.softmax(),
            Algorithm::AdversarialMeanBased => {
                let best = ctx.sigma.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let near: Vec<usize> = (0..self.n).filter(|&j| best - ctx.sigma[j] < self.gamma_t).collect();
                let a = adversarial_learner_step(&near, ctx.principal_utility);
                self.one_hot(a);
            }
        }
        &self.dist
    }

    /// `observe(i)` yields the utility of action `i` under the configured feedback.
    pub(crate) fn update(
        &mut self,
        chosen: usize,
        expected: &[f64],
        realized_chosen: f64,
        rng: &mut ChaCha8Rng,
        sample_utility: &mut dyn FnMut(usize, &mut ChaCha8Rng) -> f64,
    ) {
        match self.config.algorithm {
            Algorithm::Exp3 => {
                let x = match self.config.feedback {
                    Feedback::ExpectedFull => expected[chosen],
                    _ => realized_chosen,
                };
                let gain = self.rescale(x).clamp(0.0, 1.0) / self.dist[chosen];
                self.scores[chosen] += self.eta * gain;
            }
            _ => {
                let mw = self.config.algorithm == Algorithm::MultiplicativeWeights;
                for i in 0..self.n {
                    let u = match self.config.feedback {
                        Feedback::ExpectedFull => expected[i],
                        Feedback::RealizedFull => {
                            if i == chosen {
                                realized_chosen
                            } else {
                                sample_utility(i, rng)
                            }
                        }
                        Feedback::Bandit => {
                            if i == chosen {
                                realized_chosen
                            } else {
                                continue;
                            }
                        }
                    };
                    self.scores[i] += if mw { self.eta * self.rescale(u) } else { u };
                }
            }
        }
    }
}
