//! Tuner constants and learning hyperparameters.

use crate::error::{Error, Result};
use crate::labels::ACTIONS;
use serde::{Deserialize, Serialize};

/// Linear epsilon annealing by episode index.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_episodes: u64,
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        EpsilonSchedule { start: eps, end: eps, anneal_episodes: 0 }
    }

    pub fn at(&self, episode: u64) -> f64 {
        if self.anneal_episodes == 0 || episode >= self.anneal_episodes {
            return self.end;
        }
        let frac = episode as f64 / self.anneal_episodes as f64;
        self.start + (self.end - self.start) * frac
    }
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule { start: 1.0, end: 0.1, anneal_episodes: 100 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LearningConfig {
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Target network refresh period, in gradient batches.
    pub sync_interval: u64,
    /// Gradient batches per agent update call.
    pub gradient_steps: u32,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            gamma: 0.9,
            epsilon: EpsilonSchedule::default(),
            replay_capacity: 2000,
            batch_size: 32,
            learning_rate: 0.01,
            sync_interval: 25,
            gradient_steps: 1,
        }
    }
}

/// All tuner constants. Defaults follow the standard setup: multiplicators
/// {1/4,1/2,1,2,4}, weights {0,2,4,8,16}, l=10, e=50, n=2, 128-token segments.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TunerConfig {
    pub multiplicators: Vec<f64>,
    pub weights: Vec<f64>,
    /// Max hints per parameter per stride round (l).
    pub hints_per_param: usize,
    /// Max hints per episode (e).
    pub hints_per_episode: usize,
    /// Configurations evaluated per episode (n).
    pub configs_per_episode: usize,
    pub segment_limit: usize,
    /// Scale applied to the normalized performance delta during tuning.
    pub perf_scale: f64,
    /// Performance reward is divided by this during training.
    pub training_perf_divisor: f64,
    /// Bonus for accepted settings within an order of magnitude of the default.
    pub training_bonus: f64,
    pub learning: LearningConfig,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            multiplicators: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            weights: vec![0.0, 2.0, 4.0, 8.0, 16.0],
            hints_per_param: 10,
            hints_per_episode: 50,
            configs_per_episode: 2,
            segment_limit: 128,
            perf_scale: 10.0,
            training_perf_divisor: 100.0,
            training_bonus: 0.1,
            learning: LearningConfig::default(),
        }
    }
}

impl TunerConfig {
    /// Action arity is uniform across all decision levels.
    pub fn validate(&self) -> Result<()> {
        if self.multiplicators.len() != ACTIONS {
            return Err(Error::Config(format!(
                "expected {ACTIONS} multiplicators, got {}",
                self.multiplicators.len()
            )));
        }
        if self.weights.len() != ACTIONS {
            return Err(Error::Config(format!(
                "expected {ACTIONS} weights, got {}",
                self.weights.len()
            )));
        }
        if self.weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Config("weights must be non-negative".into()));
        }
        if self.hints_per_param < 1 || self.hints_per_episode < 1 || self.configs_per_episode < 1 {
            return Err(Error::Config("l, e, and n must all be at least 1".into()));
        }
        if self.segment_limit < 1 {
            return Err(Error::Config("segment limit must be at least 1".into()));
        }
        if !(self.perf_scale.is_finite() && self.training_perf_divisor > 0.0) {
            return Err(Error::Config("invalid reward scales".into()));
        }
        Ok(())
    }
}
