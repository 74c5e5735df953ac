//! Epsilon-greedy Double-Q agent over a pluggable pairwise scorer.

use crate::config::{EpsilonSchedule, LearningConfig};
use crate::error::{Error, Result};
use crate::extraction::CandidateHint;
use crate::labels::{instantiate, mask, LabelSet, ACTIONS, DECISIONS};
use crate::scorer::{scorer_from_state, Scorer, ScorerState};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// One decision point: a context text plus the candidate action labels.
/// Q(s, a) is realized as scorer(context, actions[a]).
#[derive(Clone, Debug)]
pub struct QState {
    pub context: String,
    pub actions: Vec<String>,
}

/// A transition observed during an episode. Terminal iff `next` is absent.
#[derive(Clone, Debug)]
pub struct Experience {
    pub state: QState,
    pub action: usize,
    pub reward: f64,
    pub next: Option<QState>,
}

/// Serialized agent: scorer weights plus the exploration/update counters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub version: u32,
    pub scorer: ScorerState,
    pub episodes: u64,
    pub updates: u64,
    pub epsilon: EpsilonSchedule,
}

pub struct Agent {
    online: Box<dyn Scorer>,
    target: Box<dyn Scorer>,
    labels: LabelSet,
    cfg: LearningConfig,
    masked_mode: bool,
    replay: VecDeque<Experience>,
    episodes: u64,
    updates: u64,
    rng: ChaCha20Rng,
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl Agent {
    pub fn new(
        scorer: Box<dyn Scorer>,
        labels: LabelSet,
        cfg: LearningConfig,
        masked_mode: bool,
        seed: u64,
    ) -> Self {
        let target = scorer.clone_box();
        Agent {
            online: scorer,
            target,
            labels,
            cfg,
            masked_mode,
            replay: VecDeque::new(),
            episodes: 0,
            updates: 0,
            rng: ChaCha20Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15),
        }
    }

    pub fn masked_mode(&self) -> bool {
        self.masked_mode
    }

    pub fn set_masked_mode(&mut self, on: bool) {
        self.masked_mode = on;
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn epsilon(&self) -> f64 {
        self.cfg.epsilon.at(self.episodes)
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    /// Build the scoring state for one hint and decision level: the (possibly
    /// masked) snippet text plus all five instantiated (possibly masked) labels.
    pub fn hint_state(&self, hint: &CandidateHint, decision: usize) -> QState {
        assert!(decision < DECISIONS, "decision out of range");
        let prepare = |text: &str| {
            if self.masked_mode {
                mask(text, &hint.param.name)
            } else {
                text.to_string()
            }
        };
        let context = prepare(&hint.snippet.text);
        let actions = (0..ACTIONS)
            .map(|a| prepare(&instantiate(self.labels.choice_label(decision, a), &hint.param, &hint.value)))
            .collect();
        QState { context, actions }
    }

    /// Online-scorer estimate for one action of one decision.
    pub fn evaluate_action(&self, hint: &CandidateHint, decision: usize, action: usize) -> f64 {
        assert!(action < ACTIONS, "action out of range");
        let state = self.hint_state(hint, decision);
        self.online.score(&state.context, &state.actions[action])
    }

    pub fn action_values(&self, state: &QState) -> Vec<f64> {
        self.online.score_batch(&state.context, &state.actions)
    }

    /// Epsilon-greedy choice; greedy ties resolve to the lowest action index.
    pub fn choose_from_state<R: Rng>(&self, state: &QState, rng: &mut R) -> usize {
        let eps = self.epsilon();
        if rng.gen::<f64>() < eps {
            return rng.gen_range(0..state.actions.len());
        }
        argmax(&self.action_values(state))
    }

    pub fn choose_action<R: Rng>(&self, hint: &CandidateHint, decision: usize, rng: &mut R) -> usize {
        let state = self.hint_state(hint, decision);
        self.choose_from_state(&state, rng)
    }

    /// Double-Q regression target: r for terminal transitions, otherwise
    /// r + gamma * Q_target(s', argmax_a Q_online(s', a)).
    pub fn regression_target(&self, exp: &Experience) -> f64 {
        match &exp.next {
            None => exp.reward,
            Some(next) => {
                let a = argmax(&self.online.score_batch(&next.context, &next.actions));
                exp.reward + self.cfg.gamma * self.target.score(&next.context, &next.actions[a])
            }
        }
    }

    /// Append experiences to the replay buffer and run the configured number
    /// of minibatch gradient steps; the target scorer re-syncs periodically.
    pub fn update(&mut self, experiences: Vec<Experience>) {
        for e in experiences {
            if self.replay.len() == self.cfg.replay_capacity {
                self.replay.pop_front();
            }
            self.replay.push_back(e);
        }
        self.episodes += 1;
        if self.replay.is_empty() {
            return;
        }
        for _ in 0..self.cfg.gradient_steps {
            let n = self.replay.len();
            let batch: Vec<usize> = (0..self.cfg.batch_size.min(n))
                .map(|_| self.rng.gen_range(0..n))
                .collect();
            for idx in batch {
                let exp = self.replay[idx].clone();
                let y = self.regression_target(&exp);
                self.online.train(&exp.state.context, &exp.state.actions[exp.action], y);
            }
            self.updates += 1;
            if self.cfg.sync_interval > 0 && self.updates.is_multiple_of(self.cfg.sync_interval) {
                self.target = self.online.clone_box();
            }
        }
    }

    pub fn replay_len(&self) -> usize {
        self.replay.len()
    }

    pub fn checkpoint(&self) -> AgentCheckpoint {
        AgentCheckpoint {
            version: 1,
            scorer: self.online.state(),
            episodes: self.episodes,
            updates: self.updates,
            epsilon: self.cfg.epsilon,
        }
    }

    /// Rebuild an agent from a checkpoint. The replay buffer is not part of a
    /// checkpoint; the target scorer starts as a copy of the restored weights.
    pub fn from_checkpoint(
        ckpt: &AgentCheckpoint,
        labels: LabelSet,
        cfg: LearningConfig,
        masked_mode: bool,
        seed: u64,
    ) -> Result<Self> {
        if ckpt.version != 1 {
            return Err(Error::Checkpoint(format!("unsupported version {}", ckpt.version)));
        }
        let scorer = scorer_from_state(&ckpt.scorer)?;
        let mut agent = Agent::new(scorer, labels, cfg, masked_mode, seed);
        agent.episodes = ckpt.episodes;
        agent.updates = ckpt.updates;
        Ok(agent)
    }

    pub fn save_checkpoint(&self, path: &std::path::Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.checkpoint())?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &std::path::Path) -> Result<AgentCheckpoint> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&json).map_err(|e| Error::Checkpoint(format!("invalid: {e}")))
    }
}
