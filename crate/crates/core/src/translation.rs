//! The per-hint translation MDP: hint type, multiplicator, set attempt,
//! reward; plus the episode loop that turns a batch of hints into weighted
//! hints and evaluates them.

use crate::agent::{Agent, Experience};
use crate::aggregation::{eval_weighted, EvalReport};
use crate::catalog::{ParamKind, Parameter};
use crate::config::TunerConfig;
use crate::dbms::{BenchmarkSpec, DbmsHandle, MetricKind};
use crate::error::{Error, Result};
use crate::extraction::CandidateHint;
use crate::session::BestTracker;
use crate::value::{ConcreteValue, Unit};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Host facts used to resolve relative recommendations. The implicit unit
/// entry (1) serves absolute hints.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SystemProperties {
    pub ram_bytes: u64,
    pub cores: u64,
    pub disk_bytes: u64,
}

impl SystemProperties {
    pub fn new(ram_bytes: u64, cores: u64, disk_bytes: u64) -> Result<Self> {
        if ram_bytes == 0 || cores == 0 || disk_bytes == 0 {
            return Err(Error::Config("system properties must be strictly positive".into()));
        }
        Ok(SystemProperties { ram_bytes, cores, disk_bytes })
    }

    pub fn value_of(&self, property: PropertyKind) -> f64 {
        match property {
            PropertyKind::Unit => 1.0,
            PropertyKind::Ram => self.ram_bytes as f64,
            PropertyKind::Disk => self.disk_bytes as f64,
            PropertyKind::Cores => self.cores as f64,
        }
    }
}

/// Which system property a formula multiplies by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyKind {
    Unit,
    Ram,
    Disk,
    Cores,
}

/// Type-decision actions: 0 discards the hint, 1..3 are relative to a system
/// property, 4 is absolute.
pub fn property_for_action(action: usize) -> Option<PropertyKind> {
    match action {
        0 => None,
        1 => Some(PropertyKind::Ram),
        2 => Some(PropertyKind::Disk),
        3 => Some(PropertyKind::Cores),
        4 => Some(PropertyKind::Unit),
        _ => panic!("action {action} out of range"),
    }
}

/// A fully translated hint: value * property * multiplicator.
#[derive(Clone, Debug, PartialEq)]
pub struct Formula {
    pub base: ConcreteValue,
    pub property: PropertyKind,
    pub multiplicator: f64,
}

impl Formula {
    pub fn magnitude(&self, s: &SystemProperties) -> f64 {
        self.base.magnitude() * s.value_of(self.property) * self.multiplicator
    }

    /// Unit of the evaluated value, or None when the combination is
    /// meaningless (e.g. a byte quantity taken relative to RAM).
    pub fn result_unit(&self) -> Option<Unit> {
        match self.property {
            PropertyKind::Ram | PropertyKind::Disk => match self.base.unit {
                Unit::Fraction | Unit::Dimensionless => Some(Unit::Bytes),
                Unit::Bytes | Unit::Count => None,
            },
            PropertyKind::Cores => match self.base.unit {
                Unit::Fraction | Unit::Dimensionless => Some(Unit::Count),
                Unit::Bytes | Unit::Count => None,
            },
            PropertyKind::Unit => Some(self.base.unit),
        }
    }
}

fn unit_compatible(result: Unit, param: Unit) -> bool {
    match result {
        Unit::Dimensionless => true,
        Unit::Bytes => param == Unit::Bytes,
        Unit::Count => matches!(param, Unit::Count | Unit::Dimensionless),
        Unit::Fraction => matches!(param, Unit::Fraction | Unit::Dimensionless),
    }
}

/// Evaluate a formula against a parameter: unit check, then kind coercion
/// (integers round half-up). None means the value can never be a valid
/// setting and counts as a rejection without a DBMS attempt.
pub fn coerce(formula: &Formula, param: &Parameter, s: &SystemProperties) -> Option<ConcreteValue> {
    let result_unit = formula.result_unit()?;
    if !unit_compatible(result_unit, param.unit) {
        return None;
    }
    let magnitude = formula.magnitude(s);
    if !magnitude.is_finite() {
        return None;
    }
    let unit = if result_unit == Unit::Dimensionless { param.unit } else { result_unit };
    match param.kind {
        ParamKind::Integer => {
            let rounded = (magnitude + 0.5).floor();
            if rounded.abs() > i64::MAX as f64 {
                return None;
            }
            Some(ConcreteValue::int(rounded as i64, unit))
        }
        ParamKind::Boolean => {
            if magnitude == 0.0 {
                Some(ConcreteValue::boolean(false))
            } else if magnitude == 1.0 {
                Some(ConcreteValue::boolean(true))
            } else {
                None
            }
        }
        ParamKind::Numeric => Some(match formula_exact_int(magnitude) {
            Some(i) => ConcreteValue::int(i, unit),
            None => ConcreteValue::real(magnitude, unit),
        }),
    }
}

fn formula_exact_int(m: f64) -> Option<i64> {
    if m.fract() == 0.0 && m.abs() < i64::MAX as f64 {
        Some(m as i64)
    } else {
        None
    }
}

/// State of the per-hint decision sequence.
#[derive(Clone, Debug)]
pub enum TranslationState {
    /// d = 0: decide hint type (or discard).
    ChooseType,
    /// d = 1: pick the multiplicator for the partial formula.
    ChooseMultiplicator { base: ConcreteValue, property: PropertyKind },
    /// Terminal. `outcome` holds the formula and the accepted concrete value
    /// after a successful set attempt; it is empty after a discard or a
    /// rejection.
    Done { outcome: Option<(Formula, ConcreteValue)> },
}

impl TranslationState {
    pub fn decision(&self) -> Option<usize> {
        match self {
            TranslationState::ChooseType => Some(0),
            TranslationState::ChooseMultiplicator { .. } => Some(1),
            TranslationState::Done { .. } => None,
        }
    }
}

/// Everything the benchmark-driven part of the reward needs.
#[derive(Clone, Copy, Debug)]
pub struct BenchmarkContext<'a> {
    pub spec: &'a BenchmarkSpec,
    /// Performance under the default configuration, measured once per session.
    pub baseline: f64,
    pub scale: f64,
}

/// Constants for one translation step.
#[derive(Clone, Copy, Debug)]
pub struct TranslationEnv<'a> {
    pub system: &'a SystemProperties,
    pub multiplicators: &'a [f64],
    /// Present during training: bonus for accepted settings within an order
    /// of magnitude of the parameter default.
    pub training_bonus: Option<f64>,
}

/// Normalized performance delta against the default-configuration baseline.
pub fn compute_reward(kind: MetricKind, default_perf: f64, observed: f64, scale: f64) -> Result<f64> {
    if !(default_perf.is_finite() && default_perf > 0.0) {
        return Err(Error::Benchmark(format!(
            "baseline performance must be positive, got {default_perf}"
        )));
    }
    Ok(match kind {
        MetricKind::RunTime => scale * (default_perf - observed) / default_perf,
        MetricKind::Throughput => scale * (observed - default_perf) / default_perf,
    })
}

/// Bonus when the accepted value sits within one order of magnitude of the
/// default (both zero counts as a match).
pub fn training_bonus(value: &ConcreteValue, default: &ConcreteValue, bonus: f64) -> f64 {
    let v = value.magnitude().abs();
    let d = default.magnitude().abs();
    if v == 0.0 && d == 0.0 {
        return bonus;
    }
    if v == 0.0 || d == 0.0 {
        return 0.0;
    }
    if (v / d).log10().abs() <= 1.0 + 1e-12 {
        bonus
    } else {
        0.0
    }
}

/// Transition function of the per-hint MDP.
///
/// d=0: action 0 discards the hint (reward 0); actions 1..4 form the partial
/// formula value * property. d=1: the multiplicator completes the formula and
/// the setting is attempted; acceptance earns +1 (plus a performance term
/// when a benchmark context is supplied, plus the training bonus when
/// enabled), rejection earns -1.
pub fn t_step(
    benchmark: Option<&BenchmarkContext>,
    hint: &CandidateHint,
    env: &TranslationEnv,
    state: &TranslationState,
    action: usize,
    dbms: &mut dyn DbmsHandle,
) -> Result<(TranslationState, f64)> {
    assert!(action < 5, "action {action} out of range");
    match state {
        TranslationState::ChooseType => match property_for_action(action) {
            None => Ok((TranslationState::Done { outcome: None }, 0.0)),
            Some(property) => Ok((
                TranslationState::ChooseMultiplicator { base: hint.value.canonical, property },
                0.0,
            )),
        },
        TranslationState::ChooseMultiplicator { base, property } => {
            let formula = Formula {
                base: *base,
                property: *property,
                multiplicator: env.multiplicators[action],
            };
            let Some(value) = coerce(&formula, &hint.param, env.system) else {
                return Ok((TranslationState::Done { outcome: None }, -1.0));
            };
            if !dbms.set(&hint.param.name, &value)? {
                return Ok((TranslationState::Done { outcome: None }, -1.0));
            }
            let mut reward = 1.0;
            if let Some(ctx) = benchmark {
                let perf = dbms.run_benchmark(ctx.spec)?;
                reward += compute_reward(ctx.spec.kind, ctx.baseline, perf.value(), ctx.scale)?;
            }
            if let Some(bonus) = env.training_bonus {
                reward += training_bonus(&value, &hint.param.default, bonus);
            }
            Ok((TranslationState::Done { outcome: Some((formula, value)) }, reward))
        }
        TranslationState::Done { .. } => panic!("t_step called on a terminal state"),
    }
}

/// A translated hint with its arbitration weight.
#[derive(Clone, Debug)]
pub struct WeightedHint {
    pub weight: f64,
    pub param: Arc<Parameter>,
    pub value: ConcreteValue,
}

/// Per-hint outcome recorded in the episode log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HintOutcome {
    pub param: String,
    pub value: Option<serde_json::Value>,
    pub actions: Vec<usize>,
    pub accepted: bool,
}

/// One JSON-lines record per episode.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: u64,
    pub hints: Vec<HintOutcome>,
    pub configs_evaluated: usize,
    pub best_perf: Option<f64>,
    pub reward: f64,
}

/// Shared context for running episodes.
pub struct EpisodeEnv<'a> {
    pub system: &'a SystemProperties,
    pub cfg: &'a TunerConfig,
    pub benchmark: BenchmarkContext<'a>,
    pub training: bool,
}

/// Run one episode over a batch of hints: translate each hint through the
/// agent's decisions, weigh the admissible ones, evaluate the aggregated
/// configurations, and fold everything back into the agent.
///
/// Per-hint set attempts run without a benchmark; performance feedback comes
/// from the combined evaluation at the end of the episode.
pub fn run_episode<R: Rng>(
    env: &EpisodeEnv,
    episode: u64,
    batch: &[CandidateHint],
    agent: &mut Agent,
    dbms: &mut dyn DbmsHandle,
    tracker: &mut BestTracker,
    rng: &mut R,
) -> Result<(EpisodeLog, f64)> {
    assert!(!batch.is_empty(), "episode batch must be non-empty");
    dbms.reset_defaults()?;
    let tenv = TranslationEnv {
        system: env.system,
        multiplicators: &env.cfg.multiplicators,
        training_bonus: env.training.then_some(env.cfg.training_bonus),
    };
    let mut experiences: Vec<Experience> = Vec::new();
    let mut weight_decisions: Vec<Experience> = Vec::new();
    let mut weighted: Vec<WeightedHint> = Vec::new();
    let mut outcomes: Vec<HintOutcome> = Vec::new();
    let mut total = 0.0;

    for hint in batch {
        let s0 = agent.hint_state(hint, 0);
        let a0 = agent.choose_from_state(&s0, rng);
        let (state, r0) = t_step(None, hint, &tenv, &TranslationState::ChooseType, a0, dbms)?;
        total += r0;
        let TranslationState::ChooseMultiplicator { .. } = state else {
            experiences.push(Experience { state: s0, action: a0, reward: r0, next: None });
            outcomes.push(HintOutcome {
                param: hint.param.name.clone(),
                value: None,
                actions: vec![a0],
                accepted: false,
            });
            continue;
        };
        let s1 = agent.hint_state(hint, 1);
        experiences.push(Experience {
            state: s0,
            action: a0,
            reward: r0,
            next: Some(s1.clone()),
        });
        let a1 = agent.choose_from_state(&s1, rng);
        let (state, r1) = t_step(None, hint, &tenv, &state, a1, dbms)?;
        total += r1;
        match state {
            TranslationState::Done { outcome: Some((_, value)) } => {
                let s2 = agent.hint_state(hint, 2);
                experiences.push(Experience {
                    state: s1,
                    action: a1,
                    reward: r1,
                    next: Some(s2.clone()),
                });
                let a2 = agent.choose_from_state(&s2, rng);
                weighted.push(WeightedHint {
                    weight: env.cfg.weights[a2],
                    param: Arc::clone(&hint.param),
                    value,
                });
                // reward filled in after the combined evaluation
                weight_decisions.push(Experience { state: s2, action: a2, reward: 0.0, next: None });
                outcomes.push(HintOutcome {
                    param: hint.param.name.clone(),
                    value: Some(value.scalar_json()),
                    actions: vec![a0, a1, a2],
                    accepted: true,
                });
            }
            _ => {
                experiences.push(Experience { state: s1, action: a1, reward: r1, next: None });
                outcomes.push(HintOutcome {
                    param: hint.param.name.clone(),
                    value: None,
                    actions: vec![a0, a1],
                    accepted: false,
                });
            }
        }
    }

    let report = if weighted.is_empty() {
        EvalReport::default()
    } else {
        eval_weighted(
            &weighted,
            &env.benchmark,
            env.cfg.configs_per_episode,
            dbms,
            tracker,
        )?
    };
    total += report.reward;
    for mut exp in weight_decisions {
        exp.reward = report.reward;
        experiences.push(exp);
    }
    agent.update(experiences);

    Ok((
        EpisodeLog {
            episode,
            hints: outcomes,
            configs_evaluated: report.evaluated,
            best_perf: report.best_perf,
            reward: total,
        },
        report.time_charge,
    ))
}
