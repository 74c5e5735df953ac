//! Top-level tuning sessions: extract and order hints once, then run
//! episodes until the budget runs out, tracking the best configuration found.

use crate::agent::{Agent, AgentCheckpoint};
use crate::aggregation::Configuration;
use crate::catalog::ParameterCatalog;
use crate::config::TunerConfig;
use crate::corpus::{segment_document, Document, Snippet};
use crate::dbms::{time_charge, BenchmarkSpec, DbmsHandle, MetricKind, Performance, SimulatedDbms};
use crate::encoder::LexicalEncoder;
use crate::error::{Error, Result};
use crate::extraction::{batches, extract_hints, order_hints, CandidateHint};
use crate::translation::{run_episode, BenchmarkContext, EpisodeEnv, SystemProperties};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;

/// Best configuration seen so far, under the benchmark's metric direction.
/// Only strict improvements replace the incumbent.
#[derive(Clone, Debug)]
pub struct BestTracker {
    metric: MetricKind,
    best: Option<(Configuration, Performance)>,
}

impl BestTracker {
    pub fn new(metric: MetricKind) -> Self {
        BestTracker { metric, best: None }
    }

    pub fn metric_improves(&self, current: f64, candidate: f64) -> bool {
        match self.metric {
            MetricKind::RunTime => candidate < current,
            MetricKind::Throughput => candidate > current,
        }
    }

    pub fn observe(&mut self, config: &Configuration, perf: Performance) {
        let replace = match &self.best {
            None => true,
            Some((_, cur)) => self.metric_improves(cur.value(), perf.value()),
        };
        if replace {
            self.best = Some((config.clone(), perf));
        }
    }

    pub fn best(&self) -> Option<&(Configuration, Performance)> {
        self.best.as_ref()
    }
}

/// Stop after this much charged benchmark time and/or this many episodes.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Budget {
    pub seconds: Option<f64>,
    pub episodes: Option<u64>,
}

impl Budget {
    pub fn seconds(s: f64) -> Self {
        Budget { seconds: Some(s), episodes: None }
    }

    pub fn episodes(n: u64) -> Self {
        Budget { seconds: None, episodes: Some(n) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seconds.is_none() && self.episodes.is_none() {
            return Err(Error::Config("budget needs a time limit or an episode limit".into()));
        }
        if let Some(s) = self.seconds {
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::Config(format!("time budget must be positive, got {s}")));
            }
        }
        Ok(())
    }

    fn exhausted(&self, elapsed: f64, episodes: u64) -> bool {
        if let Some(s) = self.seconds {
            if elapsed >= s {
                return true;
            }
        }
        if let Some(n) = self.episodes {
            if episodes >= n {
                return true;
            }
        }
        false
    }
}

#[derive(Clone, Debug)]
pub struct SessionOutcome {
    pub best_config: Configuration,
    pub best_perf: f64,
    pub baseline: f64,
    pub episodes: u64,
    pub elapsed_secs: f64,
    pub hint_count: usize,
    /// Benchmark evaluations performed across all episodes (baseline excluded).
    pub evaluations: u64,
    pub episode_rewards: Vec<f64>,
}

#[derive(Serialize)]
struct SessionStartEvent<'a> {
    event: &'a str,
    seed: u64,
    training: bool,
    budget: Budget,
    benchmark: &'a BenchmarkSpec,
    config: &'a TunerConfig,
    documents: usize,
}

#[derive(Serialize)]
struct SimpleEvent<'a> {
    event: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    perf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<&'a str>,
}

#[derive(Serialize)]
struct SessionEndEvent<'a> {
    event: &'a str,
    episodes: u64,
    best_perf: f64,
    baseline: f64,
    elapsed_secs: f64,
}

fn emit<T: Serialize>(log: &mut dyn Write, record: &T) -> Result<()> {
    serde_json::to_writer(&mut *log, record)?;
    log.write_all(b"\n")?;
    Ok(())
}

/// Segment every document and run candidate-hint extraction over all
/// snippets. The lexical encoder is fitted on the snippet texts.
pub fn extract_corpus_hints(
    corpus: &[Document],
    catalog: &ParameterCatalog,
    segment_limit: usize,
) -> Vec<CandidateHint> {
    let snippets: Vec<Arc<Snippet>> = corpus
        .iter()
        .flat_map(|doc| segment_document(doc, segment_limit))
        .map(Arc::new)
        .collect();
    let encoder = LexicalEncoder::with_idf(snippets.iter().map(|s| s.text.as_str()));
    snippets
        .iter()
        .flat_map(|s| extract_hints(catalog, s, &encoder))
        .collect()
}

struct SessionParams<'a> {
    corpus: &'a [Document],
    system: &'a SystemProperties,
    benchmark: &'a BenchmarkSpec,
    cfg: &'a TunerConfig,
    budget: Budget,
    seed: u64,
    training: bool,
}

fn run_session(
    p: SessionParams,
    dbms: &mut dyn DbmsHandle,
    agent: &mut Agent,
    log: &mut dyn Write,
) -> Result<SessionOutcome> {
    p.cfg.validate()?;
    p.budget.validate()?;
    emit(
        log,
        &SessionStartEvent {
            event: "session_start",
            seed: p.seed,
            training: p.training,
            budget: p.budget,
            benchmark: p.benchmark,
            config: p.cfg,
            documents: p.corpus.len(),
        },
    )?;

    let hints = extract_corpus_hints(p.corpus, dbms.catalog(), p.cfg.segment_limit);

    dbms.reset_defaults()?;
    let baseline = dbms.run_benchmark(p.benchmark)?;
    let mut elapsed = time_charge(p.benchmark, &baseline);
    emit(log, &SimpleEvent { event: "baseline", perf: Some(baseline.value()), message: None })?;

    let mut tracker = BestTracker::new(p.benchmark.kind);
    tracker.observe(&Configuration::default(), baseline);

    let mut outcome = SessionOutcome {
        best_config: Configuration::default(),
        best_perf: baseline.value(),
        baseline: baseline.value(),
        episodes: 0,
        elapsed_secs: elapsed,
        hint_count: hints.len(),
        evaluations: 0,
        episode_rewards: Vec::new(),
    };

    if hints.is_empty() {
        log::warn!("no tuning hints extracted; returning the default configuration");
        emit(
            log,
            &SimpleEvent {
                event: "warning",
                perf: None,
                message: Some("no tuning hints extracted; keeping defaults"),
            },
        )?;
        emit(
            log,
            &SessionEndEvent {
                event: "session_end",
                episodes: 0,
                best_perf: baseline.value(),
                baseline: baseline.value(),
                elapsed_secs: elapsed,
            },
        )?;
        return Ok(outcome);
    }

    let ordered = order_hints(hints, p.cfg.hints_per_param);
    let batch_list = batches(&ordered, p.cfg.hints_per_episode);
    let scale = if p.training {
        p.cfg.perf_scale / p.cfg.training_perf_divisor
    } else {
        p.cfg.perf_scale
    };
    let env = EpisodeEnv {
        system: p.system,
        cfg: p.cfg,
        benchmark: BenchmarkContext { spec: p.benchmark, baseline: baseline.value(), scale },
        training: p.training,
    };
    let mut rng = ChaCha20Rng::seed_from_u64(p.seed);
    let mut episode = 0u64;
    'outer: loop {
        for batch in &batch_list {
            if p.budget.exhausted(elapsed, episode) {
                break 'outer;
            }
            let (record, charge) =
                run_episode(&env, episode, batch, agent, dbms, &mut tracker, &mut rng)?;
            emit(log, &record)?;
            outcome.episode_rewards.push(record.reward);
            outcome.evaluations += record.configs_evaluated as u64;
            elapsed += charge;
            episode += 1;
        }
        if batch_list.is_empty() {
            break;
        }
    }

    let (best_config, best_perf) = tracker.best().expect("tracker seeded with baseline");
    outcome.best_config = best_config.clone();
    outcome.best_perf = best_perf.value();
    outcome.episodes = episode;
    outcome.elapsed_secs = elapsed;
    emit(
        log,
        &SessionEndEvent {
            event: "session_end",
            episodes: episode,
            best_perf: outcome.best_perf,
            baseline: outcome.baseline,
            elapsed_secs: elapsed,
        },
    )?;
    log.flush()?;
    Ok(outcome)
}

/// Full tuning session: extract and order hints from the corpus, then cycle
/// episode batches until the budget is exhausted. Returns the best observed
/// configuration together with its performance.
#[allow(clippy::too_many_arguments)]
pub fn tune(
    corpus: &[Document],
    system: &SystemProperties,
    benchmark: &BenchmarkSpec,
    dbms: &mut dyn DbmsHandle,
    cfg: &TunerConfig,
    budget: Budget,
    agent: &mut Agent,
    seed: u64,
    log: &mut dyn Write,
) -> Result<SessionOutcome> {
    run_session(
        SessionParams {
            corpus,
            system,
            benchmark,
            cfg,
            budget,
            seed,
            training: false,
        },
        dbms,
        agent,
        log,
    )
}

/// Inputs of a training run against the simulator.
pub struct TrainingSpec {
    pub corpus: Vec<Document>,
    pub dbms: SimulatedDbms,
    pub benchmark: BenchmarkSpec,
    pub system: SystemProperties,
    pub iterations: u64,
    pub seed: u64,
}

/// Run the episode loop in training mode (masked scoring, damped performance
/// reward, order-of-magnitude bonus) and return the resulting checkpoint.
pub fn train(
    mut spec: TrainingSpec,
    cfg: &TunerConfig,
    agent: &mut Agent,
    log: &mut dyn Write,
) -> Result<(AgentCheckpoint, SessionOutcome)> {
    agent.set_masked_mode(true);
    let outcome = run_session(
        SessionParams {
            corpus: &spec.corpus,
            system: &spec.system,
            benchmark: &spec.benchmark,
            cfg,
            budget: Budget::episodes(spec.iterations),
            seed: spec.seed,
            training: true,
        },
        &mut spec.dbms,
        agent,
        log,
    )?;
    Ok((agent.checkpoint(), outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EpsilonSchedule;
    use crate::labels::LabelSet;
    use crate::scorer::LinearScorer;
    use crate::value::{ConcreteValue, Unit};

    fn perf(v: f64) -> Performance {
        Performance::new(v).unwrap()
    }

    fn config(name: &str, v: i64) -> Configuration {
        let mut c = Configuration::default();
        c.assignments.insert(name.into(), ConcreteValue::int(v, Unit::Count));
        c
    }

    #[test]
    fn first_observation_becomes_best() {
        let mut t = BestTracker::new(MetricKind::RunTime);
        assert!(t.best().is_none());
        t.observe(&config("a", 1), perf(12.0));
        assert_eq!(t.best().unwrap().1.value(), 12.0);
    }

    #[test]
    fn worse_and_equal_observations_keep_the_incumbent() {
        let mut t = BestTracker::new(MetricKind::RunTime);
        t.observe(&config("a", 1), perf(12.0));
        t.observe(&config("a", 2), perf(15.0));
        assert_eq!(t.best().unwrap().0.assignments["a"].magnitude(), 1.0);
        t.observe(&config("a", 3), perf(12.0)); // tie: keep earlier
        assert_eq!(t.best().unwrap().0.assignments["a"].magnitude(), 1.0);
        t.observe(&config("a", 4), perf(11.0));
        assert_eq!(t.best().unwrap().0.assignments["a"].magnitude(), 4.0);
    }

    #[test]
    fn throughput_direction_is_inverted() {
        let mut t = BestTracker::new(MetricKind::Throughput);
        t.observe(&config("a", 1), perf(100.0));
        t.observe(&config("a", 2), perf(90.0));
        assert_eq!(t.best().unwrap().1.value(), 100.0);
        t.observe(&config("a", 3), perf(110.0));
        assert_eq!(t.best().unwrap().1.value(), 110.0);
    }

    #[test]
    fn budget_requires_a_bound() {
        assert!(Budget::default().validate().is_err());
        assert!(Budget::seconds(0.0).validate().is_err());
        assert!(Budget::seconds(10.0).validate().is_ok());
        assert!(Budget::episodes(0).validate().is_ok());
    }

    fn tiny_dbms() -> SimulatedDbms {
        let json = r#"[
            {"name":"cache_bytes","kind":"integer","default":134217728,"min":1048576,"max":34359738368,"unit":"bytes"},
            {"name":"filler_cost","kind":"numeric","default":4.0,"min":0.1,"max":100.0,"unit":"dimensionless"}
        ]"#;
        let catalog = crate::catalog::load_catalog(json.as_bytes()).unwrap();
        SimulatedDbms::new(
            catalog,
            vec![crate::dbms::SensitiveSpec::Numeric {
                name: "cache_bytes".into(),
                opt: 2147483648.0,
                k: 1.0,
            }],
            10.0,
            0.0,
            0,
        )
        .unwrap()
    }

    fn fresh_agent(eps: EpsilonSchedule) -> Agent {
        let learning = crate::config::LearningConfig { epsilon: eps, ..Default::default() };
        Agent::new(Box::new(LinearScorer::new(0.01)), LabelSet::builtin().clone(), learning, false, 9)
    }

    #[test]
    fn zero_documents_returns_defaults_with_warning() {
        let mut dbms = tiny_dbms();
        let mut agent = fresh_agent(EpsilonSchedule::default());
        let mut log = Vec::new();
        let system = SystemProperties::new(8589934592, 4, 1099511627776).unwrap();
        let outcome = tune(
            &[],
            &system,
            &BenchmarkSpec::default(),
            &mut dbms,
            &TunerConfig::default(),
            Budget::episodes(5),
            &mut agent,
            1,
            &mut log,
        )
        .unwrap();
        assert!(outcome.best_config.is_empty());
        assert_eq!(outcome.episodes, 0);
        let text = String::from_utf8(log).unwrap();
        assert!(text.contains("\"event\":\"warning\""));
    }

    #[test]
    fn budget_smaller_than_one_run_keeps_the_baseline() {
        let mut dbms = tiny_dbms();
        let mut agent = fresh_agent(EpsilonSchedule::default());
        let mut log = Vec::new();
        let system = SystemProperties::new(8589934592, 4, 1099511627776).unwrap();
        let corpus =
            vec![Document::new("d1", "Set cache_bytes to 25% of RAM for caching.").unwrap()];
        // default config runs take ~21700 simulated seconds; a 1s budget
        // admits no episode after the baseline measurement
        let outcome = tune(
            &corpus,
            &system,
            &BenchmarkSpec::default(),
            &mut dbms,
            &TunerConfig::default(),
            Budget::seconds(1.0),
            &mut agent,
            1,
            &mut log,
        )
        .unwrap();
        assert_eq!(outcome.episodes, 0);
        assert_eq!(outcome.best_perf, outcome.baseline);
        assert!(outcome.best_config.is_empty());
    }

    #[test]
    fn session_with_optimal_hint_improves_over_baseline() {
        let mut dbms = tiny_dbms();
        let mut agent = fresh_agent(EpsilonSchedule { start: 0.8, end: 0.1, anneal_episodes: 20 });
        let mut log = Vec::new();
        let system = SystemProperties::new(8589934592, 4, 1099511627776).unwrap();
        let corpus = vec![
            Document::new("d1", "Set cache_bytes to 25% of RAM for caching.").unwrap(),
            Document::new("d2", "A cache_bytes of 2GB works well on dedicated hosts.").unwrap(),
        ];
        let outcome = tune(
            &corpus,
            &system,
            &BenchmarkSpec::default(),
            &mut dbms,
            &TunerConfig::default(),
            Budget::episodes(40),
            &mut agent,
            7,
            &mut log,
        )
        .unwrap();
        assert_eq!(outcome.episodes, 40);
        assert!(
            outcome.best_perf < outcome.baseline,
            "best {} should beat baseline {}",
            outcome.best_perf,
            outcome.baseline
        );
        // the optimal setting is reachable straight from the hints
        assert!((outcome.best_perf - 10.0).abs() < 1e-6, "best {}", outcome.best_perf);
    }

    #[test]
    fn identical_seeds_produce_identical_logs() {
        let system = SystemProperties::new(8589934592, 4, 1099511627776).unwrap();
        let corpus = vec![
            Document::new("d1", "Set cache_bytes to 25% of RAM for caching.").unwrap(),
            Document::new("d2", "Lower filler_cost to 2 when data fits in memory.").unwrap(),
        ];
        let run = || {
            let mut dbms = tiny_dbms();
            let mut agent = fresh_agent(EpsilonSchedule::default());
            let mut log = Vec::new();
            tune(
                &corpus,
                &system,
                &BenchmarkSpec::default(),
                &mut dbms,
                &TunerConfig::default(),
                Budget::episodes(12),
                &mut agent,
                42,
                &mut log,
            )
            .unwrap();
            log
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn zero_iteration_training_keeps_initial_weights() {
        let dbms = tiny_dbms();
        let mut agent = fresh_agent(EpsilonSchedule::default());
        let before = serde_json::to_string(&agent.checkpoint().scorer).unwrap();
        let system = SystemProperties::new(8589934592, 4, 1099511627776).unwrap();
        let spec = TrainingSpec {
            corpus: vec![Document::new("d", "Set cache_bytes to 1GB.").unwrap()],
            dbms,
            benchmark: BenchmarkSpec::default(),
            system,
            iterations: 0,
            seed: 3,
        };
        let mut log = Vec::new();
        let (ckpt, outcome) = train(spec, &TunerConfig::default(), &mut agent, &mut log).unwrap();
        assert_eq!(outcome.episodes, 0);
        assert_eq!(serde_json::to_string(&ckpt.scorer).unwrap(), before);
        assert!(agent.masked_mode());
    }
}
