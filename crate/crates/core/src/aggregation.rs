//! Merging conflicting weighted hints into a few configurations via the
//! weighted max-distance greedy, and evaluating them.

use crate::dbms::{time_charge, DbmsHandle, Performance};
use crate::error::Result;
use crate::session::BestTracker;
use crate::translation::{compute_reward, BenchmarkContext, WeightedHint};
use crate::value::ConcreteValue;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

/// A partial assignment of parameters; everything absent keeps its default.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Configuration {
    pub assignments: BTreeMap<String, ConcreteValue>,
}

impl Configuration {
    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// key=value lines, sorted by parameter name.
    pub fn render_properties(&self) -> String {
        let mut out = String::new();
        for (name, value) in &self.assignments {
            out.push_str(name);
            out.push('=');
            out.push_str(&value.render());
            out.push('\n');
        }
        out
    }
}

/// Candidate values for one parameter with summed weights. Zero-weight
/// entries are dropped at construction; duplicates are merged by addition.
#[derive(Clone, Debug)]
pub struct WeightedValueSet {
    values: Vec<(ConcreteValue, f64)>,
}

impl WeightedValueSet {
    pub fn from_entries(entries: impl IntoIterator<Item = (ConcreteValue, f64)>) -> Self {
        let mut merged: Vec<(ConcreteValue, f64)> = Vec::new();
        for (value, weight) in entries {
            if weight <= 0.0 {
                continue;
            }
            match merged.iter_mut().find(|(v, _)| v.canonical_key() == value.canonical_key()) {
                Some((_, w)) => *w += weight,
                None => merged.push((value, weight)),
            }
        }
        merged.sort_by(|a, b| a.0.magnitude().total_cmp(&b.0.magnitude()));
        WeightedValueSet { values: merged }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(ConcreteValue, f64)> {
        self.values.iter()
    }
}

pub type ParamValueSets = Vec<(Arc<crate::catalog::Parameter>, WeightedValueSet)>;

/// Group weighted hints per parameter, in parameter-name order.
pub fn weighted_value_sets(hints: &[WeightedHint]) -> ParamValueSets {
    type Grouped = BTreeMap<String, (Arc<crate::catalog::Parameter>, Vec<(ConcreteValue, f64)>)>;
    let mut by_param: Grouped = BTreeMap::new();
    for h in hints {
        by_param
            .entry(h.param.name.clone())
            .or_insert_with(|| (Arc::clone(&h.param), Vec::new()))
            .1
            .push((h.value, h.weight));
    }
    by_param
        .into_values()
        .map(|(param, entries)| (param, WeightedValueSet::from_entries(entries)))
        .filter(|(_, set)| !set.is_empty())
        .collect()
}

/// Maximal weighted distance from any value in the set to its nearest
/// selected value. Distances are absolute differences in the canonical unit.
pub fn max_dist(selected: &[ConcreteValue], set: &WeightedValueSet) -> f64 {
    assert!(!selected.is_empty(), "selected set must be seeded with a first pick");
    assert!(!set.is_empty(), "weighted value set must be non-empty");
    set.iter()
        .map(|(v, w)| {
            let nearest = selected
                .iter()
                .map(|c| (v.magnitude() - c.magnitude()).abs())
                .fold(f64::INFINITY, f64::min);
            w * nearest
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Greedily pick up to `n` values covering the weighted set: each step adds
/// the value minimizing the resulting max distance. Objective ties prefer the
/// candidate with larger weight, then the smaller value.
pub fn select_values(set: &WeightedValueSet, n: usize) -> Vec<ConcreteValue> {
    assert!(n >= 1, "must select at least one value");
    assert!(!set.is_empty(), "weighted value set must be non-empty");
    let mut selected: Vec<ConcreteValue> = Vec::new();
    let target = n.min(set.len());
    while selected.len() < target {
        let mut best: Option<(f64, f64, f64, ConcreteValue)> = None;
        for (v, w) in set.iter() {
            if selected.iter().any(|c| c.canonical_key() == v.canonical_key()) {
                continue;
            }
            let mut trial = selected.clone();
            trial.push(*v);
            let d = max_dist(&trial, set);
            let better = match &best {
                None => true,
                Some((bd, bw, bv, _)) => {
                    (d, -w, v.magnitude()).partial_cmp(&(*bd, -bw, *bv))
                        == Some(std::cmp::Ordering::Less)
                }
            };
            if better {
                best = Some((d, *w, v.magnitude(), *v));
            }
        }
        selected.push(best.expect("at least one unselected value remains").3);
    }
    selected
}

/// Build configuration i from the i-th selected value of every parameter,
/// clamping to the last entry of shorter lists; duplicates are removed.
pub fn compose_configurations(
    selections: &[(Arc<crate::catalog::Parameter>, Vec<ConcreteValue>)],
    n: usize,
) -> Vec<Configuration> {
    let mut configs: Vec<Configuration> = Vec::new();
    if selections.is_empty() {
        return configs;
    }
    for i in 0..n {
        let mut config = Configuration::default();
        for (param, values) in selections {
            assert!(!values.is_empty(), "selection lists must be non-empty");
            let v = values[i.min(values.len() - 1)];
            config.assignments.insert(param.name.clone(), v);
        }
        if !configs.contains(&config) {
            configs.push(config);
        }
    }
    configs
}

/// Outcome of one combined evaluation round.
#[derive(Clone, Debug, Default)]
pub struct EvalReport {
    pub reward: f64,
    pub evaluated: usize,
    pub best_perf: Option<f64>,
    pub time_charge: f64,
}

/// Reset to defaults, apply every assignment, and benchmark. A rejected
/// assignment yields the -1 penalty without running the benchmark.
pub fn evaluate_config(
    ctx: &BenchmarkContext,
    config: &Configuration,
    dbms: &mut dyn DbmsHandle,
) -> Result<(f64, Option<Performance>)> {
    dbms.reset_defaults()?;
    let mut ok = true;
    for (name, value) in &config.assignments {
        ok &= dbms.set(name, value)?;
    }
    if !ok {
        return Ok((-1.0, None));
    }
    let perf = dbms.run_benchmark(ctx.spec)?;
    let reward = compute_reward(ctx.spec.kind, ctx.baseline, perf.value(), ctx.scale)?;
    Ok((reward, Some(perf)))
}

/// Aggregate weighted hints into at most `n` configurations, evaluate them,
/// track the best-performing one, and return the maximal reward.
pub fn eval_weighted(
    hints: &[WeightedHint],
    ctx: &BenchmarkContext,
    n: usize,
    dbms: &mut dyn DbmsHandle,
    tracker: &mut BestTracker,
) -> Result<EvalReport> {
    let sets = weighted_value_sets(hints);
    if sets.is_empty() {
        return Ok(EvalReport::default());
    }
    let selections: Vec<_> = sets
        .iter()
        .map(|(param, set)| (Arc::clone(param), select_values(set, n)))
        .collect();
    let configs = compose_configurations(&selections, n);
    let mut report = EvalReport::default();
    let mut best = f64::NEG_INFINITY;
    for config in &configs {
        let (reward, perf) = evaluate_config(ctx, config, dbms)?;
        report.evaluated += 1;
        best = best.max(reward);
        if let Some(perf) = perf {
            report.time_charge += time_charge(ctx.spec, &perf);
            tracker.observe(config, perf);
            let better = match report.best_perf {
                None => true,
                Some(cur) => tracker.metric_improves(cur, perf.value()),
            };
            if better {
                report.best_perf = Some(perf.value());
            }
        }
    }
    report.reward = if report.evaluated == 0 { 0.0 } else { best };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ParamKind, Parameter};
    use crate::dbms::{BenchmarkSpec, MetricKind, SimulatedDbms, SensitiveSpec};
    use crate::value::Unit;
    use proptest::prelude::*;

    const GIB: i64 = 1024 * 1024 * 1024;

    fn gb(n: i64) -> ConcreteValue {
        ConcreteValue::int(n * GIB, Unit::Bytes)
    }

    fn example_set() -> WeightedValueSet {
        WeightedValueSet::from_entries([(gb(1), 1.0), (gb(2), 8.0), (gb(8), 1.0)])
    }

    #[test]
    fn worked_example_distances() {
        let set = example_set();
        assert_eq!(max_dist(&[gb(1)], &set), 8.0 * GIB as f64);
        assert_eq!(max_dist(&[gb(8)], &set), 48.0 * GIB as f64);
        // the formula gives 6 GiB for C = {2GB}: 1 * |8 - 2|
        assert_eq!(max_dist(&[gb(2)], &set), 6.0 * GIB as f64);
    }

    #[test]
    fn worked_example_selection() {
        let picks = select_values(&example_set(), 2);
        assert_eq!(picks, vec![gb(2), gb(8)]);
    }

    #[test]
    fn singleton_set_selects_once() {
        let set = WeightedValueSet::from_entries([(gb(4), 2.0)]);
        assert_eq!(select_values(&set, 3), vec![gb(4)]);
    }

    #[test]
    fn zero_weight_entries_are_dropped_and_duplicates_merge() {
        let set = WeightedValueSet::from_entries([
            (gb(1), 0.0),
            (gb(2), 3.0),
            (ConcreteValue::real(2.0 * GIB as f64, Unit::Bytes), 5.0),
        ]);
        assert_eq!(set.len(), 1);
        let (_, w) = set.iter().next().unwrap();
        assert_eq!(*w, 8.0);
    }

    #[test]
    fn compose_pairs_ith_entries() {
        let p = |name: &str| {
            Arc::new(Parameter {
                name: name.into(),
                kind: ParamKind::Integer,
                default: ConcreteValue::int(0, Unit::Count),
                min: None,
                max: None,
                granularity: None,
                unit: Unit::Count,
            })
        };
        let a = p("a");
        let b = p("b");
        let one = ConcreteValue::int(1, Unit::Count);
        let two = ConcreteValue::int(2, Unit::Count);
        let configs = compose_configurations(
            &[(Arc::clone(&a), vec![one, two]), (Arc::clone(&b), vec![two, one])],
            2,
        );
        assert_eq!(configs.len(), 2);
        assert_eq!(configs[0].assignments["a"], one);
        assert_eq!(configs[0].assignments["b"], two);
        assert_eq!(configs[1].assignments["a"], two);
        assert_eq!(configs[1].assignments["b"], one);

        // shorter lists clamp and the duplicates deduplicate
        let configs = compose_configurations(&[(a, vec![one])], 2);
        assert_eq!(configs.len(), 1);

        assert!(compose_configurations(&[], 2).is_empty());
    }

    fn test_dbms() -> SimulatedDbms {
        let json = r#"[
            {"name":"pool","kind":"integer","default":134217728,"min":1048576,"max":34359738368,"unit":"bytes"},
            {"name":"workers","kind":"integer","default":1,"min":1,"max":100,"unit":"count"}
        ]"#;
        let catalog = crate::catalog::load_catalog(json.as_bytes()).unwrap();
        SimulatedDbms::new(
            catalog,
            vec![SensitiveSpec::Numeric { name: "pool".into(), opt: 2.0 * GIB as f64, k: 1.0 }],
            10.0,
            0.0,
            0,
        )
        .unwrap()
    }

    #[test]
    fn all_defaults_config_scores_zero() {
        let mut dbms = test_dbms();
        let spec = BenchmarkSpec::default();
        let baseline = dbms.run_benchmark(&spec).unwrap().value();
        let ctx = BenchmarkContext { spec: &spec, baseline, scale: 10.0 };
        let (reward, perf) = evaluate_config(&ctx, &Configuration::default(), &mut dbms).unwrap();
        assert_eq!(reward, 0.0);
        assert!(perf.is_some());
    }

    #[test]
    fn out_of_range_assignment_scores_minus_one() {
        let mut dbms = test_dbms();
        let spec = BenchmarkSpec::default();
        let ctx = BenchmarkContext { spec: &spec, baseline: 10.0, scale: 10.0 };
        let mut config = Configuration::default();
        config.assignments.insert("workers".into(), ConcreteValue::int(0, Unit::Count));
        let (reward, perf) = evaluate_config(&ctx, &config, &mut dbms).unwrap();
        assert_eq!(reward, -1.0);
        assert!(perf.is_none());
    }

    #[test]
    fn hidden_optimum_yields_maximal_reward() {
        let mut dbms = test_dbms();
        let spec = BenchmarkSpec::default();
        dbms.reset_defaults().unwrap();
        let baseline = dbms.run_benchmark(&spec).unwrap().value();
        let ctx = BenchmarkContext { spec: &spec, baseline, scale: 10.0 };
        let mut config = Configuration::default();
        config.assignments.insert("pool".into(), gb(2));
        let (reward, perf) = evaluate_config(&ctx, &config, &mut dbms).unwrap();
        let optimal = dbms.optimal_value(MetricKind::RunTime);
        assert!((perf.unwrap().value() - optimal).abs() < 1e-9);
        // no configuration can beat the closed-form optimum
        assert!((reward - 10.0 * (baseline - optimal) / baseline).abs() < 1e-9);
    }

    #[test]
    fn eval_weighted_runs_the_worked_example() {
        let mut dbms = test_dbms();
        let spec = BenchmarkSpec::default();
        dbms.reset_defaults().unwrap();
        let baseline = dbms.run_benchmark(&spec).unwrap().value();
        let ctx = BenchmarkContext { spec: &spec, baseline, scale: 10.0 };
        let pool = dbms.catalog().get("pool").unwrap().clone();
        let hints: Vec<WeightedHint> = [(gb(1), 1.0), (gb(2), 8.0), (gb(8), 1.0)]
            .into_iter()
            .map(|(value, weight)| WeightedHint { weight, param: Arc::clone(&pool), value })
            .collect();
        let mut tracker = BestTracker::new(MetricKind::RunTime);
        let report = eval_weighted(&hints, &ctx, 2, &mut dbms, &mut tracker).unwrap();
        assert_eq!(report.evaluated, 2);
        // best configuration sets pool to 2GB, the curve optimum
        let (best_config, best_perf) = tracker.best().unwrap();
        assert_eq!(best_config.assignments["pool"], gb(2));
        assert!((best_perf.value() - 10.0).abs() < 1e-9);
        assert!(report.reward > 0.0);
    }

    #[test]
    fn empty_weighted_set_is_a_no_op() {
        let mut dbms = test_dbms();
        let spec = BenchmarkSpec::default();
        let ctx = BenchmarkContext { spec: &spec, baseline: 10.0, scale: 10.0 };
        let mut tracker = BestTracker::new(MetricKind::RunTime);
        let report = eval_weighted(&[], &ctx, 2, &mut dbms, &mut tracker).unwrap();
        assert_eq!(report.evaluated, 0);
        assert_eq!(report.reward, 0.0);
        assert!(tracker.best().is_none());
    }

    #[test]
    fn single_weighted_hint_evaluates_one_config() {
        let mut dbms = test_dbms();
        let spec = BenchmarkSpec::default();
        dbms.reset_defaults().unwrap();
        let baseline = dbms.run_benchmark(&spec).unwrap().value();
        let ctx = BenchmarkContext { spec: &spec, baseline, scale: 10.0 };
        let pool = dbms.catalog().get("pool").unwrap().clone();
        let hints = vec![WeightedHint { weight: 4.0, param: pool, value: gb(1) }];
        let mut tracker = BestTracker::new(MetricKind::RunTime);
        let report = eval_weighted(&hints, &ctx, 2, &mut dbms, &mut tracker).unwrap();
        assert_eq!(report.evaluated, 1);
    }

    fn arbitrary_set() -> impl Strategy<Value = WeightedValueSet> {
        proptest::collection::vec(
            (0u32..200, prop_oneof![Just(2.0), Just(4.0), Just(8.0), Just(16.0)]),
            1..=6,
        )
        .prop_map(|entries| {
            WeightedValueSet::from_entries(entries.into_iter().map(|(v, w)| {
                (ConcreteValue::int(v as i64, Unit::Dimensionless), w)
            }))
        })
    }

    proptest! {
        #[test]
        fn max_dist_is_monotone_in_selected(set in arbitrary_set(), extra in 0u32..200) {
            let values: Vec<ConcreteValue> = set.iter().map(|(v, _)| *v).collect();
            let first = vec![values[0]];
            let with_extra = vec![values[0], ConcreteValue::int(extra as i64, Unit::Dimensionless)];
            prop_assert!(max_dist(&with_extra, &set) <= max_dist(&first, &set) + 1e-12);
        }

        #[test]
        fn selected_values_come_from_the_set(set in arbitrary_set(), n in 1usize..4) {
            let picks = select_values(&set, n);
            prop_assert_eq!(picks.len(), n.min(set.len()));
            for p in &picks {
                prop_assert!(set.iter().any(|(v, _)| v.canonical_key() == p.canonical_key()));
            }
            // no duplicates
            let mut keys: Vec<_> = picks.iter().map(|p| p.canonical_key()).collect();
            keys.sort();
            keys.dedup();
            prop_assert_eq!(keys.len(), picks.len());
        }
    }
}
