//! Library-level walkthrough: build a synthetic scenario, run a tuning
//! session against the simulator, and print what was found.
//!
//!     cargo run -p knobtune-core --example simulated_session

use knobtune_core::agent::Agent;
use knobtune_core::config::TunerConfig;
use knobtune_core::dbms::MetricKind;
use knobtune_core::labels::LabelSet;
use knobtune_core::scorer::LinearScorer;
use knobtune_core::session::{tune, Budget};
use knobtune_core::synth::tuning_bundle;

fn main() -> knobtune_core::Result<()> {
    let seed = 7;
    let bundle = tuning_bundle(seed, 50, 20, 0)?;
    println!("catalog: {} knobs, corpus: {} documents", bundle.catalog.len(), bundle.corpus.len());
    println!("sensitive knobs: {:?}", bundle.sensitive_names);

    let cfg = TunerConfig::default();
    let mut agent = Agent::new(
        Box::new(LinearScorer::new(cfg.learning.learning_rate)),
        LabelSet::builtin().clone(),
        cfg.learning,
        false,
        seed,
    );
    let mut dbms = bundle.dbms.clone();
    let mut log = std::io::sink();
    let outcome = tune(
        &bundle.corpus,
        &bundle.system,
        &bundle.benchmark,
        &mut dbms,
        &cfg,
        Budget::episodes(200),
        &mut agent,
        seed,
        &mut log,
    )?;

    let optimal = bundle.dbms.optimal_value(MetricKind::RunTime);
    println!(
        "baseline {:.3}s -> best {:.3}s after {} episodes ({} evaluations)",
        outcome.baseline, outcome.best_perf, outcome.episodes, outcome.evaluations
    );
    println!(
        "closed-form optimum {:.3}s; reached {:.1}% of it",
        optimal,
        100.0 * optimal / outcome.best_perf
    );
    print!("{}", outcome.best_config.render_properties());
    Ok(())
}
