//! Seeded generators for synthetic catalogs, simulator scenarios, and hint
//! corpora. Used by the training pipeline demos and the test suites.

use crate::catalog::{parameter_from_raw, ParamKind, ParameterCatalog, RawParameter};
use crate::corpus::Document;
use crate::dbms::{BenchmarkSpec, CatalogSource, MetricKind, ScenarioFile, SensitiveSpec, SimulatedDbms};
use crate::error::Result;
use crate::translation::SystemProperties;
use crate::value::Unit;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

const GIB: i64 = 1024 * 1024 * 1024;
const MIB: i64 = 1024 * 1024;

/// A complete synthetic tuning setup: catalog, hidden surface, corpus.
pub struct SynthBundle {
    pub catalog_raw: Vec<RawParameter>,
    pub catalog: ParameterCatalog,
    pub scenario: ScenarioFile,
    pub dbms: SimulatedDbms,
    pub corpus: Vec<Document>,
    pub benchmark: BenchmarkSpec,
    pub system: SystemProperties,
    /// Names of the three performance-sensitive knobs (bytes, count, numeric).
    pub sensitive_names: [String; 3],
}

const PREFIX_FLAVOR_A: [&str; 10] =
    ["shared", "wal", "work", "maintenance", "effective", "checkpoint", "autovacuum", "temp", "commit", "seq"];
const PREFIX_FLAVOR_B: [&str; 10] =
    ["innodb", "myisam", "thread", "binlog", "query", "table", "sort", "read", "bulk", "net"];
const MIDDLES: [&str; 8] = ["buffer", "cache", "pool", "log", "io", "page", "heap", "scan"];
const BYTES_SUFFIX: [&str; 3] = ["size", "bytes", "mem"];
const COUNT_SUFFIX: [&str; 3] = ["count", "workers", "slots"];
const PLAIN_SUFFIX: [&str; 3] = ["cost", "factor", "target"];

fn raw_int(name: &str, default: i64, min: i64, max: i64, unit: Unit) -> RawParameter {
    RawParameter {
        name: name.into(),
        kind: ParamKind::Integer,
        default: default.into(),
        min: Some(min.into()),
        max: Some(max.into()),
        granularity: None,
        unit,
    }
}

fn raw_numeric(name: &str, default: f64, min: f64, max: f64) -> RawParameter {
    RawParameter {
        name: name.into(),
        kind: ParamKind::Numeric,
        default: default.into(),
        min: Some(min.into()),
        max: Some(max.into()),
        granularity: None,
        unit: Unit::Dimensionless,
    }
}

fn unique_name(rng: &mut ChaCha20Rng, prefixes: &[&str], suffixes: &[&str], taken: &mut Vec<String>) -> String {
    loop {
        let name = format!(
            "{}_{}_{}",
            prefixes.choose(rng).unwrap(),
            MIDDLES.choose(rng).unwrap(),
            suffixes.choose(rng).unwrap()
        );
        if !taken.contains(&name) {
            taken.push(name.clone());
            return name;
        }
    }
}

/// Build a tuning scenario with `n_params` knobs of which three are
/// performance sensitive, plus an `n_docs`-document corpus whose hints
/// include the sensitive optima (one of them RAM-relative) and one erroneous
/// recommendation. `flavor` switches the identifier vocabulary so transfer
/// setups can use disjoint parameter names.
pub fn tuning_bundle(seed: u64, n_params: usize, n_docs: usize, flavor: usize) -> Result<SynthBundle> {
    assert!(n_params >= 6, "need room for the sensitive knobs and fillers");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let prefixes: &[&str] = if flavor.is_multiple_of(2) { &PREFIX_FLAVOR_A } else { &PREFIX_FLAVOR_B };
    let mut taken = Vec::new();

    let system = SystemProperties::new(8 * GIB as u64, 4, 1024 * GIB as u64)?;

    // sensitive knobs: their optima are reachable straight from the corpus
    let bytes_knob = unique_name(&mut rng, prefixes, &BYTES_SUFFIX, &mut taken);
    let count_knob = unique_name(&mut rng, prefixes, &COUNT_SUFFIX, &mut taken);
    let plain_knob = unique_name(&mut rng, prefixes, &PLAIN_SUFFIX, &mut taken);
    let bytes_opt = 2 * GIB; // 25% of the 8 GiB system
    let count_opt = 8i64;
    let plain_opt = 2.0f64;

    // defaults sit a factor ~4 off the optima, and the curve steepness keeps
    // the worst admissible configuration within a few multiples of the
    // baseline, so performance rewards stay comparable to the +-1 terms
    let curve_k = 0.12;
    let mut raw = vec![
        raw_int(&bytes_knob, 512 * MIB, 128 * MIB, 16 * GIB, Unit::Bytes),
        raw_int(&count_knob, 2, 1, 64, Unit::Count),
        raw_numeric(&plain_knob, 8.0, 0.5, 32.0),
    ];
    while raw.len() < n_params {
        let pick = rng.gen_range(0..3u8);
        let p = match pick {
            0 => {
                let name = unique_name(&mut rng, prefixes, &BYTES_SUFFIX, &mut taken);
                let mut p = raw_int(&name, 64 * MIB, 8 * MIB, 16 * GIB, Unit::Bytes);
                // occasionally add a chunk-size constraint
                if rng.gen_bool(0.2) {
                    p.granularity = Some((8 * MIB) as f64);
                }
                p
            }
            1 => {
                let name = unique_name(&mut rng, prefixes, &COUNT_SUFFIX, &mut taken);
                raw_int(&name, 10, 2, 1000, Unit::Count)
            }
            _ => {
                let name = unique_name(&mut rng, prefixes, &PLAIN_SUFFIX, &mut taken);
                raw_numeric(&name, 4.0, 0.5, 1000.0)
            }
        };
        raw.push(p);
    }

    let params = raw.iter().map(parameter_from_raw).collect::<Result<Vec<_>>>()?;
    let catalog = ParameterCatalog::new(params)?;

    let sensitive = vec![
        SensitiveSpec::Numeric { name: bytes_knob.clone(), opt: bytes_opt as f64, k: curve_k },
        SensitiveSpec::Numeric { name: count_knob.clone(), opt: count_opt as f64, k: curve_k },
        SensitiveSpec::Numeric { name: plain_knob.clone(), opt: plain_opt, k: curve_k },
    ];
    let benchmark = BenchmarkSpec { kind: MetricKind::RunTime, ..Default::default() };
    let scenario = ScenarioFile {
        catalog: CatalogSource::Inline(raw.clone()),
        sensitive: sensitive.clone(),
        base: 10.0,
        noise_sigma: 0.0,
        seed,
        benchmark: Some(benchmark.clone()),
    };
    let dbms = SimulatedDbms::new(catalog.clone(), sensitive, 10.0, 0.0, seed)?;

    let bytes_templates = [
        format!("Set {bytes_knob} to 25% of RAM on a dedicated server."),
        format!("We recommend {bytes_knob} at 2GB for analytical workloads."),
        format!("Raising {bytes_knob} to 25% of system memory cut our latencies."),
        format!("{bytes_knob} = 2GB was the sweet spot in our benchmarks."),
    ];
    let count_templates = [
        format!("Increase {count_knob} to 8 for parallel scans."),
        format!("We set {count_knob} to 8 and saw solid gains."),
        format!("A {count_knob} of 8 keeps every core busy."),
    ];
    let plain_templates = [
        format!("Lower {plain_knob} to 2 when the data fits in memory."),
        format!("Setting {plain_knob} to 2 sped up our scans."),
        format!("Try {plain_knob} = 2 on SSD storage."),
    ];
    let erroneous = format!("Setting {bytes_knob} to 1 ruined our throughput.");

    let mut texts: Vec<String> = Vec::new();
    texts.extend(bytes_templates.iter().cloned());
    texts.extend(count_templates.iter().cloned());
    texts.extend(plain_templates.iter().cloned());
    texts.push(erroneous);
    let filler_names: Vec<String> = taken
        .iter()
        .skip(3)
        .take(n_docs.saturating_sub(texts.len()))
        .cloned()
        .collect();
    for name in filler_names {
        let v = rng.gen_range(20..200);
        let t = match rng.gen_range(0..3u8) {
            0 => format!("Consider {name} = {v} for busy servers."),
            1 => format!("Set {name} to {v} if you see contention."),
            _ => format!("The default {name} is conservative; {v} worked for us."),
        };
        texts.push(t);
    }
    while texts.len() < n_docs {
        texts.push("General advice: measure before and after every change.".to_string());
    }
    let corpus = texts
        .into_iter()
        .take(n_docs)
        .enumerate()
        .map(|(i, text)| Document::new(format!("doc{i:02}"), text))
        .collect::<Result<Vec<_>>>()?;

    Ok(SynthBundle {
        catalog_raw: raw,
        catalog,
        scenario,
        dbms,
        corpus,
        benchmark,
        system,
        sensitive_names: [bytes_knob, count_knob, plain_knob],
    })
}
