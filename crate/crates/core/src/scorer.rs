//! Scorers estimate how well a choice label matches a hint text. The default
//! implementations are linear models over fixed lexical features; the remote
//! scorer delegates to an external model service.

use crate::encoder::fnv1a;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};

/// Value estimator over (hint text, label text) pairs.
///
/// Scoring must be deterministic for fixed weights; `train` moves the score
/// for one pair toward a regression target and returns the squared error
/// before the step.
pub trait Scorer: Send {
    fn score(&self, text: &str, label: &str) -> f64;

    fn score_batch(&self, text: &str, labels: &[String]) -> Vec<f64> {
        labels.iter().map(|l| self.score(text, l)).collect()
    }

    fn train(&mut self, text: &str, label: &str, target: f64) -> f64;

    fn clone_box(&self) -> Box<dyn Scorer>;

    /// Serializable weight snapshot for checkpoints.
    fn state(&self) -> ScorerState;
}

impl Clone for Box<dyn Scorer> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Checkpointable scorer weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerState {
    Lexical,
    Linear {
        shared: Vec<f64>,
        blocks: Vec<(u64, Vec<f64>)>,
        learning_rate: f64,
    },
    Tabular { entries: Vec<(String, String, f64)>, learning_rate: f64 },
    Remote { url: String },
}

pub fn scorer_from_state(state: &ScorerState) -> Result<Box<dyn Scorer>> {
    Ok(match state {
        ScorerState::Lexical => Box::new(LexicalScorer),
        ScorerState::Linear { shared, blocks, learning_rate } => {
            if shared.len() != FEATURES || blocks.iter().any(|(_, b)| b.len() != FEATURES) {
                return Err(Error::Checkpoint(format!(
                    "linear scorer weights must have {FEATURES} entries"
                )));
            }
            Box::new(LinearScorer {
                shared: shared.clone(),
                blocks: blocks
                    .iter()
                    .map(|(k, b)| (*k, b.clone().try_into().expect("length checked")))
                    .collect(),
                learning_rate: *learning_rate,
            })
        }
        ScorerState::Tabular { entries, learning_rate } => {
            let table = entries
                .iter()
                .map(|(a, b, q)| ((a.clone(), b.clone()), *q))
                .collect();
            Box::new(TabularScorer { table, learning_rate: *learning_rate })
        }
        ScorerState::Remote { url } => Box::new(RemoteScorer::new(
            url.clone(),
            std::time::Duration::from_secs(5),
            Box::new(LexicalScorer),
        )?),
    })
}

pub const FEATURES: usize = 8;

pub const FEATURE_NAMES: [&str; FEATURES] = [
    "token_overlap",
    "trigram_cosine",
    "memory_keywords",
    "disk_keywords",
    "core_keywords",
    "value_magnitude",
    "identifier_match",
    "bias",
];

const MEMORY_WORDS: [&str; 3] = ["ram", "memory", "mem"];
const DISK_WORDS: [&str; 4] = ["disk", "disks", "storage", "hard"];
const CORE_WORDS: [&str; 6] = ["core", "cores", "cpu", "cpus", "processor", "processors"];

fn token_set(text: &str) -> HashSet<String> {
    crate::corpus::tokenize(text).into_iter().collect()
}

// ordered keys: float accumulation must not depend on hash iteration order,
// or scores drift across processes and break bit-level reproducibility
fn trigram_counts(text: &str) -> BTreeMap<u64, f64> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut counts = BTreeMap::new();
    let mut buf = String::with_capacity(12);
    for w in chars.windows(3) {
        buf.clear();
        buf.extend(w);
        *counts.entry(fnv1a(buf.as_bytes())).or_insert(0.0) += 1.0;
    }
    counts
}

fn sparse_cosine(a: &BTreeMap<u64, f64>, b: &BTreeMap<u64, f64>) -> f64 {
    let dot: f64 = a
        .iter()
        .filter_map(|(k, va)| b.get(k).map(|vb| va * vb))
        .sum();
    let na: f64 = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

fn group_hit(a: &HashSet<String>, b: &HashSet<String>, words: &[&str]) -> f64 {
    let hit = |s: &HashSet<String>| words.iter().any(|w| s.contains(*w));
    if hit(a) && hit(b) {
        1.0
    } else {
        0.0
    }
}

fn first_number(tokens: &HashSet<String>, label: &str) -> Option<f64> {
    // scan in label order, not set order
    for tok in crate::corpus::tokenize(label) {
        if tok.starts_with(|c: char| c.is_ascii_digit()) {
            if let Ok(v) = tok.parse::<f64>() {
                if tokens.contains(&tok) {
                    return Some(v);
                }
            }
        }
    }
    None
}

/// Fixed feature vector for a (hint text, label text) pair: token overlap,
/// character-trigram cosine, per-group unit-keyword co-occurrence, the label
/// value's magnitude bucket, an identifier-overlap flag, and a bias term.
pub fn features(text: &str, label: &str) -> [f64; FEATURES] {
    let t_tokens = token_set(text);
    let l_tokens = token_set(label);
    let overlap = if l_tokens.is_empty() {
        0.0
    } else {
        l_tokens.intersection(&t_tokens).count() as f64 / l_tokens.len() as f64
    };
    let trigram = sparse_cosine(&trigram_counts(text), &trigram_counts(label));
    let magnitude = first_number(&l_tokens, label)
        .map(|v| ((v.abs().max(1e-12).log10()).clamp(-3.0, 12.0) + 3.0) / 15.0)
        .unwrap_or(0.0);
    let ident = l_tokens
        .iter()
        .any(|tok| tok.contains('_') && t_tokens.contains(tok)) as u8 as f64;
    [
        overlap,
        trigram,
        group_hit(&t_tokens, &l_tokens, &MEMORY_WORDS),
        group_hit(&t_tokens, &l_tokens, &DISK_WORDS),
        group_hit(&t_tokens, &l_tokens, &CORE_WORDS),
        magnitude,
        ident,
        1.0,
    ]
}

fn initial_weights() -> Vec<f64> {
    // similarity features start at 1, bias at 0
    let mut w = vec![1.0; FEATURES];
    w[FEATURES - 1] = 0.0;
    w
}

fn dot(w: &[f64], f: &[f64]) -> f64 {
    w.iter().zip(f.iter()).map(|(a, b)| a * b).sum()
}

/// Frozen similarity scorer: the linear features with fixed unit weights.
#[derive(Clone, Debug)]
pub struct LexicalScorer;

impl Scorer for LexicalScorer {
    fn score(&self, text: &str, label: &str) -> f64 {
        dot(&initial_weights(), &features(text, label))
    }

    fn train(&mut self, text: &str, label: &str, target: f64) -> f64 {
        let err = self.score(text, label) - target;
        err * err
    }

    fn clone_box(&self) -> Box<dyn Scorer> {
        Box::new(self.clone())
    }

    fn state(&self) -> ScorerState {
        ScorerState::Lexical
    }
}

/// Stable key for a label's template words: alphabetic tokens only, so the
/// key survives placeholder instantiation, identifier masking, and concrete
/// values. Identifier-like tokens (underscores, digits) and the mask token
/// itself never contribute.
pub fn label_pattern_key(label: &str) -> u64 {
    let mut words = String::new();
    for tok in crate::corpus::tokenize(label) {
        if tok == "mask" || !tok.chars().all(|c| c.is_alphabetic()) {
            continue;
        }
        words.push_str(&tok);
        words.push(' ');
    }
    fnv1a(words.as_bytes())
}

/// Trainable linear model over the fixed feature vector, with one extra
/// weight block per label pattern. The shared block carries the similarity
/// prior; the per-label blocks start at zero and give each choice sentence
/// its own feature weighting, the desk-scale analogue of a multiple-choice
/// scoring head.
#[derive(Clone, Debug)]
pub struct LinearScorer {
    shared: Vec<f64>,
    blocks: HashMap<u64, [f64; FEATURES]>,
    learning_rate: f64,
}

impl LinearScorer {
    pub fn new(learning_rate: f64) -> Self {
        LinearScorer { shared: initial_weights(), blocks: HashMap::new(), learning_rate }
    }

    pub fn shared_weights(&self) -> &[f64] {
        &self.shared
    }
}

impl Scorer for LinearScorer {
    fn score(&self, text: &str, label: &str) -> f64 {
        let f = features(text, label);
        let mut score = dot(&self.shared, &f);
        if let Some(block) = self.blocks.get(&label_pattern_key(label)) {
            score += dot(block, &f);
        }
        score
    }

    fn train(&mut self, text: &str, label: &str, target: f64) -> f64 {
        let f = features(text, label);
        let block = self.blocks.entry(label_pattern_key(label)).or_insert([0.0; FEATURES]);
        let err = dot(&self.shared, &f) + dot(block.as_slice(), &f) - target;
        for ((w, b), x) in self.shared.iter_mut().zip(block.iter_mut()).zip(f.iter()) {
            *w -= self.learning_rate * err * x;
            *b -= self.learning_rate * err * x;
        }
        err * err
    }

    fn clone_box(&self) -> Box<dyn Scorer> {
        Box::new(self.clone())
    }

    fn state(&self) -> ScorerState {
        let mut blocks: Vec<(u64, Vec<f64>)> =
            self.blocks.iter().map(|(k, b)| (*k, b.to_vec())).collect();
        blocks.sort_by_key(|(k, _)| *k);
        ScorerState::Linear {
            shared: self.shared.clone(),
            blocks,
            learning_rate: self.learning_rate,
        }
    }
}

/// Exact-memorization scorer for small discrete state spaces. Unseen pairs
/// score 0.
#[derive(Clone, Debug)]
pub struct TabularScorer {
    table: BTreeMap<(String, String), f64>,
    learning_rate: f64,
}

impl TabularScorer {
    pub fn new(learning_rate: f64) -> Self {
        TabularScorer { table: BTreeMap::new(), learning_rate }
    }

    pub fn preset(mut self, text: &str, label: &str, q: f64) -> Self {
        self.table.insert((text.to_string(), label.to_string()), q);
        self
    }
}

impl Scorer for TabularScorer {
    fn score(&self, text: &str, label: &str) -> f64 {
        self.table
            .get(&(text.to_string(), label.to_string()))
            .copied()
            .unwrap_or(0.0)
    }

    fn train(&mut self, text: &str, label: &str, target: f64) -> f64 {
        let q = self
            .table
            .entry((text.to_string(), label.to_string()))
            .or_insert(0.0);
        let err = *q - target;
        *q -= self.learning_rate * err;
        err * err
    }

    fn clone_box(&self) -> Box<dyn Scorer> {
        Box::new(self.clone())
    }

    fn state(&self) -> ScorerState {
        ScorerState::Tabular {
            entries: self
                .table
                .iter()
                .map(|((a, b), q)| (a.clone(), b.clone(), *q))
                .collect(),
            learning_rate: self.learning_rate,
        }
    }
}

/// Client for an external scorer service speaking
/// `POST /score {"pairs":[{"a","b"}]} -> {"scores":[..]}`.
/// Transport failures fall back to the wrapped scorer; training is local-only
/// and therefore a no-op here.
pub struct RemoteScorer {
    url: String,
    client: reqwest::blocking::Client,
    timeout: std::time::Duration,
    fallback: Box<dyn Scorer>,
}

#[derive(Serialize)]
struct ScorePair<'a> {
    a: &'a str,
    b: &'a str,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    pairs: Vec<ScorePair<'a>>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

impl RemoteScorer {
    pub fn new(
        url: impl Into<String>,
        timeout: std::time::Duration,
        fallback: Box<dyn Scorer>,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(RemoteScorer { url: url.into(), client, timeout, fallback })
    }

    fn request(&self, pairs: &[(&str, &str)]) -> std::result::Result<Vec<f64>, String> {
        let endpoint = format!("{}/score", self.url.trim_end_matches('/'));
        let body = ScoreRequest {
            pairs: pairs.iter().map(|(a, b)| ScorePair { a, b }).collect(),
        };
        let resp: ScoreResponse = self
            .client
            .post(endpoint)
            .json(&body)
            .send()
            .map_err(|e| e.to_string())?
            .error_for_status()
            .map_err(|e| e.to_string())?
            .json()
            .map_err(|e| e.to_string())?;
        if resp.scores.len() != pairs.len() {
            return Err(format!("expected {} scores, got {}", pairs.len(), resp.scores.len()));
        }
        Ok(resp.scores)
    }
}

impl Scorer for RemoteScorer {
    fn score(&self, text: &str, label: &str) -> f64 {
        match self.request(&[(text, label)]) {
            Ok(scores) => scores[0],
            Err(e) => {
                log::warn!("scorer service at {} failed ({e}); using fallback", self.url);
                self.fallback.score(text, label)
            }
        }
    }

    fn score_batch(&self, text: &str, labels: &[String]) -> Vec<f64> {
        let pairs: Vec<(&str, &str)> = labels.iter().map(|l| (text, l.as_str())).collect();
        match self.request(&pairs) {
            Ok(scores) => scores,
            Err(e) => {
                log::warn!("scorer service at {} failed ({e}); using fallback", self.url);
                self.fallback.score_batch(text, labels)
            }
        }
    }

    fn train(&mut self, _text: &str, _label: &str, _target: f64) -> f64 {
        0.0
    }

    fn clone_box(&self) -> Box<dyn Scorer> {
        Box::new(RemoteScorer {
            url: self.url.clone(),
            client: self.client.clone(),
            timeout: self.timeout,
            fallback: self.fallback.clone_box(),
        })
    }

    fn state(&self) -> ScorerState {
        ScorerState::Remote { url: self.url.clone() }
    }
}
