//! Candidate-hint extraction and stride prioritization.

use crate::catalog::{Parameter, ParameterCatalog};
use crate::corpus::{extract_values, Snippet, ValueMention};
use crate::encoder::{cosine_distance, Encoder};
use std::collections::BTreeMap;
use std::sync::Arc;

/// A possible tuning hint: this snippet may recommend this value for this
/// parameter. Produced as a Cartesian product, so many candidates are
/// erroneous; the agent sorts that out later.
#[derive(Clone, Debug)]
pub struct CandidateHint {
    pub snippet: Arc<Snippet>,
    pub param: Arc<Parameter>,
    pub value: ValueMention,
    /// True iff the parameter name occurs verbatim in the snippet.
    pub explicit: bool,
}

/// The parameter whose name (underscores spelled out) is closest to the
/// snippet text under the encoder's cosine distance. Ties keep catalog order.
pub fn implicit_reference<'a>(
    snippet: &Snippet,
    catalog: &'a ParameterCatalog,
    encoder: &dyn Encoder,
) -> &'a Arc<Parameter> {
    assert!(!catalog.is_empty(), "catalog must be non-empty");
    let snippet_vec = encoder.encode(&snippet.text);
    let mut best: Option<(&Arc<Parameter>, f64)> = None;
    for param in catalog.iter() {
        let d = cosine_distance(&encoder.encode(&param.display_name()), &snippet_vec);
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((param, d)),
        }
    }
    best.unwrap().0
}

/// Explicit references (verbatim, case-insensitive name occurrences) plus the
/// one implicit reference, crossed with every value mention in the snippet.
pub fn extract_hints(
    catalog: &ParameterCatalog,
    snippet: &Arc<Snippet>,
    encoder: &dyn Encoder,
) -> Vec<CandidateHint> {
    assert!(!catalog.is_empty(), "catalog must be non-empty");
    let lower = snippet.text.to_lowercase();
    let mut refs: Vec<(&Arc<Parameter>, bool)> = Vec::new();
    for param in catalog.iter() {
        if lower.contains(&param.name.to_lowercase()) {
            refs.push((param, true));
        }
    }
    let implicit = implicit_reference(snippet, catalog, encoder);
    if !refs.iter().any(|(p, _)| p.name == implicit.name) {
        refs.push((implicit, false));
    }

    let mut values: Vec<ValueMention> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for v in extract_values(snippet) {
        if seen.insert(v.canonical.canonical_key()) {
            values.push(v);
        }
    }

    let mut hints = Vec::with_capacity(refs.len() * values.len());
    for (param, explicit) in &refs {
        for value in &values {
            hints.push(CandidateHint {
                snippet: Arc::clone(snippet),
                param: Arc::clone(param),
                value: value.clone(),
                explicit: *explicit,
            });
        }
    }
    hints
}

/// Hints reordered by the stride heuristic.
#[derive(Clone, Debug, Default)]
pub struct OrderedHintList {
    pub hints: Vec<CandidateHint>,
}

/// Group hints by parameter, visit parameters in decreasing group size
/// (ties by name), and emit at most `l` hints per parameter per round until
/// every group is exhausted.
pub fn order_hints(hints: Vec<CandidateHint>, l: usize) -> OrderedHintList {
    assert!(l >= 1, "stride length must be at least 1");
    let mut groups: BTreeMap<String, Vec<CandidateHint>> = BTreeMap::new();
    for h in hints {
        groups.entry(h.param.name.clone()).or_default().push(h);
    }
    let mut groups: Vec<(String, Vec<CandidateHint>)> = groups.into_iter().collect();
    groups.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));

    let mut out = Vec::new();
    let mut round = 0usize;
    loop {
        let mut emitted = false;
        for (_, g) in &groups {
            let start = round * l;
            if start >= g.len() {
                continue;
            }
            let end = ((round + 1) * l).min(g.len());
            out.extend(g[start..end].iter().cloned());
            emitted = true;
        }
        if !emitted {
            break;
        }
        round += 1;
    }
    OrderedHintList { hints: out }
}

/// Consecutive chunks of at most `e` hints, preserving order.
pub fn batches(ordered: &OrderedHintList, e: usize) -> Vec<&[CandidateHint]> {
    assert!(e >= 1, "batch size must be at least 1");
    ordered.hints.chunks(e).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{ParamKind, ParameterCatalog};
    use crate::encoder::LexicalEncoder;
    use crate::value::{ConcreteValue, Unit};
    use proptest::prelude::*;

    fn param(name: &str) -> Parameter {
        Parameter {
            name: name.into(),
            kind: ParamKind::Numeric,
            default: ConcreteValue::int(1, Unit::Dimensionless),
            min: None,
            max: None,
            granularity: None,
            unit: Unit::Dimensionless,
        }
    }

    fn catalog(names: &[&str]) -> ParameterCatalog {
        ParameterCatalog::new(names.iter().map(|n| param(n)).collect()).unwrap()
    }

    fn snippet(text: &str) -> Arc<Snippet> {
        Arc::new(Snippet {
            doc_id: "d".into(),
            index: 0,
            text: text.into(),
            token_count: 0,
        })
    }

    fn hint(param_name: &str, tag: usize) -> CandidateHint {
        CandidateHint {
            snippet: snippet("text"),
            param: Arc::new(param(param_name)),
            value: ValueMention {
                raw_text: tag.to_string(),
                canonical: ConcreteValue::int(tag as i64, Unit::Dimensionless),
                unit: Unit::Dimensionless,
                span: (0, 0),
            },
            explicit: true,
        }
    }

    #[test]
    fn explicit_reference_pairs_with_values() {
        let cat = catalog(&["random_page_cost", "max_connections"]);
        let enc = LexicalEncoder::default();
        let s = snippet("I changed 'random_page_cost' to 1 and retried the query.");
        let hints = extract_hints(&cat, &s, &enc);
        assert!(hints.iter().any(|h| {
            h.param.name == "random_page_cost" && h.value.canonical.magnitude() == 1.0 && h.explicit
        }));
    }

    #[test]
    fn implicit_reference_matches_similar_name() {
        let cat = catalog(&["innodb_buffer_pool_size", "max_connections"]);
        let enc = LexicalEncoder::default();
        let s = snippet("set the buffer pool size to 80%");
        let best = implicit_reference(&s, &cat, &enc);
        assert_eq!(best.name, "innodb_buffer_pool_size");
        let hints = extract_hints(&cat, &s, &enc);
        assert!(hints.iter().any(|h| {
            h.param.name == "innodb_buffer_pool_size"
                && h.value.canonical.magnitude() == 0.8
                && !h.explicit
        }));
    }

    #[test]
    fn exact_name_text_matches_itself() {
        let cat = catalog(&["work_mem", "wal_buffers"]);
        let enc = LexicalEncoder::default();
        let s = snippet("wal buffers");
        assert_eq!(implicit_reference(&s, &cat, &enc).name, "wal_buffers");
    }

    #[test]
    fn tie_breaks_by_catalog_order() {
        struct ConstantEncoder;
        impl Encoder for ConstantEncoder {
            fn encode(&self, _: &str) -> Vec<f32> {
                vec![1.0, 0.0]
            }
        }
        let cat = catalog(&["zeta", "alpha"]);
        let s = snippet("anything");
        assert_eq!(implicit_reference(&s, &cat, &ConstantEncoder).name, "zeta");
    }

    #[test]
    fn product_size_is_refs_times_values() {
        let cat = catalog(&["work_mem", "wal_buffers"]);
        let enc = LexicalEncoder::default();
        // one explicit reference, no numbers -> values are just {0, 1}
        let s = snippet("work_mem should be raised on busy machines");
        let hints = extract_hints(&cat, &s, &enc);
        let explicit: Vec<_> = hints.iter().filter(|h| h.param.name == "work_mem").collect();
        assert_eq!(explicit.len(), 2);
        // |refs| = explicit + implicit (or just explicit if they coincide)
        let refs: std::collections::HashSet<_> = hints.iter().map(|h| h.param.name.clone()).collect();
        assert_eq!(hints.len(), refs.len() * 2);
    }

    #[test]
    fn stride_round_trace() {
        let hints = vec![
            hint("a", 1),
            hint("a", 2),
            hint("a", 3),
            hint("b", 1),
            hint("b", 2),
            hint("c", 1),
        ];
        let ordered = order_hints(hints, 2);
        let trace: Vec<_> = ordered
            .hints
            .iter()
            .map(|h| format!("{}{}", h.param.name, h.value.raw_text))
            .collect();
        assert_eq!(trace, vec!["a1", "a2", "b1", "b2", "c1", "a3"]);
    }

    #[test]
    fn single_group_preserves_input_order() {
        let hints: Vec<_> = (0..5).map(|i| hint("only", i)).collect();
        let ordered = order_hints(hints, 2);
        let tags: Vec<_> = ordered.hints.iter().map(|h| h.value.raw_text.clone()).collect();
        assert_eq!(tags, vec!["0", "1", "2", "3", "4"]);
    }

    #[test]
    fn first_round_covers_every_parameter() {
        let mut hints = Vec::new();
        for i in 0..8 {
            hints.push(hint("p1", i));
        }
        for i in 0..6 {
            hints.push(hint("p2", i));
        }
        for i in 0..3 {
            hints.push(hint("p3", i));
        }
        let ordered = order_hints(hints, 4);
        let first_second_slice = ordered
            .hints
            .iter()
            .position(|h| h.param.name == "p1" && h.value.raw_text == "4")
            .unwrap();
        for p in ["p1", "p2", "p3"] {
            let first = ordered.hints.iter().position(|h| h.param.name == p).unwrap();
            assert!(first < first_second_slice, "{p} must appear before any second slice");
        }
    }

    #[test]
    fn batch_sizes() {
        let hints: Vec<_> = (0..7).map(|i| hint("p", i)).collect();
        let ordered = OrderedHintList { hints };
        let sizes: Vec<_> = batches(&ordered, 3).iter().map(|b| b.len()).collect();
        assert_eq!(sizes, vec![3, 3, 1]);

        let hints: Vec<_> = (0..50).map(|i| hint("p", i)).collect();
        assert_eq!(batches(&OrderedHintList { hints }, 50).len(), 1);

        assert!(batches(&OrderedHintList::default(), 5).is_empty());
    }

    fn multiset(hints: &[CandidateHint]) -> BTreeMap<(String, String), usize> {
        let mut m = BTreeMap::new();
        for h in hints {
            *m.entry((h.param.name.clone(), h.value.raw_text.clone())).or_insert(0) += 1;
        }
        m
    }

    proptest! {
        #[test]
        fn ordering_is_a_permutation(
            sizes in proptest::collection::vec(1usize..12, 1..6),
            l in 1usize..5,
        ) {
            let mut hints = Vec::new();
            for (p, n) in sizes.iter().enumerate() {
                for i in 0..*n {
                    hints.push(hint(&format!("p{p}"), i));
                }
            }
            let before = multiset(&hints);
            let ordered = order_hints(hints, l);
            prop_assert_eq!(before, multiset(&ordered.hints));
        }

        #[test]
        fn first_hint_belongs_to_a_maximal_group(
            sizes in proptest::collection::vec(1usize..12, 1..6),
            l in 1usize..5,
        ) {
            let mut hints = Vec::new();
            for (p, n) in sizes.iter().enumerate() {
                for i in 0..*n {
                    hints.push(hint(&format!("p{p}"), i));
                }
            }
            let max = *sizes.iter().max().unwrap();
            let ordered = order_hints(hints, l);
            let first = &ordered.hints[0].param.name;
            let idx: usize = first[1..].parse().unwrap();
            prop_assert_eq!(sizes[idx], max);
        }

        // Between a parameter's consecutive round slices, every other group
        // that still holds unemitted hints appears at least once.
        #[test]
        fn stride_property(
            sizes in proptest::collection::vec(1usize..12, 2..6),
            l in 1usize..5,
        ) {
            let mut hints = Vec::new();
            for (p, n) in sizes.iter().enumerate() {
                for i in 0..*n {
                    hints.push(hint(&format!("p{p}"), i));
                }
            }
            let ordered = order_hints(hints, l);
            let seq: Vec<String> = ordered.hints.iter().map(|h| h.param.name.clone()).collect();
            let mut remaining: BTreeMap<String, usize> =
                sizes.iter().enumerate().map(|(p, n)| (format!("p{p}"), *n)).collect();
            // positions where each param's emission count crosses a multiple of l
            let mut count: BTreeMap<String, usize> = BTreeMap::new();
            let mut slice_end: BTreeMap<String, usize> = BTreeMap::new();
            for (pos, p) in seq.iter().enumerate() {
                *remaining.get_mut(p).unwrap() -= 1;
                let c = count.entry(p.clone()).or_insert(0);
                *c += 1;
                if (*c).is_multiple_of(l) || remaining[p] == 0 {
                    // slice boundary for p: all q != p with remaining hints must
                    // appear before p's next hint
                    if remaining[p] > 0 {
                        slice_end.insert(p.clone(), pos);
                        let pending: Vec<String> = remaining
                            .iter()
                            .filter(|(q, n)| *q != p && **n > 0)
                            .map(|(q, _)| q.clone())
                            .collect();
                        let next_p = seq[pos + 1..].iter().position(|q| q == p).map(|o| pos + 1 + o);
                        if let Some(np) = next_p {
                            for q in pending {
                                let between = seq[pos + 1..np].contains(&q);
                                prop_assert!(between, "group {q} missing between slices of {p}");
                            }
                        }
                    }
                }
            }
        }
    }
}
