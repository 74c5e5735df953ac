//! Text ingestion: documents, bounded-length snippets, and numeric value mentions.

use crate::error::{Error, Result};
use crate::value::{ConcreteValue, Unit};
use serde::{Deserialize, Serialize};
use std::io::BufRead;
use std::path::Path;

/// One input text document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::Corpus(format!("document '{id}' is empty")));
        }
        Ok(Document { id, text })
    }
}

/// A contiguous piece of a document, at most the configured token budget long.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snippet {
    pub doc_id: String,
    pub index: usize,
    pub text: String,
    pub token_count: usize,
}

/// A number found in a snippet, canonicalized to bytes / fraction / dimensionless.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueMention {
    pub raw_text: String,
    pub canonical: ConcreteValue,
    pub unit: Unit,
    /// Byte range within the snippet text; (0, 0) for the synthetic on/off values.
    pub span: (usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpannedToken {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

#[derive(PartialEq)]
enum TokenClass {
    Number,
    Word,
    Punct,
}

fn classify(first: char) -> TokenClass {
    if first.is_ascii_digit() {
        TokenClass::Number
    } else if first.is_alphabetic() || first == '_' {
        TokenClass::Word
    } else {
        TokenClass::Punct
    }
}

/// Lexical tokenizer: lowercased, punctuation split off, underscores kept inside
/// identifiers. A token starting with a digit is a number (`8GB` -> `8`, `gb`);
/// a token starting with a letter may contain digits (`utf8` stays whole).
/// Decimal points between digits stay inside the number token.
pub fn tokenize_spanned(text: &str) -> Vec<SpannedToken> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let total = text.len();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, ch) = chars[i];
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        match classify(ch) {
            TokenClass::Number => {
                while j < chars.len() && chars[j].1.is_ascii_digit() {
                    j += 1;
                }
                // one decimal point, only when followed by a digit
                if j + 1 < chars.len() && chars[j].1 == '.' && chars[j + 1].1.is_ascii_digit() {
                    j += 1;
                    while j < chars.len() && chars[j].1.is_ascii_digit() {
                        j += 1;
                    }
                }
            }
            TokenClass::Word => {
                while j < chars.len() && (chars[j].1.is_alphanumeric() || chars[j].1 == '_') {
                    j += 1;
                }
            }
            TokenClass::Punct => {}
        }
        let end = if j < chars.len() { chars[j].0 } else { total };
        out.push(SpannedToken {
            text: text[start..end].to_lowercase(),
            start,
            end,
        });
        i = j;
    }
    out
}

pub fn tokenize(text: &str) -> Vec<String> {
    tokenize_spanned(text).into_iter().map(|t| t.text).collect()
}

/// Byte ranges of sentences. A sentence ends after a run of `.!?` followed by
/// whitespace (or end of text); a newline always ends the current sentence.
fn sentence_ranges(text: &str) -> Vec<(usize, usize)> {
    let mut ranges = Vec::new();
    let mut start = 0usize;
    let mut iter = text.char_indices().peekable();
    while let Some((idx, ch)) = iter.next() {
        let mut boundary = None;
        if ch == '\n' {
            boundary = Some(idx + ch.len_utf8());
        } else if matches!(ch, '.' | '!' | '?') {
            match iter.peek() {
                None => boundary = Some(text.len()),
                Some(&(_, next)) if next.is_whitespace() => boundary = Some(idx + ch.len_utf8()),
                _ => {}
            }
        }
        if let Some(end) = boundary {
            if text[start..end].trim().is_empty() {
                start = end;
                continue;
            }
            ranges.push((start, end));
            start = end;
        }
    }
    if start < text.len() && !text[start..].trim().is_empty() {
        ranges.push((start, text.len()));
    }
    ranges
}

/// Split a document into snippets of at most `max_tokens` tokens, preferring
/// sentence boundaries. A single sentence longer than the budget is hard-split
/// at token boundaries.
pub fn segment_document(doc: &Document, max_tokens: usize) -> Vec<Snippet> {
    assert!(max_tokens >= 1, "segment limit must be at least 1");
    struct Pending {
        start: usize,
        end: usize,
        tokens: usize,
    }
    let mut snippets: Vec<(usize, usize, usize)> = Vec::new();
    let mut cur: Option<Pending> = None;
    let flush = |cur: &mut Option<Pending>, snippets: &mut Vec<(usize, usize, usize)>| {
        if let Some(p) = cur.take() {
            snippets.push((p.start, p.end, p.tokens));
        }
    };
    for (s_start, s_end) in sentence_ranges(&doc.text) {
        let toks = tokenize_spanned(&doc.text[s_start..s_end]);
        if toks.is_empty() {
            continue;
        }
        let n = toks.len();
        if n > max_tokens {
            flush(&mut cur, &mut snippets);
            for chunk in toks.chunks(max_tokens) {
                let first = chunk.first().unwrap();
                let last = chunk.last().unwrap();
                snippets.push((s_start + first.start, s_start + last.end, chunk.len()));
            }
            continue;
        }
        match cur.as_mut() {
            Some(p) if p.tokens + n <= max_tokens => {
                p.end = s_end;
                p.tokens += n;
            }
            _ => {
                flush(&mut cur, &mut snippets);
                cur = Some(Pending { start: s_start, end: s_end, tokens: n });
            }
        }
    }
    flush(&mut cur, &mut snippets);
    snippets
        .into_iter()
        .enumerate()
        .map(|(index, (start, end, tokens))| Snippet {
            doc_id: doc.id.clone(),
            index,
            text: doc.text[start..end].trim().to_string(),
            token_count: tokens,
        })
        .collect()
}

/// Size-unit suffixes: kb/mb/gb/tb are binary multiples, bare k/m/g/t decimal.
fn byte_multiplier(token: &str) -> Option<f64> {
    match token {
        "kb" => Some(1024.0),
        "mb" => Some(1024.0 * 1024.0),
        "gb" => Some(1024.0 * 1024.0 * 1024.0),
        "tb" => Some(1024.0 * 1024.0 * 1024.0 * 1024.0),
        "k" => Some(1e3),
        "m" => Some(1e6),
        "g" => Some(1e9),
        "t" => Some(1e12),
        _ => None,
    }
}

fn is_number_token(tok: &str) -> bool {
    tok.starts_with(|c: char| c.is_ascii_digit())
}

/// Extract every numeric mention from a snippet; the on/off values 0 and 1 are
/// always appended. Unparsable numerals are skipped and logged.
pub fn extract_values(snippet: &Snippet) -> Vec<ValueMention> {
    let toks = tokenize_spanned(&snippet.text);
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if !is_number_token(&toks[i].text) {
            i += 1;
            continue;
        }
        let num_tok = &toks[i];
        let integral = !num_tok.text.contains('.');
        // integral literals parse exactly; f64 is only used where arithmetic
        // is unavoidable (unit multiples, percentages)
        let exact: Option<i64> = if integral { num_tok.text.parse().ok() } else { None };
        let number: f64 = match num_tok.text.parse() {
            Ok(v) => v,
            Err(e) => {
                log::debug!(
                    "snippet {}#{}: skipping unparsable numeral '{}': {e}",
                    snippet.doc_id,
                    snippet.index,
                    num_tok.text
                );
                i += 1;
                continue;
            }
        };
        if integral && exact.is_none() {
            log::debug!(
                "snippet {}#{}: integer literal '{}' overflows, skipped",
                snippet.doc_id,
                snippet.index,
                num_tok.text
            );
            i += 1;
            continue;
        }
        let mut consumed = 1;
        let mut mention: Option<(ConcreteValue, Unit)> = None;
        if let Some(next) = toks.get(i + 1) {
            if let Some(mult) = byte_multiplier(&next.text) {
                consumed = 2;
                let bytes = (number * mult).round();
                mention = Some((ConcreteValue::int(bytes as i64, Unit::Bytes), Unit::Bytes));
            } else if next.text == "%" || next.text == "percent" {
                consumed = 2;
                if (0.0..=100.0).contains(&number) {
                    mention =
                        Some((ConcreteValue::real(number / 100.0, Unit::Fraction), Unit::Fraction));
                } else {
                    log::debug!(
                        "snippet {}#{}: percentage {number} outside [0,100], skipped",
                        snippet.doc_id,
                        snippet.index
                    );
                }
            }
        }
        if mention.is_none() && consumed == 1 {
            let value = match exact {
                Some(v) => ConcreteValue::int(v, Unit::Dimensionless),
                None => ConcreteValue::real(number, Unit::Dimensionless),
            };
            mention = Some((value, Unit::Dimensionless));
        }
        if let Some((canonical, unit)) = mention {
            let end = toks[i + consumed - 1].end;
            out.push(ValueMention {
                raw_text: snippet.text[num_tok.start..end].to_string(),
                canonical,
                unit,
                span: (num_tok.start, end),
            });
        }
        i += consumed;
    }
    for (raw, v) in [("0", 0i64), ("1", 1i64)] {
        out.push(ValueMention {
            raw_text: raw.to_string(),
            canonical: ConcreteValue::int(v, Unit::Dimensionless),
            unit: Unit::Dimensionless,
            span: (0, 0),
        });
    }
    out
}

#[derive(Deserialize)]
struct JsonlDoc {
    id: String,
    text: String,
}

/// Load a corpus from a directory of `.txt` files (id = file name) or a
/// JSON-lines file of `{"id","text"}` objects.
pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    if path.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| Error::Corpus(format!("cannot read {}: {e}", path.display())))?
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| Error::Corpus(format!("cannot read {}: {e}", path.display())))?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let p = entry.path();
            if p.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let id = entry.file_name().to_string_lossy().into_owned();
            let text = std::fs::read_to_string(&p)
                .map_err(|e| Error::Corpus(format!("cannot read {}: {e}", p.display())))?;
            docs.push(Document::new(id, text)?);
        }
    } else {
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Corpus(format!("cannot open {}: {e}", path.display())))?;
        for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::Corpus(format!("read error: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: JsonlDoc = serde_json::from_str(&line).map_err(|e| {
                Error::Corpus(format!("{}:{}: invalid record: {e}", path.display(), lineno + 1))
            })?;
            docs.push(Document::new(doc.id, doc.text)?);
        }
    }
    let mut seen = std::collections::HashSet::new();
    for d in &docs {
        if !seen.insert(d.id.clone()) {
            return Err(Error::Corpus(format!("duplicate document id '{}'", d.id)));
        }
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::Scalar;
    use proptest::prelude::*;

    fn doc(text: &str) -> Document {
        Document::new("d", text).unwrap()
    }

    fn snippet(text: &str) -> Snippet {
        Snippet { doc_id: "d".into(), index: 0, text: text.into(), token_count: 0 }
    }

    #[test]
    fn tokenize_splits_punctuation_and_units() {
        assert_eq!(
            tokenize("Set shared_buffers to 25%."),
            vec!["set", "shared_buffers", "to", "25", "%", "."]
        );
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("8GB"), vec!["8", "gb"]);
    }

    #[test]
    fn tokenize_keeps_identifiers_and_decimals_whole() {
        assert_eq!(tokenize("utf8"), vec!["utf8"]);
        assert_eq!(tokenize("0.9"), vec!["0.9"]);
        assert_eq!(tokenize("1."), vec!["1", "."]);
    }

    #[test]
    fn under_limit_document_is_one_snippet() {
        let s = segment_document(&doc("tune the small database well"), 128);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].token_count, 5);
    }

    #[test]
    fn split_prefers_sentence_boundary() {
        let sentence = |w: &str| {
            let mut words = vec![w.to_string(); 99];
            words.push(format!("{w}."));
            words.join(" ")
        };
        let text = format!("{} {}", sentence("alpha"), sentence("beta"));
        let s = segment_document(&doc(&text), 128);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].token_count, 101); // 99 words + final word + '.'
        assert!(s[0].text.contains("alpha") && !s[0].text.contains("beta"));
    }

    #[test]
    fn overlong_sentence_is_hard_split() {
        let text = vec!["tok"; 300].join(" ");
        let s = segment_document(&doc(&text), 128);
        let sizes: Vec<_> = s.iter().map(|x| x.token_count).collect();
        assert_eq!(sizes, vec![128, 128, 44]);
    }

    #[test]
    fn empty_document_segments_to_nothing() {
        let d = Document { id: "d".into(), text: "   ".into() };
        assert!(segment_document(&d, 128).is_empty());
    }

    #[test]
    fn percentage_mention_is_canonicalized() {
        let s = snippet("The recommended value is 25% of your total machine RAM.");
        let vals = extract_values(&s);
        let mags: Vec<_> = vals.iter().map(|v| v.canonical.magnitude()).collect();
        assert_eq!(mags, vec![0.25, 0.0, 1.0]);
        assert_eq!(vals[0].unit, Unit::Fraction);
        assert_eq!(vals[0].raw_text, "25%");
    }

    #[test]
    fn no_numbers_yields_exactly_on_off() {
        let vals = extract_values(&snippet("no numbers here"));
        let mags: Vec<_> = vals.iter().map(|v| v.canonical.magnitude()).collect();
        assert_eq!(mags, vec![0.0, 1.0]);
    }

    #[test]
    fn buffer_pool_example() {
        let vals = extract_values(&snippet("set the buffer pool size to 80%"));
        assert_eq!(vals[0].canonical.magnitude(), 0.8);
        assert_eq!(vals.len(), 3);
    }

    #[test]
    fn size_units_canonicalize_to_bytes() {
        let vals = extract_values(&snippet("use 2GB or 2048MB"));
        assert_eq!(vals[0].canonical, ConcreteValue::int(2147483648, Unit::Bytes));
        assert_eq!(vals[0].canonical, vals[1].canonical);
        assert_eq!(vals[0].raw_text, "2GB");
    }

    #[test]
    fn decimal_single_letter_units() {
        let vals = extract_values(&snippet("roughly 8g of memory"));
        assert_eq!(vals[0].canonical, ConcreteValue::int(8_000_000_000, Unit::Bytes));
    }

    #[test]
    fn digits_inside_identifiers_are_not_mentions() {
        let vals = extract_values(&snippet("use utf8 encoding"));
        assert_eq!(vals.len(), 2); // just the appended 0 and 1
    }

    #[test]
    fn out_of_range_percentage_is_skipped() {
        let vals = extract_values(&snippet("a 150% spike"));
        // the bare number is consumed together with '%', so only 0/1 remain
        assert_eq!(vals.len(), 2);
    }

    #[test]
    fn mention_span_points_into_snippet() {
        let s = snippet("set it to 4GB now");
        let vals = extract_values(&s);
        let (a, b) = vals[0].span;
        assert_eq!(&s.text[a..b], "4GB");
    }

    #[test]
    fn integer_mentions_stay_exact() {
        let vals = extract_values(&snippet("limit 9007199254740995 rows"));
        match vals[0].canonical.scalar {
            Scalar::Int(v) => assert_eq!(v, 9007199254740995),
            other => panic!("expected exact integer, got {other:?}"),
        }
    }

    proptest! {
        // Joining the per-snippet token streams reproduces the document's tokens.
        #[test]
        fn segmentation_round_trips_tokens(words in proptest::collection::vec("[a-z]{1,8}(\\.)?", 1..120), limit in 1usize..40) {
            let text = words.join(" ");
            prop_assume!(!text.trim().is_empty());
            let d = Document { id: "d".into(), text: text.clone() };
            let mut joined = Vec::new();
            for s in segment_document(&d, limit) {
                prop_assert!(s.token_count <= limit);
                let toks = tokenize(&s.text);
                prop_assert_eq!(toks.len(), s.token_count);
                joined.extend(toks);
            }
            prop_assert_eq!(joined, tokenize(&text));
        }

        #[test]
        fn extract_values_always_contains_on_off(text in ".{0,80}") {
            let vals = extract_values(&snippet(&text));
            let mags: Vec<_> = vals.iter().map(|v| v.canonical.magnitude()).collect();
            prop_assert!(mags.contains(&0.0));
            prop_assert!(mags.contains(&1.0));
        }

        // arbitrary text, including multi-byte characters, segments without
        // panicking and preserves the token stream
        #[test]
        fn segmentation_is_robust_on_arbitrary_text(text in "\\PC{0,200}", limit in 1usize..20) {
            let d = Document { id: "d".into(), text: text.clone() };
            let mut joined = Vec::new();
            for s in segment_document(&d, limit) {
                prop_assert!(s.token_count <= limit);
                joined.extend(tokenize(&s.text));
            }
            prop_assert_eq!(joined, tokenize(&text));
        }
    }
}
