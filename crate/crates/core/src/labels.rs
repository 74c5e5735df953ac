//! Choice labels: natural-language sentences representing action semantics.

use crate::catalog::Parameter;
use crate::corpus::ValueMention;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

pub const DECISIONS: usize = 3;
pub const ACTIONS: usize = 5;

/// Sentence template with `[p]` / `[v]` placeholders for one (decision, action).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabelTemplate {
    #[serde(rename = "d")]
    pub decision: usize,
    #[serde(rename = "a")]
    pub action: usize,
    pub text: String,
}

#[derive(Deserialize)]
struct LabelFile {
    version: u32,
    labels: Vec<LabelTemplate>,
}

/// The full 3x5 label table.
#[derive(Clone, Debug)]
pub struct LabelSet {
    templates: Vec<LabelTemplate>, // indexed decision * ACTIONS + action
    pub version: u32,
}

impl LabelSet {
    pub fn from_templates(version: u32, labels: Vec<LabelTemplate>) -> Result<Self> {
        let mut slots: Vec<Option<LabelTemplate>> = vec![None; DECISIONS * ACTIONS];
        for t in labels {
            if t.decision >= DECISIONS || t.action >= ACTIONS {
                return Err(Error::Labels(format!(
                    "label ({}, {}) out of range",
                    t.decision, t.action
                )));
            }
            let slot = &mut slots[t.decision * ACTIONS + t.action];
            if slot.is_some() {
                return Err(Error::Labels(format!(
                    "duplicate label for ({}, {})",
                    t.decision, t.action
                )));
            }
            *slot = Some(t);
        }
        let templates = slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                s.ok_or_else(|| {
                    Error::Labels(format!("missing label for ({}, {})", i / ACTIONS, i % ACTIONS))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LabelSet { templates, version })
    }

    /// Accepts both the wrapped `{"version", "labels"}` resource and a bare
    /// template array.
    fn from_json(json: &str) -> Result<Self> {
        if let Ok(file) = serde_json::from_str::<LabelFile>(json) {
            return LabelSet::from_templates(file.version, file.labels);
        }
        let labels: Vec<LabelTemplate> =
            serde_json::from_str(json).map_err(|e| Error::Labels(format!("invalid JSON: {e}")))?;
        LabelSet::from_templates(1, labels)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| Error::Labels(format!("cannot read {}: {e}", path.display())))?;
        LabelSet::from_json(&json)
    }

    /// The versioned built-in label table.
    pub fn builtin() -> &'static LabelSet {
        static BUILTIN: OnceLock<LabelSet> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            LabelSet::from_json(include_str!("../resources/labels.json"))
                .expect("built-in label resource is valid")
        })
    }

    /// The fixed template for a (decision, action) pair.
    pub fn choice_label(&self, decision: usize, action: usize) -> &LabelTemplate {
        assert!(decision < DECISIONS && action < ACTIONS, "label index out of range");
        &self.templates[decision * ACTIONS + action]
    }
}

/// Replace `[p]` with the parameter name and `[v]` with the value's raw text.
pub fn instantiate(template: &LabelTemplate, param: &Parameter, value: &ValueMention) -> String {
    template
        .text
        .replace("[p]", &param.name)
        .replace("[v]", &value.raw_text)
}

const MASK_TOKEN: &str = "[MASK]";

fn is_ident_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Replace whole-token, case-insensitive occurrences of the parameter name
/// with `[MASK]`. Occurrences inside longer identifiers are left intact.
pub fn mask(text: &str, param_name: &str) -> String {
    if param_name.is_empty() {
        return text.to_string();
    }
    let hay = text.as_bytes().to_ascii_lowercase();
    let needle = param_name.as_bytes().to_ascii_lowercase();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < hay.len() {
        let matches = i + needle.len() <= hay.len()
            && hay[i..i + needle.len()] == needle[..]
            && (i == 0 || !is_ident_byte(hay[i - 1]))
            && (i + needle.len() == hay.len() || !is_ident_byte(hay[i + needle.len()]));
        if matches {
            out.push_str(MASK_TOKEN);
            i += needle.len();
        } else {
            // advance one full character to keep UTF-8 intact
            let ch_len = {
                let mut l = 1;
                while i + l < hay.len() && (hay[i + l] & 0xC0) == 0x80 {
                    l += 1;
                }
                l
            };
            out.push_str(&text[i..i + ch_len]);
            i += ch_len;
        }
    }
    out
}
