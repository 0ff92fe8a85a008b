//! Canonicalization of machine-produced logical forms and assembly of
//! synthetic training corpora.
//!
//! A filler model receives a translated utterance plus the slot signature of
//! the source logical form and writes slot values back in. Its raw output is
//! noisy in two specific ways: slots keep source-language order rather than
//! target-utterance order, and slot boundaries can land mid-word. The
//! [`canonicalize`] pass repairs both, deterministically, and
//! [`project_corpus`] applies it across whole translation files to produce
//! loadable synthetic examples plus an explicit rejection report for
//! everything that could not be repaired.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{
    DatasetExample, FillerOutput, Partition, Rejection, SlotMethod, SlotMethodEntry,
    TranslationRecord,
};
use crate::lf::{
    parse_compact, parse_compact_lenient, serialize_annot, serialize_compact, LfParseError,
    LogicalForm, SlotSpan, Span,
};

/// A compact logical form with every slot value removed, e.g.
/// `[IN:ALARM_SET [SL:TIME ] [SL:DATE ] ]`. This is the prompt half handed
/// to the external filler model.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    text: String,
}

impl Signature {
    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }

    /// Reads a signature back from text, accepting the empty slot values
    /// that [`make_signature`] writes. The result is re-rendered, so parsing
    /// a signature's own text reproduces it exactly.
    pub fn parse(text: &str) -> Result<Signature, LfParseError> {
        Ok(make_signature(&parse_compact_lenient(text)?))
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Strips slot values, keeping the intent and the slot names in order.
pub fn make_signature(lf: &LogicalForm) -> Signature {
    let mut text = String::from("[IN:");
    text.push_str(&lf.intent.to_uppercase());
    for slot in &lf.slots {
        text.push_str(" [SL:");
        text.push_str(&slot.name.to_uppercase());
        text.push_str(" ]");
    }
    text.push_str(" ]");
    Signature { text }
}

/// Tokenization behaviour of one locale. Boundary snapping only applies
/// where whitespace delimits words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageConfig {
    pub locale: String,
    pub whitespace_tokenized: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no language configuration for locale {locale:?}")]
pub struct UnknownLocaleError {
    pub locale: String,
}

#[derive(Debug, Error)]
pub enum LanguageConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid language config: {message}")]
    Invalid { path: PathBuf, message: String },
}

/// Locale to tokenization mapping, loaded from a JSON object like
/// `{"en_US": true, "ja_JP": false}`.
///
/// Lookups are explicit: a locale absent from the map is an error, never a
/// silent default.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LanguageConfigMap {
    entries: BTreeMap<String, bool>,
}

impl LanguageConfigMap {
    /// The shipped 51-locale map. Everything is whitespace-tokenized except
    /// zh_CN, zh_TW, ja_JP, th_TH, km_KH, and my_MM.
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../data/language_config.json"))
            .expect("shipped language config parses")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let entries: BTreeMap<String, bool> = serde_json::from_str(text)?;
        Ok(LanguageConfigMap { entries })
    }

    pub fn load(path: &Path) -> Result<Self, LanguageConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| LanguageConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| LanguageConfigError::Invalid {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn insert(&mut self, locale: &str, whitespace_tokenized: bool) {
        self.entries
            .insert(locale.to_string(), whitespace_tokenized);
    }

    pub fn get(&self, locale: &str) -> Result<LanguageConfig, UnknownLocaleError> {
        match self.entries.get(locale) {
            Some(&whitespace_tokenized) => Ok(LanguageConfig {
                locale: locale.to_string(),
                whitespace_tokenized,
            }),
            None => Err(UnknownLocaleError {
                locale: locale.to_string(),
            }),
        }
    }

    pub fn locales(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn find_unclaimed(chars: &[char], needle: &[char], claimed: &[(usize, usize)]) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    let last = chars.len().checked_sub(needle.len())?;
    'scan: for i in 0..=last {
        let j = i + needle.len();
        for &(cs, ce) in claimed {
            if i < ce && cs < j {
                continue 'scan;
            }
        }
        if chars[i..j] == *needle {
            return Some(i);
        }
    }
    None
}

/// Reorders slots to the order their values appear in the utterance.
///
/// Each slot, taken in logical-form order, claims the leftmost occurrence of
/// its value that no earlier slot has claimed; claimed slots are then sorted
/// by position and carry spans. Slots whose values never occur keep their
/// relative order at the tail, span-less, and are reported in the second
/// return value. Values themselves are never edited here; the slot multiset
/// is preserved exactly.
pub fn reorder_slots(lf: &LogicalForm, utterance: &str) -> (LogicalForm, Vec<String>) {
    let chars: Vec<char> = utterance.chars().collect();
    let mut claimed: Vec<(usize, usize)> = Vec::new();
    let mut matched: Vec<SlotSpan> = Vec::new();
    let mut tail: Vec<SlotSpan> = Vec::new();
    let mut unmatched: Vec<String> = Vec::new();
    for slot in &lf.slots {
        let needle: Vec<char> = slot.value.chars().collect();
        match find_unclaimed(&chars, &needle, &claimed) {
            Some(start) => {
                let end = start + needle.len();
                claimed.push((start, end));
                matched.push(SlotSpan {
                    name: slot.name.clone(),
                    value: slot.value.clone(),
                    span: Some(Span::new(start, end)),
                });
            }
            None => {
                unmatched.push(slot.name.clone());
                tail.push(SlotSpan {
                    name: slot.name.clone(),
                    value: slot.value.clone(),
                    span: None,
                });
            }
        }
    }
    matched.sort_by_key(|s| s.span.expect("matched slots carry spans").start);
    matched.extend(tail);
    (
        LogicalForm {
            intent: lf.intent.clone(),
            slots: matched,
        },
        unmatched,
    )
}

/// Widens spans to whitespace-token boundaries.
///
/// For a whitespace-tokenized locale each span grows, never shrinks, until
/// its start sits at the beginning of a token and its end at the end of one;
/// a token is a maximal run of non-whitespace, punctuation included. Values
/// are recomputed from the widened spans. When widening makes a span overlap
/// its predecessor, the span's start is clamped to the predecessor's end; a
/// slot whose span empties out entirely is removed and its name returned in
/// the second value. Span-less slots and non-whitespace-tokenized locales
/// pass through untouched.
pub fn snap_boundaries(
    lf: &LogicalForm,
    utterance: &str,
    cfg: &LanguageConfig,
) -> (LogicalForm, Vec<String>) {
    if !cfg.whitespace_tokenized {
        return (lf.clone(), Vec::new());
    }
    let chars: Vec<char> = utterance.chars().collect();
    let mut out: Vec<Option<SlotSpan>> = lf.slots.iter().cloned().map(Some).collect();
    let mut order: Vec<usize> = (0..lf.slots.len())
        .filter(|&i| lf.slots[i].span.is_some())
        .collect();
    order.sort_by_key(|&i| lf.slots[i].span.expect("filtered to spanned slots").start);

    let mut dropped = Vec::new();
    let mut prev_end = 0usize;
    for i in order {
        let slot = out[i].take().expect("each slot visited once");
        let span = slot.span.expect("filtered to spanned slots");
        let mut start = span.start.min(chars.len());
        let mut end = span.end.min(chars.len());
        while start > 0 && !chars[start - 1].is_whitespace() {
            start -= 1;
        }
        while end < chars.len() && !chars[end].is_whitespace() {
            end += 1;
        }
        if start < prev_end {
            start = prev_end;
            while start < end && chars[start].is_whitespace() {
                start += 1;
            }
        }
        if start >= end {
            dropped.push(slot.name);
            continue;
        }
        prev_end = end;
        out[i] = Some(SlotSpan {
            name: slot.name,
            value: chars[start..end].iter().collect(),
            span: Some(Span::new(start, end)),
        });
    }
    (
        LogicalForm {
            intent: lf.intent.clone(),
            slots: out.into_iter().flatten().collect(),
        },
        dropped,
    )
}

/// Full repair pass: [`reorder_slots`] then [`snap_boundaries`].
///
/// The returned name list combines slots whose values were not found with
/// slots removed during snapping. Applying `canonicalize` to its own output
/// changes nothing.
pub fn canonicalize(
    lf: &LogicalForm,
    utterance: &str,
    cfg: &LanguageConfig,
) -> (LogicalForm, Vec<String>) {
    let (reordered, mut unmatched) = reorder_slots(lf, utterance);
    let (snapped, dropped) = snap_boundaries(&reordered, utterance, cfg);
    unmatched.extend(dropped);
    (snapped, unmatched)
}

/// A projected training example: a loadable corpus record plus the compact
/// form of its logical form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticExample {
    #[serde(flatten)]
    pub example: DatasetExample,
    pub lf: String,
}

/// Everything [`project_corpus`] produced: examples ready for training and
/// one rejection per pair that could not be projected, both sorted by
/// (id, locale).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ProjectOutcome {
    pub examples: Vec<SyntheticExample>,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProjectError {
    #[error("duplicate translation for ({id}, {locale})")]
    DuplicateTranslation { id: String, locale: String },
    #[error("duplicate filler output for ({id}, {locale})")]
    DuplicateFillerOutput { id: String, locale: String },
    #[error(transparent)]
    UnknownLocale(#[from] UnknownLocaleError),
}

/// Joins translations with filler outputs on (id, target locale),
/// canonicalizes each filled logical form against its translated utterance,
/// and emits synthetic examples.
///
/// Join misses, unparseable filler output, and slots the canonicalizer could
/// not place all become rejections rather than errors; only duplicate keys
/// and locales missing from the config are fatal. Output order is
/// deterministic regardless of input order.
pub fn project_corpus(
    translations: &[TranslationRecord],
    filler_outputs: &[FillerOutput],
    cfg: &LanguageConfigMap,
) -> Result<ProjectOutcome, ProjectError> {
    let mut trans: BTreeMap<(String, String), &TranslationRecord> = BTreeMap::new();
    for t in translations {
        let key = (t.id.clone(), t.target_locale.clone());
        if trans.insert(key, t).is_some() {
            return Err(ProjectError::DuplicateTranslation {
                id: t.id.clone(),
                locale: t.target_locale.clone(),
            });
        }
    }
    let mut fills: BTreeMap<(String, String), &FillerOutput> = BTreeMap::new();
    for f in filler_outputs {
        let key = (f.id.clone(), f.target_locale.clone());
        if fills.insert(key, f).is_some() {
            return Err(ProjectError::DuplicateFillerOutput {
                id: f.id.clone(),
                locale: f.target_locale.clone(),
            });
        }
    }

    let mut outcome = ProjectOutcome::default();
    let mut reject = |(id, locale): &(String, String), reason: String| {
        outcome.rejections.push(Rejection {
            id: id.clone(),
            target_locale: locale.clone(),
            reason,
        });
    };
    for (key, fill) in &fills {
        if !trans.contains_key(key) {
            reject(key, "no translation for this filler output".to_string());
            let _ = fill;
        }
    }
    for (key, trans_rec) in &trans {
        let Some(fill) = fills.get(key) else {
            reject(key, "no filler output for this translation".to_string());
            continue;
        };
        let config = cfg.get(&key.1)?;
        let lf = match parse_compact(&fill.lf) {
            Ok(lf) => lf,
            Err(e) => {
                reject(key, format!("unparseable prediction: {e}"));
                continue;
            }
        };
        // A bracket in the utterance would make the emitted annotation
        // unreadable by the corpus loader.
        if trans_rec.text.contains(['[', ']']) {
            reject(
                key,
                "translation text contains bracket characters".to_string(),
            );
            continue;
        }
        let (canon, unmatched) = canonicalize(&lf, &trans_rec.text, &config);
        if !unmatched.is_empty() {
            reject(key, format!("unmatched slots: {}", unmatched.join(", ")));
            continue;
        }
        let annot_utt = serialize_annot(&canon, &trans_rec.text)
            .expect("fully matched canonical slots serialize");
        let slot_methods = canon
            .slots
            .iter()
            .map(|s| SlotMethodEntry {
                slot: s.name.clone(),
                method: SlotMethod::Translation,
            })
            .collect();
        outcome.examples.push(SyntheticExample {
            example: DatasetExample {
                id: key.0.clone(),
                locale: key.1.clone(),
                partition: Partition::Train,
                intent: canon.intent.clone(),
                utt: trans_rec.text.clone(),
                annot_utt,
                slot_methods: Some(slot_methods),
                scenario: None,
            },
            lf: serialize_compact(&canon).into_string(),
        });
    }
    outcome
        .rejections
        .sort_by(|a, b| (&a.id, &a.target_locale).cmp(&(&b.id, &b.target_locale)));
    Ok(outcome)
}
