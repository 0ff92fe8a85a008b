//! Intent-accuracy and exact-match scoring of prediction files against gold
//! corpora.
//!
//! Exact match (EM) compares canonical serializations, so incidental
//! whitespace in a prediction never matters but slot order and values do.
//! Intent accuracy (IA) is deliberately looser: it extracts the first
//! `IN:`-prefixed token even from unbalanced output, because a model can get
//! the intent right while mangling the brackets. An exact-match hit is
//! therefore always also an intent hit.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{DatasetExample, PredictionRecord};
use crate::lf::{parse_annot, parse_compact, serialize_compact, CanonicalText};

/// Hit counters for one group of examples. Fractions are derived, never
/// stored, so aggregation stays exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GroupStats {
    pub n: u64,
    pub ia_hits: u64,
    pub em_hits: u64,
}

impl GroupStats {
    pub fn ia(&self) -> f64 {
        fraction(self.ia_hits, self.n)
    }

    pub fn em(&self) -> f64 {
        fraction(self.em_hits, self.n)
    }
}

fn fraction(hits: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        hits as f64 / n as f64
    }
}

impl Serialize for GroupStats {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("GroupStats", 5)?;
        s.serialize_field("n", &self.n)?;
        s.serialize_field("ia_hits", &self.ia_hits)?;
        s.serialize_field("em_hits", &self.em_hits)?;
        s.serialize_field("ia", &self.ia())?;
        s.serialize_field("em", &self.em())?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for GroupStats {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            n: u64,
            ia_hits: u64,
            em_hits: u64,
        }
        let w = Wire::deserialize(deserializer)?;
        Ok(GroupStats {
            n: w.n,
            ia_hits: w.ia_hits,
            em_hits: w.em_hits,
        })
    }
}

/// Intent-accuracy counters for one intent label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IntentStats {
    pub support: u64,
    pub ia_hits: u64,
}

impl IntentStats {
    pub fn ia(&self) -> f64 {
        fraction(self.ia_hits, self.support)
    }
}

impl Serialize for IntentStats {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("IntentStats", 3)?;
        s.serialize_field("support", &self.support)?;
        s.serialize_field("ia_hits", &self.ia_hits)?;
        s.serialize_field("ia", &self.ia())?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for IntentStats {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            support: u64,
            ia_hits: u64,
        }
        let w = Wire::deserialize(deserializer)?;
        Ok(IntentStats {
            support: w.support,
            ia_hits: w.ia_hits,
        })
    }
}

/// Exact-match behaviour on the localized and translated-only halves of the
/// gold data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitStats {
    pub localized: GroupStats,
    pub translated_only: GroupStats,
}

/// The full scoring breakdown for one prediction file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall: GroupStats,
    pub per_locale: BTreeMap<String, GroupStats>,
    pub per_intent: BTreeMap<String, IntentStats>,
    pub split: SplitStats,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold examples without predictions: {}", keys.join(", "))]
    MissingPredictions { keys: Vec<String> },
    #[error("predictions without gold examples: {}", keys.join(", "))]
    UnknownPredictionIds { keys: Vec<String> },
    #[error("duplicate predictions for: {}", keys.join(", "))]
    DuplicatePredictions { keys: Vec<String> },
    #[error("duplicate gold examples for: {}", keys.join(", "))]
    DuplicateGoldKeys { keys: Vec<String> },
    #[error("gold example {id} ({locale}): {reason}")]
    InvalidGold {
        id: String,
        locale: String,
        reason: String,
    },
}

/// True iff `prediction` parses and serializes to exactly `gold`.
/// Unparseable output is a miss, never an error.
pub fn exact_match(prediction: &str, gold: &CanonicalText) -> bool {
    match parse_compact(prediction) {
        Ok(lf) => serialize_compact(&lf) == *gold,
        Err(_) => false,
    }
}

/// True iff the first `IN:`-prefixed token in `prediction` names
/// `gold_intent`, case-insensitively. Brackets need not balance; tokens are
/// whatever remains after splitting on whitespace and brackets.
pub fn intent_match(prediction: &str, gold_intent: &str) -> bool {
    prediction
        .split(|c: char| c.is_whitespace() || c == '[' || c == ']')
        .find_map(|token| {
            token
                .get(..3)
                .filter(|prefix| prefix.eq_ignore_ascii_case("IN:"))
                .map(|_| &token[3..])
        })
        .is_some_and(|intent| intent.eq_ignore_ascii_case(gold_intent))
}

/// Splits gold examples into (localized, translated-only). An example is
/// localized iff any of its slots carries the localization method; slot-free
/// examples and examples without metadata land in translated-only. The two
/// halves partition the input.
pub fn split_by_localization(
    gold: &[DatasetExample],
) -> (Vec<&DatasetExample>, Vec<&DatasetExample>) {
    gold.iter().partition(|e| e.is_localized())
}

struct Outcome {
    locale: String,
    intent: String,
    localized: bool,
    ia: bool,
    em: bool,
}

fn example_key(id: &str, locale: &str) -> String {
    format!("({id}, {locale})")
}

/// Scores one prediction per gold example and aggregates per locale, per
/// intent, and by localization split.
///
/// The prediction set must cover the gold set exactly: any gold example
/// without a prediction, prediction without a gold example, or duplicated
/// key on either side is a fatal error listing the offending keys. Per-group
/// fractions are plain means within the group; `overall` is the mean over
/// the union of all examples, so locales weigh in proportion to their size.
pub fn evaluate(
    predictions: &[PredictionRecord],
    gold: &[DatasetExample],
) -> Result<EvalReport, EvalError> {
    let mut gold_keys = BTreeSet::new();
    let mut dup_gold = BTreeSet::new();
    for g in gold {
        if !gold_keys.insert((g.id.as_str(), g.locale.as_str())) {
            dup_gold.insert(example_key(&g.id, &g.locale));
        }
    }
    if !dup_gold.is_empty() {
        return Err(EvalError::DuplicateGoldKeys {
            keys: dup_gold.into_iter().collect(),
        });
    }

    let mut by_key: BTreeMap<(&str, &str), &str> = BTreeMap::new();
    let mut dup_pred = BTreeSet::new();
    for p in predictions {
        if by_key
            .insert((p.id.as_str(), p.locale.as_str()), p.lf.as_str())
            .is_some()
        {
            dup_pred.insert(example_key(&p.id, &p.locale));
        }
    }
    if !dup_pred.is_empty() {
        return Err(EvalError::DuplicatePredictions {
            keys: dup_pred.into_iter().collect(),
        });
    }

    let unknown: Vec<String> = by_key
        .keys()
        .filter(|k| !gold_keys.contains(*k))
        .map(|(id, locale)| example_key(id, locale))
        .collect();
    if !unknown.is_empty() {
        return Err(EvalError::UnknownPredictionIds { keys: unknown });
    }
    let missing: Vec<String> = gold_keys
        .iter()
        .filter(|k| !by_key.contains_key(*k))
        .map(|(id, locale)| example_key(id, locale))
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions { keys: missing });
    }

    let outcomes: Vec<Result<Outcome, EvalError>> = gold
        .par_iter()
        .map(|g| {
            let (_, lf) =
                parse_annot(&g.annot_utt, &g.intent).map_err(|e| EvalError::InvalidGold {
                    id: g.id.clone(),
                    locale: g.locale.clone(),
                    reason: format!("annot_utt does not parse: {e}"),
                })?;
            let canonical = serialize_compact(&lf);
            let prediction = by_key[&(g.id.as_str(), g.locale.as_str())];
            Ok(Outcome {
                locale: g.locale.clone(),
                intent: lf.intent.clone(),
                localized: g.is_localized(),
                ia: intent_match(prediction, &lf.intent),
                em: exact_match(prediction, &canonical),
            })
        })
        .collect();

    let mut report = EvalReport {
        overall: GroupStats::default(),
        per_locale: BTreeMap::new(),
        per_intent: BTreeMap::new(),
        split: SplitStats::default(),
    };
    for outcome in outcomes {
        let o = outcome?;
        let ia = o.ia as u64;
        let em = o.em as u64;
        for stats in [
            &mut report.overall,
            report.per_locale.entry(o.locale).or_default(),
            if o.localized {
                &mut report.split.localized
            } else {
                &mut report.split.translated_only
            },
        ] {
            stats.n += 1;
            stats.ia_hits += ia;
            stats.em_hits += em;
        }
        let intent = report.per_intent.entry(o.intent).or_default();
        intent.support += 1;
        intent.ia_hits += ia;
    }
    Ok(report)
}

/// Per-intent rows sorted ascending by intent accuracy, worst first, ties by
/// name. This is the order the human-readable report prints.
pub fn intents_by_ascending_ia(report: &EvalReport) -> Vec<(&str, &IntentStats)> {
    let mut rows: Vec<(&str, &IntentStats)> = report
        .per_intent
        .iter()
        .map(|(name, stats)| (name.as_str(), stats))
        .collect();
    rows.sort_by(|a, b| {
        a.1.ia()
            .partial_cmp(&b.1.ia())
            .expect("fractions are never NaN")
            .then_with(|| a.0.cmp(b.0))
    });
    rows
}

/// The machine-readable JSON rendering, pretty-printed, with both raw counts
/// and derived fractions.
pub fn render_json(report: &EvalReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("report serializes");
    out.push('\n');
    out
}

/// One row per locale plus an `overall` footer; fractions in shortest
/// lossless form.
pub fn render_tsv(report: &EvalReport) -> String {
    let mut out = String::from("locale\tn\tia\tem\n");
    for (locale, stats) in &report.per_locale {
        out.push_str(&format!(
            "{locale}\t{}\t{}\t{}\n",
            stats.n,
            stats.ia(),
            stats.em()
        ));
    }
    out.push_str(&format!(
        "overall\t{}\t{}\t{}\n",
        report.overall.n,
        report.overall.ia(),
        report.overall.em()
    ));
    out
}

/// The aligned-column human rendering: overall line, per-locale table,
/// per-intent table (worst intents first), and the localization split.
pub fn render_text(report: &EvalReport) -> String {
    let mut out = format!(
        "overall     n={:<7} IA={:.4} EM={:.4}\n",
        report.overall.n,
        report.overall.ia(),
        report.overall.em()
    );

    let locale_width = report
        .per_locale
        .keys()
        .map(|l| l.len())
        .chain(["locale".len()])
        .max()
        .unwrap_or(6);
    out.push_str(&format!(
        "\n{:<locale_width$} {:>7} {:>7} {:>7}\n",
        "locale", "n", "IA", "EM"
    ));
    for (locale, stats) in &report.per_locale {
        out.push_str(&format!(
            "{:<locale_width$} {:>7} {:>7.4} {:>7.4}\n",
            locale,
            stats.n,
            stats.ia(),
            stats.em()
        ));
    }

    let intent_width = report
        .per_intent
        .keys()
        .map(|i| i.len())
        .chain(["intent".len()])
        .max()
        .unwrap_or(6);
    out.push_str(&format!(
        "\n{:<intent_width$} {:>7} {:>7}\n",
        "intent", "support", "IA"
    ));
    for (intent, stats) in intents_by_ascending_ia(report) {
        out.push_str(&format!(
            "{:<intent_width$} {:>7} {:>7.4}\n",
            intent,
            stats.support,
            stats.ia()
        ));
    }

    out.push_str(&format!(
        "\nlocalized       n={:<7} EM={:.4}\ntranslated-only n={:<7} EM={:.4}\n",
        report.split.localized.n,
        report.split.localized.em(),
        report.split.translated_only.n,
        report.split.translated_only.em()
    ));
    out
}
