//! Verbatim-match statistics between machine translations and gold human
//! translations.
//!
//! Two utterances count as a verbatim match when they are equal after
//! unicode normalization and removal of all whitespace and punctuation.
//! Case is deliberately preserved: the comparison applies exactly those
//! steps, and folding case would silently inflate match rates. Matching is
//! restricted to utterances that were translated without localization, since
//! a localized gold utterance is not expected to agree with a direct
//! translation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use regex::Regex;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::io::{DatasetExample, TranslationRecord};

/// Unicode normalization form applied before comparison. The compatibility
/// composed form is the default: it folds width, ligature, and precomposed
/// variants together, which is what a cross-tool verbatim comparison wants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationForm {
    Nfc,
    Nfd,
    #[default]
    Nfkc,
    Nfkd,
}

impl fmt::Display for NormalizationForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormalizationForm::Nfc => "nfc",
            NormalizationForm::Nfd => "nfd",
            NormalizationForm::Nfkc => "nfkc",
            NormalizationForm::Nfkd => "nfkd",
        })
    }
}

impl FromStr for NormalizationForm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nfc" => Ok(NormalizationForm::Nfc),
            "nfd" => Ok(NormalizationForm::Nfd),
            "nfkc" => Ok(NormalizationForm::Nfkc),
            "nfkd" => Ok(NormalizationForm::Nfkd),
            other => Err(format!(
                "unknown normalization form {other:?} (expected nfc, nfd, nfkc, or nfkd)"
            )),
        }
    }
}

fn apply_form(text: &str, form: NormalizationForm) -> String {
    match form {
        NormalizationForm::Nfc => text.nfc().collect(),
        NormalizationForm::Nfd => text.nfd().collect(),
        NormalizationForm::Nfkc => text.nfkc().collect(),
        NormalizationForm::Nfkd => text.nfkd().collect(),
    }
}

fn strip_ws_punct(text: &str) -> String {
    static STRIP: OnceLock<Regex> = OnceLock::new();
    let re = STRIP.get_or_init(|| Regex::new(r"[\s\p{P}]+").expect("pattern compiles"));
    re.replace_all(text, "").into_owned()
}

/// The comparison key for verbatim matching: normalized, then stripped of
/// whitespace and punctuation, then renormalized so that stripping cannot
/// leave a denormalized residue. Applying it twice changes nothing.
pub fn normalize_for_match(text: &str, form: NormalizationForm) -> String {
    apply_form(&strip_ws_punct(&apply_form(text, form)), form)
}

/// Match counters for one locale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LocaleMatch {
    pub matches: u64,
    pub candidates: u64,
}

impl LocaleMatch {
    /// Percentage of candidates matched, 0 when there are no candidates.
    pub fn pct(&self) -> f64 {
        if self.candidates == 0 {
            0.0
        } else {
            100.0 * self.matches as f64 / self.candidates as f64
        }
    }
}

impl Serialize for LocaleMatch {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("LocaleMatch", 3)?;
        s.serialize_field("matches", &self.matches)?;
        s.serialize_field("candidates", &self.candidates)?;
        s.serialize_field("match_pct", &self.pct())?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for LocaleMatch {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            matches: u64,
            candidates: u64,
        }
        let w = Wire::deserialize(deserializer)?;
        Ok(LocaleMatch {
            matches: w.matches,
            candidates: w.candidates,
        })
    }
}

/// Per-locale verbatim-match counts plus which locales count as Indic for
/// aggregation and which candidate pairs had no machine translation at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchReport {
    pub per_locale: BTreeMap<String, LocaleMatch>,
    pub indic_locales: BTreeSet<String>,
    /// (id, locale) of candidates with no machine translation; each was
    /// counted as a non-match.
    pub missing: Vec<(String, String)>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("locale {locale}: {matches} matches exceed {candidates} candidates")]
pub struct InvalidCountsError {
    pub locale: String,
    pub matches: u64,
    pub candidates: u64,
}

impl MatchReport {
    /// Builds a report from bare per-locale counts, for when the underlying
    /// utterances are not available. Aggregation behaves exactly as for
    /// [`match_report`] output.
    pub fn from_counts(
        per_locale: BTreeMap<String, LocaleMatch>,
        indic_locales: &BTreeSet<String>,
    ) -> Result<MatchReport, InvalidCountsError> {
        for (locale, counts) in &per_locale {
            if counts.matches > counts.candidates {
                return Err(InvalidCountsError {
                    locale: locale.clone(),
                    matches: counts.matches,
                    candidates: counts.candidates,
                });
            }
        }
        Ok(MatchReport {
            per_locale,
            indic_locales: indic_locales.clone(),
            missing: Vec::new(),
        })
    }

    fn mean_pct<'a>(
        &self,
        locales: impl Iterator<Item = (&'a String, &'a LocaleMatch)>,
    ) -> Option<f64> {
        let pcts: Vec<f64> = locales
            .filter(|(_, c)| c.candidates > 0)
            .map(|(_, c)| c.pct())
            .collect();
        if pcts.is_empty() {
            None
        } else {
            Some(pcts.iter().sum::<f64>() / pcts.len() as f64)
        }
    }

    /// Unweighted mean of per-locale percentages over every locale with
    /// candidates.
    pub fn aggregate_all(&self) -> Option<f64> {
        self.mean_pct(self.per_locale.iter())
    }

    /// The same mean restricted to non-Indic locales.
    pub fn aggregate_non_indic(&self) -> Option<f64> {
        self.mean_pct(
            self.per_locale
                .iter()
                .filter(|(l, _)| !self.indic_locales.contains(*l)),
        )
    }

    /// The same mean restricted to Indic locales.
    pub fn aggregate_indic(&self) -> Option<f64> {
        self.mean_pct(
            self.per_locale
                .iter()
                .filter(|(l, _)| self.indic_locales.contains(*l)),
        )
    }
}

/// The Indic subset of the 51 corpus locales: the *_IN locales plus bn_BD.
pub fn default_indic_locales() -> BTreeSet<String> {
    ["bn_BD", "hi_IN", "kn_IN", "ml_IN", "ta_IN", "te_IN"]
        .into_iter()
        .map(str::to_string)
        .collect()
}

/// Counts verbatim matches between machine translations and gold utterances.
///
/// Candidates are the translated-only gold examples (any localized slot
/// disqualifies), excluding en_US since that is the translation source. A
/// candidate with no machine translation under its (id, locale) key counts
/// as a non-match and is listed in `missing`. The caller restricts `gold` to
/// the partition of interest.
pub fn match_report(
    nmt: &[TranslationRecord],
    gold: &[DatasetExample],
    indic_locales: &BTreeSet<String>,
    form: NormalizationForm,
) -> MatchReport {
    let mut translations: BTreeMap<(&str, &str), &str> = BTreeMap::new();
    for t in nmt {
        translations.insert((t.id.as_str(), t.target_locale.as_str()), t.text.as_str());
    }

    struct Pair {
        locale: String,
        matched: bool,
        missing: Option<(String, String)>,
    }

    let pairs: Vec<Pair> = gold
        .par_iter()
        .filter(|g| g.locale != "en_US" && !g.is_localized())
        .map(
            |g| match translations.get(&(g.id.as_str(), g.locale.as_str())) {
                Some(text) => Pair {
                    locale: g.locale.clone(),
                    matched: normalize_for_match(text, form) == normalize_for_match(&g.utt, form),
                    missing: None,
                },
                None => Pair {
                    locale: g.locale.clone(),
                    matched: false,
                    missing: Some((g.id.clone(), g.locale.clone())),
                },
            },
        )
        .collect();

    let mut report = MatchReport {
        per_locale: BTreeMap::new(),
        indic_locales: indic_locales.clone(),
        missing: Vec::new(),
    };
    for pair in pairs {
        let entry = report.per_locale.entry(pair.locale).or_default();
        entry.candidates += 1;
        entry.matches += pair.matched as u64;
        report.missing.extend(pair.missing);
    }
    report.missing.sort();
    report
}

/// One row per locale, best match rate first, plus three aggregate footer
/// rows (`all`, `non_indic`, `indic`). Percentages print with one decimal.
pub fn render_match_tsv(report: &MatchReport) -> String {
    let mut rows: Vec<(&String, &LocaleMatch)> = report.per_locale.iter().collect();
    rows.sort_by(|a, b| {
        b.1.pct()
            .partial_cmp(&a.1.pct())
            .expect("percentages are never NaN")
            .then_with(|| a.0.cmp(b.0))
    });
    let mut out = String::from("locale\tmatch_pct\tmatches\tcandidates\n");
    for (locale, counts) in rows {
        out.push_str(&format!(
            "{locale}\t{:.1}\t{}\t{}\n",
            counts.pct(),
            counts.matches,
            counts.candidates
        ));
    }
    for (label, value) in [
        ("all", report.aggregate_all()),
        ("non_indic", report.aggregate_non_indic()),
        ("indic", report.aggregate_indic()),
    ] {
        match value {
            Some(pct) => out.push_str(&format!("{label}\t{pct:.1}\t\t\n")),
            None => out.push_str(&format!("{label}\t-\t\t\n")),
        }
    }
    out
}
