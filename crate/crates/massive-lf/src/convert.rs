//! Conversion between annotated corpus records and compact training targets,
//! in both directions.
//!
//! The forward direction strips an annotated utterance down to the compact
//! string a model is trained to emit. The inverse direction takes raw model
//! output plus the plain utterance and reconstructs the inline annotation by
//! string matching, since the compact form carries no offsets.

use thiserror::Error;

use crate::io::DatasetExample;
use crate::lf::{
    parse_annot, parse_compact, serialize_annot, serialize_compact, AnnotParseError, CanonicalText,
    LfParseError, Span,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("example {id:?}: {source}")]
pub struct ToCompactError {
    pub id: String,
    #[source]
    pub source: AnnotParseError,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FromCompactError {
    #[error("prediction does not parse: {0}")]
    UnparseablePrediction(#[from] LfParseError),
    #[error("slot {slot:?} value {value:?} has no qualifying occurrence in the utterance")]
    SlotValueNotFound { slot: String, value: String },
}

/// The compact training target for one corpus record.
pub fn to_compact(example: &DatasetExample) -> Result<CanonicalText, ToCompactError> {
    let (_, lf) =
        parse_annot(&example.annot_utt, &example.intent).map_err(|source| ToCompactError {
            id: example.id.clone(),
            source,
        })?;
    Ok(serialize_compact(&lf))
}

fn find_from(haystack: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.is_empty() {
        return None;
    }
    let last = haystack.len().checked_sub(needle.len())?;
    (from..=last).find(|&i| haystack[i..i + needle.len()] == *needle)
}

/// Reconstructs an inline-annotated utterance from a raw predicted compact
/// string.
///
/// Each slot value is located in the utterance at its leftmost occurrence at
/// or after the previous slot's match end; the first slot searches from the
/// start. Matching is case- and diacritic-sensitive, so a value the model
/// did not copy verbatim is reported as [`FromCompactError::SlotValueNotFound`]
/// rather than fuzzily matched. A value that occurs only before the previous
/// match is likewise an error; matching never backtracks, which keeps the
/// produced spans strictly increasing.
pub fn from_compact(prediction: &str, utterance: &str) -> Result<String, FromCompactError> {
    let mut lf = parse_compact(prediction)?;
    let chars: Vec<char> = utterance.chars().collect();
    let mut cursor = 0usize;
    for slot in &mut lf.slots {
        let needle: Vec<char> = slot.value.chars().collect();
        let start = find_from(&chars, &needle, cursor).ok_or_else(|| {
            FromCompactError::SlotValueNotFound {
                slot: slot.name.clone(),
                value: slot.value.clone(),
            }
        })?;
        slot.span = Some(Span::new(start, start + needle.len()));
        cursor = start + needle.len();
    }
    Ok(serialize_annot(&lf, utterance).expect("matched spans are in range, ordered, and verbatim"))
}
