//! On-disk formats: JSONL corpus files, prediction files, and atomic writes.
//!
//! Every loader is total over its input lines. A line either yields a record
//! or a typed error carrying the path and 1-based line number; nothing is
//! skipped silently.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lf::parse_annot;
use crate::metrics::{render_json, render_text, render_tsv, EvalReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "train",
            Partition::Dev => "dev",
            Partition::Test => "test",
        })
    }
}

impl FromStr for Partition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Partition::Train),
            "dev" => Ok(Partition::Dev),
            "test" => Ok(Partition::Test),
            other => Err(format!(
                "unknown partition {other:?} (expected train, dev, or test)"
            )),
        }
    }
}

/// How a slot's value was produced when the utterance was carried into a
/// new language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotMethod {
    Translation,
    Localization,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotMethodEntry {
    pub slot: String,
    pub method: SlotMethod,
}

/// One corpus record: an utterance in one locale together with its
/// annotation and partition assignment.
///
/// On disk the per-slot metadata field is named `slot_method`. Unknown JSON
/// fields are ignored; distributions carry auxiliary columns that are not
/// contractual here.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetExample {
    pub id: String,
    pub locale: String,
    pub partition: Partition,
    pub intent: String,
    pub utt: String,
    pub annot_utt: String,
    #[serde(
        rename = "slot_method",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub slot_methods: Option<Vec<SlotMethodEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
}

impl DatasetExample {
    /// True when any slot was localized rather than translated. Records
    /// without metadata and slot-free records count as not localized.
    pub fn is_localized(&self) -> bool {
        self.slot_methods
            .as_deref()
            .is_some_and(|ms| ms.iter().any(|m| m.method == SlotMethod::Localization))
    }
}

/// A raw model output for one example: whatever text the model produced,
/// parsed only at scoring time.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub locale: String,
    pub lf: String,
}

/// A machine translation of one source utterance into one target locale.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub id: String,
    pub source_locale: String,
    pub target_locale: String,
    pub text: String,
}

/// A model-filled compact logical form for one translated utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillerOutput {
    pub id: String,
    pub target_locale: String,
    pub lf: String,
}

/// Why a translated example could not be projected into synthetic data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub id: String,
    pub target_locale: String,
    pub reason: String,
}

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed JSON: {message}")]
    MalformedJsonLine {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: record {id:?}: {reason}")]
    InvariantViolation {
        path: PathBuf,
        line: usize,
        id: String,
        reason: String,
    },
    #[error("{path}:{line}: duplicate key {key}")]
    DuplicateKey {
        path: PathBuf,
        line: usize,
        key: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> DatasetIoError {
    DatasetIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// A validated example plus any non-fatal observations made while loading it.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub example: DatasetExample,
    pub warnings: Vec<String>,
}

fn locale_shaped(locale: &str) -> bool {
    let b = locale.as_bytes();
    b.len() == 5
        && b[0].is_ascii_lowercase()
        && b[1].is_ascii_lowercase()
        && b[2] == b'_'
        && b[3].is_ascii_uppercase()
        && b[4].is_ascii_uppercase()
}

fn validate_example(
    path: &Path,
    line: usize,
    example: DatasetExample,
) -> Result<Loaded, DatasetIoError> {
    let violation = |id: &str, reason: String| DatasetIoError::InvariantViolation {
        path: path.to_path_buf(),
        line,
        id: id.to_string(),
        reason,
    };
    let (recovered, lf) = parse_annot(&example.annot_utt, &example.intent)
        .map_err(|e| violation(&example.id, format!("annot_utt does not parse: {e}")))?;
    if recovered != example.utt {
        return Err(violation(
            &example.id,
            format!("annot_utt recovers {recovered:?}, which differs from utt"),
        ));
    }
    let mut warnings = Vec::new();
    match &example.slot_methods {
        None => warnings.push(format!(
            "record {:?} ({}) has no slot_method metadata; treated as translated-only",
            example.id, example.locale
        )),
        Some(methods) => {
            let names: BTreeSet<&str> = lf.slots.iter().map(|s| s.name.as_str()).collect();
            for m in methods {
                if !names.contains(m.slot.as_str()) {
                    return Err(violation(
                        &example.id,
                        format!(
                            "slot_method names slot {:?}, absent from the annotation",
                            m.slot
                        ),
                    ));
                }
            }
        }
    }
    if !locale_shaped(&example.locale) {
        warnings.push(format!(
            "record {:?} has locale {:?}, not an xx_XX code",
            example.id, example.locale
        ));
    }
    Ok(Loaded { example, warnings })
}

/// Streaming reader over a MASSIVE-style JSONL corpus file.
pub struct MassiveReader {
    path: PathBuf,
    lines: std::io::Lines<BufReader<File>>,
    line: usize,
}

impl Iterator for MassiveReader {
    type Item = Result<Loaded, DatasetIoError>;

    fn next(&mut self) -> Option<Self::Item> {
        let text = match self.lines.next()? {
            Ok(t) => t,
            Err(e) => return Some(Err(io_err(&self.path, e))),
        };
        self.line += 1;
        let example: DatasetExample = match serde_json::from_str(&text) {
            Ok(ex) => ex,
            Err(e) => {
                return Some(Err(DatasetIoError::MalformedJsonLine {
                    path: self.path.clone(),
                    line: self.line,
                    message: e.to_string(),
                }))
            }
        };
        Some(validate_example(&self.path, self.line, example))
    }
}

/// Opens a corpus file and yields validated examples in file order.
///
/// Each record is checked against the format invariants: the annotated
/// utterance must parse and must recover `utt` exactly, and slot metadata
/// may only name slots that exist in the annotation.
pub fn load_massive(path: &Path) -> Result<MassiveReader, DatasetIoError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(MassiveReader {
        path: path.to_path_buf(),
        lines: BufReader::new(file).lines(),
        line: 0,
    })
}

/// Loads a whole corpus file, failing on the first invalid record and
/// accumulating the warnings of the valid ones.
pub fn load_massive_strict(
    path: &Path,
) -> Result<(Vec<DatasetExample>, Vec<String>), DatasetIoError> {
    let mut examples = Vec::new();
    let mut warnings = Vec::new();
    for item in load_massive(path)? {
        let loaded = item?;
        warnings.extend(loaded.warnings);
        examples.push(loaded.example);
    }
    Ok((examples, warnings))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, DatasetIoError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        let record =
            serde_json::from_str(&line).map_err(|e| DatasetIoError::MalformedJsonLine {
                path: path.to_path_buf(),
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push((idx + 1, record));
    }
    Ok(records)
}

fn check_unique_keys<T>(
    path: &Path,
    records: &[(usize, T)],
    key: impl Fn(&T) -> String,
) -> Result<(), DatasetIoError> {
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (line, record) in records {
        let k = key(record);
        if !seen.insert(k.clone()) {
            return Err(DatasetIoError::DuplicateKey {
                path: path.to_path_buf(),
                line: *line,
                key: k,
            });
        }
    }
    Ok(())
}

/// Loads model predictions. `(id, locale)` must be unique within the file.
pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, DatasetIoError> {
    let records = read_jsonl::<PredictionRecord>(path)?;
    check_unique_keys(path, &records, |r| format!("({}, {})", r.id, r.locale))?;
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

/// Loads machine translations. `(id, target_locale)` must be unique.
pub fn load_translations(path: &Path) -> Result<Vec<TranslationRecord>, DatasetIoError> {
    let records = read_jsonl::<TranslationRecord>(path)?;
    check_unique_keys(path, &records, |r| {
        format!("({}, {})", r.id, r.target_locale)
    })?;
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

/// Loads filled logical forms. `(id, target_locale)` must be unique.
pub fn load_filler_outputs(path: &Path) -> Result<Vec<FillerOutput>, DatasetIoError> {
    let records = read_jsonl::<FillerOutput>(path)?;
    check_unique_keys(path, &records, |r| {
        format!("({}, {})", r.id, r.target_locale)
    })?;
    Ok(records.into_iter().map(|(_, r)| r).collect())
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory plus a rename, so readers never observe a partial file.
pub fn atomic_write(path: &Path, contents: &str) -> Result<(), DatasetIoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Tsv,
    Text,
}

impl ReportFormat {
    /// Guesses the format from a file extension: `.json`, `.tsv`, or
    /// `.txt`/`.text`.
    pub fn from_path(path: &Path) -> Option<ReportFormat> {
        match path.extension()?.to_str()? {
            "json" => Some(ReportFormat::Json),
            "tsv" => Some(ReportFormat::Tsv),
            "txt" | "text" => Some(ReportFormat::Text),
            _ => None,
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Tsv => "tsv",
            ReportFormat::Text => "text",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "tsv" => Ok(ReportFormat::Tsv),
            "text" | "txt" => Ok(ReportFormat::Text),
            other => Err(format!(
                "unknown report format {other:?} (expected json, tsv, or text)"
            )),
        }
    }
}

/// Renders an evaluation report in the requested format and writes it
/// atomically.
pub fn write_report(
    report: &EvalReport,
    path: &Path,
    format: ReportFormat,
) -> Result<(), DatasetIoError> {
    let rendered = match format {
        ReportFormat::Json => render_json(report),
        ReportFormat::Tsv => render_tsv(report),
        ReportFormat::Text => render_text(report),
    };
    atomic_write(path, &rendered)
}

/// Serializes records as JSONL (UTF-8, LF line endings) and writes them
/// atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), DatasetIoError> {
    let mut out = String::new();
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| DatasetIoError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?;
        out.push_str(&line);
        out.push('\n');
    }
    atomic_write(path, &out)
}
