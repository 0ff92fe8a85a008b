//! Cross-lingual transfer analysis over a donor × receiver matrix.
//!
//! Fine-tuning one model per language and evaluating each on every language
//! yields a square matrix of exact-match scores: the row language donated
//! its training data, the column language received the evaluation. Row sums
//! say how much a donor helps everyone; column sums say how much a receiver
//! benefits from anyone.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::metrics::EvalReport;

/// A square matrix of exact-match fractions, rows = donor (fine-tune)
/// language, columns = receiver (evaluation) language, both in lexicographic
/// locale order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    languages: Vec<String>,
    cells: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransferError {
    #[error(
        "report for donor {donor:?} covers a different language set (missing: [{}], extra: [{}])",
        missing.join(", "),
        extra.join(", ")
    )]
    InconsistentLanguageSets {
        donor: String,
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("languages must be sorted and unique; {0:?} is out of place")]
    UnsortedLanguages(String),
    #[error("{languages} languages need {expected} cells, got {got}")]
    NotSquare {
        languages: usize,
        expected: usize,
        got: usize,
    },
    #[error("cell ({donor}, {receiver}) = {value} is outside [0, 1]")]
    CellOutOfRange {
        donor: String,
        receiver: String,
        value: f64,
    },
    #[error("malformed matrix CSV at line {line}: {message}")]
    MalformedCsv { line: usize, message: String },
}

impl TransferMatrix {
    /// Builds a matrix from row-major cells. Languages must already be
    /// sorted and unique, the cell count must be the square of the language
    /// count, and every cell must lie in [0, 1].
    pub fn from_cells(languages: Vec<String>, cells: Vec<f64>) -> Result<Self, TransferError> {
        for pair in languages.windows(2) {
            if pair[0] >= pair[1] {
                return Err(TransferError::UnsortedLanguages(pair[1].clone()));
            }
        }
        let n = languages.len();
        if cells.len() != n * n {
            return Err(TransferError::NotSquare {
                languages: n,
                expected: n * n,
                got: cells.len(),
            });
        }
        for (idx, &value) in cells.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(TransferError::CellOutOfRange {
                    donor: languages[idx / n].clone(),
                    receiver: languages[idx % n].clone(),
                    value,
                });
            }
        }
        Ok(TransferMatrix { languages, cells })
    }

    /// Assembles the matrix from one evaluation report per donor language.
    ///
    /// The donor set and every report's per-locale set must be the same
    /// languages; any mismatch is fatal and reported as the difference
    /// between the two sets. Cell (donor, receiver) is the donor report's
    /// exact-match fraction on the receiver locale.
    pub fn from_reports(reports: &BTreeMap<String, EvalReport>) -> Result<Self, TransferError> {
        let languages: Vec<String> = reports.keys().cloned().collect();
        let wanted: BTreeSet<&str> = languages.iter().map(String::as_str).collect();
        for (donor, report) in reports {
            let got: BTreeSet<&str> = report.per_locale.keys().map(String::as_str).collect();
            if got != wanted {
                return Err(TransferError::InconsistentLanguageSets {
                    donor: donor.clone(),
                    missing: wanted.difference(&got).map(|s| s.to_string()).collect(),
                    extra: got.difference(&wanted).map(|s| s.to_string()).collect(),
                });
            }
        }
        let mut cells = Vec::with_capacity(languages.len() * languages.len());
        for donor in &languages {
            let report = &reports[donor];
            for receiver in &languages {
                cells.push(report.per_locale[receiver].em());
            }
        }
        Ok(TransferMatrix { languages, cells })
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn len(&self) -> usize {
        self.languages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.languages.is_empty()
    }

    pub fn cell_at(&self, row: usize, col: usize) -> f64 {
        self.cells[row * self.languages.len() + col]
    }

    pub fn cell(&self, donor: &str, receiver: &str) -> Option<f64> {
        let row = self.languages.iter().position(|l| l == donor)?;
        let col = self.languages.iter().position(|l| l == receiver)?;
        Some(self.cell_at(row, col))
    }

    pub fn transpose(&self) -> TransferMatrix {
        let n = self.languages.len();
        let mut cells = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                cells[j * n + i] = self.cells[i * n + j];
            }
        }
        TransferMatrix {
            languages: self.languages.clone(),
            cells,
        }
    }

    fn ranked_sums(&self, by_row: bool, exclude_self: bool) -> Vec<(String, f64)> {
        let n = self.languages.len();
        let mut scores: Vec<(String, f64)> = (0..n)
            .map(|i| {
                let sum: f64 = (0..n)
                    .filter(|&j| !(exclude_self && i == j))
                    .map(|j| {
                        if by_row {
                            self.cell_at(i, j)
                        } else {
                            self.cell_at(j, i)
                        }
                    })
                    .sum();
                (self.languages[i].clone(), sum)
            })
            .collect();
        scores.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("cell sums are never NaN")
                .then_with(|| a.0.cmp(&b.0))
        });
        scores
    }

    /// Languages ranked by how much their training data helps every
    /// evaluation language: row sums, descending, ties by locale code. The
    /// diagonal (self-transfer) is included unless `exclude_self` is set.
    pub fn donor_scores(&self, exclude_self: bool) -> Vec<(String, f64)> {
        self.ranked_sums(true, exclude_self)
    }

    /// Languages ranked by how much they benefit from everyone's training
    /// data: column sums, otherwise as [`TransferMatrix::donor_scores`].
    pub fn receiver_scores(&self, exclude_self: bool) -> Vec<(String, f64)> {
        self.ranked_sums(false, exclude_self)
    }

    /// Plot-ready CSV: a header row of receiver locales, then one row per
    /// donor, cells as decimal fractions in shortest lossless form.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for language in &self.languages {
            out.push(',');
            out.push_str(language);
        }
        out.push('\n');
        let n = self.languages.len();
        for (i, language) in self.languages.iter().enumerate() {
            out.push_str(language);
            for j in 0..n {
                out.push(',');
                out.push_str(&self.cells[i * n + j].to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Reads a matrix back from [`TransferMatrix::to_csv`] output.
    pub fn from_csv(text: &str) -> Result<Self, TransferError> {
        let malformed =
            |line: usize, message: String| TransferError::MalformedCsv { line, message };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| malformed(1, "empty input".to_string()))?;
        let mut fields = header.split(',');
        let first = fields.next().unwrap_or_default();
        if !first.is_empty() {
            return Err(malformed(
                1,
                format!("header must start with an empty cell, got {first:?}"),
            ));
        }
        let languages: Vec<String> = fields.map(str::to_string).collect();
        let n = languages.len();
        let mut cells = Vec::with_capacity(n * n);
        let mut rows = 0usize;
        for (idx, line) in lines {
            let line_no = idx + 1;
            let mut fields = line.split(',');
            let label = fields.next().unwrap_or_default();
            if rows >= n {
                return Err(malformed(
                    line_no,
                    format!("unexpected extra row {label:?}"),
                ));
            }
            if label != languages[rows] {
                return Err(malformed(
                    line_no,
                    format!(
                        "row label {label:?} does not match header language {:?}",
                        languages[rows]
                    ),
                ));
            }
            let mut count = 0usize;
            for field in fields {
                let value: f64 = field
                    .parse()
                    .map_err(|e| malformed(line_no, format!("bad cell {field:?}: {e}")))?;
                cells.push(value);
                count += 1;
            }
            if count != n {
                return Err(malformed(
                    line_no,
                    format!("expected {n} cells, got {count}"),
                ));
            }
            rows += 1;
        }
        if rows != n {
            return Err(malformed(
                rows + 1,
                format!("expected {n} rows, got {rows}"),
            ));
        }
        Self::from_cells(languages, cells)
    }
}

/// Donor and receiver rankings as one TSV with a role column; ranks are
/// 1-based within each role.
pub fn render_rankings_tsv(donors: &[(String, f64)], receivers: &[(String, f64)]) -> String {
    let mut out = String::from("role\trank\tlocale\tscore\n");
    for (role, rows) in [("donor", donors), ("receiver", receivers)] {
        for (rank, (locale, score)) in rows.iter().enumerate() {
            out.push_str(&format!("{role}\t{}\t{locale}\t{score}\n", rank + 1));
        }
    }
    out
}
