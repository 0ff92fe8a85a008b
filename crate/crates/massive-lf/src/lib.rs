//! Parsing, canonicalization, and evaluation for multilingual semantic-parsing
//! corpora that pair natural-language utterances with flat intent/slot logical
//! forms.
//!
//! The crate covers the full round trip:
//!
//! * [`lf`] parses and serializes the two on-disk shapes of a logical form,
//!   the compact bracketed string and the inline-annotated utterance.
//! * [`convert`] moves whole datasets between those shapes.
//! * [`taf`] canonicalizes noisy machine-produced logical forms (slot reorder
//!   plus token-boundary snapping) and projects translated corpora into
//!   synthetic training data.
//! * [`metrics`] scores predictions against gold with intent-accuracy and
//!   exact-match, broken down per locale, per intent, and by localization.
//! * [`transfer`] assembles cross-lingual score matrices and ranks languages
//!   as donors and receivers.
//! * [`nmt_match`] measures how often machine translations reproduce gold
//!   utterances verbatim under configurable normalization.
//! * [`io`] reads and writes the JSONL dataset files and report formats that
//!   tie everything together.

pub mod convert;
pub mod io;
pub mod lf;
pub mod metrics;
pub mod nmt_match;
pub mod taf;
pub mod transfer;

#[cfg(doctest)]
mod book;
