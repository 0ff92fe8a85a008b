//! Compiles the guide's code samples as doc-tests so book and library
//! cannot drift apart. Built only under `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[doc = include_str!("../../../book/src/logical-forms.md")]
mod logical_forms {}

#[doc = include_str!("../../../book/src/conversion.md")]
mod conversion {}

#[doc = include_str!("../../../book/src/translate-and-fill.md")]
mod translate_and_fill {}

#[doc = include_str!("../../../book/src/evaluation.md")]
mod evaluation {}

#[doc = include_str!("../../../book/src/transfer.md")]
mod transfer {}

#[doc = include_str!("../../../book/src/nmt-matching.md")]
mod nmt_matching {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}

#[doc = include_str!("../../../book/src/file-formats.md")]
mod file_formats {}
