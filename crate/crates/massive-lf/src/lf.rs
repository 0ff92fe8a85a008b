//! Logical-form data model and its two wire formats.
//!
//! A logical form is flat: one intent at the root and a sequence of slots,
//! each slot a name plus the utterance text it covers. It travels either as
//! a compact bracketed string, `[IN:ALARM_SET [SL:TIME nueve ] ]`, or inline
//! inside the utterance itself, `despiértame a las [time : nueve]`.
//!
//! All character offsets in this crate count Unicode scalar values, never
//! bytes.

use std::fmt;

use thiserror::Error;

/// Half-open character range `[start, end)` into an utterance, counted in
/// Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// One slot of a logical form: a lowercase name, the text it captures, and
/// optionally where that text sits in the utterance.
///
/// Spans are present when the slot came from an annotated utterance and
/// absent when it came from a compact string alone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSpan {
    pub name: String,
    pub value: String,
    pub span: Option<Span>,
}

impl SlotSpan {
    /// A span-less slot. The name is lowercased and the value trimmed.
    pub fn new(name: &str, value: &str) -> Self {
        SlotSpan {
            name: name.to_lowercase(),
            value: value.trim().to_string(),
            span: None,
        }
    }

    pub fn with_span(name: &str, value: &str, span: Span) -> Self {
        SlotSpan {
            span: Some(span),
            ..SlotSpan::new(name, value)
        }
    }
}

/// A flat intent/slot logical form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalForm {
    pub intent: String,
    pub slots: Vec<SlotSpan>,
}

impl LogicalForm {
    pub fn new(intent: &str) -> Self {
        LogicalForm {
            intent: intent.to_lowercase(),
            slots: Vec::new(),
        }
    }

    pub fn with_slots(intent: &str, slots: Vec<SlotSpan>) -> Self {
        LogicalForm {
            intent: intent.to_lowercase(),
            slots,
        }
    }

    /// The same form with every slot span erased. Two forms that differ only
    /// in offsets compare equal after this.
    pub fn without_spans(&self) -> LogicalForm {
        LogicalForm {
            intent: self.intent.clone(),
            slots: self
                .slots
                .iter()
                .map(|s| SlotSpan {
                    name: s.name.clone(),
                    value: s.value.clone(),
                    span: None,
                })
                .collect(),
        }
    }

    pub fn to_compact(&self) -> CanonicalText {
        serialize_compact(self)
    }
}

/// A compact serialization produced by [`serialize_compact`].
///
/// The field is private so the only way to obtain one is through the
/// serializer; equal values therefore always denote identical forms, which
/// is what exact-match scoring compares.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CanonicalText(String);

impl CanonicalText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Display for CanonicalText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for CanonicalText {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LfParseError {
    #[error("unbalanced brackets in {0:?}")]
    UnbalancedBrackets(String),
    #[error("no [IN: root in {0:?}")]
    MissingIntentRoot(String),
    #[error("second intent opens at char {position}")]
    NestedIntent { position: usize },
    #[error("slot {slot:?} has an empty value")]
    EmptySlotValue { slot: String },
    #[error("unexpected token {token:?} at char {position}")]
    UnexpectedToken { position: usize, token: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnnotParseError {
    #[error("malformed annotation at char {position}: {reason}")]
    MalformedAnnotation { position: usize, reason: String },
    #[error("slot {slot:?} has an empty value")]
    EmptySlotValue { slot: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnnotWriteError {
    #[error("slot {slot:?} has no span")]
    MissingSpan { slot: String },
    #[error("slot {slot:?} span {span} does not fit an utterance of {utterance_len} chars")]
    SpanOutOfRange {
        slot: String,
        span: Span,
        utterance_len: usize,
    },
    #[error("slots {first:?} and {second:?} overlap")]
    OverlappingSpans { first: String, second: String },
    #[error("slot {slot:?} span holds {found:?}, expected {expected:?}")]
    SpanValueMismatch {
        slot: String,
        expected: String,
        found: String,
    },
}

struct Scanner {
    chars: Vec<char>,
    pos: usize,
}

impl Scanner {
    fn new(text: &str) -> Self {
        Scanner {
            chars: text.chars().collect(),
            pos: 0,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn starts_with(&self, s: &str) -> bool {
        s.chars()
            .zip(self.pos..)
            .all(|(want, i)| self.chars.get(i) == Some(&want))
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.starts_with(s) {
            self.pos += s.chars().count();
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    /// Characters up to the next whitespace or bracket.
    fn take_word(&mut self) -> String {
        let mut word = String::new();
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == '[' || c == ']' {
                break;
            }
            word.push(c);
            self.pos += 1;
        }
        word
    }

    /// The token at the cursor, for error reporting: a bracket or a word.
    fn token_here(&mut self) -> String {
        match self.peek() {
            Some(c @ ('[' | ']')) => c.to_string(),
            Some(_) => self.take_word(),
            None => String::new(),
        }
    }
}

fn parse_inner(text: &str, allow_empty_values: bool) -> Result<LogicalForm, LfParseError> {
    let mut sc = Scanner::new(text);
    sc.skip_ws();
    if !sc.eat("[IN:") {
        return Err(LfParseError::MissingIntentRoot(text.to_string()));
    }
    let intent = sc.take_word();
    if intent.is_empty() {
        return Err(LfParseError::MissingIntentRoot(text.to_string()));
    }
    let mut slots = Vec::new();
    loop {
        sc.skip_ws();
        match sc.peek() {
            None => return Err(LfParseError::UnbalancedBrackets(text.to_string())),
            Some(']') => {
                sc.bump();
                break;
            }
            Some('[') => {
                if sc.starts_with("[IN:") {
                    return Err(LfParseError::NestedIntent { position: sc.pos });
                }
                if !sc.eat("[SL:") {
                    return Err(LfParseError::UnbalancedBrackets(text.to_string()));
                }
                let name = sc.take_word();
                if name.is_empty() {
                    let position = sc.pos;
                    sc.skip_ws();
                    let token = sc.token_here();
                    return Err(LfParseError::UnexpectedToken { position, token });
                }
                sc.skip_ws();
                let mut value = String::new();
                loop {
                    match sc.peek() {
                        None => return Err(LfParseError::UnbalancedBrackets(text.to_string())),
                        Some(']') => {
                            sc.bump();
                            break;
                        }
                        Some('[') => {
                            if sc.starts_with("[IN:") {
                                return Err(LfParseError::NestedIntent { position: sc.pos });
                            }
                            return Err(LfParseError::UnbalancedBrackets(text.to_string()));
                        }
                        Some(c) => {
                            value.push(c);
                            sc.bump();
                        }
                    }
                }
                let value = value.trim_end();
                if value.is_empty() && !allow_empty_values {
                    return Err(LfParseError::EmptySlotValue {
                        slot: name.to_lowercase(),
                    });
                }
                slots.push(SlotSpan {
                    name: name.to_lowercase(),
                    value: value.to_string(),
                    span: None,
                });
            }
            Some(_) => {
                let position = sc.pos;
                let token = sc.take_word();
                return Err(LfParseError::UnexpectedToken { position, token });
            }
        }
    }
    sc.skip_ws();
    if !sc.at_end() {
        if sc.starts_with("[IN:") {
            return Err(LfParseError::NestedIntent { position: sc.pos });
        }
        return match sc.peek() {
            Some('[' | ']') => Err(LfParseError::UnbalancedBrackets(text.to_string())),
            _ => {
                let position = sc.pos;
                let token = sc.take_word();
                Err(LfParseError::UnexpectedToken { position, token })
            }
        };
    }
    Ok(LogicalForm {
        intent: intent.to_lowercase(),
        slots,
    })
}

/// Parses a compact bracketed string like
/// `[IN:ALARM_SET [SL:TIME nueve de la mañana ] [SL:DATE viernes ] ]`.
///
/// The grammar is flat: exactly one `[IN:` root, any number of `[SL:` children,
/// no nesting. Slot names and the intent are lowercased on the way in; slot
/// values keep interior whitespace but lose surrounding whitespace. The
/// resulting slots carry no spans.
pub fn parse_compact(text: &str) -> Result<LogicalForm, LfParseError> {
    parse_inner(text, false)
}

/// Like [`parse_compact`] but accepts empty slot values, which is how slot
/// signatures are written.
pub(crate) fn parse_compact_lenient(text: &str) -> Result<LogicalForm, LfParseError> {
    parse_inner(text, true)
}

/// Serializes a logical form to its canonical compact string.
///
/// Every slot is rendered as ` [SL:NAME value ]` in the order stored, the
/// intent and slot names uppercased, with single spaces as the only
/// separators: `[IN:ALARM_SET [SL:TIME nueve ] ]`. A slot-free form becomes
/// `[IN:NAME ]`. Parsing the output reproduces the form modulo spans.
pub fn serialize_compact(lf: &LogicalForm) -> CanonicalText {
    let mut out = String::from("[IN:");
    out.push_str(&lf.intent.to_uppercase());
    for slot in &lf.slots {
        out.push_str(" [SL:");
        out.push_str(&slot.name.to_uppercase());
        out.push(' ');
        out.push_str(&slot.value);
        out.push_str(" ]");
    }
    out.push_str(" ]");
    CanonicalText(out)
}

/// Parses an inline-annotated utterance like
/// `despiértame a las [time : nueve de la mañana] el [date : viernes]`.
///
/// Returns the recovered plain utterance (annotation markup stripped) and a
/// logical form whose slots carry spans into that utterance. The intent is
/// not part of the annotated text, so the caller supplies it.
pub fn parse_annot(
    annot_utt: &str,
    intent: &str,
) -> Result<(String, LogicalForm), AnnotParseError> {
    let chars: Vec<char> = annot_utt.chars().collect();
    let mut recovered = String::new();
    let mut recovered_len = 0usize;
    let mut slots = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '[' => {
                let open = i;
                i += 1;
                let mut body = String::new();
                loop {
                    match chars.get(i) {
                        None => {
                            return Err(AnnotParseError::MalformedAnnotation {
                                position: open,
                                reason: "unterminated annotation".to_string(),
                            })
                        }
                        Some(']') => {
                            i += 1;
                            break;
                        }
                        Some('[') => {
                            return Err(AnnotParseError::MalformedAnnotation {
                                position: i,
                                reason: "nested '['".to_string(),
                            })
                        }
                        Some(&c) => {
                            body.push(c);
                            i += 1;
                        }
                    }
                }
                let Some((name, value)) = body.split_once(" : ") else {
                    return Err(AnnotParseError::MalformedAnnotation {
                        position: open,
                        reason: "missing ' : ' separator".to_string(),
                    });
                };
                let name = name.trim();
                let value = value.trim();
                if name.is_empty() {
                    return Err(AnnotParseError::MalformedAnnotation {
                        position: open,
                        reason: "empty slot name".to_string(),
                    });
                }
                if value.is_empty() {
                    return Err(AnnotParseError::EmptySlotValue {
                        slot: name.to_lowercase(),
                    });
                }
                let start = recovered_len;
                let len = value.chars().count();
                recovered.push_str(value);
                recovered_len += len;
                slots.push(SlotSpan::with_span(
                    name,
                    value,
                    Span::new(start, start + len),
                ));
            }
            ']' => {
                return Err(AnnotParseError::MalformedAnnotation {
                    position: i,
                    reason: "unmatched ']'".to_string(),
                })
            }
            c => {
                recovered.push(c);
                recovered_len += 1;
                i += 1;
            }
        }
    }
    Ok((
        recovered,
        LogicalForm {
            intent: intent.to_lowercase(),
            slots,
        },
    ))
}

/// Writes a logical form back into its utterance as inline annotations.
///
/// Every slot must carry a span, spans must lie inside the utterance, must
/// not overlap, and the text under each span must equal the slot value.
/// Slots are emitted in span order regardless of their order in the form.
pub fn serialize_annot(lf: &LogicalForm, utterance: &str) -> Result<String, AnnotWriteError> {
    let chars: Vec<char> = utterance.chars().collect();
    let mut ordered: Vec<&SlotSpan> = Vec::with_capacity(lf.slots.len());
    for slot in &lf.slots {
        if slot.span.is_none() {
            return Err(AnnotWriteError::MissingSpan {
                slot: slot.name.clone(),
            });
        }
        ordered.push(slot);
    }
    ordered.sort_by_key(|s| s.span.expect("checked above").start);

    let mut out = String::new();
    let mut cursor = 0usize;
    let mut prev: Option<&SlotSpan> = None;
    for slot in ordered {
        let span = slot.span.expect("checked above");
        if span.is_empty() || span.end > chars.len() {
            return Err(AnnotWriteError::SpanOutOfRange {
                slot: slot.name.clone(),
                span,
                utterance_len: chars.len(),
            });
        }
        if let Some(p) = prev {
            if span.start < p.span.expect("sorted slots have spans").end {
                return Err(AnnotWriteError::OverlappingSpans {
                    first: p.name.clone(),
                    second: slot.name.clone(),
                });
            }
        }
        let found: String = chars[span.start..span.end].iter().collect();
        if found != slot.value {
            return Err(AnnotWriteError::SpanValueMismatch {
                slot: slot.name.clone(),
                expected: slot.value.clone(),
                found,
            });
        }
        out.extend(&chars[cursor..span.start]);
        out.push('[');
        out.push_str(&slot.name.to_lowercase());
        out.push_str(" : ");
        out.push_str(&slot.value);
        out.push(']');
        cursor = span.end;
        prev = Some(slot);
    }
    out.extend(&chars[cursor..]);
    Ok(out)
}
