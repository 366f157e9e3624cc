//! Annotated utterances and the conversions between span, bracket-text and
//! BIO representations.
//!
//! Tokens are whitespace-delimited surface strings. A [`SlotSpan`] covers the
//! half-open token range `start..end`. Spans inside one utterance never overlap
//! and are kept sorted by start index.

mod bio;
mod bracket;
mod io;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bio::{bio_to_spans, spans_to_bio, BioDecoded, BioError, BioWarning};
pub use bracket::{
    bracket_to_spans, parse_bracket, spans_to_bracket, BracketError, BracketErrorKind, NumberedSpan,
    ParsedBracket,
};
pub use io::{load_corpus, read_jsonl_utterances, write_jsonl_utterances, CorpusFormat, LoadError};

/// Where an utterance came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    #[default]
    Original,
    Upsampled,
    Generated,
    CopiedForBalance,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provenance::Original => "original",
            Provenance::Upsampled => "upsampled",
            Provenance::Generated => "generated",
            Provenance::CopiedForBalance => "copied-for-balance",
        };
        f.write_str(s)
    }
}

/// A typed slot over the token range `start..end`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotSpan {
    pub label: String,
    pub start: usize,
    pub end: usize,
}

impl SlotSpan {
    pub fn new(label: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            label: label.into(),
            start,
            end,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Why an utterance failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UtteranceError {
    #[error("token {index} is empty or contains whitespace")]
    BadToken { index: usize },
    #[error("span {index} has an empty label")]
    EmptyLabel { index: usize },
    #[error("span {index} ({start}..{end}) covers no tokens")]
    EmptySpan { index: usize, start: usize, end: usize },
    #[error("span {index} ({start}..{end}) exceeds token count {len}")]
    SpanOutOfRange {
        index: usize,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("span {index} overlaps the previous span")]
    Overlap { index: usize },
    #[error("span {index} is not sorted by start index")]
    Unsorted { index: usize },
}

impl UtteranceError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            UtteranceError::BadToken { .. } => "bad_token",
            UtteranceError::EmptyLabel { .. } => "empty_label",
            UtteranceError::EmptySpan { .. } => "empty_span",
            UtteranceError::SpanOutOfRange { .. } => "span_out_of_range",
            UtteranceError::Overlap { .. } => "overlapping_spans",
            UtteranceError::Unsorted { .. } => "unsorted_spans",
        }
    }
}

/// Checks the token/span invariants shared by every annotated representation.
pub fn validate_annotation(tokens: &[String], spans: &[SlotSpan]) -> Result<(), UtteranceError> {
    for (index, tok) in tokens.iter().enumerate() {
        if tok.is_empty() || tok.chars().any(char::is_whitespace) {
            return Err(UtteranceError::BadToken { index });
        }
    }
    let mut prev_end = 0usize;
    let mut prev_start = 0usize;
    for (index, span) in spans.iter().enumerate() {
        if span.label.is_empty() {
            return Err(UtteranceError::EmptyLabel { index });
        }
        if span.start >= span.end {
            return Err(UtteranceError::EmptySpan {
                index,
                start: span.start,
                end: span.end,
            });
        }
        if span.end > tokens.len() {
            return Err(UtteranceError::SpanOutOfRange {
                index,
                start: span.start,
                end: span.end,
                len: tokens.len(),
            });
        }
        if index > 0 {
            if span.start < prev_start {
                return Err(UtteranceError::Unsorted { index });
            }
            if span.start < prev_end {
                return Err(UtteranceError::Overlap { index });
            }
        }
        prev_start = span.start;
        prev_end = span.end;
    }
    Ok(())
}

/// A tokenized utterance with intent and slot annotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "UtteranceRecord", into = "UtteranceRecord")]
pub struct AnnotatedUtterance {
    tokens: Vec<String>,
    spans: Vec<SlotSpan>,
    intent: String,
    language: String,
    domain: Option<String>,
    provenance: Provenance,
}

impl AnnotatedUtterance {
    pub fn new(
        tokens: Vec<String>,
        spans: Vec<SlotSpan>,
        intent: impl Into<String>,
        language: impl Into<String>,
    ) -> Result<Self, UtteranceError> {
        validate_annotation(&tokens, &spans)?;
        Ok(Self {
            tokens,
            spans,
            intent: intent.into(),
            language: language.into(),
            domain: None,
            provenance: Provenance::Original,
        })
    }

    /// Splits `text` on whitespace and attaches no spans.
    pub fn plain(text: &str, intent: impl Into<String>, language: impl Into<String>) -> Self {
        let tokens = text.split_whitespace().map(str::to_owned).collect();
        Self {
            tokens,
            spans: Vec::new(),
            intent: intent.into(),
            language: language.into(),
            domain: None,
            provenance: Provenance::Original,
        }
    }

    pub fn with_domain(mut self, domain: Option<String>) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn with_intent(mut self, intent: impl Into<String>) -> Self {
        self.intent = intent.into();
        self
    }

    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.language = language.into();
        self
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn spans(&self) -> &[SlotSpan] {
        &self.spans
    }

    pub fn intent(&self) -> &str {
        &self.intent
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn domain(&self) -> Option<&str> {
        self.domain.as_deref()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Tokens covered by `span`.
    pub fn span_tokens(&self, span: &SlotSpan) -> &[String] {
        &self.tokens[span.start..span.end]
    }

    /// Surface text with single-space separation.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    /// `(label, value tokens)` for every span, in span order.
    pub fn slot_values(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.spans
            .iter()
            .map(move |s| (s.label.as_str(), &self.tokens[s.start..s.end]))
    }

    /// Identity key ignoring language, domain and provenance.
    pub fn content_key(&self) -> (&str, &[String], &[SlotSpan]) {
        (&self.intent, &self.tokens, &self.spans)
    }

    /// Rebuilds the utterance with slot values replaced. `values[i]` replaces
    /// the value of span `i`; `None` keeps the original tokens.
    pub fn replace_values(&self, values: &[Option<Vec<String>>]) -> Result<Self, UtteranceError> {
        assert_eq!(values.len(), self.spans.len());
        let mut tokens = Vec::with_capacity(self.tokens.len());
        let mut spans = Vec::with_capacity(self.spans.len());
        let mut cursor = 0;
        for (span, value) in self.spans.iter().zip(values) {
            tokens.extend_from_slice(&self.tokens[cursor..span.start]);
            let start = tokens.len();
            match value {
                Some(v) => tokens.extend(v.iter().cloned()),
                None => tokens.extend_from_slice(&self.tokens[span.start..span.end]),
            }
            spans.push(SlotSpan::new(span.label.clone(), start, tokens.len()));
            cursor = span.end;
        }
        tokens.extend_from_slice(&self.tokens[cursor..]);
        validate_annotation(&tokens, &spans)?;
        Ok(Self {
            tokens,
            spans,
            ..self.clone()
        })
    }
}

/// On-disk JSONL schema for one utterance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub tokens: Vec<String>,
    #[serde(default)]
    pub spans: Vec<SlotSpan>,
    pub intent: String,
    pub language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl TryFrom<UtteranceRecord> for AnnotatedUtterance {
    type Error = UtteranceError;

    fn try_from(r: UtteranceRecord) -> Result<Self, Self::Error> {
        Ok(AnnotatedUtterance::new(r.tokens, r.spans, r.intent, r.language)?
            .with_domain(r.domain)
            .with_provenance(r.provenance))
    }
}

impl From<AnnotatedUtterance> for UtteranceRecord {
    fn from(u: AnnotatedUtterance) -> Self {
        UtteranceRecord {
            tokens: u.tokens,
            spans: u.spans,
            intent: u.intent,
            language: u.language,
            domain: u.domain,
            provenance: u.provenance,
        }
    }
}

/// An ordered, index-addressable collection of utterances. Row ids are 0-based
/// positions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    utterances: Vec<AnnotatedUtterance>,
}

impl Corpus {
    pub fn new(utterances: Vec<AnnotatedUtterance>) -> Self {
        Self { utterances }
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn get(&self, row: usize) -> Option<&AnnotatedUtterance> {
        self.utterances.get(row)
    }

    pub fn utterances(&self) -> &[AnnotatedUtterance] {
        &self.utterances
    }

    pub fn into_utterances(self) -> Vec<AnnotatedUtterance> {
        self.utterances
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AnnotatedUtterance> {
        self.utterances.iter()
    }

    /// Intents in order of first appearance.
    pub fn intents(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for u in &self.utterances {
            if seen.insert(u.intent()) {
                out.push(u.intent());
            }
        }
        out
    }

    /// Row ids carrying `intent`, ascending.
    pub fn rows_for_intent(&self, intent: &str) -> Vec<usize> {
        self.utterances
            .iter()
            .enumerate()
            .filter(|(_, u)| u.intent() == intent)
            .map(|(i, _)| i)
            .collect()
    }

    /// Slot labels of `intent` in order of first appearance (row order, then
    /// span order).
    pub fn slot_labels(&self, intent: &str) -> Vec<String> {
        labels_in_order(self.utterances.iter().filter(|u| u.intent() == intent))
    }

    /// Per-intent slot label lists, keyed by intent.
    pub fn slot_labels_by_intent(&self) -> HashMap<String, Vec<String>> {
        self.intents()
            .into_iter()
            .map(|i| (i.to_owned(), self.slot_labels(i)))
            .collect()
    }
}

impl FromIterator<AnnotatedUtterance> for Corpus {
    fn from_iter<T: IntoIterator<Item = AnnotatedUtterance>>(iter: T) -> Self {
        Corpus::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a AnnotatedUtterance;
    type IntoIter = std::slice::Iter<'a, AnnotatedUtterance>;

    fn into_iter(self) -> Self::IntoIter {
        self.utterances.iter()
    }
}

/// Distinct slot labels in first-appearance order.
pub fn labels_in_order<'a>(utts: impl IntoIterator<Item = &'a AnnotatedUtterance>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for u in utts {
        for s in u.spans() {
            if seen.insert(s.label.as_str()) {
                out.push(s.label.clone());
            }
        }
    }
    out
}
