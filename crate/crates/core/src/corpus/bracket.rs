//! Inline bracket annotation: `get [1 zelda ]`.
//!
//! A slot opens with a token `[<digits>`, contains one or more value tokens and
//! closes with a standalone `]`. Nesting is not allowed and value tokens may not
//! contain `[` or `]`.

use thiserror::Error;

use super::{AnnotatedUtterance, SlotSpan};
use crate::prompt::LabelMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BracketErrorKind {
    MalformedBrackets,
    UnknownSlotNumber(u32),
    EmptySlot,
    MissingLabel(String),
    UnrenderableToken,
}

impl BracketErrorKind {
    pub fn code(&self) -> &'static str {
        match self {
            BracketErrorKind::MalformedBrackets => "malformed_brackets",
            BracketErrorKind::UnknownSlotNumber(_) => "unknown_slot_number",
            BracketErrorKind::EmptySlot => "empty_slot",
            BracketErrorKind::MissingLabel(_) => "missing_label",
            BracketErrorKind::UnrenderableToken => "unrenderable_token",
        }
    }
}

/// A bracket parse or render failure at token position `token`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{} at token {token}", kind.code())]
pub struct BracketError {
    pub kind: BracketErrorKind,
    pub token: usize,
}

impl BracketError {
    fn new(kind: BracketErrorKind, token: usize) -> Self {
        Self { kind, token }
    }
}

/// A slot whose type is still a bracket number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NumberedSpan {
    pub number: u32,
    pub start: usize,
    pub end: usize,
}

/// Bracket text split into plain tokens and numbered spans.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedBracket {
    pub tokens: Vec<String>,
    pub spans: Vec<NumberedSpan>,
}

impl ParsedBracket {
    pub fn span_tokens(&self, span: &NumberedSpan) -> &[String] {
        &self.tokens[span.start..span.end]
    }

    /// Tokens outside any slot.
    pub fn carrier_tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cursor = 0;
        for s in &self.spans {
            out.extend(self.tokens[cursor..s.start].iter().map(String::as_str));
            cursor = s.end;
        }
        out.extend(self.tokens[cursor..].iter().map(String::as_str));
        out
    }
}

fn opening_number(token: &str) -> Option<Result<u32, ()>> {
    let rest = token.strip_prefix('[')?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return Some(Err(()));
    }
    Some(rest.parse::<u32>().map_err(|_| ()))
}

/// Parses bracket text without resolving slot numbers.
pub fn parse_bracket(text: &str) -> Result<ParsedBracket, BracketError> {
    let mut out = ParsedBracket::default();
    let mut open: Option<(u32, usize)> = None;
    for (i, raw) in text.split_whitespace().enumerate() {
        if let Some(number) = opening_number(raw) {
            let number = number.map_err(|_| BracketError::new(BracketErrorKind::MalformedBrackets, i))?;
            if open.is_some() {
                return Err(BracketError::new(BracketErrorKind::MalformedBrackets, i));
            }
            open = Some((number, out.tokens.len()));
        } else if raw == "]" {
            let (number, start) =
                open.take().ok_or_else(|| BracketError::new(BracketErrorKind::MalformedBrackets, i))?;
            if start == out.tokens.len() {
                return Err(BracketError::new(BracketErrorKind::EmptySlot, i));
            }
            out.spans.push(NumberedSpan {
                number,
                start,
                end: out.tokens.len(),
            });
        } else if raw.contains(['[', ']']) {
            return Err(BracketError::new(BracketErrorKind::MalformedBrackets, i));
        } else {
            out.tokens.push(raw.to_owned());
        }
    }
    if open.is_some() {
        let n = text.split_whitespace().count();
        return Err(BracketError::new(BracketErrorKind::MalformedBrackets, n));
    }
    Ok(out)
}

/// Parses bracket text and resolves slot numbers through `map`.
///
/// The returned utterance has empty intent and language; callers attach them
/// with [`AnnotatedUtterance::with_intent`] and
/// [`AnnotatedUtterance::with_language`].
pub fn bracket_to_spans(text: &str, map: &LabelMap) -> Result<AnnotatedUtterance, BracketError> {
    let parsed = parse_bracket(text)?;
    let mut spans = Vec::with_capacity(parsed.spans.len());
    for (i, s) in parsed.spans.iter().enumerate() {
        let label = map
            .label(s.number)
            .ok_or_else(|| BracketError::new(BracketErrorKind::UnknownSlotNumber(s.number), i))?;
        spans.push(SlotSpan::new(label, s.start, s.end));
    }
    // parse_bracket already guarantees sorted, disjoint, non-empty spans
    Ok(AnnotatedUtterance::new(parsed.tokens, spans, "", "").expect("bracket parse yields valid spans"))
}

/// Renders an utterance as bracket text, e.g. `get [1 zelda ]`.
pub fn spans_to_bracket(utt: &AnnotatedUtterance, map: &LabelMap) -> Result<String, BracketError> {
    let tokens = utt.tokens();
    if let Some(i) = tokens.iter().position(|t| t.contains(['[', ']'])) {
        return Err(BracketError::new(BracketErrorKind::UnrenderableToken, i));
    }
    let mut parts: Vec<String> = Vec::with_capacity(tokens.len() + 2 * utt.spans().len());
    let mut cursor = 0;
    for span in utt.spans() {
        let number = map.number(&span.label).ok_or_else(|| {
            BracketError::new(BracketErrorKind::MissingLabel(span.label.clone()), span.start)
        })?;
        parts.extend(tokens[cursor..span.start].iter().cloned());
        parts.push(format!("[{number}"));
        parts.extend(tokens[span.start..span.end].iter().cloned());
        parts.push("]".to_owned());
        cursor = span.end;
    }
    parts.extend(tokens[cursor..].iter().cloned());
    Ok(parts.join(" "))
}
