//! BIO tagging: `B-<label>` opens a chunk, `I-<label>` continues it, `O` is
//! outside any chunk.

use thiserror::Error;

use super::{AnnotatedUtterance, SlotSpan};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BioError {
    #[error("invalid tag {tag:?} at position {index}")]
    InvalidTag { index: usize, tag: String },
    #[error("token at position {index} is empty or contains whitespace")]
    BadToken { index: usize },
}

impl BioError {
    pub fn code(&self) -> &'static str {
        match self {
            BioError::InvalidTag { .. } => "invalid_tag",
            BioError::BadToken { .. } => "bad_token",
        }
    }
}

/// An `I-` tag that did not continue a chunk of the same label and was treated
/// as the start of a new chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BioWarning {
    pub index: usize,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BioDecoded {
    pub utterance: AnnotatedUtterance,
    pub warnings: Vec<BioWarning>,
}

pub fn spans_to_bio(utt: &AnnotatedUtterance) -> Vec<(String, String)> {
    let mut tags = vec!["O".to_owned(); utt.tokens().len()];
    for span in utt.spans() {
        tags[span.start] = format!("B-{}", span.label);
        for t in &mut tags[span.start + 1..span.end] {
            *t = format!("I-{}", span.label);
        }
    }
    utt.tokens().iter().cloned().zip(tags).collect()
}

enum Tag<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

fn parse_tag(tag: &str) -> Option<Tag<'_>> {
    if tag == "O" {
        return Some(Tag::Outside);
    }
    let (kind, label) = tag.split_once('-')?;
    if label.is_empty() {
        return None;
    }
    match kind {
        "B" => Some(Tag::Begin(label)),
        "I" => Some(Tag::Inside(label)),
        _ => None,
    }
}

/// Decodes `(token, tag)` pairs. Intent and language of the returned utterance
/// are empty.
pub fn bio_to_spans<T, G>(pairs: &[(T, G)]) -> Result<BioDecoded, BioError>
where
    T: AsRef<str>,
    G: AsRef<str>,
{
    let mut tokens = Vec::with_capacity(pairs.len());
    let mut spans: Vec<SlotSpan> = Vec::new();
    let mut warnings = Vec::new();
    let mut open: Option<(String, usize)> = None;

    for (index, (tok, tag)) in pairs.iter().enumerate() {
        let tok = tok.as_ref();
        if tok.is_empty() || tok.chars().any(char::is_whitespace) {
            return Err(BioError::BadToken { index });
        }
        tokens.push(tok.to_owned());
        let tag = tag.as_ref();
        let parsed = parse_tag(tag).ok_or_else(|| BioError::InvalidTag {
            index,
            tag: tag.to_owned(),
        })?;
        match parsed {
            Tag::Outside => {
                if let Some((label, start)) = open.take() {
                    spans.push(SlotSpan::new(label, start, index));
                }
            }
            Tag::Begin(label) => {
                if let Some((prev, start)) = open.take() {
                    spans.push(SlotSpan::new(prev, start, index));
                }
                open = Some((label.to_owned(), index));
            }
            Tag::Inside(label) => match &open {
                Some((prev, _)) if prev == label => {}
                _ => {
                    if let Some((prev, start)) = open.take() {
                        spans.push(SlotSpan::new(prev, start, index));
                    }
                    warnings.push(BioWarning {
                        index,
                        tag: tag.to_owned(),
                    });
                    open = Some((label.to_owned(), index));
                }
            },
        }
    }
    if let Some((label, start)) = open.take() {
        spans.push(SlotSpan::new(label, start, tokens.len()));
    }
    let utterance =
        AnnotatedUtterance::new(tokens, spans, "", "").expect("BIO decoding yields valid spans");
    Ok(BioDecoded {
        utterance,
        warnings,
    })
}
