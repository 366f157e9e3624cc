//! The instruction-prompt grammar.
//!
//! A prompt is a single line of whitespace-separated tokens organised in
//! blocks, always in this order:
//!
//! ```text
//! <language> English </language> [<domain> travelinfo </domain>]
//! <intent> GetWeather </intent>
//! <include> [1 * ] , [3 snow ] </include>
//! <labels> [1=geographic_poi , [2=country , [3=condition_description </labels>
//! <examples> will it [3 rain ] at [1 Disneyworld ] <br> ... </examples>
//! ```
//!
//! [`render_prompt`] produces the canonical form and [`parse_prompt`] inverts
//! it exactly.

mod labels;
mod training;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{parse_bracket, BracketErrorKind};

pub use labels::{LabelMap, LabelMapError};
pub use training::{
    apply_label_dropout, assign_wildcards, build_training_pairs, dedup_corpus, random_mask,
    sample_examples, write_training_pairs, FormatConfig, FormatConfigError, PairMetadata,
    PairRecord, TrainingPair,
};

/// Upper bound on the number of examples a prompt may carry.
pub const MAX_EXAMPLES: usize = 10;
/// The include-block token asking the generator to invent a value.
pub const WILDCARD: &str = "*";

const BLOCKS: [&str; 6] = ["language", "domain", "intent", "include", "labels", "examples"];
const SEPARATOR: &str = ",";
const EXAMPLE_BREAK: &str = "<br>";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IncludeValue {
    Wildcard,
    Explicit(Vec<String>),
}

/// One `[n value ]` item of the include block.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IncludeItem {
    pub number: u32,
    pub value: IncludeValue,
}

impl IncludeItem {
    pub fn wildcard(number: u32) -> Self {
        Self {
            number,
            value: IncludeValue::Wildcard,
        }
    }

    pub fn explicit<S: Into<String>>(number: u32, tokens: impl IntoIterator<Item = S>) -> Self {
        Self {
            number,
            value: IncludeValue::Explicit(tokens.into_iter().map(Into::into).collect()),
        }
    }

    pub fn is_wildcard(&self) -> bool {
        matches!(self.value, IncludeValue::Wildcard)
    }

    fn render_into(&self, out: &mut Vec<String>) {
        out.push(format!("[{}", self.number));
        match &self.value {
            IncludeValue::Wildcard => out.push(WILDCARD.to_owned()),
            IncludeValue::Explicit(v) => out.extend(v.iter().cloned()),
        }
        out.push("]".to_owned());
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PromptErrorKind {
    MissingBlock(&'static str),
    DuplicateBlock(&'static str),
    UnclosedBlock(&'static str),
    BlockOrder(&'static str),
    UnexpectedToken(String),
    EmptyField(&'static str),
    InvalidText(&'static str),
    MalformedLabelEntry,
    MalformedIncludeItem,
    Labels(LabelMapError),
    TooManyExamples(usize),
    DuplicateExample(usize),
    EmptyExample(usize),
    MalformedExample { example: usize, reason: BracketErrorKind },
    UnknownSlotNumber(u32),
}

impl PromptErrorKind {
    pub fn code(&self) -> &'static str {
        use PromptErrorKind::*;
        match self {
            MissingBlock(_) => "missing_block",
            DuplicateBlock(_) => "duplicate_block",
            UnclosedBlock(_) => "unclosed_block",
            BlockOrder(_) => "block_order",
            UnexpectedToken(_) => "unexpected_token",
            EmptyField(_) => "empty_field",
            InvalidText(_) => "invalid_text",
            MalformedLabelEntry => "malformed_label_entry",
            MalformedIncludeItem => "malformed_include_item",
            Labels(_) => "invalid_labels",
            TooManyExamples(_) => "too_many_examples",
            DuplicateExample(_) => "duplicate_example",
            EmptyExample(_) => "empty_example",
            MalformedExample { .. } => "malformed_example",
            UnknownSlotNumber(_) => "unknown_slot_number",
        }
    }
}

/// A prompt validation failure. Parse errors carry the byte offset of the
/// first violation.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}{}: {kind:?}", kind.code(), offset.map(|o| format!(" at byte {o}")).unwrap_or_default())]
pub struct PromptError {
    pub kind: PromptErrorKind,
    pub offset: Option<usize>,
}

impl PromptError {
    fn new(kind: PromptErrorKind) -> Self {
        Self { kind, offset: None }
    }

    fn at(kind: PromptErrorKind, offset: usize) -> Self {
        Self {
            kind,
            offset: Some(offset),
        }
    }
}

impl From<PromptErrorKind> for PromptError {
    fn from(kind: PromptErrorKind) -> Self {
        PromptError::new(kind)
    }
}

/// A validated instruction prompt.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Prompt {
    language: String,
    domain: Option<String>,
    intent: String,
    include: Vec<IncludeItem>,
    labels: LabelMap,
    examples: Vec<String>,
}

fn is_tag_like(tok: &str) -> bool {
    tok.starts_with('<') && tok.ends_with('>') && tok.len() >= 2
}

fn normalize_field(value: &str, field: &'static str) -> Result<String, PromptError> {
    let toks: Vec<&str> = value.split_whitespace().collect();
    if toks.is_empty() {
        return Err(PromptErrorKind::EmptyField(field).into());
    }
    if toks.iter().any(|t| is_tag_like(t)) {
        return Err(PromptErrorKind::InvalidText(field).into());
    }
    Ok(toks.join(" "))
}

impl Prompt {
    pub fn new(
        language: &str,
        domain: Option<&str>,
        intent: &str,
        include: Vec<IncludeItem>,
        labels: LabelMap,
        examples: Vec<String>,
    ) -> Result<Self, PromptError> {
        let language = normalize_field(language, "language")?;
        let domain = domain.map(|d| normalize_field(d, "domain")).transpose()?;
        let intent = normalize_field(intent, "intent")?;

        for item in &include {
            if !labels.contains_number(item.number) {
                return Err(PromptErrorKind::UnknownSlotNumber(item.number).into());
            }
            if let IncludeValue::Explicit(v) = &item.value {
                let bad_token = v
                    .iter()
                    .any(|t| t.is_empty() || t.chars().any(|c| c.is_whitespace() || c == '[' || c == ']'));
                let bad = v.is_empty() || bad_token || (v.len() == 1 && v[0] == WILDCARD);
                if bad {
                    return Err(PromptErrorKind::MalformedIncludeItem.into());
                }
            }
        }

        if examples.len() > MAX_EXAMPLES {
            return Err(PromptErrorKind::TooManyExamples(examples.len()).into());
        }
        let mut seen = HashSet::new();
        let mut normalized = Vec::with_capacity(examples.len());
        for (i, ex) in examples.iter().enumerate() {
            let toks: Vec<&str> = ex.split_whitespace().collect();
            if toks.is_empty() {
                return Err(PromptErrorKind::EmptyExample(i).into());
            }
            if toks.iter().any(|t| is_tag_like(t)) {
                return Err(PromptErrorKind::InvalidText("examples").into());
            }
            let text = toks.join(" ");
            let parsed = parse_bracket(&text).map_err(|e| PromptErrorKind::MalformedExample {
                example: i,
                reason: e.kind,
            })?;
            if let Some(s) = parsed.spans.iter().find(|s| !labels.contains_number(s.number)) {
                return Err(PromptErrorKind::UnknownSlotNumber(s.number).into());
            }
            if !seen.insert(text.clone()) {
                return Err(PromptErrorKind::DuplicateExample(i).into());
            }
            normalized.push(text);
        }

        Ok(Self {
            language,
            domain,
            intent,
            include,
            labels,
            examples: normalized,
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn domain(&self) -> Option<&str> {
        self.domain.as_deref()
    }

    pub fn intent(&self) -> &str {
        &self.intent
    }

    pub fn include(&self) -> &[IncludeItem] {
        &self.include
    }

    pub fn labels(&self) -> &LabelMap {
        &self.labels
    }

    pub fn examples(&self) -> &[String] {
        &self.examples
    }

    /// Same prompt with a different include block.
    pub fn with_include(&self, include: Vec<IncludeItem>) -> Result<Self, PromptError> {
        Prompt::new(
            &self.language,
            self.domain.as_deref(),
            &self.intent,
            include,
            self.labels.clone(),
            self.examples.clone(),
        )
    }

    pub fn render(&self) -> String {
        render_prompt(self)
    }
}

/// Canonical single-line serialization.
pub fn render_prompt(p: &Prompt) -> String {
    let mut out: Vec<String> = Vec::new();
    let block = |name: &str, body: Vec<String>, out: &mut Vec<String>| {
        out.push(format!("<{name}>"));
        out.extend(body);
        out.push(format!("</{name}>"));
    };
    block("language", vec![p.language.clone()], &mut out);
    if let Some(d) = &p.domain {
        block("domain", vec![d.clone()], &mut out);
    }
    block("intent", vec![p.intent.clone()], &mut out);

    let mut include = Vec::new();
    for (i, item) in p.include.iter().enumerate() {
        if i > 0 {
            include.push(SEPARATOR.to_owned());
        }
        item.render_into(&mut include);
    }
    block("include", include, &mut out);

    let labels = p
        .labels
        .iter()
        .map(|(n, l)| format!("[{n}={l}"))
        .collect::<Vec<_>>()
        .join(&format!(" {SEPARATOR} "));
    block(
        "labels",
        if labels.is_empty() { vec![] } else { vec![labels] },
        &mut out,
    );

    let examples = p.examples.join(&format!(" {EXAMPLE_BREAK} "));
    block(
        "examples",
        if examples.is_empty() { vec![] } else { vec![examples] },
        &mut out,
    );
    out.join(" ")
}

struct Tok<'a> {
    text: &'a str,
    offset: usize,
}

fn tokenize(text: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Tok {
                    text: &text[s..i],
                    offset: s,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Tok {
            text: &text[s..],
            offset: s,
        });
    }
    out
}

fn opening_block(tok: &str) -> Option<usize> {
    BLOCKS.iter().position(|b| {
        tok.len() == b.len() + 2 && tok.starts_with('<') && tok.ends_with('>') && &tok[1..tok.len() - 1] == *b
    })
}

fn closing_block(tok: &str) -> Option<usize> {
    BLOCKS.iter().position(|b| {
        tok.len() == b.len() + 3 && tok.starts_with("</") && tok.ends_with('>') && &tok[2..tok.len() - 1] == *b
    })
}

struct Block<'t, 'a> {
    open_offset: usize,
    body: &'t [Tok<'a>],
}

fn join(body: &[Tok<'_>]) -> String {
    body.iter().map(|t| t.text).collect::<Vec<_>>().join(" ")
}

fn field_from(body: &[Tok<'_>], name: &'static str, open: usize) -> Result<String, PromptError> {
    if body.is_empty() {
        return Err(PromptError::at(PromptErrorKind::EmptyField(name), open));
    }
    if let Some(t) = body.iter().find(|t| is_tag_like(t.text)) {
        return Err(PromptError::at(PromptErrorKind::InvalidText(name), t.offset));
    }
    Ok(join(body))
}

fn parse_labels(body: &[Tok<'_>], open: usize) -> Result<LabelMap, PromptError> {
    let mut entries = Vec::new();
    let mut expect_entry = true;
    for t in body {
        if expect_entry {
            let entry = t
                .text
                .strip_prefix('[')
                .and_then(|r| r.split_once('='))
                .and_then(|(n, l)| {
                    let digits_ok = !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit());
                    let number = if digits_ok { n.parse::<u32>().ok() } else { None };
                    number.filter(|_| labels::valid_label(l)).map(|n| (n, l.to_owned()))
                })
                .ok_or_else(|| PromptError::at(PromptErrorKind::MalformedLabelEntry, t.offset))?;
            entries.push(entry);
            expect_entry = false;
        } else if t.text == SEPARATOR {
            expect_entry = true;
        } else {
            return Err(PromptError::at(PromptErrorKind::MalformedLabelEntry, t.offset));
        }
    }
    if expect_entry && !body.is_empty() {
        let last = body.last().expect("non-empty");
        return Err(PromptError::at(PromptErrorKind::MalformedLabelEntry, last.offset));
    }
    LabelMap::new(entries).map_err(|e| PromptError::at(PromptErrorKind::Labels(e), open))
}

fn parse_include(body: &[Tok<'_>]) -> Result<Vec<(IncludeItem, usize)>, PromptError> {
    let mut items = Vec::new();
    let mut i = 0;
    while i < body.len() {
        let open = &body[i];
        let malformed = |offset| PromptError::at(PromptErrorKind::MalformedIncludeItem, offset);
        let number = open
            .text
            .strip_prefix('[')
            .filter(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|n| n.parse::<u32>().ok())
            .ok_or_else(|| malformed(open.offset))?;
        i += 1;
        let mut value = Vec::new();
        loop {
            let t = body.get(i).ok_or_else(|| malformed(open.offset))?;
            i += 1;
            if t.text == "]" {
                break;
            }
            if t.text.contains(['[', ']']) {
                return Err(malformed(t.offset));
            }
            value.push(t.text.to_owned());
        }
        let value = match value.as_slice() {
            [] => return Err(malformed(open.offset)),
            [w] if w == WILDCARD => IncludeValue::Wildcard,
            _ => IncludeValue::Explicit(value),
        };
        items.push((IncludeItem { number, value }, open.offset));
        if let Some(t) = body.get(i) {
            if t.text != SEPARATOR {
                return Err(malformed(t.offset));
            }
            i += 1;
            if i == body.len() {
                return Err(malformed(t.offset));
            }
        }
    }
    Ok(items)
}

fn parse_examples(body: &[Tok<'_>], open: usize) -> Result<Vec<(String, usize)>, PromptError> {
    if body.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (i, seg) in body.split(|t| t.text == EXAMPLE_BREAK).enumerate() {
        let offset = seg.first().map(|t| t.offset).unwrap_or(open);
        if seg.is_empty() {
            return Err(PromptError::at(PromptErrorKind::EmptyExample(i), offset));
        }
        if i == MAX_EXAMPLES {
            return Err(PromptError::at(
                PromptErrorKind::TooManyExamples(body.split(|t| t.text == EXAMPLE_BREAK).count()),
                offset,
            ));
        }
        if let Some(t) = seg.iter().find(|t| is_tag_like(t.text)) {
            return Err(PromptError::at(PromptErrorKind::InvalidText("examples"), t.offset));
        }
        out.push((join(seg), offset));
    }
    Ok(out)
}

/// Parses canonical (or whitespace-variant) prompt text.
pub fn parse_prompt(text: &str) -> Result<Prompt, PromptError> {
    let toks = tokenize(text);
    let mut blocks: [Option<Block<'_, '_>>; 6] = Default::default();
    let mut last_rank: Option<usize> = None;
    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        let Some(rank) = opening_block(t.text) else {
            return Err(PromptError::at(
                PromptErrorKind::UnexpectedToken(t.text.to_owned()),
                t.offset,
            ));
        };
        let name = BLOCKS[rank];
        let mut j = i + 1;
        loop {
            match toks.get(j) {
                None => return Err(PromptError::at(PromptErrorKind::UnclosedBlock(name), t.offset)),
                Some(c) if closing_block(c.text) == Some(rank) => break,
                Some(c) if opening_block(c.text).is_some() || closing_block(c.text).is_some() => {
                    return Err(PromptError::at(PromptErrorKind::UnclosedBlock(name), t.offset))
                }
                Some(_) => j += 1,
            }
        }
        if blocks[rank].is_some() {
            return Err(PromptError::at(PromptErrorKind::DuplicateBlock(name), t.offset));
        }
        if last_rank.is_some_and(|r| r > rank) {
            return Err(PromptError::at(PromptErrorKind::BlockOrder(name), t.offset));
        }
        last_rank = Some(rank);
        blocks[rank] = Some(Block {
            open_offset: t.offset,
            body: &toks[i + 1..j],
        });
        i = j + 1;
    }

    let end = text.len();
    let require = |rank: usize| -> Result<&Block<'_, '_>, PromptError> {
        blocks[rank]
            .as_ref()
            .ok_or_else(|| PromptError::at(PromptErrorKind::MissingBlock(BLOCKS[rank]), end))
    };
    let language_b = require(0)?;
    let intent_b = require(2)?;
    let include_b = require(3)?;
    let labels_b = require(4)?;
    let examples_b = require(5)?;

    let language = field_from(language_b.body, "language", language_b.open_offset)?;
    let domain = blocks[1]
        .as_ref()
        .map(|b| field_from(b.body, "domain", b.open_offset))
        .transpose()?;
    let intent = field_from(intent_b.body, "intent", intent_b.open_offset)?;
    let labels = parse_labels(labels_b.body, labels_b.open_offset)?;
    let include = parse_include(include_b.body)?;
    let examples = parse_examples(examples_b.body, examples_b.open_offset)?;

    // locate semantic violations at the offending item
    for (item, offset) in &include {
        if !labels.contains_number(item.number) {
            return Err(PromptError::at(PromptErrorKind::UnknownSlotNumber(item.number), *offset));
        }
    }
    let example_offsets: Vec<usize> = examples.iter().map(|(_, o)| *o).collect();
    Prompt::new(
        &language,
        domain.as_deref(),
        &intent,
        include.into_iter().map(|(it, _)| it).collect(),
        labels,
        examples.into_iter().map(|(e, _)| e).collect(),
    )
    .map_err(|mut e| {
        e.offset = Some(match &e.kind {
            PromptErrorKind::DuplicateExample(i)
            | PromptErrorKind::EmptyExample(i)
            | PromptErrorKind::MalformedExample { example: i, .. } => example_offsets[*i],
            PromptErrorKind::UnknownSlotNumber(_) | PromptErrorKind::InvalidText("examples") => {
                examples_b.open_offset
            }
            _ => include_b.open_offset,
        });
        e
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn weather_prompt() -> Prompt {
        Prompt::new(
            "English",
            None,
            "GetWeather",
            vec![
                IncludeItem::wildcard(1),
                IncludeItem::explicit(3, ["snow"]),
                IncludeItem::explicit(5, ["tomorrow"]),
            ],
            LabelMap::from_labels([
                "geographic_poi",
                "country",
                "condition_description",
                "city",
                "timeRange",
            ])
            .unwrap(),
            vec![
                "Will the weather be okay in [1 Yellowstone National Park ] [5 one week from now ] ?".into(),
                "will it [3 rain ] at the [1 Statue of Liberty ] at [5 noon ]".into(),
                "What's the weather like at [1 Disneyworld ] in [5 november ]".into(),
                "I need the weather info for the [1 Guggenheim Museum ] in [2 Spain ]".into(),
                "What is the weather forecast for [5 October 12, 2022 ] in [4 Gyeongju ]".into(),
            ],
        )
        .unwrap()
    }

    const WEATHER_TEXT: &str = "<language> English </language> <intent> GetWeather </intent> \
<include> [1 * ] , [3 snow ] , [5 tomorrow ] </include> \
<labels> [1=geographic_poi , [2=country , [3=condition_description , [4=city , [5=timeRange </labels> \
<examples> Will the weather be okay in [1 Yellowstone National Park ] [5 one week from now ] ? \
<br> will it [3 rain ] at the [1 Statue of Liberty ] at [5 noon ] \
<br> What's the weather like at [1 Disneyworld ] in [5 november ] \
<br> I need the weather info for the [1 Guggenheim Museum ] in [2 Spain ] \
<br> What is the weather forecast for [5 October 12, 2022 ] in [4 Gyeongju ] </examples>";

    #[test]
    fn weather_prompt_renders_canonically() {
        let p = weather_prompt();
        assert_eq!(render_prompt(&p), WEATHER_TEXT);
        assert_eq!(parse_prompt(WEATHER_TEXT).unwrap(), p);
    }

    #[test]
    fn line_wrapped_text_parses_to_same_prompt() {
        let wrapped = WEATHER_TEXT.replace(" <", "\n <").replace(" , ", " ,\n  ");
        assert_eq!(parse_prompt(&wrapped).unwrap(), weather_prompt());
    }

    #[test]
    fn empty_examples_and_include() {
        let p = Prompt::new(
            "English",
            None,
            "DraftPlayer",
            vec![],
            LabelMap::from_labels(["player"]).unwrap(),
            vec![],
        )
        .unwrap();
        let text = render_prompt(&p);
        assert!(text.ends_with("<examples> </examples>"), "{text}");
        assert!(text.contains("<include> </include>"));
        assert_eq!(parse_prompt(&text).unwrap(), p);
    }

    #[test]
    fn domain_block_sits_after_language() {
        let p = Prompt::new(
            "French",
            Some("travelinfo"),
            "flight",
            vec![IncludeItem::explicit(2, ["lundi"])],
            LabelMap::from_labels(["depart_time.period_of_day", "depart_date.day_name"]).unwrap(),
            vec![],
        )
        .unwrap();
        let text = render_prompt(&p);
        assert!(text.starts_with(
            "<language> French </language> <domain> travelinfo </domain> <intent> flight </intent>"
        ));
        assert_eq!(parse_prompt(&text).unwrap(), p);
    }

    #[test]
    fn missing_close_is_unclosed() {
        let text = WEATHER_TEXT.replace("</labels>", "");
        let err = parse_prompt(&text).unwrap_err();
        assert_eq!(err.kind, PromptErrorKind::UnclosedBlock("labels"));
        assert_eq!(err.offset, text.find("<labels>"));
    }

    #[test]
    fn eleven_examples_rejected() {
        let examples: Vec<String> = (0..11).map(|i| format!("example number {i}")).collect();
        let text = format!(
            "<language> English </language> <intent> X </intent> <include> </include> <labels> </labels> <examples> {} </examples>",
            examples.join(" <br> ")
        );
        let err = parse_prompt(&text).unwrap_err();
        assert_eq!(err.kind, PromptErrorKind::TooManyExamples(11));
        assert_eq!(err.offset, text.find("example number 10"));
    }

    #[test]
    fn structural_errors_are_reason_coded() {
        let cases = [
            (WEATHER_TEXT.replace("<intent> GetWeather </intent> ", ""), "missing_block"),
            (format!("{WEATHER_TEXT} <intent> X </intent>"), "duplicate_block"),
            (format!("hello {WEATHER_TEXT}"), "unexpected_token"),
            (WEATHER_TEXT.replace("[2=country", "[2country"), "malformed_label_entry"),
            (WEATHER_TEXT.replace("[3 snow ]", "[3 snow"), "malformed_include_item"),
            (WEATHER_TEXT.replace("[3 snow ]", "[9 snow ]"), "unknown_slot_number"),
            (
                WEATHER_TEXT.replace("in [4 Gyeongju ]", "in [4 Gyeongju ] <br> will it [3 rain ] at the [1 Statue of Liberty ] at [5 noon ]"),
                "duplicate_example",
            ),
            (WEATHER_TEXT.replace("[4 Gyeongju ]", "[4 [ ]"), "malformed_example"),
            (WEATHER_TEXT.replace("<br> will", "<br> <br> will"), "empty_example"),
        ];
        for (text, code) in cases {
            let err = parse_prompt(&text).unwrap_err();
            assert_eq!(err.kind.code(), code, "{text}");
            assert!(err.offset.is_some());
        }
    }

    #[test]
    fn block_order_is_enforced() {
        let text = "<intent> X </intent> <language> English </language> <include> </include> <labels> </labels> <examples> </examples>";
        assert_eq!(parse_prompt(text).unwrap_err().kind.code(), "block_order");
    }

    #[test]
    fn explicit_star_value_is_not_allowed() {
        let err = Prompt::new(
            "English",
            None,
            "X",
            vec![IncludeItem::explicit(1, ["*"])],
            LabelMap::from_labels(["a"]).unwrap(),
            vec![],
        )
        .unwrap_err();
        assert_eq!(err.kind, PromptErrorKind::MalformedIncludeItem);
    }
}
