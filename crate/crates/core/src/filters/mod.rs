//! Reason-coded filtering of generated outputs.
//!
//! Each filter maps one bracket-annotated output to a [`FilterVerdict`]. The
//! pipeline applies them in a fixed order: [`valid_filter`],
//! [`heuristic_filter`], [`dedup`], [`ngram_block`], perplexity selection,
//! [`ic_filter`] and finally [`balance_classes`].

mod classifier;
mod report;

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{parse_bracket, AnnotatedUtterance, ParsedBracket, Provenance};
use crate::generation::GenerationOutput;
use crate::prompt::{IncludeValue, Prompt, WILDCARD};

pub use classifier::{CentroidClassifier, IntentClassifier};
pub use report::{pass_rate_report, GroupStats, OutputTrace, PassRateReport, StageCount};

/// Characters a content word may not contain.
pub const FORBIDDEN_PUNCTUATION: [char; 10] = ['_', '<', '>', '[', ']', '(', ')', '{', '}', ';'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    VerbatimCopy,
    MalformedBrackets,
    MissingSlot,
    ExtraSlot,
    RepeatedSlot,
    ValueNotCopied,
    LiteralWildcard,
    ForbiddenPunctuation,
    Duplicate,
    BlockedNgram,
    IntentMismatch,
    /// Passed every filter but lost perplexity selection.
    NotSelected,
}

impl Reason {
    pub fn code(&self) -> &'static str {
        match self {
            Reason::VerbatimCopy => "verbatim_copy",
            Reason::MalformedBrackets => "malformed_brackets",
            Reason::MissingSlot => "missing_slot",
            Reason::ExtraSlot => "extra_slot",
            Reason::RepeatedSlot => "repeated_slot",
            Reason::ValueNotCopied => "value_not_copied",
            Reason::LiteralWildcard => "literal_wildcard",
            Reason::ForbiddenPunctuation => "forbidden_punctuation",
            Reason::Duplicate => "duplicate",
            Reason::BlockedNgram => "blocked_ngram",
            Reason::IntentMismatch => "intent_mismatch",
            Reason::NotSelected => "not_selected",
        }
    }
}

/// `passed` holds exactly when `reason` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub passed: bool,
    pub reason: Option<Reason>,
}

impl FilterVerdict {
    pub const PASS: FilterVerdict = FilterVerdict {
        passed: true,
        reason: None,
    };

    pub fn fail(reason: Reason) -> Self {
        Self {
            passed: false,
            reason: Some(reason),
        }
    }

    fn from_result(r: Result<(), Reason>) -> Self {
        match r {
            Ok(()) => Self::PASS,
            Err(reason) => Self::fail(reason),
        }
    }
}

/// Anything carrying bracket-annotated output text.
pub trait OutputText {
    fn output_text(&self) -> &str;
}

impl OutputText for String {
    fn output_text(&self) -> &str {
        self
    }
}

impl OutputText for &str {
    fn output_text(&self) -> &str {
        self
    }
}

impl OutputText for GenerationOutput {
    fn output_text(&self) -> &str {
        &self.text
    }
}

pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Output text with bracket markers removed. Unparseable text falls back to
/// dropping every marker-shaped token.
pub fn surface_text(text: &str) -> String {
    match parse_bracket(text) {
        Ok(p) => p.tokens.join(" "),
        Err(_) => text
            .split_whitespace()
            .filter(|t| {
                let opening = t.strip_prefix('[').is_some_and(|r| r.bytes().all(|b| b.is_ascii_digit()));
                !opening && *t != "]"
            })
            .collect::<Vec<_>>()
            .join(" "),
    }
}

fn count_numbers(numbers: impl Iterator<Item = u32>) -> BTreeMap<u32, usize> {
    let mut counts = BTreeMap::new();
    for n in numbers {
        *counts.entry(n).or_insert(0) += 1;
    }
    counts
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Whether every value can be assigned a distinct slot containing it.
fn values_matchable(values: &[&[String]], slots: &[&[String]]) -> bool {
    fn augment(
        v: usize,
        edges: &[Vec<usize>],
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for &s in &edges[v] {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            if owner[s].is_none_or(|o| augment(o, edges, seen, owner)) {
                owner[s] = Some(v);
                return true;
            }
        }
        false
    }
    let edges: Vec<Vec<usize>> = values
        .iter()
        .map(|v| (0..slots.len()).filter(|&s| contains_run(slots[s], v)).collect())
        .collect();
    let mut owner = vec![None; slots.len()];
    (0..values.len()).all(|v| augment(v, &edges, &mut vec![false; slots.len()], &mut owner))
}

fn check_compliance(parsed: &ParsedBracket, prompt: &Prompt) -> Result<(), Reason> {
    let wanted = count_numbers(prompt.include().iter().map(|i| i.number));
    let got = count_numbers(parsed.spans.iter().map(|s| s.number));
    if got
        .iter()
        .any(|(n, c)| wanted.get(n).is_some_and(|w| c > w))
    {
        return Err(Reason::RepeatedSlot);
    }
    if got.keys().any(|n| !wanted.contains_key(n)) {
        return Err(Reason::ExtraSlot);
    }
    if wanted.iter().any(|(n, w)| got.get(n).copied().unwrap_or(0) < *w) {
        return Err(Reason::MissingSlot);
    }
    for n in wanted.keys() {
        let values: Vec<&[String]> = prompt
            .include()
            .iter()
            .filter(|i| i.number == *n)
            .filter_map(|i| match &i.value {
                IncludeValue::Explicit(v) => Some(v.as_slice()),
                IncludeValue::Wildcard => None,
            })
            .collect();
        if values.is_empty() {
            continue;
        }
        let slots: Vec<&[String]> = parsed
            .spans
            .iter()
            .filter(|s| s.number == *n)
            .map(|s| parsed.span_tokens(s))
            .collect();
        if !values_matchable(&values, &slots) {
            return Err(Reason::ValueNotCopied);
        }
    }
    Ok(())
}

/// Checks that the output parses and respects the prompt's include block: the
/// same multiset of slot numbers, with every explicit value copied into a slot
/// of its number.
///
/// Reasons are checked in the order malformed, repeated, extra, missing,
/// value-not-copied.
pub fn valid_filter(output_text: &str, prompt: &Prompt) -> FilterVerdict {
    FilterVerdict::from_result(
        parse_bracket(output_text)
            .map_err(|_| Reason::MalformedBrackets)
            .and_then(|p| check_compliance(&p, prompt)),
    )
}

fn is_verbatim_copy(output_text: &str, prompt: &Prompt) -> bool {
    let norm = normalize_whitespace(output_text);
    prompt.examples().iter().any(|e| normalize_whitespace(e) == norm)
}

fn check_heuristics(output_text: &str, prompt: &Prompt) -> Result<(), Reason> {
    if is_verbatim_copy(output_text, prompt) {
        return Err(Reason::VerbatimCopy);
    }
    let parsed = parse_bracket(output_text).map_err(|_| Reason::MalformedBrackets)?;
    let wildcard_slot = parsed
        .spans
        .iter()
        .any(|s| parsed.span_tokens(s).len() == 1 && parsed.span_tokens(s)[0] == WILDCARD);
    if wildcard_slot || parsed.carrier_tokens().contains(&WILDCARD) {
        return Err(Reason::LiteralWildcard);
    }
    if parsed
        .tokens
        .iter()
        .any(|t| t.contains(FORBIDDEN_PUNCTUATION))
    {
        return Err(Reason::ForbiddenPunctuation);
    }
    Ok(())
}

/// Rejects verbatim copies of a prompt example, malformed brackets, literal
/// wildcards and content words containing [`FORBIDDEN_PUNCTUATION`].
pub fn heuristic_filter(output_text: &str, prompt: &Prompt) -> FilterVerdict {
    FilterVerdict::from_result(check_heuristics(output_text, prompt))
}

/// The first failing reason across both per-output filters, with verbatim
/// copies reported ahead of compliance failures.
pub fn screen(output_text: &str, prompt: &Prompt) -> FilterVerdict {
    if is_verbatim_copy(output_text, prompt) {
        return FilterVerdict::fail(Reason::VerbatimCopy);
    }
    let v = valid_filter(output_text, prompt);
    if !v.passed {
        return v;
    }
    heuristic_filter(output_text, prompt)
}

/// Stable first-occurrence de-duplication on whitespace-normalised text.
pub fn dedup<T: OutputText>(outputs: Vec<T>) -> Vec<T> {
    let mut seen = HashSet::new();
    outputs
        .into_iter()
        .filter(|o| seen.insert(normalize_whitespace(o.output_text())))
        .collect()
}

fn lower_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Drops outputs whose surface text contains a blocked phrase as a contiguous,
/// case-insensitive run of whole tokens.
pub fn ngram_block<T: OutputText>(outputs: Vec<T>, blocked_phrases: &[String]) -> Vec<T> {
    let blocked: Vec<Vec<String>> = blocked_phrases
        .iter()
        .map(|p| lower_tokens(p))
        .filter(|p| !p.is_empty())
        .collect();
    outputs
        .into_iter()
        .filter(|o| !is_blocked(o.output_text(), &blocked))
        .collect()
}

fn is_blocked(text: &str, blocked: &[Vec<String>]) -> bool {
    let toks = lower_tokens(&surface_text(text));
    blocked.iter().any(|p| contains_run(&toks, p))
}

/// Verdict form of [`ngram_block`] for one output.
pub fn ngram_verdict(output_text: &str, blocked_phrases: &[String]) -> FilterVerdict {
    let blocked: Vec<Vec<String>> = blocked_phrases.iter().map(|p| lower_tokens(p)).collect();
    let blocked: Vec<Vec<String>> = blocked.into_iter().filter(|p| !p.is_empty()).collect();
    if is_blocked(output_text, &blocked) {
        FilterVerdict::fail(Reason::BlockedNgram)
    } else {
        FilterVerdict::PASS
    }
}

/// An output the intent filter rejected, with the intent it was classified as.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch<T> {
    pub output: T,
    pub predicted: String,
}

/// Keeps outputs whose surface text is classified as `expected_intent`.
pub fn ic_filter<T: OutputText>(
    outputs: Vec<T>,
    expected_intent: &str,
    classifier: &dyn IntentClassifier,
) -> (Vec<T>, Vec<Mismatch<T>>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for o in outputs {
        let (predicted, _) = classifier.classify(&surface_text(o.output_text()));
        if predicted == expected_intent {
            kept.push(o);
        } else {
            dropped.push(Mismatch { output: o, predicted });
        }
    }
    (kept, dropped)
}

/// Index of the lowest-perplexity output passing [`valid_filter`]. Missing
/// perplexities rank last and ties go to the lower index.
pub fn select_lowest_perplexity(outputs: &[GenerationOutput], prompt: &Prompt) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, o) in outputs.iter().enumerate() {
        if !valid_filter(&o.text, prompt).passed {
            continue;
        }
        let p = o.perplexity.unwrap_or(f64::INFINITY);
        if best.is_none_or(|(_, b)| p < b) {
            best = Some((i, p));
        }
    }
    best.map(|(i, _)| i)
}

/// Applies [`select_lowest_perplexity`] to every prompt of a batch, returning
/// at most one output per prompt index.
pub fn select_per_prompt<'a>(
    outputs: &'a [GenerationOutput],
    prompts: &[Prompt],
) -> Vec<&'a GenerationOutput> {
    let mut groups: BTreeMap<usize, Vec<GenerationOutput>> = BTreeMap::new();
    let mut positions: HashMap<usize, Vec<usize>> = HashMap::new();
    for (pos, o) in outputs.iter().enumerate() {
        groups.entry(o.prompt_index).or_default().push(o.clone());
        positions.entry(o.prompt_index).or_default().push(pos);
    }
    groups
        .iter()
        .filter_map(|(idx, group)| {
            let prompt = prompts.get(*idx)?;
            select_lowest_perplexity(group, prompt).map(|local| &outputs[positions[idx][local]])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BalanceError {
    #[error("intent {intent} needs {needed} copies but has no source utterances")]
    NoSource { intent: String, needed: usize },
}

/// Per-intent row counts of a dataset.
pub fn intent_distribution<'a>(
    utterances: impl IntoIterator<Item = &'a AnnotatedUtterance>,
) -> BTreeMap<String, usize> {
    let mut dist = BTreeMap::new();
    for u in utterances {
        *dist.entry(u.intent().to_owned()).or_insert(0) += 1;
    }
    dist
}

/// Tops up each intent to its target count with cyclic copies of that intent's
/// source rows, marked [`Provenance::CopiedForBalance`]. Kept rows are never
/// removed; copies follow them in target-intent order.
pub fn balance_classes(
    kept: Vec<AnnotatedUtterance>,
    source: &[AnnotatedUtterance],
    target_dist: &BTreeMap<String, usize>,
) -> Result<Vec<AnnotatedUtterance>, BalanceError> {
    let have = intent_distribution(&kept);
    let mut out = kept;
    for (intent, &target) in target_dist {
        let needed = target.saturating_sub(have.get(intent).copied().unwrap_or(0));
        if needed == 0 {
            continue;
        }
        let pool: Vec<&AnnotatedUtterance> = source.iter().filter(|u| u.intent() == intent).collect();
        if pool.is_empty() {
            return Err(BalanceError::NoSource {
                intent: intent.clone(),
                needed,
            });
        }
        out.extend(
            pool.iter()
                .cycle()
                .take(needed)
                .map(|u| (*u).clone().with_provenance(Provenance::CopiedForBalance)),
        );
    }
    Ok(out)
}
