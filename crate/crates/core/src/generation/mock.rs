//! Deterministic stand-in for a generation model.
//!
//! Outputs recombine the prompt's carrier words with its include items: explicit
//! values are copied verbatim and wildcards are filled from a fixed word list.
//! With probability `corruption.probability` an output instead carries one of
//! the configured defects, so every filter reason can be exercised.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendResponse, RawOutput, SamplingParams};
use crate::corpus::parse_bracket;
use crate::prompt::{parse_prompt, IncludeValue, Prompt, WILDCARD};
use crate::rng::{fnv1a, substream};

/// Defects a mock output can carry, each matching one filter reason.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Defect {
    VerbatimCopy,
    MalformedBrackets,
    MissingSlot,
    ExtraSlot,
    RepeatedSlot,
    ValueNotCopied,
    LiteralWildcard,
    ForbiddenPunctuation,
}

impl Defect {
    pub const ALL: [Defect; 8] = [
        Defect::VerbatimCopy,
        Defect::MalformedBrackets,
        Defect::MissingSlot,
        Defect::ExtraSlot,
        Defect::RepeatedSlot,
        Defect::ValueNotCopied,
        Defect::LiteralWildcard,
        Defect::ForbiddenPunctuation,
    ];

    /// Whether this defect can be produced for `prompt`.
    pub fn applicable(&self, prompt: &Prompt) -> bool {
        let items = prompt.include();
        match self {
            Defect::VerbatimCopy => !prompt.examples().is_empty(),
            Defect::MalformedBrackets | Defect::ExtraSlot | Defect::ForbiddenPunctuation => true,
            Defect::MissingSlot | Defect::RepeatedSlot => !items.is_empty(),
            Defect::ValueNotCopied => items.iter().any(|i| !i.is_wildcard()),
            Defect::LiteralWildcard => items.iter().any(|i| i.is_wildcard()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorruptionConfig {
    pub probability: f64,
    pub defects: Vec<Defect>,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            probability: 0.0,
            defects: Defect::ALL.to_vec(),
        }
    }
}

impl CorruptionConfig {
    pub fn only(defect: Defect, probability: f64) -> Self {
        Self {
            probability,
            defects: vec![defect],
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    pub seed: u64,
    pub corruption: CorruptionConfig,
}

impl Backend for MockBackend {
    fn complete(&self, prompt: &str, params: &SamplingParams) -> Result<BackendResponse, BackendError> {
        Ok(BackendResponse {
            outputs: mock_generate(prompt, params, self.seed, &self.corruption)?,
            truncated: false,
        })
    }
}

const FILL_WORDS: [&str; 24] = [
    "amber", "harbor", "velvet", "summit", "maple", "orbit", "cedar", "lumen", "coral", "ember",
    "willow", "quartz", "meadow", "falcon", "juniper", "nova", "pebble", "saffron", "tundra",
    "violet", "zephyr", "basalt", "lagoon", "marigold",
];

const CARRIER_WORDS: [&str; 16] = [
    "please", "can", "you", "i", "want", "to", "the", "for", "with", "now", "show", "me", "find",
    "need", "some", "and",
];

const FORBIDDEN: [char; 8] = ['_', '<', '>', '(', ')', '{', '}', ';'];

#[derive(Debug, Clone)]
enum Piece {
    Word(String),
    Slot { number: u32, value: Vec<String> },
    Raw(String),
}

fn render(pieces: &[Piece]) -> String {
    let mut toks: Vec<String> = Vec::new();
    for p in pieces {
        match p {
            Piece::Word(w) | Piece::Raw(w) => toks.push(w.clone()),
            Piece::Slot { number, value } => {
                toks.push(format!("[{number}"));
                toks.extend(value.iter().cloned());
                toks.push("]".into());
            }
        }
    }
    toks.join(" ")
}

fn clean_word(w: &str) -> bool {
    !w.is_empty() && w != WILDCARD && w.chars().all(|c| c.is_alphanumeric() || "'?.,!-".contains(c))
}

fn carrier_vocabulary(prompt: &Prompt) -> Vec<String> {
    let mut vocab: Vec<String> = prompt
        .examples()
        .iter()
        .filter_map(|e| parse_bracket(e).ok())
        .flat_map(|p| p.carrier_tokens().into_iter().map(str::to_owned).collect::<Vec<_>>())
        .filter(|w| clean_word(w))
        .collect();
    vocab.extend(CARRIER_WORDS.iter().map(|w| w.to_string()));
    vocab.sort();
    vocab.dedup();
    vocab
}

fn fill_value(rng: &mut impl Rng, avoid: &[String]) -> Vec<String> {
    let n = rng.gen_range(1..=2);
    let pool: Vec<&str> = FILL_WORDS
        .iter()
        .copied()
        .filter(|w| !avoid.iter().any(|a| a == w))
        .collect();
    (0..n).map(|_| pool.choose(rng).expect("pool").to_string()).collect()
}

fn clean_output(prompt: &Prompt, vocab: &[String], rng: &mut impl Rng) -> Vec<Piece> {
    let word = |rng: &mut _| Piece::Word(vocab.choose(rng).expect("vocabulary").clone());
    let mut pieces = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        pieces.push(word(rng));
    }
    let mut items: Vec<_> = prompt.include().to_vec();
    items.shuffle(rng);
    for item in items {
        let value = match item.value {
            IncludeValue::Explicit(v) => v,
            IncludeValue::Wildcard => fill_value(rng, &[]),
        };
        pieces.push(Piece::Slot {
            number: item.number,
            value,
        });
        for _ in 0..rng.gen_range(0..=2) {
            pieces.push(word(rng));
        }
    }
    let normalized: Vec<&str> = prompt.examples().iter().map(String::as_str).collect();
    if normalized.contains(&render(&pieces).as_str()) {
        pieces.push(Piece::Word("please".into()));
    }
    pieces
}

fn slot_positions(pieces: &[Piece], pred: impl Fn(u32) -> bool) -> Vec<usize> {
    pieces
        .iter()
        .enumerate()
        .filter(|(_, p)| matches!(p, Piece::Slot { number, .. } if pred(*number)))
        .map(|(i, _)| i)
        .collect()
}

fn corrupt(defect: Defect, prompt: &Prompt, mut pieces: Vec<Piece>, rng: &mut impl Rng) -> String {
    let include = prompt.include();
    match defect {
        Defect::VerbatimCopy => return prompt.examples().choose(rng).expect("applicable").clone(),
        Defect::MalformedBrackets => {
            let n = include.first().map_or(1, |i| i.number);
            let at = rng.gen_range(0..=pieces.len());
            pieces.insert(at, Piece::Raw(format!("[{n} [ ]")));
        }
        Defect::MissingSlot => {
            let slots = slot_positions(&pieces, |_| true);
            pieces.remove(*slots.choose(rng).expect("applicable"));
        }
        Defect::ExtraSlot => {
            let requested: Vec<u32> = include.iter().map(|i| i.number).collect();
            let free: Vec<u32> = prompt
                .labels()
                .iter()
                .map(|(n, _)| n)
                .filter(|n| !requested.contains(n))
                .collect();
            let number = free.choose(rng).copied().unwrap_or_else(|| {
                prompt.labels().iter().map(|(n, _)| n).max().unwrap_or(0) + 1
            });
            let at = rng.gen_range(0..=pieces.len());
            pieces.insert(
                at,
                Piece::Slot {
                    number,
                    value: fill_value(rng, &[]),
                },
            );
        }
        Defect::RepeatedSlot => {
            let slots = slot_positions(&pieces, |_| true);
            let copy = pieces[*slots.choose(rng).expect("applicable")].clone();
            pieces.push(Piece::Word("and".into()));
            pieces.push(copy);
        }
        Defect::ValueNotCopied => {
            let explicit: Vec<u32> = include
                .iter()
                .filter(|i| !i.is_wildcard())
                .map(|i| i.number)
                .collect();
            let slots = slot_positions(&pieces, |n| explicit.contains(&n));
            // values sharing a number could still satisfy the copy check, so
            // overwrite every slot of the chosen number
            let target = match &pieces[*slots.choose(rng).expect("applicable")] {
                Piece::Slot { number, .. } => *number,
                _ => unreachable!(),
            };
            let avoid: Vec<String> = include
                .iter()
                .filter_map(|i| match &i.value {
                    IncludeValue::Explicit(v) => Some(v.clone()),
                    IncludeValue::Wildcard => None,
                })
                .flatten()
                .collect();
            for p in pieces.iter_mut() {
                if let Piece::Slot { number, value } = p {
                    if *number == target {
                        *value = fill_value(rng, &avoid);
                    }
                }
            }
        }
        Defect::LiteralWildcard => {
            let wild: Vec<u32> = include.iter().filter(|i| i.is_wildcard()).map(|i| i.number).collect();
            let slots = slot_positions(&pieces, |n| wild.contains(&n));
            let at = *slots.choose(rng).expect("applicable");
            if let Piece::Slot { value, .. } = &mut pieces[at] {
                *value = vec![WILDCARD.to_owned()];
            }
        }
        Defect::ForbiddenPunctuation => {
            let c = FORBIDDEN.choose(rng).expect("non-empty");
            let at = rng.gen_range(0..=pieces.len());
            pieces.insert(at, Piece::Word(format!("week{c}end")));
        }
    }
    render(&pieces)
}

/// Pure function of `(prompt, params, seed, corruption)`: output `j` draws from
/// the substream keyed by the prompt text and `j`.
pub fn mock_generate(
    prompt_text: &str,
    params: &SamplingParams,
    seed: u64,
    corruption: &CorruptionConfig,
) -> Result<Vec<RawOutput>, BackendError> {
    let prompt = parse_prompt(prompt_text).map_err(|e| BackendError::InvalidPrompt(e.to_string()))?;
    let applicable: Vec<Defect> = corruption
        .defects
        .iter()
        .copied()
        .filter(|d| d.applicable(&prompt))
        .collect();
    if corruption.probability > 0.0 && applicable.is_empty() {
        return Err(BackendError::InvalidPrompt(format!(
            "none of the defects {:?} can be produced for this prompt",
            corruption.defects
        )));
    }
    let vocab = carrier_vocabulary(&prompt);
    let key = seed ^ fnv1a(prompt_text.as_bytes());
    Ok((0..params.num_outputs)
        .map(|j| {
            let mut rng = substream(key, u64::from(j));
            let pieces = clean_output(&prompt, &vocab, &mut rng);
            let text = if corruption.probability > 0.0 && rng.gen_bool(corruption.probability.min(1.0)) {
                let defect = *applicable.choose(&mut rng).expect("non-empty");
                corrupt(defect, &prompt, pieces, &mut rng)
            } else {
                render(&pieces)
            };
            let perplexity = (rng.gen_range(1.0..20.0f64) * 1e4).round() / 1e4;
            RawOutput {
                text,
                perplexity: Some(perplexity),
            }
        })
        .collect())
}
