//! Inference prompts built from starter utterances.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{labels_in_order, spans_to_bracket, AnnotatedUtterance, BracketError};
use crate::prompt::{IncludeItem, LabelMap, LabelMapError, Prompt, PromptError, MAX_EXAMPLES};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStrategy {
    /// One prompt per starter copying every slot value.
    CopyAll,
    /// Copy-all plus one prompt per slot type with that type's values
    /// replaced by the wildcard.
    SampleEach,
    /// One example-free, all-wildcard prompt per distinct slot-label set.
    Lno,
}

impl std::str::FromStr for PromptStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "copy_all" => Ok(Self::CopyAll),
            "sample_each" => Ok(Self::SampleEach),
            "lno" => Ok(Self::Lno),
            _ => Err(format!("unknown prompt strategy {s:?}")),
        }
    }
}

/// Slot-value translations keyed by `(label, source value)`, values joined with
/// single spaces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TranslatedValues(pub BTreeMap<String, BTreeMap<String, String>>);

impl TranslatedValues {
    pub fn insert(&mut self, label: &str, source: &str, target: &str) {
        self.0
            .entry(label.to_owned())
            .or_default()
            .insert(source.to_owned(), target.to_owned());
    }

    pub fn get(&self, label: &str, source: &[String]) -> Option<Vec<String>> {
        let t = self.0.get(label)?.get(&source.join(" "))?;
        let toks: Vec<String> = t.split_whitespace().map(str::to_owned).collect();
        (!toks.is_empty()).then_some(toks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub strategy: PromptStrategy,
    /// Language tag for the prompts; `None` keeps each starter's language.
    #[serde(default)]
    pub target_language: Option<String>,
    #[serde(default)]
    pub max_examples: usize,
    /// Drives the choice of examples when more than `max_examples` are
    /// available.
    #[serde(default)]
    pub seed: u64,
}

impl InferenceConfig {
    pub fn new(strategy: PromptStrategy) -> Self {
        Self {
            strategy,
            target_language: None,
            max_examples: MAX_EXAMPLES,
            seed: 0,
        }
    }
}

/// A prompt and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferencePrompt {
    pub prompt: Prompt,
    /// Index into the starter list; `None` for label-names-only prompts.
    pub starter: Option<usize>,
    /// The slot type turned into a wildcard by sample-each.
    pub wildcard_label: Option<String>,
}

#[derive(Debug, Error)]
pub enum InferencePromptError {
    #[error("no starters to build label-names-only prompts from")]
    NoLabelCombinations,
    #[error("starter {starter}: no translation for {label} value {value:?}")]
    MissingTranslation { starter: usize, label: String, value: String },
    #[error("starter {starter}: {source}")]
    Bracket { starter: usize, source: BracketError },
    #[error(transparent)]
    Labels(#[from] LabelMapError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

struct IntentGroup<'a> {
    intent: &'a str,
    members: Vec<usize>,
    labels: LabelMap,
    bracket: Vec<String>,
}

fn group_by_intent(starters: &[AnnotatedUtterance]) -> Result<Vec<IntentGroup<'_>>, InferencePromptError> {
    let mut order: Vec<&str> = Vec::new();
    let mut members: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, s) in starters.iter().enumerate() {
        let m = members.entry(s.intent()).or_default();
        if m.is_empty() {
            order.push(s.intent());
        }
        m.push(i);
    }
    order
        .into_iter()
        .map(|intent| {
            let idx = members.remove(intent).expect("grouped");
            let labels = LabelMap::from_labels(labels_in_order(idx.iter().map(|&i| &starters[i])))?;
            let bracket = idx
                .iter()
                .map(|&i| {
                    spans_to_bracket(&starters[i], &labels)
                        .map_err(|source| InferencePromptError::Bracket { starter: i, source })
                })
                .collect::<Result<_, _>>()?;
            Ok(IntentGroup {
                intent,
                members: idx,
                labels,
                bracket,
            })
        })
        .collect()
}

/// Distinct example texts other than the target, at most `cap`, chosen
/// uniformly when there are more and kept in starter order.
fn examples_for(group: &IntentGroup, local: usize, cap: usize, seed: u64, target: usize) -> Vec<String> {
    let own = &group.bracket[local];
    let mut seen = BTreeSet::new();
    let pool: Vec<&String> = group
        .bracket
        .iter()
        .enumerate()
        .filter(|(j, t)| *j != local && *t != own)
        .map(|(_, t)| t)
        .filter(|t| seen.insert(t.as_str()))
        .collect();
    if pool.len() <= cap {
        return pool.into_iter().cloned().collect();
    }
    let mut rng = substream(seed, target as u64);
    let mut picked = sample(&mut rng, pool.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| pool[i].clone()).collect()
}

/// Builds inference prompts from starter utterances, grouped by intent.
///
/// Copy-all and sample-each prompts use the other starters of the same intent
/// as examples. With `translated` set, explicit include values are replaced by
/// their translations; examples stay in the source language.
pub fn build_inference_prompts(
    starters: &[AnnotatedUtterance],
    cfg: &InferenceConfig,
    translated: Option<&TranslatedValues>,
) -> Result<Vec<InferencePrompt>, InferencePromptError> {
    let cap = cfg.max_examples.min(MAX_EXAMPLES);
    if cfg.strategy == PromptStrategy::Lno {
        return lno_prompts(starters, cfg);
    }
    let mut out = Vec::new();
    for group in group_by_intent(starters)? {
        for (local, &i) in group.members.iter().enumerate() {
            let s = &starters[i];
            let language = cfg.target_language.as_deref().unwrap_or(s.language());
            let examples = examples_for(&group, local, cap, cfg.seed, i);
            let mut values = Vec::with_capacity(s.spans().len());
            for span in s.spans() {
                let source = s.span_tokens(span);
                let value = match translated {
                    Some(t) => t.get(&span.label, source).ok_or_else(|| {
                        InferencePromptError::MissingTranslation {
                            starter: i,
                            label: span.label.clone(),
                            value: source.join(" "),
                        }
                    })?,
                    None => source.to_vec(),
                };
                let number = group.labels.number(&span.label).expect("label map covers starters");
                values.push((span.label.as_str(), number, value));
            }
            let make = |wild: Option<&str>| -> Result<InferencePrompt, InferencePromptError> {
                let include = values
                    .iter()
                    .map(|(label, n, v)| {
                        if Some(*label) == wild {
                            IncludeItem::wildcard(*n)
                        } else {
                            IncludeItem::explicit(*n, v.iter().cloned())
                        }
                    })
                    .collect();
                let prompt = Prompt::new(
                    language,
                    s.domain(),
                    group.intent,
                    include,
                    group.labels.clone(),
                    examples.clone(),
                )?;
                Ok(InferencePrompt {
                    prompt,
                    starter: Some(i),
                    wildcard_label: wild.map(str::to_owned),
                })
            };
            out.push(make(None)?);
            if cfg.strategy == PromptStrategy::SampleEach {
                for label in labels_in_order([s]) {
                    out.push(make(Some(&label))?);
                }
            }
        }
    }
    Ok(out)
}

/// One prompt per distinct (intent, slot-label set), labels numbered within
/// the set in first-appearance order.
fn lno_prompts(
    starters: &[AnnotatedUtterance],
    cfg: &InferenceConfig,
) -> Result<Vec<InferencePrompt>, InferencePromptError> {
    if starters.is_empty() {
        return Err(InferencePromptError::NoLabelCombinations);
    }
    let mut seen: BTreeSet<(String, Vec<String>)> = BTreeSet::new();
    let mut out = Vec::new();
    for s in starters {
        let labels = labels_in_order([s]);
        let mut key_labels = labels.clone();
        key_labels.sort();
        if !seen.insert((s.intent().to_owned(), key_labels)) {
            continue;
        }
        let map = LabelMap::from_labels(labels)?;
        let include = map.iter().map(|(n, _)| IncludeItem::wildcard(n)).collect();
        let language = cfg.target_language.as_deref().unwrap_or(s.language());
        let prompt = Prompt::new(language, s.domain(), s.intent(), include, map, vec![])?;
        out.push(InferencePrompt {
            prompt,
            starter: None,
            wildcard_label: None,
        });
    }
    Ok(out)
}
