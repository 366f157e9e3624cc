//! Training-pair construction: each corpus utterance becomes a prompt/target
//! pair with sampled same-intent examples, partially wildcarded include values
//! and randomly masked label names.

use std::collections::{HashMap, HashSet};
use std::io::{self, Write};

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{IncludeItem, IncludeValue, LabelMap, Prompt, MAX_EXAMPLES};
use crate::corpus::{spans_to_bracket, AnnotatedUtterance, Corpus};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FormatConfig {
    pub label_dropout_rate: f64,
    pub wildcard_geom_p: f64,
    pub max_examples: usize,
    pub rng_seed: u64,
}

impl Default for FormatConfig {
    fn default() -> Self {
        Self {
            label_dropout_rate: 0.2,
            wildcard_geom_p: 0.5,
            max_examples: MAX_EXAMPLES,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatConfigError {
    #[error("{name} must lie in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
}

impl FormatConfig {
    pub fn validate(&self) -> Result<(), FormatConfigError> {
        for (name, value) in [
            ("label_dropout_rate", self.label_dropout_rate),
            ("wildcard_geom_p", self.wildcard_geom_p),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(FormatConfigError::Probability { name, value });
            }
        }
        Ok(())
    }

    fn example_cap(&self) -> usize {
        self.max_examples.min(MAX_EXAMPLES)
    }
}

/// A prompt (after masking and wildcarding) and the bracket text it should
/// produce.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub prompt: Prompt,
    pub target: String,
    pub intent: String,
    pub language: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairMetadata {
    pub intent: String,
    pub language: String,
    pub seed: u64,
}

/// JSONL record handed to an external trainer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRecord {
    pub prompt_text: String,
    pub target_text: String,
    pub metadata: PairMetadata,
}

impl From<&TrainingPair> for PairRecord {
    fn from(p: &TrainingPair) -> Self {
        PairRecord {
            prompt_text: p.prompt.render(),
            target_text: p.target.clone(),
            metadata: PairMetadata {
                intent: p.intent.clone(),
                language: p.language.clone(),
                seed: p.seed,
            },
        }
    }
}

pub fn write_training_pairs<'a>(
    mut w: impl Write,
    pairs: impl IntoIterator<Item = &'a TrainingPair>,
) -> io::Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut w, &PairRecord::from(p))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Keeps the first occurrence of every (intent, tokens, spans) triple.
pub fn dedup_corpus(corpus: &Corpus) -> Corpus {
    let mut seen = HashSet::new();
    corpus
        .iter()
        .filter(|u| seen.insert(u.content_key()))
        .cloned()
        .collect()
}

fn sample_from_pool(
    utts: &[AnnotatedUtterance],
    pool: &[usize],
    cap: usize,
    labels: &LabelMap,
    rng: &mut impl Rng,
) -> Vec<String> {
    let k = rng.gen_range(0..=cap.min(pool.len()));
    index::sample(rng, pool.len(), k)
        .into_iter()
        .map(|i| spans_to_bracket(&utts[pool[i]], labels).expect("pool labels come from the label map"))
        .collect()
}

/// Same-intent rows other than `target`, without content duplicates of the
/// target or of each other.
fn example_pool(utts: &[AnnotatedUtterance], target: usize) -> Vec<usize> {
    let t = &utts[target];
    let mut seen = HashSet::new();
    seen.insert(t.content_key());
    utts.iter()
        .enumerate()
        .filter(|(i, u)| *i != target && u.intent() == t.intent() && seen.insert(u.content_key()))
        .map(|(i, _)| i)
        .collect()
}

/// Draws `k ~ U{0..=min(max_examples, available)}` distinct examples for the
/// utterance at `target_index`, rendered under the intent's label map.
pub fn sample_examples(
    corpus: &Corpus,
    target_index: usize,
    cfg: &FormatConfig,
    rng: &mut impl Rng,
) -> Vec<String> {
    let utts = corpus.utterances();
    let labels = LabelMap::from_labels(corpus.slot_labels(utts[target_index].intent()))
        .expect("corpus labels are valid");
    let pool = example_pool(utts, target_index);
    sample_from_pool(utts, &pool, cfg.example_cap(), &labels, rng)
}

/// Wildcards include items so that the number of kept explicit values follows
/// a geometric law truncated at the item count: P(keep j) = p(1-p)^j for
/// j < n and the residual mass on keeping all n. Kept positions are chosen
/// uniformly; item order is preserved.
pub fn assign_wildcards(items: &[IncludeItem], p: f64, rng: &mut impl Rng) -> Vec<IncludeItem> {
    let n = items.len();
    if n == 0 {
        return Vec::new();
    }
    let mut kept = 0;
    while kept < n && !rng.gen_bool(p) {
        kept += 1;
    }
    let keep: HashSet<usize> = index::sample(rng, n, kept).into_iter().collect();
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            if keep.contains(&i) {
                item.clone()
            } else {
                IncludeItem::wildcard(item.number)
            }
        })
        .collect()
}

/// A mask of 1 to 5 uppercase letters joined by underscores, e.g. `A_Q_Y`.
pub fn random_mask(rng: &mut impl Rng) -> String {
    let len = rng.gen_range(1..=5);
    (0..len)
        .map(|_| char::from(b'A' + rng.gen_range(0..26u8)).to_string())
        .collect::<Vec<_>>()
        .join("_")
}

fn fresh_mask(rng: &mut impl Rng, taken: &mut HashSet<String>) -> String {
    loop {
        let m = random_mask(rng);
        if taken.insert(m.clone()) {
            return m;
        }
    }
}

/// Independently replaces the intent name and each slot label with a random
/// mask at probability `rate`. Numbers are untouched and the target, which
/// only refers to numbers, is returned unchanged.
pub fn apply_label_dropout(
    prompt: &Prompt,
    target: &str,
    rate: f64,
    rng: &mut impl Rng,
) -> (Prompt, String) {
    let mut taken: HashSet<String> = prompt.labels().iter().map(|(_, l)| l.to_owned()).collect();
    taken.insert(prompt.intent().to_owned());

    let intent = if rng.gen_bool(rate) {
        fresh_mask(rng, &mut taken)
    } else {
        prompt.intent().to_owned()
    };
    let mut renamed: HashMap<u32, String> = HashMap::new();
    for (n, _) in prompt.labels().iter() {
        if rng.gen_bool(rate) {
            renamed.insert(n, fresh_mask(rng, &mut taken));
        }
    }
    let labels = prompt
        .labels()
        .relabel(|n, l| renamed.get(&n).cloned().unwrap_or_else(|| l.to_owned()))
        .expect("masks never collide with labels");
    let masked = Prompt::new(
        prompt.language(),
        prompt.domain(),
        &intent,
        prompt.include().to_vec(),
        labels,
        prompt.examples().to_vec(),
    )
    .expect("masking preserves prompt validity");
    (masked, target.to_owned())
}

/// One pair per de-duplicated corpus utterance. Row `i` draws from its own
/// random substream derived from `(cfg.rng_seed, i)`, so the result is a pure
/// function of the corpus and configuration.
pub fn build_training_pairs(corpus: &Corpus, cfg: &FormatConfig) -> Vec<TrainingPair> {
    let corpus = dedup_corpus(corpus);
    let utts = corpus.utterances();
    let label_maps: HashMap<&str, LabelMap> = corpus
        .intents()
        .into_iter()
        .map(|i| {
            let m = LabelMap::from_labels(corpus.slot_labels(i)).expect("corpus labels are valid");
            (i, m)
        })
        .collect();
    let mut pools: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, u) in utts.iter().enumerate() {
        pools.entry(u.intent()).or_default().push(i);
    }

    utts.iter()
        .enumerate()
        .map(|(row, target)| {
            let mut rng: ChaCha8Rng = substream(cfg.rng_seed, row as u64);
            let labels = &label_maps[target.intent()];
            // corpus is de-duplicated, so excluding the row itself suffices
            let pool: Vec<usize> = pools[target.intent()]
                .iter()
                .copied()
                .filter(|&j| j != row)
                .collect();
            let examples = sample_from_pool(utts, &pool, cfg.example_cap(), labels, &mut rng);

            let include: Vec<IncludeItem> = target
                .spans()
                .iter()
                .map(|s| IncludeItem {
                    number: labels.number(&s.label).expect("label present"),
                    value: IncludeValue::Explicit(target.span_tokens(s).to_vec()),
                })
                .collect();
            let include = assign_wildcards(&include, cfg.wildcard_geom_p, &mut rng);
            let target_text = spans_to_bracket(target, labels).expect("label present");
            let prompt = Prompt::new(
                target.language(),
                target.domain(),
                target.intent(),
                include,
                labels.clone(),
                examples,
            )
            .expect("corpus-derived prompt is valid");
            let (prompt, target_text) =
                apply_label_dropout(&prompt, &target_text, cfg.label_dropout_rate, &mut rng);
            TrainingPair {
                prompt,
                target: target_text,
                intent: target.intent().to_owned(),
                language: target.language().to_owned(),
                seed: cfg.rng_seed,
            }
        })
        .collect()
}
