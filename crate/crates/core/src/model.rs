//! A naive reference IC+ST model for smoke-testing pipelines.
//!
//! Intents come from a [`CentroidClassifier`]; slots from a gazetteer of the
//! training values, matched longest-first and case-insensitively. It only
//! exists so end-to-end runs have something to score.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::{AnnotatedUtterance, SlotSpan};
use crate::filters::{CentroidClassifier, IntentClassifier};

/// A trainable joint intent classifier and slot tagger.
pub trait IcStModel {
    fn predict(&self, tokens: &[String], language: &str) -> AnnotatedUtterance;

    /// Predictions aligned with `reference`, keeping its tokens.
    fn predict_like(&self, reference: &AnnotatedUtterance) -> AnnotatedUtterance {
        self.predict(reference.tokens(), reference.language())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReferenceModel {
    classifier: CentroidClassifier,
    /// Lowercased value tokens -> label.
    gazetteer: HashMap<Vec<String>, String>,
    max_len: usize,
}

fn lower(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| t.to_lowercase()).collect()
}

impl ReferenceModel {
    /// Each value is tagged with the label it carried most often, ties going
    /// to the smaller label.
    pub fn train<'a>(data: impl IntoIterator<Item = &'a AnnotatedUtterance> + Clone) -> Self {
        let classifier = CentroidClassifier::fit(data.clone());
        let mut votes: HashMap<Vec<String>, BTreeMap<String, usize>> = HashMap::new();
        for u in data {
            for (label, value) in u.slot_values() {
                *votes
                    .entry(lower(value))
                    .or_default()
                    .entry(label.to_owned())
                    .or_insert(0) += 1;
            }
        }
        let max_len = votes.keys().map(Vec::len).max().unwrap_or(0);
        let gazetteer = votes
            .into_iter()
            .map(|(v, counts)| {
                let best = counts
                    .into_iter()
                    .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                    .expect("at least one vote");
                (v, best.0)
            })
            .collect();
        Self {
            classifier,
            gazetteer,
            max_len,
        }
    }
}

impl IcStModel for ReferenceModel {
    fn predict(&self, tokens: &[String], language: &str) -> AnnotatedUtterance {
        let (intent, _) = self.classifier.classify(&tokens.join(" "));
        let low = lower(tokens);
        let mut spans = Vec::new();
        let mut i = 0;
        while i < low.len() {
            let hit = (1..=self.max_len.min(low.len() - i))
                .rev()
                .find_map(|n| self.gazetteer.get(&low[i..i + n]).map(|l| (n, l)));
            match hit {
                Some((n, label)) => {
                    spans.push(SlotSpan::new(label.clone(), i, i + n));
                    i += n;
                }
                None => i += 1,
            }
        }
        AnnotatedUtterance::new(tokens.to_vec(), spans, intent, language)
            .expect("gazetteer spans are disjoint and in range")
    }
}
