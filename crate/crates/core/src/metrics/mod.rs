//! Intent and slot metrics for IC+ST predictions.
//!
//! Slot chunks are `(label, start, end)` triples taken from spans, so the "O"
//! tag never counts. SemER aligns slots per label: equal values are matched
//! first as correct, leftover same-label pairs are substitutions, and the rest
//! are deletions (reference side) or insertions (hypothesis side). A wrong
//! intent adds one substitution.

mod table;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AnnotatedUtterance;

pub use table::{mean_std, relative_change, render_relative_table, MeanStd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionPair {
    pub reference: AnnotatedUtterance,
    pub hypothesis: AnnotatedUtterance,
}

impl PredictionPair {
    pub fn new(reference: AnnotatedUtterance, hypothesis: AnnotatedUtterance) -> Self {
        Self {
            reference,
            hypothesis,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("pair {pair}: reference has {reference} tokens, hypothesis {hypothesis}")]
    TokenMismatch {
        pair: usize,
        reference: usize,
        hypothesis: usize,
    },
}

fn check_aligned(pairs: &[PredictionPair]) -> Result<(), MetricsError> {
    for (i, p) in pairs.iter().enumerate() {
        let (r, h) = (p.reference.tokens().len(), p.hypothesis.tokens().len());
        if r != h {
            return Err(MetricsError::TokenMismatch {
                pair: i,
                reference: r,
                hypothesis: h,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentMetrics {
    /// Recall of the target intent over pairs whose reference carries it.
    pub local_recall: Option<f64>,
    pub global_accuracy: Option<f64>,
}

pub fn intent_metrics(pairs: &[PredictionPair], target_intent: Option<&str>) -> IntentMetrics {
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let correct = pairs
        .iter()
        .filter(|p| p.reference.intent() == p.hypothesis.intent())
        .count();
    let local_recall = target_intent.and_then(|t| {
        let local: Vec<&PredictionPair> = pairs.iter().filter(|p| p.reference.intent() == t).collect();
        ratio(local.iter().filter(|p| p.hypothesis.intent() == t).count(), local.len())
    });
    IntentMetrics {
        local_recall,
        global_accuracy: ratio(correct, pairs.len()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub reference_chunks: usize,
    pub hypothesis_chunks: usize,
}

type Chunk<'a> = (&'a str, usize, usize);

fn chunks(u: &AnnotatedUtterance) -> impl Iterator<Item = Chunk<'_>> {
    u.spans().iter().map(|s| (s.label.as_str(), s.start, s.end))
}

/// Micro-averaged exact-match chunk F1. With no chunks on either side every
/// score is 1.0; with chunks on one side only the empty side's ratio is 0.
pub fn slot_f1(pairs: &[PredictionPair]) -> Result<SlotScores, MetricsError> {
    check_aligned(pairs)?;
    let (mut tp, mut nr, mut nh) = (0, 0, 0);
    for p in pairs {
        let mut refs: HashMap<Chunk, usize> = HashMap::new();
        for c in chunks(&p.reference) {
            *refs.entry(c).or_insert(0) += 1;
            nr += 1;
        }
        for c in chunks(&p.hypothesis) {
            nh += 1;
            if let Some(n) = refs.get_mut(&c).filter(|n| **n > 0) {
                *n -= 1;
                tp += 1;
            }
        }
    }
    Ok(scores(tp, nr, nh))
}

fn scores(tp: usize, nr: usize, nh: usize) -> SlotScores {
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    let (precision, recall) = if nr == 0 && nh == 0 {
        (1.0, 1.0)
    } else {
        (ratio(tp, nh), ratio(tp, nr))
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    SlotScores {
        precision,
        recall,
        f1,
        true_positives: tp,
        reference_chunks: nr,
        hypothesis_chunks: nh,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SemerCounts {
    pub correct: usize,
    pub deletions: usize,
    pub insertions: usize,
    /// Slot and intent substitutions together.
    pub substitutions: usize,
    /// The intent share of `substitutions`.
    pub intent_substitutions: usize,
}

impl SemerCounts {
    pub fn add(&mut self, o: &SemerCounts) {
        self.correct += o.correct;
        self.deletions += o.deletions;
        self.insertions += o.insertions;
        self.substitutions += o.substitutions;
        self.intent_substitutions += o.intent_substitutions;
    }

    pub fn slot_substitutions(&self) -> usize {
        self.substitutions - self.intent_substitutions
    }

    /// `(Del + Ins + Sub) / (Cor + Del + Sub)`. A zero denominator gives 0.0
    /// when there are no insertions either and `None` otherwise.
    pub fn rate(&self) -> Option<f64> {
        let num = self.deletions + self.insertions + self.substitutions;
        let den = self.correct + self.deletions + self.substitutions;
        match (num, den) {
            (_, d) if d > 0 => Some(num as f64 / d as f64),
            (0, _) => Some(0.0),
            _ => None,
        }
    }
}

/// SemER operation counts for one pair.
pub fn semer_counts(reference: &AnnotatedUtterance, hypothesis: &AnnotatedUtterance) -> SemerCounts {
    let mut c = SemerCounts::default();
    if reference.intent() != hypothesis.intent() {
        c.substitutions += 1;
        c.intent_substitutions += 1;
    }
    let group = |u: &AnnotatedUtterance| {
        let mut m: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
        for (label, value) in u.slot_values() {
            m.entry(label.to_owned()).or_default().push(value.to_vec());
        }
        m
    };
    let refs = group(reference);
    let mut hyps = group(hypothesis);
    for (label, mut rv) in refs {
        let mut hv = hyps.remove(&label).unwrap_or_default();
        let mut i = 0;
        while i < rv.len() {
            if let Some(j) = hv.iter().position(|h| *h == rv[i]) {
                hv.swap_remove(j);
                rv.swap_remove(i);
                c.correct += 1;
            } else {
                i += 1;
            }
        }
        let subs = rv.len().min(hv.len());
        c.substitutions += subs;
        c.deletions += rv.len() - subs;
        c.insertions += hv.len() - subs;
    }
    c.insertions += hyps.values().map(Vec::len).sum::<usize>();
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Semer {
    pub counts: SemerCounts,
    pub semer: Option<f64>,
}

pub fn semer(pairs: &[PredictionPair]) -> Semer {
    let mut counts = SemerCounts::default();
    for p in pairs {
        counts.add(&semer_counts(&p.reference, &p.hypothesis));
    }
    Semer {
        counts,
        semer: counts.rate(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pairs: usize,
    pub target_intent: Option<String>,
    pub intent: IntentMetrics,
    pub slot_f1: SlotScores,
    /// Slot scores over pairs whose reference carries the target intent.
    pub local_slot_f1: Option<SlotScores>,
    pub semer: Semer,
}

pub fn eval_report(pairs: &[PredictionPair], target_intent: Option<&str>) -> Result<EvalReport, MetricsError> {
    let local_slot_f1 = match target_intent {
        Some(t) => {
            let local: Vec<PredictionPair> =
                pairs.iter().filter(|p| p.reference.intent() == t).cloned().collect();
            if local.is_empty() {
                None
            } else {
                Some(slot_f1(&local)?)
            }
        }
        None => None,
    };
    Ok(EvalReport {
        pairs: pairs.len(),
        target_intent: target_intent.map(str::to_owned),
        intent: intent_metrics(pairs, target_intent),
        slot_f1: slot_f1(pairs)?,
        local_slot_f1,
        semer: semer(pairs),
    })
}

fn pct(x: Option<f64>) -> String {
    x.map_or("-".to_owned(), |v| format!("{:.2}", v * 100.0))
}

impl EvalReport {
    /// Plain-text summary using the metric names of the result tables.
    pub fn to_text(&self) -> String {
        let mut lines = vec![format!("Pairs: {}", self.pairs)];
        if let Some(t) = &self.target_intent {
            lines.push(format!("Target intent: {t}"));
            lines.push(format!("Local Intent Recall: {}", pct(self.intent.local_recall)));
            lines.push(format!("Local ST F1: {}", pct(self.local_slot_f1.map(|s| s.f1))));
        }
        lines.push(format!("Global Intent Accuracy: {}", pct(self.intent.global_accuracy)));
        lines.push(format!(
            "Slot F1: {} (P {}, R {})",
            pct(Some(self.slot_f1.f1)),
            pct(Some(self.slot_f1.precision)),
            pct(Some(self.slot_f1.recall))
        ));
        let c = &self.semer.counts;
        lines.push(format!(
            "SemER: {} (Cor {}, Del {}, Ins {}, Sub {})",
            pct(self.semer.semer),
            c.correct,
            c.deletions,
            c.insertions,
            c.substitutions
        ));
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests;
