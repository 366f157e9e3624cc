use std::collections::{BTreeMap, HashMap};

use crate::corpus::AnnotatedUtterance;

/// Predicts an intent for plain utterance text. Must be deterministic for a
/// fixed model state.
pub trait IntentClassifier: Sync {
    fn classify(&self, text: &str) -> (String, f64);
}

type Bag = HashMap<String, f64>;

fn bag(text: &str) -> Bag {
    let mut b = Bag::new();
    for t in text.split_whitespace() {
        *b.entry(t.to_lowercase()).or_insert(0.0) += 1.0;
    }
    normalize(&mut b);
    b
}

fn normalize(b: &mut Bag) {
    let norm = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        b.values_mut().for_each(|v| *v /= norm);
    }
}

/// Bag-of-words nearest-centroid classifier scored by cosine similarity.
#[derive(Debug, Clone, Default)]
pub struct CentroidClassifier {
    centroids: BTreeMap<String, Bag>,
}

impl CentroidClassifier {
    pub fn fit<'a>(utterances: impl IntoIterator<Item = &'a AnnotatedUtterance>) -> Self {
        Self::fit_texts(utterances.into_iter().map(|u| (u.intent().to_owned(), u.text())))
    }

    pub fn fit_texts(rows: impl IntoIterator<Item = (String, String)>) -> Self {
        let mut centroids: BTreeMap<String, Bag> = BTreeMap::new();
        for (intent, text) in rows {
            let c = centroids.entry(intent).or_default();
            for (w, v) in bag(&text) {
                *c.entry(w).or_insert(0.0) += v;
            }
        }
        centroids.values_mut().for_each(normalize);
        Self { centroids }
    }

    pub fn intents(&self) -> impl Iterator<Item = &str> {
        self.centroids.keys().map(String::as_str)
    }
}

impl IntentClassifier for CentroidClassifier {
    /// Ties go to the lexicographically smallest intent.
    fn classify(&self, text: &str) -> (String, f64) {
        let q = bag(text);
        let mut best: Option<(&str, f64)> = None;
        for (intent, c) in &self.centroids {
            let score: f64 = q.iter().map(|(w, v)| v * c.get(w).copied().unwrap_or(0.0)).sum();
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((intent, score));
            }
        }
        best.map_or((String::new(), 0.0), |(i, s)| (i.to_owned(), s))
    }
}
