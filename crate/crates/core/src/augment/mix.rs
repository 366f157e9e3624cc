use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotatedUtterance, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixSpec {
    #[serde(default = "half")]
    pub starter_weight: f64,
    pub target_size: usize,
}

fn half() -> f64 {
    0.5
}

impl MixSpec {
    pub fn new(target_size: usize) -> Self {
        Self {
            starter_weight: 0.5,
            target_size,
        }
    }

    /// Starter rows in the mix, rounding half up.
    pub fn starter_share(&self) -> usize {
        (self.starter_weight * self.target_size as f64 + 0.5).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixError {
    #[error("no starter utterances to up-sample")]
    NoStarters,
    #[error("starter weight must lie in [0, 1], got {0}")]
    BadWeight(f64),
    #[error("target size must be at least 1")]
    EmptyTarget,
}

/// Mixes up-sampled starters with generated rows to exactly
/// `spec.target_size` rows. Starters are cycled in order and marked
/// [`Provenance::Upsampled`]; the generated share is drawn with replacement.
/// Without generated rows the starters fill everything.
pub fn upsample_mix(
    starters: &[AnnotatedUtterance],
    generated: &[AnnotatedUtterance],
    spec: &MixSpec,
    rng: &mut impl Rng,
) -> Result<Vec<AnnotatedUtterance>, MixError> {
    if !(0.0..=1.0).contains(&spec.starter_weight) {
        return Err(MixError::BadWeight(spec.starter_weight));
    }
    if spec.target_size == 0 {
        return Err(MixError::EmptyTarget);
    }
    if starters.is_empty() {
        return Err(MixError::NoStarters);
    }
    let n_starters = if generated.is_empty() {
        spec.target_size
    } else {
        spec.starter_share()
    };
    let mut out: Vec<AnnotatedUtterance> = starters
        .iter()
        .cycle()
        .take(n_starters)
        .map(|u| u.clone().with_provenance(Provenance::Upsampled))
        .collect();
    out.extend((n_starters..spec.target_size).map(|_| generated.choose(rng).expect("non-empty").clone()));
    Ok(out)
}

/// Candidate values per slot label.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Vec<String>>", into = "BTreeMap<String, Vec<String>>")]
pub struct SlotCatalog {
    values: BTreeMap<String, Vec<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("catalog for {0} is empty")]
    EmptyList(String),
    #[error("catalog for {0} has an empty or malformed value")]
    BadValue(String),
}

impl SlotCatalog {
    pub fn new(values: BTreeMap<String, Vec<Vec<String>>>) -> Result<Self, CatalogError> {
        for (label, list) in &values {
            if list.is_empty() {
                return Err(CatalogError::EmptyList(label.clone()));
            }
            let bad_token = |t: &String| t.is_empty() || t.chars().any(char::is_whitespace);
            if list.iter().any(|v| v.is_empty() || v.iter().any(bad_token)) {
                return Err(CatalogError::BadValue(label.clone()));
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, label: &str) -> Option<&[Vec<String>]> {
        self.values.get(label).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl TryFrom<BTreeMap<String, Vec<String>>> for SlotCatalog {
    type Error = CatalogError;

    fn try_from(m: BTreeMap<String, Vec<String>>) -> Result<Self, Self::Error> {
        SlotCatalog::new(
            m.into_iter()
                .map(|(k, vs)| {
                    let vs = vs
                        .iter()
                        .map(|v| v.split_whitespace().map(str::to_owned).collect())
                        .collect();
                    (k, vs)
                })
                .collect(),
        )
    }
}

impl From<SlotCatalog> for BTreeMap<String, Vec<String>> {
    fn from(c: SlotCatalog) -> Self {
        c.values
            .into_iter()
            .map(|(k, vs)| (k, vs.into_iter().map(|v| v.join(" ")).collect()))
            .collect()
    }
}

/// `n_per_utterance` variants of each utterance with every catalogued slot
/// value replaced by a uniform draw for its label. Variants are marked
/// [`Provenance::Generated`].
pub fn catalog_resample(
    utterances: &[AnnotatedUtterance],
    catalog: &SlotCatalog,
    n_per_utterance: usize,
    rng: &mut impl Rng,
) -> Vec<AnnotatedUtterance> {
    let mut out = Vec::with_capacity(utterances.len() * n_per_utterance);
    for u in utterances {
        for _ in 0..n_per_utterance {
            let values: Vec<Option<Vec<String>>> = u
                .spans()
                .iter()
                .map(|s| catalog.get(&s.label).map(|c| c.choose(rng).expect("non-empty").clone()))
                .collect();
            let v = u
                .replace_values(&values)
                .expect("non-empty whitespace-free values keep the annotation valid");
            out.push(v.with_provenance(Provenance::Generated));
        }
    }
    out
}
