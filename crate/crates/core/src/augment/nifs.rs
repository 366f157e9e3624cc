//! New-intent few-shot splits.

use std::collections::BTreeSet;
use std::io::BufRead;

use md5::{Digest, Md5};
use rand::seq::{IteratorRandom, SliceRandom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{spans_to_bracket, AnnotatedUtterance, Corpus};
use crate::prompt::LabelMap;
use crate::rng::substream;

const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NifsConfig {
    pub target_intent: String,
    #[serde(default = "default_k")]
    pub k_starters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub explicit_row_ids: Option<Vec<usize>>,
}

fn default_k() -> usize {
    10
}

impl NifsConfig {
    pub fn new(target_intent: impl Into<String>, seed: u64) -> Self {
        Self {
            target_intent: target_intent.into(),
            k_starters: default_k(),
            seed,
            explicit_row_ids: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NifsError {
    #[error("intent {0} does not occur in the corpus")]
    UnknownIntent(String),
    #[error("intent {intent} has {available} rows, fewer than k={k}")]
    TooFewRows { intent: String, available: usize, k: usize },
    #[error("no {k} rows of {intent} cover all {labels} slot types")]
    CoverageUnsatisfiable { intent: String, k: usize, labels: usize },
    #[error("row {0} does not exist")]
    MissingRow(usize),
    #[error("row {row} has intent {found}, expected {expected}")]
    WrongIntent { row: usize, found: String, expected: String },
    #[error("row {0} is listed twice")]
    DuplicateRow(usize),
    #[error("checksum mismatch: file says {expected}, selected rows hash to {actual}")]
    ChecksumMismatch { expected: String, actual: String },
}

/// Row ids (0-based, ascending) of a split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NifsSplit {
    pub starters: Vec<usize>,
    pub remainder: Vec<usize>,
    pub others: Vec<usize>,
    /// Slot types of the intent missing from the starters. Always empty for
    /// sampled splits.
    pub uncovered: Vec<String>,
}

impl NifsSplit {
    pub fn starter_rows<'a>(&self, corpus: &'a Corpus) -> Vec<&'a AnnotatedUtterance> {
        self.starters.iter().map(|&r| &corpus.utterances()[r]).collect()
    }

    /// Training data for the split: the starters followed by all other
    /// intents' rows, in corpus order.
    pub fn reduced_corpus(&self, corpus: &Corpus) -> Corpus {
        let keep: BTreeSet<usize> = self.starters.iter().chain(&self.others).copied().collect();
        keep.into_iter().map(|r| corpus.utterances()[r].clone()).collect()
    }
}

fn missing_labels(corpus: &Corpus, rows: &[usize], labels: &[String]) -> Vec<String> {
    let present: BTreeSet<&str> = rows
        .iter()
        .flat_map(|&r| corpus.utterances()[r].spans().iter().map(|s| s.label.as_str()))
        .collect();
    labels.iter().filter(|l| !present.contains(l.as_str())).cloned().collect()
}

/// Greedy cover in random order, topped up with random rows.
fn greedy_cover(
    corpus: &Corpus,
    rows: &[usize],
    labels: &[String],
    k: usize,
    rng: &mut impl rand::Rng,
) -> Option<Vec<usize>> {
    let mut order = rows.to_vec();
    order.shuffle(rng);
    let mut chosen: Vec<usize> = Vec::new();
    let mut uncovered: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
    while !uncovered.is_empty() {
        let gain = |r: usize| {
            let labels: BTreeSet<&str> =
                corpus.utterances()[r].spans().iter().map(|s| s.label.as_str()).collect();
            labels.intersection(&uncovered).count()
        };
        let best = order
            .iter()
            .copied()
            .filter(|r| !chosen.contains(r))
            .max_by_key(|&r| (gain(r), std::cmp::Reverse(order.iter().position(|&o| o == r))))?;
        if gain(best) == 0 {
            return None;
        }
        for s in corpus.utterances()[best].spans() {
            uncovered.remove(s.label.as_str());
        }
        chosen.push(best);
    }
    if chosen.len() > k {
        return None;
    }
    let rest: Vec<usize> = order.into_iter().filter(|r| !chosen.contains(r)).collect();
    chosen.extend(rest.into_iter().take(k - chosen.len()));
    Some(chosen)
}

/// Reduces `target_intent` to `k_starters` rows covering every slot type the
/// intent uses. Starters are drawn uniformly and redrawn until the coverage
/// holds; after a bounded number of attempts a randomised greedy cover is
/// tried before giving up.
///
/// With `explicit_row_ids` the listed rows are used as given, and any slot
/// type they miss is reported in [`NifsSplit::uncovered`].
pub fn nifs_split(corpus: &Corpus, cfg: &NifsConfig) -> Result<NifsSplit, NifsError> {
    let intent = &cfg.target_intent;
    let rows = corpus.rows_for_intent(intent);
    if rows.is_empty() {
        return Err(NifsError::UnknownIntent(intent.clone()));
    }
    let labels = corpus.slot_labels(intent);

    let mut starters = match &cfg.explicit_row_ids {
        Some(ids) => {
            let mut seen = BTreeSet::new();
            for &r in ids {
                let u = corpus.get(r).ok_or(NifsError::MissingRow(r))?;
                if u.intent() != intent {
                    return Err(NifsError::WrongIntent {
                        row: r,
                        found: u.intent().to_owned(),
                        expected: intent.clone(),
                    });
                }
                if !seen.insert(r) {
                    return Err(NifsError::DuplicateRow(r));
                }
            }
            ids.clone()
        }
        None => sample_starters(corpus, &rows, &labels, cfg)?,
    };
    starters.sort_unstable();
    let chosen: BTreeSet<usize> = starters.iter().copied().collect();
    let remainder = rows.iter().copied().filter(|r| !chosen.contains(r)).collect();
    let others = (0..corpus.len())
        .filter(|&r| corpus.utterances()[r].intent() != intent)
        .collect();
    let uncovered = missing_labels(corpus, &starters, &labels);
    Ok(NifsSplit {
        starters,
        remainder,
        others,
        uncovered,
    })
}

fn sample_starters(
    corpus: &Corpus,
    rows: &[usize],
    labels: &[String],
    cfg: &NifsConfig,
) -> Result<Vec<usize>, NifsError> {
    let k = cfg.k_starters;
    if k > rows.len() {
        return Err(NifsError::TooFewRows {
            intent: cfg.target_intent.clone(),
            available: rows.len(),
            k,
        });
    }
    let mut rng = substream(cfg.seed, 0);
    for _ in 0..MAX_ATTEMPTS {
        let pick = rows.iter().copied().choose_multiple(&mut rng, k);
        if missing_labels(corpus, &pick, labels).is_empty() {
            return Ok(pick);
        }
    }
    greedy_cover(corpus, rows, labels, k, &mut rng).ok_or_else(|| NifsError::CoverageUnsatisfiable {
        intent: cfg.target_intent.clone(),
        k,
        labels: labels.len(),
    })
}

/// A parsed row-id file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowIdFile {
    pub rows: Vec<usize>,
    pub md5: Option<String>,
}

#[derive(Debug, Error)]
pub enum RowIdFileError {
    #[error("line {line}: expected a row id, found {text:?}")]
    BadLine { line: usize, text: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads one 0-based row id per line. Blank lines are skipped and a line
/// `#md5:<hex>` records a checksum.
pub fn read_row_ids(reader: impl BufRead) -> Result<RowIdFile, RowIdFileError> {
    let mut out = RowIdFile {
        rows: Vec::new(),
        md5: None,
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(sum) = t.strip_prefix("#md5:") {
            out.md5 = Some(sum.trim().to_ascii_lowercase());
            continue;
        }
        let row = t.parse().map_err(|_| RowIdFileError::BadLine {
            line: i + 1,
            text: t.to_owned(),
        })?;
        out.rows.push(row);
    }
    Ok(out)
}

/// md5 over the bracket text of each row, in the listed order, each followed by
/// a newline. Slot numbers come from the intent's labels in first-appearance
/// order.
pub fn rows_md5(corpus: &Corpus, rows: &[usize]) -> Result<String, NifsError> {
    let mut h = Md5::new();
    for &r in rows {
        let u = corpus.get(r).ok_or(NifsError::MissingRow(r))?;
        let map = LabelMap::from_labels(corpus.slot_labels(u.intent()))
            .expect("corpus labels are valid and distinct");
        let text = spans_to_bracket(u, &map).unwrap_or_else(|_| u.text());
        h.update(text.as_bytes());
        h.update(b"\n");
    }
    Ok(format!("{:x}", h.finalize()))
}

/// Checks a row-id file's checksum, when it has one, against `corpus`.
pub fn verify_row_ids(corpus: &Corpus, file: &RowIdFile) -> Result<(), NifsError> {
    let Some(expected) = &file.md5 else {
        return Ok(());
    };
    let actual = rows_md5(corpus, &file.rows)?;
    if &actual != expected {
        return Err(NifsError::ChecksumMismatch {
            expected: expected.clone(),
            actual,
        });
    }
    Ok(())
}
