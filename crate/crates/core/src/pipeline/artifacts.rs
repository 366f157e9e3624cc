//! On-disk artifacts: line-oriented JSON records and stage manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::AnnotatedUtterance;
use crate::filters::Reason;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Syntax { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Writes one JSON value per line, creating parent directories.
pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    rows: impl IntoIterator<Item = &'a T>,
) -> Result<(), ArtifactError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in rows {
        serde_json::to_writer(&mut w, r).map_err(|e| io_err(path)(e.into()))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ArtifactError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ArtifactError::Syntax {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), ArtifactError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path)(e.into()))?;
    write_text(path, &(text + "\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ArtifactError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| ArtifactError::Syntax {
        path: path.to_owned(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn sha256_file(path: &Path) -> Result<String, ArtifactError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// One rendered inference prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub index: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub starter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wildcard_label: Option<String>,
}

/// A generated output after parsing against its prompt's label map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub prompt_index: usize,
    pub output_index: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<AnnotatedUtterance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

/// Why a candidate was dropped, or `reason: null` when it was kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterLogRecord {
    pub prompt_index: usize,
    pub output_index: usize,
    pub reason: Option<Reason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_intent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// What a stage read and wrote. Output paths are relative to the run
/// directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub seed: u64,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Error)]
pub enum ChainError {
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("stage {stage}: input {path} does not match the hash recorded by {producer}")]
    Broken { stage: String, path: String, producer: String },
    #[error("stage {stage}: output {path} changed since the manifest was written")]
    Modified { stage: String, path: String },
    #[error("stage {0} consumes nothing produced by an earlier stage")]
    Unlinked(String),
}

pub const MANIFEST_DIR: &str = "manifests";

/// Manifests of a run directory in stage order.
pub fn read_manifests(run_dir: &Path) -> Result<Vec<StageManifest>, ArtifactError> {
    let dir = run_dir.join(MANIFEST_DIR);
    let mut names: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(io_err(&dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    names.sort();
    names.iter().map(|p| read_json(p)).collect()
}

/// Checks that every stage after the first reads at least one earlier output,
/// that those inputs carry the hashes their producers recorded, and that the
/// outputs on disk still match.
pub fn verify_chain(run_dir: &Path) -> Result<Vec<StageManifest>, ChainError> {
    let manifests = read_manifests(run_dir)?;
    let mut produced: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
    for (i, m) in manifests.iter().enumerate() {
        let mut linked = false;
        for input in &m.inputs {
            if let Some((hash, producer)) = produced.get(input.path.as_str()) {
                if *hash != input.sha256 {
                    return Err(ChainError::Broken {
                        stage: m.stage.clone(),
                        path: input.path.clone(),
                        producer: producer.to_string(),
                    });
                }
                linked = true;
            }
        }
        if i > 0 && !linked {
            return Err(ChainError::Unlinked(m.stage.clone()));
        }
        for o in &m.outputs {
            if sha256_file(&run_dir.join(&o.path))? != o.sha256 {
                return Err(ChainError::Modified {
                    stage: m.stage.clone(),
                    path: o.path.clone(),
                });
            }
            produced.insert(&o.path, (&o.sha256, &m.stage));
        }
    }
    Ok(manifests)
}

pub(crate) fn write_utterances(path: &Path, utts: &[AnnotatedUtterance]) -> Result<(), ArtifactError> {
    write_jsonl(path, utts)
}
