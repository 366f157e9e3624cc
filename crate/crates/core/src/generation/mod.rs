//! Text-generation backends.
//!
//! The language model sits behind [`Backend`]. [`generate`] fans a batch of
//! rendered prompts out to a backend with bounded concurrency and returns the
//! outputs grouped by prompt index, independent of completion order.

mod http;
mod mock;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpConfig, WireOutput, WireRequest, WireResponse};
pub use mock::{mock_generate, CorruptionConfig, Defect, MockBackend};

/// Safety ceiling on outputs per prompt.
pub const DEFAULT_HARD_CAP: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub top_k: u32,
    pub temperature: f64,
    pub num_outputs: u32,
}

impl SamplingParams {
    /// top-k 50, temperature 0.3, 100 outputs per prompt.
    pub fn snips() -> Self {
        Self {
            top_k: 50,
            temperature: 0.3,
            num_outputs: 100,
        }
    }

    pub fn validate(&self, hard_cap: u32) -> Result<(), GenerationError> {
        let bad = |m: String| Err(GenerationError::InvalidParams(m));
        if self.top_k == 0 {
            return bad("top_k must be positive".into());
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if self.num_outputs == 0 {
            return bad("num_outputs must be positive".into());
        }
        if self.num_outputs > hard_cap {
            return bad(format!(
                "num_outputs {} exceeds the hard cap {hard_cap}",
                self.num_outputs
            ));
        }
        Ok(())
    }
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self::snips()
    }
}

/// One generated string for the prompt at `prompt_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutput {
    pub prompt_index: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawOutput {
    pub text: String,
    pub perplexity: Option<f64>,
}

/// What a backend returns for one prompt. `truncated` marks a deliberate short
/// answer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BackendResponse {
    pub outputs: Vec<RawOutput>,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    /// Connection, timeout or server-side failure; worth retrying.
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("invalid prompt: {0}")]
    InvalidPrompt(String),
}

pub trait Backend: Sync {
    fn complete(&self, prompt: &str, params: &SamplingParams) -> Result<BackendResponse, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenerationError {
    #[error("invalid sampling parameters: {0}")]
    InvalidParams(String),
    #[error("prompt {prompt_index}: backend unreachable: {message}")]
    Transport { prompt_index: usize, message: String },
    #[error("prompt {prompt_index}: protocol error: {message}")]
    Protocol { prompt_index: usize, message: String },
    #[error("prompt {prompt_index}: {message}")]
    InvalidPrompt { prompt_index: usize, message: String },
}

impl GenerationError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, GenerationError::Transport { .. })
    }

    fn prompt_index(&self) -> usize {
        match self {
            GenerationError::InvalidParams(_) => 0,
            GenerationError::Transport { prompt_index, .. }
            | GenerationError::Protocol { prompt_index, .. }
            | GenerationError::InvalidPrompt { prompt_index, .. } => *prompt_index,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub prompt_index: usize,
    pub returned: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenerationBatch {
    pub outputs: Vec<GenerationOutput>,
    pub truncations: Vec<Truncation>,
}

fn check_response(
    prompt_index: usize,
    resp: BackendResponse,
    params: &SamplingParams,
) -> Result<(Vec<GenerationOutput>, Option<Truncation>), GenerationError> {
    let want = params.num_outputs as usize;
    let got = resp.outputs.len();
    let protocol = |message: String| GenerationError::Protocol {
        prompt_index,
        message,
    };
    if got > want {
        return Err(protocol(format!("{got} outputs returned, {want} requested")));
    }
    if got < want && !resp.truncated {
        return Err(protocol(format!(
            "{got} outputs returned, {want} requested, without truncation flag"
        )));
    }
    if let Some(p) = resp
        .outputs
        .iter()
        .filter_map(|o| o.perplexity)
        .find(|p| !(p.is_finite() && *p >= 0.0))
    {
        return Err(protocol(format!("invalid perplexity {p}")));
    }
    let outputs = resp
        .outputs
        .into_iter()
        .map(|o| GenerationOutput {
            prompt_index,
            text: o.text,
            perplexity: o.perplexity,
        })
        .collect();
    let truncation = (got < want).then_some(Truncation {
        prompt_index,
        returned: got,
    });
    Ok((outputs, truncation))
}

/// Generates `params.num_outputs` outputs for every prompt, with at most
/// `max_in_flight` backend calls running at once. The result is ordered by
/// prompt index, then by the backend's output order. On failure the error for
/// the lowest failing prompt index is returned.
pub fn generate(
    prompts: &[String],
    params: &SamplingParams,
    backend: &dyn Backend,
    max_in_flight: usize,
) -> Result<GenerationBatch, GenerationError> {
    params.validate(u32::MAX)?;
    let workers = max_in_flight.max(1).min(prompts.len());
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    type Slot = Option<Result<(Vec<GenerationOutput>, Option<Truncation>), GenerationError>>;
    let slots: Mutex<Vec<Slot>> = Mutex::new(vec![None; prompts.len()]);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= prompts.len() {
                    break;
                }
                let result = backend
                    .complete(&prompts[i], params)
                    .map_err(|e| match e {
                        BackendError::Transport(message) => GenerationError::Transport {
                            prompt_index: i,
                            message,
                        },
                        BackendError::Protocol(message) => GenerationError::Protocol {
                            prompt_index: i,
                            message,
                        },
                        BackendError::InvalidPrompt(message) => GenerationError::InvalidPrompt {
                            prompt_index: i,
                            message,
                        },
                    })
                    .and_then(|r| check_response(i, r, params));
                if result.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(result);
            });
        }
    });

    let slots = slots.into_inner().expect("workers finished");
    let mut batch = GenerationBatch::default();
    let mut first_err: Option<GenerationError> = None;
    for slot in slots.into_iter().flatten() {
        match slot {
            Ok((outs, trunc)) => {
                batch.outputs.extend(outs);
                batch.truncations.extend(trunc);
            }
            Err(e) => {
                if first_err.as_ref().is_none_or(|f| e.prompt_index() < f.prompt_index()) {
                    first_err = Some(e);
                }
            }
        }
    }
    match first_err {
        Some(e) => Err(e),
        None => Ok(batch),
    }
}
