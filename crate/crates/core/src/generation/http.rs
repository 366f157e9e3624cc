//! Client for a remote generation service.
//!
//! Wire format, one POST per prompt:
//!
//! ```text
//! request:  {"prompt": "...", "top_k": 50, "temperature": 0.3, "num_outputs": 100}
//! response: {"outputs": [{"text": "...", "perplexity": 3.2}], "truncated": false}
//! ```
//!
//! `perplexity` and `truncated` are optional. Transport failures, 5xx and 429
//! responses are retried with exponential backoff.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, BackendResponse, RawOutput, SamplingParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub prompt: String,
    pub top_k: u32,
    pub temperature: f64,
    pub num_outputs: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireOutput {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub outputs: Vec<WireOutput>,
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    pub endpoint: String,
    pub auth_token: Option<String>,
    pub timeout_secs: f64,
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            auth_token: None,
            timeout_secs: 60.0,
            retries: 3,
            backoff_ms: 200,
        }
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build();
        Self { config, agent }
    }

    fn attempt(&self, body: &WireRequest) -> Result<WireResponse, (BackendError, bool)> {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.config.auth_token {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        match req.send_json(body) {
            Ok(resp) => resp
                .into_json::<WireResponse>()
                .map_err(|e| (BackendError::Protocol(format!("malformed response: {e}")), false)),
            Err(ureq::Error::Status(code, resp)) => {
                let retry = code == 429 || code >= 500;
                let detail = resp.into_string().unwrap_or_default();
                let err = if retry {
                    BackendError::Transport(format!("HTTP {code}: {detail}"))
                } else {
                    BackendError::Protocol(format!("HTTP {code}: {detail}"))
                };
                Err((err, retry))
            }
            Err(ureq::Error::Transport(t)) => Err((BackendError::Transport(t.to_string()), true)),
        }
    }
}

impl Backend for HttpBackend {
    fn complete(&self, prompt: &str, params: &SamplingParams) -> Result<BackendResponse, BackendError> {
        let body = WireRequest {
            prompt: prompt.to_owned(),
            top_k: params.top_k,
            temperature: params.temperature,
            num_outputs: params.num_outputs,
        };
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(resp) => {
                    return Ok(BackendResponse {
                        outputs: resp
                            .outputs
                            .into_iter()
                            .map(|o| RawOutput {
                                text: o.text,
                                perplexity: o.perplexity,
                            })
                            .collect(),
                        truncated: resp.truncated,
                    })
                }
                Err((_, true)) if attempt < self.config.retries => {
                    std::thread::sleep(Duration::from_millis(self.config.backoff_ms << attempt));
                    attempt += 1;
                }
                Err((err, _)) => return Err(err),
            }
        }
    }
}
