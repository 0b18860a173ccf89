//! HTTP next-token backend speaking a completions-style protocol.
//!
//! Request: `POST <endpoint>` with body
//! `{"prompt": …, "max_tokens": 1, "logprobs": n, "echo": false}`.
//! Response: the first choice's `logprobs.top_logprobs[0]` object, mapping
//! each of the top-n next tokens to its logprob.
//!
//! Transient failures (transport errors, 5xx) are retried with bounded
//! exponential backoff — three attempts total. A 413 means the prompt
//! exceeds the backend's context and is surfaced immediately as
//! [`LlmError::PromptTooLong`]; any other non-success status or an
//! unparseable body is a protocol error.
//!
//! The bearer token is read from the `PATCHVET_API_TOKEN` environment
//! variable at construction. It is deliberately not a flag or config-file
//! key, so it can never leak into shell history, reports, or config echoes.

use std::time::Duration;

use patchvet_core::llm::{Backend, Completeness, LlmError, NextTokenDistribution};

/// Environment variable holding the optional bearer token.
pub const TOKEN_ENV_VAR: &str = "PATCHVET_API_TOKEN";

const ATTEMPTS: u32 = 3;
const BACKOFF_BASE: Duration = Duration::from_millis(200);

#[derive(serde::Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
    max_tokens: u32,
    logprobs: usize,
    echo: bool,
}

#[derive(serde::Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(serde::Deserialize)]
struct Choice {
    logprobs: ChoiceLogprobs,
}

#[derive(serde::Deserialize)]
struct ChoiceLogprobs {
    /// One map per generated position; position 0 is the next token.
    top_logprobs: Vec<std::collections::BTreeMap<String, f64>>,
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    token: Option<String>,
    logprobs: usize,
    /// Sleep hook; tests replace it to avoid real backoff delays.
    sleeper: Box<dyn Fn(Duration) + Send + Sync>,
}

impl HttpBackend {
    /// Builds a backend for `endpoint`. Reads the bearer token from
    /// [`TOKEN_ENV_VAR`] if set; requests omit authorization otherwise.
    pub fn new(endpoint: &str, timeout_secs: u64, logprobs: usize) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(timeout_secs))
            .build()
            .map_err(|e| LlmError::ProtocolError {
                detail: format!("cannot build HTTP client: {e}"),
            })?;
        Ok(HttpBackend {
            client,
            endpoint: endpoint.to_string(),
            token: std::env::var(TOKEN_ENV_VAR).ok().filter(|t| !t.is_empty()),
            logprobs,
            sleeper: Box::new(std::thread::sleep),
        })
    }

    #[cfg(test)]
    fn without_backoff_delay(mut self) -> Self {
        self.sleeper = Box::new(|_| {});
        self
    }

    /// One request/response cycle. `Err(Some(_))` is final, `Err(None)`
    /// carries a retryable failure description back to the retry loop.
    fn attempt(&self, prompt: &str) -> Result<NextTokenDistribution, (Option<LlmError>, String)> {
        let body = CompletionRequest {
            prompt,
            max_tokens: 1,
            logprobs: self.logprobs,
            echo: false,
        };
        let mut request = self.client.post(&self.endpoint).json(&body);
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|e| (None, format!("transport failure: {e}")))?;

        let status = response.status();
        if status == reqwest::StatusCode::PAYLOAD_TOO_LARGE {
            return Err((
                Some(LlmError::PromptTooLong {
                    detail: format!("backend rejected prompt: HTTP {status}"),
                }),
                String::new(),
            ));
        }
        if status.is_server_error() {
            return Err((None, format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err((
                Some(LlmError::ProtocolError {
                    detail: format!("unexpected HTTP {status}"),
                }),
                String::new(),
            ));
        }

        let parsed: CompletionResponse = response.json().map_err(|e| {
            (
                Some(LlmError::ProtocolError {
                    detail: format!("unparseable response body: {e}"),
                }),
                String::new(),
            )
        })?;
        let protocol = |detail: &str| {
            (
                Some(LlmError::ProtocolError {
                    detail: detail.to_string(),
                }),
                String::new(),
            )
        };
        let choice = parsed
            .choices
            .first()
            .ok_or_else(|| protocol("response has no choices"))?;
        let top = choice
            .logprobs
            .top_logprobs
            .first()
            .ok_or_else(|| protocol("response has no next-token logprobs"))?;
        if top.is_empty() {
            return Err(protocol("next-token logprob map is empty"));
        }
        if let Some((token, &lp)) = top.iter().find(|(t, lp)| t.is_empty() || !lp.is_finite()) {
            return Err(protocol(&format!(
                "unusable logprob entry ({token:?}, {lp})"
            )));
        }

        let mut entries: Vec<(String, f64)> = top.iter().map(|(t, &lp)| (t.clone(), lp)).collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Ok(NextTokenDistribution {
            entries,
            completeness: Completeness::TopK(self.logprobs),
        })
    }
}

impl Backend for HttpBackend {
    fn query_next_token(
        &self,
        prompt: &str,
        _candidates: &[&str],
    ) -> Result<NextTokenDistribution, LlmError> {
        let mut last_detail = String::new();
        for attempt in 0..ATTEMPTS {
            if attempt > 0 {
                (self.sleeper)(BACKOFF_BASE * 2u32.pow(attempt - 1));
            }
            match self.attempt(prompt) {
                Ok(dist) => return Ok(dist),
                Err((Some(fatal), _)) => return Err(fatal),
                Err((None, detail)) => last_detail = detail,
            }
        }
        Err(LlmError::BackendUnavailable {
            attempts: ATTEMPTS,
            detail: last_detail,
        })
    }
}
