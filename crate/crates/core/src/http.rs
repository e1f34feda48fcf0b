//! Blocking JSON-over-HTTP calls with exponential-backoff retry, shared by
//! the embedding-service and generator clients.

use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

/// Header carrying a per-attempt request id.
pub const REQUEST_ID_HEADER: &str = "x-ragatr-request-id";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts, including the first.
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after every failure.
    pub base_delay: Duration,
    pub timeout: Duration,
}

impl RetryPolicy {
    pub fn embedding_default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(250),
            timeout: Duration::from_secs(30),
        }
    }

    pub fn generator_default() -> Self {
        Self::embedding_default()
    }

    /// Delay after failed attempt `attempt` (1-based).
    pub fn backoff(&self, attempt: u32) -> Duration {
        self.base_delay
            .saturating_mul(1u32.checked_shl(attempt.saturating_sub(1)).unwrap_or(u32::MAX))
    }
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self::embedding_default()
    }
}

#[derive(Debug, Clone, Error)]
pub enum HttpError {
    #[error("transport failure after {attempts} attempts: {last}")]
    Transport { attempts: u32, last: String },
    #[error("server returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed response: {0}")]
    Decode(String),
    #[error("client setup: {0}")]
    Setup(String),
}

pub(crate) fn build_client(policy: &RetryPolicy) -> Result<Client, HttpError> {
    Client::builder()
        .timeout(policy.timeout)
        .build()
        .map_err(|e| HttpError::Setup(e.to_string()))
}

fn retryable(status: StatusCode) -> bool {
    status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS
}

/// POSTs `body` as JSON and decodes a JSON reply. 5xx, 429 and transport
/// errors are retried; other non-2xx statuses fail immediately.
pub(crate) fn post_json<B: Serialize, R: DeserializeOwned>(
    client: &Client,
    policy: &RetryPolicy,
    url: &str,
    request_id: &str,
    body: &B,
) -> Result<R, HttpError> {
    let attempts = policy.max_attempts.max(1);
    let mut last = String::new();
    for attempt in 1..=attempts {
        let sent = client
            .post(url)
            .header(REQUEST_ID_HEADER, format!("{request_id}/{attempt}"))
            .json(body)
            .send();
        match sent {
            Ok(resp) if resp.status().is_success() => {
                return resp.json::<R>().map_err(|e| HttpError::Decode(e.to_string()));
            }
            Ok(resp) if retryable(resp.status()) => {
                last = format!("status {}", resp.status().as_u16());
                tracing::debug!(url, attempt, status = resp.status().as_u16(), "retrying");
            }
            Ok(resp) => {
                let status = resp.status().as_u16();
                let body = resp.text().unwrap_or_default();
                return Err(HttpError::Status { status, body });
            }
            Err(e) => {
                last = e.to_string();
                tracing::debug!(url, attempt, error = %e, "retrying");
            }
        }
        if attempt < attempts {
            thread::sleep(policy.backoff(attempt));
        }
    }
    Err(HttpError::Transport { attempts, last })
}

pub(crate) fn join_url(endpoint: &str, path: &str) -> String {
    format!("{}/{}", endpoint.trim_end_matches('/'), path.trim_start_matches('/'))
}
