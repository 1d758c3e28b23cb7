//! JSON-over-HTTP backend client.
//!
//! Requests POST `{"prompt"|"text", "params"}` and responses carry
//! `{"text"}` or `{"vector"}`, shaped to sit behind a thin adapter in
//! front of common open inference servers. Transport failures retry with
//! exponential backoff up to `max_retries`; budget and service errors
//! never retry.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    BackendDescriptor, BackendError, ChunkSummary, Decoding, EmbeddingVector, GenerationRequest,
};

/// Counting semaphore bounding in-flight requests per client.
struct InFlightLimit {
    available: Mutex<usize>,
    cv: Condvar,
}

impl InFlightLimit {
    fn new(permits: usize) -> Self {
        InFlightLimit {
            available: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut available = self.available.lock().unwrap();
        while *available == 0 {
            available = self.cv.wait(available).unwrap();
        }
        *available -= 1;
        InFlightGuard { limit: self }
    }
}

struct InFlightGuard<'a> {
    limit: &'a InFlightLimit,
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.limit.available.lock().unwrap() += 1;
        self.limit.cv.notify_one();
    }
}

#[derive(Serialize)]
struct GenerateBody<'a> {
    prompt: &'a str,
    params: GenerateParams,
}

#[derive(Serialize)]
struct GenerateParams {
    max_new_tokens: usize,
    decoding: Decoding,
}

#[derive(Serialize)]
struct TextBody<'a> {
    text: &'a str,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    completion_tokens: Option<usize>,
}

#[derive(Deserialize)]
struct TextResponse {
    text: String,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct VectorResponse {
    vector: Vec<f64>,
}

pub struct HttpBackend {
    descriptor: BackendDescriptor,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
    in_flight: InFlightLimit,
}

impl HttpBackend {
    pub fn new(
        descriptor: &BackendDescriptor,
        api_key: Option<String>,
    ) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(descriptor.timeout())
            .build()
            .map_err(|e| BackendError::Descriptor(format!("cannot build HTTP client: {e}")))?;
        Ok(HttpBackend {
            descriptor: descriptor.clone(),
            client,
            api_key,
            in_flight: InFlightLimit::new(descriptor.max_in_flight),
        })
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    pub fn generate(&self, req: &GenerationRequest) -> Result<String, BackendError> {
        let body = GenerateBody {
            prompt: &req.prompt,
            params: GenerateParams {
                max_new_tokens: req.max_new_tokens,
                decoding: req.decoding,
            },
        };
        let response: TextResponse = self.post_json(&body)?;
        Ok(response.text)
    }

    pub fn summarize_chunk(&self, text: &str) -> Result<ChunkSummary, BackendError> {
        let response: TextResponse = self.post_json(&TextBody { text })?;
        Ok(ChunkSummary {
            text: response.text,
            reported_tokens: response.usage.and_then(|u| u.completion_tokens),
        })
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        let response: VectorResponse = self.post_json(&TextBody { text })?;
        EmbeddingVector::new(response.vector)
    }

    /// POSTs `body`, retrying transport-class failures only. Non-2xx
    /// responses and malformed payloads fail immediately.
    fn post_json<B: Serialize, R: for<'de> Deserialize<'de>>(
        &self,
        body: &B,
    ) -> Result<R, BackendError> {
        let _guard = self.in_flight.acquire();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            let mut request = self.client.post(&self.descriptor.endpoint).json(body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            match request.send() {
                Ok(response) => {
                    let status = response.status();
                    let text = response.text().map_err(|e| BackendError::Transport {
                        attempts: attempt,
                        message: format!("failed reading response body: {e}"),
                    })?;
                    if !status.is_success() {
                        return Err(BackendError::Service {
                            status: status.as_u16(),
                            body: text,
                        });
                    }
                    return serde_json::from_str(&text)
                        .map_err(|e| BackendError::Protocol(format!("bad response JSON: {e}")));
                }
                Err(e) => {
                    if attempt > self.descriptor.max_retries {
                        return Err(BackendError::Transport {
                            attempts: attempt,
                            message: e.to_string(),
                        });
                    }
                    std::thread::sleep(backoff_delay(attempt));
                }
            }
        }
    }
}

fn backoff_delay(attempt: u32) -> Duration {
    let millis = 200u64.saturating_mul(1 << attempt.min(5));
    Duration::from_millis(millis.min(5_000))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::BackendKind;

    #[test]
    fn unreachable_host_yields_transport_error_after_retries() {
        let descriptor = BackendDescriptor {
            kind: BackendKind::Summarize,
            // Port 1 is reserved; connections are refused immediately.
            endpoint: "http://127.0.0.1:1/summarize".into(),
            context_window: 1024,
            embedding_dim: None,
            timeout_secs: 2,
            max_retries: 1,
            max_in_flight: 2,
        };
        let backend = HttpBackend::new(&descriptor, None).unwrap();
        match backend.summarize_chunk("Some text.") {
            Err(BackendError::Transport { attempts, .. }) => assert_eq!(attempts, 2),
            other => panic!("expected transport error, got {other:?}"),
        }
    }

    #[test]
    fn backoff_grows_and_caps() {
        assert!(backoff_delay(1) < backoff_delay(2));
        assert!(backoff_delay(10) <= Duration::from_secs(5));
    }
}
