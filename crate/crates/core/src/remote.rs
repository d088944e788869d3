//! JSON-over-HTTP clients for the optional embedding and generation
//! endpoints.
//!
//! Secrets never live in the config file: the auth header *name* is
//! configured and the value is taken from an environment variable
//! (`KGRAG_EMBED_KEY` / `KGRAG_LLM_KEY`). All failures here are soft — the
//! callers fall back to the builtin embedder or the template answer.

use serde::{Deserialize, Serialize};

use crate::embed::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};

/// Environment variable holding the embedding endpoint secret.
pub const EMBED_KEY_ENV: &str = "KGRAG_EMBED_KEY";
/// Environment variable holding the generation endpoint secret.
pub const LLM_KEY_ENV: &str = "KGRAG_LLM_KEY";

/// A generic JSON endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub url: String,
    /// Header to send the secret under (e.g. "authorization"); none sends
    /// no auth header.
    #[serde(default)]
    pub auth_header: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    /// Which env var holds the secret.
    #[serde(skip, default)]
    pub key_env: &'static str,
}

fn default_timeout_ms() -> u64 {
    10_000
}

impl EndpointConfig {
    pub fn new(url: impl Into<String>, key_env: &'static str) -> EndpointConfig {
        EndpointConfig {
            url: url.into(),
            auth_header: None,
            timeout_ms: default_timeout_ms(),
            key_env,
        }
    }
}

/// Field-name adapter for the generation endpoint's JSON contract.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMap {
    pub prompt: String,
    pub temperature: String,
    pub max_tokens: String,
    pub response_text: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            prompt: "prompt".into(),
            temperature: "temperature".into(),
            max_tokens: "max_tokens".into(),
            response_text: "text".into(),
        }
    }
}

/// POST a JSON payload, expect a JSON reply.
pub fn post_json(endpoint: &EndpointConfig, payload: &serde_json::Value) -> Result<serde_json::Value> {
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(std::time::Duration::from_millis(endpoint.timeout_ms)))
        .build()
        .into();
    let mut request = agent.post(&endpoint.url);
    if let Some(header) = &endpoint.auth_header {
        let secret = std::env::var(endpoint.key_env).unwrap_or_default();
        if !secret.is_empty() {
            request = request.header(header.as_str(), secret.as_str());
        }
    }
    let mut response = request
        .send_json(payload)
        .map_err(|e| Error::Endpoint(format!("{}: {e}", endpoint.url)))?;
    response
        .body_mut()
        .read_json::<serde_json::Value>()
        .map_err(|e| Error::Endpoint(format!("{}: invalid JSON reply: {e}", endpoint.url)))
}

/// Pull a string field out of a JSON reply.
pub fn extract_string(value: &serde_json::Value, field: &str) -> Result<String> {
    value
        .get(field)
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| Error::Endpoint(format!("reply has no string field `{field}`")))
}

/// Embedder that calls an external endpoint: request `{"input": text}`,
/// reply `{"embedding": [floats]}`, re-normalized locally.
pub struct RemoteEmbedder {
    endpoint: EndpointConfig,
    id: String,
    dim: usize,
}

impl RemoteEmbedder {
    pub fn new(endpoint: EndpointConfig, dim: usize) -> RemoteEmbedder {
        let id = format!("remote:{}:{dim}", endpoint.url);
        RemoteEmbedder { endpoint, id, dim }
    }
}

impl Embedder for RemoteEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let payload = serde_json::json!({ "input": text });
        let reply = post_json(&self.endpoint, &payload)?;
        let values: Vec<f32> = reply
            .get("embedding")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::Endpoint("reply has no `embedding` array".into()))?
            .iter()
            .map(|v| v.as_f64().unwrap_or(f64::NAN) as f32)
            .collect();
        if values.len() != self.dim {
            return Err(Error::Endpoint(format!(
                "embedding dimension {} != expected {}",
                values.len(),
                self.dim
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Endpoint("embedding contains non-finite values".into()));
        }
        let mut vector = EmbeddingVector { values };
        vector.normalize();
        Ok(vector)
    }
}

/// An embedder that tries `primary` and falls back to the builtin hash
/// embedder with a warning. Carries the *primary* id so index/query
/// provenance checks still compare the configured embedder.
pub struct FallbackEmbedder<P: Embedder, F: Embedder> {
    primary: P,
    fallback: F,
}

impl<P: Embedder, F: Embedder> FallbackEmbedder<P, F> {
    pub fn new(primary: P, fallback: F) -> Self {
        FallbackEmbedder { primary, fallback }
    }
}

impl<P: Embedder, F: Embedder> Embedder for FallbackEmbedder<P, F> {
    fn id(&self) -> &str {
        self.primary.id()
    }

    fn dim(&self) -> usize {
        self.primary.dim()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        match self.primary.embed(text) {
            Ok(vector) => Ok(vector),
            Err(err) => {
                log::warn!(
                    "remote embedder failed ({err}); falling back to the builtin embedder"
                );
                self.fallback.embed(text)
            }
        }
    }
}

/// One-shot HTTP test server answering a single request with `body`; the
/// raw request is sent back through the channel.
#[cfg(test)]
pub(crate) fn serve_once_capturing(body: String) -> (String, std::sync::mpsc::Receiver<String>) {
    use std::io::{Read, Write};
    use std::net::TcpListener;

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut buf = [0u8; 65536];
        let mut read = 0;
        // Read until the end of the request body (Content-Length based).
        loop {
            let n = stream.read(&mut buf[read..]).unwrap();
            read += n;
            let text = String::from_utf8_lossy(&buf[..read]);
            if let Some(header_end) = text.find("\r\n\r\n") {
                let content_length = text
                    .lines()
                    .find_map(|l| {
                        l.to_ascii_lowercase()
                            .strip_prefix("content-length:")
                            .map(|v| v.trim().parse::<usize>().unwrap())
                    })
                    .unwrap_or(0);
                if read >= header_end + 4 + content_length {
                    break;
                }
            }
            if n == 0 {
                break;
            }
        }
        let response = format!(
            "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
            body.len(),
            body
        );
        stream.write_all(response.as_bytes()).unwrap();
        let _ = tx.send(String::from_utf8_lossy(&buf[..read]).into_owned());
    });
    (format!("http://{addr}"), rx)
}
