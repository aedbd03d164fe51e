//! Chat-completions client over HTTP.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::llm::{ChatRequest, LlmEndpoint, LlmError};

pub const BASE_URL_ENV: &str = "ENVKB_LLM_BASE_URL";
pub const API_KEY_ENV: &str = "ENVKB_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub timeout_secs: f64,
    pub retries: u32,
    /// Pause before retry `n` is `backoff_ms · n`.
    pub backoff_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: "http://127.0.0.1:8000/v1".into(),
            api_key: None,
            timeout_secs: 60.0,
            retries: 2,
            backoff_ms: 250,
        }
    }
}

impl HttpConfig {
    /// Apply `ENVKB_LLM_BASE_URL` / `ENVKB_LLM_API_KEY` when set.
    pub fn with_env_overrides(mut self) -> Self {
        if let Ok(u) = std::env::var(BASE_URL_ENV) {
            if !u.trim().is_empty() {
                self.base_url = u;
            }
        }
        if let Ok(k) = std::env::var(API_KEY_ENV) {
            if !k.trim().is_empty() {
                self.api_key = Some(k);
            }
        }
        self
    }
}

pub struct HttpEndpoint {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

impl HttpEndpoint {
    pub fn new(config: HttpConfig) -> Result<Self, LlmError> {
        if !(config.timeout_secs > 0.0 && config.timeout_secs.is_finite()) {
            return Err(LlmError::Protocol("timeout must be positive".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Unavailable(e.to_string()))?;
        Ok(HttpEndpoint { config, client })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn once(&self, body: &serde_json::Value) -> Result<String, LlmError> {
        let mut rb = self.client.post(self.url()).json(body);
        if let Some(k) = &self.config.api_key {
            rb = rb.bearer_auth(k);
        }
        let resp = rb.send().map_err(|e| LlmError::Unavailable(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| LlmError::Unavailable(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Http { status: status.as_u16(), body: text });
        }
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| LlmError::Protocol(format!("invalid JSON: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| LlmError::Protocol("missing choices[0].message.content".into()))
    }
}

fn retryable(e: &LlmError) -> bool {
    match e {
        LlmError::Unavailable(_) => true,
        LlmError::Http { status, .. } => *status == 429 || *status >= 500,
        LlmError::Protocol(_) => false,
    }
}

impl LlmEndpoint for HttpEndpoint {
    fn complete(&self, req: &ChatRequest) -> Result<String, LlmError> {
        let mut body = json!({
            "model": req.model,
            "messages": req.messages,
            "temperature": req.temperature,
        });
        if let Some(s) = req.seed {
            body["seed"] = json!(s);
        }
        let mut attempt = 0;
        loop {
            match self.once(&body) {
                Ok(t) => return Ok(t),
                Err(e) if retryable(&e) && attempt < self.config.retries => {
                    attempt += 1;
                    tracing::warn!(attempt, error = %e, "retrying chat completion");
                    std::thread::sleep(Duration::from_millis(self.config.backoff_ms * attempt as u64));
                }
                Err(LlmError::Http { status, body }) if status == 429 || status >= 500 => {
                    return Err(LlmError::Unavailable(format!("HTTP {status} after {} attempts: {body}", attempt + 1)))
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn describe(&self) -> String {
        format!("http:{}", self.config.base_url)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rag::llm::ChatMessage;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;

    /// Serve `responses` in order, one per connection, and report each
    /// request body.
    fn mock(responses: Vec<(u16, String)>) -> (String, mpsc::Receiver<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", listener.local_addr().unwrap());
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if line == "\r\n" || line.is_empty() {
                        break;
                    }
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                tx.send(String::from_utf8(buf).unwrap()).unwrap();
                let mut s = stream;
                write!(
                    s,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        (url, rx)
    }

    fn request() -> ChatRequest {
        ChatRequest {
            model: "test-model".into(),
            messages: vec![ChatMessage::user("hi")],
            temperature: 0.0,
            seed: Some(7),
        }
    }

    fn endpoint(url: String, retries: u32) -> HttpEndpoint {
        HttpEndpoint::new(HttpConfig { base_url: url, retries, backoff_ms: 1, timeout_secs: 5.0, api_key: None })
            .unwrap()
    }

    #[test]
    fn sends_chat_body_and_reads_content() {
        let ok = r#"{"choices":[{"message":{"role":"assistant","content":"step 1: (1, 2)"}}]}"#;
        let (url, rx) = mock(vec![(200, ok.into())]);
        let out = endpoint(url, 0).complete(&request()).unwrap();
        assert_eq!(out, "step 1: (1, 2)");
        let sent: serde_json::Value = serde_json::from_str(&rx.recv().unwrap()).unwrap();
        assert_eq!(sent["model"], "test-model");
        assert_eq!(sent["seed"], 7);
        assert_eq!(sent["messages"][0]["role"], "user");
    }

    #[test]
    fn retries_server_errors() {
        let ok = r#"{"choices":[{"message":{"content":"fine"}}]}"#;
        let (url, _rx) = mock(vec![(503, "{}".into()), (200, ok.into())]);
        assert_eq!(endpoint(url, 1).complete(&request()).unwrap(), "fine");
    }

    #[test]
    fn gives_up_after_retries() {
        let (url, _rx) = mock(vec![(500, "{}".into()), (500, "{}".into())]);
        assert!(matches!(endpoint(url, 1).complete(&request()), Err(LlmError::Unavailable(_))));
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, _rx) = mock(vec![(400, "bad".into())]);
        assert!(matches!(endpoint(url, 3).complete(&request()), Err(LlmError::Http { status: 400, .. })));
    }

    #[test]
    fn connection_refused_is_unavailable() {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1", l.local_addr().unwrap());
        drop(l);
        assert!(matches!(endpoint(url, 0).complete(&request()), Err(LlmError::Unavailable(_))));
    }
}
