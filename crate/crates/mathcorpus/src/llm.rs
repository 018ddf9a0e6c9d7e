//! LLM client abstraction: one trait, a live HTTP client for
//! chat-completions-compatible endpoints, and a deterministic mock that the
//! entire test suite runs against.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;

/// One completion request.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        ChatRequest {
            prompt: prompt.into(),
            temperature: 0.7,
            max_tokens: 2048,
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("missing configuration: {0}")]
    MissingConfig(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("bad response: {0}")]
    BadResponse(String),
    #[error("retries exhausted after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("mock script exhausted")]
    ScriptExhausted,
}

/// Anything that can complete a prompt. Implementations must be shareable
/// across worker threads.
pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
    /// Model identifier recorded on synthesized records.
    fn name(&self) -> &str;
}

/// Minimum-interval rate limiter shared across worker threads.
struct RateLimiter {
    min_interval: Duration,
    last: Mutex<Option<Instant>>,
}

impl RateLimiter {
    fn wait(&self) {
        let sleep_for = {
            let mut last = self.last.lock().expect("limiter lock");
            let now = Instant::now();
            let wait = match *last {
                Some(prev) => {
                    let next_ok = prev + self.min_interval;
                    next_ok.saturating_duration_since(now)
                }
                None => Duration::ZERO,
            };
            *last = Some(now + wait);
            wait
        };
        if !sleep_for.is_zero() {
            std::thread::sleep(sleep_for);
        }
    }
}

/// Environment variable names for live-endpoint configuration.
pub const ENV_ENDPOINT: &str = "MATHCORPUS_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "MATHCORPUS_LLM_API_KEY";
pub const ENV_MODEL: &str = "MATHCORPUS_LLM_MODEL";

/// Blocking HTTP client for a chat-completions-compatible endpoint.
pub struct LiveChatClient {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    max_retries: u32,
    backoff_base: Duration,
    rate: Option<RateLimiter>,
    http: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: String,
}

impl LiveChatClient {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        LiveChatClient {
            endpoint: endpoint.into(),
            api_key: None,
            model: model.into(),
            max_retries: 3,
            backoff_base: Duration::from_millis(250),
            rate: None,
            http: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("default HTTP client"),
        }
    }

    /// Configure from `MATHCORPUS_LLM_ENDPOINT` / `_MODEL` / `_API_KEY`.
    pub fn from_env() -> Result<Self, LlmError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| LlmError::MissingConfig(ENV_ENDPOINT.to_string()))?;
        let model =
            std::env::var(ENV_MODEL).map_err(|_| LlmError::MissingConfig(ENV_MODEL.to_string()))?;
        let mut client = LiveChatClient::new(endpoint, model);
        if let Ok(key) = std::env::var(ENV_API_KEY) {
            client.api_key = Some(key);
        }
        Ok(client)
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_max_retries(mut self, retries: u32) -> Self {
        self.max_retries = retries;
        self
    }

    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    /// Cap the request rate (global across threads).
    pub fn with_max_requests_per_second(mut self, rps: f64) -> Self {
        assert!(rps > 0.0);
        self.rate = Some(RateLimiter {
            min_interval: Duration::from_secs_f64(1.0 / rps),
            last: Mutex::new(None),
        });
        self
    }

    fn attempt(&self, request: &ChatRequest) -> Result<String, LlmError> {
        if let Some(rate) = &self.rate {
            rate.wait();
        }
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut req = self.http.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let response = req.send().map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = response.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(LlmError::Transport(format!("retryable status {status}")));
        }
        if !status.is_success() {
            return Err(LlmError::BadResponse(format!("status {status}")));
        }
        let parsed: ChatResponse = response
            .json()
            .map_err(|e| LlmError::BadResponse(format!("undecodable body: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| LlmError::BadResponse("empty choices".to_string()))
    }
}

impl ChatClient for LiveChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let mut attempts = 0;
        loop {
            match self.attempt(request) {
                Ok(text) => return Ok(text),
                // Hard protocol errors don't improve with retries.
                Err(e @ LlmError::BadResponse(_)) => return Err(e),
                Err(e) => {
                    attempts += 1;
                    if attempts > self.max_retries {
                        return Err(LlmError::Exhausted {
                            attempts,
                            last: e.to_string(),
                        });
                    }
                    std::thread::sleep(self.backoff_base * 2u32.pow(attempts - 1));
                }
            }
        }
    }

    fn name(&self) -> &str {
        &self.model
    }
}

/// One scripted mock step.
#[derive(Debug, Clone)]
pub enum MockStep {
    Reply(String),
    /// Simulate a transport failure on this call.
    Fail,
}

enum MockMode {
    Scripted(Mutex<VecDeque<MockStep>>),
    Rule(Box<dyn Fn(&str) -> String + Send + Sync>),
}

/// Deterministic test double. Scripted mode pops canned steps in order;
/// rule mode computes the reply from the prompt. Every request is recorded
/// for assertions.
pub struct MockChatClient {
    mode: MockMode,
    name: String,
    calls: Mutex<Vec<ChatRequest>>,
}

impl MockChatClient {
    pub fn scripted(steps: impl IntoIterator<Item = MockStep>) -> Self {
        MockChatClient {
            mode: MockMode::Scripted(Mutex::new(steps.into_iter().collect())),
            name: "mock".to_string(),
            calls: Mutex::new(Vec::new()),
        }
    }

    /// Convenience: a script of plain text replies.
    pub fn replies<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::scripted(replies.into_iter().map(|r| MockStep::Reply(r.into())))
    }

    pub fn rule(f: impl Fn(&str) -> String + Send + Sync + 'static) -> Self {
        MockChatClient {
            mode: MockMode::Rule(Box::new(f)),
            name: "mock".to_string(),
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// All requests seen so far, in call order.
    pub fn calls(&self) -> Vec<ChatRequest> {
        self.calls.lock().expect("mock lock").clone()
    }
}

impl ChatClient for MockChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        self.calls.lock().expect("mock lock").push(request.clone());
        match &self.mode {
            MockMode::Scripted(steps) => {
                let step = steps.lock().expect("mock lock").pop_front();
                match step {
                    Some(MockStep::Reply(text)) => Ok(text),
                    Some(MockStep::Fail) => {
                        Err(LlmError::Transport("scripted transport failure".into()))
                    }
                    None => Err(LlmError::ScriptExhausted),
                }
            }
            MockMode::Rule(f) => Ok(f(&request.prompt)),
        }
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Complete many requests on a bounded worker pool, preserving input order
/// in the output. `workers` is clamped to at least 1.
pub fn parallel_complete(
    client: &dyn ChatClient,
    requests: &[ChatRequest],
    workers: usize,
) -> Vec<Result<String, LlmError>> {
    let workers = workers.clamp(1, requests.len().max(1));
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<String, LlmError>>>> =
        (0..requests.len()).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= requests.len() {
                    break;
                }
                let result = client.complete(&requests[i]);
                *results[i].lock().expect("result lock") = Some(result);
            });
        }
    });
    results
        .into_iter()
        .map(|slot| slot.into_inner().expect("result lock").expect("worker filled slot"))
        .collect()
}
