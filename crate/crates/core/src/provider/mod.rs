//! OpenAI-compatible chat-completions client with per-profile rate
//! limiting, retry with backoff, and a content-addressed response cache.

pub mod cache;
pub mod clock;
pub mod limiter;
pub mod mock;
pub mod transport;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::budget::TokenCounter;
use crate::economics::Money;
use crate::prompting::{Message, PromptPlan, Role};

pub use cache::{CacheKey, CacheRecord, ResponseCache};
pub use clock::{Clock, SimulatedClock, SystemClock};
pub use limiter::{acquire_budget, Grant, RateLimitError, RateLimiter};
pub use mock::{MockScript, ScriptRule, ScriptedReply, ScriptedTransport};
pub use transport::{HttpRequest, HttpResponse, HttpTransport, Transport, TransportError};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "POLICYPROBE_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub profile_id: String,
    pub endpoint_url: String,
    pub model_name: String,
    pub context_limit: usize,
    pub tokens_per_minute: u64,
    /// Per 1,000 input tokens.
    pub price_in: Money,
    /// Per 1,000 output tokens.
    pub price_out: Money,
    #[serde(default)]
    pub supports_seed: bool,
}

impl ModelProfile {
    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |m: &str| {
            Err(ProviderError::InvalidProfile(format!(
                "{}: {m}",
                self.profile_id
            )))
        };
        if self.context_limit == 0 {
            return bad("context_limit must be positive");
        }
        if self.tokens_per_minute == 0 {
            return bad("tokens_per_minute must be positive");
        }
        if self.price_in < Money::ZERO || self.price_out < Money::ZERO {
            return bad("prices must not be negative");
        }
        Ok(())
    }

    pub fn completions_url(&self) -> String {
        format!(
            "{}/v1/chat/completions",
            self.endpoint_url.trim_end_matches('/')
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub temperature: f64,
    pub top_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<i64>,
    pub max_output_tokens: u32,
}

impl Default for ModelParameters {
    /// Temperature 0, top_p 1 and a fixed seed.
    fn default() -> Self {
        Self {
            temperature: 0.0,
            top_p: 1.0,
            seed: Some(42),
            max_output_tokens: crate::budget::DEFAULT_RESPONSE_RESERVE as u32,
        }
    }
}

impl ModelParameters {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(ProviderError::InvalidParameters(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(ProviderError::InvalidParameters(format!(
                "top_p {} outside (0, 1]",
                self.top_p
            )));
        }
        if self.max_output_tokens == 0 {
            return Err(ProviderError::InvalidParameters(
                "max_output_tokens must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub profile_id: String,
    pub params: ModelParameters,
    pub messages: Vec<Message>,
    pub response_text: String,
    pub usage: Usage,
    pub latency_ms: u64,
    pub cache_hit: bool,
    pub retries: u32,
    /// Hex content hash; the exchange's cache key.
    pub cache_key: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("invalid model profile: {0}")]
    InvalidProfile(String),
    #[error("invalid model parameters: {0}")]
    InvalidParameters(String),
    #[error("request needs about {needed} tokens but the context limit is {limit}")]
    ContextOverflow { needed: usize, limit: usize },
    #[error(transparent)]
    RateLimit(#[from] RateLimitError),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error(transparent)]
    Cache(#[from] cache::CacheError),
}

/// Exponential backoff on transport failures and HTTP 429.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    /// 1 s, 2 s, 4 s.
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

impl RetryPolicy {
    pub fn backoff(&self, retry: u32) -> Duration {
        self.initial_backoff * 2u32.pow(retry)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheMode {
    Use,
    /// Always query the endpoint and do not store the result.
    Bypass,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequestBody<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    top_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<i64>,
    max_tokens: u32,
}

#[derive(Serialize)]
struct CacheKeyMaterial<'a> {
    profile_id: &'a str,
    model_name: &'a str,
    params: &'a ModelParameters,
    messages: &'a [Message],
}

fn wire_role(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    }
}

/// Serializes the wire request body. The seed is sent only for profiles
/// that accept it.
pub fn request_body(
    messages: &[Message],
    profile: &ModelProfile,
    params: &ModelParameters,
) -> Vec<u8> {
    let body = ChatRequestBody {
        model: &profile.model_name,
        messages: messages
            .iter()
            .map(|m| WireMessage {
                role: wire_role(m.role),
                content: &m.content,
            })
            .collect(),
        temperature: params.temperature,
        top_p: params.top_p,
        seed: if profile.supports_seed {
            params.seed
        } else {
            None
        },
        max_tokens: params.max_output_tokens,
    };
    serde_json::to_vec(&body).expect("request body serializes")
}

pub fn cache_key(
    messages: &[Message],
    profile: &ModelProfile,
    params: &ModelParameters,
) -> CacheKey {
    let material = CacheKeyMaterial {
        profile_id: &profile.profile_id,
        model_name: &profile.model_name,
        params,
        messages,
    };
    cache::hash_key(&serde_json::to_vec(&material).expect("cache key serializes"))
}

/// Extracts `choices[0].message.content` and `usage`.
pub fn parse_response(body: &[u8]) -> Result<(String, Option<Usage>), ProviderError> {
    let v: serde_json::Value = serde_json::from_slice(body)
        .map_err(|e| ProviderError::MalformedResponse(e.to_string()))?;
    let content = v["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| {
            ProviderError::MalformedResponse("missing choices[0].message.content".into())
        })?
        .to_string();
    let usage = v.get("usage").and_then(|u| {
        Some(Usage {
            prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
            completion_tokens: u.get("completion_tokens")?.as_u64().unwrap_or(0),
        })
    });
    Ok((content, usage))
}

pub struct ChatClient {
    transport: Arc<dyn Transport>,
    clock: Arc<dyn Clock>,
    cache: Option<Arc<ResponseCache>>,
    limiters: Mutex<HashMap<String, Arc<RateLimiter>>>,
    counter: TokenCounter,
    retry: RetryPolicy,
    api_key: Option<String>,
}

impl ChatClient {
    pub fn new(transport: Arc<dyn Transport>, clock: Arc<dyn Clock>) -> Self {
        Self {
            transport,
            clock,
            cache: None,
            limiters: Mutex::new(HashMap::new()),
            counter: TokenCounter::default(),
            retry: RetryPolicy::default(),
            api_key: None,
        }
    }

    pub fn with_cache(mut self, cache: Arc<ResponseCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_counter(mut self, counter: TokenCounter) -> Self {
        self.counter = counter;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    /// Reads the bearer token from [`API_KEY_ENV`].
    pub fn with_env_api_key(self) -> Self {
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self.with_api_key(key)
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn counter(&self) -> &TokenCounter {
        &self.counter
    }

    pub fn cache(&self) -> Option<&Arc<ResponseCache>> {
        self.cache.as_ref()
    }

    pub fn limiter(&self, profile: &ModelProfile) -> Arc<RateLimiter> {
        self.limiters
            .lock()
            .unwrap()
            .entry(profile.profile_id.clone())
            .or_insert_with(|| Arc::new(RateLimiter::new(profile.tokens_per_minute)))
            .clone()
    }

    pub fn send_chat(
        &self,
        plan: &PromptPlan,
        profile: &ModelProfile,
        params: &ModelParameters,
    ) -> Result<ChatExchange, ProviderError> {
        self.send_chat_with(plan, profile, params, CacheMode::Use)
    }

    pub fn send_chat_with(
        &self,
        plan: &PromptPlan,
        profile: &ModelProfile,
        params: &ModelParameters,
        mode: CacheMode,
    ) -> Result<ChatExchange, ProviderError> {
        profile.validate()?;
        params.validate()?;

        let key = cache_key(&plan.messages, profile, params);
        let exchange =
            |text: String, usage: Usage, latency_ms: u64, cache_hit: bool, retries: u32| {
                ChatExchange {
                    profile_id: profile.profile_id.clone(),
                    params: params.clone(),
                    messages: plan.messages.clone(),
                    response_text: text,
                    usage,
                    latency_ms,
                    cache_hit,
                    retries,
                    cache_key: hex::encode(key),
                }
            };

        if mode == CacheMode::Use {
            if let Some(hit) = self.cache.as_ref().and_then(|c| c.get(&key)) {
                let (text, usage) = parse_response(&hit.response_body)?;
                let usage = usage.unwrap_or_else(|| self.estimate_usage(plan, &text));
                return Ok(exchange(
                    text,
                    usage,
                    hit.response_ms.saturating_sub(hit.request_ms),
                    true,
                    0,
                ));
            }
        }

        let prompt_tokens: usize = plan
            .messages
            .iter()
            .map(|m| self.counter.count(&m.content))
            .sum();
        let needed = prompt_tokens + params.max_output_tokens as usize;
        if needed > profile.context_limit {
            return Err(ProviderError::ContextOverflow {
                needed,
                limit: profile.context_limit,
            });
        }

        let body = request_body(&plan.messages, profile, params);
        let mut headers = vec![("Content-Type".to_string(), "application/json".to_string())];
        if let Some(k) = &self.api_key {
            headers.push(("Authorization".to_string(), format!("Bearer {k}")));
        }
        let request = HttpRequest {
            url: profile.completions_url(),
            headers,
            body,
        };
        let limiter = self.limiter(profile);

        let mut retries = 0;
        loop {
            acquire_budget(&limiter, needed as u64, self.clock.as_ref())?;
            let started = self.clock.now();
            let failure = match self.transport.post(&request) {
                Ok(resp) if (200..300).contains(&resp.status) => {
                    let finished = self.clock.now();
                    let (text, usage) = parse_response(&resp.body)?;
                    let usage = usage.unwrap_or_else(|| self.estimate_usage(plan, &text));
                    if mode == CacheMode::Use {
                        if let Some(cache) = &self.cache {
                            cache.put(CacheRecord {
                                key,
                                request_ms: started.as_millis() as u64,
                                response_ms: finished.as_millis() as u64,
                                request_body: request.body.clone(),
                                response_body: resp.body,
                            })?;
                        }
                    }
                    let latency = (finished - started).as_millis() as u64;
                    return Ok(exchange(text, usage, latency, false, retries));
                }
                Ok(resp) if resp.status == 429 => {
                    format!("HTTP 429: {}", String::from_utf8_lossy(&resp.body))
                }
                Ok(resp) => {
                    return Err(ProviderError::Http {
                        status: resp.status,
                        body: String::from_utf8_lossy(&resp.body).into_owned(),
                    })
                }
                Err(e) => e.to_string(),
            };
            if retries >= self.retry.max_retries {
                return Err(ProviderError::RetriesExhausted {
                    attempts: retries + 1,
                    last: failure,
                });
            }
            self.clock.sleep(self.retry.backoff(retries));
            retries += 1;
        }
    }

    fn estimate_usage(&self, plan: &PromptPlan, text: &str) -> Usage {
        Usage {
            prompt_tokens: plan
                .messages
                .iter()
                .map(|m| self.counter.count(&m.content) as u64)
                .sum(),
            completion_tokens: self.counter.count(text) as u64,
        }
    }
}
