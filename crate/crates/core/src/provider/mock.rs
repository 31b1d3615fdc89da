//! Scripted in-process chat-completions endpoint.
//!
//! A script is a list of rules. The first rule whose `when_contains`
//! substrings all occur in the request's message contents answers the
//! request, either from its `replies` sequence (consumed in order, the last
//! reply repeating) or by a seeded weighted draw from `choices`.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "rules": [
//!     {"when_contains": ["Acme Corp"], "replies": [{"status": 429}, {"content": "Email: Yes"}]},
//!     {"when_contains": [], "choices": [{"weight": 9, "content": "Email: Yes"},
//!                                       {"weight": 1, "content": "Email: No"}]}
//!   ]
//! }
//! ```

use std::path::Path;
use std::sync::Mutex;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::transport::{HttpRequest, HttpResponse, Transport, TransportError};
use crate::budget::TokenCounter;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedReply {
    /// Assistant text for a 200 response.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    /// HTTP status; defaults to 200.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<u16>,
    /// Raw body for non-200 replies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
    /// Fail at the transport layer with this message.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transport_error: Option<String>,
}

impl ScriptedReply {
    pub fn text(content: impl Into<String>) -> Self {
        Self {
            content: Some(content.into()),
            ..Default::default()
        }
    }

    pub fn status(status: u16) -> Self {
        Self {
            status: Some(status),
            ..Default::default()
        }
    }

    pub fn transport_failure(message: impl Into<String>) -> Self {
        Self {
            transport_error: Some(message.into()),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedReply {
    pub weight: u32,
    #[serde(flatten)]
    pub reply: ScriptedReply,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptRule {
    #[serde(default)]
    pub when_contains: Vec<String>,
    #[serde(default)]
    pub replies: Vec<ScriptedReply>,
    #[serde(default)]
    pub choices: Vec<WeightedReply>,
}

impl ScriptRule {
    pub fn matching(needles: &[&str], replies: Vec<ScriptedReply>) -> Self {
        Self {
            when_contains: needles.iter().map(|s| s.to_string()).collect(),
            replies,
            choices: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    #[serde(default)]
    pub seed: u64,
    pub rules: Vec<ScriptRule>,
}

impl MockScript {
    pub fn load(path: &Path) -> Result<Self, MockScriptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MockScriptError(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| MockScriptError(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("mock script: {0}")]
pub struct MockScriptError(pub String);

#[derive(Debug)]
struct MockState {
    cursors: Vec<usize>,
    rng: ChaCha8Rng,
    captured: Vec<HttpRequest>,
    served: u64,
}

/// [`Transport`] that answers from a [`MockScript`] and records every
/// request it receives. It never touches the network.
#[derive(Debug)]
pub struct ScriptedTransport {
    script: MockScript,
    counter: TokenCounter,
    state: Mutex<MockState>,
}

impl ScriptedTransport {
    pub fn new(script: MockScript) -> Self {
        let state = MockState {
            cursors: vec![0; script.rules.len()],
            rng: ChaCha8Rng::seed_from_u64(script.seed),
            captured: Vec::new(),
            served: 0,
        };
        Self {
            script,
            counter: TokenCounter::default(),
            state: Mutex::new(state),
        }
    }

    /// Every request answers with `content`.
    pub fn constant(content: impl Into<String>) -> Self {
        Self::new(MockScript {
            seed: 0,
            rules: vec![ScriptRule::matching(
                &[],
                vec![ScriptedReply::text(content)],
            )],
        })
    }

    pub fn captured(&self) -> Vec<HttpRequest> {
        self.state.lock().unwrap().captured.clone()
    }

    pub fn request_count(&self) -> usize {
        self.state.lock().unwrap().captured.len()
    }

    fn pick(&self, state: &mut MockState, haystack: &str) -> Option<ScriptedReply> {
        let (index, rule) = self.script.rules.iter().enumerate().find(|(_, r)| {
            r.when_contains
                .iter()
                .all(|n| haystack.contains(n.as_str()))
        })?;
        if !rule.choices.is_empty() {
            let weights = WeightedIndex::new(rule.choices.iter().map(|c| c.weight)).ok()?;
            let i = weights.sample(&mut state.rng);
            return Some(rule.choices[i].reply.clone());
        }
        let cursor = state.cursors[index];
        let reply = rule
            .replies
            .get(cursor.min(rule.replies.len().checked_sub(1)?))?
            .clone();
        state.cursors[index] = cursor + 1;
        Some(reply)
    }
}

impl Transport for ScriptedTransport {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let parsed: serde_json::Value = serde_json::from_slice(&request.body).unwrap_or_default();
        let contents: Vec<String> = parsed["messages"]
            .as_array()
            .map(|ms| {
                ms.iter()
                    .filter_map(|m| m["content"].as_str().map(str::to_string))
                    .collect()
            })
            .unwrap_or_default();
        let haystack = contents.join("\n");

        let mut state = self.state.lock().unwrap();
        state.captured.push(request.clone());
        let Some(reply) = self.pick(&mut state, &haystack) else {
            return Ok(HttpResponse {
                status: 500,
                body: br#"{"error":{"message":"mock: no scripted rule matched"}}"#.to_vec(),
            });
        };
        if let Some(message) = reply.transport_error {
            return Err(TransportError(message));
        }
        let status = reply.status.unwrap_or(200);
        if status != 200 {
            let body = reply.body.unwrap_or_else(|| {
                json!({"error": {"message": format!("mock status {status}")}}).to_string()
            });
            return Ok(HttpResponse {
                status,
                body: body.into_bytes(),
            });
        }
        state.served += 1;
        let content = reply.content.unwrap_or_default();
        let prompt_tokens: usize = contents.iter().map(|c| self.counter.count(c)).sum();
        let completion_tokens = self.counter.count(&content);
        let body = json!({
            "id": format!("mock-{}", state.served),
            "object": "chat.completion",
            "model": parsed["model"],
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": content},
                "finish_reason": "stop"
            }],
            "usage": {
                "prompt_tokens": prompt_tokens,
                "completion_tokens": completion_tokens,
                "total_tokens": prompt_tokens + completion_tokens
            }
        });
        Ok(HttpResponse {
            status: 200,
            body: body.to_string().into_bytes(),
        })
    }
}
