//! Token counting and context-window chunking.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use crate::corpus::PolicyDocument;

/// Default allowance kept free for the model's answer.
pub const DEFAULT_RESPONSE_RESERVE: usize = 512;

/// Exact tokenizers plug in here.
pub trait Tokenizer: Send + Sync {
    fn count(&self, text: &str) -> usize;
}

#[derive(Clone)]
pub enum TokenCounter {
    /// `ceil(chars * denom / numer)` with `numer / denom` characters per token.
    Heuristic {
        numer: u32,
        denom: u32,
    },
    Plugin(Arc<dyn Tokenizer>),
}

impl fmt::Debug for TokenCounter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenCounter::Heuristic { numer, denom } => {
                write!(f, "Heuristic({numer}/{denom} chars per token)")
            }
            TokenCounter::Plugin(_) => f.write_str("Plugin"),
        }
    }
}

impl Default for TokenCounter {
    fn default() -> Self {
        TokenCounter::Heuristic { numer: 4, denom: 1 }
    }
}

impl TokenCounter {
    /// Heuristic counter with an arbitrary positive chars-per-token ratio.
    /// Returns `None` when the ratio is not positive.
    pub fn heuristic(numer: u32, denom: u32) -> Option<Self> {
        (numer > 0 && denom > 0).then_some(TokenCounter::Heuristic { numer, denom })
    }

    /// Heuristic counter from a decimal ratio such as `3.5`, kept to
    /// millesimal precision.
    pub fn from_chars_per_token(ratio: f64) -> Option<Self> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return None;
        }
        let numer = (ratio * 1000.0).round() as u32;
        Self::heuristic(numer, 1000)
    }

    pub fn count(&self, text: &str) -> usize {
        match self {
            TokenCounter::Heuristic { numer, denom } => {
                let chars = text.chars().count() as u64;
                (chars * u64::from(*denom)).div_ceil(u64::from(*numer)) as usize
            }
            TokenCounter::Plugin(t) => t.count(text),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkBudget {
    pub context_limit: usize,
    pub prompt_overhead: usize,
    pub response_reserve: usize,
}

impl ChunkBudget {
    pub fn new(context_limit: usize, prompt_overhead: usize, response_reserve: usize) -> Self {
        Self {
            context_limit,
            prompt_overhead,
            response_reserve,
        }
    }

    /// Tokens available for policy text, or `None` when the overheads leave
    /// nothing.
    pub fn per_chunk_budget(&self) -> Option<usize> {
        self.context_limit
            .checked_sub(self.prompt_overhead)
            .and_then(|r| r.checked_sub(self.response_reserve))
            .filter(|&b| b > 0)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum BudgetError {
    #[error(
        "no room for policy text: context limit {context_limit} minus prompt {prompt_overhead} \
         and reserve {response_reserve}"
    )]
    NonPositiveBudget {
        context_limit: usize,
        prompt_overhead: usize,
        response_reserve: usize,
    },
    #[error("paragraph {index} needs {tokens} tokens but a chunk holds at most {budget}")]
    OversizeParagraph {
        index: usize,
        tokens: usize,
        budget: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub paragraphs: Range<usize>,
    pub text: String,
    pub tokens: usize,
}

/// Greedily packs consecutive paragraphs into chunks that fit the budget.
/// A chunk's token count is measured on its joined text, delimiter included.
pub fn chunk_policy(
    policy: &PolicyDocument,
    budget: &ChunkBudget,
    counter: &TokenCounter,
) -> Result<Vec<Chunk>, BudgetError> {
    let limit = budget
        .per_chunk_budget()
        .ok_or(BudgetError::NonPositiveBudget {
            context_limit: budget.context_limit,
            prompt_overhead: budget.prompt_overhead,
            response_reserve: budget.response_reserve,
        })?;

    for p in &policy.paragraphs {
        let tokens = counter.count(&p.text);
        if tokens > limit {
            return Err(BudgetError::OversizeParagraph {
                index: p.index,
                tokens,
                budget: limit,
            });
        }
    }

    let mut chunks = Vec::new();
    let n = policy.paragraphs.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        let mut text = policy.text_of(start..end);
        while end < n {
            let candidate = policy.text_of(start..end + 1);
            if counter.count(&candidate) > limit {
                break;
            }
            text = candidate;
            end += 1;
        }
        chunks.push(Chunk {
            paragraphs: start..end,
            tokens: counter.count(&text),
            text,
        });
        start = end;
    }
    Ok(chunks)
}
