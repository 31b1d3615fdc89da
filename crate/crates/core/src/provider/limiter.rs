//! Per-minute token budget enforced over an exact sliding window.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use super::clock::Clock;

pub const WINDOW: Duration = Duration::from_secs(60);

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RateLimitError {
    #[error("request needs {needed} tokens but the limit is {capacity} tokens per minute")]
    ExceedsCapacity { needed: u64, capacity: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub tokens: u64,
    pub granted_at: Duration,
    pub waited: Duration,
}

/// Keeps a log of grants. A request is granted at time `t` only if the
/// grants made in `(t - 60s, t]` plus the request fit the capacity, so every
/// half-open 60 second window holds at most `capacity` tokens.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: u64,
    grants: Mutex<VecDeque<(Duration, u64)>>,
}

impl RateLimiter {
    pub fn new(tokens_per_minute: u64) -> Self {
        Self {
            capacity: tokens_per_minute,
            grants: Mutex::new(VecDeque::new()),
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// Grants immediately or returns how long to wait before retrying.
    pub fn try_acquire_at(
        &self,
        now: Duration,
        tokens: u64,
    ) -> Result<Result<(), Duration>, RateLimitError> {
        if tokens > self.capacity {
            return Err(RateLimitError::ExceedsCapacity {
                needed: tokens,
                capacity: self.capacity,
            });
        }
        let mut grants = self.grants.lock().unwrap();
        while let Some(&(at, _)) = grants.front() {
            if now.saturating_sub(at) >= WINDOW {
                grants.pop_front();
            } else {
                break;
            }
        }
        let used: u64 = grants.iter().map(|(_, t)| t).sum();
        if used + tokens <= self.capacity {
            grants.push_back((now, tokens));
            return Ok(Ok(()));
        }
        // Earliest moment enough old grants have left the window.
        let mut remaining = used;
        for &(at, t) in grants.iter() {
            remaining -= t;
            if remaining + tokens <= self.capacity {
                return Ok(Err(at + WINDOW - now));
            }
        }
        unreachable!("an empty window always fits a request within capacity")
    }
}

/// Blocks on `clock` until `tokens` can be granted.
pub fn acquire_budget(
    limiter: &RateLimiter,
    tokens: u64,
    clock: &dyn Clock,
) -> Result<Grant, RateLimitError> {
    let start = clock.now();
    loop {
        let now = clock.now();
        match limiter.try_acquire_at(now, tokens)? {
            Ok(()) => {
                return Ok(Grant {
                    tokens,
                    granted_at: now,
                    waited: now - start,
                })
            }
            Err(wait) => clock.sleep(wait),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::clock::SimulatedClock;

    #[test]
    fn full_bucket_then_wait_a_minute() {
        let clock = SimulatedClock::new();
        let limiter = RateLimiter::new(100);
        let g = acquire_budget(&limiter, 100, &clock).unwrap();
        assert_eq!(g.waited, Duration::ZERO);
        let g = acquire_budget(&limiter, 1, &clock).unwrap();
        assert_eq!(g.granted_at, Duration::from_secs(60));
    }

    #[test]
    fn forty_five_policies_per_minute() {
        let clock = SimulatedClock::new();
        let limiter = RateLimiter::new(300_000);
        for i in 0..45 {
            clock.advance(Duration::from_millis(100));
            let g = acquire_budget(&limiter, 6_652, &clock).unwrap();
            assert_eq!(g.waited, Duration::ZERO, "request {i}");
        }
        let g = acquire_budget(&limiter, 6_652, &clock).unwrap();
        assert!(g.waited > Duration::ZERO);
        // The first grant was at 0.1 s.
        assert_eq!(g.granted_at, Duration::from_millis(60_100));
    }

    #[test]
    fn oversize_request_is_refused() {
        let limiter = RateLimiter::new(10);
        assert_eq!(
            acquire_budget(&limiter, 11, &SimulatedClock::new()),
            Err(RateLimitError::ExceedsCapacity {
                needed: 11,
                capacity: 10
            })
        );
    }
}
