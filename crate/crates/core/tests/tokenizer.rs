//! The chars-per-token heuristic against a real BPE tokenizer.

use std::sync::Arc;

use policy_probe::budget::{TokenCounter, Tokenizer};
use tiktoken_rs::CoreBPE;

struct Bpe(CoreBPE);

impl Tokenizer for Bpe {
    fn count(&self, text: &str) -> usize {
        self.0.encode_ordinary(text).len()
    }
}

fn cl100k() -> TokenCounter {
    TokenCounter::Plugin(Arc::new(Bpe(tiktoken_rs::cl100k_base().unwrap())))
}

fn fixture() -> String {
    std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/policy_6652.txt"
    ))
    .unwrap()
}

#[test]
fn fixture_is_sized_to_the_average_policy() {
    let heuristic = TokenCounter::default().count(&fixture());
    assert!((6600..=6700).contains(&heuristic), "{heuristic}");
}

// Plain English prose runs closer to 5.5 characters per BPE token, so the
// default overcounts by roughly a third. That errs on the side of smaller
// chunks, never on overflowing the context.
#[test]
fn default_heuristic_overcounts_policy_prose() {
    let text = fixture();
    let heuristic = TokenCounter::default().count(&text);
    let reference = cl100k().count(&text);
    assert!(
        heuristic >= reference,
        "heuristic {heuristic} vs bpe {reference}"
    );
    let ratio = heuristic as f64 / reference as f64;
    assert!(ratio > 1.15 && ratio < 1.6, "ratio {ratio}");
}

#[test]
fn calibrated_ratio_is_within_fifteen_percent() {
    let text = fixture();
    let reference = cl100k().count(&text) as f64;
    let calibrated = TokenCounter::from_chars_per_token(5.5)
        .unwrap()
        .count(&text) as f64;
    assert!(
        (calibrated / reference - 1.0).abs() <= 0.15,
        "{calibrated} vs {reference}"
    );
}

#[test]
fn plugin_counter_is_used_for_counting() {
    let bpe = cl100k();
    assert_eq!(bpe.count(""), 0);
    assert!(bpe.count("We collect your email address.") < 10);
}
