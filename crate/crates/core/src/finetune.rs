//! Chat-format fine-tuning data: one example per chunk, with the chunk's
//! annotated answers as the assistant turn.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::budget::{chunk_policy, BudgetError, ChunkBudget, TokenCounter};
use crate::corpus::{AnnotationSet, LabelTaxonomy, PolicyDocument};
use crate::parsing::{render_answers, Answer, PracticeVector};
use crate::prompting::{
    Message, PlanTarget, PromptBuilder, PromptError, PromptVariant, Role, Segmentation,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FineTuneExample {
    pub messages: Vec<Message>,
}

impl FineTuneExample {
    pub fn assistant_text(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::Assistant)
            .map(|m| m.content.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FineTuneError {
    #[error("policy `{0}` has no segment annotations")]
    MissingSegments(String),
    #[error("policy `{policy_id}`: {source}")]
    Budget {
        policy_id: String,
        source: BudgetError,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Truth for a chunk: a label is disclosed if any of its paragraphs is
/// annotated with it.
pub fn chunk_truth(
    annotations: &AnnotationSet,
    taxonomy: &LabelTaxonomy,
    policy_id: &str,
    paragraphs: std::ops::Range<usize>,
) -> PracticeVector {
    PracticeVector::new(
        taxonomy
            .labels()
            .iter()
            .map(|l| {
                let yes = paragraphs
                    .clone()
                    .any(|i| annotations.segment_disclosed(policy_id, i, &l.label_id));
                (l.label_id.clone(), Answer::from_bool(yes))
            })
            .collect(),
    )
}

/// Builds examples with the analysis prompt of `variant`, without shots and
/// over whole chunks. Chunks are sized as for analysis: the room left after
/// the empty prompt and `response_reserve`.
#[allow(clippy::too_many_arguments)]
pub fn export_finetune(
    policies: &[PolicyDocument],
    annotations: &AnnotationSet,
    taxonomy: &LabelTaxonomy,
    builder: &PromptBuilder,
    variant: &PromptVariant,
    counter: &TokenCounter,
    context_limit: usize,
    response_reserve: usize,
) -> Result<Vec<FineTuneExample>, FineTuneError> {
    let variant = PromptVariant {
        shots: 0,
        pruning: false,
        segmentation: Segmentation::WholePolicy,
        ..variant.clone()
    };
    let mut out = Vec::new();
    for policy in policies {
        if !annotations.has_segments_for(&policy.policy_id) {
            return Err(FineTuneError::MissingSegments(policy.policy_id.clone()));
        }
        let skeleton = builder.skeleton(
            taxonomy,
            &variant,
            &[],
            PlanTarget::whole(policy.policy_id.clone()),
        )?;
        let overhead = skeleton
            .messages
            .iter()
            .map(|m| counter.count(&m.content))
            .sum();
        let budget = ChunkBudget::new(context_limit, overhead, response_reserve);
        let chunks =
            chunk_policy(policy, &budget, counter).map_err(|source| FineTuneError::Budget {
                policy_id: policy.policy_id.clone(),
                source,
            })?;
        for chunk in chunks {
            let plan = builder.build_prompt(
                &chunk.text,
                taxonomy,
                &variant,
                &[],
                PlanTarget::whole(policy.policy_id.clone()),
            )?;
            let truth = chunk_truth(annotations, taxonomy, &policy.policy_id, chunk.paragraphs);
            let mut messages = plan.messages;
            messages.push(Message {
                role: Role::Assistant,
                content: render_answers(&truth, taxonomy.labels()),
            });
            out.push(FineTuneExample { messages });
        }
    }
    Ok(out)
}

/// One JSON object per line, LF-terminated.
pub fn write_jsonl<W: Write>(examples: &[FineTuneExample], mut w: W) -> Result<(), FineTuneError> {
    for e in examples {
        serde_json::to_writer(&mut w, e).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::parsing::parse_practice_vector;

    #[test]
    fn single_chunk_round_trip() {
        let taxonomy = LabelTaxonomy::new(vec![
            Label {
                label_id: "email".into(),
                display_name: "Email".into(),
                definition: "Email address".into(),
            },
            Label {
                label_id: "phone".into(),
                display_name: "Phone".into(),
                definition: "Phone number".into(),
            },
        ])
        .unwrap();
        let policy = PolicyDocument::from_text("p", "p", "We collect your email.\n\nWe store it.");
        let mut ann = AnnotationSet::new();
        ann.insert_segment("p", 0, "email", true);
        let builder = PromptBuilder::default();
        let ex = export_finetune(
            &[policy],
            &ann,
            &taxonomy,
            &builder,
            &PromptVariant::final_design(),
            &TokenCounter::default(),
            4096,
            512,
        )
        .unwrap();
        assert_eq!(ex.len(), 1);
        let text = ex[0].assistant_text().unwrap();
        assert_eq!(text, "Email: Yes\nPhone: No");
        let back = parse_practice_vector(text, taxonomy.labels());
        assert_eq!(back.get("email"), Answer::Yes);
        assert_eq!(back.get("phone"), Answer::No);

        let mut buf = Vec::new();
        write_jsonl(&ex, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("{\"messages\":[{\"role\":\"user\""));
        assert_eq!(s.matches('\n').count(), 1);
    }

    #[test]
    fn missing_segments_is_an_error() {
        let taxonomy = LabelTaxonomy::new(vec![Label {
            label_id: "email".into(),
            display_name: "Email".into(),
            definition: "d".into(),
        }])
        .unwrap();
        let policy = PolicyDocument::from_text("p", "p", "text");
        let err = export_finetune(
            &[policy],
            &AnnotationSet::new(),
            &taxonomy,
            &PromptBuilder::default(),
            &PromptVariant::baseline(),
            &TokenCounter::default(),
            4096,
            512,
        )
        .unwrap_err();
        assert!(matches!(err, FineTuneError::MissingSegments(_)));
    }
}
