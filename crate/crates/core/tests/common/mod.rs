#![allow(dead_code)]

use std::sync::Arc;

use policy_probe::corpus::{AnnotationSet, Label, LabelTaxonomy, Paragraph, PolicyDocument};
use policy_probe::economics::Money;
use policy_probe::provider::{
    ChatClient, MockScript, ModelParameters, ModelProfile, ScriptRule, ScriptedReply,
    ScriptedTransport, SimulatedClock,
};

pub fn taxonomy(ids: &[&str]) -> LabelTaxonomy {
    LabelTaxonomy::new(
        ids.iter()
            .map(|id| Label {
                label_id: id.to_string(),
                display_name: display(id),
                definition: format!("Collection of the user's {id}."),
            })
            .collect(),
    )
    .unwrap()
}

pub fn display(id: &str) -> String {
    let mut c = id.chars();
    let first = c.next().unwrap().to_uppercase().collect::<String>();
    format!("{first}{}", c.as_str().replace('_', " "))
}

pub fn policy(id: &str, paragraphs: &[&str]) -> PolicyDocument {
    PolicyDocument::from_paragraphs(
        id,
        format!("{id}.txt"),
        paragraphs
            .iter()
            .enumerate()
            .map(|(index, t)| Paragraph {
                index,
                text: t.to_string(),
            })
            .collect(),
    )
}

pub fn profile(context_limit: usize) -> ModelProfile {
    ModelProfile {
        profile_id: "scripted".into(),
        endpoint_url: "http://mock.invalid".into(),
        model_name: "scripted".into(),
        context_limit,
        tokens_per_minute: 1_000_000,
        price_in: Money::from_cents(1),
        price_out: Money::from_cents(3),
        supports_seed: true,
    }
}

pub fn params() -> ModelParameters {
    ModelParameters {
        max_output_tokens: 64,
        ..ModelParameters::default()
    }
}

pub fn client(transport: Arc<ScriptedTransport>) -> ChatClient {
    ChatClient::new(transport, Arc::new(SimulatedClock::new()))
}

pub fn script(rules: Vec<ScriptRule>) -> Arc<ScriptedTransport> {
    Arc::new(ScriptedTransport::new(MockScript { seed: 7, rules }))
}

pub fn rule(needles: &[&str], replies: &[&str]) -> ScriptRule {
    ScriptRule::matching(
        needles,
        replies.iter().map(|r| ScriptedReply::text(*r)).collect(),
    )
}

pub fn policy_annotations(entries: &[(&str, &str, bool)]) -> AnnotationSet {
    let mut set = AnnotationSet::new();
    for (p, l, d) in entries {
        set.insert_policy(p, l, *d);
    }
    set
}
