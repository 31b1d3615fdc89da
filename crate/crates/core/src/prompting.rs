//! Prompt assembly for every prompt variant: Data, Task and Output-format
//! segments, optional few-shot examples, and the pruning prompt.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotationSet, Label, LabelTaxonomy, PolicyDocument};

pub const MAX_SHOTS: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataBoundary {
    None,
    Sentence,
    SentenceWithQuotes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataPlacement {
    Top,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStyle {
    Enumerated,
    AugmentedWithDefinitions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageSplit {
    Single,
    DataThenTask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segmentation {
    WholePolicy,
    PerParagraph,
    PerLabel,
    PerParagraphAndLabel,
}

impl Segmentation {
    pub fn per_paragraph(self) -> bool {
        matches!(
            self,
            Segmentation::PerParagraph | Segmentation::PerParagraphAndLabel
        )
    }

    pub fn per_label(self) -> bool {
        matches!(
            self,
            Segmentation::PerLabel | Segmentation::PerParagraphAndLabel
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptVariant {
    pub data_boundary: DataBoundary,
    pub data_placement: DataPlacement,
    pub task_style: TaskStyle,
    pub message_split: MessageSplit,
    pub pruning: bool,
    pub segmentation: Segmentation,
    pub shots: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_instruction: Option<String>,
}

impl PromptVariant {
    /// Policy first, plain label list, output instruction; one message.
    pub fn baseline() -> Self {
        Self {
            data_boundary: DataBoundary::None,
            data_placement: DataPlacement::Top,
            task_style: TaskStyle::Enumerated,
            message_split: MessageSplit::Single,
            pruning: false,
            segmentation: Segmentation::WholePolicy,
            shots: 0,
            system_instruction: None,
        }
    }

    /// Quoted policy in its own message, then definitions, output
    /// instruction and two worked examples.
    pub fn final_design() -> Self {
        Self {
            data_boundary: DataBoundary::SentenceWithQuotes,
            data_placement: DataPlacement::Top,
            task_style: TaskStyle::AugmentedWithDefinitions,
            message_split: MessageSplit::DataThenTask,
            pruning: false,
            segmentation: Segmentation::WholePolicy,
            shots: 2,
            system_instruction: None,
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "baseline" => Some(Self::baseline()),
            "final" => Some(Self::final_design()),
            "llama" => Some(llama_profile()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.shots > MAX_SHOTS {
            return Err(PromptError::TooManyShots(self.shots));
        }
        Ok(())
    }
}

/// Final design without few-shot examples, asking one label about one
/// paragraph at a time.
pub fn llama_profile() -> PromptVariant {
    PromptVariant {
        shots: 0,
        segmentation: Segmentation::PerParagraphAndLabel,
        ..PromptVariant::final_design()
    }
}

/// Field-wise override of a [`PromptVariant`]; unset fields are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantPatch {
    pub data_boundary: Option<DataBoundary>,
    pub data_placement: Option<DataPlacement>,
    pub task_style: Option<TaskStyle>,
    pub message_split: Option<MessageSplit>,
    pub pruning: Option<bool>,
    pub segmentation: Option<Segmentation>,
    pub shots: Option<u8>,
    pub system_instruction: Option<String>,
}

impl VariantPatch {
    pub fn apply(&self, base: &PromptVariant) -> PromptVariant {
        PromptVariant {
            data_boundary: self.data_boundary.unwrap_or(base.data_boundary),
            data_placement: self.data_placement.unwrap_or(base.data_placement),
            task_style: self.task_style.unwrap_or(base.task_style),
            message_split: self.message_split.unwrap_or(base.message_split),
            pruning: self.pruning.unwrap_or(base.pruning),
            segmentation: self.segmentation.unwrap_or(base.segmentation),
            shots: self.shots.unwrap_or(base.shots),
            system_instruction: self
                .system_instruction
                .clone()
                .or_else(|| base.system_instruction.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub example_paragraph: String,
    /// (label display name, disclosed)
    pub expected_output: Vec<(String, bool)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlanTarget {
    pub policy_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paragraph_index: Option<usize>,
    /// Empty means every taxonomy label.
    #[serde(default)]
    pub label_ids: Vec<String>,
}

impl PlanTarget {
    pub fn whole(policy_id: impl Into<String>) -> Self {
        Self {
            policy_id: policy_id.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPlan {
    pub messages: Vec<Message>,
    pub target: PlanTarget,
}

impl PromptPlan {
    pub fn user_messages(&self) -> impl Iterator<Item = &Message> {
        self.messages.iter().filter(|m| m.role == Role::User)
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("taxonomy is empty")]
    EmptyTaxonomy,
    #[error("policy text is empty")]
    EmptyPolicy,
    #[error("variant asks for {0} shots; at most 3 are supported")]
    TooManyShots(u8),
    #[error("variant asks for {expected} shots but {given} were supplied")]
    ShotCount { expected: u8, given: usize },
    #[error("shot example references `{0}`, which is not in the taxonomy")]
    ShotUnknownLabel(String),
    #[error("shot example has no answer for queried label `{0}`")]
    ShotMissingLabel(String),
    #[error("label `{0}` is not in the taxonomy")]
    UnknownLabel(String),
    #[error("per-label segmentation needs exactly one queried label, got {0}")]
    PerLabelArity(usize),
    #[error(
        "only {available} annotated paragraphs with a positive label; {wanted} shots requested"
    )]
    InsufficientShots { available: usize, wanted: usize },
    #[error("template `{template}`: {message}")]
    Template { template: String, message: String },
}

/// Editable prompt wording. Each field is one template file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub data_plain: String,
    pub data_sentence: String,
    pub data_quoted: String,
    pub task_enumerated: String,
    pub task_augmented: String,
    pub output_format: String,
    pub shots: String,
    pub pruning: String,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            data_plain: include_str!("../templates/data_plain.txt").to_string(),
            data_sentence: include_str!("../templates/data_sentence.txt").to_string(),
            data_quoted: include_str!("../templates/data_quoted.txt").to_string(),
            task_enumerated: include_str!("../templates/task_enumerated.txt").to_string(),
            task_augmented: include_str!("../templates/task_augmented.txt").to_string(),
            output_format: include_str!("../templates/output_format.txt").to_string(),
            shots: include_str!("../templates/shots.txt").to_string(),
            pruning: include_str!("../templates/pruning.txt").to_string(),
        }
    }
}

impl TemplateSet {
    /// Defaults overridden by any `<name>.txt` present in `dir`.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let mut set = Self::default();
        for (name, slot) in [
            ("data_plain", &mut set.data_plain),
            ("data_sentence", &mut set.data_sentence),
            ("data_quoted", &mut set.data_quoted),
            ("task_enumerated", &mut set.task_enumerated),
            ("task_augmented", &mut set.task_augmented),
            ("output_format", &mut set.output_format),
            ("shots", &mut set.shots),
            ("pruning", &mut set.pruning),
        ] {
            let path = dir.join(format!("{name}.txt"));
            if path.exists() {
                *slot = fs::read_to_string(&path)?;
            }
        }
        Ok(set)
    }
}

/// Substitutes `{{key}}` placeholders in one pass over the template, so
/// substituted values are never re-scanned.
pub fn render_template(
    name: &str,
    template: &str,
    vars: &[(&str, &str)],
) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| PromptError::Template {
            template: name.to_string(),
            message: "unterminated placeholder".into(),
        })?;
        let key = after[..end].trim();
        let value = vars
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| PromptError::Template {
                template: name.to_string(),
                message: format!("unknown placeholder `{key}`"),
            })?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Stateless prompt builder over a template set.
#[derive(Debug, Clone, Default)]
pub struct PromptBuilder {
    pub templates: TemplateSet,
}

impl PromptBuilder {
    pub fn new(templates: TemplateSet) -> Self {
        Self { templates }
    }

    fn queried_labels<'t>(
        &self,
        taxonomy: &'t LabelTaxonomy,
        variant: &PromptVariant,
        target: &PlanTarget,
    ) -> Result<Vec<&'t Label>, PromptError> {
        let labels: Vec<&Label> = if target.label_ids.is_empty() {
            taxonomy.labels().iter().collect()
        } else {
            target
                .label_ids
                .iter()
                .map(|id| {
                    taxonomy
                        .get(id)
                        .ok_or_else(|| PromptError::UnknownLabel(id.clone()))
                })
                .collect::<Result<_, _>>()?
        };
        if variant.segmentation.per_label() && labels.len() != 1 {
            return Err(PromptError::PerLabelArity(labels.len()));
        }
        Ok(labels)
    }

    pub fn data_segment(&self, variant: &PromptVariant, text: &str) -> Result<String, PromptError> {
        let (name, template) = match variant.data_boundary {
            DataBoundary::None => ("data_plain", &self.templates.data_plain),
            DataBoundary::Sentence => ("data_sentence", &self.templates.data_sentence),
            DataBoundary::SentenceWithQuotes => ("data_quoted", &self.templates.data_quoted),
        };
        render_template(name, template, &[("policy", text)])
    }

    fn task_segment(
        &self,
        variant: &PromptVariant,
        labels: &[&Label],
    ) -> Result<String, PromptError> {
        let list = labels
            .iter()
            .map(|l| format!("- {}", l.display_name))
            .collect::<Vec<_>>()
            .join("\n");
        let definitions = labels
            .iter()
            .map(|l| format!("- {}: {}", l.display_name, l.definition.trim()))
            .collect::<Vec<_>>()
            .join("\n");
        let (name, template) = match variant.task_style {
            TaskStyle::Enumerated => ("task_enumerated", &self.templates.task_enumerated),
            TaskStyle::AugmentedWithDefinitions => {
                ("task_augmented", &self.templates.task_augmented)
            }
        };
        render_template(
            name,
            template,
            &[("labels", &list), ("definitions", &definitions)],
        )
    }

    fn output_segment(&self, labels: &[&Label]) -> Result<String, PromptError> {
        let lines = labels
            .iter()
            .map(|l| format!("{}: <Yes|No>", l.display_name))
            .collect::<Vec<_>>()
            .join("\n");
        render_template(
            "output_format",
            &self.templates.output_format,
            &[("answer_lines", &lines)],
        )
    }

    fn shots_segment(
        &self,
        taxonomy: &LabelTaxonomy,
        labels: &[&Label],
        shots: &[FewShotExample],
    ) -> Result<String, PromptError> {
        let mut items = Vec::with_capacity(shots.len());
        for (n, shot) in shots.iter().enumerate() {
            for (name, _) in &shot.expected_output {
                if taxonomy.by_display_name(name).is_none() {
                    return Err(PromptError::ShotUnknownLabel(name.clone()));
                }
            }
            let mut lines = Vec::with_capacity(labels.len());
            for label in labels {
                let wanted = crate::corpus::normalize_name(&label.display_name);
                let (_, disclosed) = shot
                    .expected_output
                    .iter()
                    .find(|(name, _)| crate::corpus::normalize_name(name) == wanted)
                    .ok_or_else(|| PromptError::ShotMissingLabel(label.display_name.clone()))?;
                lines.push(format!(
                    "{}: {}",
                    label.display_name,
                    if *disclosed { "Yes" } else { "No" }
                ));
            }
            items.push(format!(
                "Example {}:\nParagraph: \"{}\"\nOutput:\n{}",
                n + 1,
                shot.example_paragraph.trim(),
                lines.join("\n")
            ));
        }
        render_template(
            "shots",
            &self.templates.shots,
            &[("shots", &items.join("\n\n"))],
        )
    }

    /// Builds the message sequence for one policy or chunk.
    pub fn build_prompt(
        &self,
        text: &str,
        taxonomy: &LabelTaxonomy,
        variant: &PromptVariant,
        shots: &[FewShotExample],
        target: PlanTarget,
    ) -> Result<PromptPlan, PromptError> {
        if text.trim().is_empty() {
            return Err(PromptError::EmptyPolicy);
        }
        self.build_unchecked(text, taxonomy, variant, shots, target)
    }

    fn build_unchecked(
        &self,
        text: &str,
        taxonomy: &LabelTaxonomy,
        variant: &PromptVariant,
        shots: &[FewShotExample],
        target: PlanTarget,
    ) -> Result<PromptPlan, PromptError> {
        variant.validate()?;
        if taxonomy.is_empty() {
            return Err(PromptError::EmptyTaxonomy);
        }
        if shots.len() != usize::from(variant.shots) {
            return Err(PromptError::ShotCount {
                expected: variant.shots,
                given: shots.len(),
            });
        }
        let labels = self.queried_labels(taxonomy, variant, &target)?;

        let data = self.data_segment(variant, text)?;
        let mut instructions = vec![
            self.task_segment(variant, &labels)?,
            self.output_segment(&labels)?,
        ];
        if !shots.is_empty() {
            instructions.push(self.shots_segment(taxonomy, &labels, shots)?);
        }
        let instructions = instructions.join("\n\n");

        let user = |content: String| Message {
            role: Role::User,
            content,
        };
        let mut messages = Vec::new();
        if let Some(system) = &variant.system_instruction {
            messages.push(Message {
                role: Role::System,
                content: system.clone(),
            });
        }
        match (variant.message_split, variant.data_placement) {
            (MessageSplit::Single, DataPlacement::Top) => {
                messages.push(user(format!("{data}\n\n{instructions}")));
            }
            (MessageSplit::Single, DataPlacement::Bottom) => {
                messages.push(user(format!("{instructions}\n\n{data}")));
            }
            (MessageSplit::DataThenTask, DataPlacement::Top) => {
                messages.push(user(data));
                messages.push(user(instructions));
            }
            (MessageSplit::DataThenTask, DataPlacement::Bottom) => {
                messages.push(user(instructions));
                messages.push(user(data));
            }
        }
        Ok(PromptPlan { messages, target })
    }

    /// The plan for an empty policy; its size is the prompt overhead used
    /// for chunk budgeting.
    pub fn skeleton(
        &self,
        taxonomy: &LabelTaxonomy,
        variant: &PromptVariant,
        shots: &[FewShotExample],
        target: PlanTarget,
    ) -> Result<PromptPlan, PromptError> {
        self.build_unchecked("", taxonomy, variant, shots, target)
    }

    /// Asks for the indices of paragraphs that mention collection or sharing
    /// of personal data, one per line.
    pub fn build_pruning_prompt(&self, policy: &PolicyDocument) -> Result<PromptPlan, PromptError> {
        if policy.paragraphs.is_empty() {
            return Err(PromptError::EmptyPolicy);
        }
        let numbered = policy
            .paragraphs
            .iter()
            .map(|p| format!("[{}] {}", p.index, p.text))
            .collect::<Vec<_>>()
            .join("\n\n");
        let content =
            render_template("pruning", &self.templates.pruning, &[("policy", &numbered)])?;
        Ok(PromptPlan {
            messages: vec![Message {
                role: Role::User,
                content,
            }],
            target: PlanTarget::whole(policy.policy_id.clone()),
        })
    }
}

/// Reads paragraph indices from a pruning answer. Lines without a leading
/// integer, and indices outside `0..paragraph_count`, are ignored.
pub fn parse_pruning_response(text: &str, paragraph_count: usize) -> BTreeSet<usize> {
    text.lines()
        .filter_map(|line| {
            let t = line
                .trim()
                .trim_start_matches(['[', '(', '#', '-', '*', ' ']);
            let digits: String = t.chars().take_while(|c| c.is_ascii_digit()).collect();
            digits.parse::<usize>().ok()
        })
        .filter(|&i| i < paragraph_count)
        .collect()
}

/// Draws `k` annotated paragraphs carrying at least one positive label,
/// deterministically for a given seed. `pool` should hold only
/// experimental-split policies; `exclude` removes policies (such as the one
/// under analysis) from consideration.
pub fn select_shots(
    annotations: &AnnotationSet,
    pool: &[PolicyDocument],
    taxonomy: &LabelTaxonomy,
    k: u8,
    seed: u64,
    exclude: &BTreeSet<String>,
) -> Result<Vec<FewShotExample>, PromptError> {
    if k > MAX_SHOTS {
        return Err(PromptError::TooManyShots(k));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let mut ordered: Vec<&PolicyDocument> = pool
        .iter()
        .filter(|p| !exclude.contains(&p.policy_id))
        .collect();
    ordered.sort_by(|a, b| a.policy_id.cmp(&b.policy_id));
    let candidates: Vec<(&PolicyDocument, usize)> = ordered
        .into_iter()
        .flat_map(|p| {
            annotations
                .positive_paragraphs(&p.policy_id)
                .into_iter()
                .filter(|&i| i < p.paragraphs.len())
                .map(move |i| (p, i))
        })
        .collect();
    let k = usize::from(k);
    if candidates.len() < k {
        return Err(PromptError::InsufficientShots {
            available: candidates.len(),
            wanted: k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, candidates.len(), k);
    Ok(picked
        .into_iter()
        .map(|i| {
            let (policy, paragraph) = candidates[i];
            FewShotExample {
                example_paragraph: policy.paragraphs[paragraph].text.clone(),
                expected_output: taxonomy
                    .labels()
                    .iter()
                    .map(|l| {
                        (
                            l.display_name.clone(),
                            annotations.segment_disclosed(
                                &policy.policy_id,
                                paragraph,
                                &l.label_id,
                            ),
                        )
                    })
                    .collect(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, PolicyDocument};

    fn taxonomy() -> LabelTaxonomy {
        LabelTaxonomy::new(vec![
            Label {
                label_id: "email".into(),
                display_name: "Email address".into(),
                definition: "An electronic mail address.".into(),
            },
            Label {
                label_id: "phone".into(),
                display_name: "Phone number".into(),
                definition: "A telephone number.".into(),
            },
        ])
        .unwrap()
    }

    fn shot(email: bool, phone: bool) -> FewShotExample {
        FewShotExample {
            example_paragraph: "We collect your email.".into(),
            expected_output: vec![
                ("Email address".into(), email),
                ("Phone number".into(), phone),
            ],
        }
    }

    const POLICY: &str = "We collect your email address.\n\nWe never ask for a phone number.";

    #[test]
    fn baseline_is_one_message_in_segment_order() {
        let b = PromptBuilder::default();
        let plan = b
            .build_prompt(
                POLICY,
                &taxonomy(),
                &PromptVariant::baseline(),
                &[],
                PlanTarget::whole("p"),
            )
            .unwrap();
        assert_eq!(plan.messages.len(), 1);
        let m = &plan.messages[0].content;
        let policy_at = m.find(POLICY).unwrap();
        let labels_at = m.find("- Email address").unwrap();
        let output_at = m.find("Email address: <Yes|No>").unwrap();
        assert!(policy_at < labels_at && labels_at < output_at);
        assert!(!m.contains("privacy policy enclosed"));
    }

    #[test]
    fn final_design_splits_data_and_task() {
        let b = PromptBuilder::default();
        let plan = b
            .build_prompt(
                POLICY,
                &taxonomy(),
                &PromptVariant::final_design(),
                &[shot(true, false), shot(false, true)],
                PlanTarget::whole("p"),
            )
            .unwrap();
        let users: Vec<_> = plan.user_messages().collect();
        assert_eq!(users.len(), 2);
        assert!(users[0]
            .content
            .contains("The following text is a privacy policy"));
        assert!(users[0].content.contains("enclosed in double quotes"));
        assert!(users[0].content.contains(&format!("\"{POLICY}\"")));
        assert!(!users[1].content.contains(POLICY));
        let task = &users[1].content;
        let defs = task.find("An electronic mail address.").unwrap();
        let out = task.find("Email address: <Yes|No>").unwrap();
        let ex1 = task.find("Example 1:").unwrap();
        let ex2 = task.find("Example 2:").unwrap();
        assert!(defs < out && out < ex1 && ex1 < ex2);
        assert!(task.ends_with("Now give the output for the privacy policy provided."));
    }

    #[test]
    fn per_label_plan_names_one_label() {
        let b = PromptBuilder::default();
        let variant = PromptVariant {
            segmentation: Segmentation::PerLabel,
            ..PromptVariant::baseline()
        };
        let target = PlanTarget {
            policy_id: "p".into(),
            paragraph_index: None,
            label_ids: vec!["phone".into()],
        };
        let plan = b
            .build_prompt(POLICY, &taxonomy(), &variant, &[], target)
            .unwrap();
        let m = &plan.messages[0].content;
        assert!(m.contains("- Phone number"));
        assert!(!m.contains("- Email address"));
        assert_eq!(m.matches(": <Yes|No>").count(), 1);

        let err = b
            .build_prompt(POLICY, &taxonomy(), &variant, &[], PlanTarget::whole("p"))
            .unwrap_err();
        assert_eq!(err, PromptError::PerLabelArity(2));
    }

    #[test]
    fn bottom_placement_puts_policy_last() {
        let b = PromptBuilder::default();
        let variant = PromptVariant {
            data_placement: DataPlacement::Bottom,
            data_boundary: DataBoundary::SentenceWithQuotes,
            ..PromptVariant::baseline()
        };
        let plan = b
            .build_prompt(POLICY, &taxonomy(), &variant, &[], PlanTarget::whole("p"))
            .unwrap();
        assert!(plan.messages[0].content.ends_with(&format!("\"{POLICY}\"")));
    }

    #[test]
    fn build_errors() {
        let b = PromptBuilder::default();
        let empty = LabelTaxonomy::default();
        let t = PlanTarget::whole("p");
        assert_eq!(
            b.build_prompt(POLICY, &empty, &PromptVariant::baseline(), &[], t.clone()),
            Err(PromptError::EmptyTaxonomy)
        );
        assert_eq!(
            b.build_prompt(
                " \n",
                &taxonomy(),
                &PromptVariant::baseline(),
                &[],
                t.clone()
            ),
            Err(PromptError::EmptyPolicy)
        );
        assert_eq!(
            b.build_prompt(
                POLICY,
                &taxonomy(),
                &PromptVariant::final_design(),
                &[shot(true, true)],
                t.clone()
            ),
            Err(PromptError::ShotCount {
                expected: 2,
                given: 1
            })
        );
        let bad = FewShotExample {
            example_paragraph: "x".into(),
            expected_output: vec![("Fax".into(), true)],
        };
        let one_shot = PromptVariant {
            shots: 1,
            ..PromptVariant::baseline()
        };
        assert_eq!(
            b.build_prompt(POLICY, &taxonomy(), &one_shot, &[bad], t.clone()),
            Err(PromptError::ShotUnknownLabel("Fax".into()))
        );
        let four = PromptVariant {
            shots: 4,
            ..PromptVariant::baseline()
        };
        assert_eq!(
            b.build_prompt(POLICY, &taxonomy(), &four, &[], t),
            Err(PromptError::TooManyShots(4))
        );
    }

    #[test]
    fn system_instruction_is_first() {
        let b = PromptBuilder::default();
        let variant = PromptVariant {
            system_instruction: Some("You are a helpful assistant.".into()),
            ..PromptVariant::baseline()
        };
        let plan = b
            .build_prompt(POLICY, &taxonomy(), &variant, &[], PlanTarget::whole("p"))
            .unwrap();
        assert_eq!(plan.messages[0].role, Role::System);
        assert_eq!(plan.messages.len(), 2);
    }

    #[test]
    fn llama_profile_fields() {
        let v = llama_profile();
        assert_eq!(v.shots, 0);
        assert_eq!(v.segmentation, Segmentation::PerParagraphAndLabel);
        assert_eq!(v.data_boundary, DataBoundary::SentenceWithQuotes);
        assert_eq!(PromptVariant::preset("llama"), Some(v));
        assert!(PromptVariant::preset("nope").is_none());
    }

    #[test]
    fn pruning_prompt_enumerates_indices() {
        let b = PromptBuilder::default();
        let one = PolicyDocument::from_text("p", "p", "Only paragraph.");
        let plan = b.build_pruning_prompt(&one).unwrap();
        assert!(plan.messages[0].content.contains("[0] Only paragraph."));

        let raw: Vec<String> = (0..12).map(|i| format!("Paragraph number {i}.")).collect();
        let twelve = PolicyDocument::from_text("q", "q", &raw.join("\n\n"));
        let content = &b.build_pruning_prompt(&twelve).unwrap().messages[0].content;
        for i in 0..12 {
            assert!(content.contains(&format!("[{i}] Paragraph number {i}.")));
        }
        assert!(!content.contains("[12]"));
    }

    #[test]
    fn pruning_response_parse() {
        assert_eq!(parse_pruning_response("0\n3", 12), BTreeSet::from([0, 3]));
        assert_eq!(
            parse_pruning_response("[2] yes\n- 5\nnone\n40", 12),
            BTreeSet::from([2, 5])
        );
    }

    #[test]
    fn template_rendering() {
        assert_eq!(
            render_template("t", "a {{x}} b", &[("x", "{{y}}")]).unwrap(),
            "a {{y}} b"
        );
        assert!(render_template("t", "{{nope}}", &[]).is_err());
        assert!(render_template("t", "{{open", &[("open", "")]).is_err());
    }

    #[test]
    fn template_dir_overrides() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("data_plain.txt"), "POLICY >>> {{policy}}").unwrap();
        let b = PromptBuilder::new(TemplateSet::load_dir(dir.path()).unwrap());
        let plan = b
            .build_prompt(
                POLICY,
                &taxonomy(),
                &PromptVariant::baseline(),
                &[],
                PlanTarget::whole("p"),
            )
            .unwrap();
        assert!(plan.messages[0]
            .content
            .starts_with("POLICY >>> We collect"));
    }

    fn shot_pool() -> (Vec<PolicyDocument>, AnnotationSet) {
        let raw: Vec<String> = (0..10)
            .map(|i| format!("Paragraph {i} of the policy."))
            .collect();
        let policy = PolicyDocument::from_text("pool", "pool", &raw.join("\n\n"));
        let mut a = AnnotationSet::new();
        for i in 0..10 {
            a.insert_segment("pool", i, "email", i % 3 == 0);
            a.insert_segment("pool", i, "phone", i == 4);
        }
        (vec![policy], a)
    }

    #[test]
    fn shots_are_deterministic_and_positive() {
        let (pool, a) = shot_pool();
        let none = BTreeSet::new();
        assert!(select_shots(&a, &pool, &taxonomy(), 0, 1, &none)
            .unwrap()
            .is_empty());
        let first = select_shots(&a, &pool, &taxonomy(), 2, 42, &none).unwrap();
        let again = select_shots(&a, &pool, &taxonomy(), 2, 42, &none).unwrap();
        assert_eq!(first, again);
        assert_eq!(first.len(), 2);
        // Filter-then-sample oracle: positives are paragraphs 0, 3, 4, 6, 9.
        let positives: BTreeSet<String> = [0, 3, 4, 6, 9]
            .iter()
            .map(|i| format!("Paragraph {i} of the policy."))
            .collect();
        for s in &first {
            assert!(positives.contains(&s.example_paragraph));
            assert!(s.expected_output.iter().any(|(_, v)| *v));
        }
    }

    #[test]
    fn shots_respect_exclusion_and_supply() {
        let (pool, a) = shot_pool();
        let excluded = BTreeSet::from(["pool".to_string()]);
        assert_eq!(
            select_shots(&a, &pool, &taxonomy(), 1, 1, &excluded),
            Err(PromptError::InsufficientShots {
                available: 0,
                wanted: 1
            })
        );
    }
}
