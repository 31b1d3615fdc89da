use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::budget::{chunk_policy, BudgetError, ChunkBudget, DEFAULT_RESPONSE_RESERVE};
use crate::corpus::{AnnotationSet, Label, LabelTaxonomy, PolicyDocument};
use crate::parsing::{parse_practice_vector, reduce_to_policy, PracticeVector, ReduceError};
use crate::prompting::{
    parse_pruning_response, select_shots, FewShotExample, PlanTarget, PromptBuilder, PromptError,
    PromptPlan, PromptVariant,
};
use crate::provider::{
    ChatClient, ChatExchange, ModelParameters, ModelProfile, ProviderError, Usage,
};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangePurpose {
    Pruning,
    Analysis,
}

/// Pointer from a run record to one cached exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeRef {
    pub purpose: ExchangePurpose,
    pub cache_key: String,
    /// Paragraph range of the text sent, after pruning.
    pub paragraphs: Range<usize>,
    /// Empty when every label was asked at once.
    pub label_ids: Vec<String>,
    pub cache_hit: bool,
    pub retries: u32,
    pub usage: Usage,
}

impl ExchangeRef {
    fn new(
        purpose: ExchangePurpose,
        ex: &ChatExchange,
        paragraphs: Range<usize>,
        label_ids: Vec<String>,
    ) -> Self {
        Self {
            purpose,
            cache_key: ex.cache_key.clone(),
            paragraphs,
            label_ids,
            cache_hit: ex.cache_hit,
            retries: ex.retries,
            usage: ex.usage,
        }
    }
}

/// Everything a run produced. `predictions` and `failures` are disjoint and
/// together cover the evaluated policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub variant: PromptVariant,
    pub profile_id: String,
    pub params: ModelParameters,
    pub labels: Vec<String>,
    pub predictions: BTreeMap<String, PracticeVector>,
    pub failures: BTreeMap<String, String>,
    pub exchanges: BTreeMap<String, Vec<ExchangeRef>>,
    /// Paragraph indices kept by pruning, when it ran and selected any.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pruned: BTreeMap<String, Vec<usize>>,
    pub timing_ms: BTreeMap<String, u64>,
    pub plans_dispatched: usize,
}

impl RunRecord {
    pub fn evaluated(&self) -> BTreeSet<&str> {
        self.predictions
            .keys()
            .chain(self.failures.keys())
            .map(String::as_str)
            .collect()
    }

    pub fn total_usage(&self) -> Usage {
        let mut u = Usage::default();
        for e in self.exchanges.values().flatten() {
            u.prompt_tokens += e.usage.prompt_tokens;
            u.completion_tokens += e.usage.completion_tokens;
        }
        u
    }
}

/// Where few-shot examples come from: annotated experimental-split
/// policies, drawn per analyzed policy with that policy excluded.
#[derive(Debug, Clone, Copy)]
pub struct ShotSource<'a> {
    pub annotations: &'a AnnotationSet,
    pub pool: &'a [PolicyDocument],
    pub seed: u64,
}

/// (policy index, outcome, elapsed ms)
type Finished = (usize, Result<PolicyOutcome, PipelineError>, u64);

struct PolicyOutcome {
    vector: PracticeVector,
    exchanges: Vec<ExchangeRef>,
    pruned: Option<Vec<usize>>,
    plans: usize,
}

/// One request to send and the labels its answer is parsed against.
#[derive(Debug, Clone)]
pub struct PlannedRequest {
    pub plan: PromptPlan,
    pub queried: Vec<Label>,
    pub paragraphs: Range<usize>,
}

pub struct Pipeline<'a> {
    client: &'a ChatClient,
    builder: &'a PromptBuilder,
    taxonomy: &'a LabelTaxonomy,
    profile: &'a ModelProfile,
    params: &'a ModelParameters,
    shots: Option<ShotSource<'a>>,
    response_reserve: usize,
    concurrency: usize,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        client: &'a ChatClient,
        builder: &'a PromptBuilder,
        taxonomy: &'a LabelTaxonomy,
        profile: &'a ModelProfile,
        params: &'a ModelParameters,
    ) -> Self {
        Self {
            client,
            builder,
            taxonomy,
            profile,
            params,
            shots: None,
            response_reserve: DEFAULT_RESPONSE_RESERVE,
            concurrency: 1,
        }
    }

    pub fn with_shots(mut self, shots: ShotSource<'a>) -> Self {
        self.shots = Some(shots);
        self
    }

    pub fn with_response_reserve(mut self, reserve: usize) -> Self {
        self.response_reserve = reserve;
        self
    }

    /// Number of policies analyzed in parallel.
    pub fn with_concurrency(mut self, workers: usize) -> Self {
        self.concurrency = workers.max(1);
        self
    }

    pub fn profile(&self) -> &ModelProfile {
        self.profile
    }

    pub fn client(&self) -> &ChatClient {
        self.client
    }

    pub fn params(&self) -> &ModelParameters {
        self.params
    }

    pub fn taxonomy(&self) -> &LabelTaxonomy {
        self.taxonomy
    }

    /// Analyzes every policy. A policy whose analysis fails is recorded in
    /// `failures`; the others still run.
    pub fn run(
        &self,
        run_id: &str,
        policies: &[PolicyDocument],
        variant: &PromptVariant,
    ) -> RunRecord {
        let results: Mutex<Vec<Finished>> = Mutex::new(Vec::new());
        let next = AtomicUsize::new(0);
        let work = || loop {
            let i = next.fetch_add(1, Ordering::Relaxed);
            let Some(policy) = policies.get(i) else { break };
            let started = self.client.clock().now();
            let outcome = self.analyze_policy(policy, variant);
            let elapsed = self
                .client
                .clock()
                .now()
                .saturating_sub(started)
                .as_millis() as u64;
            results.lock().unwrap().push((i, outcome, elapsed));
        };
        let workers = self.concurrency.min(policies.len()).max(1);
        if workers == 1 {
            work();
        } else {
            std::thread::scope(|s| {
                for _ in 0..workers {
                    s.spawn(work);
                }
            });
        }

        let mut record = RunRecord {
            run_id: run_id.to_string(),
            variant: variant.clone(),
            profile_id: self.profile.profile_id.clone(),
            params: self.params.clone(),
            labels: self.taxonomy.label_ids(),
            predictions: BTreeMap::new(),
            failures: BTreeMap::new(),
            exchanges: BTreeMap::new(),
            pruned: BTreeMap::new(),
            timing_ms: BTreeMap::new(),
            plans_dispatched: 0,
        };
        for (i, outcome, elapsed) in results.into_inner().unwrap() {
            let id = policies[i].policy_id.clone();
            record.timing_ms.insert(id.clone(), elapsed);
            match outcome {
                Ok(o) => {
                    record.plans_dispatched += o.plans;
                    if let Some(kept) = o.pruned {
                        record.pruned.insert(id.clone(), kept);
                    }
                    record.exchanges.insert(id.clone(), o.exchanges);
                    record.predictions.insert(id, o.vector);
                }
                Err(e) => {
                    record.failures.insert(id, e.to_string());
                }
            }
        }
        record
    }

    pub fn shots_for(
        &self,
        policy_id: &str,
        variant: &PromptVariant,
    ) -> Result<Vec<FewShotExample>, PromptError> {
        match (&self.shots, variant.shots) {
            (_, 0) => Ok(Vec::new()),
            (Some(src), k) => select_shots(
                src.annotations,
                src.pool,
                self.taxonomy,
                k,
                src.seed,
                &BTreeSet::from([policy_id.to_string()]),
            ),
            (None, k) => Err(PromptError::InsufficientShots {
                available: 0,
                wanted: usize::from(k),
            }),
        }
    }

    fn send(&self, plan: &PromptPlan) -> Result<ChatExchange, ProviderError> {
        self.client.send_chat(plan, self.profile, self.params)
    }

    /// Analysis requests for one (already pruned) policy, grouped by text
    /// unit: one inner list per chunk or paragraph, one request per label
    /// group within it.
    pub fn analysis_plans(
        &self,
        policy: &PolicyDocument,
        variant: &PromptVariant,
        shots: &[FewShotExample],
    ) -> Result<Vec<Vec<PlannedRequest>>, PipelineError> {
        let groups: Vec<Vec<String>> = if variant.segmentation.per_label() {
            self.taxonomy
                .label_ids()
                .into_iter()
                .map(|id| vec![id])
                .collect()
        } else {
            vec![Vec::new()]
        };

        // The largest prompt skeleton bounds the room left for policy text.
        let counter = self.client.counter();
        let mut overhead = 0;
        for group in &groups {
            let target = PlanTarget {
                policy_id: policy.policy_id.clone(),
                paragraph_index: None,
                label_ids: group.clone(),
            };
            let skeleton = self
                .builder
                .skeleton(self.taxonomy, variant, shots, target)?;
            overhead = overhead.max(
                skeleton
                    .messages
                    .iter()
                    .map(|m| counter.count(&m.content))
                    .sum(),
            );
        }
        let reserve = self
            .response_reserve
            .max(self.params.max_output_tokens as usize);
        let budget = ChunkBudget::new(self.profile.context_limit, overhead, reserve);
        let chunks = chunk_policy(policy, &budget, counter)?;

        let units: Vec<(Range<usize>, Option<usize>, String)> =
            if variant.segmentation.per_paragraph() {
                policy
                    .paragraphs
                    .iter()
                    .map(|p| (p.index..p.index + 1, Some(p.index), p.text.clone()))
                    .collect()
            } else {
                chunks
                    .into_iter()
                    .map(|c| (c.paragraphs, None, c.text))
                    .collect()
            };

        let mut out = Vec::with_capacity(units.len());
        for (paragraphs, paragraph_index, text) in units {
            let mut requests = Vec::with_capacity(groups.len());
            for group in &groups {
                let queried: Vec<Label> = if group.is_empty() {
                    self.taxonomy.labels().to_vec()
                } else {
                    group
                        .iter()
                        .filter_map(|id| self.taxonomy.get(id).cloned())
                        .collect()
                };
                let target = PlanTarget {
                    policy_id: policy.policy_id.clone(),
                    paragraph_index,
                    label_ids: group.clone(),
                };
                requests.push(PlannedRequest {
                    plan: self.builder.build_prompt(
                        &text,
                        self.taxonomy,
                        variant,
                        shots,
                        target,
                    )?,
                    queried,
                    paragraphs: paragraphs.clone(),
                });
            }
            out.push(requests);
        }
        Ok(out)
    }

    fn analyze_policy(
        &self,
        policy: &PolicyDocument,
        variant: &PromptVariant,
    ) -> Result<PolicyOutcome, PipelineError> {
        let mut exchanges = Vec::new();
        let mut plans = 0;

        let mut pruned = None;
        let owned;
        let policy = if variant.pruning {
            let plan = self.builder.build_pruning_prompt(policy)?;
            let ex = self.send(&plan)?;
            plans += 1;
            exchanges.push(ExchangeRef::new(
                ExchangePurpose::Pruning,
                &ex,
                0..policy.paragraphs.len(),
                Vec::new(),
            ));
            let keep = parse_pruning_response(&ex.response_text, policy.paragraphs.len());
            if keep.is_empty() {
                policy
            } else {
                pruned = Some(keep.iter().copied().collect());
                owned = policy.retain_paragraphs(&keep);
                &owned
            }
        } else {
            policy
        };

        let shots = self.shots_for(&policy.policy_id, variant)?;
        let units = self.analysis_plans(policy, variant, &shots)?;
        let mut unit_vectors = Vec::with_capacity(units.len());
        for unit in units {
            let mut parts = Vec::with_capacity(unit.len());
            for req in unit {
                let ex = self.send(&req.plan)?;
                plans += 1;
                exchanges.push(ExchangeRef::new(
                    ExchangePurpose::Analysis,
                    &ex,
                    req.paragraphs.clone(),
                    req.plan.target.label_ids.clone(),
                ));
                parts.push(parse_practice_vector(&ex.response_text, &req.queried));
            }
            unit_vectors.push(PracticeVector::merge_disjoint(parts)?);
        }

        Ok(PolicyOutcome {
            vector: reduce_to_policy(&unit_vectors)?,
            exchanges,
            pruned,
            plans,
        })
    }
}
