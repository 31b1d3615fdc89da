//! Response consistency under repeated identical requests.
//!
//! Every analysis request of every scheduled policy is sent once per repeat
//! per slot, bypassing the cache. For each (policy, request) the most
//! frequent parsed answer is the typical one; any other parsed answer is a
//! discrepancy. Formatting differences that parse identically are not.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::PolicyDocument;
use crate::evaluation::{Pipeline, PipelineError, PlannedRequest};
use crate::parsing::{parse_practice_vector, Answer};
use crate::prompting::PromptVariant;
use crate::provider::CacheMode;

/// Time of day, minute resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TimeOfDay {
    pub hour: u8,
    pub minute: u8,
}

impl TimeOfDay {
    fn since_midnight(self) -> Duration {
        Duration::from_secs(u64::from(self.hour) * 3600 + u64::from(self.minute) * 60)
    }
}

impl FromStr for TimeOfDay {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AuditError::Schedule(format!("time `{s}` is not HH:MM"));
        let (h, m) = s.trim().split_once(':').ok_or_else(bad)?;
        let hour: u8 = h.parse().map_err(|_| bad())?;
        let minute: u8 = m.parse().map_err(|_| bad())?;
        if hour > 23 || minute > 59 {
            return Err(bad());
        }
        Ok(Self { hour, minute })
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.hour, self.minute)
    }
}

impl Serialize for TimeOfDay {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TimeOfDay {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Slot {
    pub day: u32,
    pub time: TimeOfDay,
}

impl Slot {
    fn offset(self) -> Duration {
        Duration::from_secs(u64::from(self.day) * 86_400) + self.time.since_midnight()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencySchedule {
    pub repeats_per_slot: u32,
    pub slots: Vec<Slot>,
    /// Policy ids to query.
    pub policies: Vec<String>,
}

impl ConsistencySchedule {
    /// `days` × `times`, in chronological order.
    pub fn grid(
        days: u32,
        times: &[TimeOfDay],
        repeats_per_slot: u32,
        policies: Vec<String>,
    ) -> Self {
        let mut slots: Vec<Slot> = (0..days)
            .flat_map(|day| times.iter().map(move |&time| Slot { day, time }))
            .collect();
        slots.sort();
        Self {
            repeats_per_slot,
            slots,
            policies,
        }
    }

    /// Requests sent for policies that need exactly one request each.
    pub fn total_requests(&self) -> usize {
        self.policies.len() * self.slots.len() * self.repeats_per_slot as usize
    }

    fn validate(&self) -> Result<(), AuditError> {
        if self.repeats_per_slot == 0 || self.slots.is_empty() || self.policies.is_empty() {
            return Err(AuditError::Schedule(
                "schedule needs at least one slot, one repeat and one policy".into(),
            ));
        }
        if self.slots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(AuditError::Schedule(
                "slots must be strictly chronological".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("policy `{0}` is not in the corpus")]
    UnknownPolicy(String),
    #[error("policy `{policy_id}`: {source}")]
    Plan {
        policy_id: String,
        source: PipelineError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotConsistency {
    pub day: u32,
    pub time: TimeOfDay,
    pub total: u64,
    pub discrepancies: u64,
    pub failures: u64,
    pub consistency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConsistency {
    /// SHA-256 over the typical answers of the policy's requests.
    pub modal_hash: String,
    pub total: u64,
    pub discrepancies: u64,
    pub failures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Successful responses compared.
    pub total: u64,
    pub discrepancies: u64,
    /// Requests that failed at the provider; not counted in `total`.
    pub failures: u64,
    pub consistency: f64,
    pub per_policy: BTreeMap<String, PolicyConsistency>,
    pub per_slot: Vec<SlotConsistency>,
}

impl ConsistencyReport {
    pub fn slot_csv(&self) -> String {
        let mut out = String::from("day,time,total,discrepancies,failures,consistency\n");
        for s in &self.per_slot {
            out.push_str(&format!(
                "{},{},{},{},{},{:.4}\n",
                s.day, s.time, s.total, s.discrepancies, s.failures, s.consistency
            ));
        }
        out
    }
}

type Answers = BTreeMap<String, Answer>;

/// Index of the most frequent element; ties go to the one seen first.
pub fn modal_index<T: PartialEq>(items: &[T]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, item) in items.iter().enumerate() {
        if items[..i].contains(item) {
            continue;
        }
        let count = items.iter().filter(|x| *x == item).count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((i, count));
        }
    }
    best.map(|(i, _)| i)
}

/// Number of items differing from the modal one.
pub fn count_discrepancies<T: PartialEq>(items: &[T]) -> usize {
    match modal_index(items) {
        Some(m) => items.iter().filter(|x| *x != &items[m]).count(),
        None => 0,
    }
}

fn ratio_consistency(total: u64, discrepancies: u64) -> f64 {
    if total == 0 {
        1.0
    } else {
        1.0 - discrepancies as f64 / total as f64
    }
}

/// A response as received: which slot, and its parsed answers or `None`
/// for a provider failure.
struct Observation {
    slot: usize,
    answers: Option<Answers>,
}

/// Sends every scheduled request and measures agreement with the typical
/// answer. Between slots the clock sleeps until the slot's offset from the
/// first slot unless `no_wait` is set. Pruning is not applied; the audit
/// repeats the analysis requests of the full policy text.
pub fn audit_consistency(
    pipeline: &Pipeline<'_>,
    corpus: &[PolicyDocument],
    schedule: &ConsistencySchedule,
    variant: &PromptVariant,
    no_wait: bool,
) -> Result<ConsistencyReport, AuditError> {
    schedule.validate()?;
    let mut requests: Vec<(String, Vec<PlannedRequest>)> = Vec::new();
    for id in &schedule.policies {
        let policy = corpus
            .iter()
            .find(|p| &p.policy_id == id)
            .ok_or_else(|| AuditError::UnknownPolicy(id.clone()))?;
        let plan_err = |source| AuditError::Plan {
            policy_id: id.clone(),
            source,
        };
        let shots = pipeline
            .shots_for(id, variant)
            .map_err(|e| plan_err(PipelineError::Prompt(e)))?;
        let plans = pipeline
            .analysis_plans(policy, variant, &shots)
            .map_err(plan_err)?;
        requests.push((id.clone(), plans.into_iter().flatten().collect()));
    }

    let client = pipeline.client();
    let clock = client.clock();
    // observations[policy][request]
    let mut observations: Vec<Vec<Vec<Observation>>> = requests
        .iter()
        .map(|(_, reqs)| reqs.iter().map(|_| Vec::new()).collect())
        .collect();
    let start = clock.now();
    let first = schedule.slots[0].offset();
    for (slot_index, slot) in schedule.slots.iter().enumerate() {
        if !no_wait {
            let due = slot.offset() - first;
            let elapsed = clock.now().saturating_sub(start);
            if due > elapsed {
                clock.sleep(due - elapsed);
            }
        }
        for _ in 0..schedule.repeats_per_slot {
            for (p, (_, reqs)) in requests.iter().enumerate() {
                for (r, req) in reqs.iter().enumerate() {
                    let answers = client
                        .send_chat_with(
                            &req.plan,
                            pipeline.profile(),
                            pipeline.params(),
                            CacheMode::Bypass,
                        )
                        .ok()
                        .map(|ex| parse_practice_vector(&ex.response_text, &req.queried).answers);
                    observations[p][r].push(Observation {
                        slot: slot_index,
                        answers,
                    });
                }
            }
        }
    }

    let mut per_slot: Vec<(u64, u64, u64)> = vec![(0, 0, 0); schedule.slots.len()];
    let mut per_policy = BTreeMap::new();
    let (mut total, mut discrepancies, mut failures) = (0u64, 0u64, 0u64);
    for ((policy_id, _), per_request) in requests.iter().zip(&observations) {
        let mut hasher = Sha256::new();
        let mut pc = PolicyConsistency {
            modal_hash: String::new(),
            total: 0,
            discrepancies: 0,
            failures: 0,
        };
        for obs in per_request {
            let answered: Vec<&Answers> = obs.iter().filter_map(|o| o.answers.as_ref()).collect();
            let modal = modal_index(&answered).map(|i| answered[i]);
            hasher.update(serde_json::to_vec(&modal).expect("answers serialize"));
            for o in obs {
                let slot = &mut per_slot[o.slot];
                match &o.answers {
                    None => {
                        pc.failures += 1;
                        slot.2 += 1;
                    }
                    Some(a) => {
                        pc.total += 1;
                        slot.0 += 1;
                        if Some(a) != modal {
                            pc.discrepancies += 1;
                            slot.1 += 1;
                        }
                    }
                }
            }
        }
        pc.modal_hash = hex::encode(hasher.finalize());
        total += pc.total;
        discrepancies += pc.discrepancies;
        failures += pc.failures;
        per_policy.insert(policy_id.clone(), pc);
    }

    Ok(ConsistencyReport {
        total,
        discrepancies,
        failures,
        consistency: ratio_consistency(total, discrepancies),
        per_policy,
        per_slot: schedule
            .slots
            .iter()
            .zip(per_slot)
            .map(|(s, (t, d, f))| SlotConsistency {
                day: s.day,
                time: s.time,
                total: t,
                discrepancies: d,
                failures: f,
                consistency: ratio_consistency(t, d),
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modal_tie_goes_to_first_seen() {
        assert_eq!(modal_index(&["b", "a", "a", "b"]), Some(0));
        assert_eq!(modal_index(&["b", "a", "a"]), Some(1));
        assert_eq!(modal_index::<u8>(&[]), None);
        assert_eq!(count_discrepancies(&[1, 1, 2, 1, 3]), 2);
    }

    #[test]
    fn time_of_day_round_trip() {
        let t: TimeOfDay = "9:05".parse().unwrap();
        assert_eq!(t.to_string(), "09:05");
        assert!("24:00".parse::<TimeOfDay>().is_err());
        assert!("noon".parse::<TimeOfDay>().is_err());
    }

    #[test]
    fn grid_counts() {
        let times: Vec<TimeOfDay> = ["09:00", "12:00", "15:00", "18:00", "21:00"]
            .iter()
            .map(|t| t.parse().unwrap())
            .collect();
        let s = ConsistencySchedule::grid(3, &times, 1, (0..33).map(|i| format!("p{i}")).collect());
        assert_eq!(s.slots.len(), 15);
        assert_eq!(s.total_requests(), 495);
        assert!(s.validate().is_ok());
    }
}
