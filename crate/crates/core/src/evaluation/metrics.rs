use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotationSet, LabelTaxonomy};
use crate::parsing::{Answer, PracticeVector};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    /// Metrics with zero-denominator cases reported as 0 and flagged.
    pub fn metrics(&self) -> Metrics {
        let mut undefined = false;
        let mut ratio = |n: u64, d: u64| {
            if d == 0 {
                undefined = true;
                0.0
            } else {
                n as f64 / d as f64
            }
        };
        let accuracy = ratio(self.tp + self.tn, self.total());
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            undefined = true;
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            accuracy,
            precision,
            recall,
            f1,
            undefined_metric: undefined,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub undefined_metric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    #[serde(flatten)]
    pub counts: Confusion,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub coverage: f64,
}

/// Mean of per-policy metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Micro-averaged counts over every (policy, label) pair, with a per-label
/// breakdown and a per-policy macro average alongside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub policies: usize,
    pub labels: usize,
    #[serde(flatten)]
    pub counts: Confusion,
    #[serde(flatten)]
    pub metrics: Metrics,
    /// Fraction of pairs with a Yes/No answer.
    pub coverage: f64,
    pub unanswered: u64,
    pub per_label: BTreeMap<String, LabelMetrics>,
    pub macro_by_policy: MacroMetrics,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("no predictions to score")]
    Empty,
}

/// Scores predictions against ground truth. Unanswered counts as a negative
/// prediction; absent truth counts as a negative label.
pub fn score(
    predictions: &BTreeMap<String, PracticeVector>,
    truth: &AnnotationSet,
    taxonomy: &LabelTaxonomy,
) -> Result<MetricsReport, ScoreError> {
    if predictions.is_empty() {
        return Err(ScoreError::Empty);
    }
    let mut total = Confusion::default();
    let mut per_label: BTreeMap<String, (Confusion, u64)> = BTreeMap::new();
    let mut unanswered = 0u64;
    let mut macro_sum = [0.0f64; 4];

    for (policy_id, vector) in predictions {
        let mut policy = Confusion::default();
        for label in taxonomy.labels() {
            let answer = vector.get(&label.label_id);
            let actual = truth.disclosed(policy_id, &label.label_id);
            policy.record(answer.is_positive(), actual);
            let entry = per_label.entry(label.label_id.clone()).or_default();
            entry.0.record(answer.is_positive(), actual);
            if answer == Answer::Unanswered {
                unanswered += 1;
            } else {
                entry.1 += 1;
            }
        }
        total.add(&policy);
        let m = policy.metrics();
        for (slot, v) in macro_sum
            .iter_mut()
            .zip([m.accuracy, m.precision, m.recall, m.f1])
        {
            *slot += v;
        }
    }

    let pairs = total.total();
    let n = predictions.len() as f64;
    let coverage = if pairs == 0 {
        0.0
    } else {
        (pairs - unanswered) as f64 / pairs as f64
    };
    Ok(MetricsReport {
        policies: predictions.len(),
        labels: taxonomy.len(),
        counts: total,
        metrics: total.metrics(),
        coverage,
        unanswered,
        per_label: per_label
            .into_iter()
            .map(|(id, (counts, answered))| {
                let coverage = if counts.total() == 0 {
                    0.0
                } else {
                    answered as f64 / counts.total() as f64
                };
                (
                    id,
                    LabelMetrics {
                        counts,
                        metrics: counts.metrics(),
                        coverage,
                    },
                )
            })
            .collect(),
        macro_by_policy: MacroMetrics {
            accuracy: macro_sum[0] / n,
            precision: macro_sum[1] / n,
            recall: macro_sum[2] / n,
            f1: macro_sum[3] / n,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;

    fn taxonomy(n: usize) -> LabelTaxonomy {
        LabelTaxonomy::new(
            (0..n)
                .map(|i| Label {
                    label_id: format!("l{i}"),
                    display_name: format!("Label {i}"),
                    definition: "d".into(),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let tax = taxonomy(3);
        let mut truth = AnnotationSet::new();
        truth.insert_policy("p", "l0", true);
        truth.insert_policy("p", "l2", true);
        let v = PracticeVector::new(
            [("l0", Answer::Yes), ("l1", Answer::No), ("l2", Answer::Yes)]
                .into_iter()
                .map(|(k, a)| (k.to_string(), a))
                .collect(),
        );
        let r = score(&BTreeMap::from([("p".to_string(), v)]), &truth, &tax).unwrap();
        assert_eq!(r.counts, Confusion::new(2, 0, 0, 1));
        assert_eq!(
            (
                r.metrics.accuracy,
                r.metrics.precision,
                r.metrics.recall,
                r.metrics.f1
            ),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert_eq!(r.coverage, 1.0);
    }

    #[test]
    fn ten_pair_hand_count() {
        // TP=5, FP=2, FN=1, TN=2 over ten pairs.
        let m = Confusion::new(5, 2, 1, 2).metrics();
        assert!((m.accuracy - 0.700).abs() < 1e-12);
        assert!((m.precision - 5.0 / 7.0).abs() < 1e-12);
        assert!((m.recall - 5.0 / 6.0).abs() < 1e-12);
        assert!((m.f1 - 10.0 / 13.0).abs() < 1e-12);
        assert!(!m.undefined_metric);
    }

    #[test]
    fn zero_denominators_are_flagged() {
        let m = Confusion::new(0, 0, 0, 4).metrics();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert_eq!(m.accuracy, 1.0);
        assert!(m.undefined_metric);
    }

    #[test]
    fn unanswered_is_negative_and_reported() {
        let tax = taxonomy(2);
        let mut truth = AnnotationSet::new();
        truth.insert_policy("p", "l0", true);
        let v = PracticeVector::new(BTreeMap::from([
            ("l0".to_string(), Answer::Unanswered),
            ("l1".to_string(), Answer::Unanswered),
        ]));
        let r = score(&BTreeMap::from([("p".to_string(), v)]), &truth, &tax).unwrap();
        assert_eq!(r.counts, Confusion::new(0, 0, 1, 1));
        assert_eq!(r.unanswered, 2);
        assert_eq!(r.coverage, 0.0);
    }

    #[test]
    fn empty_predictions_error() {
        assert_eq!(
            score(&BTreeMap::new(), &AnnotationSet::new(), &taxonomy(1)),
            Err(ScoreError::Empty)
        );
    }

    #[test]
    fn report_json_uses_fn_key() {
        let json = serde_json::to_value(Confusion::new(1, 2, 3, 4)).unwrap();
        assert_eq!(json["fn"], 3);
    }
}
