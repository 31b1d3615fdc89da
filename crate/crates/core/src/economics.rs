//! Annotation cost, LLM cost, break-even and throughput arithmetic, plus
//! cost/time curve tables for plotting.
//!
//! Money is held as integer micro-units so that every figure is exact.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

const MICROS: i128 = 1_000_000;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum EconomicsError {
    #[error("invalid amount `{0}`")]
    InvalidAmount(String),
    #[error("invalid hours `{0}`")]
    InvalidHours(String),
    #[error("per-policy LLM cost is zero; break-even is infinite")]
    InfiniteBreakEven,
    #[error(
        "a policy needs {tokens_per_policy} tokens but the limit is {tokens_per_minute} per minute"
    )]
    ExceedsCapacity {
        tokens_per_policy: u64,
        tokens_per_minute: u64,
    },
    #[error("tokens per policy must be positive")]
    ZeroTokens,
    #[error("empty policy-count range")]
    EmptyRange,
}

/// An amount of currency in millionths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn from_micros(micros: i64) -> Self {
        Money(micros)
    }

    pub fn from_cents(cents: i64) -> Self {
        Money(cents * 10_000)
    }

    pub fn from_dollars(dollars: i64) -> Self {
        Money(dollars * 1_000_000)
    }

    pub fn micros(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / MICROS as f64
    }

    pub fn times(self, n: u64) -> Money {
        Money((i128::from(self.0) * i128::from(n)) as i64)
    }
}

impl FromStr for Money {
    type Err = EconomicsError;

    /// Accepts an optional `$`, thousands separators and up to six decimals.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EconomicsError::InvalidAmount(s.to_string());
        let t = s.trim().trim_start_matches('$').replace(',', "");
        let (negative, t) = match t.strip_prefix('-') {
            Some(rest) => (true, rest.to_string()),
            None => (false, t),
        };
        let (whole, frac) = t.split_once('.').unwrap_or((&t, ""));
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !whole.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let frac_trimmed = frac.trim_end_matches('0');
        if frac_trimmed.len() > 6 {
            return Err(bad());
        }
        let whole: i64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let frac_micros: i64 = format!("{frac_trimmed:0<6}").parse().map_err(|_| bad())?;
        let micros = whole
            .checked_mul(1_000_000)
            .and_then(|w| w.checked_add(frac_micros))
            .ok_or_else(bad)?;
        Ok(Money(if negative { -micros } else { micros }))
    }
}

impl fmt::Display for Money {
    /// At least two decimals; further decimals only when non-zero.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let whole = abs / 1_000_000;
        let frac = format!("{:06}", abs % 1_000_000);
        let frac = frac.trim_end_matches('0');
        let frac = format!("{frac:0<2}");
        write!(f, "{sign}{whole}.{frac}")
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
            Float(f64),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Text(s) => s,
            Raw::Int(i) => i.to_string(),
            Raw::Float(x) => x.to_string(),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Exact rational number of hours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hours {
    numer: u64,
    denom: u64,
}

impl Hours {
    pub fn new(numer: u64, denom: u64) -> Option<Self> {
        (denom > 0).then_some(Hours { numer, denom })
    }

    pub fn from_minutes(minutes: u64) -> Self {
        Hours {
            numer: minutes,
            denom: 60,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.numer as f64 / self.denom as f64
    }
}

impl FromStr for Hours {
    type Err = EconomicsError;

    /// `1.8667`, `112/60`, `1h52m` or `52m`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EconomicsError::InvalidHours(s.to_string());
        let t = s.trim();
        if let Some((n, d)) = t.split_once('/') {
            let numer = n.trim().parse().map_err(|_| bad())?;
            let denom = d.trim().parse().map_err(|_| bad())?;
            return Hours::new(numer, denom).ok_or_else(bad);
        }
        if t.ends_with('m') || t.contains('h') {
            let (h, rest) = match t.split_once('h') {
                Some((h, rest)) => (h.trim().parse::<u64>().map_err(|_| bad())?, rest),
                None => (0, t),
            };
            let m = match rest.trim().strip_suffix('m') {
                Some(m) => m.trim().parse::<u64>().map_err(|_| bad())?,
                None if rest.trim().is_empty() => 0,
                None => return Err(bad()),
            };
            return Ok(Hours::from_minutes(h * 60 + m));
        }
        let (whole, frac) = t.split_once('.').unwrap_or((t, ""));
        if whole.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if frac.len() > 9 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let whole: u64 = if whole.is_empty() {
            0
        } else {
            whole.parse().map_err(|_| bad())?
        };
        let denom = 10u64.pow(frac.len() as u32);
        let frac: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        Ok(Hours {
            numer: whole * denom + frac,
            denom,
        })
    }
}

impl fmt::Display for Hours {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer, self.denom)
    }
}

impl Serialize for Hours {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Hours {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(u64),
            Float(f64),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Text(s) => s,
            Raw::Int(i) => i.to_string(),
            Raw::Float(x) => x.to_string(),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Divides with rounding half away from zero.
fn div_round(numer: i128, denom: i128) -> i128 {
    let q = numer / denom;
    let r = numer % denom;
    if 2 * r.abs() >= denom.abs() {
        q + numer.signum() * denom.signum()
    } else {
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationCostModel {
    pub annotators_per_policy: u32,
    pub hours_per_policy: Hours,
    pub hourly_rate: Money,
    pub policy_count: u64,
}

/// annotators × hours × rate × policies, rounded to the micro-unit.
pub fn annotation_cost(model: &AnnotationCostModel) -> Money {
    let numer = i128::from(model.annotators_per_policy)
        * i128::from(model.hours_per_policy.numer)
        * i128::from(model.hourly_rate.micros())
        * i128::from(model.policy_count);
    Money(div_round(numer, i128::from(model.hours_per_policy.denom)) as i64)
}

/// Prices are per 1,000 tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmCostModel {
    pub tokens_in_per_policy: u64,
    pub tokens_out_per_policy: u64,
    pub price_in: Money,
    pub price_out: Money,
}

pub fn llm_cost_per_policy(model: &LlmCostModel) -> Money {
    let numer = i128::from(model.tokens_in_per_policy) * i128::from(model.price_in.micros())
        + i128::from(model.tokens_out_per_policy) * i128::from(model.price_out.micros());
    Money(div_round(numer, 1000) as i64)
}

/// Smallest policy count whose cumulative LLM cost reaches the fixed cost.
pub fn break_even_for(fixed: Money, per_policy: Money) -> Result<u64, EconomicsError> {
    if per_policy.micros() <= 0 {
        return Err(EconomicsError::InfiniteBreakEven);
    }
    let fixed = fixed.micros().max(0) as u64;
    Ok(fixed.div_ceil(per_policy.micros() as u64))
}

pub fn break_even(
    annotation: &AnnotationCostModel,
    llm: &LlmCostModel,
) -> Result<u64, EconomicsError> {
    break_even_for(annotation_cost(annotation), llm_cost_per_policy(llm))
}

/// floor(tokens_per_minute / tokens_per_policy)
pub fn policies_per_minute(
    tokens_per_minute: u64,
    tokens_per_policy: u64,
) -> Result<u64, EconomicsError> {
    if tokens_per_policy == 0 {
        return Err(EconomicsError::ZeroTokens);
    }
    if tokens_per_policy > tokens_per_minute {
        return Err(EconomicsError::ExceedsCapacity {
            tokens_per_policy,
            tokens_per_minute,
        });
    }
    Ok(tokens_per_minute / tokens_per_policy)
}

pub fn throughput(
    profile: &crate::provider::ModelProfile,
    tokens_per_policy: u64,
) -> Result<u64, EconomicsError> {
    policies_per_minute(profile.tokens_per_minute, tokens_per_policy)
}

/// One model plotted in the cost and time curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveModel {
    pub name: String,
    pub cost: LlmCostModel,
    pub tokens_per_policy: u64,
    pub tokens_per_minute: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub n_policies: u64,
    pub costs: Vec<Money>,
    pub minutes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub model_names: Vec<String>,
    /// Fixed annotation cost drawn as a horizontal line, when given.
    pub annotation: Option<Money>,
    pub rows: Vec<CurveRow>,
}

/// Cumulative cost and processing minutes for each model at each policy count.
/// Minutes are `n × tokens_per_policy / tokens_per_minute`.
pub fn emit_curves(
    models: &[CurveModel],
    policy_counts: RangeInclusive<u64>,
    annotation: Option<Money>,
) -> Result<CurveTable, EconomicsError> {
    if policy_counts.is_empty() {
        return Err(EconomicsError::EmptyRange);
    }
    let per_policy: Vec<Money> = models
        .iter()
        .map(|m| llm_cost_per_policy(&m.cost))
        .collect();
    let rows = policy_counts
        .map(|n| CurveRow {
            n_policies: n,
            costs: per_policy.iter().map(|c| c.times(n)).collect(),
            minutes: models
                .iter()
                .map(|m| n as f64 * m.tokens_per_policy as f64 / m.tokens_per_minute as f64)
                .collect(),
        })
        .collect();
    Ok(CurveTable {
        model_names: models.iter().map(|m| m.name.clone()).collect(),
        annotation,
        rows,
    })
}

impl CurveTable {
    /// Columns: `n_policies`, one `<model>_cost` per model, then
    /// `annotation_cost` when present.
    pub fn cost_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["n_policies".to_string()];
        header.extend(self.model_names.iter().map(|n| format!("{n}_cost")));
        if self.annotation.is_some() {
            header.push("annotation_cost".into());
        }
        w.write_record(&header).expect("in-memory csv");
        for row in &self.rows {
            let mut rec = vec![row.n_policies.to_string()];
            rec.extend(row.costs.iter().map(|c| c.to_string()));
            if let Some(a) = self.annotation {
                rec.push(a.to_string());
            }
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }

    /// Columns: `n_policies`, one `<model>_minutes` per model.
    pub fn time_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["n_policies".to_string()];
        header.extend(self.model_names.iter().map(|n| format!("{n}_minutes")));
        w.write_record(&header).expect("in-memory csv");
        for row in &self.rows {
            let mut rec = vec![row.n_policies.to_string()];
            rec.extend(row.minutes.iter().map(|m| format!("{m:.4}")));
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> Money {
        s.parse().unwrap()
    }

    #[test]
    fn money_parse_and_display() {
        assert_eq!(m("0.01").micros(), 10_000);
        assert_eq!(m("$5,601").micros(), 5_601_000_000);
        assert_eq!(m("0.00679").to_string(), "0.00679");
        assert_eq!(m("5600").to_string(), "5600.00");
        assert_eq!(m(".5").to_string(), "0.50");
        assert_eq!(m("-1.25").to_string(), "-1.25");
        assert!("0.0000001".parse::<Money>().is_err());
        assert!("abc".parse::<Money>().is_err());
        assert!(".".parse::<Money>().is_err());
    }

    #[test]
    fn hours_parse() {
        assert_eq!("1h52m".parse::<Hours>().unwrap(), Hours::from_minutes(112));
        assert_eq!("52m".parse::<Hours>().unwrap(), Hours::from_minutes(52));
        assert_eq!(
            "112/60".parse::<Hours>().unwrap(),
            Hours::new(112, 60).unwrap()
        );
        assert_eq!(
            "1.8667".parse::<Hours>().unwrap(),
            Hours::new(18_667, 10_000).unwrap()
        );
        assert!("1/0".parse::<Hours>().is_err());
    }

    #[test]
    fn annotation_cost_examples() {
        let model = AnnotationCostModel {
            annotators_per_policy: 3,
            hours_per_policy: Hours::from_minutes(112),
            hourly_rate: Money::from_dollars(10),
            policy_count: 100,
        };
        assert_eq!(annotation_cost(&model).to_string(), "5600.00");
        assert_eq!(
            annotation_cost(&AnnotationCostModel {
                policy_count: 0,
                ..model
            }),
            Money::ZERO
        );
        let single = AnnotationCostModel {
            annotators_per_policy: 1,
            hours_per_policy: Hours::from_minutes(60),
            hourly_rate: m("8.5"),
            policy_count: 10,
        };
        assert_eq!(annotation_cost(&single), Money::from_dollars(85));
    }

    #[test]
    fn llm_cost_examples() {
        let model = LlmCostModel {
            tokens_in_per_policy: 6_652,
            tokens_out_per_policy: 600,
            price_in: m("0.01"),
            price_out: m("0.03"),
        };
        assert_eq!(llm_cost_per_policy(&model), m("0.08452"));
        let zero = LlmCostModel {
            tokens_in_per_policy: 0,
            tokens_out_per_policy: 0,
            ..model
        };
        assert_eq!(llm_cost_per_policy(&zero), Money::ZERO);
        let doubled = LlmCostModel {
            tokens_in_per_policy: 13_304,
            tokens_out_per_policy: 1_200,
            ..model
        };
        assert_eq!(
            llm_cost_per_policy(&doubled),
            llm_cost_per_policy(&model).times(2)
        );
    }

    #[test]
    fn break_even_examples() {
        assert_eq!(break_even_for(m("5601"), m("0.0687")), Ok(81_529));
        assert_eq!(break_even_for(m("5601"), m("0.00679")), Ok(824_890));
        assert_eq!(break_even_for(Money::ZERO, m("0.0687")), Ok(0));
        assert_eq!(
            break_even_for(m("5601"), Money::ZERO),
            Err(EconomicsError::InfiniteBreakEven)
        );
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(policies_per_minute(300_000, 6_652), Ok(45));
        assert_eq!(policies_per_minute(1_000_000, 6_652), Ok(150));
        assert_eq!(policies_per_minute(6_652, 6_652), Ok(1));
        assert!(matches!(
            policies_per_minute(100, 101),
            Err(EconomicsError::ExceedsCapacity { .. })
        ));
        assert_eq!(policies_per_minute(100, 0), Err(EconomicsError::ZeroTokens));
    }

    fn gpt4() -> CurveModel {
        CurveModel {
            name: "gpt-4-turbo".into(),
            cost: LlmCostModel {
                tokens_in_per_policy: 1_000,
                tokens_out_per_policy: 0,
                price_in: m("0.0687"),
                price_out: Money::ZERO,
            },
            tokens_per_policy: 6_652,
            tokens_per_minute: 300_000,
        }
    }

    #[test]
    fn curves_single_model() {
        let t = emit_curves(&[gpt4()], 0..=1, None).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[0].costs[0], Money::ZERO);
        assert_eq!(t.rows[1].costs[0], m("0.0687"));
        assert_eq!(
            t.cost_csv(),
            "n_policies,gpt-4-turbo_cost\n0,0.00\n1,0.0687\n"
        );
        #[allow(clippy::reversed_empty_ranges)]
        let empty = 1..=0;
        assert!(emit_curves(&[gpt4()], empty, None).is_err());
    }

    #[test]
    fn curves_two_models_monotone() {
        let mut cheap = gpt4();
        cheap.name = "gpt-3.5-turbo".into();
        cheap.cost.price_in = m("0.00679");
        cheap.tokens_per_minute = 1_000_000;
        let t = emit_curves(&[gpt4(), cheap], 1..=10, None).unwrap();
        assert_eq!(t.rows.len(), 10);
        for w in t.rows.windows(2) {
            for k in 0..2 {
                assert!(w[1].costs[k] > w[0].costs[k]);
                assert!(w[1].minutes[k] > w[0].minutes[k]);
            }
        }
        assert_eq!(
            t.time_csv().lines().next(),
            Some("n_policies,gpt-4-turbo_minutes,gpt-3.5-turbo_minutes")
        );
    }

    #[test]
    fn annotation_line_crosses_at_break_even() {
        let fixed = m("5601");
        let be = break_even_for(fixed, m("0.0687")).unwrap();
        let t = emit_curves(&[gpt4()], (be - 3)..=(be + 3), Some(fixed)).unwrap();
        let crossing = t
            .rows
            .iter()
            .find(|r| r.costs[0] >= fixed)
            .unwrap()
            .n_policies;
        assert_eq!(crossing, be);
        assert!(t
            .cost_csv()
            .lines()
            .next()
            .unwrap()
            .ends_with(",annotation_cost"));
    }
}
