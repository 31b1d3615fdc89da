//! Parsing of `Label: Yes|No` model answers and chunk-to-policy reduction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_name, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Answer {
    Unanswered,
    No,
    Yes,
}

impl Answer {
    pub fn from_bool(disclosed: bool) -> Self {
        if disclosed {
            Answer::Yes
        } else {
            Answer::No
        }
    }

    /// Metric view: only `Yes` is positive.
    pub fn is_positive(self) -> bool {
        self == Answer::Yes
    }

    pub fn is_answered(self) -> bool {
        self != Answer::Unanswered
    }

    /// Yes dominates No dominates Unanswered.
    pub fn combine(self, other: Answer) -> Answer {
        self.max(other)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PracticeVector {
    pub answers: BTreeMap<String, Answer>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extraneous_lines: Vec<String>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ReduceError {
    #[error("nothing to reduce")]
    Empty,
    #[error("vector {index} has a different label set")]
    MismatchedLabels { index: usize },
    #[error("label `{0}` appears in more than one vector being merged")]
    Overlap(String),
}

impl PracticeVector {
    pub fn new(answers: BTreeMap<String, Answer>) -> Self {
        Self {
            answers,
            extraneous_lines: Vec::new(),
        }
    }

    pub fn get(&self, label_id: &str) -> Answer {
        self.answers
            .get(label_id)
            .copied()
            .unwrap_or(Answer::Unanswered)
    }

    pub fn unanswered_count(&self) -> usize {
        self.answers.values().filter(|a| !a.is_answered()).count()
    }

    /// The answers only; extraneous lines are ignored.
    pub fn same_answers(&self, other: &PracticeVector) -> bool {
        self.answers == other.answers
    }

    /// Union of vectors over disjoint label sets (one per queried label group).
    pub fn merge_disjoint(parts: Vec<PracticeVector>) -> Result<PracticeVector, ReduceError> {
        let mut out = PracticeVector::default();
        for part in parts {
            for (label, answer) in part.answers {
                if out.answers.insert(label.clone(), answer).is_some() {
                    return Err(ReduceError::Overlap(label));
                }
            }
            out.extraneous_lines.extend(part.extraneous_lines);
        }
        Ok(out)
    }
}

/// Normalized line with any leading list marker removed.
fn strip_marker(line: &str) -> &str {
    let t = line.trim();
    let t = t.trim_start_matches(['-', '*', '•']).trim_start();
    t
}

fn parse_value(raw: &str) -> Option<Answer> {
    let v = raw
        .trim()
        .trim_matches(|c: char| c == '*' || c == '"' || c == '\'' || c == '`')
        .trim()
        .to_lowercase();
    let leading = |word: &str| {
        v.strip_prefix(word)
            .is_some_and(|rest| rest.chars().next().is_none_or(|c| !c.is_alphanumeric()))
    };
    if leading("yes") || leading("true") {
        Some(Answer::Yes)
    } else if normalize_name(&v).starts_with("not mentioned") || leading("no") || leading("false") {
        Some(Answer::No)
    } else {
        None
    }
}

/// Finds the queried label whose display name prefixes `line` and is followed
/// by a colon; the longest match wins. Returns the label and the value text.
fn match_label<'a, 'l>(line: &'a str, labels: &'l [Label]) -> Option<(&'l Label, &'a str)> {
    let body = strip_marker(line);
    let mut best: Option<(&Label, &str, usize)> = None;
    for label in labels {
        let name = normalize_name(&label.display_name);
        if let Some(rest) = strip_name_prefix(body, &name) {
            let rest = rest.trim_start();
            let rest = rest.strip_prefix("**").unwrap_or(rest).trim_start();
            if let Some(value) = rest.strip_prefix(':') {
                let value = value.trim_start().strip_prefix("**").unwrap_or(value);
                if best.is_none_or(|(_, _, len)| name.len() > len) {
                    best = Some((label, value, name.len()));
                }
            }
        }
    }
    best.map(|(l, v, _)| (l, v))
}

/// Case-insensitive, whitespace-tolerant prefix match of an already
/// normalized name against raw text. Returns the remainder of `text`.
fn strip_name_prefix<'a>(text: &'a str, normalized_name: &str) -> Option<&'a str> {
    let text = text.strip_prefix("**").unwrap_or(text);
    let mut rest = text;
    for (i, word) in normalized_name.split(' ').enumerate() {
        if i > 0 {
            let trimmed = rest.trim_start();
            if trimmed.len() == rest.len() {
                return None;
            }
            rest = trimmed;
        }
        let mut chars = rest.char_indices();
        let mut consumed = 0;
        for wc in word.chars() {
            match chars.next() {
                Some((idx, c)) if c.to_lowercase().eq(wc.to_lowercase()) => {
                    consumed = idx + c.len_utf8()
                }
                _ => return None,
            }
        }
        rest = &rest[consumed..];
    }
    Some(rest)
}

/// Total, line-oriented parse of a model response over the queried labels.
pub fn parse_practice_vector(response_text: &str, queried: &[Label]) -> PracticeVector {
    let mut answers: BTreeMap<String, Answer> = queried
        .iter()
        .map(|l| (l.label_id.clone(), Answer::Unanswered))
        .collect();
    let mut extraneous_lines = Vec::new();

    for line in response_text.replace("\r\n", "\n").split('\n') {
        if line.trim().is_empty() {
            continue;
        }
        match match_label(line, queried)
            .and_then(|(label, value)| parse_value(value).map(|a| (label, a)))
        {
            Some((label, answer)) if answers[&label.label_id] == Answer::Unanswered => {
                answers.insert(label.label_id.clone(), answer);
            }
            _ => extraneous_lines.push(line.to_string()),
        }
    }
    PracticeVector {
        answers,
        extraneous_lines,
    }
}

/// Renders answered labels in the output grammar, one line per label in
/// `labels` order. Unanswered labels are omitted.
pub fn render_answers(vector: &PracticeVector, labels: &[Label]) -> String {
    labels
        .iter()
        .filter_map(|l| match vector.get(&l.label_id) {
            Answer::Yes => Some(format!("{}: Yes", l.display_name)),
            Answer::No => Some(format!("{}: No", l.display_name)),
            Answer::Unanswered => None,
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Per label: yes if any vector says yes, else no if any says no, else
/// unanswered.
pub fn reduce_to_policy(vectors: &[PracticeVector]) -> Result<PracticeVector, ReduceError> {
    let first = vectors.first().ok_or(ReduceError::Empty)?;
    let mut out = PracticeVector::new(first.answers.clone());
    out.extraneous_lines = first.extraneous_lines.clone();
    for (index, v) in vectors.iter().enumerate().skip(1) {
        if !v.answers.keys().eq(out.answers.keys()) {
            return Err(ReduceError::MismatchedLabels { index });
        }
        for (label, answer) in &v.answers {
            let slot = out
                .answers
                .get_mut(label)
                .expect("label sets checked equal");
            *slot = slot.combine(*answer);
        }
        out.extraneous_lines
            .extend(v.extraneous_lines.iter().cloned());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(id: &str, name: &str) -> Label {
        Label {
            label_id: id.into(),
            display_name: name.into(),
            definition: "d".into(),
        }
    }

    fn vec_of(pairs: &[(&str, Answer)]) -> PracticeVector {
        PracticeVector::new(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    #[test]
    fn parses_grammar_lines() {
        let labels = [label("email", "Email"), label("phone", "Phone")];
        let v = parse_practice_vector("Email: Yes\nPhone: No", &labels);
        assert_eq!(v.get("email"), Answer::Yes);
        assert_eq!(v.get("phone"), Answer::No);
        assert!(v.extraneous_lines.is_empty());
    }

    #[test]
    fn empty_response_is_unanswered() {
        let v = parse_practice_vector("", &[label("email", "Email")]);
        assert_eq!(v.get("email"), Answer::Unanswered);
        assert_eq!(v.answers.len(), 1);
    }

    #[test]
    fn only_first_label_answered() {
        let labels: Vec<Label> = (0..10)
            .map(|i| label(&format!("l{i}"), &format!("Type {i}")))
            .collect();
        let v = parse_practice_vector("Type 0: Yes", &labels);
        assert_eq!(v.get("l0"), Answer::Yes);
        assert_eq!(v.unanswered_count(), 9);
    }

    #[test]
    fn tolerant_matching() {
        let labels = [
            label("ip", "IP address and device IDs"),
            label("email", "Email"),
            label("emailx", "Email address"),
        ];
        let text = "  - ip   ADDRESS and device ids :  yes.\n**Email**: No\nEMAIL ADDRESS: Not mentioned\nSummary: nothing else\nEmail: Yes";
        let v = parse_practice_vector(text, &labels);
        assert_eq!(v.get("ip"), Answer::Yes);
        assert_eq!(v.get("email"), Answer::No);
        assert_eq!(v.get("emailx"), Answer::No);
        // The unknown line and the duplicate Email line.
        assert_eq!(
            v.extraneous_lines,
            vec!["Summary: nothing else", "Email: Yes"]
        );
    }

    #[test]
    fn true_false_and_unknown_values() {
        let labels = [label("a", "A"), label("b", "B"), label("c", "C")];
        let v = parse_practice_vector("A: true\nB: FALSE\nC: maybe", &labels);
        assert_eq!(v.get("a"), Answer::Yes);
        assert_eq!(v.get("b"), Answer::No);
        assert_eq!(v.get("c"), Answer::Unanswered);
        assert_eq!(v.extraneous_lines, vec!["C: maybe"]);
        // "Nothing" must not be read as "no".
        let v = parse_practice_vector("A: Nothing", &labels);
        assert_eq!(v.get("a"), Answer::Unanswered);
    }

    #[test]
    fn reduction_table() {
        use Answer::*;
        let r = |a: Answer, b: Answer| {
            reduce_to_policy(&[vec_of(&[("x", a)]), vec_of(&[("x", b)])])
                .unwrap()
                .get("x")
        };
        assert_eq!(r(Yes, No), Yes);
        assert_eq!(r(No, No), No);
        assert_eq!(r(Unanswered, No), No);
    }

    #[test]
    fn reduction_errors() {
        assert_eq!(reduce_to_policy(&[]), Err(ReduceError::Empty));
        let err = reduce_to_policy(&[vec_of(&[("x", Answer::Yes)]), vec_of(&[("y", Answer::Yes)])])
            .unwrap_err();
        assert_eq!(err, ReduceError::MismatchedLabels { index: 1 });
    }

    #[test]
    fn merge_rejects_overlap() {
        let a = vec_of(&[("x", Answer::Yes)]);
        let b = vec_of(&[("y", Answer::No)]);
        let merged = PracticeVector::merge_disjoint(vec![a.clone(), b]).unwrap();
        assert_eq!(merged.answers.len(), 2);
        assert!(PracticeVector::merge_disjoint(vec![a.clone(), a]).is_err());
    }
}
