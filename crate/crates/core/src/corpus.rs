//! Annotated privacy-policy corpora: canonical schema, paragraph segmentation
//! and stratified experimental/control splits.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Delimiter placed between paragraphs when reconstructing a policy's text.
pub const PARAGRAPH_DELIMITER: &str = "\n\n";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation in {file} record {record}: {message}")]
    Schema {
        file: String,
        record: usize,
        message: String,
    },
    #[error("annotation record {record} references unknown label `{label_id}`")]
    UnknownLabel { record: usize, label_id: String },
    #[error("annotation record {record} references unknown policy `{policy_id}`")]
    UnknownPolicy { record: usize, policy_id: String },
    #[error("unknown corpus format `{0}` (expected one of: canonical, text-dir)")]
    UnknownFormat(String),
    #[error("invalid split ratio {0}; must lie strictly between 0 and 1")]
    InvalidRatio(f64),
    #[error("corpus has {0} policies; a split needs at least 2")]
    TooSmall(usize),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyDocument {
    pub policy_id: String,
    pub source_name: String,
    pub full_text: String,
    pub paragraphs: Vec<Paragraph>,
}

impl PolicyDocument {
    /// Builds a document from raw policy text using blank-line segmentation.
    pub fn from_text(
        policy_id: impl Into<String>,
        source_name: impl Into<String>,
        raw: &str,
    ) -> Self {
        let paragraphs = segment_paragraphs(raw);
        Self::from_paragraphs(policy_id, source_name, paragraphs)
    }

    /// `paragraphs` must already be contiguously indexed from 0.
    pub fn from_paragraphs(
        policy_id: impl Into<String>,
        source_name: impl Into<String>,
        paragraphs: Vec<Paragraph>,
    ) -> Self {
        debug_assert!(paragraphs.iter().enumerate().all(|(i, p)| p.index == i));
        let full_text = join_paragraphs(paragraphs.iter().map(|p| p.text.as_str()));
        Self {
            policy_id: policy_id.into(),
            source_name: source_name.into(),
            full_text,
            paragraphs,
        }
    }

    /// Text of the paragraphs in `range`, joined with the paragraph delimiter.
    pub fn text_of(&self, range: std::ops::Range<usize>) -> String {
        join_paragraphs(self.paragraphs[range].iter().map(|p| p.text.as_str()))
    }

    /// A new document restricted to the given paragraph indices (re-indexed from 0).
    pub fn retain_paragraphs(&self, keep: &BTreeSet<usize>) -> PolicyDocument {
        let paragraphs = self
            .paragraphs
            .iter()
            .filter(|p| keep.contains(&p.index))
            .enumerate()
            .map(|(i, p)| Paragraph {
                index: i,
                text: p.text.clone(),
            })
            .collect();
        PolicyDocument::from_paragraphs(
            self.policy_id.clone(),
            self.source_name.clone(),
            paragraphs,
        )
    }
}

pub fn join_paragraphs<'a>(texts: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for (i, t) in texts.into_iter().enumerate() {
        if i > 0 {
            out.push_str(PARAGRAPH_DELIMITER);
        }
        out.push_str(t);
    }
    out
}

/// Splits text on runs of one or more blank lines after normalizing line
/// endings to LF. Each paragraph is trimmed; empty input yields no paragraphs.
pub fn segment_paragraphs(raw_text: &str) -> Vec<Paragraph> {
    let normalized = raw_text.replace("\r\n", "\n").replace('\r', "\n");
    let mut paragraphs = Vec::new();
    let mut block: Vec<&str> = Vec::new();

    let flush = |block: &mut Vec<&str>, paragraphs: &mut Vec<Paragraph>| {
        if block.is_empty() {
            return;
        }
        let text = block.join("\n").trim().to_string();
        block.clear();
        if !text.is_empty() {
            paragraphs.push(Paragraph {
                index: paragraphs.len(),
                text,
            });
        }
    };

    for line in normalized.split('\n') {
        if line.trim().is_empty() {
            flush(&mut block, &mut paragraphs);
        } else {
            block.push(line);
        }
    }
    flush(&mut block, &mut paragraphs);
    paragraphs
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub label_id: String,
    pub display_name: String,
    pub definition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelTaxonomy {
    labels: Vec<Label>,
}

impl LabelTaxonomy {
    /// Validates unique ids, unique display names (case-insensitively) and
    /// non-empty definitions.
    pub fn new(labels: Vec<Label>) -> Result<Self> {
        let mut ids = BTreeSet::new();
        let mut names = BTreeSet::new();
        for (i, label) in labels.iter().enumerate() {
            let schema = |message: String| CorpusError::Schema {
                file: "taxonomy.json".into(),
                record: i,
                message,
            };
            if label.label_id.trim().is_empty() {
                return Err(schema("empty label_id".into()));
            }
            if label.display_name.trim().is_empty() {
                return Err(schema("empty display_name".into()));
            }
            if label.definition.trim().is_empty() {
                return Err(schema(format!(
                    "label `{}` has an empty definition",
                    label.label_id
                )));
            }
            if !ids.insert(label.label_id.clone()) {
                return Err(schema(format!("duplicate label_id `{}`", label.label_id)));
            }
            if !names.insert(normalize_name(&label.display_name)) {
                return Err(schema(format!(
                    "duplicate display_name `{}`",
                    label.display_name
                )));
            }
        }
        Ok(Self { labels })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, label_id: &str) -> Option<&Label> {
        self.labels.iter().find(|l| l.label_id == label_id)
    }

    pub fn by_display_name(&self, name: &str) -> Option<&Label> {
        let wanted = normalize_name(name);
        self.labels
            .iter()
            .find(|l| normalize_name(&l.display_name) == wanted)
    }

    pub fn label_ids(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.label_id.clone()).collect()
    }
}

/// Lower-cases and collapses whitespace runs; used wherever display names are
/// compared.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Policy-level and optional paragraph-level disclosure flags.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnnotationSet {
    policy: BTreeMap<(String, String), bool>,
    segments: BTreeMap<(String, usize, String), bool>,
}

impl AnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_policy(&mut self, policy_id: &str, label_id: &str, disclosed: bool) {
        self.policy
            .insert((policy_id.to_string(), label_id.to_string()), disclosed);
    }

    pub fn insert_segment(
        &mut self,
        policy_id: &str,
        paragraph: usize,
        label_id: &str,
        disclosed: bool,
    ) {
        self.segments.insert(
            (policy_id.to_string(), paragraph, label_id.to_string()),
            disclosed,
        );
    }

    /// Number of stored records (policy-level plus segment-level).
    pub fn len(&self) -> usize {
        self.policy.len() + self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_segments(&self) -> bool {
        !self.segments.is_empty()
    }

    pub fn has_segments_for(&self, policy_id: &str) -> bool {
        self.segments.keys().any(|(p, _, _)| p == policy_id)
    }

    /// Policy-level truth: an explicit policy record wins; otherwise the label
    /// is disclosed if any paragraph of the policy is annotated positive.
    /// Absent records are negative.
    pub fn disclosed(&self, policy_id: &str, label_id: &str) -> bool {
        if let Some(&flag) = self
            .policy
            .get(&(policy_id.to_string(), label_id.to_string()))
        {
            return flag;
        }
        self.segments
            .iter()
            .any(|((p, _, l), &v)| v && p == policy_id && l == label_id)
    }

    pub fn segment_disclosed(&self, policy_id: &str, paragraph: usize, label_id: &str) -> bool {
        self.segments
            .get(&(policy_id.to_string(), paragraph, label_id.to_string()))
            .copied()
            .unwrap_or(false)
    }

    /// Paragraph indices of `policy_id` carrying at least one positive segment label.
    pub fn positive_paragraphs(&self, policy_id: &str) -> BTreeSet<usize> {
        self.segments
            .iter()
            .filter(|((p, _, _), &v)| v && p == policy_id)
            .map(|((_, i, _), _)| *i)
            .collect()
    }

    pub fn policy_ids(&self) -> BTreeSet<String> {
        self.policy
            .keys()
            .map(|(p, _)| p.clone())
            .chain(self.segments.keys().map(|(p, _, _)| p.clone()))
            .collect()
    }

    /// Count of positive policy-level labels for a policy over the taxonomy.
    pub fn positive_count(&self, policy_id: &str, taxonomy: &LabelTaxonomy) -> usize {
        taxonomy
            .labels()
            .iter()
            .filter(|l| self.disclosed(policy_id, &l.label_id))
            .count()
    }

    fn records(&self) -> Vec<AnnotationRecord> {
        let mut out: Vec<AnnotationRecord> = self
            .policy
            .iter()
            .map(|((p, l), &d)| AnnotationRecord {
                policy_id: p.clone(),
                label_id: l.clone(),
                disclosed: d,
                paragraph_index: None,
            })
            .collect();
        out.extend(
            self.segments
                .iter()
                .map(|((p, i, l), &d)| AnnotationRecord {
                    policy_id: p.clone(),
                    label_id: l.clone(),
                    disclosed: d,
                    paragraph_index: Some(*i),
                }),
        );
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PolicyRecord {
    policy_id: String,
    source_name: String,
    paragraphs: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AnnotationRecord {
    policy_id: String,
    label_id: String,
    disclosed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    paragraph_index: Option<usize>,
}

/// A loaded corpus in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub policies: Vec<PolicyDocument>,
    pub annotations: AnnotationSet,
    pub taxonomy: LabelTaxonomy,
}

impl Corpus {
    pub fn get(&self, policy_id: &str) -> Option<&PolicyDocument> {
        self.policies.iter().find(|p| p.policy_id == policy_id)
    }

    pub fn policy_ids(&self) -> Vec<String> {
        self.policies.iter().map(|p| p.policy_id.clone()).collect()
    }

    /// Policies whose ids are in `ids`, in corpus order.
    pub fn subset(&self, ids: &BTreeSet<String>) -> Vec<PolicyDocument> {
        self.policies
            .iter()
            .filter(|p| ids.contains(&p.policy_id))
            .cloned()
            .collect()
    }

    /// Mean count of positive policy-level labels per policy.
    pub fn mean_annotations_per_policy(&self, ids: Option<&BTreeSet<String>>) -> f64 {
        let selected: Vec<&PolicyDocument> = self
            .policies
            .iter()
            .filter(|p| ids.is_none_or(|s| s.contains(&p.policy_id)))
            .collect();
        if selected.is_empty() {
            return 0.0;
        }
        let total: usize = selected
            .iter()
            .map(|p| {
                self.annotations
                    .positive_count(&p.policy_id, &self.taxonomy)
            })
            .sum();
        total as f64 / selected.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// Directory with `corpus.json`, `annotations.json`, `taxonomy.json`.
    Canonical,
    /// Directory of `*.txt` policies (id = file stem), optional `taxonomy.json`
    /// and `annotations.json` alongside.
    TextDir,
}

impl std::str::FromStr for CorpusFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(CorpusFormat::Canonical),
            "text-dir" => Ok(CorpusFormat::TextDir),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    if path.exists() {
        read_to_string(path).map(Some)
    } else {
        Ok(None)
    }
}

fn parse_array<T: for<'de> Deserialize<'de>>(file: &str, text: &str) -> Result<Vec<T>> {
    let values: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| CorpusError::Schema {
            file: file.to_string(),
            record: 0,
            message: e.to_string(),
        })?;
    values
        .into_iter()
        .enumerate()
        .map(|(record, v)| {
            serde_json::from_value(v).map_err(|e| CorpusError::Schema {
                file: file.to_string(),
                record,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn parse_taxonomy(text: &str) -> Result<LabelTaxonomy> {
    LabelTaxonomy::new(parse_array("taxonomy.json", text)?)
}

pub fn load_taxonomy(path: &Path) -> Result<LabelTaxonomy> {
    parse_taxonomy(&read_to_string(path)?)
}

fn parse_policies(text: &str) -> Result<Vec<PolicyDocument>> {
    let records: Vec<PolicyRecord> = parse_array("corpus.json", text)?;
    let mut seen = BTreeSet::new();
    records
        .into_iter()
        .enumerate()
        .map(|(record, r)| {
            let schema = |message: String| CorpusError::Schema {
                file: "corpus.json".into(),
                record,
                message,
            };
            if r.policy_id.trim().is_empty() {
                return Err(schema("empty policy_id".into()));
            }
            if !seen.insert(r.policy_id.clone()) {
                return Err(schema(format!("duplicate policy_id `{}`", r.policy_id)));
            }
            if let Some(i) = r.paragraphs.iter().position(|p| p.trim().is_empty()) {
                return Err(schema(format!("paragraph {i} is blank")));
            }
            let paragraphs = r
                .paragraphs
                .into_iter()
                .enumerate()
                .map(|(index, text)| Paragraph { index, text })
                .collect();
            Ok(PolicyDocument::from_paragraphs(
                r.policy_id,
                r.source_name,
                paragraphs,
            ))
        })
        .collect()
}

/// Parses and validates `annotations.json` against the loaded policies and taxonomy.
pub fn parse_annotations(
    text: &str,
    policies: &[PolicyDocument],
    taxonomy: &LabelTaxonomy,
) -> Result<AnnotationSet> {
    let records: Vec<AnnotationRecord> = parse_array("annotations.json", text)?;
    let paragraph_counts: HashMap<&str, usize> = policies
        .iter()
        .map(|p| (p.policy_id.as_str(), p.paragraphs.len()))
        .collect();
    let mut set = AnnotationSet::new();
    for (record, r) in records.into_iter().enumerate() {
        let Some(&count) = paragraph_counts.get(r.policy_id.as_str()) else {
            return Err(CorpusError::UnknownPolicy {
                record,
                policy_id: r.policy_id,
            });
        };
        if taxonomy.get(&r.label_id).is_none() {
            return Err(CorpusError::UnknownLabel {
                record,
                label_id: r.label_id,
            });
        }
        match r.paragraph_index {
            Some(i) if i >= count => {
                return Err(CorpusError::Schema {
                    file: "annotations.json".into(),
                    record,
                    message: format!(
                        "paragraph_index {i} out of range for `{}` ({count} paragraphs)",
                        r.policy_id
                    ),
                })
            }
            Some(i) => set.insert_segment(&r.policy_id, i, &r.label_id, r.disclosed),
            None => set.insert_policy(&r.policy_id, &r.label_id, r.disclosed),
        }
    }
    Ok(set)
}

/// Loads a corpus through the adapter for `format`. A missing directory
/// component file is treated as empty, so an empty directory yields an empty
/// corpus.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    if !path.is_dir() {
        return Err(CorpusError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "corpus directory not found"),
        });
    }
    let taxonomy = match read_optional(&path.join("taxonomy.json"))? {
        Some(text) => parse_taxonomy(&text)?,
        None => LabelTaxonomy::default(),
    };
    let policies = match format {
        CorpusFormat::Canonical => match read_optional(&path.join("corpus.json"))? {
            Some(text) => parse_policies(&text)?,
            None => Vec::new(),
        },
        CorpusFormat::TextDir => load_text_dir(path)?,
    };
    let annotations = match read_optional(&path.join("annotations.json"))? {
        Some(text) => parse_annotations(&text, &policies, &taxonomy)?,
        None => AnnotationSet::new(),
    };
    Ok(Corpus {
        policies,
        annotations,
        taxonomy,
    })
}

fn load_text_dir(path: &Path) -> Result<Vec<PolicyDocument>> {
    let io = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|file| {
            let raw = read_to_string(&file)?;
            let id = file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let name = file
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok(PolicyDocument::from_text(id, name, &raw))
        })
        .collect()
}

pub fn policies_to_json(policies: &[PolicyDocument]) -> String {
    let records: Vec<PolicyRecord> = policies
        .iter()
        .map(|p| PolicyRecord {
            policy_id: p.policy_id.clone(),
            source_name: p.source_name.clone(),
            paragraphs: p.paragraphs.iter().map(|q| q.text.clone()).collect(),
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("policy records serialize")
}

pub fn annotations_to_json(annotations: &AnnotationSet) -> String {
    serde_json::to_string_pretty(&annotations.records()).expect("annotation records serialize")
}

pub fn taxonomy_to_json(taxonomy: &LabelTaxonomy) -> String {
    serde_json::to_string_pretty(taxonomy.labels()).expect("labels serialize")
}

/// Writes the canonical three-file layout into `dir`.
pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    let io = |path: PathBuf| move |source| CorpusError::Io { path, source };
    fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    for (name, body) in [
        ("corpus.json", policies_to_json(&corpus.policies)),
        ("annotations.json", annotations_to_json(&corpus.annotations)),
        ("taxonomy.json", taxonomy_to_json(&corpus.taxonomy)),
    ] {
        let path = dir.join(name);
        fs::write(&path, body + "\n").map_err(io(path.clone()))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub experimental: BTreeSet<String>,
    pub control: BTreeSet<String>,
}

impl Split {
    pub fn subset(&self, name: &str) -> Option<&BTreeSet<String>> {
        match name {
            "experimental" => Some(&self.experimental),
            "control" => Some(&self.control),
            _ => None,
        }
    }
}

/// Target size of the experimental subset for `n` policies.
pub fn experimental_size(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).round() as usize).clamp(1, n - 1)
}

/// Greedy stratified split. Policies are visited in order of the rarest
/// label they carry (seeded shuffle breaks ties) and each goes to whichever
/// subset keeps the per-label positive rates closest, subject to the size
/// targets.
pub fn stratified_split(corpus: &Corpus, ratio: f64, seed: u64) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CorpusError::InvalidRatio(ratio));
    }
    let n = corpus.policies.len();
    if n < 2 {
        return Err(CorpusError::TooSmall(n));
    }
    let labels = corpus.taxonomy.label_ids();
    let positives: Vec<Vec<bool>> = corpus
        .policies
        .iter()
        .map(|p| {
            labels
                .iter()
                .map(|l| corpus.annotations.disclosed(&p.policy_id, l))
                .collect()
        })
        .collect();
    let label_freq: Vec<usize> = (0..labels.len())
        .map(|j| positives.iter().filter(|row| row[j]).count())
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let rarity = |i: usize| {
        positives[i]
            .iter()
            .zip(&label_freq)
            .filter(|(&pos, _)| pos)
            .map(|(_, &f)| f)
            .min()
            .unwrap_or(usize::MAX)
    };
    order.sort_by_key(|&i| rarity(i));

    let targets = [experimental_size(n, ratio), n - experimental_size(n, ratio)];
    let mut sizes = [0usize; 2];
    let mut counts = vec![[0usize; 2]; labels.len()];
    let mut assignment = vec![0usize; n];

    for &i in &order {
        let open: Vec<usize> = (0..2).filter(|&s| sizes[s] < targets[s]).collect();
        let chosen = if open.len() == 1 {
            open[0]
        } else {
            let cost = |side: usize| -> f64 {
                counts
                    .iter()
                    .enumerate()
                    .map(|(j, c)| {
                        let mut c = *c;
                        if positives[i][j] {
                            c[side] += 1;
                        }
                        let d = c[0] as f64 / targets[0] as f64 - c[1] as f64 / targets[1] as f64;
                        d * d
                    })
                    .sum()
            };
            let (c0, c1) = (cost(0), cost(1));
            if (c0 - c1).abs() > 1e-12 {
                if c0 < c1 {
                    0
                } else {
                    1
                }
            } else {
                // Tie: fill the subset that is proportionally emptier.
                let fill0 = sizes[0] as f64 / targets[0] as f64;
                let fill1 = sizes[1] as f64 / targets[1] as f64;
                if fill0 <= fill1 {
                    0
                } else {
                    1
                }
            }
        };
        assignment[i] = chosen;
        sizes[chosen] += 1;
        for (j, c) in counts.iter_mut().enumerate() {
            if positives[i][j] {
                c[chosen] += 1;
            }
        }
    }

    let mut split = Split {
        experimental: BTreeSet::new(),
        control: BTreeSet::new(),
    };
    for (i, p) in corpus.policies.iter().enumerate() {
        if assignment[i] == 0 {
            split.experimental.insert(p.policy_id.clone());
        } else {
            split.control.insert(p.policy_id.clone());
        }
    }
    Ok(split)
}

/// Population standard deviation, over labels, of the difference in positive
/// policy counts between the two subsets.
pub fn split_imbalance(corpus: &Corpus, split: &Split) -> f64 {
    let labels = corpus.taxonomy.label_ids();
    if labels.is_empty() {
        return 0.0;
    }
    let diffs: Vec<f64> = labels
        .iter()
        .map(|l| {
            let count = |ids: &BTreeSet<String>| {
                ids.iter()
                    .filter(|p| corpus.annotations.disclosed(p, l))
                    .count() as f64
            };
            count(&split.experimental) - count(&split.control)
        })
        .collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt()
}
