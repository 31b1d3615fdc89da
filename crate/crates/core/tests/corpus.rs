mod common;

use std::collections::BTreeSet;

use policy_probe::corpus::{
    load_corpus, stratified_split, write_corpus, Corpus, CorpusFormat, PolicyDocument,
    PARAGRAPH_DELIMITER,
};

fn twelve_blocks() -> String {
    std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/fixtures/policy_12_blocks.txt"
    ))
    .unwrap()
}

#[test]
fn blank_line_blocks_become_paragraphs() {
    let doc = PolicyDocument::from_text("p1", "p1.txt", &twelve_blocks());
    assert_eq!(doc.paragraphs.len(), 12);
    for (i, p) in doc.paragraphs.iter().enumerate() {
        assert_eq!(p.index, i);
        assert!(!p.text.trim().is_empty());
        assert!(!p.text.contains(PARAGRAPH_DELIMITER));
    }
}

#[test]
fn text_dir_adapter_reads_policies_and_taxonomy() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("acme.txt"), twelve_blocks()).unwrap();
    std::fs::write(
        dir.path().join("beta.txt"),
        "We collect email.\n\nWe set cookies.",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("taxonomy.json"),
        r#"[{"label_id":"email","display_name":"Email address","definition":"An email."}]"#,
    )
    .unwrap();
    let corpus = load_corpus(dir.path(), CorpusFormat::TextDir).unwrap();
    assert_eq!(
        corpus.policy_ids(),
        vec!["acme".to_string(), "beta".to_string()]
    );
    assert_eq!(corpus.get("acme").unwrap().paragraphs.len(), 12);
    assert_eq!(corpus.get("beta").unwrap().paragraphs.len(), 2);
    assert_eq!(corpus.taxonomy.len(), 1);
}

fn sample_corpus() -> Corpus {
    let taxonomy = common::taxonomy(&["email", "location", "cookies", "health"]);
    let mut policies = Vec::new();
    let mut annotations = policy_probe::corpus::AnnotationSet::new();
    for n in 0..20 {
        let id = format!("p{n:02}");
        policies.push(common::policy(
            &id,
            &["Intro.", "We collect things.", "Contact us."],
        ));
        annotations.insert_segment(&id, 1, "email", true);
        if n % 2 == 0 {
            annotations.insert_segment(&id, 1, "cookies", true);
        }
        if n % 5 == 0 {
            annotations.insert_policy(&id, "health", true);
        }
        if n % 3 == 0 {
            annotations.insert_policy(&id, "location", false);
        }
    }
    Corpus {
        policies,
        annotations,
        taxonomy,
    }
}

#[test]
fn canonical_round_trip() {
    let corpus = sample_corpus();
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &corpus).unwrap();
    let back = load_corpus(dir.path(), CorpusFormat::Canonical).unwrap();
    assert_eq!(back, corpus);
}

#[test]
fn split_is_deterministic_disjoint_and_exhaustive() {
    let corpus = sample_corpus();
    let a = stratified_split(&corpus, 0.2, 11).unwrap();
    let b = stratified_split(&corpus, 0.2, 11).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.experimental.len(), 4);
    assert!(a.experimental.is_disjoint(&a.control));
    let all: BTreeSet<String> = a.experimental.union(&a.control).cloned().collect();
    assert_eq!(all, corpus.policy_ids().into_iter().collect());
}

#[test]
fn split_rejects_bad_ratio() {
    assert!(stratified_split(&sample_corpus(), 1.0, 1).is_err());
    assert!(stratified_split(&sample_corpus(), 0.0, 1).is_err());
}

#[test]
fn empty_directory_is_an_empty_corpus_but_missing_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        load_corpus(dir.path(), CorpusFormat::Canonical).unwrap(),
        Corpus::default()
    );
    assert!(load_corpus(&dir.path().join("absent"), CorpusFormat::Canonical).is_err());
}
