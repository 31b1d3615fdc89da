//! `policy-probe`: extract privacy practices from policies with chat models,
//! score the results, and estimate what a large run costs.

use std::collections::BTreeSet;
use std::error::Error;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use policy_probe::audit::{audit_consistency, ConsistencySchedule, TimeOfDay};
use policy_probe::budget::TokenCounter;
use policy_probe::config::Config;
use policy_probe::corpus::{
    load_corpus, parse_annotations, split_imbalance, stratified_split, write_corpus, Corpus,
    CorpusFormat, PolicyDocument, Split,
};
use policy_probe::economics::{
    annotation_cost, break_even, emit_curves, llm_cost_per_policy, policies_per_minute, CurveModel,
    LlmCostModel,
};
use policy_probe::evaluation::{score, split_test_pipeline, Pipeline, RunRecord, ShotSource};
use policy_probe::finetune::{export_finetune, write_jsonl};
use policy_probe::prompting::{PromptBuilder, PromptVariant, Segmentation, TemplateSet};
use policy_probe::provider::{
    ChatClient, Clock, HttpTransport, MockScript, ModelParameters, ModelProfile, ResponseCache,
    ScriptedTransport, SimulatedClock, SystemClock, Transport,
};

type BoxError = Box<dyn Error>;

enum Failure {
    Usage(String),
    Domain(BoxError),
}

impl<E: Into<BoxError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Domain(e.into())
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

type Result<T> = std::result::Result<T, Failure>;

#[derive(Parser)]
#[command(
    name = "policy-probe",
    version,
    about = "Privacy-practice extraction with chat models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a corpus into the canonical three-file layout.
    Ingest(IngestArgs),
    /// Split a corpus into experimental and control subsets.
    Split(SplitArgs),
    /// Run extraction over a corpus and write a run record.
    Analyze(AnalyzeArgs),
    /// Score a run against ground truth.
    Evaluate(EvaluateArgs),
    /// Incrementally test prompt techniques.
    Abtest(AbtestArgs),
    /// Measure answer consistency over repeated requests.
    Audit(AuditArgs),
    /// Throughput, cost and break-even estimates.
    Estimate(EstimateArgs),
    /// Write chat-format fine-tuning data from segment annotations.
    ExportFinetune(ExportArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "text-dir")]
    format: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Options shared by commands that talk to a model.
#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value = "canonical")]
    format: String,
    /// Split file; restricts the run to `--subset`.
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value = "control")]
    subset: String,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    preset: Option<String>,
    /// Answer from a scripted mock instead of the network.
    #[arg(long)]
    mock: Option<PathBuf>,
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long)]
    run_id: Option<String>,
    #[arg(long)]
    runs_dir: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
    #[arg(long)]
    shot_seed: Option<u64>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    seed: Option<i64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    pruning: Option<bool>,
    #[arg(long, value_parser = parse_segmentation)]
    segmentation: Option<Segmentation>,
    #[arg(long)]
    shots: Option<u8>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Run directory written by `analyze`.
    #[arg(long)]
    run: PathBuf,
    /// Annotations file; defaults to the run corpus's annotations.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct AbtestArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 3)]
    days: u32,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "09:00,12:00,15:00,18:00,21:00"
    )]
    times: Vec<String>,
    #[arg(long, default_value_t = 1)]
    repeats: u32,
    /// Policy ids; all policies in the subset by default.
    #[arg(long, value_delimiter = ',')]
    policies: Vec<String>,
    /// Run slots back to back instead of waiting for their times.
    #[arg(long)]
    no_wait: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    tpm: Option<u64>,
    #[arg(long)]
    tokens_per_policy: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write cost_curves.csv and time_curves.csv here.
    #[arg(long)]
    curves: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    max_policies: u64,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value = "canonical")]
    format: String,
    #[arg(long)]
    split: Option<PathBuf>,
    #[arg(long, default_value = "experimental")]
    subset: String,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the profile's context limit.
    #[arg(long)]
    context_limit: Option<usize>,
    #[arg(long)]
    reserve: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_segmentation(s: &str) -> std::result::Result<Segmentation, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|_| {
        format!(
            "`{s}` is not one of whole_policy, per_paragraph, per_label, per_paragraph_and_label"
        )
    })
}

/// Everything `analyze` resolved, saved as `config.json` in the run
/// directory so later commands can find the corpus.
#[derive(Debug, Serialize, Deserialize)]
struct RunConfig {
    run_id: String,
    corpus: PathBuf,
    format: String,
    split: Option<PathBuf>,
    subset: String,
    preset: String,
    variant: PromptVariant,
    profile: ModelProfile,
    params: ModelParameters,
    shot_seed: u64,
    concurrency: usize,
    response_reserve: usize,
    mock: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("Run `policy-probe --help` for usage.");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Split(a) => split(a),
        Command::Analyze(a) => analyze(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Abtest(a) => abtest(a),
        Command::Audit(a) => audit(a),
        Command::Estimate(a) => estimate(a),
        Command::ExportFinetune(a) => export(a),
    }
}

fn format_of(s: &str) -> Result<CorpusFormat> {
    s.parse()
        .map_err(|e: policy_probe::corpus::CorpusError| usage(e.to_string()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn ingest(a: IngestArgs) -> Result<()> {
    let corpus = load_corpus(&a.input, format_of(&a.format)?)?;
    write_corpus(&a.out, &corpus)?;
    println!(
        "{} policies, {} labels, {} annotations -> {}",
        corpus.policies.len(),
        corpus.taxonomy.len(),
        corpus.annotations.len(),
        a.out.display()
    );
    Ok(())
}

fn split(a: SplitArgs) -> Result<()> {
    let corpus = load_corpus(&a.corpus, CorpusFormat::Canonical)?;
    let s = stratified_split(&corpus, a.ratio, a.seed)?;
    write(&a.out, pretty(&s))?;
    println!(
        "experimental {}, control {}, label imbalance {:.3}",
        s.experimental.len(),
        s.control.len(),
        split_imbalance(&corpus, &s)
    );
    Ok(())
}

/// Inputs shared by the model-facing commands.
struct Session {
    config: Config,
    corpus: Corpus,
    corpus_path: PathBuf,
    split: Option<(PathBuf, Split)>,
    profile: ModelProfile,
    params: ModelParameters,
    preset: String,
    variant: PromptVariant,
    builder: PromptBuilder,
    run_id: String,
    run_dir: PathBuf,
}

impl Session {
    fn open(m: &ModelArgs) -> Result<Self> {
        let config = match &m.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        let corpus_path = m
            .corpus
            .clone()
            .or_else(|| config.run.corpus.clone())
            .ok_or_else(|| usage("no corpus given (use --corpus or set run.corpus)"))?;
        let corpus = load_corpus(&corpus_path, format_of(&m.format)?)?;
        let split = match m.split.clone().or_else(|| config.run.split.clone()) {
            Some(p) => {
                let s: Split = read_json(&p)?;
                if s.subset(&m.subset).is_none() {
                    return Err(usage(format!("unknown subset `{}`", m.subset)));
                }
                Some((p, s))
            }
            None => None,
        };
        let profile = match (config.select_profile(m.profile.as_deref()), &m.mock) {
            (Ok(p), _) => p,
            (Err(policy_probe::config::ConfigError::NoProfile), Some(_)) => mock_profile(),
            (Err(e), _) => return Err(e.into()),
        };
        let mut params = config.params();
        if let Some(t) = m.temperature {
            params.temperature = t;
        }
        if let Some(s) = m.seed {
            params.seed = Some(s);
        }
        let preset = m
            .preset
            .clone()
            .unwrap_or_else(|| config.run.preset.clone());
        let variant = config.variant(&preset)?;
        let templates = match &m.templates {
            Some(dir) => {
                TemplateSet::load_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?
            }
            None => TemplateSet::default(),
        };
        let run_id = m.run_id.clone().unwrap_or_else(|| {
            let secs = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs());
            format!("run-{secs}")
        });
        let runs_dir = m
            .runs_dir
            .clone()
            .or_else(|| config.run.runs_dir.clone())
            .unwrap_or_else(|| PathBuf::from("runs"));
        Ok(Self {
            run_dir: runs_dir.join(&run_id),
            config,
            corpus,
            corpus_path,
            split,
            profile,
            params,
            preset,
            variant,
            builder: PromptBuilder::new(templates),
            run_id,
        })
    }

    fn subset(&self, name: &str) -> Vec<PolicyDocument> {
        match &self.split {
            Some((_, s)) => {
                let ids = s.subset(name).cloned().unwrap_or_default();
                self.corpus
                    .policies
                    .iter()
                    .filter(|p| ids.contains(&p.policy_id))
                    .cloned()
                    .collect()
            }
            None => self.corpus.policies.clone(),
        }
    }

    /// Shot pool: the experimental subset when a split is known.
    fn shot_pool(&self) -> Vec<PolicyDocument> {
        self.subset("experimental")
    }

    fn client(&self, m: &ModelArgs) -> Result<ChatClient> {
        let (transport, clock): (Arc<dyn Transport>, Arc<dyn Clock>) = match &m.mock {
            Some(script) => (
                Arc::new(ScriptedTransport::new(MockScript::load(script)?)),
                Arc::new(SimulatedClock::new()),
            ),
            None => (
                Arc::new(HttpTransport::new(Duration::from_secs(120))),
                Arc::new(SystemClock),
            ),
        };
        let counter = TokenCounter::from_chars_per_token(self.config.run.chars_per_token)
            .ok_or_else(|| usage("run.chars_per_token must be positive"))?;
        fs::create_dir_all(&self.run_dir)
            .map_err(|e| format!("{}: {e}", self.run_dir.display()))?;
        let cache = ResponseCache::open(&self.run_dir.join("cache.bin"))?;
        Ok(ChatClient::new(transport, clock)
            .with_cache(Arc::new(cache))
            .with_counter(counter)
            .with_env_api_key())
    }

    fn run_config(&self, m: &ModelArgs, variant: &PromptVariant) -> RunConfig {
        RunConfig {
            run_id: self.run_id.clone(),
            corpus: self.corpus_path.clone(),
            format: m.format.clone(),
            split: self.split.as_ref().map(|(p, _)| p.clone()),
            subset: m.subset.clone(),
            preset: self.preset.clone(),
            variant: variant.clone(),
            profile: self.profile.clone(),
            params: self.params.clone(),
            shot_seed: self.shot_seed(m),
            concurrency: self.concurrency(m),
            response_reserve: self.config.run.response_reserve,
            mock: m.mock.clone(),
        }
    }

    fn shot_seed(&self, m: &ModelArgs) -> u64 {
        m.shot_seed.unwrap_or(self.config.run.shot_seed)
    }

    fn concurrency(&self, m: &ModelArgs) -> usize {
        m.concurrency.unwrap_or(self.config.run.concurrency).max(1)
    }
}

fn mock_profile() -> ModelProfile {
    ModelProfile {
        profile_id: "mock".into(),
        endpoint_url: "http://mock.invalid".into(),
        model_name: "mock".into(),
        context_limit: 128_000,
        tokens_per_minute: 1_000_000,
        price_in: Default::default(),
        price_out: Default::default(),
        supports_seed: true,
    }
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let s = Session::open(&a.model)?;
    let mut variant = s.variant.clone();
    if let Some(p) = a.pruning {
        variant.pruning = p;
    }
    if let Some(seg) = a.segmentation {
        variant.segmentation = seg;
    }
    if let Some(k) = a.shots {
        variant.shots = k;
    }
    variant.validate()?;

    let policies = s.subset(&a.model.subset);
    let pool = s.shot_pool();
    let client = s.client(&a.model)?;
    let pipeline = Pipeline::new(
        &client,
        &s.builder,
        &s.corpus.taxonomy,
        &s.profile,
        &s.params,
    )
    .with_shots(ShotSource {
        annotations: &s.corpus.annotations,
        pool: &pool,
        seed: s.shot_seed(&a.model),
    })
    .with_response_reserve(s.config.run.response_reserve)
    .with_concurrency(s.concurrency(&a.model));
    let record = pipeline.run(&s.run_id, &policies, &variant);

    write(
        &s.run_dir.join("config.json"),
        pretty(&s.run_config(&a.model, &variant)),
    )?;
    write(&s.run_dir.join("record.json"), pretty(&record))?;
    for (id, reason) in &record.failures {
        eprintln!("warning: policy {id} failed: {reason}");
    }
    let usage_total = record.total_usage();
    println!(
        "analyzed {} of {} policies with {} requests ({} prompt + {} completion tokens) -> {}",
        record.predictions.len(),
        policies.len(),
        record.plans_dispatched,
        usage_total.prompt_tokens,
        usage_total.completion_tokens,
        s.run_dir.display()
    );
    if record.predictions.is_empty() && !policies.is_empty() {
        return Err("every policy failed".into());
    }
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let rc: RunConfig = read_json(&a.run.join("config.json"))?;
    let record: RunRecord = read_json(&a.run.join("record.json"))?;
    let corpus = load_corpus(&rc.corpus, format_of(&rc.format)?)?;
    let truth = match &a.truth {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            parse_annotations(&text, &corpus.policies, &corpus.taxonomy)?
        }
        None => corpus.annotations.clone(),
    };
    let report = score(&record.predictions, &truth, &corpus.taxonomy)?;
    write(&a.run.join("metrics.json"), pretty(&report))?;

    let mut csv = String::from("label,tp,fp,fn,tn,accuracy,precision,recall,f1,coverage\n");
    for (label, m) in &report.per_label {
        csv.push_str(&format!(
            "{label},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
            m.counts.tp,
            m.counts.fp,
            m.counts.fn_,
            m.counts.tn,
            m.metrics.accuracy,
            m.metrics.precision,
            m.metrics.recall,
            m.metrics.f1,
            m.coverage
        ));
    }
    write(&a.run.join("per_label.csv"), csv)?;

    let m = &report.metrics;
    println!(
        "accuracy={:.3} precision={:.3} recall={:.3} f1={:.3}",
        m.accuracy, m.precision, m.recall, m.f1
    );
    println!(
        "tp={} fp={} fn={} tn={} coverage={:.3} over {} policies",
        report.counts.tp,
        report.counts.fp,
        report.counts.fn_,
        report.counts.tn,
        report.coverage,
        report.policies
    );
    if m.undefined_metric {
        eprintln!("note: some metric had a zero denominator and was reported as 0");
    }
    if !record.failures.is_empty() {
        eprintln!(
            "note: {} failed policies were not scored",
            record.failures.len()
        );
    }
    Ok(())
}

fn abtest(a: AbtestArgs) -> Result<()> {
    let s = Session::open(&a.model)?;
    let ab = &s.config.abtest;
    let baseline = s.config.variant(&ab.baseline_preset)?;
    let policies = s.subset(&a.model.subset);
    let pool = s.shot_pool();
    let client = s.client(&a.model)?;
    let pipeline = Pipeline::new(
        &client,
        &s.builder,
        &s.corpus.taxonomy,
        &s.profile,
        &s.params,
    )
    .with_shots(ShotSource {
        annotations: &s.corpus.annotations,
        pool: &pool,
        seed: s.shot_seed(&a.model),
    })
    .with_response_reserve(s.config.run.response_reserve)
    .with_concurrency(s.concurrency(&a.model));
    let result = split_test_pipeline(
        &pipeline,
        &policies,
        &s.corpus.annotations,
        &ab.baseline_name,
        &baseline,
        &ab.sequence(),
    )?;
    let csv = result.to_csv()?;
    write(
        &s.run_dir.join("config.json"),
        pretty(&s.run_config(&a.model, &baseline)),
    )?;
    write(&s.run_dir.join("abtest.csv"), &csv)?;
    write(&s.run_dir.join("split_test.json"), pretty(&result))?;

    let width = result
        .rows
        .iter()
        .map(|r| r.technique.len())
        .max()
        .unwrap_or(0);
    println!("{:width$}  acc    prec   rec    f1", "technique");
    for r in &result.rows {
        let m = &r.metrics.metrics;
        println!(
            "{:width$}  {:.3}  {:.3}  {:.3}  {:.3}{}",
            r.technique,
            m.accuracy,
            m.precision,
            m.recall,
            m.f1,
            if r.adopted { "  *" } else { "" }
        );
    }
    println!(
        "final: {} -> {}",
        result.final_technique,
        s.run_dir.display()
    );
    Ok(())
}

fn audit(a: AuditArgs) -> Result<()> {
    let s = Session::open(&a.model)?;
    let times = a
        .times
        .iter()
        .map(|t| t.parse::<TimeOfDay>().map_err(|e| usage(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let subset = s.subset(&a.model.subset);
    let ids: Vec<String> = if a.policies.is_empty() {
        subset.iter().map(|p| p.policy_id.clone()).collect()
    } else {
        a.policies.clone()
    };
    let schedule = ConsistencySchedule::grid(a.days, &times, a.repeats, ids);
    let pool = s.shot_pool();
    let client = s.client(&a.model)?;
    let pipeline = Pipeline::new(
        &client,
        &s.builder,
        &s.corpus.taxonomy,
        &s.profile,
        &s.params,
    )
    .with_shots(ShotSource {
        annotations: &s.corpus.annotations,
        pool: &pool,
        seed: s.shot_seed(&a.model),
    })
    .with_response_reserve(s.config.run.response_reserve);
    let report = audit_consistency(
        &pipeline,
        &s.corpus.policies,
        &schedule,
        &s.variant,
        a.no_wait,
    )?;
    write(
        &s.run_dir.join("config.json"),
        pretty(&s.run_config(&a.model, &s.variant)),
    )?;
    write(&s.run_dir.join("audit.json"), pretty(&report))?;
    write(&s.run_dir.join("audit_slots.csv"), report.slot_csv())?;
    println!(
        "consistency {:.3}: {} discrepancies over {} responses, {} failed requests",
        report.consistency, report.discrepancies, report.total, report.failures
    );
    Ok(())
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let config = match &a.config {
        Some(p) => Some(Config::load(p)?),
        None => None,
    };
    if a.tpm.is_none() && config.is_none() {
        return Err(usage("give --tpm and --tokens-per-policy, or --config"));
    }
    let tokens_per_policy = a
        .tokens_per_policy
        .or_else(|| config.as_ref().map(|c| c.economics.tokens_in_per_policy))
        .ok_or_else(|| usage("--tokens-per-policy is required with --tpm"))?;
    if let Some(tpm) = a.tpm {
        println!(
            "{} policies/min",
            policies_per_minute(tpm, tokens_per_policy)?
        );
    }
    let Some(config) = config else {
        return Ok(());
    };

    let econ = &config.economics;
    let annotation = econ.annotation();
    let fixed = annotation_cost(&annotation);
    println!(
        "annotation: ${fixed} for {} policies ({} annotators at ${}/h)",
        annotation.policy_count, annotation.annotators_per_policy, annotation.hourly_rate
    );
    let mut models = Vec::new();
    for id in config.profiles.keys() {
        let profile = config.profile(id)?;
        let cost = LlmCostModel {
            tokens_in_per_policy: tokens_per_policy,
            tokens_out_per_policy: econ.tokens_out_per_policy,
            price_in: profile.price_in,
            price_out: profile.price_out,
        };
        let per_policy = llm_cost_per_policy(&cost);
        let rate = policies_per_minute(
            profile.tokens_per_minute,
            tokens_per_policy + econ.tokens_out_per_policy,
        )
        .map(|r| format!("{r} policies/min"))
        .unwrap_or_else(|e| e.to_string());
        let even = break_even(&annotation, &cost)
            .map(|n| format!("break-even at {n} policies"))
            .unwrap_or_else(|e| e.to_string());
        println!("{id}: ${per_policy} per policy, {rate}, {even}");
        models.push(CurveModel {
            name: id.clone(),
            cost,
            tokens_per_policy: tokens_per_policy + econ.tokens_out_per_policy,
            tokens_per_minute: profile.tokens_per_minute,
        });
    }
    if let Some(dir) = &a.curves {
        let table = emit_curves(&models, 0..=a.max_policies, Some(fixed))?;
        write(&dir.join("cost_curves.csv"), table.cost_csv())?;
        write(&dir.join("time_curves.csv"), table.time_csv())?;
        println!("curves for {} models -> {}", models.len(), dir.display());
    }
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let config = match &a.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let corpus_path = a
        .corpus
        .clone()
        .or_else(|| config.run.corpus.clone())
        .ok_or_else(|| usage("no corpus given (use --corpus or set run.corpus)"))?;
    let corpus = load_corpus(&corpus_path, format_of(&a.format)?)?;
    let policies: Vec<PolicyDocument> = match a.split.clone().or_else(|| config.run.split.clone()) {
        Some(p) => {
            let s: Split = read_json(&p)?;
            let ids: BTreeSet<String> = s
                .subset(&a.subset)
                .cloned()
                .ok_or_else(|| usage(format!("unknown subset `{}`", a.subset)))?;
            corpus
                .policies
                .iter()
                .filter(|p| ids.contains(&p.policy_id))
                .cloned()
                .collect()
        }
        None => corpus.policies.clone(),
    };
    let context_limit = match a.context_limit {
        Some(n) => n,
        None => {
            config
                .select_profile(a.profile.as_deref())
                .map_err(|_| usage("give --context-limit or a model profile"))?
                .context_limit
        }
    };
    let variant = config.variant(a.preset.as_deref().unwrap_or(&config.run.preset))?;
    let counter = TokenCounter::from_chars_per_token(config.run.chars_per_token)
        .ok_or_else(|| usage("run.chars_per_token must be positive"))?;
    let examples = export_finetune(
        &policies,
        &corpus.annotations,
        &corpus.taxonomy,
        &PromptBuilder::default(),
        &variant,
        &counter,
        context_limit,
        a.reserve.unwrap_or(config.run.response_reserve),
    )?;
    let mut buf = Vec::new();
    write_jsonl(&examples, &mut buf)?;
    write(&a.out, buf)?;
    println!(
        "{} examples from {} policies -> {}",
        examples.len(),
        policies.len(),
        a.out.display()
    );
    Ok(())
}
