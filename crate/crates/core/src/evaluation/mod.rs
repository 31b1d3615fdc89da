//! Scoring predictions against ground truth, running whole-corpus
//! extractions, and comparing prompt variants.

mod metrics;
mod pipeline;

pub use metrics::{
    score, Confusion, LabelMetrics, MacroMetrics, Metrics, MetricsReport, ScoreError,
};
pub use pipeline::{
    ExchangePurpose, ExchangeRef, Pipeline, PipelineError, PlannedRequest, RunRecord, ShotSource,
};
pub use split_test::{
    chatgpt_sequence, split_test, split_test_pipeline, MetricDelta, SplitTestError,
    SplitTestResult, SplitTestRow, Technique, BASELINE_TECHNIQUE,
};
