//! TOML configuration: model profiles and prices, sampling parameters,
//! prompt presets, run defaults, cost assumptions and split-test
//! sequences. Command-line flags override these values.
//!
//! ```toml
//! [run]
//! profile = "gpt-4-turbo"
//! preset = "final"
//!
//! [params]
//! temperature = 0.0
//! seed = 42
//!
//! [profiles.gpt-4-turbo]
//! endpoint_url = "https://api.openai.com"
//! model_name = "gpt-4-1106-preview"
//! context_limit = 128000
//! tokens_per_minute = 300000
//! price_in = "0.01"
//! price_out = "0.03"
//! supports_seed = true
//!
//! [presets.quoted]
//! base = "baseline"
//! data_boundary = "sentence_with_quotes"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::economics::{AnnotationCostModel, Hours, Money};
use crate::evaluation::{chatgpt_sequence, Technique, BASELINE_TECHNIQUE};
use crate::prompting::{PromptVariant, VariantPatch};
use crate::provider::{ModelParameters, ModelProfile};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: String, message: String },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown model profile `{0}`")]
    UnknownProfile(String),
    #[error("unknown prompt preset `{0}`")]
    UnknownPreset(String),
    #[error("preset `{0}` derives from itself")]
    PresetCycle(String),
    #[error("no model profile selected")]
    NoProfile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub context_limit: usize,
    pub tokens_per_minute: u64,
    #[serde(default)]
    pub price_in: Money,
    #[serde(default)]
    pub price_out: Money,
    #[serde(default)]
    pub supports_seed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetConfig {
    /// A built-in preset or another configured one; `baseline` when unset.
    #[serde(default)]
    pub base: Option<String>,
    #[serde(flatten)]
    pub patch: VariantPatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunDefaults {
    /// Corpus directory; relative paths are taken from the config file's
    /// directory.
    pub corpus: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub runs_dir: Option<PathBuf>,
    pub profile: Option<String>,
    pub preset: String,
    pub response_reserve: usize,
    pub concurrency: usize,
    pub shot_seed: u64,
    pub chars_per_token: f64,
}

impl Default for RunDefaults {
    fn default() -> Self {
        Self {
            corpus: None,
            split: None,
            runs_dir: None,
            profile: None,
            preset: "final".into(),
            response_reserve: crate::budget::DEFAULT_RESPONSE_RESERVE,
            concurrency: 1,
            shot_seed: 0,
            chars_per_token: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EconomicsConfig {
    pub annotators_per_policy: u32,
    pub hours_per_policy: Hours,
    pub hourly_rate: Money,
    pub policy_count: u64,
    pub tokens_in_per_policy: u64,
    pub tokens_out_per_policy: u64,
}

impl Default for EconomicsConfig {
    fn default() -> Self {
        Self {
            annotators_per_policy: 3,
            hours_per_policy: Hours::from_minutes(112),
            hourly_rate: Money::from_dollars(10),
            policy_count: 100,
            tokens_in_per_policy: 6652,
            tokens_out_per_policy: 600,
        }
    }
}

impl EconomicsConfig {
    pub fn annotation(&self) -> AnnotationCostModel {
        AnnotationCostModel {
            annotators_per_policy: self.annotators_per_policy,
            hours_per_policy: self.hours_per_policy,
            hourly_rate: self.hourly_rate,
            policy_count: self.policy_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbTestConfig {
    pub baseline_name: String,
    pub baseline_preset: String,
    /// Empty means the built-in ChatGPT sequence.
    pub techniques: Vec<Technique>,
}

impl Default for AbTestConfig {
    fn default() -> Self {
        Self {
            baseline_name: BASELINE_TECHNIQUE.into(),
            baseline_preset: "baseline".into(),
            techniques: Vec::new(),
        }
    }
}

impl AbTestConfig {
    pub fn sequence(&self) -> Vec<Technique> {
        if self.techniques.is_empty() {
            chatgpt_sequence()
        } else {
            self.techniques.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub run: RunDefaults,
    pub params: Option<ModelParameters>,
    pub profiles: BTreeMap<String, ProfileConfig>,
    pub presets: BTreeMap<String, PresetConfig>,
    pub economics: EconomicsConfig,
    pub abtest: AbTestConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut config = Self::parse(&text)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(config)
    }

    pub fn profile(&self, id: &str) -> Result<ModelProfile, ConfigError> {
        let p = self
            .profiles
            .get(id)
            .ok_or_else(|| ConfigError::UnknownProfile(id.to_string()))?;
        Ok(ModelProfile {
            profile_id: id.to_string(),
            endpoint_url: p.endpoint_url.clone(),
            model_name: p.model_name.clone(),
            context_limit: p.context_limit,
            tokens_per_minute: p.tokens_per_minute,
            price_in: p.price_in,
            price_out: p.price_out,
            supports_seed: p.supports_seed,
        })
    }

    /// The profile named by `requested`, else the configured default, else
    /// the only profile when there is exactly one.
    pub fn select_profile(&self, requested: Option<&str>) -> Result<ModelProfile, ConfigError> {
        let id = requested
            .map(str::to_string)
            .or_else(|| self.run.profile.clone())
            .or_else(|| {
                (self.profiles.len() == 1).then(|| self.profiles.keys().next().unwrap().clone())
            })
            .ok_or(ConfigError::NoProfile)?;
        self.profile(&id)
    }

    /// Resolves configured presets (which may build on each other) and the
    /// built-in `baseline`, `final` and `llama`.
    pub fn variant(&self, name: &str) -> Result<PromptVariant, ConfigError> {
        let mut chain = Vec::new();
        let mut current = name.to_string();
        let base = loop {
            match self.presets.get(&current) {
                Some(p) => {
                    if chain
                        .iter()
                        .any(|(n, _): &(String, &PresetConfig)| n == &current)
                    {
                        return Err(ConfigError::PresetCycle(current));
                    }
                    chain.push((current.clone(), p));
                    current = p.base.clone().unwrap_or_else(|| "baseline".into());
                }
                None => {
                    break PromptVariant::preset(&current)
                        .ok_or_else(|| ConfigError::UnknownPreset(current.clone()))?
                }
            }
        };
        Ok(chain.iter().rev().fold(base, |v, (_, p)| p.patch.apply(&v)))
    }

    /// Makes relative paths in `[run]` relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.run.corpus,
            &mut self.run.split,
            &mut self.run.runs_dir,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn params(&self) -> ModelParameters {
        self.params.clone().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::DataBoundary;

    const SAMPLE: &str = r#"
[run]
profile = "turbo"
preset = "quoted"

[params]
temperature = 0.0
top_p = 1.0
seed = 7
max_output_tokens = 300

[profiles.turbo]
endpoint_url = "https://api.example.com"
model_name = "gpt-4-1106-preview"
context_limit = 128000
tokens_per_minute = 300000
price_in = "0.01"
price_out = "0.03"
supports_seed = true

[presets.bounded]
data_boundary = "sentence"

[presets.quoted]
base = "bounded"
data_boundary = "sentence_with_quotes"
shots = 1

[economics]
hours_per_policy = "1h52m"

[[abtest.techniques]]
name = "Quotes"
patch = { data_boundary = "sentence_with_quotes" }
adopt = false
"#;

    #[test]
    fn parses_sample() {
        let c = Config::parse(SAMPLE).unwrap();
        let p = c.select_profile(None).unwrap();
        assert_eq!(p.profile_id, "turbo");
        assert_eq!(p.price_in, Money::from_cents(1));
        assert_eq!(c.params().seed, Some(7));
        let v = c.variant(&c.run.preset).unwrap();
        assert_eq!(v.data_boundary, DataBoundary::SentenceWithQuotes);
        assert_eq!(v.shots, 1);
        assert_eq!(c.economics.hours_per_policy, Hours::from_minutes(112));
        assert_eq!(c.abtest.sequence().len(), 1);
        assert_eq!(c.abtest.sequence()[0].adopt, Some(false));
    }

    #[test]
    fn unknown_names_are_errors() {
        let c = Config::parse(SAMPLE).unwrap();
        assert!(matches!(
            c.profile("nope"),
            Err(ConfigError::UnknownProfile(_))
        ));
        assert!(matches!(
            c.variant("nope"),
            Err(ConfigError::UnknownPreset(_))
        ));
        assert_eq!(
            c.variant("llama").unwrap(),
            crate::prompting::llama_profile()
        );
        assert!(Config::parse("[run]\nbogus = 1\n").is_err());
        assert!(Config::parse("[presets.a]\ndata_boundry = \"sentence\"\n").is_err());
    }

    #[test]
    fn preset_cycles_are_rejected() {
        let c = Config::parse("[presets.a]\nbase = \"b\"\n[presets.b]\nbase = \"a\"\n").unwrap();
        assert!(matches!(c.variant("a"), Err(ConfigError::PresetCycle(_))));
    }

    #[test]
    fn empty_config_defaults() {
        let c = Config::parse("").unwrap();
        assert_eq!(c.abtest.sequence().len(), 12);
        assert_eq!(c.variant("final").unwrap(), PromptVariant::final_design());
        assert!(matches!(
            c.select_profile(None),
            Err(ConfigError::NoProfile)
        ));
    }
}
