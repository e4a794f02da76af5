//! Run configuration: one TOML or JSON file covering every command, with
//! command-line flags layered on top. Unknown keys are rejected so typos
//! fail loudly instead of silently falling back to defaults.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use pairforge::decode::DecoderParams;
use pairforge::mert::MertConfig;
use pairforge::pipeline::TrainConfig;
use pairforge::provider::ServiceConfig;
use pairforge::synth::CorruptionRuleSet;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Generator names accepted in the `[generators]` mix, in the order their
/// output sections appear in the pair files.
pub const GENERATOR_NAMES: [&str; 5] =
    ["smt_gold", "smt_nmt", "corruption", "round_trip", "back_translation"];

/// Input and output locations. `parallel_corpus` and `dev_corpus` are
/// `source<TAB>target` TSV files; `monolingual` is source-language text,
/// one sentence per line; `gec_seed` is `poor<TAB>good` TSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub parallel_corpus: Option<PathBuf>,
    pub dev_corpus: Option<PathBuf>,
    pub monolingual: Option<PathBuf>,
    pub gec_seed: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            parallel_corpus: None,
            dev_corpus: None,
            monolingual: None,
            gec_seed: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Where the good sentence for each degraded output comes from when the
/// input is monolingual. Gold pairing is reserved for the parallel corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// The tuned translator's own output.
    Local,
    /// An HTTP translation service.
    External,
    /// Gold targets; only valid for parallel input.
    Gold,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// External only; PAIRFORGE_MT_ENDPOINT is the fallback.
    pub endpoint: Option<String>,
    pub timeout_secs: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub bearer_token: Option<String>,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            kind: ProviderKind::Local,
            endpoint: None,
            timeout_secs: None,
            batch_size: None,
            max_in_flight: None,
            bearer_token: None,
        }
    }
}

impl ProviderConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.kind != ProviderKind::External {
            let set = [
                ("provider.endpoint", self.endpoint.is_some()),
                ("provider.timeout_secs", self.timeout_secs.is_some()),
                ("provider.batch_size", self.batch_size.is_some()),
                ("provider.max_in_flight", self.max_in_flight.is_some()),
                ("provider.bearer_token", self.bearer_token.is_some()),
            ];
            if let Some((field, _)) = set.iter().find(|(_, s)| *s) {
                return Err(CliError::config(
                    *field,
                    "only meaningful when provider.kind is \"external\"",
                ));
            }
        }
        if let Some(t) = self.timeout_secs {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::config("provider.timeout_secs", "must be positive"));
            }
        }
        if self.batch_size == Some(0) {
            return Err(CliError::config("provider.batch_size", "must be at least 1"));
        }
        if self.max_in_flight == Some(0) {
            return Err(CliError::config("provider.max_in_flight", "must be at least 1"));
        }
        Ok(())
    }

    /// Resolves the external service settings, reading the endpoint from
    /// PAIRFORGE_MT_ENDPOINT when the config leaves it unset.
    pub fn service_config(&self) -> Result<ServiceConfig, CliError> {
        let mut sc = match &self.endpoint {
            Some(endpoint) => ServiceConfig::new(endpoint.clone()),
            None => ServiceConfig::from_env()
                .map_err(|e| CliError::config("provider.endpoint", e.to_string()))?,
        };
        if let Some(t) = self.timeout_secs {
            sc.timeout_secs = t;
        }
        if let Some(b) = self.batch_size {
            sc.batch_size = b;
        }
        if let Some(m) = self.max_in_flight {
            sc.max_in_flight = m;
        }
        sc.bearer_token = self.bearer_token.clone().or(sc.bearer_token);
        Ok(sc)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MertSection {
    pub outer_iters: usize,
    pub directions_per_iter: usize,
    pub nbest_size: usize,
}

impl Default for MertSection {
    fn default() -> Self {
        MertSection { outer_iters: 10, directions_per_iter: 10, nbest_size: 100 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub lm_order: usize,
    /// LM weight multiplier that turns the tuned system into the beginner.
    pub lm_scale: f64,
    pub edit_rate_threshold: f64,
    pub beam_size: usize,
    pub distortion_limit: usize,
    pub seed: u64,
    pub em_iterations: usize,
    pub max_phrase_len: usize,
    /// When false, synthesize keeps every pair regardless of edit rate.
    pub filter_enabled: bool,
    pub mert: MertSection,
    pub provider: ProviderConfig,
    /// Generator name -> fraction of that generator's input to consume.
    /// Empty means: full gold stream when a parallel corpus is configured
    /// plus full service stream when monolingual text is.
    pub generators: BTreeMap<String, f64>,
    pub corruption: CorruptionRuleSet,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            paths: PathsConfig::default(),
            lm_order: 3,
            lm_scale: 0.8,
            edit_rate_threshold: 0.6,
            beam_size: 4,
            distortion_limit: 6,
            seed: 0,
            em_iterations: 10,
            max_phrase_len: 7,
            filter_enabled: true,
            mert: MertSection::default(),
            provider: ProviderConfig::default(),
            generators: BTreeMap::new(),
            corruption: CorruptionRuleSet::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig, CliError> {
        if !path.is_file() {
            return Err(CliError::MissingArtifact(path.to_path_buf()));
        }
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("read {}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()).unwrap_or("") {
            "toml" => toml::from_str(&text)
                .map_err(|e| CliError::config("config", e.to_string())),
            "json" => serde_json::from_str(&text)
                .map_err(|e| CliError::config("config", e.to_string())),
            other => Err(CliError::config(
                "config",
                format!("unsupported extension `{other}`; expected .toml or .json"),
            )),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.lm_order == 0 {
            return Err(CliError::config("lm_order", "must be at least 1"));
        }
        if !(self.lm_scale >= 0.0 && self.lm_scale.is_finite()) {
            return Err(CliError::config("lm_scale", "must be a finite non-negative number"));
        }
        if !(self.edit_rate_threshold > 0.0 && self.edit_rate_threshold.is_finite()) {
            return Err(CliError::config("edit_rate_threshold", "must be a finite positive number"));
        }
        if self.beam_size == 0 {
            return Err(CliError::config("beam_size", "must be at least 1"));
        }
        if self.em_iterations == 0 {
            return Err(CliError::config("em_iterations", "must be at least 1"));
        }
        if self.max_phrase_len == 0 {
            return Err(CliError::config("max_phrase_len", "must be at least 1"));
        }
        if self.mert.outer_iters == 0 {
            return Err(CliError::config("mert.outer_iters", "must be at least 1"));
        }
        if self.mert.nbest_size == 0 {
            return Err(CliError::config("mert.nbest_size", "must be at least 1"));
        }
        for (name, fraction) in &self.generators {
            if !GENERATOR_NAMES.contains(&name.as_str()) {
                return Err(CliError::config(format!("generators.{name}"), "unknown generator"));
            }
            if !(*fraction > 0.0 && *fraction <= 1.0) {
                return Err(CliError::config(
                    format!("generators.{name}"),
                    "fraction must be in (0, 1]",
                ));
            }
        }
        self.provider.validate()?;
        self.corruption
            .validate()
            .map_err(|e| CliError::config("corruption", e.to_string()))?;
        Ok(())
    }

    pub fn decoder_params(&self) -> DecoderParams {
        DecoderParams { beam_size: self.beam_size, distortion_limit: self.distortion_limit }
    }

    pub fn mert_config(&self) -> MertConfig {
        MertConfig {
            outer_iters: self.mert.outer_iters,
            directions_per_iter: self.mert.directions_per_iter,
            nbest_size: self.mert.nbest_size,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lm_order: self.lm_order,
            em_iterations: self.em_iterations,
            max_phrase_len: self.max_phrase_len,
            params: self.decoder_params(),
            mert: self.mert_config(),
        }
    }

    /// The effective generator mix: the configured table, or the default
    /// inferred from which input paths are set.
    pub fn generator_mix(&self) -> BTreeMap<String, f64> {
        if !self.generators.is_empty() {
            return self.generators.clone();
        }
        let mut mix = BTreeMap::new();
        if self.paths.parallel_corpus.is_some() {
            mix.insert("smt_gold".to_string(), 1.0);
        }
        if self.paths.monolingual.is_some() {
            mix.insert("smt_nmt".to_string(), 1.0);
        }
        mix
    }
}
