//! Run configuration: one declarative file (TOML or JSON), overridable by
//! command-line flags, with flags winning.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use tactician_core::promptkit::PromptVariant;
use tactician_core::similarity::SimilarityWeights;

use crate::CliError;

/// Everything a run needs. Serialized into manifests so a reader can re-run
/// any command identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every randomized stage derives its own seed from it.
    pub seed: u64,
    /// Miscoverage level for conformal calibration.
    pub alpha: f64,
    /// Where artifacts and manifests land.
    pub output_dir: PathBuf,
    /// The trained model container (written by `train`/`calibrate`).
    pub model_path: PathBuf,
    pub corpus: CorpusPaths,
    pub similarity: WeightSettings,
    pub prompt: PromptSettings,
    pub llm: LlmSettings,
    pub backend: BackendConfig,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            seed: 17,
            alpha: 0.05,
            output_dir: PathBuf::from("runs/out"),
            model_path: PathBuf::from("runs/out/model.json"),
            corpus: CorpusPaths::default(),
            similarity: WeightSettings::default(),
            prompt: PromptSettings::default(),
            llm: LlmSettings::default(),
            backend: BackendConfig::Echo,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusPaths {
    pub train: PathBuf,
    pub calibration: PathBuf,
    pub test: PathBuf,
    /// Demonstration pool; the train split unless overridden.
    pub pool: Option<PathBuf>,
}

impl Default for CorpusPaths {
    fn default() -> CorpusPaths {
        CorpusPaths {
            train: PathBuf::from("corpus/train.jsonl"),
            calibration: PathBuf::from("corpus/calibration.jsonl"),
            test: PathBuf::from("corpus/test.jsonl"),
            pool: None,
        }
    }
}

impl CorpusPaths {
    pub fn pool(&self) -> &Path {
        self.pool.as_deref().unwrap_or(&self.train)
    }
}

/// The three similarity weights as written in config; validated into a
/// [`SimilarityWeights`] when used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightSettings {
    pub semantic: f64,
    pub lexical: f64,
    pub syntactic: f64,
}

impl Default for WeightSettings {
    fn default() -> WeightSettings {
        WeightSettings {
            semantic: 1.0 / 3.0,
            lexical: 1.0 / 3.0,
            syntactic: 1.0 / 3.0,
        }
    }
}

impl WeightSettings {
    pub fn build(&self) -> Result<SimilarityWeights, CliError> {
        SimilarityWeights::new(self.semantic, self.lexical, self.syntactic)
            .map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSettings {
    pub variant: PromptVariant,
}

impl Default for PromptSettings {
    fn default() -> PromptSettings {
        PromptSettings {
            variant: PromptVariant::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    /// Model name stamped into completion requests.
    pub model_name: String,
    /// Concurrent in-flight completions.
    pub concurrency: usize,
}

impl Default for LlmSettings {
    fn default() -> LlmSettings {
        LlmSettings {
            model_name: "deepseek-chat".to_owned(),
            concurrency: tactician_core::llm::DEFAULT_CONCURRENCY,
        }
    }
}

/// Which completion source to talk to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Deterministic offline backend that answers with the prompt's own
    /// embedded prediction. For tests and dry runs.
    Echo,
    /// Replay recorded responses from a fixture directory.
    Replay { dir: PathBuf },
    /// Echo, additionally recording replay fixtures into `dir`. The way
    /// fixture directories are produced offline.
    EchoRecord { dir: PathBuf },
    /// Live chat-completions endpoint.
    Http {
        endpoint: String,
        /// Name of the environment variable holding the bearer token; keys
        /// never live in config files.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api_key_env: Option<String>,
    },
    /// Live endpoint, recording replay fixtures into `dir`.
    Record {
        endpoint: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api_key_env: Option<String>,
        dir: PathBuf,
    },
}

impl RunConfig {
    /// Read a TOML or JSON config file, deciding the format by extension and
    /// falling back to trying both.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let data = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let parsed = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&data).map_err(|e| e.to_string()),
            Some("json") => serde_json::from_str(&data).map_err(|e| e.to_string()),
            _ => toml::from_str(&data)
                .map_err(|e| e.to_string())
                .or_else(|toml_err| {
                    serde_json::from_str(&data)
                        .map_err(|json_err| format!("not TOML ({toml_err}) nor JSON ({json_err})"))
                }),
        };
        parsed.map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    /// Reject out-of-range settings before any command runs.
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Usage(format!(
                "alpha must lie strictly between 0 and 1, got {}",
                self.alpha
            )));
        }
        self.similarity.build().map(|_| ())?;
        if self.llm.concurrency == 0 {
            return Err(CliError::Usage("concurrency must be at least 1".to_owned()));
        }
        Ok(())
    }

    /// Content hash of the effective configuration, recorded in manifests.
    pub fn sha256(&self) -> String {
        use sha2::Digest;
        let json = serde_json::to_string(self).expect("config serialization cannot fail");
        hex::encode(sha2::Sha256::digest(json.as_bytes()))
    }
}

/// Command-line overrides; every present flag replaces the corresponding
/// config value.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct OverrideArgs {
    /// Override the run seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the conformal miscoverage level.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Override the artifact output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Override the model container path.
    #[arg(long, global = true, value_name = "FILE")]
    pub model_path: Option<PathBuf>,
    /// Override the train-split corpus path.
    #[arg(long, global = true, value_name = "FILE")]
    pub train_corpus: Option<PathBuf>,
    /// Override the calibration-split corpus path.
    #[arg(long, global = true, value_name = "FILE")]
    pub calibration_corpus: Option<PathBuf>,
    /// Override the test-split corpus path.
    #[arg(long, global = true, value_name = "FILE")]
    pub test_corpus: Option<PathBuf>,
    /// Override the demonstration-pool corpus path.
    #[arg(long, global = true, value_name = "FILE")]
    pub pool_corpus: Option<PathBuf>,
    /// Override the prompt variant (full, no_small_model, no_cot, no_demos,
    /// random_demos, p_bas, p_abas).
    #[arg(long, global = true)]
    pub variant: Option<PromptVariant>,
    /// Override the similarity weights as "semantic,lexical,syntactic".
    #[arg(long, global = true, value_name = "W,W,W")]
    pub weights: Option<String>,
    /// Override the backend kind (echo, replay, echo_record, http, record).
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Replay/recording fixture directory (for replay, echo_record, record).
    #[arg(long, global = true, value_name = "DIR")]
    pub replay_dir: Option<PathBuf>,
    /// Chat-completions endpoint URL (for http, record).
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    /// Environment variable holding the API key (for http, record).
    #[arg(long, global = true, value_name = "VAR")]
    pub api_key_env: Option<String>,
    /// Override the LLM model name in requests.
    #[arg(long, global = true)]
    pub llm_model: Option<String>,
    /// Override the completion concurrency bound.
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
}

impl OverrideArgs {
    pub fn apply(&self, mut config: RunConfig) -> Result<RunConfig, CliError> {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(alpha) = self.alpha {
            config.alpha = alpha;
        }
        if let Some(dir) = &self.output_dir {
            config.output_dir = dir.clone();
        }
        if let Some(path) = &self.model_path {
            config.model_path = path.clone();
        }
        if let Some(path) = &self.train_corpus {
            config.corpus.train = path.clone();
        }
        if let Some(path) = &self.calibration_corpus {
            config.corpus.calibration = path.clone();
        }
        if let Some(path) = &self.test_corpus {
            config.corpus.test = path.clone();
        }
        if let Some(path) = &self.pool_corpus {
            config.corpus.pool = Some(path.clone());
        }
        if let Some(variant) = self.variant {
            config.prompt.variant = variant;
        }
        if let Some(weights) = &self.weights {
            config.similarity = parse_weights(weights)?;
        }
        if let Some(model) = &self.llm_model {
            config.llm.model_name = model.clone();
        }
        if let Some(concurrency) = self.concurrency {
            config.llm.concurrency = concurrency;
        }
        config.backend = self.backend_config(config.backend)?;
        Ok(config)
    }

    /// Resolve the backend from `--backend` and its companion flags, filling
    /// gaps from the config's current backend where the kinds agree.
    fn backend_config(&self, current: BackendConfig) -> Result<BackendConfig, CliError> {
        let dir_flag = self.replay_dir.clone();
        let endpoint_flag = self.endpoint.clone();
        let key_flag = self.api_key_env.clone();
        let Some(kind) = self.backend.as_deref() else {
            // No kind switch: companion flags refine the existing backend.
            return Ok(match current {
                BackendConfig::Replay { dir } => BackendConfig::Replay {
                    dir: dir_flag.unwrap_or(dir),
                },
                BackendConfig::EchoRecord { dir } => BackendConfig::EchoRecord {
                    dir: dir_flag.unwrap_or(dir),
                },
                BackendConfig::Http {
                    endpoint,
                    api_key_env,
                } => BackendConfig::Http {
                    endpoint: endpoint_flag.unwrap_or(endpoint),
                    api_key_env: key_flag.or(api_key_env),
                },
                BackendConfig::Record {
                    endpoint,
                    api_key_env,
                    dir,
                } => BackendConfig::Record {
                    endpoint: endpoint_flag.unwrap_or(endpoint),
                    api_key_env: key_flag.or(api_key_env),
                    dir: dir_flag.unwrap_or(dir),
                },
                BackendConfig::Echo => BackendConfig::Echo,
            });
        };
        let need_dir = || {
            dir_flag.clone().or_else(|| match &current {
                BackendConfig::Replay { dir }
                | BackendConfig::EchoRecord { dir }
                | BackendConfig::Record { dir, .. } => Some(dir.clone()),
                _ => None,
            })
        };
        let need_endpoint = || {
            endpoint_flag.clone().or_else(|| match &current {
                BackendConfig::Http { endpoint, .. } | BackendConfig::Record { endpoint, .. } => {
                    Some(endpoint.clone())
                }
                _ => None,
            })
        };
        match kind {
            "echo" => Ok(BackendConfig::Echo),
            "replay" => Ok(BackendConfig::Replay {
                dir: need_dir().ok_or_else(|| {
                    CliError::Usage("--backend replay requires --replay-dir".to_owned())
                })?,
            }),
            "echo_record" => Ok(BackendConfig::EchoRecord {
                dir: need_dir().ok_or_else(|| {
                    CliError::Usage("--backend echo_record requires --replay-dir".to_owned())
                })?,
            }),
            "http" => Ok(BackendConfig::Http {
                endpoint: need_endpoint().ok_or_else(|| {
                    CliError::Usage("--backend http requires --endpoint".to_owned())
                })?,
                api_key_env: key_flag,
            }),
            "record" => Ok(BackendConfig::Record {
                endpoint: need_endpoint().ok_or_else(|| {
                    CliError::Usage("--backend record requires --endpoint".to_owned())
                })?,
                api_key_env: key_flag,
                dir: need_dir().ok_or_else(|| {
                    CliError::Usage("--backend record requires --replay-dir".to_owned())
                })?,
            }),
            other => Err(CliError::Usage(format!(
                "unknown backend kind '{other}' (expected echo, replay, echo_record, http, record)"
            ))),
        }
    }
}

fn parse_weights(spec: &str) -> Result<WeightSettings, CliError> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "--weights expects three comma-separated numbers, got '{spec}'"
        )));
    }
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| CliError::Usage(format!("--weights component '{s}' is not a number")))
    };
    let settings = WeightSettings {
        semantic: parse(parts[0])?,
        lexical: parse(parts[1])?,
        syntactic: parse(parts[2])?,
    };
    // Surface invalid combinations at the flag, not deep in a run.
    settings.build()?;
    Ok(settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_and_json_configs_parse_identically() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("run.toml");
        std::fs::write(
            &toml_path,
            r#"
seed = 99
alpha = 0.1

[corpus]
train = "data/train.jsonl"

[backend]
kind = "replay"
dir = "fixtures"
"#,
        )
        .unwrap();
        let json_path = dir.path().join("run.json");
        std::fs::write(
            &json_path,
            r#"{
  "seed": 99,
  "alpha": 0.1,
  "corpus": {"train": "data/train.jsonl"},
  "backend": {"kind": "replay", "dir": "fixtures"}
}"#,
        )
        .unwrap();
        let from_toml = RunConfig::load(&toml_path).unwrap();
        let from_json = RunConfig::load(&json_path).unwrap();
        assert_eq!(from_toml, from_json);
        assert_eq!(from_toml.seed, 99);
        assert_eq!(
            from_toml.backend,
            BackendConfig::Replay {
                dir: PathBuf::from("fixtures")
            }
        );
        // Unset fields keep defaults.
        assert_eq!(from_toml.llm.concurrency, LlmSettings::default().concurrency);
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "sede = 1\n").unwrap();
        assert!(matches!(RunConfig::load(&path), Err(CliError::Usage(_))));
    }

    #[test]
    fn flags_win_over_config_values() {
        let config = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        let overrides = OverrideArgs {
            seed: Some(2),
            variant: Some(PromptVariant::NoCot),
            weights: Some("0.5, 0.25, 0.25".to_owned()),
            ..OverrideArgs::default()
        };
        let merged = overrides.apply(config).unwrap();
        assert_eq!(merged.seed, 2);
        assert_eq!(merged.prompt.variant, PromptVariant::NoCot);
        assert_eq!(merged.similarity.semantic, 0.5);
    }

    #[test]
    fn backend_switch_requires_its_companions() {
        let overrides = OverrideArgs {
            backend: Some("replay".to_owned()),
            ..OverrideArgs::default()
        };
        assert!(matches!(
            overrides.apply(RunConfig::default()),
            Err(CliError::Usage(_))
        ));
        let overrides = OverrideArgs {
            backend: Some("replay".to_owned()),
            replay_dir: Some(PathBuf::from("fx")),
            ..OverrideArgs::default()
        };
        let merged = overrides.apply(RunConfig::default()).unwrap();
        assert_eq!(
            merged.backend,
            BackendConfig::Replay {
                dir: PathBuf::from("fx")
            }
        );
    }

    #[test]
    fn companion_flags_refine_a_matching_backend() {
        let config = RunConfig {
            backend: BackendConfig::Replay {
                dir: PathBuf::from("old"),
            },
            ..RunConfig::default()
        };
        let overrides = OverrideArgs {
            replay_dir: Some(PathBuf::from("new")),
            ..OverrideArgs::default()
        };
        let merged = overrides.apply(config).unwrap();
        assert_eq!(
            merged.backend,
            BackendConfig::Replay {
                dir: PathBuf::from("new")
            }
        );
    }

    #[test]
    fn validation_catches_bad_alpha_and_weights() {
        let bad_alpha = RunConfig {
            alpha: 1.5,
            ..RunConfig::default()
        };
        assert!(bad_alpha.validate().is_err());
        let bad_weights = RunConfig {
            similarity: WeightSettings {
                semantic: 0.9,
                lexical: 0.9,
                syntactic: 0.9,
            },
            ..RunConfig::default()
        };
        assert!(bad_weights.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig {
            seed: 18,
            ..RunConfig::default()
        };
        assert_eq!(a.sha256(), RunConfig::default().sha256());
        assert_ne!(a.sha256(), b.sha256());
        assert_eq!(a.sha256().len(), 64);
    }
}
