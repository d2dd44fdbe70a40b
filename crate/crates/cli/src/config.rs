//! Flat `key = value` configuration file. Every key has a default and every
//! CLI flag overrides the file.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};

use ledgertopo::attribution::RankStatistic;
use ledgertopo::forecast::ModelConfig;
use ledgertopo::homology::DecileMode;
use ledgertopo::ingest::ParseMode;
use ledgertopo::motifs::MatchMode;
use ledgertopo::pipeline::{PipelineConfig, ShapConfig};

/// Everything configurable from the file, grouped by stage.
#[derive(Debug, Clone)]
pub struct AppConfig {
    pub pipeline: PipelineConfig,
    pub model: ModelConfig,
    pub shap: ShapConfig,
    pub retrains: usize,
    pub master_seed: u64,
    pub stride: usize,
    pub alpha: f64,
    pub train_frac: f64,
    pub validation_frac: f64,
    pub anomaly_fraction: f64,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            model: ModelConfig::default(),
            shap: ShapConfig::default(),
            retrains: 20,
            master_seed: 7,
            stride: 1,
            alpha: 0.05,
            train_frac: 0.6,
            validation_frac: 0.2,
            anomaly_fraction: 0.2,
        }
    }
}

impl AppConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = Self::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            for (key, value) in parse_flat(&text)? {
                config
                    .set(&key, &value)
                    .with_context(|| format!("config key {key:?}"))?;
            }
        }
        config.sync();
        Ok(config)
    }

    /// Pushes shared scalars into the nested configs.
    pub fn sync(&mut self) {
        self.shap.model = self.model;
        self.shap.retrains = self.retrains;
        self.shap.master_seed = self.master_seed;
        self.shap.train_frac = self.train_frac;
        self.shap.validation_frac = self.validation_frac;
        self.shap.anomaly_fraction = self.anomaly_fraction;
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "anchor" => {
                self.pipeline.anchor = Some(
                    DateTime::parse_from_rfc3339(value)
                        .context("bad RFC 3339 anchor")?
                        .with_timezone(&Utc),
                )
            }
            "parse_mode" => {
                self.pipeline.parse_mode = match value {
                    "lenient" => ParseMode::Lenient,
                    "strict" => ParseMode::Strict,
                    other => bail!("unknown parse mode {other:?}"),
                }
            }
            "top_fraction" => self.pipeline.top_fraction = value.parse()?,
            "top_filter_raw" => self.pipeline.top_filter_raw = value.parse()?,
            "decile_mode" => {
                self.pipeline.decile_mode = match value {
                    "undirected" => DecileMode::Undirected,
                    "raw" => DecileMode::Raw,
                    other => bail!("unknown decile mode {other:?}"),
                }
            }
            "match_mode" => {
                self.pipeline.match_mode = match value {
                    "induced" => MatchMode::Induced,
                    "partial" => MatchMode::Partial,
                    other => bail!("unknown match mode {other:?}"),
                }
            }
            "betti_k" => self.pipeline.betti_k = value.parse()?,
            "betti_p" => self.pipeline.betti_p = value.parse()?,
            "ranking_fraction" => self.pipeline.ranking.fraction = value.parse()?,
            "min_history" => self.pipeline.ranking.min_history = value.parse()?,
            "min_active_weeks" => self.pipeline.ranking.min_active_weeks = value.parse()?,
            "term_a" | "term_b" => {
                let (a, b) = self
                    .pipeline
                    .terms
                    .clone()
                    .unwrap_or((String::new(), String::new()));
                self.pipeline.terms = Some(if key == "term_a" {
                    (value.to_string(), b)
                } else {
                    (a, value.to_string())
                });
            }
            "hidden" => self.model.hidden = value.parse()?,
            "layers" => self.model.layers = value.parse()?,
            "window" => self.model.window = value.parse()?,
            "learning_rate" => self.model.learning_rate = value.parse()?,
            "epochs" => self.model.epochs = value.parse()?,
            "batch_size" => self.model.batch_size = value.parse()?,
            "patience" => self.model.patience = value.parse()?,
            "clip_norm" => self.model.clip_norm = value.parse()?,
            "seed" => self.model.seed = value.parse()?,
            "train_frac" => self.train_frac = value.parse()?,
            "validation_frac" => self.validation_frac = value.parse()?,
            "retrains" => self.retrains = value.parse()?,
            "master_seed" => self.master_seed = value.parse()?,
            "anomaly_fraction" => self.anomaly_fraction = value.parse()?,
            "background_cap" => self.shap.background_cap = value.parse()?,
            "stride" => self.stride = value.parse()?,
            "alpha" => self.alpha = value.parse()?,
            "rank_statistic" => {
                self.shap.statistic = match value {
                    "mean_absolute" => RankStatistic::MeanAbsolute,
                    "signed_mean" => RankStatistic::SignedMean,
                    other => bail!("unknown rank statistic {other:?}"),
                }
            }
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }
}

fn parse_flat(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`", number + 1);
        };
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}
