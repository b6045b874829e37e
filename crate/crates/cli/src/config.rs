//! Experiment configuration file (TOML) and its resolution against flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use hems_core::domain::{DiscomfortShape, NoiseConfig, SplitDays, Tariff, TrainConfig};
use serde::Deserialize;

/// Environment variable that overrides the configured output directory.
pub const OUT_ENV: &str = "HEMS_OUT";
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TariffPreset {
    /// 0.40 / 0.08 €/kWh, used for all profit tables.
    Table,
    /// 0.41 / 0.09 €/kWh, used for the single-day comparison.
    Sec53,
}

impl TariffPreset {
    pub fn tariff(self) -> Tariff {
        match self {
            TariffPreset::Table => Tariff::reference(),
            TariffPreset::Sec53 => Tariff::day_study(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum TariffSetting {
    Preset(TariffPreset),
    Custom { price_buy: f64, price_sell: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 300;600 networks.
    Paper,
    /// 250;500 networks.
    Tuned,
}

impl Preset {
    pub fn train_config(self) -> TrainConfig {
        match self {
            Preset::Paper => TrainConfig::paper(),
            Preset::Tuned => TrainConfig::tuned(),
        }
    }
}

/// Optional overrides of the preset's hyperparameters.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    pub episodes: Option<usize>,
    pub episode_len_h: Option<usize>,
    pub batch: Option<usize>,
    pub buffer: Option<usize>,
    pub lr_actor: Option<f64>,
    pub lr_critic: Option<f64>,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub hidden: Option<(usize, usize)>,
    pub noise: Option<NoiseConfig>,
    pub discomfort_weight: Option<f64>,
    pub penalty_weight: Option<f64>,
    pub discomfort_shape: Option<DiscomfortShape>,
    pub seed_count: Option<usize>,
}

impl TrainOverrides {
    pub fn apply(&self, mut c: TrainConfig) -> TrainConfig {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    c.$field = v;
                }
            )*};
        }
        set!(episodes, episode_len_h, batch, buffer, lr_actor, lr_critic, tau, gamma, hidden, noise, seed_count);
        if let Some(v) = self.discomfort_weight {
            c.weights.discomfort_weight = v;
        }
        if let Some(v) = self.penalty_weight {
            c.weights.penalty_weight = v;
        }
        if let Some(v) = self.discomfort_shape {
            c.weights.discomfort_shape = v;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepPreset {
    /// Each parameter moved to each of two alternatives, one at a time.
    Parameter,
    /// Full 3⁴ grid over batch, learning rates, noise and network size.
    Grid,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub preset: Option<SweepPreset>,
    /// Seeds per configuration in the first pass.
    pub seeds: Option<usize>,
    /// Configurations rerun in the second pass of a grid sweep.
    pub top: Option<usize>,
    /// Seeds per configuration in the second pass.
    pub final_seeds: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Household directories.
    #[serde(default)]
    pub data: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tariff: Option<TariffSetting>,
    pub preset: Option<Preset>,
    pub split: Option<SplitDays>,
    #[serde(default)]
    pub train: TrainOverrides,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl ExperimentConfig {
    /// Parses a config file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in cfg.data.iter_mut().chain(cfg.out.iter_mut()) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn tariff(&self, flag: Option<TariffPreset>) -> Result<Tariff> {
        let t = match (flag, self.tariff) {
            (Some(p), _) => p.tariff(),
            (None, Some(TariffSetting::Preset(p))) => p.tariff(),
            (None, Some(TariffSetting::Custom { price_buy, price_sell })) => Tariff::new(price_buy, price_sell)?,
            (None, None) => Tariff::reference(),
        };
        Ok(t)
    }

    pub fn train_config(&self, flag: Option<Preset>) -> TrainConfig {
        let preset = flag.or(self.preset).unwrap_or(Preset::Paper);
        self.train.apply(preset.train_config())
    }

    pub fn split_days(&self) -> SplitDays {
        self.split.unwrap_or_default()
    }

    /// Flag, then `HEMS_OUT`, then the config file, then `out`.
    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .or_else(|| self.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}
