//! The run configuration: every pipeline default as one flat `key = value`
//! file. Unknown keys are rejected; command-line flags are applied on top
//! through [`RunConfig::set`], and the merged result is written back with
//! [`RunConfig::to_ini`].

use crate::config::{join_list, parse_list, IniDoc};
use crate::data_model::SplitUnit;
use crate::dsp::bands::BandTable;
use crate::dsp::features::{ChannelSubset, FeatureOptions, SequenceMode, WindowPlan};
use crate::error::{bail, Error, Result};
use crate::net::params::ModelConfig;
use crate::train::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub channels: ChannelSubset,
    pub bands: BandTable,
    pub window: WindowPlan,
    pub sample_rate: f32,
    pub allow_rate_mismatch: bool,
    pub log_power: bool,
    pub sequence_mode: SequenceMode,
    pub split_unit: SplitUnit,
    pub train_fraction: f64,
    pub split_seed: u64,

    pub bi_units: usize,
    pub lstm_units: Vec<usize>,
    pub dropout: Vec<f64>,
    pub dense_units: Vec<usize>,

    pub train: TrainConfig,
    pub vote_per_trial: bool,
    /// Worker cap; 0 leaves the pool at its default size.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        RunConfig {
            channels: ChannelSubset::default(),
            bands: BandTable::default(),
            window: WindowPlan::default(),
            sample_rate: 128.0,
            allow_rate_mismatch: false,
            log_power: false,
            sequence_mode: SequenceMode::FeatureAsSteps,
            split_unit: SplitUnit::Window,
            train_fraction: 0.8,
            split_seed: 7,
            bi_units: model.bi_units,
            lstm_units: model.lstm_units,
            dropout: model.dropout,
            dense_units: model.dense_units,
            train: TrainConfig::default(),
            vote_per_trial: false,
            threads: 0,
        }
    }
}

/// Every key in file order, for `to_ini` and for error messages.
pub const KEYS: &[&str] = &[
    "channels",
    "bands",
    "window_len",
    "hop",
    "sample_rate",
    "allow_rate_mismatch",
    "log_power",
    "sequence_mode",
    "split_unit",
    "train_fraction",
    "split_seed",
    "bi_units",
    "lstm_units",
    "dropout",
    "dense_units",
    "init_seed",
    "label_dim",
    "batch_size",
    "epochs",
    "lr",
    "beta1",
    "beta2",
    "eps",
    "shuffle_seed",
    "dropout_seed",
    "patience",
    "eval_every",
    "final_epoch",
    "clip_norm",
    "vote_per_trial",
    "parallel",
    "threads",
];

fn parse<T>(key: &str, value: &str) -> Result<T>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
}

/// 0 means "off" for the optional integer and real settings.
fn optional<T: PartialEq + Default>(v: T) -> Option<T> {
    (v != T::default()).then_some(v)
}

impl RunConfig {
    pub fn from_ini(text: &str) -> Result<Self> {
        let doc = IniDoc::parse(text)?;
        let mut cfg = RunConfig::default();
        for (k, v) in doc.entries() {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.train;
        match key {
            "channels" => self.channels = ChannelSubset::new(parse_list(key, v)?)?,
            "bands" => self.bands = BandTable::parse(v)?,
            "window_len" => self.window.window_len = parse(key, v)?,
            "hop" => self.window.hop = parse(key, v)?,
            "sample_rate" => self.sample_rate = parse(key, v)?,
            "allow_rate_mismatch" => self.allow_rate_mismatch = parse(key, v)?,
            "log_power" => self.log_power = parse(key, v)?,
            "sequence_mode" => self.sequence_mode = v.parse()?,
            "split_unit" => self.split_unit = v.parse()?,
            "train_fraction" => self.train_fraction = parse(key, v)?,
            "split_seed" => self.split_seed = parse(key, v)?,
            "bi_units" => self.bi_units = parse(key, v)?,
            "lstm_units" => self.lstm_units = parse_list(key, v)?,
            "dropout" => self.dropout = parse_list(key, v)?,
            "dense_units" => self.dense_units = parse_list(key, v)?,
            "init_seed" => t.init_seed = parse(key, v)?,
            "label_dim" => t.label_dim = v.parse()?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "lr" => t.adam.lr = parse(key, v)?,
            "beta1" => t.adam.beta1 = parse(key, v)?,
            "beta2" => t.adam.beta2 = parse(key, v)?,
            "eps" => t.adam.eps = parse(key, v)?,
            "shuffle_seed" => t.shuffle_seed = parse(key, v)?,
            "dropout_seed" => t.dropout_seed = parse(key, v)?,
            "patience" => t.patience = optional(parse::<usize>(key, v)?),
            "eval_every" => t.eval_every = parse(key, v)?,
            "final_epoch" => t.final_epoch = parse(key, v)?,
            "clip_norm" => t.clip_norm = optional(parse::<f64>(key, v)?),
            "vote_per_trial" => self.vote_per_trial = parse(key, v)?,
            "parallel" => t.parallelism = v.parse()?,
            "threads" => self.threads = parse(key, v)?,
            other => bail!(Config, "unknown config key {other:?}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            bail!(Config, "train_fraction must be in (0, 1), got {}", self.train_fraction);
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            bail!(Config, "sample_rate must be positive");
        }
        self.model_config(1, 1).validate()?;
        self.train.validate()
    }

    pub fn feature_options(&self) -> FeatureOptions {
        FeatureOptions {
            expected_rate_hz: self.sample_rate,
            allow_rate_mismatch: self.allow_rate_mismatch,
            log_power: self.log_power,
            parallelism: self.train.parallelism,
        }
    }

    /// Model for samples of shape `(seq_len, input_dim)`.
    pub fn model_config(&self, seq_len: usize, input_dim: usize) -> ModelConfig {
        ModelConfig {
            seq_len,
            input_dim,
            bi_units: self.bi_units,
            lstm_units: self.lstm_units.clone(),
            dropout: self.dropout.clone(),
            dense_units: self.dense_units.clone(),
            ..ModelConfig::default()
        }
    }

    pub fn value_of(&self, key: &str) -> String {
        let t = &self.train;
        match key {
            "channels" => self.channels.to_string(),
            "bands" => self.bands.to_string(),
            "window_len" => self.window.window_len.to_string(),
            "hop" => self.window.hop.to_string(),
            "sample_rate" => self.sample_rate.to_string(),
            "allow_rate_mismatch" => self.allow_rate_mismatch.to_string(),
            "log_power" => self.log_power.to_string(),
            "sequence_mode" => self.sequence_mode.to_string(),
            "split_unit" => self.split_unit.to_string(),
            "train_fraction" => self.train_fraction.to_string(),
            "split_seed" => self.split_seed.to_string(),
            "bi_units" => self.bi_units.to_string(),
            "lstm_units" => join_list(&self.lstm_units),
            "dropout" => join_list(&self.dropout),
            "dense_units" => join_list(&self.dense_units),
            "init_seed" => t.init_seed.to_string(),
            "label_dim" => t.label_dim.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "epochs" => t.epochs.to_string(),
            "lr" => t.adam.lr.to_string(),
            "beta1" => t.adam.beta1.to_string(),
            "beta2" => t.adam.beta2.to_string(),
            "eps" => t.adam.eps.to_string(),
            "shuffle_seed" => t.shuffle_seed.to_string(),
            "dropout_seed" => t.dropout_seed.to_string(),
            "patience" => t.patience.unwrap_or(0).to_string(),
            "eval_every" => t.eval_every.to_string(),
            "final_epoch" => t.final_epoch.to_string(),
            "clip_norm" => t.clip_norm.unwrap_or(0.0).to_string(),
            "vote_per_trial" => self.vote_per_trial.to_string(),
            "parallel" => t.parallelism.to_string(),
            "threads" => self.threads.to_string(),
            other => unreachable!("unlisted key {other}"),
        }
    }

    pub fn to_ini(&self) -> String {
        let mut s = String::from("# effective run configuration\n");
        for key in KEYS {
            s.push_str(&format!("{key} = {}\n", self.value_of(key)));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_model::LabelDim;
    use crate::par::Parallelism;

    #[test]
    fn defaults_roundtrip() {
        let cfg = RunConfig::default();
        let text = cfg.to_ini();
        assert_eq!(RunConfig::from_ini(&text).unwrap(), cfg);
        for key in KEYS {
            assert!(text.contains(&format!("\n{key} = ")), "{key}");
        }
    }

    #[test]
    fn overrides_roundtrip() {
        let text = "channels = 0,1,2\nsequence_mode = window_as_steps:8\nlabel_dim = liking\n\
                    patience = 3\nclip_norm = 1.5\nparallel = false\nlr = 0.0025\nsplit_unit = trial\n";
        let cfg = RunConfig::from_ini(text).unwrap();
        assert_eq!(cfg.channels.indices(), &[0, 1, 2]);
        assert_eq!(cfg.sequence_mode, SequenceMode::WindowAsSteps(8));
        assert_eq!(cfg.train.label_dim, LabelDim::Liking);
        assert_eq!(cfg.train.patience, Some(3));
        assert_eq!(cfg.train.clip_norm, Some(1.5));
        assert_eq!(cfg.train.parallelism, Parallelism::Serial);
        assert_eq!(RunConfig::from_ini(&cfg.to_ini()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "colour = red\n",
            "label_dim = happiness\n",
            "channels = 1,2,2\n",
            "train_fraction = 1.0\n",
            "dropout = 0.5\n",
            "batch_size = 0\n",
            "hop = x\n",
        ] {
            assert!(matches!(RunConfig::from_ini(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
