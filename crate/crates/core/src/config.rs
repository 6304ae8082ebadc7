//! Run configuration: line-oriented `section.key = value` text.
//!
//! ```text
//! # comments start with '#'
//! seed = 7
//! model.channels = 48
//! train.epochs = 20
//! data.train = synthetic:n=256,speech_frac=0.5
//! data.val = ./val_clips
//! ```
//!
//! Unknown keys, repeated keys and unparsable values are rejected with the
//! line number. Relative dataset paths resolve against the config file's
//! directory.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::rng;
use crate::signal::{self, LabeledClip};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Dir(PathBuf),
    Synthetic { n: usize, speech_frac: f64, seed: Option<u64> },
}

impl DataSource {
    pub fn parse(value: &str, base: &Path) -> std::result::Result<Self, String> {
        let Some(spec) = value.strip_prefix("synthetic:") else {
            let p = PathBuf::from(value);
            return Ok(DataSource::Dir(if p.is_relative() { base.join(p) } else { p }));
        };
        let (mut n, mut frac, mut seed) = (None, 0.5, None);
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value in synthetic spec, got '{part}'"))?;
            match k.trim() {
                "n" => n = Some(parse_value::<usize>(v)?),
                "speech_frac" => frac = parse_value::<f64>(v)?,
                "seed" => seed = Some(parse_value::<u64>(v)?),
                other => return Err(format!("unknown synthetic option '{other}'")),
            }
        }
        let n = n.ok_or("synthetic spec needs n=<count>")?;
        Ok(DataSource::Synthetic { n, speech_frac: frac, seed })
    }

    /// Loads or generates the clips. `purpose` keys the synthetic seed so
    /// train and validation sets differ under one run seed.
    pub fn load(&self, run_seed: u64, purpose: &str) -> Result<Vec<LabeledClip>> {
        match self {
            DataSource::Dir(dir) => signal::load_dataset(dir),
            DataSource::Synthetic { n, speech_frac, seed } => {
                let s = seed.unwrap_or_else(|| rng::derive_seed(run_seed, purpose, &[]));
                signal::synth_dataset(s, *n, *speech_frac)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data_train: DataSource,
    pub data_val: DataSource,
}

/// Every accepted key, in documentation order.
pub const KEYS: &[&str] = &[
    "seed",
    "frontend.n_filters",
    "frontend.half_len",
    "frontend.frame_len",
    "frontend.hop_len",
    "frontend.sample_rate",
    "frontend.log_floor",
    "model.channels",
    "model.n_encoders",
    "model.patch",
    "model.groups",
    "train.epochs",
    "train.batch_size",
    "train.peak_lr",
    "train.warmup_frac",
    "train.hold_frac",
    "train.decay_power",
    "train.momentum",
    "train.weight_decay",
    "train.shift_prob",
    "train.shift_ms",
    "train.noise_db_min",
    "train.noise_db_max",
    "train.window_s",
    "train.log_wall_time",
    "loss.margin",
    "loss.lambda",
    "eval.stride_s",
    "eval.smooth",
    "eval.threshold",
    "data.train",
    "data.val",
];

fn parse_value<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse::<T>()
        .map_err(|e| format!("cannot parse '{}': {e}", v.trim()))
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigParse {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Parses config text; `origin` names the source in errors.
    pub fn parse(text: &str, origin: &str, base: &Path) -> Result<Self> {
        let mut model = ModelConfig::default();
        let mut train = TrainConfig::default();
        let mut seed = 0u64;
        let (mut data_train, mut data_val) = (None, None);
        let mut seen: Vec<&str> = Vec::new();
        let fail = |line: usize, message: String| Error::ConfigParse {
            path: origin.to_string(),
            line,
            message,
        };

        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(lineno, format!("expected 'key = value', got '{line}'")))?;
            let key = key.trim();
            let value = value.trim();
            let known = KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| fail(lineno, format!("unknown key '{key}'")))?;
            if seen.contains(known) {
                return Err(fail(lineno, format!("duplicate key '{key}'")));
            }
            seen.push(known);
            let fe = &mut model.frontend;
            let r: std::result::Result<(), String> = (|| {
                match key {
                    "seed" => seed = parse_value(value)?,
                    "frontend.n_filters" => fe.n_filters = parse_value(value)?,
                    "frontend.half_len" => fe.half_len = parse_value(value)?,
                    "frontend.frame_len" => fe.frame_len = parse_value(value)?,
                    "frontend.hop_len" => fe.hop_len = parse_value(value)?,
                    "frontend.sample_rate" => fe.sample_rate = parse_value(value)?,
                    "frontend.log_floor" => fe.log_floor = parse_value(value)?,
                    "model.channels" => model.channels = parse_value(value)?,
                    "model.n_encoders" => model.n_encoders = parse_value(value)?,
                    "model.patch" => model.patch = parse_value(value)?,
                    "model.groups" => model.groups = parse_value(value)?,
                    "train.epochs" => train.epochs = parse_value(value)?,
                    "train.batch_size" => train.batch_size = parse_value(value)?,
                    "train.peak_lr" => train.peak_lr = parse_value(value)?,
                    "train.warmup_frac" => train.warmup_frac = parse_value(value)?,
                    "train.hold_frac" => train.hold_frac = parse_value(value)?,
                    "train.decay_power" => train.decay_power = parse_value(value)?,
                    "train.momentum" => train.sgd.momentum = parse_value(value)?,
                    "train.weight_decay" => train.sgd.weight_decay = parse_value(value)?,
                    "train.shift_prob" => train.shift_prob = parse_value(value)?,
                    "train.shift_ms" => train.shift_ms = parse_value(value)?,
                    "train.noise_db_min" => train.noise_db_range.0 = parse_value(value)?,
                    "train.noise_db_max" => train.noise_db_range.1 = parse_value(value)?,
                    "train.window_s" => train.window_s = parse_value(value)?,
                    "train.log_wall_time" => train.log_wall_time = parse_value(value)?,
                    "loss.margin" => train.loss.margin = parse_value(value)?,
                    "loss.lambda" => train.loss.lambda = parse_value(value)?,
                    "eval.stride_s" => train.eval.stride_s = parse_value(value)?,
                    "eval.smooth" => train.eval.smooth = parse_value(value)?,
                    "eval.threshold" => train.eval.threshold = parse_value(value)?,
                    "data.train" => data_train = Some(DataSource::parse(value, base)?),
                    "data.val" => data_val = Some(DataSource::parse(value, base)?),
                    _ => unreachable!("key list and match arms agree"),
                }
                Ok(())
            })();
            r.map_err(|m| fail(lineno, format!("{key}: {m}")))?;
        }

        train.seed = seed;
        train.eval.window_s = train.window_s;
        let whole = |e: Error| fail(0, e.to_string());
        model.validate().map_err(whole)?;
        train.validate().map_err(whole)?;
        let data_train = data_train.ok_or_else(|| fail(0, "missing key 'data.train'".into()))?;
        let data_val = data_val.ok_or_else(|| fail(0, "missing key 'data.val'".into()))?;
        Ok(RunConfig {
            seed,
            model,
            train,
            data_train,
            data_val,
        })
    }
}
