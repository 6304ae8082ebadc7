//! Deterministic training loop.
//!
//! Every random choice (shuffle order, crop offset, shift, noise level and
//! noise samples) comes from a stream keyed by `(seed, epoch, clip index)`,
//! and per-sample front-end gradients are summed in batch order, so a run
//! is bitwise reproducible for any worker-thread count.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::frontend::{self, FeatureMap, FrontendCache, SincGrads};
use crate::loss::{self, LossConfig, ScoreBatch};
use crate::metrics::{self, EvalOptions, EvalReport};
use crate::model::{self, ModelConfig, VadModel};
use crate::nn::{sgd_step, BnMode, LrSchedule, SgdConfig};
use crate::rng;
use crate::signal::{self, AudioClip, LabeledClip};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub peak_lr: f64,
    pub warmup_frac: f64,
    pub hold_frac: f64,
    pub decay_power: f64,
    pub sgd: SgdConfig,
    pub loss: LossConfig,
    pub shift_prob: f64,
    /// Shifts are drawn uniformly from `[-shift_ms, shift_ms]`.
    pub shift_ms: f64,
    pub noise_db_range: (f64, f64),
    pub window_s: f64,
    pub seed: u64,
    pub threads: usize,
    /// Write wall-clock seconds into the log; off keeps logs byte-reproducible.
    pub log_wall_time: bool,
    pub eval: EvalOptions,
    /// Test hook: discard the data gradients before every step, leaving
    /// only weight decay to move the parameters.
    pub zero_data_grads: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 150,
            batch_size: 32,
            peak_lr: 0.01,
            warmup_frac: 0.05,
            hold_frac: 0.45,
            decay_power: 2.0,
            sgd: SgdConfig::default(),
            loss: LossConfig::default(),
            shift_prob: 0.8,
            shift_ms: 5.0,
            noise_db_range: (-90.0, -46.0),
            window_s: 0.63,
            seed: 0,
            threads: 1,
            log_wall_time: false,
            eval: EvalOptions::default(),
            zero_data_grads: false,
        }
    }
}

impl TrainConfig {
    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            peak_lr: self.peak_lr,
            total_epochs: self.epochs,
            warmup_frac: self.warmup_frac,
            hold_frac: self.hold_frac,
            decay_power: self.decay_power,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.shift_prob) {
            return bad(format!("shift_prob {} outside [0, 1]", self.shift_prob));
        }
        if self.shift_ms < 0.0 || self.noise_db_range.0 > self.noise_db_range.1 {
            return bad("shift_ms must be >= 0 and noise_db_range ordered".into());
        }
        if !(self.window_s > 0.0) || self.threads == 0 {
            return bad("window_s must be > 0 and threads >= 1".into());
        }
        self.loss.validate()?;
        self.schedule().validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub total: f64,
    pub bce: f64,
    pub qdr: f64,
    pub val_auroc: f64,
    pub val_f2: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    /// Losses of every batch, in order.
    pub batch_losses: Vec<f64>,
    /// Batches whose ranking term had no (speech, non-speech) pair.
    pub degenerate_batches: usize,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,total,bce,qdr,val_auroc,val_f2,seconds\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:e},{:.12e},{:.12e},{:.12e},{:.9},{:.9},{:.3}\n",
                r.epoch, r.lr, r.total, r.bce, r.qdr, r.val_auroc, r.val_f2, r.seconds
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best: VadModel,
    pub best_epoch: usize,
    pub last: VadModel,
    pub log: TrainLog,
    /// The training set holds a single class; the ranking term never applied.
    pub single_class: bool,
}

/// Training crop for a clip: speech clips start at their active region,
/// others at a seeded offset.
pub fn crop_window(clip: &LabeledClip, window: usize, rng: &mut rng::Rng) -> Result<Vec<f64>> {
    let len = clip.clip.len();
    if len < window {
        return Err(Error::Data(format!(
            "clip of {len} samples shorter than the {window}-sample training window"
        )));
    }
    let start = match clip.active {
        Some((a, _)) => signal::seconds_to_samples(a, clip.clip.sample_rate).min(len - window),
        None => rng.gen_range(0..=len - window),
    };
    Ok(clip.clip.samples[start..start + window].to_vec())
}

/// Random time shift (with probability `shift_prob`) followed by white noise
/// at a level drawn from `noise_db_range`.
pub fn augment(samples: Vec<f64>, sample_rate: u32, cfg: &TrainConfig, rng: &mut rng::Rng) -> Result<AudioClip> {
    let mut clip = AudioClip::new(samples, sample_rate)?;
    if rng.gen::<f64>() < cfg.shift_prob {
        let shift = rng.gen_range(-cfg.shift_ms..=cfg.shift_ms);
        clip = signal::apply_time_shift(&clip, shift);
    }
    let (lo, hi) = cfg.noise_db_range;
    let level = rng.gen_range(lo..=hi);
    let noise_seed = rng.gen::<u64>();
    if clip.peak() > 0.0 {
        clip = signal::add_white_noise(&clip, level, noise_seed)?;
    }
    Ok(clip)
}

struct Prepared {
    features: FeatureMap,
    cache: FrontendCache,
}

fn prepare(model: &VadModel, clip: &LabeledClip, idx: usize, epoch: usize, cfg: &TrainConfig) -> Result<Prepared> {
    let fc = model.frontend_config();
    let window = signal::seconds_to_samples(cfg.window_s, fc.sample_rate);
    let mut r = rng::stream(cfg.seed, "train-sample", &[epoch as u64, idx as u64]);
    let crop = crop_window(clip, window, &mut r)?;
    let aug = augment(crop, fc.sample_rate, cfg, &mut r)?;
    let frames = frontend::frame_signal(&aug, fc)?;
    let (features, cache) = frontend::extract_cached(&model.sinc, &frames, fc)?;
    Ok(Prepared { features, cache })
}

fn check_dataset(set: &[LabeledClip], what: &str, sample_rate: u32) -> Result<()> {
    if set.is_empty() {
        return Err(Error::Data(format!("{what} set is empty")));
    }
    if let Some(c) = set.iter().find(|c| c.clip.sample_rate != sample_rate) {
        return Err(Error::Data(format!(
            "{what} set has a {} Hz clip; model expects {sample_rate} Hz",
            c.clip.sample_rate
        )));
    }
    Ok(())
}

fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))
}

/// Trains a fresh model built from `model_cfg` with seed `cfg.seed`.
pub fn train(train_set: &[LabeledClip], val_set: &[LabeledClip], model_cfg: ModelConfig, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let model = VadModel::build(model_cfg, rng::derive_seed(cfg.seed, "model", &[]))?;
    train_model(model, train_set, val_set, cfg)
}

/// Trains `model` in place from its current parameters.
pub fn train_model(mut model: VadModel, train_set: &[LabeledClip], val_set: &[LabeledClip], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let sr = model.frontend_config().sample_rate;
    check_dataset(train_set, "training", sr)?;
    check_dataset(val_set, "validation", sr)?;
    let n_pos = train_set.iter().filter(|c| c.active.is_some()).count();
    let single_class = n_pos == 0 || n_pos == train_set.len();
    let pool = thread_pool(cfg.threads)?;
    let schedule = cfg.schedule();
    let fc = *model.frontend_config();
    let mut log = TrainLog::default();
    let mut best: Option<(f64, usize, VadModel)> = None;

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let lr = schedule.lr_for_epoch(epoch)?;
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng::stream(cfg.seed, "shuffle", &[epoch as u64]));
        let (mut sum_total, mut sum_bce, mut sum_qdr, mut n_batches) = (0.0, 0.0, 0.0, 0usize);

        for batch in order.chunks(cfg.batch_size) {
            let prepared: Vec<Prepared> = pool.install(|| {
                batch
                    .par_iter()
                    .map(|&i| prepare(&model, &train_set[i], i, epoch, cfg))
                    .collect::<Result<_>>()
            })?;
            let labels: Vec<u8> = batch.iter().map(|&i| train_set[i].label()).collect();
            let feats: Vec<FeatureMap> = prepared.iter().map(|p| p.features.clone()).collect();
            let input = model.input_tensor(&feats)?;
            let probs = model.forward_train(&input, BnMode::Train)?;
            let sb = ScoreBatch::new(&probs, &labels)?;
            let parts = loss::total_loss(&sb, &cfg.loss)?;
            if !parts.total.is_finite() {
                return Err(Error::NumericAbort(format!(
                    "loss {} at epoch {epoch}, batch {n_batches}",
                    parts.total
                )));
            }
            if parts.qdr_degenerate {
                log.degenerate_batches += 1;
            }
            let dprobs = loss::loss_backward(&sb, &cfg.loss)?;
            let dinput = model.backward(&dprobs)?;
            let upstream = model::unpad_input_grad(&dinput, feats[0].n_frames())?;
            let sinc = &model.sinc;
            let grads: Vec<SincGrads> = pool.install(|| {
                prepared
                    .par_iter()
                    .zip(upstream.par_iter())
                    .map(|(p, up)| frontend::extract_backward_cached(sinc, &p.cache, &fc, up))
                    .collect::<Result<_>>()
            })?;
            let mut total = SincGrads::zeros(fc.n_filters);
            for g in &grads {
                total.add_assign(g);
            }
            total.accumulate_into(&mut model.sinc);
            if model.params().iter().any(|p| !p.grad.all_finite()) {
                return Err(Error::NumericAbort(format!(
                    "non-finite gradient at epoch {epoch}, batch {n_batches}"
                )));
            }
            if cfg.zero_data_grads {
                model.zero_grad();
            }
            sgd_step(model.params_mut(), lr, cfg.sgd);
            log.batch_losses.push(parts.total);
            sum_total += parts.total;
            sum_bce += parts.bce;
            sum_qdr += parts.qdr;
            n_batches += 1;
        }

        let report = metrics::evaluate_clips(&model, val_set, &cfg.eval, "validation")
            .or_else(|e| match e {
                Error::SingleClass => Ok(EvalReport {
                    auroc: f64::NAN,
                    f2: f64::NAN,
                    threshold: cfg.eval.threshold,
                    n_pos: 0,
                    n_neg: 0,
                    conditions: Vec::new(),
                }),
                other => Err(other),
            })?;
        let nb = n_batches as f64;
        log.records.push(EpochRecord {
            epoch,
            lr,
            total: sum_total / nb,
            bce: sum_bce / nb,
            qdr: sum_qdr / nb,
            val_auroc: report.auroc,
            val_f2: report.f2,
            seconds: if cfg.log_wall_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
        let improved = match &best {
            None => true,
            Some((a, _, _)) => report.auroc > *a,
        };
        if improved {
            best = Some((report.auroc, epoch, model.clone()));
        }
    }
    let (_, best_epoch, best) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best,
        best_epoch,
        last: model,
        log,
        single_class,
    })
}

/// Eval-mode scoring of `set`, optionally median-smoothed per clip.
pub fn evaluate(model: &VadModel, set: &[LabeledClip], opts: &EvalOptions) -> Result<EvalReport> {
    metrics::evaluate_clips(model, set, opts, if opts.smooth { "smoothed" } else { "raw" })
}
