//! Library side of the `sqdr` command line. Each `cmd_*` function does the
//! whole job of one subcommand and returns what the binary prints, so the
//! binary only parses flags, prints and maps errors to exit codes.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration or usage error,
//! 3 data error (audio, dataset, checkpoint), 4 numeric abort.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::checkpoint::{self, TrainMeta};
use crate::config::{DataSource, RunConfig};
use crate::error::{Error, Result};
use crate::frontend;
use crate::metrics::{self, EvalOptions};
use crate::model::VadModel;
use crate::rng;
use crate::signal::{self, SnrMixSpec};
use crate::trainer;

pub const THREADS_ENV: &str = "SQDR_THREADS";
/// Noise clips generated when an SNR sweep has no `--noise-dir`.
pub const SYNTH_NOISE_CLIPS: usize = 16;
pub const RESPONSE_FFT: usize = 4096;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ConfigParse { .. } | Error::InvalidConfig(_) | Error::InvalidArgument(_) => 2,
        Error::NotAWav { .. }
        | Error::UnsupportedEncoding { .. }
        | Error::TruncatedFile { .. }
        | Error::Io { .. }
        | Error::SampleRateMismatch { .. }
        | Error::ZeroEnergy { .. }
        | Error::ClipTooShort { .. }
        | Error::BadMagic(_)
        | Error::VersionMismatch { .. }
        | Error::Truncated(_)
        | Error::Corrupt(_)
        | Error::Data(_)
        | Error::Empty(_)
        | Error::SingleClass => 3,
        Error::NumericAbort(_) => 4,
        _ => 1,
    }
}

/// Worker threads from `SQDR_THREADS` (default 1).
pub fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::InvalidArgument(format!("{THREADS_ENV}={v} is not a positive integer"))),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_auroc: f64,
    pub single_class: bool,
    pub degenerate_batches: usize,
}

/// Trains from a config file; writes `best.sqdr`, `final.sqdr` and
/// `trainlog.csv` into `out_dir`.
pub fn cmd_train(config_path: &Path, out_dir: &Path, threads: usize) -> Result<TrainSummary> {
    let run = RunConfig::from_file(config_path)?;
    let mut cfg = run.train;
    cfg.threads = threads;
    let train_set = run.data_train.load(run.seed, "data.train")?;
    let val_set = run.data_val.load(run.seed, "data.val")?;
    let out = trainer::train(&train_set, &val_set, run.model, &cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    checkpoint::save(
        &out.best,
        TrainMeta { epoch: out.best_epoch as u64, seed: run.seed },
        false,
        out_dir.join("best.sqdr"),
    )?;
    checkpoint::save(
        &out.last,
        TrainMeta { epoch: (cfg.epochs - 1) as u64, seed: run.seed },
        true,
        out_dir.join("final.sqdr"),
    )?;
    let log_path = out_dir.join("trainlog.csv");
    fs::write(&log_path, out.log.to_csv()).map_err(|e| Error::io(&log_path, e))?;
    Ok(TrainSummary {
        epochs: cfg.epochs,
        best_epoch: out.best_epoch,
        best_val_auroc: out.log.records[out.best_epoch].val_auroc,
        single_class: out.single_class,
        degenerate_batches: out.log.degenerate_batches,
    })
}

fn load_model(path: &Path) -> Result<VadModel> {
    Ok(checkpoint::load(path)?.model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    /// Dataset directory or a `synthetic:n=..,speech_frac=..[,seed=..]` spec.
    pub dataset: String,
    pub options: EvalOptions,
    pub snr_sweep: Option<Vec<f64>>,
    pub noise_dir: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub seed: u64,
}

pub fn parse_snr_list(text: &str) -> Result<Vec<f64>> {
    let list: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidArgument(format!("bad SNR value '{}'", s.trim())))
        })
        .collect::<Result<_>>()?;
    if list.is_empty() {
        return Err(Error::InvalidArgument("empty SNR list".into()));
    }
    Ok(list)
}

/// Returns the report JSON (pretty-printed, newline-terminated); writes the
/// CSV table when `args.csv` is set.
pub fn cmd_eval(args: &EvalArgs) -> Result<String> {
    let model = load_model(&args.checkpoint)?;
    let source = DataSource::parse(&args.dataset, Path::new(".")).map_err(Error::InvalidArgument)?;
    let clips = source.load(args.seed, "eval")?;
    let report = match &args.snr_sweep {
        None => trainer::evaluate(&model, &clips, &args.options)?,
        Some(snrs) => {
            let noise = match &args.noise_dir {
                Some(dir) => signal::load_wav_dir(dir)?,
                None => signal::synth_noise_bank(rng::derive_seed(args.seed, "eval-noise", &[]), SYNTH_NOISE_CLIPS)?,
            };
            metrics::snr_sweep(&model, &clips, &noise, snrs, &args.options, args.seed)?
        }
    };
    if let Some(path) = &args.csv {
        fs::write(path, report.to_csv()).map_err(|e| Error::io(path, e))?;
    }
    let mut json = serde_json::to_string_pretty(&report.to_json()).expect("report serializes");
    json.push('\n');
    Ok(json)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferArgs {
    pub checkpoint: PathBuf,
    pub wav: PathBuf,
    pub options: EvalOptions,
}

/// TSV rows `offset_s<TAB>score<TAB>decision`, one per window.
pub fn cmd_infer(args: &InferArgs) -> Result<String> {
    let model = load_model(&args.checkpoint)?;
    let clip = signal::read_wav(&args.wav)?;
    infer_clip(&model, &clip, &args.options)
}

pub fn infer_clip(model: &VadModel, clip: &signal::AudioClip, opts: &EvalOptions) -> Result<String> {
    let windows = model.predict_windows(clip, opts.window_s, opts.stride_s)?;
    let raw: Vec<f64> = windows.iter().map(|w| w.1).collect();
    let scores = if opts.smooth { metrics::median_smooth(&raw) } else { raw };
    let mut out = String::new();
    for ((offset, _), s) in windows.iter().zip(&scores) {
        let decision = u8::from(*s >= opts.threshold);
        writeln!(out, "{offset:.3}\t{s:.6}\t{decision}").expect("string write");
    }
    Ok(out)
}

pub fn cmd_mix(speech: &Path, noise: &Path, snr_db: f64, seed: u64, out: &Path) -> Result<()> {
    let s = signal::read_wav(speech)?;
    let n = signal::read_wav(noise)?;
    let mixed = signal::mix_at_snr(&s, &n, SnrMixSpec { snr_db, seed })?;
    signal::write_wav(&mixed, out)
}

pub fn cmd_synth(n: usize, seed: u64, speech_frac: f64, out_dir: &Path) -> Result<()> {
    let clips = signal::synth_dataset(seed, n, speech_frac)?;
    signal::export_dataset(&clips, out_dir)
}

/// Writes `<prefix>_params.csv` (index,f_low_hz,f_high_hz,gain) and
/// `<prefix>_response.csv` (index,freq_hz,mag_db on the one-sided
/// 4096-point grid).
pub fn cmd_inspect_filters(checkpoint_path: &Path, prefix: &Path) -> Result<(PathBuf, PathBuf)> {
    let model = load_model(checkpoint_path)?;
    let mut params = String::from("index,f_low_hz,f_high_hz,gain\n");
    for (i, (lo, hi, g)) in model.filter_table().iter().enumerate() {
        writeln!(params, "{i},{lo:.6},{hi:.6},{g:.9}").expect("string write");
    }
    let (freqs, db) = frontend::magnitude_response(&model.sinc, model.frontend_config(), RESPONSE_FFT);
    let mut resp = String::from("index,freq_hz,mag_db\n");
    for i in 0..db.nrows() {
        for (k, f) in freqs.iter().enumerate() {
            writeln!(resp, "{i},{f:.4},{:.4}", db[[i, k]]).expect("string write");
        }
    }
    let with_suffix = |s: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(s);
        PathBuf::from(p)
    };
    let (pp, rp) = (with_suffix("_params.csv"), with_suffix("_response.csv"));
    fs::write(&pp, params).map_err(|e| Error::io(&pp, e))?;
    fs::write(&rp, resp).map_err(|e| Error::io(&rp, e))?;
    Ok((pp, rp))
}
