//! Waveform I/O, noise mixing, augmentation, windowing and the synthetic
//! desk-scale dataset.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader, ErrorKind};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

/// Start and end (seconds) of the active-speech region in a 1 s clip.
pub const ACTIVE_REGION: (f64, f64) = (0.2, 0.83);

pub const MANIFEST_NAME: &str = "manifest.tsv";

/// Mono waveform with nominal amplitude range [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample_rate must be > 0".into()));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }
}

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// A clip together with its (optional) active-speech interval in seconds.
/// Clips without an interval are non-speech.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub clip: AudioClip,
    pub active: Option<(f64, f64)>,
}

impl LabeledClip {
    pub fn label(&self) -> u8 {
        u8::from(self.active.is_some())
    }

    /// Label of the window `[offset, offset + len)`: speech when at least
    /// half of the window overlaps the active interval.
    pub fn window_label(&self, offset_s: f64, window_s: f64) -> u8 {
        match self.active {
            Some((a, b)) => {
                let overlap = (offset_s + window_s).min(b) - offset_s.max(a);
                u8::from(overlap >= 0.5 * window_s)
            }
            None => 0,
        }
    }
}

/// An unlabeled segment cut from a longer clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<f64>,
    pub start: usize,
    pub source_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow {
    pub samples: Vec<f64>,
    pub label: u8,
    pub source_offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrMixSpec {
    pub snr_db: f64,
    pub seed: u64,
}

fn map_hound(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e)
            if e.kind() == ErrorKind::UnexpectedEof || e.to_string().contains("read enough bytes") =>
        {
            Error::TruncatedFile {
                path: path.to_path_buf(),
                detail: e.to_string(),
            }
        }
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::FormatError(reason) => Error::NotAWav {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        },
        hound::Error::Unsupported => Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            property: "format not supported by the decoder".into(),
        },
        other => Error::NotAWav {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

/// Reads a 16-bit PCM mono WAV file, scaling samples by 1/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            property: format!("{}-bit float samples", spec.bits_per_sample),
        });
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            property: format!("{}-bit samples", spec.bits_per_sample),
        });
    }
    if spec.channels != 1 {
        return Err(Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            property: format!("{} channels", spec.channels),
        });
    }
    let expected = reader.len() as usize;
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| map_hound(path, e))?;
    if samples.len() != expected {
        return Err(Error::TruncatedFile {
            path: path.to_path_buf(),
            detail: format!("header declares {expected} samples, found {}", samples.len()),
        });
    }
    AudioClip::new(samples, spec.sample_rate)
}

/// Maps a sample to 16-bit PCM, clamping out-of-range values.
pub fn quantize(sample: f64) -> i16 {
    (sample * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for &s in &clip.samples {
        writer.write_sample(quantize(s)).map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

/// Picks `len` noise samples starting at a seeded offset, tiling the noise
/// end-to-end when it is shorter than `len`.
fn crop_noise(noise: &[f64], len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, "mix-offset", &[]);
    if noise.len() >= len {
        let offset = rng.gen_range(0..=noise.len() - len);
        noise[offset..offset + len].to_vec()
    } else {
        let offset = rng.gen_range(0..noise.len());
        (0..len).map(|k| noise[(offset + k) % noise.len()]).collect()
    }
}

/// Gain applied to the noise crop so that the mixture has the requested SNR.
pub fn snr_gain(speech_rms: f64, noise_rms: f64, snr_db: f64) -> f64 {
    speech_rms / noise_rms * 10f64.powf(-snr_db / 20.0)
}

/// Adds `noise` to `speech` scaled to `spec.snr_db` (RMS-based).
pub fn mix_at_snr(speech: &AudioClip, noise: &AudioClip, spec: SnrMixSpec) -> Result<AudioClip> {
    if speech.sample_rate != noise.sample_rate {
        return Err(Error::SampleRateMismatch {
            left: speech.sample_rate,
            right: noise.sample_rate,
        });
    }
    if !spec.snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("snr_db = {}", spec.snr_db)));
    }
    let s_rms = speech.rms();
    if s_rms == 0.0 {
        return Err(Error::ZeroEnergy { which: "speech" });
    }
    if noise.is_empty() {
        return Err(Error::ZeroEnergy { which: "noise" });
    }
    let crop = crop_noise(&noise.samples, speech.len(), spec.seed);
    let n_rms = rms(&crop);
    if n_rms == 0.0 {
        return Err(Error::ZeroEnergy { which: "noise" });
    }
    let g = snr_gain(s_rms, n_rms, spec.snr_db);
    let samples = speech
        .samples
        .iter()
        .zip(&crop)
        .map(|(s, n)| s + g * n)
        .collect();
    AudioClip::new(samples, speech.sample_rate)
}

/// Shifts samples by `round(shift_ms * sr / 1000)` positions (positive is a
/// delay), zero-filling vacated positions.
pub fn apply_time_shift(clip: &AudioClip, shift_ms: f64) -> AudioClip {
    let shift = (shift_ms * f64::from(clip.sample_rate) / 1000.0).round() as i64;
    let n = clip.len() as i64;
    let samples = (0..n)
        .map(|i| {
            let src = i - shift;
            if (0..n).contains(&src) {
                clip.samples[src as usize]
            } else {
                0.0
            }
        })
        .collect();
    AudioClip {
        samples,
        sample_rate: clip.sample_rate,
    }
}

/// Amplitude of the white noise added at `level_db` relative to `peak`.
pub fn white_noise_amplitude(peak: f64, level_db: f64) -> f64 {
    peak * 10f64.powf(level_db / 20.0)
}

/// Adds uniform white noise in `[-a, a]`, `a = peak * 10^(level_db / 20)`.
pub fn add_white_noise(clip: &AudioClip, level_db: f64, seed: u64) -> Result<AudioClip> {
    let peak = clip.peak();
    if peak == 0.0 {
        return Err(Error::ZeroEnergy { which: "clip (zero peak)" });
    }
    let a = white_noise_amplitude(peak, level_db);
    let mut rng = rng::stream(seed, "white-noise", &[]);
    let samples = clip
        .samples
        .iter()
        .map(|s| s + a * rng.gen_range(-1.0..=1.0))
        .collect();
    Ok(AudioClip {
        samples,
        sample_rate: clip.sample_rate,
    })
}

pub fn seconds_to_samples(seconds: f64, sample_rate: u32) -> usize {
    (seconds * f64::from(sample_rate)).round() as usize
}

/// Number of windows [`window_stream`] produces for the given lengths in samples.
pub fn window_count(len: usize, window: usize, stride: usize) -> usize {
    if window > len || stride == 0 {
        0
    } else {
        (len - window) / stride + 1
    }
}

/// Cuts `clip` into windows of `window_s` every `stride_s`; a trailing
/// partial window is dropped.
pub fn window_stream(clip: &AudioClip, window_s: f64, stride_s: f64) -> Result<Vec<Segment>> {
    let window = seconds_to_samples(window_s, clip.sample_rate);
    let stride = seconds_to_samples(stride_s, clip.sample_rate);
    if window == 0 || stride == 0 {
        return Err(Error::InvalidArgument(format!(
            "window ({window_s} s) and stride ({stride_s} s) must be at least one sample"
        )));
    }
    if window > clip.len() {
        return Err(Error::ClipTooShort {
            len: clip.len(),
            needed: window,
        });
    }
    let sr = f64::from(clip.sample_rate);
    Ok((0..window_count(clip.len(), window, stride))
        .map(|k| {
            let start = k * stride;
            Segment {
                samples: clip.samples[start..start + window].to_vec(),
                start,
                source_offset: start as f64 / sr,
            }
        })
        .collect())
}

pub const SYNTH_SAMPLE_RATE: u32 = 16_000;

/// One-pole low-passed noise; `color` in [0, 1) moves from white towards brown.
fn colored_noise(rng: &mut rng::Rng, n: usize, color: f64) -> Vec<f64> {
    let mut state = 0.0;
    let raw: Vec<f64> = (0..n)
        .map(|_| {
            state = color * state + (1.0 - color) * rng.gen_range(-1.0..=1.0);
            state
        })
        .collect();
    let r = rms(&raw).max(1e-12);
    raw.into_iter().map(|v| v / r).collect()
}

fn raised_cosine_gate(t: f64, start: f64, end: f64, ramp: f64) -> f64 {
    if t < start || t > end {
        0.0
    } else if t < start + ramp {
        0.5 - 0.5 * (PI * (t - start) / ramp).cos()
    } else if t > end - ramp {
        0.5 - 0.5 * (PI * (end - t) / ramp).cos()
    } else {
        1.0
    }
}

fn synth_speech(rng: &mut rng::Rng, n: usize, sr: f64) -> Vec<f64> {
    let f0 = rng.gen_range(100.0..300.0);
    let glide = rng.gen_range(-0.1..0.1);
    let n_harm = rng.gen_range(2..=5);
    let amps: Vec<f64> = (1..=n_harm).map(|h| rng.gen_range(0.5..1.0) / h as f64).collect();
    let phases: Vec<f64> = (0..n_harm).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let am_phase = rng.gen_range(0.0..2.0 * PI);
    let level = rng.gen_range(0.1..0.6);
    let floor = rng.gen_range(0.002..0.02);
    let floor_color = rng.gen_range(0.0..0.9);
    let noise = colored_noise(rng, n, floor_color);
    let (a, b) = ACTIVE_REGION;
    let mut phase = 0.0;
    let mut out = Vec::with_capacity(n);
    for (k, noise_k) in noise.iter().enumerate() {
        let t = k as f64 / sr;
        let f = f0 * (1.0 + glide * (t - a) / (b - a));
        phase += 2.0 * PI * f / sr;
        let voiced: f64 = amps
            .iter()
            .zip(&phases)
            .enumerate()
            .map(|(h, (amp, ph))| amp * ((h + 1) as f64 * phase + ph).sin())
            .sum();
        let envelope = 0.6 + 0.4 * (2.0 * PI * 4.0 * t + am_phase).sin();
        let gate = raised_cosine_gate(t, a, b, 0.01);
        out.push(level * gate * envelope * voiced + floor * noise_k);
    }
    out
}

fn synth_background(rng: &mut rng::Rng, n: usize, sr: f64) -> Vec<f64> {
    // 0: colored noise, 1: tone bursts over a faint floor, 2: both
    let kind = rng.gen_range(0..3);
    let mut out = vec![0.0; n];
    let noise_level = if kind == 1 {
        rng.gen_range(0.002..0.02)
    } else {
        rng.gen_range(0.02..0.3)
    };
    let color = rng.gen_range(0.0..0.98);
    for (o, v) in out.iter_mut().zip(colored_noise(rng, n, color)) {
        *o += noise_level * v;
    }
    if kind != 0 {
        let bursts = rng.gen_range(1..=3);
        for _ in 0..bursts {
            let f = rng.gen_range(150.0..4000.0);
            let dur = rng.gen_range(0.05..0.4);
            let start = rng.gen_range(0.0..(1.0 - dur));
            let amp = rng.gen_range(0.05..0.5);
            let ph = rng.gen_range(0.0..2.0 * PI);
            for (k, o) in out.iter_mut().enumerate() {
                let t = k as f64 / sr;
                let g = raised_cosine_gate(t, start, start + dur, 0.005);
                if g > 0.0 {
                    *o += amp * g * (2.0 * PI * f * t + ph).sin();
                }
            }
        }
    }
    out
}

/// Generates `n_clips` one-second 16 kHz clips, `round(n_clips *
/// speech_fraction)` of which contain a harmonic speech surrogate in the
/// active region. Positive slots are assigned by a seeded permutation.
pub fn synth_dataset(seed: u64, n_clips: usize, speech_fraction: f64) -> Result<Vec<LabeledClip>> {
    if n_clips == 0 {
        return Err(Error::InvalidArgument("n_clips must be > 0".into()));
    }
    if !(0.0..=1.0).contains(&speech_fraction) {
        return Err(Error::InvalidArgument(format!(
            "speech_fraction {speech_fraction} outside [0, 1]"
        )));
    }
    let n_pos = (n_clips as f64 * speech_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n_clips).collect();
    order.shuffle(&mut rng::stream(seed, "synth-allocation", &[]));
    let mut is_speech = vec![false; n_clips];
    for &i in &order[..n_pos] {
        is_speech[i] = true;
    }
    let sr = SYNTH_SAMPLE_RATE;
    let n = sr as usize;
    Ok(is_speech
        .iter()
        .enumerate()
        .map(|(i, &speech)| {
            let mut rng = rng::stream(seed, "synth-clip", &[i as u64]);
            let samples = if speech {
                synth_speech(&mut rng, n, f64::from(sr))
            } else {
                synth_background(&mut rng, n, f64::from(sr))
            };
            LabeledClip {
                clip: AudioClip {
                    samples: samples.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect(),
                    sample_rate: sr,
                },
                active: speech.then_some(ACTIVE_REGION),
            }
        })
        .collect())
}

/// `n` one-second synthetic background clips, usable as a noise bank.
pub fn synth_noise_bank(seed: u64, n: usize) -> Result<Vec<AudioClip>> {
    Ok(synth_dataset(seed, n, 0.0)?.into_iter().map(|c| c.clip).collect())
}

/// Writes each clip as `clip_NNNNN.wav` plus `manifest.tsv` into `dir`.
pub fn export_dataset(clips: &[LabeledClip], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::from("path\tlabel\tactive_start_s\tactive_end_s\n");
    for (i, c) in clips.iter().enumerate() {
        let name = format!("clip_{i:05}.wav");
        write_wav(&c.clip, dir.join(&name))?;
        let (a, b) = c.active.unwrap_or((0.0, 0.0));
        manifest.push_str(&format!("{name}\t{}\t{a:.6}\t{b:.6}\n", c.label()));
    }
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, manifest).map_err(|e| Error::io(path, e))
}

/// Loads a directory written by [`export_dataset`] (or any directory with a
/// compatible `manifest.tsv`).
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<LabeledClip>> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_NAME);
    let file = fs::File::open(&path)
        .map_err(|e| Error::Data(format!("cannot open manifest {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        let line = line.trim_end();
        if line.is_empty() || (lineno == 0 && line.starts_with("path\t")) {
            continue;
        }
        let bad = |what: &str| {
            Error::Data(format!("{}:{}: {what}", path.display(), lineno + 1))
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(bad("expected 4 tab-separated columns"));
        }
        let label: u8 = cols[1].parse().map_err(|_| bad("bad label"))?;
        let a: f64 = cols[2].parse().map_err(|_| bad("bad active start"))?;
        let b: f64 = cols[3].parse().map_err(|_| bad("bad active end"))?;
        let wav: PathBuf = dir.join(cols[0]);
        let clip = read_wav(&wav).map_err(|e| Error::Data(e.to_string()))?;
        out.push(LabeledClip {
            clip,
            active: (label == 1).then_some((a, b)),
        });
    }
    if out.is_empty() {
        return Err(Error::Data(format!("{} lists no clips", path.display())));
    }
    Ok(out)
}

/// Loads every `*.wav` in `dir` (sorted by name), unlabeled.
pub fn load_wav_dir(dir: impl AsRef<Path>) -> Result<Vec<AudioClip>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Data(format!("no WAV files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| read_wav(p).map_err(|e| Error::Data(e.to_string())))
        .collect()
}
