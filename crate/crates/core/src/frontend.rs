//! Learnable sinc filterbank.
//!
//! Each filter is a band-pass FIR built from two cutoff frequencies and a
//! gain. The ideal response `(w2/pi) sinc(w2 n) - (w1/pi) sinc(w1 n)` is
//! centered on tap `R`, truncated to `L = 2R + 1` taps and shaped by a
//! Hamming window. A frame's feature for filter `i` is
//! `ln(eps + sum |x * s_i|^2)` over the "valid" part of the convolution.
//!
//! Cutoffs are reparameterized from unconstrained scalars so that
//! `0 < w1 < w2 <= pi - delta` holds for every parameter value:
//!
//! ```text
//! w1 = min(w_min + |theta1|, pi - delta - w_gap)
//! w2 = min(w1 + w_gap + |theta2|, pi - delta)
//! ```
//!
//! Filters are even-symmetric about tap `R`, so a frame's valid outputs are
//! `Y = Z U`, with `Z[j][d] = x[j+R+d] + x[j+R-d]` (`d >= 1`, `Z[j][0] =
//! x[j+R]`) and `U[d][i] = s_i[R+d]`. Both passes run as matrix products on
//! that folded form; [`extract_direct`] is the plain convolution.

use std::f64::consts::PI;

use ndarray::{linalg::general_mat_mul, Array2, ArrayView2, Axis};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::nn::{ParamSlot, Tensor};
use crate::signal::AudioClip;

/// Guard keeping the upper cutoff strictly below Nyquist (rad/sample).
pub const CUTOFF_GUARD: f64 = 1e-3;
pub const MIN_LOW_HZ: f64 = 30.0;
pub const MIN_BAND_HZ: f64 = 50.0;
/// Mel grid upper edge is `sample_rate / 2 - NYQUIST_MARGIN_HZ`.
pub const NYQUIST_MARGIN_HZ: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontendConfig {
    pub n_filters: usize,
    /// `R`; filters have `2R + 1` taps.
    pub half_len: usize,
    pub frame_len: usize,
    pub hop_len: usize,
    pub sample_rate: u32,
    pub log_floor: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig {
            n_filters: 64,
            half_len: 125,
            frame_len: 400,
            hop_len: 160,
            sample_rate: 16_000,
            log_floor: 1e-8,
        }
    }
}

impl FrontendConfig {
    pub fn filter_len(&self) -> usize {
        2 * self.half_len + 1
    }

    /// Valid convolution outputs per frame.
    pub fn outputs_per_frame(&self) -> usize {
        self.frame_len + 1 - self.filter_len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_filters == 0 {
            return bad("n_filters must be >= 1".into());
        }
        if self.half_len == 0 || self.filter_len() > self.frame_len {
            return bad(format!(
                "filter length {} must be in [3, frame_len = {}]",
                self.filter_len(),
                self.frame_len
            ));
        }
        if self.hop_len == 0 || self.sample_rate == 0 {
            return bad("hop_len and sample_rate must be > 0".into());
        }
        if !(self.log_floor > 0.0) {
            return bad(format!("log_floor must be > 0, got {}", self.log_floor));
        }
        if self.min_low() + self.min_gap() >= PI - CUTOFF_GUARD {
            return bad(format!("sample rate {} too low for the cutoff limits", self.sample_rate));
        }
        Ok(())
    }

    pub fn min_low(&self) -> f64 {
        hz_to_rad(MIN_LOW_HZ, self.sample_rate)
    }

    pub fn min_gap(&self) -> f64 {
        hz_to_rad(MIN_BAND_HZ, self.sample_rate)
    }

    pub fn frame_count(&self, n_samples: usize) -> usize {
        if n_samples < self.frame_len {
            0
        } else {
            (n_samples - self.frame_len) / self.hop_len + 1
        }
    }
}

pub fn hz_to_rad(hz: f64, sample_rate: u32) -> f64 {
    2.0 * PI * hz / f64::from(sample_rate)
}

pub fn rad_to_hz(rad: f64, sample_rate: u32) -> f64 {
    rad * f64::from(sample_rate) / (2.0 * PI)
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Learnable filterbank parameters: unconstrained cutoff scalars and gains.
#[derive(Debug, Clone, PartialEq)]
pub struct SincParams {
    pub theta_low: ParamSlot,
    pub theta_band: ParamSlot,
    pub gain: ParamSlot,
}

/// Cutoffs of one filter and the partial derivatives of the reparameterization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoffs {
    pub low: f64,
    pub high: f64,
    pub dlow_dt1: f64,
    pub dhigh_dt1: f64,
    pub dhigh_dt2: f64,
}

pub fn reparameterize(theta1: f64, theta2: f64, cfg: &FrontendConfig) -> Cutoffs {
    let ceiling = PI - CUTOFF_GUARD;
    let low_raw = cfg.min_low() + theta1.abs();
    let low_ceiling = ceiling - cfg.min_gap();
    let (low, s1) = if low_raw < low_ceiling {
        (low_raw, theta1.signum())
    } else {
        (low_ceiling, 0.0)
    };
    let unclamped = low + cfg.min_gap() + theta2.abs();
    let s2 = theta2.signum();
    if unclamped < ceiling {
        Cutoffs {
            low,
            high: unclamped,
            dlow_dt1: s1,
            dhigh_dt1: s1,
            dhigh_dt2: s2,
        }
    } else {
        Cutoffs {
            low,
            high: ceiling,
            dlow_dt1: s1,
            dhigh_dt1: 0.0,
            dhigh_dt2: 0.0,
        }
    }
}

impl SincParams {
    pub fn from_values(theta_low: Vec<f64>, theta_band: Vec<f64>, gain: Vec<f64>) -> Result<Self> {
        let f = theta_low.len();
        if theta_band.len() != f || gain.len() != f || f == 0 {
            return Err(Error::ShapeMismatch(format!(
                "sinc params need equal non-zero lengths (got {f}, {}, {})",
                theta_band.len(),
                gain.len()
            )));
        }
        Ok(SincParams {
            theta_low: ParamSlot::new("sinc.theta_low", Tensor::from_vec(&[f], theta_low)?),
            theta_band: ParamSlot::new("sinc.theta_band", Tensor::from_vec(&[f], theta_band)?),
            gain: ParamSlot::new("sinc.gain", Tensor::from_vec(&[f], gain)?),
        })
    }

    pub fn n_filters(&self) -> usize {
        self.gain.value.len()
    }

    pub fn cutoffs(&self, cfg: &FrontendConfig) -> Vec<Cutoffs> {
        self.theta_low
            .value
            .data()
            .iter()
            .zip(self.theta_band.value.data())
            .map(|(&t1, &t2)| reparameterize(t1, t2, cfg))
            .collect()
    }

    pub fn gains(&self) -> &[f64] {
        self.gain.value.data()
    }

    pub fn slots(&self) -> [&ParamSlot; 3] {
        [&self.theta_low, &self.theta_band, &self.gain]
    }

    pub fn slots_mut(&mut self) -> [&mut ParamSlot; 3] {
        [&mut self.theta_low, &mut self.theta_band, &mut self.gain]
    }
}

/// `n_filters + 1` band edges (Hz) equally spaced on the mel scale between
/// 30 Hz and `sample_rate / 2 - 50 Hz`.
pub fn mel_band_edges(cfg: &FrontendConfig) -> Vec<f64> {
    let lo = hz_to_mel(MIN_LOW_HZ);
    let hi = hz_to_mel(f64::from(cfg.sample_rate) / 2.0 - NYQUIST_MARGIN_HZ);
    let f = cfg.n_filters;
    (0..=f)
        .map(|k| mel_to_hz(lo + (hi - lo) * k as f64 / f as f64))
        .collect()
}

/// Mel-spaced contiguous bands with unit gains. Bands narrower than the
/// minimum width start at their mel edge and take the minimum width.
pub fn init_mel(cfg: &FrontendConfig) -> Result<SincParams> {
    cfg.validate()?;
    let edges = mel_band_edges(cfg);
    let mut t1 = Vec::with_capacity(cfg.n_filters);
    let mut t2 = Vec::with_capacity(cfg.n_filters);
    for pair in edges.windows(2) {
        let low = hz_to_rad(pair[0], cfg.sample_rate);
        let high = hz_to_rad(pair[1], cfg.sample_rate);
        t1.push((low - cfg.min_low()).max(0.0));
        t2.push((high - low - cfg.min_gap()).max(0.0));
    }
    SincParams::from_values(t1, t2, vec![1.0; cfg.n_filters])
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// Ideal band-pass response at integer lag `n`.
pub fn prototype(w1: f64, w2: f64, n: i64) -> f64 {
    let n = n as f64;
    w2 / PI * sinc(w2 * n) - w1 / PI * sinc(w1 * n)
}

/// Hamming window, mirrored so that `h[n] == h[len - 1 - n]` exactly.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    (0..len)
        .map(|n| {
            let m = n.min(len - 1 - n);
            0.54 - 0.46 * (2.0 * PI * m as f64 / (len - 1) as f64).cos()
        })
        .collect()
}

/// `F×L` tap matrix: `s_i[n] = b_i * prototype(n - R) * h[n]`.
pub fn materialize(params: &SincParams, cfg: &FrontendConfig) -> Array2<f64> {
    let l = cfg.filter_len();
    let r = cfg.half_len as i64;
    let h = hamming(l);
    let cut = params.cutoffs(cfg);
    let gains = params.gains();
    Array2::from_shape_fn((params.n_filters(), l), |(i, n)| {
        gains[i] * prototype(cut[i].low, cut[i].high, n as i64 - r) * h[n]
    })
}

/// Right half of each filter, `U[d][i] = s_i[R + d]`, as an `(R+1)×F` matrix.
fn half_taps(params: &SincParams, cfg: &FrontendConfig) -> Array2<f64> {
    let taps = materialize(params, cfg);
    let r = cfg.half_len;
    Array2::from_shape_fn((r + 1, params.n_filters()), |(d, i)| taps[[i, r + d]])
}

/// Splits a clip into `T×frame_len` overlapping frames, without padding.
pub fn frame_signal(clip: &AudioClip, cfg: &FrontendConfig) -> Result<Array2<f64>> {
    frame_samples(&clip.samples, cfg)
}

pub fn frame_samples(samples: &[f64], cfg: &FrontendConfig) -> Result<Array2<f64>> {
    if samples.len() < cfg.frame_len {
        return Err(Error::ClipTooShort {
            len: samples.len(),
            needed: cfg.frame_len,
        });
    }
    let t = cfg.frame_count(samples.len());
    Ok(Array2::from_shape_fn((t, cfg.frame_len), |(k, n)| {
        samples[k * cfg.hop_len + n]
    }))
}

/// `F×T` log sub-band energies.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub values: Array2<f64>,
    pub frame_times: Vec<f64>,
}

impl FeatureMap {
    pub fn n_filters(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }

    /// Columns `[start, start + len)`.
    pub fn slice_frames(&self, start: usize, len: usize) -> FeatureMap {
        FeatureMap {
            values: self
                .values
                .slice(ndarray::s![.., start..start + len])
                .to_owned(),
            frame_times: self.frame_times[start..start + len].to_vec(),
        }
    }
}

fn check_frames(frames: &ArrayView2<'_, f64>, cfg: &FrontendConfig) -> Result<()> {
    cfg.validate()?;
    if frames.ncols() != cfg.frame_len {
        return Err(Error::ShapeMismatch(format!(
            "frames have {} samples, config expects {}",
            frames.ncols(),
            cfg.frame_len
        )));
    }
    Ok(())
}

fn frame_times(t: usize, cfg: &FrontendConfig) -> Vec<f64> {
    (0..t)
        .map(|k| (k * cfg.hop_len) as f64 / f64::from(cfg.sample_rate))
        .collect()
}

/// Folded frames stacked into one matrix: row `k*J + j` holds
/// `x[j+R] , x[j+R+d] + x[j+R-d]` for frame `k`.
fn fold_frames(frames: &ArrayView2<'_, f64>, cfg: &FrontendConfig) -> Array2<f64> {
    let r = cfg.half_len;
    let j_count = cfg.outputs_per_frame();
    let mut z = Array2::zeros((frames.nrows() * j_count, r + 1));
    let zs = z.as_slice_mut().expect("fresh array is contiguous");
    for (k, frame) in frames.axis_iter(Axis(0)).enumerate() {
        let frame = frame.to_vec();
        for j in 0..j_count {
            let row = &mut zs[(k * j_count + j) * (r + 1)..(k * j_count + j + 1) * (r + 1)];
            let c = j + r;
            row[0] = frame[c];
            for d in 1..=r {
                row[d] = frame[c + d] + frame[c - d];
            }
        }
    }
    z
}

/// Forward intermediates reused by the backward pass.
#[derive(Debug, Clone)]
pub struct FrontendCache {
    folded: Array2<f64>,
    outputs: Array2<f64>,
    energies: Array2<f64>,
}

/// Log sub-band energies of `frames` (`T×frame_len`).
pub fn extract(params: &SincParams, frames: &Array2<f64>, cfg: &FrontendConfig) -> Result<FeatureMap> {
    Ok(extract_cached(params, frames, cfg)?.0)
}

/// [`extract`] that also returns what [`extract_backward_cached`] needs.
///
/// Every frame's outputs come from the same row-wise GEMM kernel, so a
/// frame's features do not depend on which other frames share the call.
pub fn extract_cached(
    params: &SincParams,
    frames: &Array2<f64>,
    cfg: &FrontendConfig,
) -> Result<(FeatureMap, FrontendCache)> {
    let view = frames.view();
    check_frames(&view, cfg)?;
    let f = params.n_filters();
    let t = frames.nrows();
    let j_count = cfg.outputs_per_frame();
    let u = half_taps(params, cfg);
    let folded = fold_frames(&view, cfg);
    let mut outputs = Array2::zeros((t * j_count, f));
    general_mat_mul(1.0, &folded, &u, 0.0, &mut outputs);
    let mut energies = Array2::<f64>::zeros((t, f));
    for (k, mut e) in energies.axis_iter_mut(Axis(0)).enumerate() {
        for row in outputs.slice(ndarray::s![k * j_count..(k + 1) * j_count, ..]).axis_iter(Axis(0)) {
            e.iter_mut().zip(row).for_each(|(acc, v)| *acc += v * v);
        }
    }
    let values = Array2::from_shape_fn((f, t), |(i, k)| (cfg.log_floor + energies[[k, i]]).ln());
    Ok((
        FeatureMap {
            values,
            frame_times: frame_times(t, cfg),
        },
        FrontendCache {
            folded,
            outputs,
            energies,
        },
    ))
}

/// Same result as [`extract`], computed by plain convolution with the
/// materialized taps. Slow; used as a cross-check.
pub fn extract_direct(params: &SincParams, frames: &Array2<f64>, cfg: &FrontendConfig) -> Result<FeatureMap> {
    let view = frames.view();
    check_frames(&view, cfg)?;
    let taps = materialize(params, cfg);
    let l = cfg.filter_len();
    let n = cfg.frame_len;
    let t = frames.nrows();
    let values = Array2::from_shape_fn((params.n_filters(), t), |(i, k)| {
        let mut energy = 0.0;
        for m in (l - 1)..n {
            let y: f64 = (0..l).map(|q| taps[[i, q]] * frames[[k, m - q]]).sum();
            energy += y * y;
        }
        (cfg.log_floor + energy).ln()
    });
    Ok(FeatureMap {
        values,
        frame_times: frame_times(t, cfg),
    })
}

/// Gradients of a scalar loss with respect to the filterbank parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SincGrads {
    pub theta_low: Vec<f64>,
    pub theta_band: Vec<f64>,
    pub gain: Vec<f64>,
}

impl SincGrads {
    pub fn zeros(f: usize) -> Self {
        SincGrads {
            theta_low: vec![0.0; f],
            theta_band: vec![0.0; f],
            gain: vec![0.0; f],
        }
    }

    pub fn add_assign(&mut self, other: &SincGrads) {
        for (a, b) in [
            (&mut self.theta_low, &other.theta_low),
            (&mut self.theta_band, &other.theta_band),
            (&mut self.gain, &other.gain),
        ] {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    /// Adds into the parameter slots' gradient accumulators.
    pub fn accumulate_into(&self, params: &mut SincParams) {
        let [t1, t2, g] = params.slots_mut();
        for (slot, src) in [(t1, &self.theta_low), (t2, &self.theta_band), (g, &self.gain)] {
            slot.grad
                .data_mut()
                .iter_mut()
                .zip(src)
                .for_each(|(a, b)| *a += b);
        }
    }
}

/// Gradient of a loss with respect to the half taps `U`, given
/// `upstream = dLoss/dFeature` (`F×T`).
pub fn half_tap_grad(
    params: &SincParams,
    frames: &Array2<f64>,
    cfg: &FrontendConfig,
    upstream: &Array2<f64>,
) -> Result<Array2<f64>> {
    let (_, cache) = extract_cached(params, frames, cfg)?;
    half_tap_grad_cached(&cache, cfg, upstream)
}

pub fn half_tap_grad_cached(cache: &FrontendCache, cfg: &FrontendConfig, upstream: &Array2<f64>) -> Result<Array2<f64>> {
    let (t, f) = cache.energies.dim();
    if upstream.dim() != (f, t) {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient {:?} vs features ({f}, {t})",
            upstream.dim()
        )));
    }
    let j_count = cfg.outputs_per_frame();
    let mut w = cache.outputs.clone();
    for k in 0..t {
        let coef: Vec<f64> = (0..f)
            .map(|i| 2.0 * upstream[[i, k]] / (cfg.log_floor + cache.energies[[k, i]]))
            .collect();
        for mut row in w.slice_mut(ndarray::s![k * j_count..(k + 1) * j_count, ..]).axis_iter_mut(Axis(0)) {
            row.iter_mut().zip(&coef).for_each(|(v, c)| *v *= c);
        }
    }
    let mut du = Array2::zeros((cfg.half_len + 1, f));
    general_mat_mul(1.0, &cache.folded.t(), &w, 0.0, &mut du);
    Ok(du)
}

/// Chains a half-tap gradient through the window, gain, prototype and
/// cutoff reparameterization.
pub fn chain_half_tap_grad(params: &SincParams, cfg: &FrontendConfig, du: &Array2<f64>) -> SincGrads {
    let f = params.n_filters();
    let r = cfg.half_len;
    let h = hamming(cfg.filter_len());
    let cut = params.cutoffs(cfg);
    let gains = params.gains();
    let mut out = SincGrads::zeros(f);
    for i in 0..f {
        let c = cut[i];
        let (mut g_gain, mut g_low, mut g_high) = (0.0, 0.0, 0.0);
        for d in 0..=r {
            let g = du[[d, i]];
            let hd = h[r + d];
            let n = d as f64;
            g_gain += g * prototype(c.low, c.high, d as i64) * hd;
            g_high += g * gains[i] * hd * (c.high * n).cos() / PI;
            g_low -= g * gains[i] * hd * (c.low * n).cos() / PI;
        }
        out.gain[i] = g_gain;
        out.theta_low[i] = g_low * c.dlow_dt1 + g_high * c.dhigh_dt1;
        out.theta_band[i] = g_high * c.dhigh_dt2;
    }
    out
}

/// Exact gradients of `sum(upstream * extract(params, frames))` with respect
/// to `theta_low`, `theta_band` and `gain`.
pub fn extract_backward(
    params: &SincParams,
    frames: &Array2<f64>,
    cfg: &FrontendConfig,
    upstream: &Array2<f64>,
) -> Result<SincGrads> {
    let du = half_tap_grad(params, frames, cfg, upstream)?;
    Ok(chain_half_tap_grad(params, cfg, &du))
}

/// [`extract_backward`] from a cache produced by [`extract_cached`] with the
/// same parameters.
pub fn extract_backward_cached(
    params: &SincParams,
    cache: &FrontendCache,
    cfg: &FrontendConfig,
    upstream: &Array2<f64>,
) -> Result<SincGrads> {
    let du = half_tap_grad_cached(cache, cfg, upstream)?;
    Ok(chain_half_tap_grad(params, cfg, &du))
}

/// Magnitude response (dB) of every materialized filter on the one-sided
/// grid of an `n_fft`-point transform. Returns `(freqs_hz, F×(n_fft/2+1))`.
pub fn magnitude_response(params: &SincParams, cfg: &FrontendConfig, n_fft: usize) -> (Vec<f64>, Array2<f64>) {
    let taps = materialize(params, cfg);
    let bins = n_fft / 2 + 1;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_fft);
    let mut out = Array2::zeros((params.n_filters(), bins));
    for (i, row) in taps.axis_iter(Axis(0)).enumerate() {
        let mut buf: Vec<Complex<f64>> = (0..n_fft)
            .map(|n| Complex::new(if n < row.len() { row[n] } else { 0.0 }, 0.0))
            .collect();
        fft.process(&mut buf);
        for b in 0..bins {
            out[[i, b]] = 20.0 * buf[b].norm().max(1e-12).log10();
        }
    }
    let freqs = (0..bins)
        .map(|b| b as f64 * f64::from(cfg.sample_rate) / n_fft as f64)
        .collect();
    (freqs, out)
}
