//! The VAD network and its clip-level scoring helpers.
//!
//! ```text
//! features (1×F×T, T padded to a multiple of 8 with ln(eps))
//!   -> patchify 8×8 conv (1 -> c)
//!   -> 3 × encoder: split channels [A | B]
//!          A: depthwise 3×3 -> BN -> ReLU -> grouped pointwise (g = 8)
//!          B: identity
//!        out = concat(A', B) + input
//!   -> dense pointwise (c -> c) -> BN -> ReLU
//!   -> global average pool -> linear (c -> 1) -> sigmoid
//! ```
//!
//! Convolutions that feed a batch norm carry no bias.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::frontend::{self, FeatureMap, FrontendConfig, SincParams};
use crate::nn::{
    global_avg_pool, global_avg_pool_backward, relu, relu_backward, sigmoid, sigmoid_backward,
    BatchNorm2d, BnCache, BnMode, DepthwiseConv3x3, GroupedPointwise, Linear, ParamSlot,
    PatchifyConv, Tensor,
};
use crate::rng;
use crate::signal::{self, AudioClip};

pub const PATCH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub channels: usize,
    pub n_encoders: usize,
    pub patch: usize,
    pub groups: usize,
    pub frontend: FrontendConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: 48,
            n_encoders: 3,
            patch: PATCH,
            groups: 8,
            frontend: FrontendConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.frontend.validate()?;
        let c = self.channels;
        if self.patch != PATCH {
            return Err(Error::InvalidConfig(format!("patch must be {PATCH}, got {}", self.patch)));
        }
        if c == 0 || c % 2 != 0 || self.groups == 0 || (c / 2) % self.groups != 0 {
            return Err(Error::InvalidConfig(format!(
                "channels ({c}) must be even with channels/2 divisible by groups ({})",
                self.groups
            )));
        }
        if self.n_encoders == 0 {
            return Err(Error::InvalidConfig("n_encoders must be >= 1".into()));
        }
        if self.frontend.n_filters % self.patch != 0 {
            return Err(Error::InvalidConfig(format!(
                "n_filters ({}) must be a multiple of {}",
                self.frontend.n_filters, self.patch
            )));
        }
        Ok(())
    }

    /// Learnable scalar count from per-layer closed forms.
    pub fn param_count(&self) -> usize {
        let c = self.channels;
        let half = c / 2;
        let p2 = self.patch * self.patch;
        let frontend = 3 * self.frontend.n_filters;
        let patchify = c * p2 + c;
        let encoder = half * 9 + 2 * half + half * (half / self.groups) + half;
        let head = c * c + 2 * c;
        let classifier = c + 1;
        frontend + patchify + self.n_encoders * encoder + head + classifier
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub depthwise: DepthwiseConv3x3,
    pub bn: BatchNorm2d,
    pub pointwise: GroupedPointwise,
}

#[derive(Debug, Clone)]
struct EncoderTrace {
    path_a: Tensor,
    bn_cache: BnCache,
    bn_out: Tensor,
    relu_out: Tensor,
}

#[derive(Debug, Clone)]
struct Trace {
    input: Tensor,
    encoders: Vec<EncoderTrace>,
    head_in: Tensor,
    head_bn_cache: BnCache,
    head_bn_out: Tensor,
    head_relu_out: Tensor,
    pooled: Tensor,
    probs: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VadModel {
    pub config: ModelConfig,
    pub sinc: SincParams,
    pub patchify: PatchifyConv,
    pub encoders: Vec<EncoderLayer>,
    pub head_pointwise: GroupedPointwise,
    pub head_bn: BatchNorm2d,
    pub classifier: Linear,
    trace: Option<TraceBox>,
}

// Keeps `VadModel: PartialEq` without comparing traces.
#[derive(Debug, Clone)]
struct TraceBox(Box<Trace>);

impl PartialEq for TraceBox {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl VadModel {
    pub fn build(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stream(seed, "model-init", &[]);
        let c = config.channels;
        let half = c / 2;
        let sinc = frontend::init_mel(&config.frontend)?;
        let patchify = PatchifyConv::new("patchify", 1, c, config.patch, &mut rng);
        let mut encoders = Vec::with_capacity(config.n_encoders);
        for l in 0..config.n_encoders {
            let name = format!("enc{l}");
            encoders.push(EncoderLayer {
                depthwise: DepthwiseConv3x3::new(&format!("{name}.dw"), half, false, &mut rng),
                bn: BatchNorm2d::new(&format!("{name}.bn"), half),
                pointwise: GroupedPointwise::new(
                    &format!("{name}.pw"),
                    half,
                    half,
                    config.groups,
                    true,
                    &mut rng,
                )?,
            });
        }
        let head_pointwise = GroupedPointwise::new("head.pw", c, c, 1, false, &mut rng)?;
        let head_bn = BatchNorm2d::new("head.bn", c);
        let classifier = Linear::new("classifier", c, 1, &mut rng);
        Ok(VadModel {
            config,
            sinc,
            patchify,
            encoders,
            head_pointwise,
            head_bn,
            classifier,
            trace: None,
        })
    }

    pub fn frontend_config(&self) -> &FrontendConfig {
        &self.config.frontend
    }

    /// All learnable parameters, front-end first, then layers in definition order.
    pub fn params(&self) -> Vec<&ParamSlot> {
        let mut out: Vec<&ParamSlot> = self.sinc.slots().into_iter().collect();
        out.push(&self.patchify.weight);
        out.push(&self.patchify.bias);
        for e in &self.encoders {
            out.push(&e.depthwise.weight);
            out.extend(e.depthwise.bias.as_ref());
            out.push(&e.bn.gamma);
            out.push(&e.bn.beta);
            out.push(&e.pointwise.weight);
            out.extend(e.pointwise.bias.as_ref());
        }
        out.push(&self.head_pointwise.weight);
        out.extend(self.head_pointwise.bias.as_ref());
        out.push(&self.head_bn.gamma);
        out.push(&self.head_bn.beta);
        out.push(&self.classifier.weight);
        out.push(&self.classifier.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamSlot> {
        let mut out: Vec<&mut ParamSlot> = self.sinc.slots_mut().into_iter().collect();
        out.push(&mut self.patchify.weight);
        out.push(&mut self.patchify.bias);
        for e in &mut self.encoders {
            out.push(&mut e.depthwise.weight);
            out.extend(e.depthwise.bias.as_mut());
            out.push(&mut e.bn.gamma);
            out.push(&mut e.bn.beta);
            out.push(&mut e.pointwise.weight);
            out.extend(e.pointwise.bias.as_mut());
        }
        out.push(&mut self.head_pointwise.weight);
        out.extend(self.head_pointwise.bias.as_mut());
        out.push(&mut self.head_bn.gamma);
        out.push(&mut self.head_bn.beta);
        out.push(&mut self.classifier.weight);
        out.push(&mut self.classifier.bias);
        out
    }

    /// Batch-norm running statistics, in definition order.
    pub fn buffers(&self) -> Vec<(String, &Vec<f64>)> {
        let mut out = Vec::new();
        for (l, e) in self.encoders.iter().enumerate() {
            out.push((format!("enc{l}.bn.running_mean"), &e.bn.running_mean));
            out.push((format!("enc{l}.bn.running_var"), &e.bn.running_var));
        }
        out.push(("head.bn.running_mean".into(), &self.head_bn.running_mean));
        out.push(("head.bn.running_var".into(), &self.head_bn.running_var));
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<(String, &mut Vec<f64>)> {
        let mut out = Vec::new();
        for (l, e) in self.encoders.iter_mut().enumerate() {
            out.push((format!("enc{l}.bn.running_mean"), &mut e.bn.running_mean));
            out.push((format!("enc{l}.bn.running_var"), &mut e.bn.running_var));
        }
        out.push(("head.bn.running_mean".into(), &mut self.head_bn.running_mean));
        out.push(("head.bn.running_var".into(), &mut self.head_bn.running_var));
        out
    }

    /// Learnable scalars counted by walking the parameter slots.
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.numel()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(ParamSlot::zero_grad);
    }

    /// Front-end features for a raw sample sequence.
    pub fn features(&self, samples: &[f64]) -> Result<FeatureMap> {
        let frames = frontend::frame_samples(samples, &self.config.frontend)?;
        frontend::extract(&self.sinc, &frames, &self.config.frontend)
    }

    /// Stacks feature maps into an `N×1×F×T'` input, right-padding the time
    /// axis with `ln(eps)` up to a multiple of the patch size.
    pub fn input_tensor(&self, features: &[FeatureMap]) -> Result<Tensor> {
        let first = features.first().ok_or_else(|| Error::Empty("feature batch".into()))?;
        let (f, t) = first.values.dim();
        if t == 0 {
            return Err(Error::Empty("feature map has no frames".into()));
        }
        if f != self.config.frontend.n_filters {
            return Err(Error::ShapeMismatch(format!(
                "feature map has {f} rows, model expects {}",
                self.config.frontend.n_filters
            )));
        }
        let p = self.config.patch;
        let tp = t.div_ceil(p) * p;
        let pad = self.config.frontend.log_floor.ln();
        let mut data = Vec::with_capacity(features.len() * f * tp);
        for fm in features {
            if fm.values.dim() != (f, t) {
                return Err(Error::ShapeMismatch(format!(
                    "feature maps in a batch must share a shape: {:?} vs {:?}",
                    fm.values.dim(),
                    (f, t)
                )));
            }
            for row in fm.values.rows() {
                data.extend(row.iter().copied());
                data.extend(std::iter::repeat_n(pad, tp - t));
            }
        }
        Tensor::from_vec(&[features.len(), 1, f, tp], data)
    }

    fn encoder_forward_eval(&self, layer: &EncoderLayer, x: &Tensor) -> Result<Tensor> {
        let half = self.config.channels / 2;
        let (a, b) = x.split_channels(half)?;
        let a = layer.depthwise.forward(&a)?;
        let a = layer.bn.forward_eval(&a)?;
        let a = relu(&a);
        let a = layer.pointwise.forward(&a)?;
        let mut out = Tensor::concat_channels(&a, &b)?;
        out.add_assign(x);
        Ok(out)
    }

    /// Eval-mode probabilities for an input tensor. Reentrant.
    pub fn predict_tensor(&self, input: &Tensor) -> Result<Vec<f64>> {
        let mut x = self.patchify.forward(input)?;
        for layer in &self.encoders {
            x = self.encoder_forward_eval(layer, &x)?;
        }
        let h = self.head_pointwise.forward(&x)?;
        let h = relu(&self.head_bn.forward_eval(&h)?);
        let pooled = global_avg_pool(&h)?;
        let z = self.classifier.forward(&pooled)?;
        Ok(sigmoid(&z).into_data())
    }

    pub fn predict(&self, features: &[FeatureMap]) -> Result<Vec<f64>> {
        self.predict_tensor(&self.input_tensor(features)?)
    }

    /// Speech probability for one feature map (eval mode).
    pub fn forward(&self, features: &FeatureMap) -> Result<f64> {
        Ok(self.predict(std::slice::from_ref(features))?[0])
    }

    /// Forward pass in the given batch-norm mode, recording everything
    /// [`VadModel::backward`] needs.
    pub fn forward_train(&mut self, input: &Tensor, mode: BnMode) -> Result<Vec<f64>> {
        let half = self.config.channels / 2;
        let mut x = self.patchify.forward(input)?;
        let mut enc_traces = Vec::with_capacity(self.encoders.len());
        for layer in &mut self.encoders {
            let (a, b) = x.split_channels(half)?;
            let a1 = layer.depthwise.forward(&a)?;
            let (bn_out, bn_cache) = layer.bn.forward(&a1, mode)?;
            let relu_out = relu(&bn_out);
            let a4 = layer.pointwise.forward(&relu_out)?;
            let mut out = Tensor::concat_channels(&a4, &b)?;
            out.add_assign(&x);
            enc_traces.push(EncoderTrace {
                path_a: a,
                bn_cache,
                bn_out,
                relu_out,
            });
            x = out;
        }
        let h = self.head_pointwise.forward(&x)?;
        let (head_bn_out, head_bn_cache) = self.head_bn.forward(&h, mode)?;
        let head_relu_out = relu(&head_bn_out);
        let pooled = global_avg_pool(&head_relu_out)?;
        let z = self.classifier.forward(&pooled)?;
        let probs = sigmoid(&z);
        let out = probs.data().to_vec();
        self.trace = Some(TraceBox(Box::new(Trace {
            input: input.clone(),
            encoders: enc_traces,
            head_in: x,
            head_bn_cache,
            head_bn_out,
            head_relu_out,
            pooled,
            probs,
        })));
        Ok(out)
    }

    /// Back-propagates `d loss / d probability` through the last recorded
    /// forward pass, accumulating parameter gradients. Returns the gradient
    /// with respect to the (padded) input tensor.
    pub fn backward(&mut self, grad_probs: &[f64]) -> Result<Tensor> {
        let TraceBox(trace) = self.trace.take().ok_or(Error::BackwardBeforeForward)?;
        let n = trace.probs.shape()[0];
        let up = Tensor::from_vec(&[n, 1], grad_probs.to_vec())?;
        let dz = sigmoid_backward(&trace.probs, &up);
        let dpooled = self.classifier.backward(&trace.pooled, &dz)?;
        let d_relu = global_avg_pool_backward(trace.head_relu_out.shape(), &dpooled)?;
        let d_bn = relu_backward(&trace.head_bn_out, &d_relu);
        let d_h = self.head_bn.backward(&trace.head_bn_cache, &d_bn)?;
        let mut dx = self.head_pointwise.backward(&trace.head_in, &d_h)?;
        let half = self.config.channels / 2;
        for (layer, t) in self.encoders.iter_mut().zip(&trace.encoders).rev() {
            let (d_a4, d_b) = dx.split_channels(half)?;
            let d_relu = layer.pointwise.backward(&t.relu_out, &d_a4)?;
            let d_bn = relu_backward(&t.bn_out, &d_relu);
            let d_a1 = layer.bn.backward(&t.bn_cache, &d_bn)?;
            let d_a = layer.depthwise.backward(&t.path_a, &d_a1)?;
            let mut d_in = Tensor::concat_channels(&d_a, &d_b)?;
            d_in.add_assign(&dx);
            dx = d_in;
        }
        self.patchify.backward(&trace.input, &dx)
    }

    /// Scores every window of `clip`, in order.
    ///
    /// When the stride is a whole number of hops the clip's frames are
    /// extracted once and shared between overlapping windows; per-frame
    /// features do not depend on their neighbours, so the scores are the
    /// same as scoring each window separately.
    pub fn predict_windows(&self, clip: &AudioClip, window_s: f64, stride_s: f64) -> Result<Vec<(f64, f64)>> {
        let cfg = &self.config.frontend;
        if clip.sample_rate != cfg.sample_rate {
            return Err(Error::SampleRateMismatch {
                left: clip.sample_rate,
                right: cfg.sample_rate,
            });
        }
        let segments = signal::window_stream(clip, window_s, stride_s)?;
        let window = signal::seconds_to_samples(window_s, clip.sample_rate);
        let stride = signal::seconds_to_samples(stride_s, clip.sample_rate);
        let frames_per_window = cfg.frame_count(window);
        if frames_per_window == 0 {
            return Err(Error::ClipTooShort {
                len: window,
                needed: cfg.frame_len,
            });
        }
        let maps: Vec<FeatureMap> = if stride % cfg.hop_len == 0 {
            let all = self.features(&clip.samples)?;
            segments
                .iter()
                .map(|s| all.slice_frames(s.start / cfg.hop_len, frames_per_window))
                .collect()
        } else {
            segments
                .iter()
                .map(|s| self.features(&s.samples))
                .collect::<Result<_>>()?
        };
        let scores = self.predict(&maps)?;
        Ok(segments.iter().map(|s| s.source_offset).zip(scores).collect())
    }

    /// Copy of the learnable front-end frequencies in Hz, with gains.
    pub fn filter_table(&self) -> Vec<(f64, f64, f64)> {
        let cfg = &self.config.frontend;
        self.sinc
            .cutoffs(cfg)
            .iter()
            .zip(self.sinc.gains())
            .map(|(c, &g)| {
                (
                    frontend::rad_to_hz(c.low, cfg.sample_rate),
                    frontend::rad_to_hz(c.high, cfg.sample_rate),
                    g,
                )
            })
            .collect()
    }
}

/// Drops padded time columns from an input gradient, giving one `F×T`
/// upstream gradient per sample.
pub fn unpad_input_grad(grad: &Tensor, n_frames: usize) -> Result<Vec<Array2<f64>>> {
    let (n, _, f, tp) = grad.dims4()?;
    if n_frames > tp {
        return Err(Error::ShapeMismatch(format!("{n_frames} frames > padded width {tp}")));
    }
    let g = grad.data();
    Ok((0..n)
        .map(|s| Array2::from_shape_fn((f, n_frames), |(i, t)| g[(s * f + i) * tp + t]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn small() -> ModelConfig {
        ModelConfig {
            channels: 16,
            ..ModelConfig::default()
        }
    }

    fn random_input(n: usize, t: usize, seed: u64, scale: f64) -> Tensor {
        let mut r = rng::stream(seed, "model-test", &[]);
        Tensor::from_fn(&[n, 1, 64, t], |_| scale * r.gen_range(-1.0..1.0))
    }

    #[test]
    fn default_parameter_count() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.param_count(), 6841);
        let m = VadModel::build(cfg, 0).unwrap();
        assert_eq!(m.param_count(), 6841);
        let front: usize = m.sinc.slots().iter().map(|s| s.numel()).sum();
        assert_eq!(front, 192);
        for (c, g) in [(16, 8), (24, 4), (32, 8), (64, 8)] {
            let cfg = ModelConfig { channels: c, groups: g, ..ModelConfig::default() };
            assert_eq!(VadModel::build(cfg, 1).unwrap().param_count(), cfg.param_count());
        }
    }

    #[test]
    fn config_rules() {
        assert!(ModelConfig { channels: 20, ..small() }.validate().is_err());
        assert!(ModelConfig { patch: 4, ..small() }.validate().is_err());
        assert!(ModelConfig { n_encoders: 0, ..small() }.validate().is_err());
        assert!(VadModel::build(ModelConfig { channels: 7, ..small() }, 0).is_err());
    }

    #[test]
    fn outputs_are_probabilities() {
        let m = VadModel::build(small(), 3).unwrap();
        for scale in [1.0, 1e6] {
            let p = m.predict_tensor(&random_input(4, 16, 2, scale)).unwrap();
            assert!(p.iter().all(|&v| v > 0.0 && v < 1.0), "{p:?}");
        }
        let neg = m.predict_tensor(&Tensor::full(&[1, 1, 64, 8], -1e6)).unwrap();
        assert!(neg[0] > 0.0 && neg[0] < 1.0);
    }

    #[test]
    fn seeded_build_and_symmetry_breaking() {
        assert_eq!(VadModel::build(small(), 9).unwrap(), VadModel::build(small(), 9).unwrap());
        assert_ne!(VadModel::build(small(), 9).unwrap(), VadModel::build(small(), 10).unwrap());
        let m = VadModel::build(ModelConfig::default(), 4).unwrap();
        let p = m.predict_tensor(&random_input(100, 8, 5, 3.0)).unwrap();
        assert!(p.iter().any(|&v| v != p[0]));
        let a = m.predict_tensor(&random_input(2, 8, 6, 1.0)).unwrap();
        assert_eq!(a, m.predict_tensor(&random_input(2, 8, 6, 1.0)).unwrap());
    }

    #[test]
    fn path_b_does_not_reach_path_a() {
        let m = VadModel::build(small(), 5).unwrap();
        let x = m.patchify.forward(&random_input(1, 16, 7, 1.0)).unwrap();
        let mut y = x.clone();
        y.data_mut()[8 * 16..].iter_mut().for_each(|v| *v = 0.0);
        let ox = m.encoder_forward_eval(&m.encoders[0], &x).unwrap();
        let oy = m.encoder_forward_eval(&m.encoders[0], &y).unwrap();
        assert_eq!(ox.data()[..8 * 16], oy.data()[..8 * 16]);
    }

    #[test]
    fn zeroed_transform_leaves_residual_wiring() {
        let mut m = VadModel::build(small(), 6).unwrap();
        let layer = &mut m.encoders[0];
        layer.depthwise.weight.value.fill(0.0);
        layer.pointwise.weight.value.fill(0.0);
        layer.pointwise.bias.as_mut().unwrap().value.fill(0.0);
        let x = random_input(1, 16, 8, 1.0);
        let x = m.patchify.forward(&x).unwrap();
        let out = m.encoder_forward_eval(&m.encoders[0], &x).unwrap();
        let plane = 8 * 2;
        for (k, (&o, &v)) in out.data().iter().zip(x.data()).enumerate() {
            let expected = if k < 8 * plane { v } else { 2.0 * v };
            assert_eq!(o, expected);
        }
    }

    #[test]
    fn padding_uses_log_floor() {
        let m = VadModel::build(small(), 1).unwrap();
        let fm = FeatureMap {
            values: Array2::zeros((64, 5)),
            frame_times: vec![0.0; 5],
        };
        let t = m.input_tensor(&[fm]).unwrap();
        assert_eq!(t.shape(), &[1, 1, 64, 8]);
        assert_eq!(t.data()[5], 1e-8f64.ln());
        assert_eq!(t.data()[4], 0.0);
        let empty = FeatureMap { values: Array2::zeros((64, 0)), frame_times: vec![] };
        assert!(matches!(m.input_tensor(&[empty]), Err(Error::Empty(_))));
    }

    #[test]
    fn backward_needs_forward() {
        let mut m = VadModel::build(small(), 1).unwrap();
        assert!(matches!(m.backward(&[1.0]), Err(Error::BackwardBeforeForward)));
        m.forward_train(&random_input(2, 8, 1, 1.0), BnMode::Train).unwrap();
        assert!(m.backward(&[1.0, -1.0]).is_ok());
        assert!(matches!(m.backward(&[1.0, -1.0]), Err(Error::BackwardBeforeForward)));
    }

    #[test]
    fn eval_mode_training_forward_matches_predict() {
        let mut m = VadModel::build(small(), 2).unwrap();
        let x = random_input(3, 16, 3, 1.0);
        let a = m.predict_tensor(&x).unwrap();
        let b = m.forward_train(&x, BnMode::Eval).unwrap();
        assert_eq!(a, b);
    }

    fn clip(seconds: f64, seed: u64) -> AudioClip {
        let mut r = rng::stream(seed, "model-clip", &[]);
        let n = (seconds * 16_000.0) as usize;
        AudioClip::new((0..n).map(|_| r.gen_range(-0.5..0.5)).collect(), 16_000).unwrap()
    }

    #[test]
    fn window_scoring() {
        let m = VadModel::build(small(), 3).unwrap();
        let long = clip(10.0, 1);
        let scores = m.predict_windows(&long, 0.63, 0.15).unwrap();
        assert_eq!(scores.len(), 63);
        for (k, seg) in signal::window_stream(&long, 0.63, 0.15).unwrap().iter().enumerate().step_by(10) {
            let direct = m.forward(&m.features(&seg.samples).unwrap()).unwrap();
            assert_eq!(scores[k], (seg.source_offset, direct));
        }
        let one = clip(0.63, 2);
        let s = m.predict_windows(&one, 0.63, 0.15).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].1, m.forward(&m.features(&one.samples).unwrap()).unwrap());
        let a = clip(2.0, 3);
        let mut joined = a.clone();
        joined.samples.extend(clip(1.0, 4).samples);
        let sa = m.predict_windows(&a, 0.63, 0.15).unwrap();
        let sj = m.predict_windows(&joined, 0.63, 0.15).unwrap();
        assert_eq!(sa[..], sj[..sa.len()]);
        // a stride that is not a whole number of hops takes the per-window path
        let odd = m.predict_windows(&a, 0.63, 0.17).unwrap();
        assert_eq!(odd.len(), signal::window_stream(&a, 0.63, 0.17).unwrap().len());
    }
}
