use rand::Rng as _;

use super::tensor::{ParamSlot, Tensor};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

fn uniform(rng: &mut Rng, shape: &[usize], bound: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-bound..bound))
}

fn check_grad_shape(grad: &Tensor, expected: &[usize]) -> Result<()> {
    if grad.shape() != expected {
        return Err(Error::ShapeMismatch(format!(
            "upstream gradient {:?} does not match output {:?}",
            grad.shape(),
            expected
        )));
    }
    Ok(())
}

/// Non-overlapping `p×p` convolution with stride `p` (patch embedding).
#[derive(Debug, Clone, PartialEq)]
pub struct PatchifyConv {
    pub weight: ParamSlot,
    pub bias: ParamSlot,
    pub patch: usize,
}

impl PatchifyConv {
    pub fn new(name: &str, c_in: usize, c_out: usize, patch: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / ((c_in * patch * patch) as f64).sqrt();
        PatchifyConv {
            weight: ParamSlot::new(
                format!("{name}.weight"),
                uniform(rng, &[c_out, c_in, patch, patch], bound),
            ),
            bias: ParamSlot::new(format!("{name}.bias"), uniform(rng, &[c_out], bound)),
            patch,
        }
    }

    fn dims(&self, input: &Tensor) -> Result<(usize, usize, usize, usize, usize)> {
        let (n, c_in, h, w) = input.dims4()?;
        let ws = self.weight.value.shape();
        let p = self.patch;
        if ws[1] != c_in || h % p != 0 || w % p != 0 {
            return Err(Error::ShapeMismatch(format!(
                "patchify: input {:?} vs weight {:?} (spatial dims must be multiples of {p})",
                input.shape(),
                ws
            )));
        }
        Ok((n, c_in, h, w, ws[0]))
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (n, c_in, h, w, c_out) = self.dims(input)?;
        let p = self.patch;
        let (ho, wo) = (h / p, w / p);
        let x = input.data();
        let wt = self.weight.value.data();
        let b = self.bias.value.data();
        let mut out = Tensor::zeros(&[n, c_out, ho, wo]);
        let o = out.data_mut();
        for s in 0..n {
            for co in 0..c_out {
                for py in 0..ho {
                    for px in 0..wo {
                        let mut acc = b[co];
                        for ci in 0..c_in {
                            for ky in 0..p {
                                let xrow = ((s * c_in + ci) * h + py * p + ky) * w + px * p;
                                let wrow = ((co * c_in + ci) * p + ky) * p;
                                for kx in 0..p {
                                    acc += wt[wrow + kx] * x[xrow + kx];
                                }
                            }
                        }
                        o[((s * c_out + co) * ho + py) * wo + px] = acc;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (n, c_in, h, w, c_out) = self.dims(input)?;
        let p = self.patch;
        let (ho, wo) = (h / p, w / p);
        check_grad_shape(grad_out, &[n, c_out, ho, wo])?;
        let x = input.data();
        let g = grad_out.data();
        let wt = self.weight.value.data().to_vec();
        let mut gin = Tensor::zeros(input.shape());
        let gi = gin.data_mut();
        let gw = self.weight.grad.data_mut();
        let gb = self.bias.grad.data_mut();
        for s in 0..n {
            for co in 0..c_out {
                for py in 0..ho {
                    for px in 0..wo {
                        let go = g[((s * c_out + co) * ho + py) * wo + px];
                        gb[co] += go;
                        for ci in 0..c_in {
                            for ky in 0..p {
                                let xrow = ((s * c_in + ci) * h + py * p + ky) * w + px * p;
                                let wrow = ((co * c_in + ci) * p + ky) * p;
                                for kx in 0..p {
                                    gw[wrow + kx] += go * x[xrow + kx];
                                    gi[xrow + kx] += go * wt[wrow + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(gin)
    }
}

/// Per-channel 3×3 convolution with zero padding 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseConv3x3 {
    /// `c×3×3`
    pub weight: ParamSlot,
    pub bias: Option<ParamSlot>,
}

impl DepthwiseConv3x3 {
    pub fn new(name: &str, channels: usize, with_bias: bool, rng: &mut Rng) -> Self {
        let bound = 1.0 / 3.0;
        let weight = ParamSlot::new(
            format!("{name}.weight"),
            uniform(rng, &[channels, 3, 3], bound),
        );
        let bias = with_bias
            .then(|| ParamSlot::new(format!("{name}.bias"), uniform(rng, &[channels], bound)));
        DepthwiseConv3x3 { weight, bias }
    }

    fn check(&self, input: &Tensor) -> Result<(usize, usize, usize, usize)> {
        let dims = input.dims4()?;
        if self.weight.value.shape() != [dims.1, 3, 3] {
            return Err(Error::ShapeMismatch(format!(
                "depthwise: input {:?} vs weight {:?}",
                input.shape(),
                self.weight.value.shape()
            )));
        }
        Ok(dims)
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = self.check(input)?;
        let x = input.data();
        let wt = self.weight.value.data();
        let mut out = Tensor::zeros(input.shape());
        let o = out.data_mut();
        for s in 0..n {
            for ch in 0..c {
                let base = (s * c + ch) * h * w;
                let k = &wt[ch * 9..ch * 9 + 9];
                let b = self.bias.as_ref().map_or(0.0, |b| b.value.data()[ch]);
                for y in 0..h {
                    for xx in 0..w {
                        let mut acc = b;
                        for dy in 0..3 {
                            let yy = y + dy;
                            if yy < 1 || yy > h {
                                continue;
                            }
                            for dx in 0..3 {
                                let xs = xx + dx;
                                if xs < 1 || xs > w {
                                    continue;
                                }
                                acc += k[dy * 3 + dx] * x[base + (yy - 1) * w + xs - 1];
                            }
                        }
                        o[base + y * w + xx] = acc;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn backward(&mut self, input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = self.check(input)?;
        check_grad_shape(grad_out, input.shape())?;
        let x = input.data();
        let g = grad_out.data();
        let wt = self.weight.value.data().to_vec();
        let mut gin = Tensor::zeros(input.shape());
        let gi = gin.data_mut();
        let gw = self.weight.grad.data_mut();
        for s in 0..n {
            for ch in 0..c {
                let base = (s * c + ch) * h * w;
                for y in 0..h {
                    for xx in 0..w {
                        let go = g[base + y * w + xx];
                        if let Some(b) = self.bias.as_mut() {
                            b.grad.data_mut()[ch] += go;
                        }
                        for dy in 0..3 {
                            let yy = y + dy;
                            if yy < 1 || yy > h {
                                continue;
                            }
                            for dx in 0..3 {
                                let xs = xx + dx;
                                if xs < 1 || xs > w {
                                    continue;
                                }
                                let idx = base + (yy - 1) * w + xs - 1;
                                gw[ch * 9 + dy * 3 + dx] += go * x[idx];
                                gi[idx] += go * wt[ch * 9 + dy * 3 + dx];
                            }
                        }
                    }
                }
            }
        }
        Ok(gin)
    }
}

/// 1×1 convolution whose channels are split into `groups` independent
/// blocks. `groups = 1` is a dense pointwise convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedPointwise {
    /// `c_out×(c_in/groups)×1×1`
    pub weight: ParamSlot,
    pub bias: Option<ParamSlot>,
    pub groups: usize,
}

impl GroupedPointwise {
    pub fn new(
        name: &str,
        c_in: usize,
        c_out: usize,
        groups: usize,
        with_bias: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        if groups == 0 || c_in % groups != 0 || c_out % groups != 0 {
            return Err(Error::IndivisibleChannels(format!(
                "c_in={c_in}, c_out={c_out}, groups={groups}"
            )));
        }
        let fan_in = c_in / groups;
        let bound = 1.0 / (fan_in as f64).sqrt();
        Ok(GroupedPointwise {
            weight: ParamSlot::new(
                format!("{name}.weight"),
                uniform(rng, &[c_out, fan_in, 1, 1], bound),
            ),
            bias: with_bias
                .then(|| ParamSlot::new(format!("{name}.bias"), uniform(rng, &[c_out], bound))),
            groups,
        })
    }

    fn dims(&self, input: &Tensor) -> Result<(usize, usize, usize, usize, usize)> {
        let (n, c_in, h, w) = input.dims4()?;
        let ws = self.weight.value.shape();
        let c_out = ws[0];
        let g = self.groups;
        if c_in % g != 0 || c_out % g != 0 {
            return Err(Error::IndivisibleChannels(format!(
                "c_in={c_in}, c_out={c_out}, groups={g}"
            )));
        }
        if ws[1] != c_in / g {
            return Err(Error::ShapeMismatch(format!(
                "grouped pointwise: input {:?} vs weight {:?}",
                input.shape(),
                ws
            )));
        }
        Ok((n, c_in, h * w, c_out, c_in / g))
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (n, c_in, plane, c_out, fan_in) = self.dims(input)?;
        let (_, _, h, w) = input.dims4()?;
        let out_per_group = c_out / self.groups;
        let x = input.data();
        let wt = self.weight.value.data();
        let mut out = Tensor::zeros(&[n, c_out, h, w]);
        let o = out.data_mut();
        for s in 0..n {
            for co in 0..c_out {
                let first_in = (co / out_per_group) * fan_in;
                let ob = (s * c_out + co) * plane;
                let b = self.bias.as_ref().map_or(0.0, |b| b.value.data()[co]);
                o[ob..ob + plane].iter_mut().for_each(|v| *v = b);
                for k in 0..fan_in {
                    let wk = wt[co * fan_in + k];
                    let ib = (s * c_in + first_in + k) * plane;
                    for p in 0..plane {
                        o[ob + p] += wk * x[ib + p];
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn backward(&mut self, input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (n, c_in, plane, c_out, fan_in) = self.dims(input)?;
        let (_, _, h, w) = input.dims4()?;
        check_grad_shape(grad_out, &[n, c_out, h, w])?;
        let out_per_group = c_out / self.groups;
        let x = input.data();
        let g = grad_out.data();
        let wt = self.weight.value.data().to_vec();
        let mut gin = Tensor::zeros(input.shape());
        let gi = gin.data_mut();
        let gw = self.weight.grad.data_mut();
        for s in 0..n {
            for co in 0..c_out {
                let first_in = (co / out_per_group) * fan_in;
                let ob = (s * c_out + co) * plane;
                if let Some(b) = self.bias.as_mut() {
                    b.grad.data_mut()[co] += g[ob..ob + plane].iter().sum::<f64>();
                }
                for k in 0..fan_in {
                    let ib = (s * c_in + first_in + k) * plane;
                    let wk = wt[co * fan_in + k];
                    let mut acc = 0.0;
                    for p in 0..plane {
                        acc += g[ob + p] * x[ib + p];
                        gi[ib + p] += g[ob + p] * wk;
                    }
                    gw[co * fan_in + k] += acc;
                }
            }
        }
        Ok(gin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Eval,
}

/// Saved forward quantities for [`BatchNorm2d::backward`].
#[derive(Debug, Clone)]
pub struct BnCache {
    mode: BnMode,
    xhat: Tensor,
    inv_std: Vec<f64>,
}

/// Batch normalization over `N×H×W` per channel.
///
/// Training mode normalizes with the biased batch variance and updates
/// the running statistics with momentum [`BN_MOMENTUM`] (the running
/// variance uses the unbiased estimate).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm2d {
    pub gamma: ParamSlot,
    pub beta: ParamSlot,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl BatchNorm2d {
    pub fn new(name: &str, channels: usize) -> Self {
        BatchNorm2d {
            gamma: ParamSlot::new(format!("{name}.gamma"), Tensor::full(&[channels], 1.0)),
            beta: ParamSlot::new(format!("{name}.beta"), Tensor::zeros(&[channels])),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.running_mean.len()
    }

    pub fn forward(&mut self, input: &Tensor, mode: BnMode) -> Result<(Tensor, BnCache)> {
        let (n, c, h, w) = input.dims4()?;
        if c != self.channels() {
            return Err(Error::ShapeMismatch(format!(
                "batch norm over {} channels got input {:?}",
                self.channels(),
                input.shape()
            )));
        }
        let plane = h * w;
        let m = n * plane;
        let (mean, var) = match mode {
            BnMode::Train => {
                if m < 2 {
                    return Err(Error::DegenerateBatch(format!(
                        "batch norm needs N*H*W >= 2 per channel, got {m}"
                    )));
                }
                let x = input.data();
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for ch in 0..c {
                    let mut sum = 0.0;
                    for s in 0..n {
                        let b = (s * c + ch) * plane;
                        sum += x[b..b + plane].iter().sum::<f64>();
                    }
                    let mu = sum / m as f64;
                    let mut sq = 0.0;
                    for s in 0..n {
                        let b = (s * c + ch) * plane;
                        sq += x[b..b + plane].iter().map(|v| (v - mu) * (v - mu)).sum::<f64>();
                    }
                    mean[ch] = mu;
                    var[ch] = sq / m as f64;
                }
                let unbias = m as f64 / (m - 1) as f64;
                for ch in 0..c {
                    self.running_mean[ch] =
                        (1.0 - BN_MOMENTUM) * self.running_mean[ch] + BN_MOMENTUM * mean[ch];
                    self.running_var[ch] =
                        (1.0 - BN_MOMENTUM) * self.running_var[ch] + BN_MOMENTUM * var[ch] * unbias;
                }
                (mean, var)
            }
            BnMode::Eval => (self.running_mean.clone(), self.running_var.clone()),
        };
        Ok(self.normalize(input, mode, &mean, &var))
    }

    /// Eval-mode forward without touching any state.
    pub fn forward_eval(&self, input: &Tensor) -> Result<Tensor> {
        let (_, c, _, _) = input.dims4()?;
        if c != self.channels() {
            return Err(Error::ShapeMismatch(format!(
                "batch norm over {} channels got input {:?}",
                self.channels(),
                input.shape()
            )));
        }
        Ok(self
            .normalize(input, BnMode::Eval, &self.running_mean, &self.running_var)
            .0)
    }

    fn normalize(&self, input: &Tensor, mode: BnMode, mean: &[f64], var: &[f64]) -> (Tensor, BnCache) {
        let (n, c, h, w) = input.dims4().expect("checked by caller");
        let plane = h * w;
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let x = input.data();
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        let mut xhat = Tensor::zeros(input.shape());
        let mut out = Tensor::zeros(input.shape());
        {
            let xh = xhat.data_mut();
            let o = out.data_mut();
            for s in 0..n {
                for ch in 0..c {
                    let b = (s * c + ch) * plane;
                    for p in b..b + plane {
                        xh[p] = (x[p] - mean[ch]) * inv_std[ch];
                        o[p] = gamma[ch] * xh[p] + beta[ch];
                    }
                }
            }
        }
        (out, BnCache { mode, xhat, inv_std })
    }

    pub fn backward(&mut self, cache: &BnCache, grad_out: &Tensor) -> Result<Tensor> {
        let (n, c, h, w) = grad_out.dims4()?;
        check_grad_shape(grad_out, cache.xhat.shape())?;
        let plane = h * w;
        let m = (n * plane) as f64;
        let g = grad_out.data();
        let xh = cache.xhat.data();
        let gamma = self.gamma.value.data().to_vec();
        let mut gin = Tensor::zeros(grad_out.shape());
        let gi = gin.data_mut();
        for ch in 0..c {
            let mut sum_g = 0.0;
            let mut sum_gx = 0.0;
            for s in 0..n {
                let b = (s * c + ch) * plane;
                for p in b..b + plane {
                    sum_g += g[p];
                    sum_gx += g[p] * xh[p];
                }
            }
            self.gamma.grad.data_mut()[ch] += sum_gx;
            self.beta.grad.data_mut()[ch] += sum_g;
            let scale = gamma[ch] * cache.inv_std[ch];
            for s in 0..n {
                let b = (s * c + ch) * plane;
                for p in b..b + plane {
                    gi[p] = match cache.mode {
                        BnMode::Train => scale * (g[p] - sum_g / m - xh[p] * sum_gx / m),
                        BnMode::Eval => scale * g[p],
                    };
                }
            }
        }
        Ok(gin)
    }
}

/// Fully connected layer on `N×in` inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    /// `out×in`
    pub weight: ParamSlot,
    pub bias: ParamSlot,
}

impl Linear {
    pub fn new(name: &str, d_in: usize, d_out: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (d_in as f64).sqrt();
        Linear {
            weight: ParamSlot::new(format!("{name}.weight"), uniform(rng, &[d_out, d_in], bound)),
            bias: ParamSlot::new(format!("{name}.bias"), uniform(rng, &[d_out], bound)),
        }
    }

    fn dims(&self, input: &Tensor) -> Result<(usize, usize, usize)> {
        let ws = self.weight.value.shape();
        match *input.shape() {
            [n, d] if d == ws[1] => Ok((n, d, ws[0])),
            _ => Err(Error::ShapeMismatch(format!(
                "linear: input {:?} vs weight {:?}",
                input.shape(),
                ws
            ))),
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let (n, d_in, d_out) = self.dims(input)?;
        let x = input.data();
        let wt = self.weight.value.data();
        let b = self.bias.value.data();
        Ok(Tensor::from_fn(&[n, d_out], |idx| {
            let (s, o) = (idx / d_out, idx % d_out);
            b[o] + (0..d_in).map(|k| wt[o * d_in + k] * x[s * d_in + k]).sum::<f64>()
        }))
    }

    pub fn backward(&mut self, input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
        let (n, d_in, d_out) = self.dims(input)?;
        check_grad_shape(grad_out, &[n, d_out])?;
        let x = input.data();
        let g = grad_out.data();
        let wt = self.weight.value.data().to_vec();
        let mut gin = Tensor::zeros(input.shape());
        let gi = gin.data_mut();
        for s in 0..n {
            for o in 0..d_out {
                let go = g[s * d_out + o];
                self.bias.grad.data_mut()[o] += go;
                for k in 0..d_in {
                    self.weight.grad.data_mut()[o * d_in + k] += go * x[s * d_in + k];
                    gi[s * d_in + k] += go * wt[o * d_in + k];
                }
            }
        }
        Ok(gin)
    }
}

pub fn relu(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gv, x) in g.data_mut().iter_mut().zip(input.data()) {
        if *x <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

/// Largest `f64` strictly below 1.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function, clamped into the open interval (0, 1).
pub fn sigmoid(input: &Tensor) -> Tensor {
    let mut out = input.clone();
    out.data_mut().iter_mut().for_each(|v| {
        let s = if *v >= 0.0 {
            1.0 / (1.0 + (-*v).exp())
        } else {
            let e = v.exp();
            e / (1.0 + e)
        };
        *v = s.clamp(f64::MIN_POSITIVE, ONE_MINUS);
    });
    out
}

/// Gradient through the sigmoid given its output.
pub fn sigmoid_backward(output: &Tensor, grad_out: &Tensor) -> Tensor {
    let mut g = grad_out.clone();
    for (gv, y) in g.data_mut().iter_mut().zip(output.data()) {
        *gv *= y * (1.0 - y);
    }
    g
}

/// Mean over both spatial axes: `N×C×H×W → N×C`.
pub fn global_avg_pool(input: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = input.dims4()?;
    let plane = h * w;
    let x = input.data();
    Ok(Tensor::from_fn(&[n, c], |i| {
        x[i * plane..(i + 1) * plane].iter().sum::<f64>() / plane as f64
    }))
}

pub fn global_avg_pool_backward(input_shape: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = match *input_shape {
        [n, c, h, w] => (n, c, h, w),
        _ => return Err(Error::ShapeMismatch(format!("pool input {input_shape:?}"))),
    };
    check_grad_shape(grad_out, &[n, c])?;
    let plane = h * w;
    let g = grad_out.data();
    Ok(Tensor::from_fn(input_shape, |i| g[i / plane] / plane as f64))
}
