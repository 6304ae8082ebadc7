//! Central finite-difference checks shared by the gradient tests and the
//! acceptance run.

use super::{random_tensor, rng};
use ndarray::Array2;
use rand::Rng as _;
use sqdr::frontend::{self, FrontendConfig, SincParams};
use sqdr::loss::{self, LossConfig, ScoreBatch};
use sqdr::nn::{
    global_avg_pool, global_avg_pool_backward, relu, relu_backward, sigmoid, sigmoid_backward,
    BatchNorm2d, BnMode, DepthwiseConv3x3, GroupedPointwise, Linear, PatchifyConv, Tensor,
};

pub const STEP: f64 = 1e-5;

/// One checked gradient: name, max relative error, tolerance.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub err: f64,
    pub tol: f64,
}

impl Check {
    pub fn ok(&self) -> bool {
        self.err < self.tol
    }
}

/// `max|a - n| / max(max|a|, max|n|)`: error relative to the gradient's scale.
pub fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let scale = analytic
        .iter()
        .chain(numeric)
        .fold(0.0_f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    analytic
        .iter()
        .zip(numeric)
        .fold(0.0_f64, |m, (a, n)| m.max((a - n).abs()))
        / scale
}

/// Central differences of `loss` with respect to each entry of `x`.
pub fn numeric(x: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut buf = x.to_vec();
    (0..x.len())
        .map(|i| {
            buf[i] = x[i] + STEP;
            let up = loss(&buf);
            buf[i] = x[i] - STEP;
            let down = loss(&buf);
            buf[i] = x[i];
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn with(shape: &[usize], data: &[f64]) -> Tensor {
    Tensor::from_vec(shape, data.to_vec()).unwrap()
}

fn push(out: &mut Vec<Check>, name: &str, tol: f64, a: &[f64], n: &[f64]) {
    out.push(Check {
        name: name.to_string(),
        err: rel_err(a, n),
        tol,
    });
}

/// Keeps values at least `gap` away from zero so kinks are not straddled.
fn off_zero(t: &mut Tensor, gap: f64) {
    for v in t.data_mut() {
        if v.abs() < gap {
            *v = if *v < 0.0 { -gap } else { gap };
        }
    }
}

/// Checks every layer; shapes stay within 4×8×8×8.
pub fn layer_checks(seed: u64) -> Vec<Check> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    let tol = 1e-4;

    // patchify: 2×2×8×8 -> 4 channels with 4×4 patches
    {
        let mut layer = PatchifyConv::new("p", 2, 4, 4, &mut r);
        let x = random_tensor(&[2, 2, 8, 8], &mut r);
        let up = random_tensor(&[2, 4, 2, 2], &mut r);
        let dx = layer.backward(&x, &up).unwrap();
        let nx = numeric(x.data(), |v| dot(&layer.forward(&with(x.shape(), v)).unwrap(), &up));
        push(&mut out, "patchify input", tol, dx.data(), &nx);
        let w0 = layer.weight.value.clone();
        let nw = numeric(w0.data(), |v| {
            let mut l = layer.clone();
            l.weight.value = with(w0.shape(), v);
            dot(&l.forward(&x).unwrap(), &up)
        });
        push(&mut out, "patchify weight", tol, layer.weight.grad.data(), &nw);
        let b0 = layer.bias.value.clone();
        let nb = numeric(b0.data(), |v| {
            let mut l = layer.clone();
            l.bias.value = with(b0.shape(), v);
            dot(&l.forward(&x).unwrap(), &up)
        });
        push(&mut out, "patchify bias", tol, layer.bias.grad.data(), &nb);
    }

    // depthwise 3×3 with bias
    {
        let mut layer = DepthwiseConv3x3::new("d", 8, true, &mut r);
        let x = random_tensor(&[4, 8, 8, 8], &mut r);
        let up = random_tensor(&[4, 8, 8, 8], &mut r);
        let dx = layer.backward(&x, &up).unwrap();
        let nx = numeric(x.data(), |v| dot(&layer.forward(&with(x.shape(), v)).unwrap(), &up));
        push(&mut out, "depthwise input", tol, dx.data(), &nx);
        let w0 = layer.weight.value.clone();
        let nw = numeric(w0.data(), |v| {
            let mut l = layer.clone();
            l.weight.value = with(w0.shape(), v);
            dot(&l.forward(&x).unwrap(), &up)
        });
        push(&mut out, "depthwise weight", tol, layer.weight.grad.data(), &nw);
        let bias = layer.bias.clone().unwrap();
        let nb = numeric(bias.value.data(), |v| {
            let mut l = layer.clone();
            l.bias.as_mut().unwrap().value = with(bias.value.shape(), v);
            dot(&l.forward(&x).unwrap(), &up)
        });
        push(&mut out, "depthwise bias", tol, bias.grad.data(), &nb);
    }

    // grouped pointwise, 8 -> 8 channels in 4 groups
    {
        let mut layer = GroupedPointwise::new("g", 8, 8, 4, true, &mut r).unwrap();
        let x = random_tensor(&[3, 8, 5, 7], &mut r);
        let up = random_tensor(&[3, 8, 5, 7], &mut r);
        let dx = layer.backward(&x, &up).unwrap();
        let nx = numeric(x.data(), |v| dot(&layer.forward(&with(x.shape(), v)).unwrap(), &up));
        push(&mut out, "grouped pointwise input", tol, dx.data(), &nx);
        let w0 = layer.weight.value.clone();
        let nw = numeric(w0.data(), |v| {
            let mut l = layer.clone();
            l.weight.value = with(w0.shape(), v);
            dot(&l.forward(&x).unwrap(), &up)
        });
        push(&mut out, "grouped pointwise weight", tol, layer.weight.grad.data(), &nw);
        let bias = layer.bias.clone().unwrap();
        let nb = numeric(bias.value.data(), |v| {
            let mut l = layer.clone();
            l.bias.as_mut().unwrap().value = with(bias.value.shape(), v);
            dot(&l.forward(&x).unwrap(), &up)
        });
        push(&mut out, "grouped pointwise bias", tol, bias.grad.data(), &nb);
    }

    // batch norm in training mode
    {
        let bn_tol = 1e-3;
        let mut layer = BatchNorm2d::new("bn", 4);
        for (i, g) in layer.gamma.value.data_mut().iter_mut().enumerate() {
            *g = 0.5 + 0.3 * i as f64;
        }
        for b in layer.beta.value.data_mut() {
            *b = r.gen_range(-0.5..0.5);
        }
        let mut x = random_tensor(&[4, 4, 6, 6], &mut r);
        for (i, v) in x.data_mut().iter_mut().enumerate() {
            *v = *v * 2.0 + (i % 3) as f64;
        }
        let up = random_tensor(&[4, 4, 6, 6], &mut r);
        let (_, cache) = layer.forward(&x, BnMode::Train).unwrap();
        let dx = layer.backward(&cache, &up).unwrap();
        let eval = |l: &BatchNorm2d, input: &Tensor| {
            let mut l = l.clone();
            dot(&l.forward(input, BnMode::Train).unwrap().0, &up)
        };
        let nx = numeric(x.data(), |v| eval(&layer, &with(x.shape(), v)));
        push(&mut out, "batch norm input", bn_tol, dx.data(), &nx);
        let g0 = layer.gamma.value.clone();
        let ng = numeric(g0.data(), |v| {
            let mut l = layer.clone();
            l.gamma.value = with(g0.shape(), v);
            eval(&l, &x)
        });
        push(&mut out, "batch norm gamma", bn_tol, layer.gamma.grad.data(), &ng);
        let b0 = layer.beta.value.clone();
        let nb = numeric(b0.data(), |v| {
            let mut l = layer.clone();
            l.beta.value = with(b0.shape(), v);
            eval(&l, &x)
        });
        push(&mut out, "batch norm beta", bn_tol, layer.beta.grad.data(), &nb);
    }

    // linear
    {
        let mut layer = Linear::new("fc", 8, 3, &mut r);
        let x = random_tensor(&[4, 8], &mut r);
        let up = random_tensor(&[4, 3], &mut r);
        let dx = layer.backward(&x, &up).unwrap();
        let nx = numeric(x.data(), |v| dot(&layer.forward(&with(x.shape(), v)).unwrap(), &up));
        push(&mut out, "linear input", tol, dx.data(), &nx);
        let w0 = layer.weight.value.clone();
        let nw = numeric(w0.data(), |v| {
            let mut l = layer.clone();
            l.weight.value = with(w0.shape(), v);
            dot(&l.forward(&x).unwrap(), &up)
        });
        push(&mut out, "linear weight", tol, layer.weight.grad.data(), &nw);
        let b0 = layer.bias.value.clone();
        let nb = numeric(b0.data(), |v| {
            let mut l = layer.clone();
            l.bias.value = with(b0.shape(), v);
            dot(&l.forward(&x).unwrap(), &up)
        });
        push(&mut out, "linear bias", tol, layer.bias.grad.data(), &nb);
    }

    // element-wise and pooling
    {
        let mut x = random_tensor(&[4, 8, 8, 8], &mut r);
        off_zero(&mut x, 1e-3);
        let up = random_tensor(&[4, 8, 8, 8], &mut r);
        let dx = relu_backward(&x, &up);
        let nx = numeric(x.data(), |v| dot(&relu(&with(x.shape(), v)), &up));
        push(&mut out, "relu", tol, dx.data(), &nx);

        let x = Tensor::from_fn(&[4, 3], |_| r.gen_range(-4.0..4.0));
        let up = random_tensor(&[4, 3], &mut r);
        let y = sigmoid(&x);
        let dx = sigmoid_backward(&y, &up);
        let nx = numeric(x.data(), |v| dot(&sigmoid(&with(x.shape(), v)), &up));
        push(&mut out, "sigmoid", tol, dx.data(), &nx);

        let x = random_tensor(&[4, 8, 8, 8], &mut r);
        let up = random_tensor(&[4, 8], &mut r);
        let dx = global_avg_pool_backward(x.shape(), &up).unwrap();
        let nx = numeric(x.data(), |v| dot(&global_avg_pool(&with(x.shape(), v)).unwrap(), &up));
        push(&mut out, "global average pool", tol, dx.data(), &nx);
    }
    out
}

fn feature_loss(params: &SincParams, frames: &Array2<f64>, cfg: &FrontendConfig, up: &Array2<f64>) -> f64 {
    let fm = frontend::extract(params, frames, cfg).unwrap();
    (&fm.values * up).sum()
}

/// Front-end check over all `3F` parameters on a random 4-frame input.
///
/// Cutoff scalars are drawn away from zero and from the clamps, where the
/// reparameterization has kinks.
pub fn frontend_checks(seed: u64) -> Vec<Check> {
    let mut r = rng(seed);
    let cfg = FrontendConfig {
        n_filters: 12,
        ..FrontendConfig::default()
    };
    let f = cfg.n_filters;
    let t1: Vec<f64> = (0..f)
        .map(|i| {
            let v = 0.05 + 0.2 * i as f64 + r.gen_range(0.0..0.05);
            if r.gen_bool(0.5) { v } else { -v }
        })
        .collect();
    let t2: Vec<f64> = (0..f).map(|_| r.gen_range(0.05..0.4)).collect();
    let gain: Vec<f64> = (0..f).map(|_| r.gen_range(0.5..1.5)).collect();
    let params = SincParams::from_values(t1, t2, gain).unwrap();
    let samples: Vec<f64> = (0..cfg.frame_len + 3 * cfg.hop_len)
        .map(|_| r.gen_range(-1.0..1.0))
        .collect();
    let frames = frontend::frame_samples(&samples, &cfg).unwrap();
    assert_eq!(frames.nrows(), 4);
    let up = Array2::from_shape_fn((f, 4), |_| r.gen_range(-1.0..1.0));
    let g = frontend::extract_backward(&params, &frames, &cfg, &up).unwrap();

    let slot_values = |p: &SincParams, k: usize| p.slots()[k].value.data().to_vec();
    let mut out = Vec::new();
    for (k, (name, analytic)) in [
        ("front-end theta_low", &g.theta_low),
        ("front-end theta_band", &g.theta_band),
        ("front-end gain", &g.gain),
    ]
    .into_iter()
    .enumerate()
    {
        let base = slot_values(&params, k);
        let n = numeric(&base, |v| {
            let mut p = params.clone();
            p.slots_mut()[k].value = with(&[f], v);
            feature_loss(&p, &frames, &cfg, &up)
        });
        push(&mut out, name, 1e-4, analytic, &n);
    }
    out
}

/// Loss gradient with respect to scores on random batches.
pub fn loss_checks(seed: u64) -> Vec<Check> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    for (trial, lambda) in [0.0, 0.25, 0.5, 1.0].into_iter().enumerate() {
        let n = 12;
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        let scores: Vec<f64> = (0..n).map(|_| r.gen_range(0.05..0.95)).collect();
        let cfg = LossConfig {
            lambda,
            ..LossConfig::default()
        };
        let batch = ScoreBatch::new(&scores, &labels).unwrap();
        let a = loss::loss_backward(&batch, &cfg).unwrap();
        let num = numeric(&scores, |s| {
            loss::total_loss(&ScoreBatch::new(s, &labels).unwrap(), &cfg)
                .unwrap()
                .total
        });
        push(&mut out, &format!("loss lambda={lambda} #{trial}"), 1e-6, &a, &num);
    }
    out
}

pub fn full_suite(seed: u64) -> Vec<Check> {
    let mut all = layer_checks(seed);
    all.extend(frontend_checks(seed + 1));
    all.extend(loss_checks(seed + 2));
    all
}
