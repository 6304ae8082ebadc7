//! Runs one training-mode forward and backward pass through the network and
//! compares a handful of analytic gradients with central differences.
//!
//! `cargo run --example gradient_check`

use sqdr::model::{ModelConfig, VadModel};
use sqdr::nn::{BnMode, Tensor};

fn objective(model: &VadModel, x: &Tensor) -> f64 {
    let mut m = model.clone();
    m.forward_train(x, BnMode::Train).expect("valid input").iter().sum()
}

pub fn run_example() -> anyhow::Result<f64> {
    let mut model = VadModel::build(ModelConfig { channels: 16, ..ModelConfig::default() }, 3)?;
    let x = Tensor::from_fn(&[4, 1, 64, 16], |i| ((i * 7919) % 101) as f64 / 50.0 - 1.0);
    let probs = model.forward_train(&x, BnMode::Train)?;
    model.backward(&vec![1.0; probs.len()])?;

    let h = 1e-5;
    let mut worst = 0.0_f64;
    let n_slots = model.params().len();
    for s in (0..n_slots).step_by(3) {
        let (name, analytic) = {
            let p = &model.params()[s];
            (p.name.clone(), p.grad.data()[0])
        };
        let mut up = model.clone();
        up.params_mut()[s].value.data_mut()[0] += h;
        let mut down = model.clone();
        down.params_mut()[s].value.data_mut()[0] -= h;
        let numeric = (objective(&up, &x) - objective(&down, &x)) / (2.0 * h);
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(err);
        println!("{name:<22} analytic {analytic:+.6e}  numeric {numeric:+.6e}  rel {err:.1e}");
    }
    Ok(worst)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
