//! Trains a compact model for a few epochs, then scores a held-out synthetic
//! set mixed with background noise at several SNRs (plus the average row).
//!
//! `cargo run --release --example evaluate_snr_sweep -- [epochs]`

use sqdr::metrics::{self, EvalOptions};
use sqdr::model::ModelConfig;
use sqdr::signal;
use sqdr::trainer::{self, TrainConfig};

pub fn run_example(epochs: usize) -> anyhow::Result<metrics::EvalReport> {
    let train_set = signal::synth_dataset(31, 96, 0.5)?;
    let val_set = signal::synth_dataset(32, 16, 0.5)?;
    let model_cfg = ModelConfig { channels: 16, ..ModelConfig::default() };
    let cfg = TrainConfig { epochs, batch_size: 16, seed: 5, ..TrainConfig::default() };
    let out = trainer::train(&train_set, &val_set, model_cfg, &cfg)?;

    let eval_set = signal::synth_dataset(33, 32, 0.5)?;
    let noise = signal::synth_noise_bank(34, 8)?;
    let clean = trainer::evaluate(&out.best, &eval_set, &EvalOptions { smooth: true, ..EvalOptions::default() })?;
    println!("clean: auroc {:.4}  f2 {:.4}", clean.auroc, clean.f2);
    let report = metrics::snr_sweep(&out.best, &eval_set, &noise, &[10.0, 5.0, 0.0, -5.0, -10.0], &EvalOptions::default(), 35)?;
    print!("{}", report.to_csv());
    Ok(report)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    let epochs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    run_example(epochs)?;
    Ok(())
}
