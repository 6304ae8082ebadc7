//! Trains a small model on synthetic clips and reports training-set metrics.
//!
//! `cargo run --release --example train_small -- [epochs] [clips]`

use std::time::Instant;

use sqdr::metrics::{self, EvalOptions};
use sqdr::model::ModelConfig;
use sqdr::signal;
use sqdr::trainer::{self, TrainConfig};

pub fn run_example(epochs: usize, clips: usize) -> anyhow::Result<f64> {
    let train_set = signal::synth_dataset(1, clips, 0.5)?;
    let val_set = signal::synth_dataset(2, 32, 0.5)?;
    let cfg = TrainConfig { epochs, seed: 3, ..TrainConfig::default() };
    let start = Instant::now();
    let out = trainer::train(&train_set, &val_set, ModelConfig::default(), &cfg)?;
    for r in &out.log.records {
        println!(
            "epoch {:3}  lr {:.5}  loss {:.4} (bce {:.4}, qdr {:.4})  val auroc {:.4}  f2 {:.4}",
            r.epoch, r.lr, r.total, r.bce, r.qdr, r.val_auroc, r.val_f2
        );
    }
    let report = metrics::evaluate_clips(&out.last, &train_set, &EvalOptions::default(), "train")?;
    println!(
        "train-set auroc {:.4}  f2 {:.4}  ({:.1} s)",
        report.auroc,
        report.f2,
        start.elapsed().as_secs_f64()
    );
    Ok(report.auroc)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let clips = args.next().map(|s| s.parse()).transpose()?.unwrap_or(256);
    run_example(epochs, clips)?;
    Ok(())
}
