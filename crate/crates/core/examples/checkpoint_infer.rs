//! Saves a seeded model to a checkpoint, reloads it, and scores a longer
//! recording window by window with smoothing and a decision threshold.
//!
//! `cargo run --example checkpoint_infer -- [checkpoint.sqdr]`

use std::path::{Path, PathBuf};

use sqdr::checkpoint::{self, TrainMeta};
use sqdr::cli;
use sqdr::metrics::EvalOptions;
use sqdr::model::{ModelConfig, VadModel};
use sqdr::signal::{self, AudioClip};

pub fn run_example(path: &Path) -> anyhow::Result<usize> {
    let model = VadModel::build(ModelConfig::default(), 42)?;
    checkpoint::save(&model, TrainMeta { epoch: 0, seed: 42 }, false, path)?;
    let loaded = checkpoint::load(path)?;
    anyhow::ensure!(loaded.model == model, "checkpoint round trip changed the model");
    println!("{} parameters, {} bytes on disk", loaded.model.param_count(), std::fs::metadata(path)?.len());

    // Three seconds: background, speech, background.
    let parts = signal::synth_dataset(9, 3, 1.0 / 3.0)?;
    let samples: Vec<f64> = parts.iter().flat_map(|c| c.clip.samples.iter().copied()).collect();
    let clip = AudioClip::new(samples, 16_000)?;
    let opts = EvalOptions { smooth: true, ..EvalOptions::default() };
    let rows = cli::infer_clip(&loaded.model, &clip, &opts)?;
    print!("offset_s\tscore\tdecision\n{rows}");
    Ok(rows.lines().count())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("sqdr_example.sqdr"));
    run_example(&path)?;
    Ok(())
}
