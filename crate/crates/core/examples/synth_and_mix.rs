//! Writes a small synthetic dataset, then mixes one speech clip with a
//! background clip at several SNRs and reports the achieved ratio.
//!
//! `cargo run --example synth_and_mix -- [out_dir]`

use std::path::{Path, PathBuf};

use sqdr::signal::{self, SnrMixSpec};

pub fn run_example(out_dir: &Path) -> anyhow::Result<Vec<f64>> {
    let clips = signal::synth_dataset(7, 8, 0.5)?;
    signal::export_dataset(&clips, out_dir)?;
    println!("wrote {} clips and manifest.tsv to {}", clips.len(), out_dir.display());

    let speech = clips.iter().find(|c| c.active.is_some()).expect("half are speech");
    let noise = clips.iter().find(|c| c.active.is_none()).expect("half are background");
    let mut achieved = Vec::new();
    for snr in [20.0, 10.0, 0.0, -10.0] {
        let mixed = signal::mix_at_snr(&speech.clip, &noise.clip, SnrMixSpec { snr_db: snr, seed: 1 })?;
        let resid: Vec<f64> = mixed.samples.iter().zip(&speech.clip.samples).map(|(m, s)| m - s).collect();
        let got = 20.0 * (speech.clip.rms() / signal::rms(&resid)).log10();
        println!("target {snr:>6.1} dB  achieved {got:>9.5} dB  peak {:.3}", mixed.peak());
        signal::write_wav(&mixed, out_dir.join(format!("mix_{snr}.wav")))?;
        achieved.push(got);
    }
    Ok(achieved)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("sqdr_synth"));
    run_example(&out)?;
    Ok(())
}
