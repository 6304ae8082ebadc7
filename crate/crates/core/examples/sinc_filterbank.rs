//! Builds the mel-initialized sinc filterbank, prints a few band edges and
//! their measured response, and extracts log-energy features from a tone.
//!
//! `cargo run --example sinc_filterbank`

use sqdr::frontend::{self, FrontendConfig};
use sqdr::signal::AudioClip;

pub fn run_example() -> anyhow::Result<usize> {
    let cfg = FrontendConfig::default();
    let params = frontend::init_mel(&cfg)?;
    let (freqs, resp) = frontend::magnitude_response(&params, &cfg, 4096);
    let sr = f64::from(cfg.sample_rate);
    for (i, c) in params.cutoffs(&cfg).iter().enumerate().step_by(9) {
        let (lo, hi) = (frontend::rad_to_hz(c.low, cfg.sample_rate), frontend::rad_to_hz(c.high, cfg.sample_rate));
        let row = resp.row(i);
        let (k, peak) = row.iter().enumerate().fold((0, f64::MIN), |a, (k, &v)| if v > a.1 { (k, v) } else { a });
        println!("filter {i:2}: {lo:7.1} - {hi:7.1} Hz, peak {peak:6.2} dB at {:7.1} Hz", freqs[k]);
    }

    let tone = AudioClip::new((0..16_000).map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / sr).sin()).collect(), 16_000)?;
    let frames = frontend::frame_signal(&tone, &cfg)?;
    let fm = frontend::extract(&params, &frames, &cfg)?;
    let col = fm.values.column(10);
    let best = col.iter().enumerate().fold((0, f64::MIN), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    println!("1 kHz tone: {} frames x {} filters, loudest filter {}", fm.n_frames(), fm.n_filters(), best.0);
    Ok(best.0)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
