//! Evaluates the pairwise ranking loss, cross-entropy and their blend on a
//! few hand-made batches, with the score gradients.
//!
//! `cargo run --example qdr_loss`

use sqdr::loss::{self, LossConfig, ScoreBatch};
use sqdr::metrics;

pub fn run_example() -> anyhow::Result<f64> {
    let cfg = LossConfig { lambda: 0.25, margin: 1.0 };
    let batches: [(&[f64], &[u8]); 3] = [
        (&[0.9, 0.6, 0.4], &[1, 1, 0]),
        (&[0.9, 0.2], &[1, 0]),
        (&[0.3, 0.7, 0.5, 0.1], &[1, 0, 1, 0]),
    ];
    let mut first = f64::NAN;
    for (scores, labels) in batches {
        let b = ScoreBatch::new(scores, labels)?;
        let parts = loss::total_loss(&b, &cfg)?;
        let grad = loss::loss_backward(&b, &cfg)?;
        println!(
            "scores {scores:?} labels {labels:?}\n  qdr {:.6}  bce {:.6}  total {:.6}  auroc {:.3}\n  dL/ds {grad:.4?}",
            parts.qdr,
            parts.bce,
            parts.total,
            metrics::auroc(scores, labels)?
        );
        if first.is_nan() {
            first = parts.qdr;
        }
    }
    Ok(first)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example()?;
    Ok(())
}
