//! Binary cross-entropy, the quadratic disparity ranking (QDR) loss and
//! their weighted combination.
//!
//! QDR averages a squared hinge over every (speech, non-speech) pair:
//!
//! ```text
//! qdr = 1/(|P||N|) * sum_{i in P} sum_{j in N} max(0, m - (y_i - y_j))^2
//! ```
//!
//! A batch with only one class has no pairs; its QDR term is defined as 0
//! and flagged so training can continue on BCE alone.

use crate::error::{Error, Result};

/// Scores are clamped into `[BCE_CLAMP, 1 - BCE_CLAMP]` before the logs.
pub const BCE_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct ScoreBatch<'a> {
    pub scores: &'a [f64],
    pub labels: &'a [u8],
}

impl<'a> ScoreBatch<'a> {
    pub fn new(scores: &'a [f64], labels: &'a [u8]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} scores vs {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.is_empty() {
            return Err(Error::Empty("score batch".into()));
        }
        Ok(ScoreBatch { scores, labels })
    }

    pub fn positives(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores
            .iter()
            .zip(self.labels)
            .filter(|(_, &l)| l != 0)
            .map(|(&s, _)| s)
    }

    pub fn negatives(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores
            .iter()
            .zip(self.labels)
            .filter(|(_, &l)| l == 0)
            .map(|(&s, _)| s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub margin: f64,
    pub lambda: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            margin: 1.0,
            lambda: 0.25,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(Error::InvalidConfig(format!("margin must be > 0, got {}", self.margin)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidConfig(format!("lambda must be in [0, 1], got {}", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QdrValue {
    pub value: f64,
    /// No positive or no negative in the batch.
    pub degenerate: bool,
}

fn clamp_score(s: f64) -> f64 {
    s.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP)
}

/// Mean binary cross-entropy (natural log).
pub fn bce(batch: &ScoreBatch<'_>) -> Result<f64> {
    let mut total = 0.0;
    for (&s, &y) in batch.scores.iter().zip(batch.labels) {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::ScoreOutOfRange(s));
        }
        let p = clamp_score(s);
        total += if y != 0 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(-total / batch.scores.len() as f64)
}

pub fn qdr(batch: &ScoreBatch<'_>, margin: f64) -> QdrValue {
    let negatives: Vec<f64> = batch.negatives().collect();
    let mut n_pos = 0usize;
    let mut sum = 0.0;
    for p in batch.positives() {
        n_pos += 1;
        for &q in &negatives {
            let h = (margin - (p - q)).max(0.0);
            sum += h * h;
        }
    }
    if n_pos == 0 || negatives.is_empty() {
        return QdrValue {
            value: 0.0,
            degenerate: true,
        };
    }
    QdrValue {
        value: sum / (n_pos as f64 * negatives.len() as f64),
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub bce: f64,
    pub qdr: f64,
    pub qdr_degenerate: bool,
}

/// `lambda * qdr + (1 - lambda) * bce`.
pub fn total_loss(batch: &ScoreBatch<'_>, cfg: &LossConfig) -> Result<LossBreakdown> {
    let b = bce(batch)?;
    let q = qdr(batch, cfg.margin);
    Ok(LossBreakdown {
        total: cfg.lambda * q.value + (1.0 - cfg.lambda) * b,
        bce: b,
        qdr: q.value,
        qdr_degenerate: q.degenerate,
    })
}

/// `d total_loss / d score` for every sample.
pub fn loss_backward(batch: &ScoreBatch<'_>, cfg: &LossConfig) -> Result<Vec<f64>> {
    let n = batch.scores.len() as f64;
    let mut grad = Vec::with_capacity(batch.scores.len());
    for (&s, &y) in batch.scores.iter().zip(batch.labels) {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::ScoreOutOfRange(s));
        }
        let p = clamp_score(s);
        let g = if y != 0 { -1.0 / p } else { 1.0 / (1.0 - p) };
        grad.push((1.0 - cfg.lambda) * g / n);
    }
    let pos: Vec<usize> = (0..batch.labels.len()).filter(|&i| batch.labels[i] != 0).collect();
    let neg: Vec<usize> = (0..batch.labels.len()).filter(|&i| batch.labels[i] == 0).collect();
    if !pos.is_empty() && !neg.is_empty() && cfg.lambda != 0.0 {
        let scale = cfg.lambda * 2.0 / (pos.len() as f64 * neg.len() as f64);
        for &i in &pos {
            for &j in &neg {
                let slack = cfg.margin - (batch.scores[i] - batch.scores[j]);
                if slack > 0.0 {
                    grad[i] -= scale * slack;
                    grad[j] += scale * slack;
                }
            }
        }
    }
    Ok(grad)
}
