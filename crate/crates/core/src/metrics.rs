//! Rank-based AUROC, F-beta, median smoothing of window scores, and
//! dataset-level evaluation including the SNR sweep.

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::model::VadModel;
use crate::rng;
use crate::signal::{self, AudioClip, LabeledClip, SnrMixSpec};

/// Mann-Whitney AUROC with average ranks for ties (tied pairs count 0.5).
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l != 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let tied_pos = order[i..j].iter().filter(|&&k| labels[k] != 0).count();
        pos_rank_sum += avg_rank * tied_pos as f64;
        i = j;
    }
    let np = n_pos as f64;
    let u = pos_rank_sum - np * (np + 1.0) / 2.0;
    Ok(u / (np * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FScore {
    pub value: f64,
    pub precision: f64,
    pub recall: f64,
    /// Precision or recall undefined (no predicted or no actual positives).
    pub degenerate: bool,
}

/// F-beta with predictions `score >= threshold`.
pub fn f_beta(scores: &[f64], labels: &[u8], threshold: f64, beta: f64) -> FScore {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let degenerate = tp + fp == 0 || tp + fn_ == 0;
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let b2 = beta * beta;
    let value = if precision + recall == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / (b2 * precision + recall)
    };
    FScore {
        value,
        precision,
        recall,
        degenerate,
    }
}

pub const SMOOTH_WINDOW: usize = 8;

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Sliding median over 8 scores with hop 1 (7/8 overlap).
///
/// Away from the edges position `i` uses `[i-4, i+3]`; within 4 of either
/// end the window shrinks to the symmetric odd window `[i-r, i+r]` with
/// `r = min(i, n-1-i)`. Even windows take the mean of the two central values.
pub fn median_smooth(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let half = SMOOTH_WINDOW / 2;
    let mut buf = Vec::with_capacity(SMOOTH_WINDOW + 1);
    (0..n)
        .map(|i| {
            let r = half.min(i).min(n - 1 - i);
            let (lo, hi) = if r == half { (i - half, i + half - 1) } else { (i - r, i + r) };
            buf.clear();
            buf.extend_from_slice(&scores[lo..=hi]);
            median(&mut buf)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionMetrics {
    pub name: String,
    pub auroc: f64,
    pub f2: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub auroc: f64,
    pub f2: f64,
    pub threshold: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub conditions: Vec<ConditionMetrics>,
}

impl EvalReport {
    pub fn to_json(&self) -> Value {
        let mut conditions = Map::new();
        for c in &self.conditions {
            conditions.insert(
                c.name.clone(),
                json!({ "auroc": c.auroc, "f2": c.f2, "n_pos": c.n_pos, "n_neg": c.n_neg }),
            );
        }
        json!({
            "auroc": self.auroc,
            "f2": self.f2,
            "threshold": self.threshold,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "conditions": conditions,
        })
    }

    /// `condition,auroc,f2` table, one row per condition.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,auroc,f2\n");
        for c in &self.conditions {
            out.push_str(&format!("{},{:.6},{:.6}\n", c.name, c.auroc, c.f2));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub window_s: f64,
    pub stride_s: f64,
    pub smooth: bool,
    pub threshold: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            window_s: 0.63,
            stride_s: 0.15,
            smooth: false,
            threshold: 0.5,
        }
    }
}

/// Window scores and labels over a set of clips, in clip then window order.
pub fn score_clips(model: &VadModel, clips: &[LabeledClip], opts: &EvalOptions) -> Result<(Vec<f64>, Vec<u8>)> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for c in clips {
        let windows = model.predict_windows(&c.clip, opts.window_s, opts.stride_s)?;
        let raw: Vec<f64> = windows.iter().map(|w| w.1).collect();
        let s = if opts.smooth { median_smooth(&raw) } else { raw };
        scores.extend(s);
        labels.extend(windows.iter().map(|w| c.window_label(w.0, opts.window_s)));
    }
    Ok((scores, labels))
}

pub fn condition_metrics(name: &str, scores: &[f64], labels: &[u8], threshold: f64) -> Result<ConditionMetrics> {
    let n_pos = labels.iter().filter(|&&l| l != 0).count();
    Ok(ConditionMetrics {
        name: name.to_string(),
        auroc: auroc(scores, labels)?,
        f2: f_beta(scores, labels, threshold, 2.0).value,
        n_pos,
        n_neg: labels.len() - n_pos,
    })
}

/// Scores every window of every clip and summarizes as a single condition.
pub fn evaluate_clips(model: &VadModel, clips: &[LabeledClip], opts: &EvalOptions, name: &str) -> Result<EvalReport> {
    if clips.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let (scores, labels) = score_clips(model, clips, opts)?;
    let m = condition_metrics(name, &scores, &labels, opts.threshold)?;
    Ok(EvalReport {
        auroc: m.auroc,
        f2: m.f2,
        threshold: opts.threshold,
        n_pos: m.n_pos,
        n_neg: m.n_neg,
        conditions: vec![m],
    })
}

/// Mixes each clip with noise at `snr_db`. Clip `k` always gets the same
/// noise file and crop offset, whatever the SNR.
pub fn mix_clips(clips: &[LabeledClip], noise: &[AudioClip], snr_db: f64, seed: u64) -> Result<Vec<LabeledClip>> {
    if noise.is_empty() {
        return Err(Error::Empty("noise set".into()));
    }
    clips
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let pick = (rng::derive_seed(seed, "sweep-noise", &[k as u64]) % noise.len() as u64) as usize;
            let spec = SnrMixSpec {
                snr_db,
                seed: rng::derive_seed(seed, "sweep-mix", &[k as u64]),
            };
            Ok(LabeledClip {
                clip: signal::mix_at_snr(&c.clip, &noise[pick], spec)?,
                active: c.active,
            })
        })
        .collect()
}

pub fn format_snr(snr: f64) -> String {
    format!("{snr}")
}

/// Evaluates at each SNR and appends an `Avg.` row (arithmetic mean over
/// SNRs); the top-level numbers are the averages. Window scores are always
/// median-smoothed here, whatever `opts.smooth` says.
pub fn snr_sweep(
    model: &VadModel,
    clips: &[LabeledClip],
    noise: &[AudioClip],
    snr_list: &[f64],
    opts: &EvalOptions,
    seed: u64,
) -> Result<EvalReport> {
    if snr_list.is_empty() || clips.is_empty() {
        return Err(Error::Empty("snr list or evaluation set".into()));
    }
    let opts = EvalOptions { smooth: true, ..*opts };
    let mut conditions = Vec::with_capacity(snr_list.len() + 1);
    for &snr in snr_list {
        let mixed = mix_clips(clips, noise, snr, seed)?;
        let (scores, labels) = score_clips(model, &mixed, &opts)?;
        conditions.push(condition_metrics(&format_snr(snr), &scores, &labels, opts.threshold)?);
    }
    let k = conditions.len() as f64;
    let avg_auroc = conditions.iter().map(|c| c.auroc).sum::<f64>() / k;
    let avg_f2 = conditions.iter().map(|c| c.f2).sum::<f64>() / k;
    let (n_pos, n_neg) = (conditions[0].n_pos, conditions[0].n_neg);
    conditions.push(ConditionMetrics {
        name: "Avg.".into(),
        auroc: avg_auroc,
        f2: avg_f2,
        n_pos,
        n_neg,
    });
    Ok(EvalReport {
        auroc: avg_auroc,
        f2: avg_f2,
        threshold: opts.threshold,
        n_pos,
        n_neg,
        conditions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.1], &[1, 0]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        assert_eq!(auroc(&[0.8, 0.7, 0.3], &[1, 0, 1]).unwrap(), 0.5);
        assert!(matches!(auroc(&[0.1, 0.2], &[1, 1]), Err(Error::SingleClass)));
    }

    #[test]
    fn f_beta_examples() {
        let perfect = f_beta(&[0.9, 0.2, 0.7], &[1, 0, 1], 0.5, 2.0);
        assert_eq!(perfect.value, 1.0);
        // P = 0.5, R = 1
        let f = f_beta(&[0.9, 0.8], &[1, 0], 0.5, 2.0);
        assert!((f.value - 5.0 * 0.5 / 3.0).abs() < 1e-15);
        // P = R = 0.5
        let g = f_beta(&[0.9, 0.8, 0.1, 0.2], &[1, 0, 1, 0], 0.5, 3.0);
        assert!((g.value - 0.5).abs() < 1e-15);
        let none = f_beta(&[0.1, 0.2], &[1, 0], 0.5, 2.0);
        assert_eq!(none.value, 0.0);
        assert!(none.degenerate);
        // ties at the threshold count as positive
        assert_eq!(f_beta(&[0.5], &[1], 0.5, 2.0).value, 1.0);
    }

    #[test]
    fn median_smoothing() {
        assert_eq!(median_smooth(&[0.3; 12]), vec![0.3; 12]);
        let mut spiky = vec![0.2; 11];
        spiky[5] = 0.9;
        assert_eq!(median_smooth(&spiky)[5], 0.2);
        assert_eq!(median_smooth(&[0.4]), vec![0.4]);
        let x = [0.1, 0.9, 0.3, 0.5, 0.7, 0.2, 0.8, 0.4, 0.6, 0.0];
        let s = median_smooth(&x);
        assert_eq!(s[0], 0.1);
        assert_eq!(s[1], 0.3);
        // position 4 uses [0, 7]: sorted 0.1 0.2 0.3 0.4 0.5 0.7 0.8 0.9
        assert!((s[4] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn report_serialization() {
        let r = EvalReport {
            auroc: 0.9,
            f2: 0.8,
            threshold: 0.5,
            n_pos: 3,
            n_neg: 4,
            conditions: vec![ConditionMetrics { name: "10".into(), auroc: 0.9, f2: 0.8, n_pos: 3, n_neg: 4 }],
        };
        let j = r.to_json();
        let keys: Vec<&String> = j.as_object().unwrap().keys().collect();
        assert_eq!(keys, ["auroc", "f2", "threshold", "n_pos", "n_neg", "conditions"]);
        assert_eq!(r.to_csv(), "condition,auroc,f2\n10,0.900000,0.800000\n");
    }

    #[test]
    fn snr_names() {
        assert_eq!(format_snr(-5.0), "-5");
        assert_eq!(format_snr(2.5), "2.5");
    }
}
