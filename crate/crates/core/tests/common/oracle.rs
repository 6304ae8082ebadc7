//! Slow reference computations used as test oracles.

use rand::Rng as _;

/// Counts every positive/negative pair; ties score one half.
pub fn auroc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Random instance with both classes; `levels` > 0 quantizes scores to force ties.
pub fn random_instance(r: &mut rand_chacha::ChaCha8Rng, max_n: usize) -> (Vec<f64>, Vec<u8>) {
    let n = r.gen_range(2..=max_n);
    let levels = [0usize, 2, 3, 5, 20][r.gen_range(0..5)];
    let mut labels: Vec<u8> = (0..n).map(|_| u8::from(r.gen_bool(0.4))).collect();
    labels[0] = 1;
    labels[1] = 0;
    let scores = (0..n)
        .map(|_| {
            let s: f64 = r.gen();
            if levels == 0 {
                s
            } else {
                (s * levels as f64).floor() / levels as f64
            }
        })
        .collect();
    (scores, labels)
}

pub fn qdr_pairs(scores: &[f64], labels: &[u8], m: f64) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] == 1 && labels[j] == 0 {
                sum += (m - scores[i] + scores[j]).max(0.0).powi(2);
                count += 1;
            }
        }
    }
    sum / count as f64
}


/// `sum_n taps[n] e^{-i w n}` evaluated directly.
pub fn dtft_mag(taps: &[f64], w: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &t) in taps.iter().enumerate() {
        re += t * (w * n as f64).cos();
        im -= t * (w * n as f64).sin();
    }
    re.hypot(im)
}

pub fn db(x: f64) -> f64 {
    20.0 * x.max(1e-300).log10()
}

