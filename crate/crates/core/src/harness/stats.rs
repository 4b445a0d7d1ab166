// SPDX-License-Identifier: MIT OR Apache-2.0

//! Small statistics used by the studies.

use serde::{Deserialize, Serialize};

/// One-sample Kolmogorov-Smirnov test against `U(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov distribution tail `P(K > lambda)`.
fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-transformed series; converges fast for small lambda.
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (-m * m * c).exp()
            })
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=100)
            .map(|j| {
                let j = j as f64;
                let sign = if j as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * j * j * lambda * lambda).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// KS test of `sample` against the uniform law, with the small-sample
/// correction `(sqrt(n) + 0.12 + 0.11 / sqrt(n)) D`. `None` for an empty
/// sample.
pub fn ks_uniform(sample: &[f64]) -> Option<KsResult> {
    if sample.is_empty() {
        return None;
    }
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max);
    let rn = n.sqrt();
    Some(KsResult {
        n: v.len(),
        statistic: d,
        p_value: kolmogorov_tail((rn + 0.12 + 0.11 / rn) * d),
    })
}

/// Pearson correlation; `None` if fewer than two pairs or either side is
/// constant.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len().min(b.len());
    if n < 2 {
        return None;
    }
    let ma = a[..n].iter().sum::<f64>() / n as f64;
    let mb = b[..n].iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a[..n].iter().zip(&b[..n]) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Plotting positions `i / (n + 1)` paired with the sorted sample.
pub fn qq_points(sample: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let q = (1..=v.len()).map(|i| i as f64 / (n + 1.0)).collect();
    (q, v)
}

/// True and false positives among `flagged`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub true_positives: usize,
    pub false_positives: usize,
}

/// Matches flagged changepoints to true ones, nearest pairs first, with
/// each side used at most once. A pair counts only if `|flag - truth| < h`.
pub fn match_changepoints(flagged: &[usize], truth: &[usize], h: usize) -> MatchCounts {
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, &f) in flagged.iter().enumerate() {
        for (j, &t) in truth.iter().enumerate() {
            let d = f.abs_diff(t);
            if d < h {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_unstable();
    let mut used_f = vec![false; flagged.len()];
    let mut used_t = vec![false; truth.len()];
    let mut tp = 0;
    for (_, i, j) in pairs {
        if !used_f[i] && !used_t[j] {
            used_f[i] = true;
            used_t[j] = true;
            tp += 1;
        }
    }
    MatchCounts {
        true_positives: tp,
        false_positives: flagged.len() - tp,
    }
}
