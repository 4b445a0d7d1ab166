// SPDX-License-Identifier: MIT OR Apache-2.0

//! Exact L0-penalised segmentation by optimal partitioning.

use super::scalar::{Oracle, Scalar};
use crate::error::{Error, Result};
use crate::series::Series;

/// `F(t) = min_s F(s) + RSS(s+1..t) + penalty * [s > 0]`, O(T^2).
/// Ties go to fewer changepoints, then to the earlier last change.
/// Returns sorted changepoints.
pub(crate) fn run<S: Scalar, O: Oracle<S>>(x: &[S], penalty: f64, oracle: &mut O) -> Vec<usize> {
    let len = x.len();
    let mut sum = Vec::with_capacity(len + 1);
    let mut sum_sq = Vec::with_capacity(len + 1);
    let (mut a, mut b) = (S::constant(0.0), S::constant(0.0));
    sum.push(a);
    sum_sq.push(b);
    for &v in x {
        a = a + v;
        b = b + v * v;
        sum.push(a);
        sum_sq.push(b);
    }
    let rss = |s: usize, t: usize| -> S {
        let total = sum[t] - sum[s];
        (sum_sq[t] - sum_sq[s]) - total * total * (1.0 / (t - s) as f64)
    };

    let pen = S::constant(penalty);
    let mut cost: Vec<S> = Vec::with_capacity(len + 1);
    let mut last = vec![0usize; len + 1];
    let mut count = vec![0usize; len + 1];
    cost.push(S::constant(0.0));
    let mut values = Vec::with_capacity(len);
    let mut ranks = Vec::with_capacity(len);
    for t in 1..=len {
        values.clear();
        ranks.clear();
        values.push(rss(0, t));
        ranks.push(0);
        for s in 1..t {
            values.push(cost[s] + rss(s, t) + pen);
            ranks.push(count[s] + 1);
        }
        let s = oracle.argmin_ranked(&values, &ranks);
        cost.push(values[s]);
        last[t] = s;
        count[t] = ranks[s];
    }

    let mut cps = Vec::with_capacity(count[len]);
    let mut t = len;
    while last[t] > 0 {
        t = last[t];
        cps.push(t);
    }
    cps.reverse();
    cps
}

/// Penalised cost of an arbitrary segmentation: total within-segment RSS
/// plus `penalty` per changepoint.
pub fn l0_objective(series: &Series, changepoints: &[usize], penalty: f64) -> Result<f64> {
    let x = series.values();
    if changepoints.windows(2).any(|w| w[0] >= w[1])
        || changepoints.iter().any(|&c| c < 1 || c >= x.len())
    {
        return Err(Error::invalid("changepoints must be sorted and inside [1, T-1]"));
    }
    let mut bounds = vec![0];
    bounds.extend_from_slice(changepoints);
    bounds.push(x.len());
    let rss: f64 = bounds
        .windows(2)
        .map(|w| {
            let seg = &x[w[0]..w[1]];
            let mean = seg.iter().sum::<f64>() / seg.len() as f64;
            seg.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
        })
        .sum();
    Ok(rss + penalty * changepoints.len() as f64)
}
