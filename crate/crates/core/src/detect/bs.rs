// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary segmentation and its wild variant over an abstract scalar.

use super::scalar::{Oracle, Scalar};
use super::{Detection, Stopping};

pub(crate) fn prefix_sums<S: Scalar>(x: &[S]) -> Vec<S> {
    let mut p = Vec::with_capacity(x.len() + 1);
    let mut acc = S::constant(0.0);
    p.push(acc);
    for &v in x {
        acc = acc + v;
        p.push(acc);
    }
    p
}

/// 1-based inclusive segment `[s, e]`, split after `b`.
#[inline]
pub(crate) fn cusum_from_prefix<S: Scalar>(p: &[S], s: usize, e: usize, b: usize) -> S {
    let n = (e - s + 1) as f64;
    let nl = (b - s + 1) as f64;
    let nr = (e - b) as f64;
    let left = p[b] - p[s - 1];
    let right = p[e] - p[b];
    left * (nr / (n * nl)).sqrt() - right * (nl / (n * nr)).sqrt()
}

/// Every split the detector considers for one active segment: the
/// segment itself, then each contained interval, in order.
struct Segment<S> {
    start: usize,
    end: usize,
    splits: Vec<usize>,
    values: Vec<S>,
}

fn segment<S: Scalar>(p: &[S], s: usize, e: usize, intervals: Option<&[(usize, usize)]>) -> Segment<S> {
    let mut seg = Segment {
        start: s,
        end: e,
        splits: Vec::new(),
        values: Vec::new(),
    };
    let mut push = |a: usize, b: usize| {
        for split in a..b {
            seg.splits.push(split);
            seg.values.push(cusum_from_prefix(p, a, b, split));
        }
    };
    if e > s {
        push(s, e);
        for &(a, b) in intervals.unwrap_or(&[]) {
            if s <= a && b <= e && (a, b) != (s, e) {
                push(a, b);
            }
        }
    }
    seg
}

/// Greedy segmentation. In fixed-count mode the split with the largest
/// `|cusum|` over all active segments is taken at each step; in threshold
/// mode segments are processed depth-first, left before right. The jump
/// sign of a split is minus the sign of its cusum.
pub(crate) fn run<S: Scalar, O: Oracle<S>>(
    x: &[S],
    stopping: Stopping,
    intervals: Option<&[(usize, usize)]>,
    zero_level: f64,
    oracle: &mut O,
) -> Detection {
    let p = prefix_sums(x);
    let len = x.len();
    let mut order = Vec::new();
    let mut signs = Vec::new();

    match stopping {
        Stopping::FixedCount(k) => {
            let mut segments = vec![segment(&p, 1, len, intervals)];
            let zero = S::constant(zero_level);
            let mut all = Vec::with_capacity(len);
            while order.len() < k {
                all.clear();
                for seg in &segments {
                    all.extend_from_slice(&seg.values);
                }
                if all.is_empty() {
                    break;
                }
                let (g, sign) = oracle.argmax_abs(&all);
                if !oracle.gt(all[g] * sign, zero) {
                    break;
                }
                let (mut i, mut j) = (0, g);
                while j >= segments[i].values.len() {
                    j -= segments[i].values.len();
                    i += 1;
                }
                let split = segments[i].splits[j];
                order.push(split);
                signs.push(-sign);
                if order.len() == k {
                    break;
                }
                let (s, e) = (segments[i].start, segments[i].end);
                let left = segment(&p, s, split, intervals);
                let right = segment(&p, split + 1, e, intervals);
                segments.splice(i..=i, [left, right]);
            }
        }
        Stopping::Threshold(level) => {
            let level = S::constant(level);
            let mut stack = vec![(1usize, len)];
            while let Some((s, e)) = stack.pop() {
                let seg = segment(&p, s, e, intervals);
                if seg.values.is_empty() {
                    continue;
                }
                let Some((j, sign)) = oracle.max_abs_above(&seg.values, level) else {
                    continue;
                };
                let split = seg.splits[j];
                order.push(split);
                signs.push(-sign);
                stack.push((split + 1, e));
                stack.push((s, split));
            }
        }
    }
    Detection {
        order,
        signs: Some(signs),
    }
}
