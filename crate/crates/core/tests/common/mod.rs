//! Shared generators and brute-force reference computations.
#![allow(dead_code)]

use std::collections::BTreeMap;

use divscale::{BranchPairTrace, TraceSet};
use proptest::prelude::*;

/// Random trace sets with ragged sample lengths and values in `[-4, 4]`.
pub fn trace_set(max_dim: usize, max_len: usize, max_samples: usize) -> impl Strategy<Value = TraceSet> {
    (1..=max_dim, 1..=max_samples).prop_flat_map(move |(dim, samples)| {
        let pair = (1..=max_len).prop_flat_map(move |len| {
            (
                prop::collection::vec(-4.0f32..4.0, len * dim),
                prop::collection::vec(-4.0f32..4.0, len * dim),
            )
        });
        let meta = prop::collection::btree_map("[a-z_]{1,8}", "[ -~]{0,12}", 0..4);
        (prop::collection::vec(pair, samples), meta).prop_map(move |(pairs, meta)| {
            let pairs = pairs
                .into_iter()
                .map(|(a, b)| BranchPairTrace::new(dim, a, b).unwrap())
                .collect();
            TraceSet::new(dim, pairs, meta).unwrap()
        })
    })
}

pub fn set_from(pairs: Vec<BranchPairTrace>) -> TraceSet {
    TraceSet::new(pairs[0].dim(), pairs, BTreeMap::new()).unwrap()
}

fn f64s(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn cos(a: &[f32], b: &[f32]) -> f64 {
    let (a, b) = (f64s(a), f64s(b));
    dot(&a, &b) / (dot(&a, &a).sqrt() * dot(&b, &b).sqrt())
}

/// `D(n)` from scratch: sum the first `n` differences, take the norm.
pub fn naive_d(pair: &BranchPairTrace, n: usize) -> f64 {
    let mut acc = vec![0.0f64; pair.dim()];
    for i in 0..n {
        for (k, (x, y)) in pair.a(i).iter().zip(pair.b(i)).enumerate() {
            acc[k] += *x as f64 - *y as f64;
        }
    }
    dot(&acc, &acc).sqrt()
}

/// `sum_{i<n} |A_i - B_i|`.
pub fn naive_sum_of_norms(pair: &BranchPairTrace, n: usize) -> f64 {
    (0..n)
        .map(|i| {
            let d: Vec<f64> = pair.a(i).iter().zip(pair.b(i)).map(|(x, y)| *x as f64 - *y as f64).collect();
            dot(&d, &d).sqrt()
        })
        .sum()
}

/// Mean over samples long enough to reach `n` of `f(sample)`.
pub fn naive_mean(set: &TraceSet, n: usize, f: impl Fn(&BranchPairTrace) -> f64) -> f64 {
    let vals: Vec<f64> = set.samples().iter().filter(|s| s.len() >= n).map(f).collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// The three dependency measures at `n` by direct enumeration, as
/// `(eq, ab, aa, bb)`; `reduce` turns the per-pair mean cosines into one value.
pub fn naive_psi(set: &TraceSet, n: usize, reduce: impl Fn(&[f64]) -> f64) -> (f64, f64, f64, f64) {
    let pair_mean = |i: usize, j: usize, f: &dyn Fn(&BranchPairTrace) -> f64| {
        naive_mean(set, i.max(j) + 1, |s| f(s))
    };
    let mut eq = vec![];
    let mut ab = vec![];
    let mut aa = vec![];
    let mut bb = vec![];
    for i in 0..n {
        eq.push(pair_mean(i, i, &|s| cos(s.a(i), s.b(i))));
        for j in 0..n {
            if i != j {
                ab.push(pair_mean(i, j, &|s| cos(s.a(i), s.b(j))));
            }
            if i < j {
                aa.push(pair_mean(i, j, &|s| cos(s.a(i), s.a(j))));
                bb.push(pair_mean(i, j, &|s| cos(s.b(i), s.b(j))));
            }
        }
    }
    let r = |v: &[f64]| if v.is_empty() { 0.0 } else { reduce(v) };
    (r(&eq), r(&ab), r(&aa), r(&bb))
}

pub fn sup_clamped(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0)
}

pub fn mean_raw(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn mean_clamped(v: &[f64]) -> f64 {
    mean_raw(v).max(0.0)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300) || (a - b).abs() <= 1e-12
}
