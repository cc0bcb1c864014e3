//! Cosine-similarity dependency measures between branch hidden states.
//!
//! Four families of cosines are tracked for every position pair `(i, j)`:
//!
//! * equal-position, cross-branch: `cos(A_i, B_i)`
//! * cross-position, cross-branch: `cos(A_i, B_j)`, `i != j` (ordered pairs,
//!   since `(A_i, B_j)` and `(A_j, B_i)` are different vector pairs)
//! * cross-position, intra-branch: `cos(A_i, A_j)` and `cos(B_i, B_j)`,
//!   `i < j` (cosine is symmetric, so each unordered pair is counted once)
//!
//! Cosines are first averaged over samples; the per-`n` measures then take
//! the supremum ([`ProfileMode::SupClamped`]) or the mean
//! ([`ProfileMode::MeanClamped`], [`ProfileMode::MeanRaw`]) of those averages
//! over all admissible pairs with both indices `<= n`. Clamped modes floor the
//! result at 0.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divergence::csv_err;
use crate::error::{Error, Result};
use crate::numeric::dot;
use crate::trace::{BranchPairTrace, TraceSet};

/// Hidden states with a smaller norm make the cosine undefined.
pub const ZERO_NORM_THRESHOLD: f64 = 1e-12;
pub const DEFAULT_BINS: usize = 101;
/// Samples per reduction chunk. Fixed so that partial sums, and hence
/// results, do not depend on the number of worker threads.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum ProfileMode {
    #[default]
    SupClamped,
    MeanClamped,
    MeanRaw,
}

impl ProfileMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::SupClamped => "sup",
            Self::MeanClamped => "mean",
            Self::MeanRaw => "raw",
        }
    }
}

impl fmt::Display for ProfileMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProfileMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sup" => Ok(Self::SupClamped),
            "mean" => Ok(Self::MeanClamped),
            "raw" => Ok(Self::MeanRaw),
            other => Err(Error::Parse(format!("unknown profile mode {other:?}"))),
        }
    }
}

/// Norms and inner products of one sample's first `len` positions.
pub(crate) struct SampleGram {
    pub len: usize,
    pub norm_a: Vec<f64>,
    pub norm_b: Vec<f64>,
    /// `A_i . B_j`, row-major `len x len`.
    pub ab: Vec<f64>,
    /// `A_i . A_j`, full symmetric `len x len`.
    pub aa: Vec<f64>,
    pub bb: Vec<f64>,
}

impl SampleGram {
    pub fn new(pair: &BranchPairTrace, n_max: usize) -> Self {
        let len = pair.len().min(n_max);
        let mut g = SampleGram {
            len,
            norm_a: Vec::with_capacity(len),
            norm_b: Vec::with_capacity(len),
            ab: vec![0.0; len * len],
            aa: vec![0.0; len * len],
            bb: vec![0.0; len * len],
        };
        for i in 0..len {
            for j in 0..len {
                g.ab[i * len + j] = dot(pair.a(i), pair.b(j));
            }
            for j in i..len {
                let aa = dot(pair.a(i), pair.a(j));
                let bb = dot(pair.b(i), pair.b(j));
                g.aa[i * len + j] = aa;
                g.aa[j * len + i] = aa;
                g.bb[i * len + j] = bb;
                g.bb[j * len + i] = bb;
            }
            g.norm_a.push(g.aa[i * len + i].sqrt());
            g.norm_b.push(g.bb[i * len + i].sqrt());
        }
        g
    }

    pub fn check_nonzero(&self, sample: usize) -> Result<()> {
        for (branch, norms) in [('A', &self.norm_a), ('B', &self.norm_b)] {
            if let Some(position) = norms.iter().position(|&v| v < ZERO_NORM_THRESHOLD) {
                return Err(Error::ZeroVector {
                    sample,
                    branch,
                    position,
                });
            }
        }
        Ok(())
    }

    pub fn cos_ab(&self, i: usize, j: usize) -> f64 {
        self.ab[i * self.len + j] / (self.norm_a[i] * self.norm_b[j])
    }

    pub fn cos_aa(&self, i: usize, j: usize) -> f64 {
        self.aa[i * self.len + j] / (self.norm_a[i] * self.norm_a[j])
    }

    pub fn cos_bb(&self, i: usize, j: usize) -> f64 {
        self.bb[i * self.len + j] / (self.norm_b[i] * self.norm_b[j])
    }
}

/// Runs `visit` over every sample's Gram data in fixed-size chunks and
/// merges the per-chunk accumulators in sample order.
fn reduce_grams<T, F, M>(set: &TraceSet, n_max: usize, init: impl Fn() -> T + Sync, visit: F, merge: M) -> Result<T>
where
    T: Send,
    F: Fn(&mut T, &SampleGram) + Sync,
    M: Fn(&mut T, T),
{
    let partials: Vec<Result<T>> = set
        .samples()
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(chunk_idx, chunk)| {
            let mut acc = init();
            for (k, pair) in chunk.iter().enumerate() {
                let g = SampleGram::new(pair, n_max);
                g.check_nonzero(chunk_idx * CHUNK + k)?;
                visit(&mut acc, &g);
            }
            Ok(acc)
        })
        .collect();
    let mut total = init();
    for p in partials {
        merge(&mut total, p?);
    }
    Ok(total)
}

/// Sample-mean cosines for every position pair up to `n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineStats {
    n_max: usize,
    /// `reach[k]`: samples with more than `k` positions.
    reach: Vec<usize>,
    sum_ab: Vec<f64>,
    sum_aa: Vec<f64>,
    sum_bb: Vec<f64>,
}

impl CosineStats {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of samples that contribute to pair `(i, j)` (0-based).
    pub fn pair_count(&self, i: usize, j: usize) -> usize {
        self.reach[i.max(j)]
    }

    fn mean(&self, sums: &[f64], i: usize, j: usize) -> f64 {
        sums[i * self.n_max + j] / self.pair_count(i, j) as f64
    }

    /// Mean `cos(A_i, B_i)`, 0-based `i`.
    pub fn equal_ab(&self, i: usize) -> f64 {
        self.mean(&self.sum_ab, i, i)
    }

    /// Mean `cos(A_i, B_j)`, 0-based.
    pub fn cross_ab(&self, i: usize, j: usize) -> f64 {
        self.mean(&self.sum_ab, i, j)
    }

    /// Mean `cos(A_i, A_j)`, 0-based.
    pub fn cross_aa(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (i.min(j), i.max(j));
        self.mean(&self.sum_aa, lo, hi)
    }

    /// Mean `cos(B_i, B_j)`, 0-based.
    pub fn cross_bb(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (i.min(j), i.max(j));
        self.mean(&self.sum_bb, lo, hi)
    }
}

/// Accumulates per-pair sample-mean cosines.
pub fn cosine_stats(set: &TraceSet, n_max: usize) -> Result<CosineStats> {
    if n_max == 0 {
        return Err(Error::OutOfRange("n_max must be >= 1".into()));
    }
    if set.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let n = n_max.min(set.max_len());
    let init = || CosineStats {
        n_max: n,
        reach: vec![0; n],
        sum_ab: vec![0.0; n * n],
        sum_aa: vec![0.0; n * n],
        sum_bb: vec![0.0; n * n],
    };
    reduce_grams(
        set,
        n,
        init,
        |acc, g| {
            for i in 0..g.len {
                acc.reach[i] += 1;
                for j in 0..g.len {
                    acc.sum_ab[i * n + j] += g.cos_ab(i, j);
                }
                for j in i + 1..g.len {
                    acc.sum_aa[i * n + j] += g.cos_aa(i, j);
                    acc.sum_bb[i * n + j] += g.cos_bb(i, j);
                }
            }
        },
        |total, part| {
            for (t, p) in total.reach.iter_mut().zip(part.reach) {
                *t += p;
            }
            for (t, p) in [
                (&mut total.sum_ab, part.sum_ab),
                (&mut total.sum_aa, part.sum_aa),
                (&mut total.sum_bb, part.sum_bb),
            ] {
                for (x, y) in t.iter_mut().zip(p) {
                    *x += y;
                }
            }
        },
    )
}

/// Per-`n` dependency measures. Vectors are indexed by `n - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyProfile {
    pub psi_equal_ab: Vec<f64>,
    pub psi_cross_ab: Vec<f64>,
    pub psi_cross_aa: Vec<f64>,
    pub psi_cross_bb: Vec<f64>,
    /// `(psi_cross_aa + psi_cross_bb) / 2`.
    pub psi_cross_sym: Vec<f64>,
    pub mode: ProfileMode,
    /// True where no cross-position pair exists (n = 1); the cross measures
    /// there are 0 by convention.
    pub cross_undefined: Vec<bool>,
}

impl DependencyProfile {
    pub fn n_max(&self) -> usize {
        self.psi_equal_ab.len()
    }

    /// Builds a profile from explicit per-`n` arrays; `psi_cross_bb` defaults
    /// to `psi_cross_aa`.
    pub fn from_arrays(
        psi_equal_ab: Vec<f64>,
        psi_cross_aa: Vec<f64>,
        psi_cross_ab: Vec<f64>,
        mode: ProfileMode,
    ) -> Result<Self> {
        let n = psi_equal_ab.len();
        if n == 0 || psi_cross_aa.len() != n || psi_cross_ab.len() != n {
            return Err(Error::ShapeMismatch("profile arrays must share a non-zero length".into()));
        }
        Ok(Self {
            psi_cross_bb: psi_cross_aa.clone(),
            psi_cross_sym: psi_cross_aa.clone(),
            psi_equal_ab,
            psi_cross_aa,
            psi_cross_ab,
            mode,
            cross_undefined: (0..n).map(|i| i == 0).collect(),
        })
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "n",
            "psi_equal_ab",
            "psi_cross_ab",
            "psi_cross_aa",
            "psi_cross_bb",
            "psi_cross_sym",
            "mode",
        ])
        .map_err(csv_err)?;
        for i in 0..self.n_max() {
            wtr.write_record([
                (i + 1).to_string(),
                self.psi_equal_ab[i].to_string(),
                self.psi_cross_ab[i].to_string(),
                self.psi_cross_aa[i].to_string(),
                self.psi_cross_bb[i].to_string(),
                self.psi_cross_sym[i].to_string(),
                self.mode.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv(r: impl Read) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            n: usize,
            psi_equal_ab: f64,
            psi_cross_ab: f64,
            psi_cross_aa: f64,
            psi_cross_bb: f64,
            psi_cross_sym: f64,
            mode: String,
        }
        let mut p = DependencyProfile {
            psi_equal_ab: vec![],
            psi_cross_ab: vec![],
            psi_cross_aa: vec![],
            psi_cross_bb: vec![],
            psi_cross_sym: vec![],
            mode: ProfileMode::SupClamped,
            cross_undefined: vec![],
        };
        let mut rdr = csv::Reader::from_reader(r);
        for (idx, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(csv_err)?;
            if row.n != idx + 1 {
                return Err(Error::Parse(format!("expected n = {}, found {}", idx + 1, row.n)));
            }
            p.mode = row.mode.parse()?;
            p.psi_equal_ab.push(row.psi_equal_ab);
            p.psi_cross_ab.push(row.psi_cross_ab);
            p.psi_cross_aa.push(row.psi_cross_aa);
            p.psi_cross_bb.push(row.psi_cross_bb);
            p.psi_cross_sym.push(row.psi_cross_sym);
            p.cross_undefined.push(idx == 0);
        }
        if p.n_max() == 0 {
            return Err(Error::Parse("empty profile".into()));
        }
        Ok(p)
    }
}

#[derive(Default)]
struct Running {
    max: f64,
    sum: f64,
    count: usize,
}

impl Running {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            ..Default::default()
        }
    }

    fn push(&mut self, v: f64) {
        self.max = self.max.max(v);
        self.sum += v;
        self.count += 1;
    }

    fn value(&self, mode: ProfileMode) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        match mode {
            ProfileMode::SupClamped => self.max.max(0.0),
            ProfileMode::MeanClamped => (self.sum / self.count as f64).max(0.0),
            ProfileMode::MeanRaw => self.sum / self.count as f64,
        }
    }
}

/// Reduces pairwise mean cosines to per-`n` dependency measures.
pub fn profile_from_stats(stats: &CosineStats, mode: ProfileMode) -> DependencyProfile {
    let n = stats.n_max();
    let (mut eq, mut ab, mut aa, mut bb) = (Running::new(), Running::new(), Running::new(), Running::new());
    let mut p = DependencyProfile {
        psi_equal_ab: Vec::with_capacity(n),
        psi_cross_ab: Vec::with_capacity(n),
        psi_cross_aa: Vec::with_capacity(n),
        psi_cross_bb: Vec::with_capacity(n),
        psi_cross_sym: Vec::with_capacity(n),
        mode,
        cross_undefined: Vec::with_capacity(n),
    };
    for k in 0..n {
        eq.push(stats.equal_ab(k));
        for i in 0..k {
            ab.push(stats.cross_ab(i, k));
            ab.push(stats.cross_ab(k, i));
            aa.push(stats.cross_aa(i, k));
            bb.push(stats.cross_bb(i, k));
        }
        let (va, vb) = (aa.value(mode), bb.value(mode));
        p.psi_equal_ab.push(eq.value(mode));
        p.psi_cross_ab.push(ab.value(mode));
        p.psi_cross_aa.push(va);
        p.psi_cross_bb.push(vb);
        p.psi_cross_sym.push((va + vb) / 2.0);
        p.cross_undefined.push(k == 0);
    }
    p
}

pub fn dependency_profile(set: &TraceSet, n_max: usize, mode: ProfileMode) -> Result<DependencyProfile> {
    Ok(profile_from_stats(&cosine_stats(set, n_max)?, mode))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HistogramKind {
    EqualAB,
    CrossAB,
    CrossAABBavg,
}

impl HistogramKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::EqualAB => "equal_ab",
            Self::CrossAB => "cross_ab",
            Self::CrossAABBavg => "cross_aabb_avg",
        }
    }
}

/// Uniform-bin histogram of cosine observations on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineHistogram {
    pub kind: HistogramKind,
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl CosineHistogram {
    fn empty(kind: HistogramKind, bins: usize) -> Self {
        Self {
            kind,
            bin_edges: (0..=bins).map(|k| -1.0 + 2.0 * k as f64 / bins as f64).collect(),
            counts: vec![0; bins],
        }
    }

    fn add(&mut self, v: f64) {
        let bins = self.counts.len();
        let x = (v.clamp(-1.0, 1.0) + 1.0) / 2.0 * bins as f64;
        let idx = (x.floor() as usize).min(bins - 1);
        self.counts[idx] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the bin holding `cos = 0`, the reference line of the plots.
    pub fn zero_bin(&self) -> usize {
        (self.counts.len() / 2).min(self.counts.len() - 1)
    }

    /// Fraction of observations in bins lying entirely above 0.
    pub fn positive_fraction(&self) -> f64 {
        let pos: u64 = self
            .counts
            .iter()
            .zip(&self.bin_edges)
            .filter(|(_, &lo)| lo >= 0.0)
            .map(|(c, _)| c)
            .sum();
        pos as f64 / self.total().max(1) as f64
    }
}

/// Histograms of per-sample `cos(A_i, B_i)`, `cos(A_i, B_j)` (`i != j`) and
/// `(cos(A_i, A_j) + cos(B_i, B_j)) / 2` (`i < j`).
pub fn cosine_histograms(set: &TraceSet, n_max: usize, bins: usize) -> Result<[CosineHistogram; 3]> {
    if bins == 0 {
        return Err(Error::OutOfRange("bins must be >= 1".into()));
    }
    if n_max == 0 {
        return Err(Error::OutOfRange("n_max must be >= 1".into()));
    }
    if set.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let init = || {
        [
            CosineHistogram::empty(HistogramKind::EqualAB, bins),
            CosineHistogram::empty(HistogramKind::CrossAB, bins),
            CosineHistogram::empty(HistogramKind::CrossAABBavg, bins),
        ]
    };
    reduce_grams(
        set,
        n_max,
        init,
        |[eq, ab, aabb], g| {
            for i in 0..g.len {
                eq.add(g.cos_ab(i, i));
                for j in 0..g.len {
                    if i != j {
                        ab.add(g.cos_ab(i, j));
                    }
                }
                for j in i + 1..g.len {
                    aabb.add((g.cos_aa(i, j) + g.cos_bb(i, j)) / 2.0);
                }
            }
        },
        |total, part| {
            for (t, p) in total.iter_mut().zip(part) {
                for (x, y) in t.counts.iter_mut().zip(p.counts) {
                    *x += y;
                }
            }
        },
    )
}

pub fn write_histograms_csv(hists: &[CosineHistogram], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["kind", "bin_lo", "bin_hi", "count"]).map_err(csv_err)?;
    for h in hists {
        for (k, c) in h.counts.iter().enumerate() {
            wtr.write_record([
                h.kind.as_str().to_string(),
                h.bin_edges[k].to_string(),
                h.bin_edges[k + 1].to_string(),
                c.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}
