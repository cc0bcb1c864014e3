//! Branch divergence `D(n)` per sample and its population statistics.
//!
//! `D(n)` is the Frobenius norm of the cumulative hidden-state difference
//! between the two branches over the first `n` post-branch positions. The
//! alternative `SumOfNorms` estimator accumulates per-position difference
//! norms instead; it is an upper bound of `NormOfSum` by the triangle
//! inequality.
//!
//! Population statistics at each `n` only use samples with at least `n`
//! positions (no zero padding), and all reductions are independent of sample
//! order and thread count.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{mean_std, norm, order_free_sum};
use crate::trace::{BranchPairTrace, TraceSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorMode {
    #[default]
    NormOfSum,
    SumOfNorms,
}

impl EstimatorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NormOfSum => "norm-of-sum",
            Self::SumOfNorms => "sum-of-norms",
        }
    }
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm-of-sum" => Ok(Self::NormOfSum),
            "sum-of-norms" => Ok(Self::SumOfNorms),
            other => Err(Error::Parse(format!("unknown estimator mode {other:?}"))),
        }
    }
}

/// Per-`n` mean and spread of `D(n)` across a population.
///
/// Vectors are indexed by `n - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceCurve {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Mean of `D(n)^2`; needed by the Jensen step of the bound chain.
    pub mean_sq: Vec<f64>,
    pub counts: Vec<usize>,
    pub mode: EstimatorMode,
    /// `n_max` as requested; `mean.len()` is smaller when no sample is that long.
    pub requested_n_max: usize,
}

impl DivergenceCurve {
    /// Largest `n` with at least one contributing sample.
    pub fn n_max(&self) -> usize {
        self.mean.len()
    }

    /// True when the requested range was cut short by sample lengths.
    pub fn is_truncated(&self) -> bool {
        self.mean.len() < self.requested_n_max
    }

    /// `n` values whose std is reported as 0 only because a single sample
    /// reached them.
    pub fn single_sample_positions(&self) -> Vec<usize> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 1)
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["n", "mean", "std", "count", "mode"])
            .map_err(csv_err)?;
        for i in 0..self.n_max() {
            wtr.write_record([
                (i + 1).to_string(),
                self.mean[i].to_string(),
                self.std[i].to_string(),
                self.counts[i].to_string(),
                self.mode.to_string(),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads a curve exported by [`DivergenceCurve::write_csv`]. `mean_sq` is
    /// reconstructed from mean and std.
    pub fn read_csv(r: impl Read) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            n: usize,
            mean: f64,
            std: f64,
            count: usize,
            mode: String,
        }
        let mut rdr = csv::Reader::from_reader(r);
        let mut curve = DivergenceCurve {
            mean: vec![],
            std: vec![],
            mean_sq: vec![],
            counts: vec![],
            mode: EstimatorMode::NormOfSum,
            requested_n_max: 0,
        };
        for (idx, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(csv_err)?;
            if row.n != idx + 1 {
                return Err(Error::Parse(format!("expected n = {}, found {}", idx + 1, row.n)));
            }
            curve.mode = row.mode.parse()?;
            let c = row.count as f64;
            let var_biased = if row.count > 1 { row.std * row.std * (c - 1.0) / c } else { 0.0 };
            curve.mean_sq.push(row.mean * row.mean + var_biased);
            curve.mean.push(row.mean);
            curve.std.push(row.std);
            curve.counts.push(row.count);
        }
        curve.requested_n_max = curve.mean.len();
        Ok(curve)
    }
}

/// Largest mean hidden-state norm over positions and branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBound {
    pub m: f64,
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// `D(1..=n)` for one pair, where `n` is the pair's length.
pub fn divergence_single(pair: &BranchPairTrace, mode: EstimatorMode) -> Vec<f64> {
    divergence_prefix(pair, pair.len(), mode)
}

fn divergence_prefix(pair: &BranchPairTrace, n_max: usize, mode: EstimatorMode) -> Vec<f64> {
    let n = pair.len().min(n_max);
    let mut out = Vec::with_capacity(n);
    match mode {
        EstimatorMode::NormOfSum => {
            let mut acc = vec![0.0f64; pair.dim()];
            for i in 0..n {
                for ((s, &a), &b) in acc.iter_mut().zip(pair.a(i)).zip(pair.b(i)) {
                    *s += a as f64 - b as f64;
                }
                out.push(acc.iter().map(|v| v * v).sum::<f64>().sqrt());
            }
        }
        EstimatorMode::SumOfNorms => {
            let mut total = 0.0;
            for i in 0..n {
                let d: f64 = pair
                    .a(i)
                    .iter()
                    .zip(pair.b(i))
                    .map(|(&a, &b)| {
                        let x = a as f64 - b as f64;
                        x * x
                    })
                    .sum();
                total += d.sqrt();
                out.push(total);
            }
        }
    }
    out
}

/// Population mean/std of `D(n)` for `n = 1..=n_max`.
pub fn divergence_curve(
    set: &TraceSet,
    n_max: usize,
    mode: EstimatorMode,
) -> Result<DivergenceCurve> {
    if n_max == 0 {
        return Err(Error::OutOfRange("n_max must be >= 1".into()));
    }
    if set.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let per_sample: Vec<Vec<f64>> = set
        .samples()
        .par_iter()
        .map(|p| divergence_prefix(p, n_max, mode))
        .collect();
    let reach = n_max.min(set.max_len());

    let mut curve = DivergenceCurve {
        mean: Vec::with_capacity(reach),
        std: Vec::with_capacity(reach),
        mean_sq: Vec::with_capacity(reach),
        counts: Vec::with_capacity(reach),
        mode,
        requested_n_max: n_max,
    };
    for i in 0..reach {
        let mut vals: Vec<f64> = per_sample.iter().filter_map(|c| c.get(i).copied()).collect();
        let count = vals.len();
        let mut sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        let (mean, std) = mean_std(&mut vals);
        curve.mean.push(mean);
        curve.std.push(std);
        curve.mean_sq.push(order_free_sum(&mut sq) / count as f64);
        curve.counts.push(count);
    }
    Ok(curve)
}

/// Norm bound `m` over positions `1..=n_max` of both branches.
pub fn norm_bound(set: &TraceSet, n_max: usize) -> Result<NormBound> {
    if set.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let reach = n_max.min(set.max_len());
    let norms: Vec<Vec<(f64, f64)>> = set
        .samples()
        .par_iter()
        .map(|p| (0..p.len().min(reach)).map(|i| (norm(p.a(i)), norm(p.b(i)))).collect())
        .collect();
    let mut m = 0.0f64;
    for i in 0..reach {
        let mut a: Vec<f64> = norms.iter().filter_map(|s| s.get(i).map(|x| x.0)).collect();
        let mut b: Vec<f64> = norms.iter().filter_map(|s| s.get(i).map(|x| x.1)).collect();
        let count = a.len() as f64;
        m = m.max(order_free_sum(&mut a) / count).max(order_free_sum(&mut b) / count);
    }
    Ok(NormBound { m })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn pair(rows_a: &[[f32; 2]], rows_b: &[[f32; 2]]) -> BranchPairTrace {
        BranchPairTrace::from_rows(
            &rows_a.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
            &rows_b.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
        )
        .unwrap()
    }

    fn set(pairs: Vec<BranchPairTrace>) -> TraceSet {
        let dim = pairs[0].dim();
        TraceSet::new(dim, pairs, BTreeMap::new()).unwrap()
    }

    #[test]
    fn identical_branches_give_zero() {
        let p = pair(&[[1.0, 2.0], [3.0, -1.0]], &[[1.0, 2.0], [3.0, -1.0]]);
        assert_eq!(divergence_single(&p, EstimatorMode::NormOfSum), vec![0.0, 0.0]);
        assert_eq!(divergence_single(&p, EstimatorMode::SumOfNorms), vec![0.0, 0.0]);
    }

    #[test]
    fn cancelling_differences() {
        // diffs (1,-1) then (-1,1)
        let p = pair(&[[1.0, 0.0], [0.0, 1.0]], &[[0.0, 1.0], [1.0, 0.0]]);
        let s2 = 2f64.sqrt();
        assert_eq!(divergence_single(&p, EstimatorMode::NormOfSum), vec![s2, 0.0]);
        let son = divergence_single(&p, EstimatorMode::SumOfNorms);
        assert!((son[0] - s2).abs() < 1e-15 && (son[1] - 2.0 * s2).abs() < 1e-15);
    }

    #[test]
    fn accumulating_differences() {
        let p = pair(&[[1.0, 0.0], [1.0, 0.0]], &[[0.0, 1.0], [0.0, 1.0]]);
        let d = divergence_single(&p, EstimatorMode::NormOfSum);
        assert!((d[0] - 2f64.sqrt()).abs() < 1e-15);
        assert!((d[1] - 8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_sample_curve() {
        let p = pair(&[[1.0, 0.0], [1.0, 0.0]], &[[0.0, 1.0], [0.0, 1.0]]);
        let c = divergence_curve(&set(vec![p.clone()]), 2, EstimatorMode::NormOfSum).unwrap();
        assert_eq!(c.mean, divergence_single(&p, EstimatorMode::NormOfSum));
        assert_eq!(c.std, vec![0.0, 0.0]);
        assert_eq!(c.single_sample_positions(), vec![1, 2]);
    }

    #[test]
    fn two_sample_statistics() {
        let p2 = pair(&[[2.0, 0.0]], &[[0.0, 0.0]]);
        let p4 = pair(&[[4.0, 0.0]], &[[0.0, 0.0]]);
        let c = divergence_curve(&set(vec![p2, p4]), 1, EstimatorMode::NormOfSum).unwrap();
        assert_eq!(c.mean, vec![3.0]);
        assert!((c.std[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.mean_sq, vec![10.0]);
    }

    #[test]
    fn attrition_drops_short_samples() {
        let long = pair(&[[1.0, 0.0], [1.0, 0.0]], &[[0.0, 0.0], [0.0, 0.0]]);
        let short = pair(&[[3.0, 0.0]], &[[0.0, 0.0]]);
        let c = divergence_curve(&set(vec![long, short]), 5, EstimatorMode::NormOfSum).unwrap();
        assert_eq!(c.counts, vec![2, 1]);
        assert_eq!(c.mean, vec![2.0, 2.0]);
        assert!(c.is_truncated());
    }

    #[test]
    fn empty_population() {
        let s = TraceSet::new(2, vec![], BTreeMap::new()).unwrap();
        assert!(matches!(
            divergence_curve(&s, 3, EstimatorMode::NormOfSum),
            Err(Error::EmptyPopulation)
        ));
        assert!(matches!(norm_bound(&s, 3), Err(Error::EmptyPopulation)));
    }

    #[test]
    fn norm_bound_is_max_of_means() {
        let unit = pair(&[[1.0, 0.0], [0.0, 1.0]], &[[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(norm_bound(&set(vec![unit]), 2).unwrap().m, 1.0);
        // row norms 1 and 3 in A, 2 and 1 in B
        let p = pair(&[[1.0, 0.0], [0.0, 3.0]], &[[2.0, 0.0], [0.0, 1.0]]);
        assert_eq!(norm_bound(&set(vec![p.clone()]), 2).unwrap().m, 3.0);
        assert_eq!(norm_bound(&set(vec![p]), 1).unwrap().m, 2.0);
    }

    #[test]
    fn csv_round_trip() {
        let p2 = pair(&[[2.0, 0.0], [1.0, 1.0]], &[[0.0, 0.0], [0.0, 0.0]]);
        let p4 = pair(&[[4.0, 0.0], [0.0, 1.0]], &[[0.0, 0.0], [0.0, 0.0]]);
        let c = divergence_curve(&set(vec![p2, p4]), 2, EstimatorMode::SumOfNorms).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n,mean,std,count,mode\n1,3,"));
        let back = DivergenceCurve::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.mean, c.mean);
        assert_eq!(back.mode, EstimatorMode::SumOfNorms);
        for (x, y) in back.mean_sq.iter().zip(&c.mean_sq) {
            assert!((x - y).abs() <= 1e-12 * y);
        }
    }
}
