//! Performance scaling: the exponent `alpha(n)` implied by the divergence
//! bound, and power-law fits `S(n) = c / n^alpha` of benchmark scores.
//!
//! Assuming `S ~ gamma E[D]^beta` and matching `gamma Upsilon(n)^(beta/2)` to
//! `c / n^alpha` with `c = gamma (1 - psi_eq(1))^(beta/2)` gives
//!
//! ```text
//! delta = 0:  alpha = -beta/2
//! delta > 0:  alpha(n) = (beta/2) log_n((1 + n*) / (n + n*)) - beta/2
//! ```
//!
//! which decreases from about `-beta/2` towards `-beta` as `n` grows.
//! Score fits use the same sign convention: rising scores give `alpha < 0`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound::{balance_point, Psi, PsiConstants};
use crate::divergence::csv_err;
use crate::error::{Error, Result};
use crate::scores::ScoreTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    beta: f64,
    gamma: f64,
    psi: Psi,
}

impl ScalingParams {
    pub fn new(beta: f64, gamma: f64, psi: impl Into<Psi>) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::OutOfRange(format!("beta = {beta} must be > 0")));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::OutOfRange(format!("gamma = {gamma} must be > 0")));
        }
        Ok(Self {
            beta,
            gamma,
            psi: psi.into(),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn psi(&self) -> &Psi {
        &self.psi
    }

    fn constants(&self) -> Result<&PsiConstants> {
        match &self.psi {
            Psi::Constant(c) => Ok(c),
            Psi::Profile(_) => Err(Error::OutOfRange("constant psi required".into())),
        }
    }

    fn psi_eq_delta(&self, n: usize) -> Result<(f64, f64)> {
        match &self.psi {
            Psi::Constant(c) => Ok((c.psi_equal_ab(), c.delta())),
            Psi::Profile(p) => {
                if n == 0 || n > p.n_max() {
                    return Err(Error::OutOfRange(format!("n = {n} outside profile range")));
                }
                Ok((p.psi_equal_ab[n - 1], p.psi_cross_sym[n - 1] - p.psi_cross_ab[n - 1]))
            }
        }
    }
}

/// `c = gamma (1 - psi_eq(1))^(beta/2)`.
pub fn scaling_constant(params: &ScalingParams) -> Result<f64> {
    let (eq, _) = params.psi_eq_delta(1)?;
    if eq >= 1.0 {
        return Err(Error::DegenerateConstant);
    }
    Ok(params.gamma * (1.0 - eq).powf(params.beta / 2.0))
}

fn check_base(n: f64) -> Result<f64> {
    if n.is_finite() && n > 1.0 {
        Ok(n.ln())
    } else {
        Err(Error::InvalidBase(n))
    }
}

/// Closed-form `alpha(n)` for a given balance point `n*`.
pub fn alpha_from_balance(beta: f64, n_star: f64, n: f64) -> Result<f64> {
    let ln_n = check_base(n)?;
    if 1.0 + n_star <= 0.0 || n + n_star <= 0.0 {
        return Err(Error::NonPositiveLogArgument(format!(
            "(1 + n*) / (n + n*) with n* = {n_star}, n = {n}"
        )));
    }
    Ok(beta / 2.0 * ((1.0 + n_star) / (n + n_star)).ln() / ln_n - beta / 2.0)
}

/// `alpha(n)` with constant measures; `n` is treated as continuous.
pub fn alpha_constant_psi(params: &ScalingParams, n: f64) -> Result<f64> {
    check_base(n)?;
    let psi = params.constants()?;
    if psi.delta() < 0.0 {
        return Err(Error::DegenerateRatio(psi.delta()));
    }
    if psi.delta() == 0.0 {
        return Ok(-params.beta / 2.0);
    }
    alpha_from_balance(params.beta, balance_point(psi)?, n)
}

/// Which closed form to apply to per-`n` measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlphaCase {
    /// Quadratic term ignored: `Upsilon(n) = n (1 - psi_eq(n))`.
    DeltaZero,
    /// `Upsilon(n) = n delta(n) (n + n*(n))`.
    DeltaPositive,
}

fn log_arg(what: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v.ln())
    } else {
        Err(Error::NonPositiveLogArgument(format!("{what} = {v}")))
    }
}

/// `alpha(n) = log_n(c / gamma) - (beta/2) log_n Upsilon(n)` written out for
/// either case, with measures read at `n` and `c` anchored at `n = 1`.
pub fn alpha_general_psi(params: &ScalingParams, n: usize, case: AlphaCase) -> Result<f64> {
    let ln_n = check_base(n as f64)?;
    let c = scaling_constant(params)?;
    let (eq, delta) = params.psi_eq_delta(n)?;
    let anchor = (c / params.gamma).ln() / ln_n;
    let half = params.beta / 2.0;
    match case {
        AlphaCase::DeltaZero => Ok(anchor - half - half * log_arg("1 - psi_equal_ab(n)", 1.0 - eq)? / ln_n),
        AlphaCase::DeltaPositive => {
            let ln_delta = log_arg("delta(n)", delta)?;
            let n_star = (1.0 - eq) / delta - 1.0;
            let ln_tail = log_arg("n + n*(n)", n as f64 + n_star)?;
            Ok(anchor - half * (1.0 + ln_delta / ln_n + ln_tail / ln_n))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaCurve {
    pub points: Vec<(f64, f64)>,
    /// `None` when `delta = 0`.
    pub n_star: Option<f64>,
    /// Set when a negative `n*` was raised to 0 to keep the logarithms defined.
    pub clipped: bool,
    /// Set when `n* < 1`, where the regime reading of `n*` does not apply.
    pub below_one: bool,
}

/// Tabulates `alpha(n)` with constant measures over `ns` (each `> 1`).
pub fn alpha_curve(params: &ScalingParams, ns: &[f64]) -> Result<AlphaCurve> {
    let psi = params.constants()?;
    if psi.delta() < 0.0 {
        return Err(Error::DegenerateRatio(psi.delta()));
    }
    let raw = (psi.delta() > 0.0).then(|| balance_point(psi)).transpose()?;
    let n_star = raw.map(|s| s.max(0.0));
    let points = ns
        .iter()
        .map(|&n| {
            let a = match n_star {
                Some(s) => alpha_from_balance(params.beta, s, n)?,
                None => alpha_constant_psi(params, n)?,
            };
            Ok((n, a))
        })
        .collect::<Result<_>>()?;
    Ok(AlphaCurve {
        points,
        n_star,
        clipped: raw.is_some_and(|s| s < 0.0),
        below_one: raw.is_some_and(|s| s < 1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub c: f64,
    pub alpha: f64,
    /// Included `(n_l, score)` points, sorted by `n_l`.
    pub points: Vec<(u32, f64)>,
    pub excluded: Vec<u32>,
    pub sse_log: f64,
}

/// Least-squares fit of `ln S = ln c - alpha ln n` over `points` minus
/// `exclude`.
pub fn fit_points(points: &[(u32, f64)], exclude: &[u32]) -> Result<ScalingFit> {
    let mut pts: Vec<(u32, f64)> = Vec::with_capacity(points.len());
    let mut excluded = Vec::new();
    for &(n, s) in points {
        if exclude.contains(&n) {
            excluded.push(n);
            continue;
        }
        if n == 0 {
            return Err(Error::OutOfRange("n_l must be >= 1".into()));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositiveScore { n_l: n, score: s });
        }
        pts.push((n, s));
    }
    pts.sort_by_key(|p| p.0);
    excluded.sort_unstable();
    if let Some(w) = pts.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::OutOfRange(format!("duplicate n_l = {}", w[0].0)));
    }
    if pts.len() < 2 {
        return Err(Error::InsufficientPoints {
            found: pts.len(),
            required: 2,
        });
    }

    let k = pts.len() as f64;
    let xy: Vec<(f64, f64)> = pts.iter().map(|&(n, s)| ((n as f64).ln(), s.ln())).collect();
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / k;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse_log = xy.iter().map(|&(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(ScalingFit {
        c: intercept.exp(),
        alpha: -slope,
        points: pts,
        excluded,
        sse_log,
    })
}

pub fn fit_power_law(
    table: &ScoreTable,
    benchmark: &str,
    metric: &str,
    config: &str,
    exclude: &[u32],
) -> Result<ScalingFit> {
    fit_points(&table.series(benchmark, metric, config), exclude)
}

/// A `(benchmark, metric, config)` series key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Selector {
    pub benchmark: String,
    pub metric: String,
    pub config: String,
}

impl Selector {
    pub fn new(benchmark: impl Into<String>, metric: impl Into<String>, config: impl Into<String>) -> Self {
        Self {
            benchmark: benchmark.into(),
            metric: metric.into(),
            config: config.into(),
        }
    }
}

/// Fits every selector in parallel; output order follows `selectors`.
pub fn fit_selectors(
    table: &ScoreTable,
    selectors: &[Selector],
    exclude: &[u32],
) -> Vec<(Selector, Result<ScalingFit>)> {
    selectors
        .par_iter()
        .map(|s| {
            let fit = fit_power_law(table, &s.benchmark, &s.metric, &s.config, exclude);
            (s.clone(), fit)
        })
        .collect()
}

pub fn write_fit_report(rows: &[(Selector, ScalingFit)], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["benchmark", "metric", "config", "c", "alpha", "sse_log", "n_points", "excluded"])
        .map_err(csv_err)?;
    for (s, f) in rows {
        let excluded: Vec<String> = f.excluded.iter().map(u32::to_string).collect();
        wtr.write_record([
            s.benchmark.clone(),
            s.metric.clone(),
            s.config.clone(),
            f.c.to_string(),
            f.alpha.to_string(),
            f.sse_log.to_string(),
            f.points.len().to_string(),
            excluded.join(";"),
        ])
        .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

impl Sign {
    pub fn of(v: f64) -> Self {
        if v > 0.0 {
            Sign::Positive
        } else if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Positive => "positive",
            Sign::Negative => "negative",
            Sign::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfigDiff {
    pub n_l: u32,
    pub diff: f64,
    pub sign: Sign,
}

/// `S_a(n_l) - S_b(n_l)` at every shared `n_l`, largest `n_l` first.
pub fn compare_configs(
    table: &ScoreTable,
    benchmark: &str,
    metric: &str,
    config_a: &str,
    config_b: &str,
) -> Result<Vec<ConfigDiff>> {
    let b = table.series(benchmark, metric, config_b);
    let mut out: Vec<ConfigDiff> = table
        .series(benchmark, metric, config_a)
        .into_iter()
        .filter_map(|(n, sa)| {
            b.iter().find(|p| p.0 == n).map(|&(_, sb)| {
                let diff = sa - sb;
                ConfigDiff {
                    n_l: n,
                    diff,
                    sign: Sign::of(diff),
                }
            })
        })
        .collect();
    if out.is_empty() {
        return Err(Error::NoCommonPoints);
    }
    out.reverse();
    Ok(out)
}

pub fn write_diff_report(rows: &[(String, String, Vec<ConfigDiff>)], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["benchmark", "metric", "n_l", "diff", "sign"]).map_err(csv_err)?;
    for (benchmark, metric, diffs) in rows {
        for d in diffs {
            wtr.write_record([
                benchmark.as_str(),
                metric.as_str(),
                &d.n_l.to_string(),
                &d.diff.to_string(),
                d.sign.as_str(),
            ])
            .map_err(csv_err)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Maps the minimum to 0 and the maximum to 1.
pub fn minmax_normalize(series: &[f64]) -> Result<Vec<f64>> {
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if series.is_empty() {
        return Err(Error::OutOfRange("empty series".into()));
    }
    if hi <= lo {
        return Err(Error::ConstantSeries(lo));
    }
    Ok(series.iter().map(|x| (x - lo) / (hi - lo)).collect())
}
