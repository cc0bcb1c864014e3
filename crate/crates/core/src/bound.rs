//! The divergence bound `Upsilon(n)` and its analysis.
//!
//! With constant dependency measures
//!
//! ```text
//! Upsilon(n) = n (1 - psi_eq) + (n^2 - n) (psi_aa - psi_ab)
//!            = n (1 - psi_eq - delta) + n^2 delta,     delta = psi_aa - psi_ab
//! ```
//!
//! and `E[D(n)] <= sqrt(2) M sqrt(Upsilon(n))`. The linear part dominates
//! below the balance point `n* = (1 - psi_eq) / delta - 1`, the quadratic
//! part above it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dependency::{cosine_stats, profile_from_stats, DependencyProfile, ProfileMode, SampleGram};
use crate::divergence::{divergence_curve, norm_bound, DivergenceCurve, EstimatorMode, NormBound};
use crate::error::{Error, Result};
use crate::numeric::order_free_sum;
use crate::trace::TraceSet;

/// Absolute tolerance on `|n - n*|` for [`Regime::Balanced`].
pub const BALANCE_TOL: f64 = 1e-9;
/// Relative tolerance of the decomposition identity check.
pub const DECOMPOSITION_TOL: f64 = 1e-6;
/// Rounding allowance for range checks on measured cosines.
const RANGE_SLACK: f64 = 1e-12;

/// Dependency measures that do not vary with `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiConstants {
    psi_equal_ab: f64,
    psi_cross_aa: f64,
    psi_cross_ab: f64,
    delta: f64,
}

impl PsiConstants {
    /// Values must lie in `[0, 1]`; measured values within `1e-12` of the
    /// interval are clamped onto it.
    pub fn new(psi_equal_ab: f64, psi_cross_aa: f64, psi_cross_ab: f64) -> Result<Self> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && (-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&v) {
                Ok(v.clamp(0.0, 1.0))
            } else {
                Err(Error::OutOfRange(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        let psi_equal_ab = check("psi_equal_ab", psi_equal_ab)?;
        let psi_cross_aa = check("psi_cross_aa", psi_cross_aa)?;
        let psi_cross_ab = check("psi_cross_ab", psi_cross_ab)?;
        Ok(Self {
            psi_equal_ab,
            psi_cross_aa,
            psi_cross_ab,
            delta: psi_cross_aa - psi_cross_ab,
        })
    }

    /// Unchecked; raw-mode profiles may leave `[0, 1]`.
    fn raw(psi_equal_ab: f64, psi_cross_aa: f64, psi_cross_ab: f64) -> Self {
        Self {
            psi_equal_ab,
            psi_cross_aa,
            psi_cross_ab,
            delta: psi_cross_aa - psi_cross_ab,
        }
    }

    pub fn psi_equal_ab(&self) -> f64 {
        self.psi_equal_ab
    }

    pub fn psi_cross_aa(&self) -> f64 {
        self.psi_cross_aa
    }

    pub fn psi_cross_ab(&self) -> f64 {
        self.psi_cross_ab
    }

    /// `psi_cross_aa - psi_cross_ab`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn upsilon_raw(&self, n: f64) -> f64 {
        n * (1.0 - self.psi_equal_ab) + (n * n - n) * self.delta
    }
}

/// Where the dependency measures come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Psi {
    Constant(PsiConstants),
    /// Per-`n` values; the intra-branch term uses `psi_cross_sym`, the
    /// average of the A and B measures.
    Profile(DependencyProfile),
}

impl Psi {
    /// Largest `n` with defined measures (`None` for constants).
    pub fn n_max(&self) -> Option<usize> {
        match self {
            Psi::Constant(_) => None,
            Psi::Profile(p) => Some(p.n_max()),
        }
    }

    /// `(psi_eq, psi_aa, psi_ab)` at `n` without range checks.
    fn raw_at(&self, n: usize) -> Result<(f64, f64, f64)> {
        match self {
            Psi::Constant(c) => Ok((c.psi_equal_ab, c.psi_cross_aa, c.psi_cross_ab)),
            Psi::Profile(p) => {
                if n == 0 || n > p.n_max() {
                    return Err(Error::OutOfRange(format!(
                        "n = {n} outside profile range 1..={}",
                        p.n_max()
                    )));
                }
                let k = n - 1;
                Ok((p.psi_equal_ab[k], p.psi_cross_sym[k], p.psi_cross_ab[k]))
            }
        }
    }

    /// The measures at `n` as constants.
    pub fn at(&self, n: usize) -> Result<PsiConstants> {
        let (eq, aa, ab) = self.raw_at(n)?;
        PsiConstants::new(eq, aa, ab)
    }
}

impl From<PsiConstants> for Psi {
    fn from(c: PsiConstants) -> Self {
        Psi::Constant(c)
    }
}

impl From<DependencyProfile> for Psi {
    fn from(p: DependencyProfile) -> Self {
        Psi::Profile(p)
    }
}

fn upsilon_unchecked(psi: &Psi, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::OutOfRange("n must be >= 1".into()));
    }
    let (eq, aa, ab) = psi.raw_at(n)?;
    let n = n as f64;
    Ok(n * (1.0 - eq) + (n * n - n) * (aa - ab))
}

/// `Upsilon(n)`; per-`n` profiles are evaluated at the same `n`.
pub fn upsilon(psi: &Psi, n: usize) -> Result<f64> {
    let value = upsilon_unchecked(psi, n)?;
    if value < 0.0 {
        return Err(Error::NegativeBound { n, value });
    }
    Ok(value)
}

/// `(linear, quadratic)` parts of `Upsilon(n)`.
pub fn decompose(psi: &PsiConstants, n: f64) -> (f64, f64) {
    (n * (1.0 - psi.psi_equal_ab - psi.delta), n * n * psi.delta)
}

/// Ratio of the linear to the quadratic part.
pub fn rho(psi: &PsiConstants, n: f64) -> Result<f64> {
    if psi.delta <= 0.0 {
        return Err(Error::DegenerateRatio(psi.delta));
    }
    Ok((1.0 - psi.psi_equal_ab - psi.delta) / (n * psi.delta))
}

/// `n*` where `rho(n*) = 1`. May be below 1 or negative.
pub fn balance_point(psi: &PsiConstants) -> Result<f64> {
    if psi.delta <= 0.0 {
        return Err(Error::DegenerateRatio(psi.delta));
    }
    Ok((1.0 - psi.psi_equal_ab) / psi.delta - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Linear part dominates, `E[D(n)] = O(sqrt n)`.
    Sublinear,
    Balanced,
    /// Quadratic part dominates, `E[D(n)] = O(n)`.
    Linear,
}

/// Growth regime at `n`. Without a positive quadratic part (`delta <= 0`)
/// growth is never faster than `sqrt n`, so the result is `Sublinear`.
pub fn classify_regime(psi: &PsiConstants, n: f64) -> Regime {
    let Ok(star) = balance_point(psi) else {
        return Regime::Sublinear;
    };
    if (n - star).abs() <= BALANCE_TOL {
        Regime::Balanced
    } else if n < star {
        Regime::Sublinear
    } else {
        Regime::Linear
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "case")]
pub enum ConstraintCase {
    QuadraticVanishes,
    /// `Upsilon(n) >= 0` for every `n >= 1`.
    QuadraticPositive,
    /// `Upsilon(n) >= 0` only up to `n_valid_max`.
    QuadraticNegative { n_valid_max: f64 },
}

pub fn constraint_case(psi: &PsiConstants) -> ConstraintCase {
    if psi.delta == 0.0 {
        ConstraintCase::QuadraticVanishes
    } else if psi.delta > 0.0 {
        ConstraintCase::QuadraticPositive
    } else {
        ConstraintCase::QuadraticNegative {
            n_valid_max: 1.0 + (psi.psi_equal_ab - 1.0) / psi.delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaFit {
    pub lambda: f64,
    pub sse: f64,
    /// `n` values that entered the fit.
    pub used: Vec<usize>,
    /// `n` values dropped because `Upsilon(n) < 0`.
    pub skipped: Vec<usize>,
}

/// `(n, mean, Upsilon)` for each usable `n`.
type LambdaPoint = (usize, f64, f64);

fn lambda_points(curve: &DivergenceCurve, psi: &Psi) -> Result<(Vec<LambdaPoint>, Vec<usize>)> {
    let n_max = psi.n_max().map_or(curve.n_max(), |p| p.min(curve.n_max()));
    let mut pts = Vec::with_capacity(n_max);
    let mut skipped = Vec::new();
    for n in 1..=n_max {
        let u = upsilon_unchecked(psi, n)?;
        if u < 0.0 {
            skipped.push(n);
        } else {
            pts.push((n, curve.mean[n - 1], u));
        }
    }
    Ok((pts, skipped))
}

fn sse_of(pts: &[LambdaPoint], lambda: f64) -> f64 {
    pts.iter().map(|&(_, m, u)| (m - lambda * u.sqrt()).powi(2)).sum()
}

/// Least-squares `lambda` for `mean[n] ~ lambda sqrt(Upsilon(n))`.
pub fn fit_lambda(curve: &DivergenceCurve, psi: &Psi) -> Result<LambdaFit> {
    let (pts, skipped) = lambda_points(curve, psi)?;
    let den: f64 = pts.iter().map(|p| p.2).sum();
    if den <= 0.0 {
        return Err(Error::DegenerateFit);
    }
    let lambda = pts.iter().map(|&(_, m, u)| m * u.sqrt()).sum::<f64>() / den;
    Ok(LambdaFit {
        lambda,
        sse: sse_of(&pts, lambda),
        used: pts.iter().map(|p| p.0).collect(),
        skipped,
    })
}

/// The fit objective at an arbitrary `lambda`, over the same `n` as
/// [`fit_lambda`].
pub fn lambda_sse(curve: &DivergenceCurve, psi: &Psi, lambda: f64) -> Result<f64> {
    Ok(sse_of(&lambda_points(curve, psi)?.0, lambda))
}

/// Bound inputs plus optional calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundModel {
    pub psi: Psi,
    pub lambda: Option<f64>,
    pub m: Option<NormBound>,
}

/// Bound quantities at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpsilonRecord {
    pub n: usize,
    pub upsilon: f64,
    pub linear: f64,
    pub quadratic: f64,
    pub rho: Option<f64>,
    pub balance_point: Option<f64>,
    pub regime: Regime,
    pub constraint_case: ConstraintCase,
    /// `lambda sqrt(Upsilon(n))` when calibrated.
    pub fitted: Option<f64>,
    /// `sqrt(2) m sqrt(Upsilon(n))` when `m` is known.
    pub mean_bound: Option<f64>,
    /// Set when `Upsilon(n) < 0`.
    pub error: Option<String>,
}

impl BoundModel {
    pub fn new(psi: impl Into<Psi>) -> Self {
        Self {
            psi: psi.into(),
            lambda: None,
            m: None,
        }
    }

    /// Tabulates `n = 1..=n_max`; negative `Upsilon` is reported per row.
    pub fn evaluate(&self, n_max: usize) -> Result<Vec<UpsilonRecord>> {
        (1..=n_max).map(|n| self.record(n)).collect()
    }

    fn record(&self, n: usize) -> Result<UpsilonRecord> {
        let (eq, aa, ab) = self.psi.raw_at(n)?;
        let c = PsiConstants::raw(eq, aa, ab);
        let nf = n as f64;
        let u = c.upsilon_raw(nf);
        let (linear, quadratic) = decompose(&c, nf);
        let root = (u >= 0.0).then(|| u.sqrt());
        Ok(UpsilonRecord {
            n,
            upsilon: u,
            linear,
            quadratic,
            rho: rho(&c, nf).ok(),
            balance_point: balance_point(&c).ok(),
            regime: classify_regime(&c, nf),
            constraint_case: constraint_case(&c),
            fitted: self.lambda.zip(root).map(|(l, r)| l * r),
            mean_bound: self.m.zip(root).map(|(m, r)| std::f64::consts::SQRT_2 * m.m * r),
            error: (u < 0.0).then(|| Error::NegativeBound { n, value: u }.to_string()),
        })
    }
}

/// Bound-chain checks at one `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub n: usize,
    /// `Upsilon(n)` from the sup-clamped profile.
    pub upsilon: f64,
    pub linear: f64,
    pub quadratic: f64,
    pub rho: Option<f64>,
    pub regime: Regime,
    /// Sample mean of `D(n)`.
    pub mean: f64,
    /// Sample mean of `D(n)^2`.
    pub mean_sq: f64,
    /// `mean_sq` rebuilt from norms and cosines.
    pub mean_sq_expanded: f64,
    /// `2 m^2 Upsilon(n)`.
    pub bound: f64,
    pub jensen_ok: bool,
    pub decomp_ok: bool,
    pub final_ok: bool,
    /// `bound - mean_sq`; negative when the final step fails.
    pub slack: f64,
    /// `2 m^2 Upsilon(n)` with mean-clamped measures (not asserted).
    pub bound_mean_clamped: f64,
    pub final_ok_mean_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub m: f64,
    pub samples: usize,
    pub records: Vec<ChainRecord>,
}

impl ChainReport {
    /// True when (a), (b) and (c) hold at every `n`.
    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.jensen_ok && r.decomp_ok && r.final_ok)
    }

    pub fn failures(&self) -> Vec<usize> {
        self.records
            .iter()
            .filter(|r| !(r.jensen_ok && r.decomp_ok && r.final_ok))
            .map(|r| r.n)
            .collect()
    }
}

/// Per-sample `D(n)^2` for `n = 1..=len`, expanded as
/// `sum_i |A_i|^2 + |B_i|^2 - 2 |A_i||B_i| cos(A_i, B_i)` plus the
/// cross-position terms `|A_i||A_j| cos(A_i, A_j) + |B_i||B_j| cos(B_i, B_j)
/// - |A_i||B_j| cos(A_i, B_j) - |B_i||A_j| cos(B_i, A_j)` over `i != j`.
///
/// Also returns the squared total norm mass, used as a rounding scale.
fn expanded_sq(g: &SampleGram) -> Vec<(f64, f64)> {
    let (na, nb) = (&g.norm_a, &g.norm_b);
    let mut out = Vec::with_capacity(g.len);
    let mut total = 0.0;
    let mut mass = 0.0;
    for k in 0..g.len {
        let mut inc = na[k] * na[k] + nb[k] * nb[k] - 2.0 * na[k] * nb[k] * g.cos_ab(k, k);
        for i in 0..k {
            inc += 2.0
                * (na[i] * na[k] * g.cos_aa(i, k) + nb[i] * nb[k] * g.cos_bb(i, k)
                    - na[i] * nb[k] * g.cos_ab(i, k)
                    - nb[i] * na[k] * g.cos_ab(k, i));
        }
        total += inc;
        mass += na[k] + nb[k];
        out.push((total, mass * mass));
    }
    out
}

/// Numerically checks every step from `E[D(n)]` to `2 m^2 Upsilon(n)`:
/// (a) Jensen, (b) the diagonal/cross expansion of `E[D(n)^2]`, and (c) the
/// final bound with sup-clamped measures and `m` from [`norm_bound`].
pub fn validate_bound_chain(set: &TraceSet, n_max: usize) -> Result<ChainReport> {
    if set.is_empty() {
        return Err(Error::EmptyPopulation);
    }
    let curve = divergence_curve(set, n_max, EstimatorMode::NormOfSum)?;
    let stats = cosine_stats(set, n_max)?;
    let sup = Psi::Profile(profile_from_stats(&stats, ProfileMode::SupClamped));
    let mean = Psi::Profile(profile_from_stats(&stats, ProfileMode::MeanClamped));
    let m = norm_bound(set, n_max)?.m;
    let reach = curve.n_max();

    let expanded: Vec<Vec<(f64, f64)>> = set
        .samples()
        .par_iter()
        .enumerate()
        .map(|(idx, pair)| {
            let g = SampleGram::new(pair, reach);
            g.check_nonzero(idx)?;
            Ok(expanded_sq(&g))
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(reach);
    for n in 1..=reach {
        let mut vals: Vec<f64> = expanded.iter().filter_map(|e| e.get(n - 1).map(|x| x.0)).collect();
        let mut scale: Vec<f64> = expanded.iter().filter_map(|e| e.get(n - 1).map(|x| x.1)).collect();
        let count = vals.len() as f64;
        let rhs = order_free_sum(&mut vals) / count;
        let scale = order_free_sum(&mut scale) / count;

        let lhs = curve.mean_sq[n - 1];
        let mu = curve.mean[n - 1];
        let jensen_ok = mu * mu <= lhs * (1.0 + RANGE_SLACK);
        let diff = (lhs - rhs).abs();
        let decomp_ok = diff <= DECOMPOSITION_TOL * lhs.abs().max(rhs.abs()) || diff <= RANGE_SLACK * scale;

        let c = sup.at(n)?;
        let nf = n as f64;
        let u = c.upsilon_raw(nf);
        let (linear, quadratic) = decompose(&c, nf);
        let bound = 2.0 * m * m * u;
        let bound_mean = 2.0 * m * m * upsilon_unchecked(&mean, n)?;
        records.push(ChainRecord {
            n,
            upsilon: u,
            linear,
            quadratic,
            rho: rho(&c, nf).ok(),
            regime: classify_regime(&c, nf),
            mean: mu,
            mean_sq: lhs,
            mean_sq_expanded: rhs,
            bound,
            jensen_ok,
            decomp_ok,
            final_ok: lhs <= bound,
            slack: bound - lhs,
            bound_mean_clamped: bound_mean,
            final_ok_mean_clamped: lhs <= bound_mean,
        });
    }
    Ok(ChainReport {
        m,
        samples: set.len(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::BranchPairTrace;
    use std::collections::BTreeMap;

    fn fig1a() -> PsiConstants {
        PsiConstants::new(0.7, 0.9, 0.899).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn upsilon_examples() {
        let p: Psi = fig1a().into();
        assert!(close(upsilon(&p, 2).unwrap(), 0.602, 1e-12));
        assert!(close(upsilon(&p, 1).unwrap(), 0.3, 1e-12));
        let neg: Psi = PsiConstants::new(0.7, 0.88, 0.90).unwrap().into();
        match upsilon(&neg, 32) {
            Err(Error::NegativeBound { n: 32, value }) => assert!(close(value, -10.24, 1e-12)),
            other => panic!("{other:?}"),
        }
        assert!(upsilon(&p, 0).is_err());
    }

    #[test]
    fn decompose_examples() {
        let (l, q) = decompose(&fig1a(), 2.0);
        assert!(close(l, 0.598, 1e-12) && close(q, 0.004, 1e-12));
        assert_eq!(decompose(&fig1a(), 0.0), (0.0, 0.0));
        let flat = PsiConstants::new(0.3, 0.5, 0.5).unwrap();
        assert_eq!(decompose(&flat, 1e6).1, 0.0);
    }

    #[test]
    fn ratio_and_balance_examples() {
        let p = fig1a();
        assert!(close(balance_point(&p).unwrap(), 299.0, 1e-9));
        assert!(close(rho(&p, 299.0).unwrap(), 1.0, 1e-9));
        assert!(close(rho(&p, 2990.0).unwrap(), 0.1, 1e-9));
        let flat = PsiConstants::new(0.7, 0.5, 0.5).unwrap();
        assert!(matches!(rho(&flat, 3.0), Err(Error::DegenerateRatio(_))));
        assert!(matches!(balance_point(&flat), Err(Error::DegenerateRatio(_))));
        assert_eq!(balance_point(&PsiConstants::new(1.0, 0.6, 0.5).unwrap()).unwrap(), -1.0);
        assert_eq!(balance_point(&PsiConstants::new(0.5, 0.75, 0.5).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn regimes_and_cases() {
        let p = fig1a();
        assert_eq!(classify_regime(&p, 10.0), Regime::Sublinear);
        assert_eq!(classify_regime(&p, 1000.0), Regime::Linear);
        let star = balance_point(&p).unwrap();
        assert_eq!(classify_regime(&p, star), Regime::Balanced);
        let flat = PsiConstants::new(0.7, 0.5, 0.5).unwrap();
        assert_eq!(classify_regime(&flat, 1e9), Regime::Sublinear);
        assert_eq!(constraint_case(&flat), ConstraintCase::QuadraticVanishes);
        assert_eq!(constraint_case(&p), ConstraintCase::QuadraticPositive);
        match constraint_case(&PsiConstants::new(0.7, 0.88, 0.90).unwrap()) {
            ConstraintCase::QuadraticNegative { n_valid_max } => assert!(close(n_valid_max, 16.0, 1e-9)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn psi_range_is_checked() {
        assert!(PsiConstants::new(1.1, 0.5, 0.5).is_err());
        assert!(PsiConstants::new(0.5, -0.1, 0.5).is_err());
        assert!(PsiConstants::new(f64::NAN, 0.5, 0.5).is_err());
        assert_eq!(PsiConstants::new(1.0 + 1e-15, 0.5, 0.5).unwrap().psi_equal_ab(), 1.0);
    }

    fn curve(mean: Vec<f64>) -> DivergenceCurve {
        let n = mean.len();
        DivergenceCurve {
            mean_sq: mean.iter().map(|m| m * m).collect(),
            std: vec![0.0; n],
            counts: vec![1; n],
            mean,
            mode: EstimatorMode::NormOfSum,
            requested_n_max: n,
        }
    }

    #[test]
    fn lambda_examples() {
        let p: Psi = fig1a().into();
        let mean = (1..=20).map(|n| 2.0 * upsilon(&p, n).unwrap().sqrt()).collect();
        assert!(close(fit_lambda(&curve(mean), &p).unwrap().lambda, 2.0, 1e-12));

        // Raw profiles are not range-checked, so psi_eq = -3 gives Upsilon(1) = 4.
        let prof = DependencyProfile::from_arrays(vec![0.0], vec![0.0], vec![0.0], ProfileMode::MeanRaw).unwrap();
        let single = fit_lambda(&curve(vec![6.0]), &prof.into()).unwrap();
        assert!(close(single.lambda, 6.0, 1e-12)); // Upsilon(1) = 1
        let prof4 = DependencyProfile::from_arrays(vec![-3.0], vec![0.0], vec![0.0], ProfileMode::MeanRaw).unwrap();
        assert!(close(fit_lambda(&curve(vec![6.0]), &prof4.into()).unwrap().lambda, 3.0, 1e-12));

        let ones: Psi = PsiConstants::new(1.0, 0.5, 0.5).unwrap().into();
        assert!(matches!(fit_lambda(&curve(vec![1.0, 2.0]), &ones), Err(Error::DegenerateFit)));
    }

    #[test]
    fn lambda_skips_negative_upsilon() {
        let p: Psi = PsiConstants::new(0.7, 0.88, 0.90).unwrap().into();
        let fit = fit_lambda(&curve(vec![1.0; 20]), &p).unwrap();
        // Upsilon(16) is 0 up to rounding, so only n <= 15 and n >= 17 are certain.
        assert!(fit.used.starts_with(&(1..=15).collect::<Vec<_>>()));
        assert!(fit.skipped.ends_with(&[17, 18, 19, 20]));
        assert_eq!(fit.used.len() + fit.skipped.len(), 20);
    }

    #[test]
    fn model_reports_negative_rows() {
        let mut model = BoundModel::new(PsiConstants::new(0.7, 0.88, 0.90).unwrap());
        model.lambda = Some(1.0);
        let rows = model.evaluate(20).unwrap();
        assert!(rows[14].error.is_none() && rows[14].fitted.is_some());
        assert!(rows[16].error.is_some() && rows[16].fitted.is_none());
    }

    #[test]
    fn identical_branches_pass_trivially() {
        let rows: Vec<Vec<f32>> = vec![vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.3, 0.3]];
        let pair = BranchPairTrace::from_rows(&rows, &rows).unwrap();
        let set = TraceSet::new(2, vec![pair], BTreeMap::new()).unwrap();
        let report = validate_bound_chain(&set, 3).unwrap();
        assert_eq!(report.records.len(), 3);
        for r in &report.records {
            assert_eq!(r.mean_sq, 0.0);
            assert!(r.jensen_ok && r.decomp_ok && r.final_ok, "{r:?}");
        }
        assert!(report.all_pass());
    }
}
