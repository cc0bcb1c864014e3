//! Divergence between two continuations that branch from a shared prefix,
//! the dependency measures that bound its growth, and the power-law scaling
//! of task performance in the number of tokens.
//!
//! * [`trace`]: the `BTRC` container of paired hidden-state traces.
//! * [`divergence`]: `D(n)` per sample and its population curve.
//! * [`dependency`]: cosine-based dependency measures and histograms.
//! * [`bound`]: `Upsilon(n)`, regimes, `lambda` calibration, bound-chain checks.
//! * [`scaling`]: `alpha(n)` and log-space power-law fits of score tables.
//! * [`synth`]: synthetic traces with known dependency targets.

pub mod bound;
pub mod dependency;
pub mod divergence;
pub mod error;
mod numeric;
pub mod scaling;
pub mod scores;
pub mod synth;
pub mod trace;

pub use bound::{
    balance_point, classify_regime, constraint_case, decompose, fit_lambda, rho, upsilon, validate_bound_chain,
    BoundModel, ChainReport, ConstraintCase, LambdaFit, Psi, PsiConstants, Regime,
};
pub use dependency::{cosine_histograms, dependency_profile, CosineHistogram, DependencyProfile, ProfileMode};
pub use divergence::{divergence_curve, divergence_single, norm_bound, DivergenceCurve, EstimatorMode, NormBound};
pub use error::{Error, Result};
pub use scaling::{
    alpha_constant_psi, alpha_curve, alpha_general_psi, compare_configs, fit_power_law, minmax_normalize,
    scaling_constant, ScalingFit, ScalingParams,
};
pub use scores::{read_score_csv, ScoreRecord, ScoreTable};
pub use synth::{expected_psi, generate, SynthSpec};
pub use trace::{read_trace_file, write_trace_file, BranchPairTrace, TraceSet};
