use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use divscale::bound::UpsilonRecord;
use divscale::dependency::write_histograms_csv;
use divscale::scaling::{fit_selectors, write_diff_report, write_fit_report, AlphaCase, Selector};
use divscale::{
    alpha_constant_psi, alpha_general_psi, cosine_histograms, dependency_profile, divergence_curve, fit_lambda,
    norm_bound, read_score_csv, read_trace_file, scaling_constant, validate_bound_chain, write_trace_file,
    BoundModel, DependencyProfile, DivergenceCurve, LambdaFit, Psi, PsiConstants, ScalingParams, SynthSpec,
};
use serde::Serialize;

use crate::summary::RunSummary;
use crate::{BoundArgs, CompareArgs, EstimateArgs, FitArgs, SimulateArgs};

pub const TRACE_FILE: &str = "traces.btrc";
pub const PROFILE_FILE: &str = "profile.csv";
pub const DIVERGENCE_FILE: &str = "divergence.csv";
pub const HISTOGRAM_FILE: &str = "histograms.csv";
pub const ESTIMATE_FILE: &str = "estimate.json";
pub const BOUND_FILE: &str = "bound.json";
pub const CHAIN_FILE: &str = "chain.json";
pub const FIT_FILE: &str = "fit.csv";
pub const DIFF_FILE: &str = "diff.csv";

fn create(dir: &Path, name: &str, summary: &mut RunSummary) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    summary.output(&path);
    Ok(BufWriter::new(file))
}

fn write_json(dir: &Path, name: &str, value: &impl Serialize, summary: &mut RunSummary) -> Result<()> {
    let mut w = create(dir, name, summary)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn open(path: &Path, summary: &mut RunSummary) -> Result<File> {
    summary.input(path);
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

pub fn simulate(args: &SimulateArgs, summary: &mut RunSummary) -> Result<()> {
    let mut spec: SynthSpec = match &args.spec {
        Some(path) => {
            let file = open(path, summary)?;
            serde_json::from_reader(file).with_context(|| format!("parsing spec {}", path.display()))?
        }
        None => SynthSpec::default(),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let set = divscale::generate(&spec)?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join(TRACE_FILE);
    write_trace_file(&set, &path)?;
    summary.output(&path);
    Ok(())
}

#[derive(Serialize)]
struct EstimateInfo {
    samples: usize,
    dim: usize,
    requested_n_max: usize,
    n_max: usize,
    m: f64,
    single_sample_positions: Vec<usize>,
}

pub struct Estimates {
    pub set: divscale::TraceSet,
}

pub fn estimate(args: &EstimateArgs, summary: &mut RunSummary) -> Result<Estimates> {
    summary.input(&args.input);
    let set = read_trace_file(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let curve = divergence_curve(&set, args.n_max, args.estimator)?;
    if curve.is_truncated() {
        summary.warn(format!(
            "n_max = {} exceeds the longest sample; curve stops at n = {}",
            args.n_max,
            curve.n_max()
        ));
    }
    let single = curve.single_sample_positions();
    if !single.is_empty() {
        summary.warn(format!("std is 0 by construction at n = {single:?} (single sample)"));
    }
    let profile = dependency_profile(&set, args.n_max, args.mode)?;
    let hists = cosine_histograms(&set, args.n_max, args.bins)?;
    let m = norm_bound(&set, args.n_max)?;

    profile.write_csv(create(&args.out, PROFILE_FILE, summary)?)?;
    curve.write_csv(create(&args.out, DIVERGENCE_FILE, summary)?)?;
    write_histograms_csv(&hists, create(&args.out, HISTOGRAM_FILE, summary)?)?;
    let info = EstimateInfo {
        samples: set.len(),
        dim: set.dim(),
        requested_n_max: args.n_max,
        n_max: curve.n_max(),
        m: m.m,
        single_sample_positions: single,
    };
    write_json(&args.out, ESTIMATE_FILE, &info, summary)?;
    Ok(Estimates { set })
}

pub fn report(args: &EstimateArgs, summary: &mut RunSummary) -> Result<()> {
    let est = estimate(args, summary)?;
    let chain = validate_bound_chain(&est.set, args.n_max)?;
    for r in chain.records.iter().filter(|r| !(r.jensen_ok && r.decomp_ok && r.final_ok)) {
        summary.error(
            format!("n={}", r.n),
            format!(
                "bound chain failed: jensen={} decomposition={} final={} (slack {:.6e})",
                r.jensen_ok, r.decomp_ok, r.final_ok, r.slack
            ),
        );
    }
    write_json(&args.out, CHAIN_FILE, &chain, summary)
}

#[derive(Serialize)]
struct BoundRow {
    #[serde(flatten)]
    record: UpsilonRecord,
    alpha: Option<f64>,
    divergence_mean: Option<f64>,
}

#[derive(Serialize)]
struct BoundReport {
    psi_source: String,
    n_max: usize,
    beta: f64,
    gamma: f64,
    scaling_constant: Option<f64>,
    lambda: Option<LambdaFit>,
    overlay_rmse: Option<f64>,
    overlay_rmse_relative: Option<f64>,
    records: Vec<BoundRow>,
}

fn alpha_at(params: &ScalingParams, n: usize) -> Option<f64> {
    if n < 2 {
        return None;
    }
    match params.psi() {
        Psi::Constant(_) => alpha_constant_psi(params, n as f64).ok(),
        Psi::Profile(p) => {
            let delta = p.psi_cross_sym[n - 1] - p.psi_cross_ab[n - 1];
            let case = if delta > 0.0 {
                AlphaCase::DeltaPositive
            } else if delta == 0.0 {
                AlphaCase::DeltaZero
            } else {
                return None;
            };
            alpha_general_psi(params, n, case).ok()
        }
    }
}

pub fn bound(args: &BoundArgs, summary: &mut RunSummary) -> Result<()> {
    let (psi, source): (Psi, String) = match (&args.profile, &args.constants) {
        (Some(path), _) => {
            let p = DependencyProfile::read_csv(open(path, summary)?)
                .with_context(|| format!("reading profile {}", path.display()))?;
            (p.into(), format!("profile:{}", path.display()))
        }
        (None, Some(c)) => {
            let [eq, aa, ab] = c[..] else {
                bail!("--constants takes three values: psi_equal_ab,psi_cross_aa,psi_cross_ab");
            };
            (PsiConstants::new(eq, aa, ab)?.into(), "constants".to_string())
        }
        (None, None) => bail!("either --profile or --constants is required"),
    };
    let curve: Option<DivergenceCurve> = match &args.divergence {
        Some(path) => Some(
            DivergenceCurve::read_csv(open(path, summary)?)
                .with_context(|| format!("reading divergence {}", path.display()))?,
        ),
        None => None,
    };
    let mut n_max = args.n_max.or(psi.n_max()).unwrap_or(32);
    if let Some(limit) = psi.n_max() {
        n_max = n_max.min(limit);
    }
    if let Some(c) = &curve {
        if c.n_max() != n_max {
            summary.warn(format!(
                "divergence covers n = 1..={}, bound table covers n = 1..={n_max}",
                c.n_max()
            ));
        }
    }

    let lambda = curve.as_ref().map(|c| fit_lambda(c, &psi)).transpose()?;
    let mut model = BoundModel::new(psi.clone());
    model.lambda = lambda.as_ref().map(|f| f.lambda);
    let params = ScalingParams::new(args.beta, args.gamma, psi)?;
    let c = match scaling_constant(&params) {
        Ok(c) => Some(c),
        Err(e) => {
            summary.error("scaling_constant", e);
            None
        }
    };

    let mut records = Vec::with_capacity(n_max);
    for record in model.evaluate(n_max)? {
        if let Some(msg) = &record.error {
            summary.error(format!("n={}", record.n), msg);
        }
        let n = record.n;
        records.push(BoundRow {
            alpha: alpha_at(&params, n),
            divergence_mean: curve.as_ref().and_then(|c| c.mean.get(n - 1).copied()),
            record,
        });
    }

    let (mut rmse, mut rel) = (None, None);
    if let Some(fit) = &lambda {
        let pairs: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| fit.used.contains(&r.record.n))
            .filter_map(|r| Some((r.divergence_mean?, r.record.fitted?)))
            .collect();
        if !pairs.is_empty() {
            let k = pairs.len() as f64;
            let e = (pairs.iter().map(|(m, f)| (m - f).powi(2)).sum::<f64>() / k).sqrt();
            let mean = pairs.iter().map(|p| p.0).sum::<f64>() / k;
            rmse = Some(e);
            rel = (mean > 0.0).then(|| e / mean);
        }
    }

    let report = BoundReport {
        psi_source: source,
        n_max,
        beta: args.beta,
        gamma: args.gamma,
        scaling_constant: c,
        lambda,
        overlay_rmse: rmse,
        overlay_rmse_relative: rel,
        records,
    };
    write_json(&args.out, BOUND_FILE, &report, summary)
}

fn matches(filter: &Option<String>, value: &str) -> bool {
    filter.as_deref().is_none_or(|f| f == value)
}

pub fn fit(args: &FitArgs, summary: &mut RunSummary) -> Result<()> {
    summary.input(&args.input);
    let table = read_score_csv(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let selectors: Vec<Selector> = table
        .selectors()
        .into_iter()
        .filter(|(b, m, c)| matches(&args.benchmark, b) && matches(&args.metric, m) && matches(&args.config, c))
        .map(|(b, m, c)| Selector::new(b, m, c))
        .collect();
    if selectors.is_empty() {
        bail!("no series matches the selectors");
    }
    let mut rows = Vec::new();
    for (sel, fit) in fit_selectors(&table, &selectors, &args.exclude) {
        match fit {
            Ok(f) => rows.push((sel, f)),
            Err(e) => summary.error(
                format!("{}/{}/{}", sel.benchmark, sel.metric, sel.config),
                format!("skipped: {e}"),
            ),
        }
    }
    write_fit_report(&rows, create(&args.out, FIT_FILE, summary)?)?;
    Ok(())
}

pub fn compare(args: &CompareArgs, summary: &mut RunSummary) -> Result<()> {
    summary.input(&args.input);
    let table = read_score_csv(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let mut keys: Vec<(String, String)> = Vec::new();
    for (b, m, _) in table.selectors() {
        if matches(&args.benchmark, &b) && matches(&args.metric, &m) && !keys.contains(&(b.clone(), m.clone())) {
            keys.push((b, m));
        }
    }
    let mut rows = Vec::new();
    for (b, m) in keys {
        match divscale::compare_configs(&table, &b, &m, &args.config_a, &args.config_b) {
            Ok(d) => rows.push((b, m, d)),
            Err(e) => summary.error(format!("{b}/{m}"), format!("skipped: {e}")),
        }
    }
    write_diff_report(&rows, create(&args.out, DIFF_FILE, summary)?)?;
    Ok(())
}
