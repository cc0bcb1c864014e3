mod common;

use std::path::PathBuf;

use common::rel_close;
use divscale::scaling::{alpha_from_balance, fit_points, AlphaCase};
use divscale::{
    alpha_constant_psi, alpha_curve, alpha_general_psi, compare_configs, fit_power_law, minmax_normalize,
    read_score_csv, scaling_constant, upsilon, DependencyProfile, ProfileMode, Psi, PsiConstants, ScalingParams,
    ScoreTable,
};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn scores() -> ScoreTable {
    read_score_csv(fixture("vlm_token_scores.csv")).unwrap()
}

#[test]
fn fixture_is_complete() {
    let t = scores();
    assert_eq!(t.len(), 780);
    for (b, m, c) in t.selectors() {
        let pts = t.series(&b, &m, &c);
        let n: Vec<u32> = pts.iter().map(|p| p.0).collect();
        assert_eq!(n, vec![1, 8, 16, 32, 64, 128, 256, 384, 512, 768], "{b}/{m}/{c}");
    }
}

#[test]
fn published_fits_are_reproduced() {
    let t = scores();
    let mut rdr = csv::Reader::from_path(fixture("reference_fits.csv")).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let (b, m, c) = (&rec[0], &rec[1], &rec[2]);
        let (c_ref, a_ref): (f64, f64) = (rec[3].parse().unwrap(), rec[4].parse().unwrap());
        let fit = fit_power_law(&t, b, m, c, &[]).unwrap();
        assert!((fit.c - c_ref).abs() / c_ref <= 0.01, "{b}/{m}/{c}: c {} vs {c_ref}", fit.c);
        assert!((fit.alpha - a_ref).abs() <= 0.002, "{b}/{m}/{c}: alpha {} vs {a_ref}", fit.alpha);
        rows += 1;
    }
    assert_eq!(rows, 36);
}

#[test]
fn realworldqa_with_exclusions() {
    let t = scores();
    for (config, c_ref, a_ref) in [("vqq", 45.496627, -0.011420), ("vq-ft", 43.495766, -0.002974)] {
        let fit = fit_power_law(&t, "RealWorldQA", "Overall", config, &[384, 512]).unwrap();
        assert!((fit.c - c_ref).abs() / c_ref <= 0.01, "{config}: {}", fit.c);
        assert!((fit.alpha - a_ref).abs() <= 0.002, "{config}: {}", fit.alpha);
        assert_eq!(fit.excluded, vec![384, 512]);
        assert_eq!(fit.points.len(), 8);
    }
}

#[test]
fn published_config_differences() {
    let t = scores();
    let pope = compare_configs(&t, "POPE", "Overall", "vqq", "vq-ft").unwrap();
    assert_eq!(pope[0].n_l, 768);
    assert!((pope[0].diff - 1.235).abs() < 1e-9);
    let mme = compare_configs(&t, "MME", "Overall", "vqq", "vq-ft").unwrap();
    let at64 = mme.iter().find(|d| d.n_l == 64).unwrap();
    assert!((at64.diff - 201.212).abs() < 1e-9);
    assert!(pope.windows(2).all(|w| w[0].n_l > w[1].n_l));
}

#[test]
fn pope_minmax_extremes() {
    let t = scores();
    let series: Vec<f64> = t.series("POPE", "Overall", "vqq").iter().map(|p| p.1).collect();
    let norm = minmax_normalize(&series).unwrap();
    assert_eq!(norm[0], 0.0);
    assert_eq!(norm[9], 1.0);
    assert!(norm.iter().all(|v| (0.0..=1.0).contains(v)));
}

fn params(beta: f64, gamma: f64, psi: PsiConstants) -> ScalingParams {
    ScalingParams::new(beta, gamma, psi).unwrap()
}

fn psi_with_balance(eq: f64, n_star: f64) -> PsiConstants {
    // delta = (1 - eq) / (1 + n*), placed on top of psi_ab = 0.
    PsiConstants::new(eq, (1.0 - eq) / (1.0 + n_star), 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn exact_recovery(c in 0.01f64..1e4, alpha in -2.0f64..2.0, grid in prop::collection::btree_set(1u32..5000, 2..12)) {
        let pts: Vec<(u32, f64)> = grid.iter().map(|&n| (n, c * (n as f64).powf(-alpha))).collect();
        let fit = fit_points(&pts, &[]).unwrap();
        prop_assert!(rel_close(fit.c, c, 1e-9));
        prop_assert!((fit.alpha - alpha).abs() <= 1e-9 * alpha.abs().max(1e-3));
    }

    #[test]
    fn fit_invariances(scores in prop::collection::vec(0.1f64..100.0, 3..10), k in 0.01f64..100.0, rot in 0usize..10) {
        let pts: Vec<(u32, f64)> = scores.iter().enumerate().map(|(i, &s)| (1 << i, s)).collect();
        let base = fit_points(&pts, &[]).unwrap();
        let mut shuffled = pts.clone();
        shuffled.rotate_left(rot % pts.len());
        shuffled.reverse();
        prop_assert_eq!(&fit_points(&shuffled, &[]).unwrap(), &base);
        let scaled: Vec<(u32, f64)> = pts.iter().map(|&(n, s)| (n, s * k)).collect();
        let fit = fit_points(&scaled, &[]).unwrap();
        prop_assert!((fit.alpha - base.alpha).abs() <= 1e-9);
        prop_assert!(rel_close(fit.c, k * base.c, 1e-9));
    }

    #[test]
    fn alpha_is_decreasing_and_bounded(eq in 0.0f64..0.95, n_star in 1.0f64..5000.0, beta in 0.1f64..4.0) {
        let p = params(beta, 1.0, psi_with_balance(eq, n_star));
        let mut prev = f64::INFINITY;
        let mut n = 2.0f64;
        while n <= 1e6 {
            let a = alpha_constant_psi(&p, n).unwrap();
            prop_assert!(a < prev);
            prop_assert!(a >= -beta - 1e-12 && a <= -beta / 2.0 + 1e-12);
            prev = a;
            n *= 1.5;
        }
    }

    #[test]
    fn defining_identity(eq in 0.0f64..0.95, aa in 0.0f64..1.0, frac in 0.0f64..1.0, beta in 0.1f64..4.0,
                         gamma in 0.1f64..10.0, n in 2usize..1_000_000) {
        let psi = PsiConstants::new(eq, aa, aa * frac).unwrap();
        let p = params(beta, gamma, psi);
        let a = alpha_constant_psi(&p, n as f64).unwrap();
        let u = upsilon(&Psi::Constant(psi), n).unwrap();
        let c = scaling_constant(&p).unwrap();
        prop_assert!(rel_close(gamma * u.powf(beta / 2.0) * (n as f64).powf(a), c, 1e-9));
    }
}

#[test]
fn general_forms_agree_with_constant_psi() {
    let k = 4096;
    for (eq, aa, ab) in [(0.7, 0.9, 0.899), (0.2, 0.6, 0.1), (0.5, 0.75, 0.5)] {
        let c = PsiConstants::new(eq, aa, ab).unwrap();
        let prof = DependencyProfile::from_arrays(vec![eq; k], vec![aa; k], vec![ab; k], ProfileMode::MeanRaw).unwrap();
        for beta in [0.5, 1.0, 2.0] {
            let pc = params(beta, 1.7, c);
            let pg = ScalingParams::new(beta, 1.7, prof.clone()).unwrap();
            for n in [2usize, 16, 299, 4096] {
                let a = alpha_constant_psi(&pc, n as f64).unwrap();
                let b = alpha_general_psi(&pg, n, AlphaCase::DeltaPositive).unwrap();
                assert!((a - b).abs() <= 1e-9, "{eq},{aa},{ab} beta={beta} n={n}: {a} vs {b}");
            }
        }
    }
    // delta = 0: both forms give -beta/2
    let prof = DependencyProfile::from_arrays(vec![0.4; 64], vec![0.3; 64], vec![0.3; 64], ProfileMode::MeanRaw).unwrap();
    let pg = ScalingParams::new(1.0, 1.0, prof).unwrap();
    for n in [2usize, 7, 64] {
        assert!((alpha_general_psi(&pg, n, AlphaCase::DeltaZero).unwrap() + 0.5).abs() < 1e-12);
    }
}

#[test]
fn general_form_satisfies_identity_with_varying_profile() {
    let k = 200;
    let eq: Vec<f64> = (0..k).map(|i| 0.5 + 0.3 * (i as f64 / k as f64)).collect();
    let aa: Vec<f64> = (0..k).map(|i| 0.6 + 0.1 * ((i as f64) * 0.1).sin()).collect();
    let ab: Vec<f64> = aa.iter().map(|a| a - 0.01).collect();
    let prof = DependencyProfile::from_arrays(eq, aa, ab, ProfileMode::MeanRaw).unwrap();
    let p = ScalingParams::new(1.3, 2.0, prof.clone()).unwrap();
    let c = scaling_constant(&p).unwrap();
    let psi = Psi::Profile(prof);
    for n in 2..=k {
        let a = alpha_general_psi(&p, n, AlphaCase::DeltaPositive).unwrap();
        let lhs = 2.0 * upsilon(&psi, n).unwrap().powf(1.3 / 2.0) * (n as f64).powf(a);
        assert!(rel_close(lhs, c, 1e-9), "n={n}");
    }
}

#[test]
fn smaller_balance_point_gives_smaller_alpha() {
    let a30 = alpha_constant_psi(&params(1.0, 1.0, psi_with_balance(0.7, 30.0)), 100.0).unwrap();
    let a299 = alpha_constant_psi(&params(1.0, 1.0, psi_with_balance(0.7, 299.0)), 100.0).unwrap();
    assert!(a30 < a299);
    assert!((alpha_from_balance(1.0, 30.0, 100.0).unwrap() - a30).abs() < 1e-9);
    let ns: Vec<f64> = (2..=1000).map(f64::from).collect();
    let curve = alpha_curve(&params(1.0, 1.0, psi_with_balance(0.7, 299.0)), &ns).unwrap();
    assert!(curve.points.windows(2).all(|w| w[1].1 < w[0].1));
    assert!(!curve.clipped && !curve.below_one);
}
