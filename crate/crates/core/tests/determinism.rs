use divscale::{
    cosine_histograms, dependency_profile, divergence_curve, generate, validate_bound_chain, EstimatorMode,
    ProfileMode, SynthSpec,
};

fn run_all() -> (Vec<u8>, String) {
    let spec = SynthSpec {
        dim: 32,
        n: 10,
        samples: 70,
        seed: 42,
        ..Default::default()
    };
    let set = generate(&spec).unwrap();
    let mut bytes = Vec::new();
    set.write_to(&mut bytes).unwrap();
    let summary = format!(
        "{:?}{:?}{:?}{:?}",
        divergence_curve(&set, 10, EstimatorMode::NormOfSum).unwrap(),
        dependency_profile(&set, 10, ProfileMode::SupClamped).unwrap(),
        cosine_histograms(&set, 10, 21).unwrap(),
        validate_bound_chain(&set, 10).unwrap(),
    );
    (bytes, summary)
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run_all);
    let many = rayon::ThreadPoolBuilder::new().num_threads(7).build().unwrap().install(run_all);
    assert_eq!(one.0, many.0);
    assert_eq!(one.1, many.1);
}
