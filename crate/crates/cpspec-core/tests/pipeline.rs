//! End-to-end runs of the full chain: synthesize a sinusoid mixture, fold the
//! samples, complete the masked tensor, then read the model back out.

use cpspec_core::recovery::{
    circular_distance, extract_frequencies, reconstruct_signal, ReconstructionMethod,
};
use cpspec_core::signal::{sample_observations, synthesize_signal, SampleSet, SpectralModel};
use cpspec_core::solver::{solve, SolveResult, SolverConfig};
use cpspec_core::tensor::{analytic_factors, fold, FoldParams};
use cpspec_core::Complex64;
use rand::rngs::SmallRng;
use rand::SeedableRng;

fn relative_error(estimate: &[Complex64], truth: &[Complex64]) -> f64 {
    let num: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let den: f64 = truth.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    num / den
}

/// Greedy circular matching of estimated against true frequencies; returns
/// the worst matched distance.
fn worst_frequency_error(estimated: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(estimated.len(), truth.len());
    let mut remaining: Vec<f64> = truth.to_vec();
    let mut worst: f64 = 0.0;
    for &w in estimated {
        let (idx, dist) = remaining
            .iter()
            .enumerate()
            .map(|(i, &t)| (i, circular_distance(w, t)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        remaining.swap_remove(idx);
        worst = worst.max(dist);
    }
    worst
}

#[test]
fn full_observation_recovers_model_and_signal() {
    let params = FoldParams::new(24, 10, 3).unwrap();
    for seed in [1u64, 2, 3] {
        let mut rng = SmallRng::seed_from_u64(seed);
        let model = SpectralModel::random(2, &mut rng);
        let x = synthesize_signal(&model, 24);
        let samples = SampleSet::full(&x).unwrap();
        let observed = fold(&samples, &params).unwrap();

        let config = SolverConfig {
            seed,
            ..SolverConfig::default()
        };
        let result = solve(&observed, &config).unwrap();
        assert_eq!(result.rank_estimate, 2, "seed {seed}");
        assert!(result.converged, "seed {seed}");
        assert!(
            result.masked_residual < 1e-6 * observed.observed_norm(),
            "seed {seed}: residual {}",
            result.masked_residual
        );

        let estimates = extract_frequencies(&result.factors, &params).unwrap();
        let omegas: Vec<f64> = estimates.iter().map(|e| e.omega).collect();
        let err = worst_frequency_error(&omegas, &model.omegas());
        assert!(err < 1e-6, "seed {seed}: frequency error {err}");

        let avg =
            reconstruct_signal(&result, &samples, &params, ReconstructionMethod::TensorAverage)
                .unwrap();
        let syn = reconstruct_signal(
            &result,
            &samples,
            &params,
            ReconstructionMethod::ModelResynthesis,
        )
        .unwrap();
        assert!(relative_error(&avg, &x) < 1e-6, "seed {seed}");
        assert!(relative_error(&syn, &x) < 1e-6, "seed {seed}");
        assert!(relative_error(&syn, &avg) < 2e-6, "seed {seed}");
    }
}

#[test]
fn subsampled_noiseless_recovery() {
    let params = FoldParams::new(40, 18, 3).unwrap();
    let mut rng = SmallRng::seed_from_u64(9);
    let model = SpectralModel::random(2, &mut rng);
    let x = synthesize_signal(&model, 40);
    let samples = sample_observations(&x, 24, None, 77).unwrap();
    let observed = fold(&samples, &params).unwrap();

    let result = solve(&observed, &SolverConfig::default()).unwrap();
    assert_eq!(result.rank_estimate, 2);

    let estimates = extract_frequencies(&result.factors, &params).unwrap();
    let omegas: Vec<f64> = estimates.iter().map(|e| e.omega).collect();
    let err = worst_frequency_error(&omegas, &model.omegas());
    assert!(err < 1e-4, "frequency error {err}");

    // Resynthesis from recovered frequencies and fitted amplitudes
    // reproduces the unobserved samples too.
    let syn = reconstruct_signal(
        &result,
        &samples,
        &params,
        ReconstructionMethod::ModelResynthesis,
    )
    .unwrap();
    assert!(relative_error(&syn, &x) < 1e-3, "signal error {}", relative_error(&syn, &x));
}

#[test]
fn exact_factors_reconstruct_by_both_routes() {
    let params = FoldParams::new(30, 14, 2).unwrap();
    let mut rng = SmallRng::seed_from_u64(21);
    let model = SpectralModel::random(3, &mut rng);
    let x = synthesize_signal(&model, 30);
    let samples = SampleSet::full(&x).unwrap();

    let factors = analytic_factors(&model, &params);
    let result = SolveResult {
        rank_estimate: factors.k(),
        factors,
        objective_trace: vec![0.0],
        masked_residual: 0.0,
        iterations: 0,
        converged: true,
        warnings: Vec::new(),
    };

    let avg = reconstruct_signal(&result, &samples, &params, ReconstructionMethod::TensorAverage)
        .unwrap();
    let syn = reconstruct_signal(
        &result,
        &samples,
        &params,
        ReconstructionMethod::ModelResynthesis,
    )
    .unwrap();
    assert!(relative_error(&avg, &x) < 1e-12);
    assert!(relative_error(&syn, &x) < 1e-12);
}
