//! Batch experiment engine: seeded trials of the full recovery pipeline over
//! (K, M, SNR) grids, executed on a worker pool.
//!
//! Determinism: every trial's seed is a splitmix64 chain over the base seed,
//! the point coordinates (SNR folded in by its bit pattern), and the trial
//! index. Trials are pure functions of that seed, results are collected in
//! job order, and aggregation runs over the ordered records, so output is
//! identical whether trials run serially or in parallel.

use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use cpspec_core::recovery::{reconstruct_signal, ReconstructionMethod};
use cpspec_core::signal::{sample_observations, synthesize_signal, SpectralModel};
use cpspec_core::solver::{solve, SolverConfig};
use cpspec_core::tensor::{fold, validate_params, FoldParams};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, SweepAxis};
use crate::metrics::{normalized_error, rsnr};

/// One executed trial.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub k: usize,
    pub m: usize,
    pub snr_db: Option<f64>,
    /// The derived per-trial seed (see [`trial_seed`]).
    pub seed: u64,
    /// Strict `normalized_error < threshold`.
    pub success: bool,
    pub normalized_error: f64,
    pub rsnr_db: f64,
    pub rank_estimate: usize,
    pub iterations: usize,
    /// Diagnostic only; deliberately never serialized so runs stay
    /// byte-identical across machines.
    pub wall_time: Duration,
}

/// Aggregate over one grid point's trials.
#[derive(Debug, Clone)]
pub struct PointSummary {
    pub k: usize,
    pub m: usize,
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_rsnr_db: f64,
    pub median_rsnr_db: f64,
    pub std_rsnr_db: f64,
    /// Kruskal-condition verdict for (K, dims); infeasible points still run.
    pub feasible: bool,
}

/// Everything a batch run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub points: Vec<PointSummary>,
    /// All trial records, grouped by point in point order.
    pub records: Vec<TrialRecord>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-trial seed: a splitmix64 chain over the base seed, the
/// point coordinates (SNR enters by bit pattern; absent SNR uses a marker
/// word), and the trial index.
pub fn trial_seed(base: u64, k: usize, m: usize, snr_db: Option<f64>, trial: usize) -> u64 {
    let mut s = splitmix64(base);
    let coords = [
        k as u64,
        m as u64,
        snr_db.map(f64::to_bits).unwrap_or(u64::MAX),
        trial as u64,
    ];
    for v in coords {
        s = splitmix64(s ^ v);
    }
    s
}

/// Initial component budget when the config leaves `k_init` automatic: at
/// least the solver's stock 20, half again the expected K plus slack, capped
/// by the tensor dimensions that bound attainable rank.
pub fn adaptive_k_init(k: usize, params: &FoldParams) -> usize {
    let [i1, i2, i3] = params.dims();
    ((3 * k).div_ceil(2) + 2).max(20).min(i1).min(i2 * i3)
}

fn solver_for_trial(config: &ExperimentConfig, k: usize, params: &FoldParams, seed: u64) -> SolverConfig {
    let mut solver = config.solver.clone();
    solver.seed = seed;
    if solver.k_init.is_none() {
        solver.k_init = Some(adaptive_k_init(k, params));
    }
    solver
}

/// Runs one seeded trial of the full pipeline: draw a fresh model, sample,
/// fold, solve, reconstruct by tensor averaging, and score.
pub fn run_trial(
    config: &ExperimentConfig,
    k: usize,
    m: usize,
    snr_db: Option<f64>,
    trial: usize,
) -> Result<TrialRecord> {
    let seed = trial_seed(config.seed, k, m, snr_db, trial);
    let params = config.fold_params()?;
    let start = Instant::now();

    let mut model_rng = ChaCha20Rng::seed_from_u64(splitmix64(seed ^ 1));
    let model = SpectralModel::random(k, &mut model_rng);
    let x = synthesize_signal(&model, config.n_total);
    let samples = sample_observations(&x, m, snr_db, splitmix64(seed ^ 2))
        .with_context(|| format!("sampling M={m} of N={}", config.n_total))?;
    let observed = fold(&samples, &params)?;
    let solver = solver_for_trial(config, k, &params, splitmix64(seed ^ 3));
    let result = solve(&observed, &solver)?;
    let x_hat = reconstruct_signal(&result, &samples, &params, ReconstructionMethod::TensorAverage)?;

    let err = normalized_error(&x, &x_hat)?;
    let quality = rsnr(&x, &x_hat)?;
    Ok(TrialRecord {
        k,
        m,
        snr_db,
        seed,
        success: err < config.threshold,
        normalized_error: err,
        rsnr_db: quality.db,
        rank_estimate: result.rank_estimate,
        iterations: result.iterations,
        wall_time: start.elapsed(),
    })
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn summarize(point: (usize, usize, Option<f64>), feasible: bool, records: &[TrialRecord]) -> PointSummary {
    let (k, m, snr_db) = point;
    let successes = records.iter().filter(|r| r.success).count();
    let rsnrs: Vec<f64> = records.iter().map(|r| r.rsnr_db).collect();
    PointSummary {
        k,
        m,
        snr_db,
        trials: records.len(),
        successes,
        success_rate: successes as f64 / records.len().max(1) as f64,
        mean_rsnr_db: mean(&rsnrs),
        median_rsnr_db: median(&rsnrs),
        std_rsnr_db: sample_std(&rsnrs),
        feasible,
    }
}

fn common_validation(config: &ExperimentConfig) -> Result<FoldParams> {
    if config.k_values.is_empty() || config.m_values.is_empty() {
        bail!("k and m axes must be nonempty");
    }
    if config.trials == 0 {
        bail!("trials must be >= 1");
    }
    if !(config.threshold > 0.0) {
        bail!("success threshold must be positive");
    }
    if let Some(&m) = config.m_values.iter().find(|&&m| m == 0 || m > config.n_total) {
        bail!("measurement count {m} outside 1..={}", config.n_total);
    }
    config.fold_params()
}

/// Executes `trials` seeded runs at each point and aggregates in point order.
fn execute(
    config: &ExperimentConfig,
    points: &[(usize, usize, Option<f64>)],
) -> Result<RunOutput> {
    let params = config.fold_params()?;
    let trials = config.trials;
    let records: Vec<TrialRecord> = (0..points.len() * trials)
        .into_par_iter()
        .map(|job| {
            let (k, m, snr_db) = points[job / trials];
            run_trial(config, k, m, snr_db, job % trials)
        })
        .collect::<Result<_>>()?;

    let points_out = points
        .iter()
        .enumerate()
        .map(|(idx, &(k, m, snr))| {
            let feasible = validate_params(config.n_total, Some(k), &params).acceptable;
            summarize((k, m, snr), feasible, &records[idx * trials..(idx + 1) * trials])
        })
        .collect();
    Ok(RunOutput {
        points: points_out,
        records,
    })
}

/// Noiseless success-rate grid over every (K, M) pair in the config.
///
/// Points failing the Kruskal feasibility check are flagged but still run.
pub fn run_phase_transition(config: &ExperimentConfig) -> Result<RunOutput> {
    common_validation(config)?;
    if !config.snr_values.is_empty() {
        bail!("phase transition runs are noiseless; clear the snr axis");
    }
    let points: Vec<(usize, usize, Option<f64>)> = config
        .k_values
        .iter()
        .flat_map(|&k| config.m_values.iter().map(move |&m| (k, m, None)))
        .collect();
    execute(config, &points)
}

/// RSNR statistics along one axis: SNR at fixed (K, M), or measurement count
/// at fixed (K, SNR).
pub fn run_sweep(config: &ExperimentConfig, axis: SweepAxis) -> Result<RunOutput> {
    common_validation(config)?;
    if config.k_values.len() != 1 {
        bail!("sweeps fix K to a single value");
    }
    let k = config.k_values[0];
    let points: Vec<(usize, usize, Option<f64>)> = match axis {
        SweepAxis::Snr => {
            if config.snr_values.is_empty() {
                bail!("snr sweep needs a nonempty snr axis");
            }
            if config.m_values.len() != 1 {
                bail!("snr sweep fixes M to a single value");
            }
            let m = config.m_values[0];
            config.snr_values.iter().map(|&s| (k, m, Some(s))).collect()
        }
        SweepAxis::Measurements => {
            if config.snr_values.len() > 1 {
                bail!("measurement sweep fixes SNR to at most one value");
            }
            let snr = config.snr_values.first().copied();
            config.m_values.iter().map(|&m| (k, m, snr)).collect()
        }
    };
    execute(config, &points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            n_total: 24,
            l: 10,
            p: 3,
            k_values: vec![2],
            m_values: vec![24],
            snr_values: Vec::new(),
            trials: 3,
            threshold: 1e-3,
            seed: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn trial_seeds_separate_every_coordinate() {
        let base = trial_seed(7, 3, 20, None, 0);
        assert_eq!(base, trial_seed(7, 3, 20, None, 0));
        assert_ne!(base, trial_seed(8, 3, 20, None, 0));
        assert_ne!(base, trial_seed(7, 4, 20, None, 0));
        assert_ne!(base, trial_seed(7, 3, 21, None, 0));
        assert_ne!(base, trial_seed(7, 3, 20, None, 1));
        assert_ne!(base, trial_seed(7, 3, 20, Some(40.0), 0));
        assert_ne!(
            trial_seed(7, 3, 20, Some(10.0), 0),
            trial_seed(7, 3, 20, Some(20.0), 0)
        );
    }

    #[test]
    fn adaptive_budget_tracks_k_within_dims() {
        let params = FoldParams::new(127, 63, 2).unwrap();
        assert_eq!(adaptive_k_init(3, &params), 20);
        assert_eq!(adaptive_k_init(12, &params), 20);
        assert_eq!(adaptive_k_init(21, &params), 34);
        assert_eq!(adaptive_k_init(43, &params), 64);
        let small = FoldParams::new(24, 10, 3).unwrap();
        assert_eq!(adaptive_k_init(43, &small), 13);
    }

    #[test]
    fn full_observation_point_succeeds() {
        let out = run_phase_transition(&tiny_config()).unwrap();
        assert_eq!(out.points.len(), 1);
        assert_eq!(out.records.len(), 3);
        let p = &out.points[0];
        assert_eq!(p.successes, 3);
        assert_eq!(p.success_rate, 1.0);
        assert!(p.feasible);
        for r in &out.records {
            assert_eq!(r.rank_estimate, 2, "seed {}", r.seed);
            assert_eq!(r.success, r.normalized_error < 1e-3);
        }
    }

    #[test]
    fn reruns_and_single_thread_pool_agree() {
        let cfg = tiny_config();
        let a = run_phase_transition(&cfg).unwrap();
        let b = run_phase_transition(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| run_phase_transition(&cfg)).unwrap();
        for other in [&b, &c] {
            assert_eq!(a.records.len(), other.records.len());
            for (x, y) in a.records.iter().zip(&other.records) {
                assert_eq!(x.seed, y.seed);
                assert_eq!(x.success, y.success);
                assert_eq!(x.normalized_error.to_bits(), y.normalized_error.to_bits());
                assert_eq!(x.rsnr_db.to_bits(), y.rsnr_db.to_bits());
                assert_eq!(x.rank_estimate, y.rank_estimate);
                assert_eq!(x.iterations, y.iterations);
            }
        }
    }

    #[test]
    fn infeasible_point_is_flagged_but_still_runs() {
        let mut cfg = tiny_config();
        cfg.k_values = vec![20];
        cfg.m_values = vec![12];
        cfg.trials = 2;
        // Dims (13, 10, 3): 13 + 10 + 3 = 26 < 2*20 + 2.
        let out = run_phase_transition(&cfg).unwrap();
        assert!(!out.points[0].feasible);
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.points[0].successes, 0);
    }

    #[test]
    fn sweep_axis_shape_validation() {
        let mut cfg = tiny_config();
        cfg.snr_values = vec![10.0];
        assert!(run_phase_transition(&cfg).is_err());

        let mut snr_sweep = tiny_config();
        snr_sweep.m_values = vec![12, 18];
        snr_sweep.snr_values = vec![10.0, 20.0];
        assert!(run_sweep(&snr_sweep, SweepAxis::Snr).is_err());

        let mut two_k = tiny_config();
        two_k.k_values = vec![2, 3];
        assert!(run_sweep(&two_k, SweepAxis::Measurements).is_err());

        let mut bad_m = tiny_config();
        bad_m.m_values = vec![30];
        assert!(run_phase_transition(&bad_m).is_err());
    }

    #[test]
    fn noisy_sweep_produces_finite_stats() {
        let mut cfg = tiny_config();
        cfg.m_values = vec![20];
        cfg.snr_values = vec![30.0, 50.0];
        cfg.trials = 2;
        let out = run_sweep(&cfg, SweepAxis::Snr).unwrap();
        assert_eq!(out.points.len(), 2);
        for p in &out.points {
            assert!(p.mean_rsnr_db.is_finite());
            assert!(p.median_rsnr_db.is_finite());
            assert!(p.std_rsnr_db >= 0.0);
            assert_eq!(p.trials, 2);
        }
        assert_eq!(out.points[0].snr_db, Some(30.0));
        assert_eq!(out.points[1].snr_db, Some(50.0));
    }
}
