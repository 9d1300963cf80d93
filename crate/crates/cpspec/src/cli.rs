//! Command-line interface: sample generation, single solves, and batch
//! experiments.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cpspec_core::recovery::{
    estimate_amplitudes, extract_frequencies, reconstruct_signal, ReconstructionMethod,
};
use cpspec_core::signal::{sample_observations, synthesize_signal, SampleSet, SpectralModel};
use cpspec_core::solver::{solve, SolverConfig};
use cpspec_core::tensor::{fold, FoldParams};
use cpspec_core::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::config::{ExperimentConfig, SweepAxis};
use crate::harness::{run_phase_transition, run_sweep, RunOutput};
use crate::metrics::{normalized_error, rsnr};
use crate::report;

/// Recover sparse sinusoid mixtures from partial time samples by structured
/// tensor completion.
#[derive(Debug, Parser)]
#[command(name = "cpspec", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a random K-component signal and write observed samples
    /// plus a ground-truth sidecar (`<out>.truth.<ext>`).
    Generate(GenerateArgs),
    /// Fold a samples file, run the completion solver, and write both
    /// reconstructions.
    Solve(SolveArgs),
    /// Noiseless success-rate grid over (K, M).
    PhaseTransition(BatchArgs),
    /// RSNR sweep along SNR or measurement count at fixed K.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Signal length N.
    #[arg(long, default_value_t = 127)]
    pub n: usize,
    /// Number of sinusoid components K.
    #[arg(long)]
    pub k: usize,
    /// Number of observed samples M.
    #[arg(long)]
    pub m: usize,
    /// Seed for the model draw, sample positions, and noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Additive noise level in dB; omit for noiseless samples.
    #[arg(long = "snr-db")]
    pub snr_db: Option<f64>,
    /// Output CSV path.
    #[arg(long, default_value = "samples.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Samples CSV (`index,re,im` with a `# n_total` comment).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Signal length N; overrides the file's `# n_total` comment.
    #[arg(long)]
    pub n: Option<usize>,
    /// Second tensor dimension L; defaults to the balanced choice
    /// (N - P + 2) / 2.
    #[arg(long)]
    pub l: Option<usize>,
    /// Third tensor dimension P.
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// Fixed regularization weight; replaces the continuation schedule.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Keep components with energy at least this fraction of the largest.
    #[arg(long = "prune-ratio")]
    pub prune_ratio: Option<f64>,
    /// Sweep budget per regularization stage.
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// Relative objective decrease treated as a stall.
    #[arg(long = "rel-tol")]
    pub rel_tol: Option<f64>,
    /// Initial component budget (default: automatic).
    #[arg(long = "k-init")]
    pub k_init: Option<usize>,
    /// Solver initialization seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path for the reconstruction table.
    #[arg(long, default_value = "result.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Full grid (21 x 23 points, 100 trials).
    Full,
    /// Desk-scale grid (3 x 5 points, 20 trials).
    Quick,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Flat `key = value` config file applied over the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Baseline grid before config file and flags apply. Sweeps take only
    /// the trial count from it.
    #[arg(long, value_enum, default_value_t = Preset::Full)]
    pub preset: Preset,
    /// Signal length N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Second tensor dimension L.
    #[arg(long)]
    pub l: Option<usize>,
    /// Third tensor dimension P.
    #[arg(long)]
    pub p: Option<usize>,
    /// K axis (`3`, `3,7,11`, or `3:2:43`).
    #[arg(long)]
    pub k: Option<String>,
    /// M axis (same spellings).
    #[arg(long)]
    pub m: Option<String>,
    /// SNR axis in dB (same spellings); empty string clears it.
    #[arg(long)]
    pub snr: Option<String>,
    /// Trials per grid point.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Success threshold on relative error (strict `<`).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
    /// Also write a gnuplot script next to the CSV.
    #[arg(long)]
    pub gnuplot: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Which quantity varies along the sweep.
    #[arg(long, value_enum)]
    pub axis: AxisArg,
    #[command(flatten)]
    pub batch: BatchArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    /// Vary SNR at fixed (K, M).
    Snr,
    /// Vary the measurement count at fixed (K, SNR).
    M,
}

impl From<AxisArg> for SweepAxis {
    fn from(axis: AxisArg) -> Self {
        match axis {
            AxisArg::Snr => SweepAxis::Snr,
            AxisArg::M => SweepAxis::Measurements,
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(&args),
        Command::Solve(args) => cmd_solve(&args),
        Command::PhaseTransition(args) => cmd_phase_transition(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    if args.k == 0 {
        bail!("need at least one component");
    }
    let mut model_rng = ChaCha20Rng::seed_from_u64(splitmix64(args.seed ^ 1));
    let model = SpectralModel::random(args.k, &mut model_rng);
    let x = synthesize_signal(&model, args.n);
    let samples = sample_observations(&x, args.m, args.snr_db, splitmix64(args.seed ^ 2))?;

    report::write_samples(&args.out, &samples)?;
    let sidecar = report::sidecar_path(&args.out);
    report::write_truth(&sidecar, model.components(), args.n, samples.noise_sigma())?;

    println!(
        "wrote {} observed samples of N={} to {}",
        samples.m(),
        args.n,
        args.out.display()
    );
    println!("ground truth (K={}) in {}", args.k, sidecar.display());
    match (args.snr_db, samples.noise_sigma()) {
        (Some(snr), Some(sigma)) => {
            println!("noise: {snr} dB SNR (per-sample sigma {sigma:.6e})");
        }
        _ => println!("noise: none"),
    }
    Ok(())
}

fn solver_config_from(args: &SolveArgs) -> SolverConfig {
    let mut solver = SolverConfig {
        seed: args.seed,
        k_init: args.k_init,
        ..SolverConfig::default()
    };
    if let Some(lambda) = args.lambda {
        solver.lambda = lambda;
        if lambda > 0.0 {
            solver.lambda_schedule = None;
        }
    }
    if let Some(ratio) = args.prune_ratio {
        solver.prune_ratio = ratio;
    }
    if let Some(iters) = args.max_iters {
        solver.max_iters = iters;
    }
    if let Some(tol) = args.rel_tol {
        solver.rel_tol = tol;
    }
    solver
}

fn cmd_solve(args: &SolveArgs) -> Result<()> {
    let file = report::read_samples(&args.input)?;
    let n_total = args
        .n
        .or(file.n_total)
        .context("samples file has no `# n_total` comment; pass --n")?;
    let samples = SampleSet::new(n_total, file.observations, None)?;
    let params = match args.l {
        Some(l) => FoldParams::new(n_total, l, args.p)?,
        None => FoldParams::balanced(n_total, args.p)?,
    };
    let [i1, i2, i3] = params.dims();
    println!(
        "folding {} of {} samples into a {}x{}x{} tensor",
        samples.m(),
        n_total,
        i1,
        i2,
        i3
    );

    let observed = fold(&samples, &params)?;
    let result = solve(&observed, &solver_config_from(args))?;
    println!(
        "rank estimate {} after {} sweeps ({}); masked residual {:.3e}",
        result.rank_estimate,
        result.iterations,
        if result.converged { "converged" } else { "budget exhausted" },
        result.masked_residual
    );
    for w in &result.warnings {
        log::warn!("{w}");
    }

    let estimates = extract_frequencies(&result.factors, &params)?;
    let amplitudes = estimate_amplitudes(
        &samples,
        &estimates.iter().map(|e| e.omega).collect::<Vec<_>>(),
    );
    match &amplitudes {
        Ok(amps) => {
            println!("components (by energy):");
            println!("  {:>12}  {:>24}  {:>12}", "omega", "amplitude", "energy");
            for (e, a) in estimates.iter().zip(amps) {
                println!(
                    "  {:>12.8}  {:>24}  {:>12.5e}",
                    e.omega,
                    report::format_complex(*a),
                    e.confidence
                );
            }
        }
        Err(err) => println!("amplitude fit unavailable: {err}"),
    }

    let average =
        reconstruct_signal(&result, &samples, &params, ReconstructionMethod::TensorAverage)?;
    let resynthesis = reconstruct_signal(
        &result,
        &samples,
        &params,
        ReconstructionMethod::ModelResynthesis,
    );
    let resynthesis = match resynthesis {
        Ok(signal) => Some(signal),
        Err(err) => {
            println!("model resynthesis unavailable: {err}");
            None
        }
    };
    report::write_result(&args.out, &samples, &average, resynthesis.as_deref())?;
    println!("reconstructions written to {}", args.out.display());

    let sidecar = report::sidecar_path(&args.input);
    if sidecar.exists() {
        let (components, truth_n, _) = report::read_truth(&sidecar)?;
        let truth_n = truth_n.unwrap_or(n_total);
        if truth_n == n_total {
            let model = SpectralModel::new(components)?;
            let truth = synthesize_signal(&model, n_total);
            report_quality("tensor average", &truth, &average)?;
            if let Some(resynth) = &resynthesis {
                report_quality("model resynthesis", &truth, resynth)?;
            }
        } else {
            log::warn!(
                "sidecar n_total {} disagrees with {}; skipping RSNR",
                truth_n,
                n_total
            );
        }
    }
    Ok(())
}

fn report_quality(label: &str, truth: &[Complex64], estimate: &[Complex64]) -> Result<()> {
    let q = rsnr(truth, estimate)?;
    let err = normalized_error(truth, estimate)?;
    println!(
        "{label}: RSNR {:.2} dB{}, relative error {:.3e}",
        q.db,
        if q.exact { " (exact)" } else { "" },
        err
    );
    Ok(())
}

/// Preset, then config file, then explicit flags.
fn resolve_config(args: &BatchArgs, base: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = base;
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    if let Some(n) = args.n {
        cfg.n_total = n;
    }
    if let Some(l) = args.l {
        cfg.l = l;
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    if let Some(k) = &args.k {
        cfg.k_values = crate::config::parse_usize_list(k)?;
    }
    if let Some(m) = &args.m {
        cfg.m_values = crate::config::parse_usize_list(m)?;
    }
    if let Some(snr) = &args.snr {
        cfg.snr_values = crate::config::parse_f64_list(snr)?;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(threshold) = args.threshold {
        cfg.threshold = threshold;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &args.out_dir {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn describe_points(out: &RunOutput) {
    for p in &out.points {
        let snr = p
            .snr_db
            .map(|s| format!(" snr={s}dB"))
            .unwrap_or_default();
        let flag = if p.feasible { "" } else { " [infeasible]" };
        println!(
            "K={:>2} M={:>3}{snr}: success {:>5.1}% ({}/{}), mean RSNR {:>8.2} dB{flag}",
            p.k,
            p.m,
            100.0 * p.success_rate,
            p.successes,
            p.trials,
            p.mean_rsnr_db
        );
    }
}

fn cmd_phase_transition(args: &BatchArgs) -> Result<()> {
    let base = match args.preset {
        Preset::Full => ExperimentConfig::default(),
        Preset::Quick => ExperimentConfig::quick(),
    };
    let cfg = resolve_config(args, base)?;
    let out = run_phase_transition(&cfg)?;

    let dir = &cfg.output_dir;
    report::write_phase_csv(&dir.join("phase_transition.csv"), &out.points)?;
    report::write_trials_csv(&dir.join("phase_transition_trials.csv"), &out.records)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config_used.txt"), cfg.to_file_string())?;
    if args.gnuplot {
        std::fs::write(
            dir.join("phase_transition.gp"),
            report::render_phase_plot("phase_transition.csv"),
        )?;
    }
    describe_points(&out);
    println!(
        "{} points x {} trials written to {}",
        out.points.len(),
        cfg.trials,
        dir.display()
    );
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let axis: SweepAxis = args.axis.into();
    let mut base = ExperimentConfig::sweep_defaults(axis);
    if args.batch.preset == Preset::Quick {
        base.trials = 20;
    }
    let cfg = resolve_config(&args.batch, base)?;
    let out = run_sweep(&cfg, axis)?;

    let (stem, axis_column, axis_label) = match axis {
        SweepAxis::Snr => ("sweep_snr", 3, "SNR (dB)"),
        SweepAxis::Measurements => ("sweep_m", 2, "measurements M"),
    };
    let dir = &cfg.output_dir;
    let csv_name = format!("{stem}.csv");
    report::write_sweep_csv(&dir.join(&csv_name), &out.points)?;
    report::write_trials_csv(&dir.join(format!("{stem}_trials.csv")), &out.records)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config_used.txt"), cfg.to_file_string())?;
    if args.batch.gnuplot {
        std::fs::write(
            dir.join(format!("{stem}.gp")),
            report::render_sweep_plot(&csv_name, axis_column, axis_label),
        )?;
    }
    describe_points(&out);
    println!(
        "{} points x {} trials written to {}",
        out.points.len(),
        cfg.trials,
        dir.display()
    );
    Ok(())
}
