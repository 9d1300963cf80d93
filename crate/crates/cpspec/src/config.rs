//! Experiment configuration: defaults, presets, and a flat `key = value`
//! file format.
//!
//! Numeric list values accept three spellings: a single number (`3`), a
//! comma-separated list (`3,7,11`), or an inclusive `start:step:end` range
//! (`3:2:43`). Lines starting with `#` (and trailing `#` comments) are
//! ignored. Keys mirror the config fields; unknown or repeated keys are
//! rejected so typos fail loudly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cpspec_core::solver::SolverConfig;
use cpspec_core::tensor::FoldParams;

/// Which sweep axis a batch run varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Vary the noise level at fixed (K, M).
    Snr,
    /// Vary the number of observed samples at fixed (K, SNR).
    Measurements,
}

/// Full description of a batch experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Signal length `N`.
    pub n_total: usize,
    /// Second tensor dimension `L`.
    pub l: usize,
    /// Third tensor dimension `P`.
    pub p: usize,
    /// Component counts to test.
    pub k_values: Vec<usize>,
    /// Observation counts to test.
    pub m_values: Vec<usize>,
    /// SNR points in dB; empty means noiseless.
    pub snr_values: Vec<f64>,
    /// Trials per grid point.
    pub trials: usize,
    /// Relative-error success threshold (strict `<`).
    pub threshold: f64,
    /// Base seed; every trial seed derives from it and the point coordinates.
    pub seed: u64,
    /// Directory for CSV and script outputs.
    pub output_dir: PathBuf,
    /// Solver settings shared by every trial.
    pub solver: SolverConfig,
}

impl Default for ExperimentConfig {
    /// The full 21 x 23 noiseless phase-transition grid at 100 trials per
    /// point.
    fn default() -> Self {
        Self {
            n_total: 127,
            l: 63,
            p: 2,
            k_values: usize_range(3, 2, 43),
            m_values: usize_range(20, 3, 86),
            snr_values: Vec::new(),
            trials: 100,
            threshold: 1e-3,
            seed: 0,
            output_dir: PathBuf::from("out"),
            solver: SolverConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Desk-scale grid for quick runs: K in {3, 7, 11}, M in
    /// {20, 35, 50, 65, 80}, 20 trials per point.
    pub fn quick() -> Self {
        Self {
            k_values: vec![3, 7, 11],
            m_values: vec![20, 35, 50, 65, 80],
            trials: 20,
            ..Self::default()
        }
    }

    /// Default single-K sweep settings for the given axis: K = 3 throughout,
    /// SNR in {10, 20, 30, 40} dB at M = 25 for the SNR axis, and M in
    /// {25, 40, 55, 70} at 40 dB for the measurement axis.
    pub fn sweep_defaults(axis: SweepAxis) -> Self {
        let base = Self::default();
        match axis {
            SweepAxis::Snr => Self {
                k_values: vec![3],
                m_values: vec![25],
                snr_values: vec![10.0, 20.0, 30.0, 40.0],
                ..base
            },
            SweepAxis::Measurements => Self {
                k_values: vec![3],
                m_values: vec![25, 40, 55, 70],
                snr_values: vec![40.0],
                ..base
            },
        }
    }

    /// The tensor shape this config folds into.
    pub fn fold_params(&self) -> Result<FoldParams> {
        FoldParams::new(self.n_total, self.l, self.p)
            .with_context(|| format!("invalid fold shape N={}, L={}, P={}", self.n_total, self.l, self.p))
    }

    /// Applies the file at `path` on top of `self`.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        self.apply_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("line {}: expected `key = value`, got `{raw}`", idx + 1);
            };
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_owned()) {
                bail!("line {}: key `{key}` given twice", idx + 1);
            }
            self.apply_key(key, value)
                .with_context(|| format!("line {}: key `{key}`", idx + 1))?;
        }
        Ok(())
    }

    fn apply_key(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n_total = parse_scalar(value)?,
            "l" => self.l = parse_scalar(value)?,
            "p" => self.p = parse_scalar(value)?,
            "k" => self.k_values = parse_usize_list(value)?,
            "m" => self.m_values = parse_usize_list(value)?,
            "snr" => self.snr_values = parse_f64_list(value)?,
            "trials" => self.trials = parse_scalar(value)?,
            "threshold" => self.threshold = parse_scalar(value)?,
            "seed" => self.seed = parse_scalar(value)?,
            "output_dir" => self.output_dir = PathBuf::from(value),
            "k_init" => {
                self.solver.k_init = if value.is_empty() {
                    None
                } else {
                    Some(parse_scalar(value)?)
                }
            }
            "lambda" => {
                // A fixed positive weight replaces the continuation schedule.
                let lambda: f64 = parse_scalar(value)?;
                self.solver.lambda = lambda;
                if lambda > 0.0 {
                    self.solver.lambda_schedule = None;
                }
            }
            "prune_ratio" => self.solver.prune_ratio = parse_scalar(value)?,
            "max_iters" => self.solver.max_iters = parse_scalar(value)?,
            "rel_tol" => self.solver.rel_tol = parse_scalar(value)?,
            other => bail!("unknown key `{other}`"),
        }
        Ok(())
    }

    /// Renders the config in the same flat format `apply_str` reads, for
    /// dropping a reproducibility record next to the outputs.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n = {}", self.n_total);
        let _ = writeln!(s, "l = {}", self.l);
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "k = {}", join(&self.k_values));
        let _ = writeln!(s, "m = {}", join(&self.m_values));
        let _ = writeln!(s, "snr = {}", join(&self.snr_values));
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "threshold = {}", self.threshold);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "output_dir = {}", self.output_dir.display());
        match self.solver.k_init {
            Some(k) => {
                let _ = writeln!(s, "k_init = {k}");
            }
            None => {
                let _ = writeln!(s, "k_init =");
            }
        }
        let _ = writeln!(s, "lambda = {}", self.solver.lambda);
        let _ = writeln!(s, "prune_ratio = {}", self.solver.prune_ratio);
        let _ = writeln!(s, "max_iters = {}", self.solver.max_iters);
        let _ = writeln!(s, "rel_tol = {}", self.solver.rel_tol);
        s
    }
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_scalar<T: std::str::FromStr>(value: &str) -> Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    value
        .parse()
        .with_context(|| format!("cannot parse `{value}`"))
}

fn usize_range(start: usize, step: usize, end: usize) -> Vec<usize> {
    (start..=end).step_by(step).collect()
}

/// `3` | `3,7,11` | `3:2:43` (inclusive).
pub fn parse_usize_list(value: &str) -> Result<Vec<usize>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((start, rest)) = value.split_once(':') {
        let Some((step, end)) = rest.split_once(':') else {
            bail!("range `{value}` must be start:step:end");
        };
        let (start, step, end): (usize, usize, usize) =
            (parse_scalar(start.trim())?, parse_scalar(step.trim())?, parse_scalar(end.trim())?);
        if step == 0 {
            bail!("range `{value}` has zero step");
        }
        if end < start {
            bail!("range `{value}` has end < start");
        }
        return Ok(usize_range(start, step, end));
    }
    value
        .split(',')
        .map(|part| parse_scalar(part.trim()))
        .collect()
}

/// `40` | `10,20,30,40` | `10:10:40` (inclusive; tolerant of rounding in the
/// step count).
pub fn parse_f64_list(value: &str) -> Result<Vec<f64>> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    let colons = value.matches(':').count();
    if colons == 2 {
        let mut parts = value.splitn(3, ':');
        let start: f64 = parse_scalar(parts.next().unwrap().trim())?;
        let step: f64 = parse_scalar(parts.next().unwrap().trim())?;
        let end: f64 = parse_scalar(parts.next().unwrap().trim())?;
        if !(step > 0.0) {
            bail!("range `{value}` needs a positive step");
        }
        if end < start {
            bail!("range `{value}` has end < start");
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + step * i as f64).collect());
    }
    if colons != 0 {
        bail!("range `{value}` must be start:step:end");
    }
    value
        .split(',')
        .map(|part| parse_scalar(part.trim()))
        .collect()
}
