//! Frequency and amplitude recovery from Vandermonde-structured CP factors.
//!
//! Every column of an exact factor is a geometric progression in its
//! component's frequency, so the frequency is read off from the phase of the
//! energy-weighted lag-1 correlation `sum_m v_{m+1} * conj(v_m)`. The
//! estimator is immune to the unknown complex column scale (the gauge
//! freedom of CP factors) and to 2*pi phase wrapping.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64;

use crate::cp::{component_energies, reconstruct, CpFactors, Mode};
use crate::error::{Error, Result};
use crate::linalg::{jacobi_svd, CMatrix};
use crate::signal::{synthesize_components, SampleSet, Sinusoid};
use crate::solver::SolveResult;
use crate::tensor::{unfold_to_signal, FoldParams};

/// Direction of the phase progression along a factor column: `Minus` for
/// columns advancing as `exp(-j*omega)` per step (modes 1 and 3), `Plus` for
/// mode 2, whose descending exponent layout advances as `exp(+j*omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseSign {
    Plus,
    Minus,
}

impl PhaseSign {
    fn value(self) -> f64 {
        match self {
            PhaseSign::Plus => 1.0,
            PhaseSign::Minus => -1.0,
        }
    }
}

/// One recovered sinusoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyEstimate {
    /// Estimated frequency in `[0, 2pi)`.
    pub omega: f64,
    /// Estimated amplitude; unset until an amplitude fit runs.
    pub amplitude: Option<Complex64>,
    /// Component energy `z_k` of the column this came from.
    pub confidence: f64,
}

/// Wraps into `[0, 2pi)`.
fn wrap_tau(x: f64) -> f64 {
    let r = x % TAU;
    let r = if r < 0.0 { r + TAU } else { r };
    // A tiny negative remainder can round up to exactly 2*pi.
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Smallest angular distance between two angles.
pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_tau(a - b);
    d.min(TAU - d)
}

/// Frequency of a geometric column from its lag-1 correlation:
/// `omega = mod(sign * arg(sum_m v_{m+1} * conj(v_m)), 2pi)`.
///
/// For a column `v_m = alpha * exp(-j*omega*(m-1))` each product equals
/// `|alpha|^2 * exp(-j*omega)`, so the phase of the sum is `-omega` and
/// `sign = -1` recovers it; scale and global phase cancel exactly.
pub fn column_frequency(v: &[Complex64], sign: PhaseSign) -> Result<f64> {
    if v.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "column of length {} has no phase increments",
            v.len()
        )));
    }
    if v.iter().all(|z| *z == Complex64::ZERO) {
        return Err(Error::DegenerateColumn("all-zero column"));
    }
    let mut acc = Complex64::ZERO;
    for w in v.windows(2) {
        acc += w[1] * w[0].conj();
    }
    if acc == Complex64::ZERO {
        return Err(Error::DegenerateColumn(
            "lag-1 correlation vanishes; no phase information",
        ));
    }
    Ok(wrap_tau(sign.value() * acc.arg()))
}

/// Per-component frequency estimates fused across the three modes.
///
/// Mode signs follow the factor layouts (`-1`, `+1`, `-1`); the mode-3
/// estimate only exists for `P >= 2`. Fusion is a circular mean weighted by
/// the number of lag-1 products per mode (`I1-1`, `I2-1`, `I3-1`).
/// Degenerate columns drop out of the fusion; a component with no usable
/// mode at all is dropped with a warning. Sorted by descending confidence
/// (component energy).
pub fn extract_frequencies(
    factors: &CpFactors,
    params: &FoldParams,
) -> Result<Vec<FrequencyEstimate>> {
    if factors.dims() != params.dims() {
        return Err(Error::ShapeMismatch(format!(
            "factors imply dims {:?}, fold params give {:?}",
            factors.dims(),
            params.dims()
        )));
    }
    let energies = component_energies(factors);
    let plan = [
        (Mode::One, PhaseSign::Minus),
        (Mode::Two, PhaseSign::Plus),
        (Mode::Three, PhaseSign::Minus),
    ];
    let mut out = Vec::with_capacity(factors.k());
    for k in 0..factors.k() {
        // Unit vectors at each mode's estimated angle, weighted by the
        // number of phase increments behind the estimate.
        let mut fused = Complex64::ZERO;
        let mut best: Option<(f64, f64)> = None;
        for (mode, sign) in plan {
            let matrix = factors.factor(mode);
            if matrix.rows() < 2 {
                continue;
            }
            let Ok(omega) = column_frequency(matrix.col(k), sign) else {
                continue;
            };
            let weight = (matrix.rows() - 1) as f64;
            fused += weight * Complex64::from_polar(1.0, omega);
            if best.is_none_or(|(w, _)| weight > w) {
                best = Some((weight, omega));
            }
        }
        let Some((_, best_omega)) = best else {
            log::warn!("component {k} has no usable column in any mode; dropped");
            continue;
        };
        // Antipodal cancellation leaves no direction; fall back to the
        // highest-weight mode.
        let omega = if fused == Complex64::ZERO {
            best_omega
        } else {
            wrap_tau(fused.arg())
        };
        out.push(FrequencyEstimate {
            omega,
            amplitude: None,
            confidence: energies[k],
        });
    }
    out.sort_by(|a, b| {
        b.confidence
            .partial_cmp(&a.confidence)
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    Ok(out)
}

/// Least-squares amplitudes for known frequencies: solves the `M x K`
/// system `E a = y` with `E[m, k] = exp(-j*omega_k*(n_m - 1))` over the
/// observed samples.
///
/// When `E` is ill-conditioned (condition number above `1e10`, e.g. from
/// near-duplicate frequencies) a relative Tikhonov term of `1e-10 *
/// sigma_max^2` is applied instead, with a warning logged.
pub fn estimate_amplitudes(samples: &SampleSet, omegas: &[f64]) -> Result<Vec<Complex64>> {
    let m = samples.m();
    let k = omegas.len();
    if k > m {
        return Err(Error::Underdetermined {
            unknowns: k,
            observations: m,
        });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let obs = samples.observations();
    let e = CMatrix::from_fn(m, k, |r, c| {
        Complex64::from_polar(1.0, -omegas[c] * (obs[r].0 - 1) as f64)
    });
    let y: Vec<Complex64> = obs.iter().map(|&(_, v)| v).collect();
    let svd = jacobi_svd(&e);
    let cond = svd.condition_number();
    let tikhonov = if cond > 1e10 {
        log::warn!("amplitude system condition {cond:.3e}; applying relative ridge");
        1e-10 * svd.sigma[0] * svd.sigma[0]
    } else {
        0.0
    };
    Ok(svd.solve(&y, tikhonov))
}

/// How to turn a solve result back into a length-`N` signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconstructionMethod {
    /// Reconstruct the dense tensor from the factors and average each
    /// sample's surface.
    TensorAverage,
    /// Extract frequencies, fit amplitudes on the observed samples, and
    /// synthesize the model.
    ModelResynthesis,
}

/// Full-signal reconstruction by either route.
pub fn reconstruct_signal(
    result: &SolveResult,
    samples: &SampleSet,
    params: &FoldParams,
    method: ReconstructionMethod,
) -> Result<Vec<Complex64>> {
    if samples.n_total() != params.n_total() {
        return Err(Error::InvalidArgument(format!(
            "sample set has N={}, fold params expect N={}",
            samples.n_total(),
            params.n_total()
        )));
    }
    match method {
        ReconstructionMethod::TensorAverage => {
            unfold_to_signal(&reconstruct(&result.factors), params)
        }
        ReconstructionMethod::ModelResynthesis => {
            if result.rank_estimate == 0 {
                return Err(Error::EmptyModel);
            }
            let estimates = extract_frequencies(&result.factors, params)?;
            if estimates.is_empty() {
                return Err(Error::EmptyModel);
            }
            let omegas: Vec<f64> = estimates.iter().map(|e| e.omega).collect();
            let amps = estimate_amplitudes(samples, &omegas)?;
            let components: Vec<Sinusoid> = omegas
                .iter()
                .zip(&amps)
                .map(|(&omega, &amplitude)| Sinusoid { omega, amplitude })
                .collect();
            Ok(synthesize_components(&components, params.n_total()))
        }
    }
}
