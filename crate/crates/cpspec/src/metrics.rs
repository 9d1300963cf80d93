//! Reconstruction quality metrics.

use anyhow::{bail, Result};
use cpspec_core::Complex64;

/// Reconstruction signal-to-noise ratio in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rsnr {
    /// `20 log10(|x| / |x - x_hat|)`, capped at [`RSNR_CAP_DB`].
    pub db: f64,
    /// True when the reconstruction error is exactly zero.
    pub exact: bool,
}

/// Cap applied to the RSNR of (near-)exact reconstructions.
pub const RSNR_CAP_DB: f64 = 300.0;

fn norms(truth: &[Complex64], estimate: &[Complex64]) -> Result<(f64, f64)> {
    if truth.len() != estimate.len() {
        bail!(
            "signal length mismatch: truth has {}, estimate has {}",
            truth.len(),
            estimate.len()
        );
    }
    let signal: f64 = truth.iter().map(|z| z.norm_sqr()).sum();
    if signal == 0.0 {
        bail!("reference signal is identically zero");
    }
    let error: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok((signal, error))
}

/// Relative reconstruction error `|x - x_hat| / |x|`.
pub fn normalized_error(truth: &[Complex64], estimate: &[Complex64]) -> Result<f64> {
    let (signal, error) = norms(truth, estimate)?;
    Ok((error / signal).sqrt())
}

/// `20 log10(|x| / |x - x_hat|)`; an exact match is capped at +300 dB and
/// flagged rather than producing infinity.
pub fn rsnr(truth: &[Complex64], estimate: &[Complex64]) -> Result<Rsnr> {
    let (signal, error) = norms(truth, estimate)?;
    if error == 0.0 {
        return Ok(Rsnr {
            db: RSNR_CAP_DB,
            exact: true,
        });
    }
    Ok(Rsnr {
        db: (10.0 * (signal / error).log10()).min(RSNR_CAP_DB),
        exact: false,
    })
}

/// Success under the strict relative-error criterion
/// `|x - x_hat| / |x| < threshold`.
pub fn success(truth: &[Complex64], estimate: &[Complex64], threshold: f64) -> Result<bool> {
    if !(threshold > 0.0) {
        bail!("success threshold must be positive, got {threshold}");
    }
    Ok(normalized_error(truth, estimate)? < threshold)
}
