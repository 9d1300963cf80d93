//! Complex sinusoid mixtures: the ground-truth model, signal synthesis, and
//! random partial observation with calibrated noise.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64;
// Float supplies f64 math in the pure no_std build; whenever libstd enters
// the crate graph (tests, std-enabled dependents) the inherent methods
// shadow it and the import sits idle.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// One complex sinusoid: contributes `amplitude * exp(-j*omega*(n-1))` at
/// sample index `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinusoid {
    /// Angular frequency in radians, in `[0, 2pi)`.
    pub omega: f64,
    /// Complex amplitude.
    pub amplitude: Complex64,
}

/// A mixture of `K` complex sinusoids with pairwise distinct frequencies.
///
/// Distinctness is required for the Vandermonde k-rank arguments behind the
/// uniqueness guarantees, so it is enforced at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    components: Vec<Sinusoid>,
}

impl SpectralModel {
    /// Validates frequencies (range and distinctness) and builds the model.
    pub fn new(components: Vec<Sinusoid>) -> Result<Self> {
        for s in &components {
            if !(s.omega >= 0.0 && s.omega < TAU) {
                return Err(Error::InvalidModel(format!(
                    "omega {} outside [0, 2pi)",
                    s.omega
                )));
            }
            if !s.amplitude.re.is_finite() || !s.amplitude.im.is_finite() {
                return Err(Error::InvalidModel("non-finite amplitude".to_string()));
            }
        }
        for (i, a) in components.iter().enumerate() {
            for b in &components[..i] {
                if a.omega == b.omega {
                    return Err(Error::InvalidModel(format!(
                        "duplicate frequency {}",
                        a.omega
                    )));
                }
            }
        }
        Ok(SpectralModel { components })
    }

    /// Draws `k` components: frequencies uniform over `[0, 2pi)` (redrawn on
    /// the measure-zero event of an exact duplicate), amplitudes with i.i.d.
    /// standard normal real and imaginary parts.
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        let mut components: Vec<Sinusoid> = Vec::with_capacity(k);
        while components.len() < k {
            let omega = rng.random::<f64>() * TAU;
            if components.iter().any(|s| s.omega == omega) {
                continue;
            }
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            components.push(Sinusoid {
                omega,
                amplitude: Complex64::new(re, im),
            });
        }
        SpectralModel { components }
    }

    /// Number of sinusoids `K`.
    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Sinusoid] {
        &self.components
    }

    /// Frequencies in component order.
    pub fn omegas(&self) -> Vec<f64> {
        self.components.iter().map(|s| s.omega).collect()
    }
}

/// A partially observed signal: `n_total` is the full length `N`, and each
/// observation pairs a 1-based sample index with its (possibly noisy) value.
///
/// The observation list may be empty; folding an empty set yields an all-zero
/// mask, and the solver rejects it.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n_total: usize,
    observations: Vec<(usize, Complex64)>,
    noise_sigma: Option<f64>,
}

impl SampleSet {
    /// Validates index range and strict ordering.
    pub fn new(
        n_total: usize,
        observations: Vec<(usize, Complex64)>,
        noise_sigma: Option<f64>,
    ) -> Result<Self> {
        if n_total == 0 {
            return Err(Error::InvalidArgument("n_total must be >= 1".to_string()));
        }
        if observations.len() > n_total {
            return Err(Error::InvalidArgument(format!(
                "{} observations exceed signal length {}",
                observations.len(),
                n_total
            )));
        }
        let mut prev = 0usize;
        for &(idx, _) in &observations {
            if idx == 0 || idx > n_total {
                return Err(Error::InvalidArgument(format!(
                    "sample index {idx} outside 1..={n_total}"
                )));
            }
            if idx <= prev {
                return Err(Error::InvalidArgument(
                    "sample indices must be strictly increasing".to_string(),
                ));
            }
            prev = idx;
        }
        if let Some(s) = noise_sigma {
            if !(s >= 0.0) {
                return Err(Error::InvalidArgument(
                    "noise_sigma must be nonnegative".to_string(),
                ));
            }
        }
        Ok(SampleSet {
            n_total,
            observations,
            noise_sigma,
        })
    }

    /// Wraps a fully observed signal (every index present, no noise).
    pub fn full(signal: &[Complex64]) -> Result<Self> {
        SampleSet::new(
            signal.len(),
            signal.iter().copied().enumerate().map(|(i, v)| (i + 1, v)).collect(),
            None,
        )
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    /// Number of observations `M`.
    pub fn m(&self) -> usize {
        self.observations.len()
    }

    /// `(index, value)` pairs with strictly increasing 1-based indices.
    pub fn observations(&self) -> &[(usize, Complex64)] {
        &self.observations
    }

    /// Standard deviation of the complex noise added per observation, when
    /// noise was requested at sampling time.
    pub fn noise_sigma(&self) -> Option<f64> {
        self.noise_sigma
    }
}

/// Evaluates `x_n = sum_k a_k * exp(-j*omega_k*(n-1))` for `n = 1..=n_total`.
pub fn synthesize_signal(model: &SpectralModel, n_total: usize) -> Vec<Complex64> {
    synthesize_components(model.components(), n_total)
}

/// Synthesis over raw `(omega, amplitude)` pairs, without the distinctness
/// requirement. Resynthesis from estimated frequencies may legitimately carry
/// duplicates.
pub(crate) fn synthesize_components(components: &[Sinusoid], n_total: usize) -> Vec<Complex64> {
    let mut x = Vec::with_capacity(n_total);
    for n in 1..=n_total {
        let mut acc = Complex64::ZERO;
        for s in components {
            acc += s.amplitude * Complex64::from_polar(1.0, -s.omega * (n - 1) as f64);
        }
        x.push(acc);
    }
    x
}

/// Picks `m_count` sample indices uniformly without replacement and returns
/// them in increasing order. With `snr_db` present, adds i.i.d. circular
/// complex Gaussian noise with variance
/// `sigma^2 = (mean per-sample power of the full signal) * 10^(-snr_db/10)`
/// to each observation and records `sigma`.
///
/// Deterministic per seed: identical inputs give a bit-identical `SampleSet`.
pub fn sample_observations(
    signal: &[Complex64],
    m_count: usize,
    snr_db: Option<f64>,
    rng_seed: u64,
) -> Result<SampleSet> {
    let n = signal.len();
    if m_count == 0 {
        return Err(Error::InvalidArgument("m_count must be >= 1".to_string()));
    }
    if m_count > n {
        return Err(Error::InvalidArgument(format!(
            "m_count {m_count} exceeds signal length {n}"
        )));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, m_count).into_vec();
    picked.sort_unstable();

    let noise_sigma = snr_db.map(|snr| {
        let mean_power = signal.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        (mean_power * 10.0.powf(-snr / 10.0)).sqrt()
    });

    // Noise is drawn in index order after selection, so the draw sequence is
    // a pure function of the seed.
    let per_part = noise_sigma.unwrap_or(0.0) / 2.0.sqrt();
    let observations = picked
        .into_iter()
        .map(|i0| {
            let mut v = signal[i0];
            if noise_sigma.is_some() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                v += Complex64::new(per_part * re, per_part * im);
            }
            (i0 + 1, v)
        })
        .collect();

    SampleSet::new(n, observations, noise_sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn tone(omega: f64, amplitude: Complex64) -> Sinusoid {
        Sinusoid { omega, amplitude }
    }

    #[test]
    fn constant_tone() {
        let model =
            SpectralModel::new(vec![tone(0.0, Complex64::ONE)]).unwrap();
        let x = synthesize_signal(&model, 4);
        for v in x {
            assert!((v - Complex64::ONE).norm() < 1e-15);
        }
    }

    #[test]
    fn alternating_tone() {
        let model = SpectralModel::new(vec![tone(core::f64::consts::PI, Complex64::ONE)]).unwrap();
        let x = synthesize_signal(&model, 4);
        let want = [1.0, -1.0, 1.0, -1.0];
        for (v, w) in x.iter().zip(want) {
            assert!((v - Complex64::new(w, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn matches_triple_loop_oracle() {
        use rand::SeedableRng;
        let mut rng = rand::rngs::SmallRng::seed_from_u64(42);
        let model = SpectralModel::random(3, &mut rng);
        let n = 16;
        let x = synthesize_signal(&model, n);
        // Independent evaluation: accumulate per component via explicit
        // cos/sin rather than from_polar.
        let mut norm_x = 0.0f64;
        let mut norm_err = 0.0f64;
        for (i, &xi) in x.iter().enumerate() {
            let mut acc = Complex64::ZERO;
            for s in model.components() {
                let phase = -s.omega * i as f64;
                acc += s.amplitude * Complex64::new(phase.cos(), phase.sin());
            }
            norm_x += xi.norm_sqr();
            norm_err += (acc - xi).norm_sqr();
        }
        assert!(norm_err.sqrt() < 1e-12 * norm_x.sqrt());
    }

    #[test]
    fn rejects_duplicate_frequency() {
        let err = SpectralModel::new(vec![
            tone(1.0, Complex64::ONE),
            tone(1.0, Complex64::new(0.0, 2.0)),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::InvalidModel(_)));
    }

    #[test]
    fn rejects_out_of_range_frequency() {
        assert!(SpectralModel::new(vec![tone(TAU, Complex64::ONE)]).is_err());
        assert!(SpectralModel::new(vec![tone(-0.1, Complex64::ONE)]).is_err());
    }

    #[test]
    fn full_observation_keeps_every_sample() {
        let signal: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let set = sample_observations(&signal, 8, None, 123).unwrap();
        assert_eq!(set.m(), 8);
        assert_eq!(set.noise_sigma(), None);
        for (k, &(idx, v)) in set.observations().iter().enumerate() {
            assert_eq!(idx, k + 1);
            assert_eq!(v, signal[k]);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let signal: Vec<Complex64> = (0..32).map(|i| Complex64::new(i as f64, 0.5)).collect();
        let a = sample_observations(&signal, 3, Some(20.0), 7).unwrap();
        let b = sample_observations(&signal, 3, Some(20.0), 7).unwrap();
        assert_eq!(a, b);
        let c = sample_observations(&signal, 3, Some(20.0), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_oversized_request() {
        let signal = vec![Complex64::ONE; 4];
        assert!(matches!(
            sample_observations(&signal, 5, None, 0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn noise_variance_calibrated_at_40db() {
        // Unit-power signal; snr_db = 40 means noise variance 1e-4. Averaging
        // |noise|^2 over 1e5 draws has ~0.3% relative std, well under the 5%
        // budget.
        let n = 100;
        let signal = vec![Complex64::ONE; n];
        let mut sum = 0.0f64;
        let mut count = 0usize;
        for seed in 0..1000u64 {
            let set = sample_observations(&signal, n, Some(40.0), seed).unwrap();
            assert!((set.noise_sigma().unwrap() - 1e-2).abs() < 1e-12);
            for &(idx, v) in set.observations() {
                sum += (v - signal[idx - 1]).norm_sqr();
                count += 1;
            }
        }
        let empirical = sum / count as f64;
        assert_eq!(count, 100_000);
        assert!(
            (empirical - 1e-4).abs() < 0.05 * 1e-4,
            "empirical noise variance {empirical}"
        );
    }

    #[test]
    fn linearity_of_synthesis() {
        use rand::SeedableRng;
        let mut rng = rand::rngs::SmallRng::seed_from_u64(5);
        for _ in 0..16 {
            let m1 = SpectralModel::random(2, &mut rng);
            let m2 = SpectralModel::random(3, &mut rng);
            let mut both = m1.components().to_vec();
            both.extend_from_slice(m2.components());
            // Re-draw on the measure-zero duplicate collision.
            let Ok(combined) = SpectralModel::new(both) else {
                continue;
            };
            let n = 24;
            let x1 = synthesize_signal(&m1, n);
            let x2 = synthesize_signal(&m2, n);
            let xc = synthesize_signal(&combined, n);
            let scale: f64 = xc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let err: f64 = xc
                .iter()
                .zip(x1.iter().zip(&x2))
                .map(|(c, (a, b))| (c - (a + b)).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn conjugate_symmetry() {
        use rand::SeedableRng;
        let mut rng = rand::rngs::SmallRng::seed_from_u64(9);
        for _ in 0..16 {
            let model = SpectralModel::random(3, &mut rng);
            let mirrored: Vec<Sinusoid> = model
                .components()
                .iter()
                .map(|s| Sinusoid {
                    omega: if s.omega == 0.0 { 0.0 } else { TAU - s.omega },
                    amplitude: s.amplitude.conj(),
                })
                .collect();
            let Ok(mirror_model) = SpectralModel::new(mirrored) else {
                continue;
            };
            let n = 24;
            let x = synthesize_signal(&model, n);
            let y = synthesize_signal(&mirror_model, n);
            let scale: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let err: f64 = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a.conj() - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-12 * scale.max(1.0));
        }
    }
}
