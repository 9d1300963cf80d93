//! Folding a length-`N` sample sequence into the structured
//! `(N-L-P+2) x L x P` third-order tensor and back.
//!
//! Cell `(m, j, i)` of the tensor (all indices 1-based in the public
//! contracts) holds sample `n = m + L + i - j - 1`. Every sample therefore
//! occupies a whole anti-diagonal surface `{(m, j, i) : m - j + i = n - L + 1}`,
//! a Hankel-like redundancy that turns each pure sinusoid into a rank-one
//! tensor with Vandermonde factors in all three modes.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
// Float supplies f64 math in the pure no_std build; whenever libstd enters
// the crate graph (tests, std-enabled dependents) the inherent methods
// shadow it and the import sits idle.
#[allow(unused_imports)]
use num_traits::Float;

use crate::cp::CpFactors;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::signal::{SampleSet, SpectralModel};

/// Dense complex third-order tensor. Storage is a flat vector with the first
/// mode fastest: entry `(m, j, i)` (0-based here) lives at
/// `m + j*I1 + i*I1*I2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<Complex64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Tensor3 {
            dims,
            data: vec![Complex64::ZERO; dims[0] * dims[1] * dims[2]],
        }
    }

    /// Builds a tensor entrywise from `f(m, j, i)` with 0-based indices.
    pub fn from_fn<F: FnMut(usize, usize, usize) -> Complex64>(dims: [usize; 3], mut f: F) -> Self {
        let mut data = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for i in 0..dims[2] {
            for j in 0..dims[1] {
                for m in 0..dims[0] {
                    data.push(f(m, j, i));
                }
            }
        }
        Tensor3 { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// Flat offset of 0-based `(m, j, i)`.
    #[inline]
    pub fn offset(&self, m: usize, j: usize, i: usize) -> usize {
        debug_assert!(m < self.dims[0] && j < self.dims[1] && i < self.dims[2]);
        m + j * self.dims[0] + i * self.dims[0] * self.dims[1]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frontal slice at 0-based third index `i`, as an `I1 x I2` matrix.
    pub fn slice(&self, i: usize) -> CMatrix {
        CMatrix::from_fn(self.dims[0], self.dims[1], |m, j| self[(m, j, i)])
    }
}

impl core::ops::Index<(usize, usize, usize)> for Tensor3 {
    type Output = Complex64;

    fn index(&self, (m, j, i): (usize, usize, usize)) -> &Complex64 {
        &self.data[self.offset(m, j, i)]
    }
}

impl core::ops::IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (m, j, i): (usize, usize, usize)) -> &mut Complex64 {
        let o = self.offset(m, j, i);
        &mut self.data[o]
    }
}

/// A tensor with a congruent binary observation mask. Unobserved cells hold
/// zero. Tensors built by [`fold`] are structurally consistent: observed
/// cells sharing a sample index hold identical values.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedTensor {
    values: Tensor3,
    mask: Vec<bool>,
}

impl MaskedTensor {
    /// Checks shape congruence and that unobserved cells are zero.
    pub fn new(values: Tensor3, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "mask has {} cells, tensor has {}",
                mask.len(),
                values.len()
            )));
        }
        if values
            .data()
            .iter()
            .zip(&mask)
            .any(|(v, &obs)| !obs && *v != Complex64::ZERO)
        {
            return Err(Error::InvalidArgument(
                "unobserved cells must hold zero".to_string(),
            ));
        }
        Ok(MaskedTensor { values, mask })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.values.dims()
    }

    pub fn values(&self) -> &Tensor3 {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn is_observed(&self, m: usize, j: usize, i: usize) -> bool {
        self.mask[self.values.offset(m, j, i)]
    }

    pub fn observed_count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    /// `|O * Y|_F`: Frobenius norm over observed cells.
    pub fn observed_norm(&self) -> f64 {
        self.values
            .data()
            .iter()
            .zip(&self.mask)
            .filter(|(_, &obs)| obs)
            .map(|(v, _)| v.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Folding geometry: full signal length `N` and the two free tensor
/// dimensions `L` and `P` (the first dimension is `N - L - P + 2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldParams {
    n_total: usize,
    l_dim: usize,
    p_dim: usize,
}

impl FoldParams {
    pub fn new(n_total: usize, l_dim: usize, p_dim: usize) -> Result<Self> {
        if l_dim == 0 || p_dim == 0 {
            return Err(Error::InvalidArgument(
                "fold dimensions must be >= 1".to_string(),
            ));
        }
        if n_total + 2 < l_dim + p_dim + 1 {
            return Err(Error::InvalidArgument(format!(
                "N={n_total} too small for L={l_dim}, P={p_dim} (needs N-L-P+2 >= 1)"
            )));
        }
        Ok(FoldParams {
            n_total,
            l_dim,
            p_dim,
        })
    }

    /// Balanced default: `L = floor((N - P + 2) / 2)`, which makes the first
    /// two dimensions as close to equal as possible (64 x 63 x 2 at N=127,
    /// P=2).
    pub fn balanced(n_total: usize, p_dim: usize) -> Result<Self> {
        if n_total + 2 < p_dim + 2 {
            return Err(Error::InvalidArgument(format!(
                "N={n_total} too small for P={p_dim}"
            )));
        }
        FoldParams::new(n_total, (n_total - p_dim + 2) / 2, p_dim)
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn l_dim(&self) -> usize {
        self.l_dim
    }

    pub fn p_dim(&self) -> usize {
        self.p_dim
    }

    /// Tensor dimensions `[N-L-P+2, L, P]`.
    pub fn dims(&self) -> [usize; 3] {
        [
            self.n_total + 2 - self.l_dim - self.p_dim,
            self.l_dim,
            self.p_dim,
        ]
    }
}

/// The sample index occupying cell `(m, j, i)`, all 1-based:
/// `n = m + L + i - j - 1`.
pub fn cell_to_sample_index(m: usize, j: usize, i: usize, params: &FoldParams) -> Result<usize> {
    let [i1, i2, i3] = params.dims();
    if m == 0 || m > i1 || j == 0 || j > i2 || i == 0 || i > i3 {
        return Err(Error::InvalidArgument(format!(
            "cell ({m}, {j}, {i}) outside {i1} x {i2} x {i3}"
        )));
    }
    Ok(m + params.l_dim + i - j - 1)
}

/// Places every observed sample on its constant-index surface; unobserved
/// cells are zero with mask off.
pub fn fold(samples: &SampleSet, params: &FoldParams) -> Result<MaskedTensor> {
    if samples.n_total() != params.n_total() {
        return Err(Error::InvalidArgument(format!(
            "sample set has N={}, fold params expect N={}",
            samples.n_total(),
            params.n_total()
        )));
    }
    let mut by_index: Vec<Option<Complex64>> = vec![None; params.n_total()];
    for &(idx, v) in samples.observations() {
        by_index[idx - 1] = Some(v);
    }

    let dims = params.dims();
    let mut values = Tensor3::zeros(dims);
    let mut mask = vec![false; values.len()];
    for i in 0..dims[2] {
        for j in 0..dims[1] {
            for m in 0..dims[0] {
                // 1-based map inlined for 0-based loop indices.
                let n = m + params.l_dim + i + 1 - j - 1;
                if let Some(v) = by_index[n - 1] {
                    let o = values.offset(m, j, i);
                    values.data_mut()[o] = v;
                    mask[o] = true;
                }
            }
        }
    }
    MaskedTensor::new(values, mask)
}

/// Averages the cells on each sample's surface back into a length-`N`
/// signal. The mean is computed relative to the first cell on the surface,
/// so a structurally consistent tensor (all cells equal) reproduces its
/// values exactly.
pub fn unfold_to_signal(tensor: &Tensor3, params: &FoldParams) -> Result<Vec<Complex64>> {
    if tensor.dims() != params.dims() {
        return Err(Error::ShapeMismatch(format!(
            "tensor dims {:?} do not match fold params dims {:?}",
            tensor.dims(),
            params.dims()
        )));
    }
    let n_total = params.n_total();
    let mut anchor: Vec<Option<Complex64>> = vec![None; n_total];
    let mut deviation = vec![Complex64::ZERO; n_total];
    let mut count = vec![0usize; n_total];
    let dims = tensor.dims();
    for i in 0..dims[2] {
        for j in 0..dims[1] {
            for m in 0..dims[0] {
                let n = m + params.l_dim + i + 1 - j - 1;
                let v = tensor[(m, j, i)];
                match anchor[n - 1] {
                    None => anchor[n - 1] = Some(v),
                    Some(a) => deviation[n - 1] += v - a,
                }
                count[n - 1] += 1;
            }
        }
    }
    Ok((0..n_total)
        .map(|n0| {
            let a = anchor[n0].expect("every sample index is covered by some cell");
            a + deviation[n0] / count[n0] as f64
        })
        .collect())
}

/// Exact CP factors of the noiseless fold of `model`: mode-1 and mode-2
/// columns are unit-amplitude geometric progressions in `omega_k` (the
/// mode-2 exponent descends from `L-1` to `0`), and the mode-3 column
/// carries the amplitude: `C[i,k] = a_k * exp(-j*omega_k*(i-1))`.
pub fn analytic_factors(model: &SpectralModel, params: &FoldParams) -> CpFactors {
    let [i1, i2, i3] = params.dims();
    let k = model.k();
    let comps = model.components();
    let a = CMatrix::from_fn(i1, k, |m, c| {
        Complex64::from_polar(1.0, -comps[c].omega * m as f64)
    });
    let b = CMatrix::from_fn(i2, k, |j, c| {
        Complex64::from_polar(1.0, -comps[c].omega * (i2 - 1 - j) as f64)
    });
    let cm = CMatrix::from_fn(i3, k, |i, c| {
        comps[c].amplitude * Complex64::from_polar(1.0, -comps[c].omega * i as f64)
    });
    CpFactors::new(a, b, cm).expect("analytic factors are finite with equal column counts")
}

/// Kruskal feasibility report for a planned fold, using the theoretical
/// k-ranks of Vandermonde factors with `K` distinct frequencies:
/// `k_A = min(I1, K)`, `k_B = min(L, K)`, `k_C = min(P, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Tensor dimensions implied by the params.
    pub dims: [usize; 3],
    /// Whether the caller's `n_total` agrees with the params.
    pub n_consistent: bool,
    /// `(k_a + k_b + k_c, 2K + 2)` when `k_expected` was given.
    pub kruskal_sides: Option<(usize, usize)>,
    /// Kruskal's condition `k_a + k_b + k_c >= 2K + 2` holds.
    pub kruskal_holds: bool,
    /// `K = 1`: Kruskal's bound is unreachable but uniqueness still holds
    /// when no slice is identically zero, which is automatic for a nonzero
    /// single sinusoid.
    pub rank_one_exception: bool,
    /// Overall verdict: consistent and (Kruskal holds, the rank-one
    /// exception applies, or no `K` was supplied).
    pub acceptable: bool,
}

impl core::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "dims {}x{}x{}",
            self.dims[0], self.dims[1], self.dims[2]
        )?;
        if !self.n_consistent {
            write!(f, ", INCONSISTENT n_total")?;
        }
        if let Some((lhs, rhs)) = self.kruskal_sides {
            write!(f, ", kruskal {}>={} {}", lhs, rhs, if self.kruskal_holds { "holds" } else { "fails" })?;
            if self.rank_one_exception {
                write!(f, " (rank-1 exception applies)")?;
            }
        }
        write!(f, ", {}", if self.acceptable { "acceptable" } else { "not acceptable" })
    }
}

/// Checks whether a fold with these params supports essentially unique
/// rank-`K` recovery (report, never an error).
pub fn validate_params(
    n_total: usize,
    k_expected: Option<usize>,
    params: &FoldParams,
) -> ValidationReport {
    let dims = params.dims();
    let n_consistent = n_total == params.n_total();
    let (kruskal_sides, kruskal_holds, rank_one_exception) = match k_expected {
        None => (None, false, false),
        Some(k) => {
            let lhs = dims[0].min(k) + dims[1].min(k) + dims[2].min(k);
            let rhs = 2 * k + 2;
            (Some((lhs, rhs)), lhs >= rhs, k == 1)
        }
    };
    let acceptable =
        n_consistent && (k_expected.is_none() || kruskal_holds || rank_one_exception);
    ValidationReport {
        dims,
        n_consistent,
        kruskal_sides,
        kruskal_holds,
        rank_one_exception,
        acceptable,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp::reconstruct;
    use crate::signal::{sample_observations, synthesize_signal, Sinusoid};
    use alloc::collections::BTreeSet;
    use rand::SeedableRng;

    fn standard_params() -> FoldParams {
        FoldParams::new(127, 63, 2).unwrap()
    }

    #[test]
    fn cell_index_examples() {
        let p = standard_params();
        assert_eq!(cell_to_sample_index(1, 63, 1, &p).unwrap(), 1);
        assert_eq!(cell_to_sample_index(1, 1, 1, &p).unwrap(), 63);
        assert_eq!(cell_to_sample_index(64, 1, 2, &p).unwrap(), 127);
        assert!(cell_to_sample_index(0, 1, 1, &p).is_err());
        assert!(cell_to_sample_index(65, 1, 1, &p).is_err());
        assert!(cell_to_sample_index(64, 64, 1, &p).is_err());
        assert!(cell_to_sample_index(64, 1, 3, &p).is_err());
    }

    /// Oracle: build the tensor from the slice layout definition instead of
    /// the closed-form index map. Slice i (1-based) is the I1 x L matrix
    /// whose columns, left to right, are the windows starting at samples
    /// L+i-1 down to i; each window advances one sample per row. Folding a
    /// signal with pairwise distinct values must agree cell for cell.
    #[test]
    fn fold_matches_slice_layout_oracle() {
        for (n, l, p) in [(127usize, 63usize, 2usize), (16, 5, 3), (9, 4, 2), (4, 2, 2)] {
            let params = FoldParams::new(n, l, p).unwrap();
            let [i1, i2, i3] = params.dims();
            let x: Vec<Complex64> = (1..=n)
                .map(|t| Complex64::new(t as f64, (t * t) as f64))
                .collect();
            let folded = fold(&SampleSet::full(&x).unwrap(), &params).unwrap();
            let mut attained = BTreeSet::new();
            for i in 1..=i3 {
                for (col, start) in (i..=l + i - 1).rev().enumerate() {
                    for row in 0..i1 {
                        let sample = start + row;
                        assert_eq!(folded.values()[(row, col, i - 1)], x[sample - 1]);
                        assert_eq!(
                            cell_to_sample_index(row + 1, col + 1, i, &params).unwrap(),
                            sample
                        );
                        attained.insert(sample);
                    }
                }
            }
            // Every sample index is reached by at least one cell.
            assert_eq!(attained.len(), n);
            assert_eq!(i2, l);
        }
    }

    #[test]
    fn surface_constancy() {
        let params = FoldParams::new(16, 5, 3).unwrap();
        let [i1, i2, i3] = params.dims();
        for m in 1..=i1 {
            for j in 1..=i2 {
                for i in 1..=i3 {
                    let n = cell_to_sample_index(m, j, i, &params).unwrap();
                    // The map must be constant on m - j + i = n - L + 1.
                    assert_eq!(
                        m as isize - j as isize + i as isize,
                        n as isize - params.l_dim() as isize + 1
                    );
                }
            }
        }
    }

    #[test]
    fn fold_full_observation_has_expected_dims() {
        let model = SpectralModel::new(alloc::vec![
            Sinusoid { omega: 0.7, amplitude: Complex64::new(1.0, 0.5) },
            Sinusoid { omega: 2.1, amplitude: Complex64::new(-0.3, 1.1) },
            Sinusoid { omega: 4.0, amplitude: Complex64::new(0.2, -0.8) },
        ])
        .unwrap();
        let x = synthesize_signal(&model, 127);
        let t = fold(&SampleSet::full(&x).unwrap(), &standard_params()).unwrap();
        assert_eq!(t.dims(), [64, 63, 2]);
        assert_eq!(t.observed_count(), 64 * 63 * 2);
    }

    #[test]
    fn fold_empty_observations() {
        let empty = SampleSet::new(127, alloc::vec![], None).unwrap();
        let t = fold(&empty, &standard_params()).unwrap();
        assert_eq!(t.observed_count(), 0);
        assert_eq!(t.values().frobenius_norm(), 0.0);
    }

    #[test]
    fn fold_single_sample_populates_surface() {
        let params = standard_params();
        let v = Complex64::new(2.5, -1.5);
        let set = SampleSet::new(127, alloc::vec![(63, v)], None).unwrap();
        let t = fold(&set, &params).unwrap();
        // Count the surface by enumeration.
        let [i1, i2, i3] = params.dims();
        let mut expected = 0usize;
        for m in 1..=i1 {
            for j in 1..=i2 {
                for i in 1..=i3 {
                    if cell_to_sample_index(m, j, i, &params).unwrap() == 63 {
                        expected += 1;
                        assert_eq!(t.values()[(m - 1, j - 1, i - 1)], v);
                        assert!(t.is_observed(m - 1, j - 1, i - 1));
                    }
                }
            }
        }
        assert_eq!(t.observed_count(), expected);
        assert_eq!(expected, 125);
    }

    #[test]
    fn fold_rejects_inconsistent_n() {
        let set = SampleSet::new(100, alloc::vec![(1, Complex64::ONE)], None).unwrap();
        assert!(fold(&set, &standard_params()).is_err());
    }

    #[test]
    fn unfold_constant_tensor() {
        let params = FoldParams::new(4, 2, 2).unwrap();
        assert_eq!(params.dims(), [2, 2, 2]);
        let t = Tensor3::from_fn([2, 2, 2], |_, _, _| Complex64::ONE);
        let x = unfold_to_signal(&t, &params).unwrap();
        assert_eq!(x, alloc::vec![Complex64::ONE; 4]);
    }

    #[test]
    fn fold_unfold_is_exact_identity() {
        let mut rng = rand::rngs::SmallRng::seed_from_u64(1);
        let model = SpectralModel::random(3, &mut rng);
        let x = synthesize_signal(&model, 127);
        let t = fold(&SampleSet::full(&x).unwrap(), &standard_params()).unwrap();
        let back = unfold_to_signal(t.values(), &standard_params()).unwrap();
        // Bitwise identity: all cells on a surface hold the identical value,
        // and the anchored mean preserves it exactly.
        assert_eq!(back, x);
    }

    #[test]
    fn unfold_of_cp_reconstruction_recovers_signal() {
        let mut rng = rand::rngs::SmallRng::seed_from_u64(2);
        let model = SpectralModel::random(3, &mut rng);
        let params = standard_params();
        let x = synthesize_signal(&model, 127);
        let rec = reconstruct(&analytic_factors(&model, &params));
        let back = unfold_to_signal(&rec, &params).unwrap();
        let scale: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let err: f64 = back
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10 * scale, "relative error {}", err / scale);
    }

    #[test]
    fn mask_count_equals_surface_cardinality_sum() {
        let params = FoldParams::new(16, 5, 3).unwrap();
        let signal: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let set = sample_observations(&signal, 6, None, 99).unwrap();
        let t = fold(&set, &params).unwrap();
        let [i1, i2, i3] = params.dims();
        let mut surface_size = alloc::collections::BTreeMap::new();
        for m in 1..=i1 {
            for j in 1..=i2 {
                for i in 1..=i3 {
                    *surface_size
                        .entry(cell_to_sample_index(m, j, i, &params).unwrap())
                        .or_insert(0usize) += 1;
                }
            }
        }
        let expected: usize = set
            .observations()
            .iter()
            .map(|&(idx, _)| surface_size[&idx])
            .sum();
        assert_eq!(t.observed_count(), expected);
    }

    #[test]
    fn validation_report_examples() {
        let p = standard_params();
        let r3 = validate_params(127, Some(3), &p);
        assert_eq!(r3.kruskal_sides, Some((8, 8)));
        assert!(r3.kruskal_holds && r3.acceptable);

        let r1 = validate_params(127, Some(1), &p);
        assert_eq!(r1.kruskal_sides, Some((3, 4)));
        assert!(!r1.kruskal_holds);
        assert!(r1.rank_one_exception && r1.acceptable);

        let tiny = FoldParams::new(4, 1, 1).unwrap();
        let r2 = validate_params(4, Some(2), &tiny);
        assert!(!r2.kruskal_holds && !r2.acceptable);

        let none = validate_params(127, None, &p);
        assert!(none.acceptable && none.kruskal_sides.is_none());
    }

    #[test]
    fn balanced_params_match_standard_split() {
        let p = FoldParams::balanced(127, 2).unwrap();
        assert_eq!((p.l_dim(), p.p_dim()), (63, 2));
        assert_eq!(p.dims(), [64, 63, 2]);
    }

    #[test]
    fn masked_tensor_rejects_nonzero_unobserved() {
        let t = Tensor3::from_fn([2, 2, 2], |_, _, _| Complex64::ONE);
        let mask = alloc::vec![false; 8];
        assert!(MaskedTensor::new(t, mask).is_err());
    }
}
