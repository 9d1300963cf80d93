//! CP (CANDECOMP/PARAFAC) factor algebra.
//!
//! A rank-`K` CP model of a third-order tensor is three factor matrices
//! `A (I1 x K)`, `B (I2 x K)`, `C (I3 x K)` with
//! `T[m,j,i] = sum_k A[m,k] * B[j,k] * C[i,k]`; component weights are
//! absorbed into the columns rather than kept as a separate vector.
//!
//! Unfoldings use the lower-mode-fastest fiber order, fixed as part of the
//! public contract: in `mode_n_unfold(T, n)` the columns are mode-`n` fibers
//! and the column index runs over the remaining modes with the
//! lower-numbered one varying fastest. Under that convention
//! `T_(1) = A * khatri_rao(C, B)^T`, `T_(2) = B * khatri_rao(C, A)^T`, and
//! `T_(3) = C * khatri_rao(B, A)^T`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
// Float supplies f64 math in the pure no_std build; whenever libstd enters
// the crate graph (tests, std-enabled dependents) the inherent methods
// shadow it and the import sits idle.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{dot_conj, norm2, singular_values, CMatrix};
use crate::tensor::Tensor3;

/// Default relative singular-value threshold for k-rank independence tests.
pub const KRANK_DEFAULT_TOL: f64 = 1e-8;

/// Default guard on k-rank column counts; the subset enumeration is
/// exponential in the column count.
pub const KRANK_COLUMN_CAP: usize = 20;

/// The three tensor modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    /// 0-based axis index.
    pub fn axis(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }
}

/// CP factors with a shared column count `K` and finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CpFactors {
    a: CMatrix,
    b: CMatrix,
    c: CMatrix,
}

impl CpFactors {
    pub fn new(a: CMatrix, b: CMatrix, c: CMatrix) -> Result<Self> {
        if a.cols() != b.cols() || a.cols() != c.cols() {
            return Err(Error::ShapeMismatch(format!(
                "factor column counts differ: {} / {} / {}",
                a.cols(),
                b.cols(),
                c.cols()
            )));
        }
        if !(a.all_finite() && b.all_finite() && c.all_finite()) {
            return Err(Error::NonFinite("CP factors"));
        }
        Ok(CpFactors { a, b, c })
    }

    pub fn factor(&self, mode: Mode) -> &CMatrix {
        match mode {
            Mode::One => &self.a,
            Mode::Two => &self.b,
            Mode::Three => &self.c,
        }
    }

    pub(crate) fn factor_mut(&mut self, mode: Mode) -> &mut CMatrix {
        match mode {
            Mode::One => &mut self.a,
            Mode::Two => &mut self.b,
            Mode::Three => &mut self.c,
        }
    }

    pub fn factor_a(&self) -> &CMatrix {
        &self.a
    }

    pub fn factor_b(&self) -> &CMatrix {
        &self.b
    }

    pub fn factor_c(&self) -> &CMatrix {
        &self.c
    }

    /// Shared column count.
    pub fn k(&self) -> usize {
        self.a.cols()
    }

    /// Tensor dimensions `[I1, I2, I3]` implied by the factor row counts.
    pub fn dims(&self) -> [usize; 3] {
        [self.a.rows(), self.b.rows(), self.c.rows()]
    }

    /// Keeps only the listed components, in the listed order.
    pub fn select_components(&self, keep: &[usize]) -> CpFactors {
        CpFactors {
            a: self.a.select_columns(keep),
            b: self.b.select_columns(keep),
            c: self.c.select_columns(keep),
        }
    }
}

/// Dense tensor `T[m,j,i] = sum_k A[m,k] * B[j,k] * C[i,k]`.
pub fn reconstruct(factors: &CpFactors) -> Tensor3 {
    let [i1, i2, i3] = factors.dims();
    let mut t = Tensor3::zeros([i1, i2, i3]);
    for k in 0..factors.k() {
        let ak = factors.a.col(k);
        let bk = factors.b.col(k);
        let ck = factors.c.col(k);
        for (i, &ci) in ck.iter().enumerate() {
            for (j, &bj) in bk.iter().enumerate() {
                let w = bj * ci;
                let base = t.offset(0, j, i);
                let row = &mut t.data_mut()[base..base + i1];
                for (cell, &am) in row.iter_mut().zip(ak) {
                    *cell += am * w;
                }
            }
        }
    }
    t
}

/// Mode-`n` unfolding: columns are mode-`n` fibers, ordered with the
/// lower-numbered remaining mode varying fastest.
pub fn mode_n_unfold(tensor: &Tensor3, mode: Mode) -> CMatrix {
    let [i1, i2, i3] = tensor.dims();
    match mode {
        Mode::One => CMatrix::from_fn(i1, i2 * i3, |m, col| tensor[(m, col % i2, col / i2)]),
        Mode::Two => CMatrix::from_fn(i2, i1 * i3, |j, col| tensor[(col % i1, j, col / i1)]),
        Mode::Three => CMatrix::from_fn(i3, i1 * i2, |i, col| tensor[(col % i1, col / i1, i)]),
    }
}

/// Inverse of [`mode_n_unfold`] for the given target dimensions.
pub fn mode_n_refold(matrix: &CMatrix, mode: Mode, dims: [usize; 3]) -> Result<Tensor3> {
    let [i1, i2, i3] = dims;
    let expect = match mode {
        Mode::One => (i1, i2 * i3),
        Mode::Two => (i2, i1 * i3),
        Mode::Three => (i3, i1 * i2),
    };
    if (matrix.rows(), matrix.cols()) != expect {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} unfolding cannot refold into {:?}",
            matrix.rows(),
            matrix.cols(),
            dims
        )));
    }
    Ok(match mode {
        Mode::One => Tensor3::from_fn(dims, |m, j, i| matrix[(m, j + i * i2)]),
        Mode::Two => Tensor3::from_fn(dims, |m, j, i| matrix[(j, m + i * i1)]),
        Mode::Three => Tensor3::from_fn(dims, |m, j, i| matrix[(i, m + j * i1)]),
    })
}

/// Columnwise Kronecker product: column `k` of the result is
/// `x_k (x) y_k`, with the `x` index varying slowest:
/// entry `(r_x * J + r_y, k) = x[r_x, k] * y[r_y, k]`.
pub fn khatri_rao(x: &CMatrix, y: &CMatrix) -> Result<CMatrix> {
    if x.cols() != y.cols() {
        return Err(Error::ShapeMismatch(format!(
            "khatri_rao column counts differ: {} vs {}",
            x.cols(),
            y.cols()
        )));
    }
    let (i, j) = (x.rows(), y.rows());
    Ok(CMatrix::from_fn(i * j, x.cols(), |r, k| {
        x[(r / j, k)] * y[(r % j, k)]
    }))
}

/// Component energies `z_k = |a_k| * |b_k| * |c_k|`, the Frobenius norm of
/// each rank-one term.
pub fn component_energies(factors: &CpFactors) -> Vec<f64> {
    (0..factors.k())
        .map(|k| factors.a.col_norm(k) * factors.b.col_norm(k) * factors.c.col_norm(k))
        .collect()
}

/// Kruskal rank with the default column cap of [`KRANK_COLUMN_CAP`].
pub fn krank(matrix: &CMatrix, tol: f64) -> Result<usize> {
    krank_with_cap(matrix, tol, KRANK_COLUMN_CAP)
}

/// Largest `s` such that every subset of `s` columns is linearly
/// independent, where a subset counts as independent when the smallest
/// singular value of the submatrix exceeds `tol` times its largest.
///
/// Enumeration over subsets is exponential, so matrices wider than `cap`
/// columns are refused.
pub fn krank_with_cap(matrix: &CMatrix, tol: f64, cap: usize) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(
            alloc::string::String::from("krank tolerance must be positive"),
        ));
    }
    if matrix.cols() > cap {
        return Err(Error::ColumnCapExceeded {
            cols: matrix.cols(),
            cap,
        });
    }
    let max_s = matrix.rows().min(matrix.cols());
    for s in 1..=max_s {
        let mut all_independent = true;
        for_each_subset(matrix.cols(), s, |subset| {
            if !all_independent {
                return;
            }
            let sigma = singular_values(&matrix.select_columns(subset));
            let hi = sigma[0];
            let lo = sigma[s - 1];
            if !(lo > tol * hi) {
                all_independent = false;
            }
        });
        if !all_independent {
            return Ok(s - 1);
        }
    }
    Ok(max_s)
}

/// Calls `f` on every size-`s` subset of `0..n` in lexicographic order.
fn for_each_subset<F: FnMut(&[usize])>(n: usize, s: usize, mut f: F) {
    if s > n {
        return;
    }
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        f(&idx);
        // Advance the rightmost index that can still move.
        let mut pos = s;
        while pos > 0 {
            pos -= 1;
            if idx[pos] < n - (s - pos) {
                idx[pos] += 1;
                for q in (pos + 1)..s {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return;
            }
        }
        if s == 0 {
            return;
        }
    }
}

/// Kruskal's sufficient condition for essential uniqueness of a rank-`R`
/// three-way CP decomposition: `k_a + k_b + k_c >= 2R + 2`.
pub fn kruskal_check(k_a: usize, k_b: usize, k_c: usize, rank_r: usize) -> bool {
    k_a + k_b + k_c >= 2 * rank_r + 2
}

/// Result of matching two CP solutions up to permutation and per-mode
/// column scalings.
#[derive(Debug, Clone)]
pub struct Alignment {
    /// `permutation[p] = q`: column `q` of the second solution is matched to
    /// column `p` of the first.
    pub permutation: Vec<usize>,
    /// Per-component scalings applied to the second solution's columns to
    /// reach the first's, one vector per mode.
    pub scale_a: Vec<Complex64>,
    pub scale_b: Vec<Complex64>,
    pub scale_c: Vec<Complex64>,
    /// Largest relative column discrepancy after scaling, over all modes and
    /// components.
    pub residual: f64,
    /// `max_k |scale_a[k] * scale_b[k] * scale_c[k] - 1|`: deviation of the
    /// recovered gauge from the identity.
    pub gauge_error: f64,
    /// Both `residual` and `gauge_error` are below the requested tolerance.
    pub success: bool,
}

/// Matches the components of `f2` to those of `f1` (greedy, by cosine
/// similarity of normalized mode-1 columns, ties broken by mode-2), then
/// fits one complex scaling per mode and component by least squares.
///
/// Essential uniqueness predicts `residual ~ 0` and the product of the three
/// scalings equal to 1 for every component.
pub fn align_solutions(f1: &CpFactors, f2: &CpFactors, tol: f64) -> Result<Alignment> {
    if f1.dims() != f2.dims() || f1.k() != f2.k() {
        return Err(Error::ShapeMismatch(format!(
            "cannot align factors with dims {:?} rank {} against dims {:?} rank {}",
            f1.dims(),
            f1.k(),
            f2.dims(),
            f2.k()
        )));
    }
    let k = f1.k();
    let similarity = |m1: &CMatrix, m2: &CMatrix, p: usize, q: usize| -> f64 {
        let np = m1.col_norm(p);
        let nq = m2.col_norm(q);
        if np == 0.0 || nq == 0.0 {
            return 0.0;
        }
        dot_conj(m1.col(p), m2.col(q)).norm() / (np * nq)
    };

    let mut permutation = vec![usize::MAX; k];
    let mut used = vec![false; k];
    for _ in 0..k {
        let mut best: Option<(usize, usize, f64, f64)> = None;
        for p in 0..k {
            if permutation[p] != usize::MAX {
                continue;
            }
            for q in 0..k {
                if used[q] {
                    continue;
                }
                let s1 = similarity(f1.factor_a(), f2.factor_a(), p, q);
                let s2 = similarity(f1.factor_b(), f2.factor_b(), p, q);
                let better = match best {
                    None => true,
                    Some((_, _, b1, b2)) => s1 > b1 || (s1 == b1 && s2 > b2),
                };
                if better {
                    best = Some((p, q, s1, s2));
                }
            }
        }
        let (p, q, _, _) = best.expect("unmatched pair exists");
        permutation[p] = q;
        used[q] = true;
    }

    // Least-squares scaling per matched pair and mode: minimize
    // |alpha * col2 - col1| => alpha = <col2, col1> / |col2|^2.
    let mut scales = [Vec::with_capacity(k), Vec::with_capacity(k), Vec::with_capacity(k)];
    let mut residual = 0.0f64;
    for (axis, mode) in Mode::ALL.iter().enumerate() {
        let m1 = f1.factor(*mode);
        let m2 = f2.factor(*mode);
        for p in 0..k {
            let q = permutation[p];
            let denom = m2.col_norm(q).powi(2);
            let alpha = if denom > 0.0 {
                dot_conj(m2.col(q), m1.col(p)) / denom
            } else {
                Complex64::ZERO
            };
            let diff: f64 = m1
                .col(p)
                .iter()
                .zip(m2.col(q))
                .map(|(x1, x2)| (alpha * x2 - x1).norm_sqr())
                .sum::<f64>()
                .sqrt();
            let rel = diff / norm2(m1.col(p)).max(f64::MIN_POSITIVE);
            residual = residual.max(rel);
            scales[axis].push(alpha);
        }
    }
    let gauge_error = (0..k)
        .map(|p| (scales[0][p] * scales[1][p] * scales[2][p] - Complex64::ONE).norm())
        .fold(0.0f64, f64::max);

    let [scale_a, scale_b, scale_c] = scales;
    Ok(Alignment {
        permutation,
        scale_a,
        scale_b,
        scale_c,
        residual,
        gauge_error,
        success: residual < tol && gauge_error < tol,
    })
}
