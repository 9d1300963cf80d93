//! Small dense complex-matrix kernels.
//!
//! The solver's subproblems are tiny (tens of rows and columns), so the
//! kernels favour robustness over blocking: a Hermitian Cholesky solve for
//! ridge normal equations, and a one-sided Jacobi SVD whose singular values
//! keep full relative accuracy even when the matrix is badly scaled. The
//! Jacobi route works directly on the matrix columns rather than on the Gram
//! matrix, which would square the condition number and halve the usable
//! digits.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
// Float supplies f64 math in the pure no_std build; whenever libstd enters
// the crate graph (tests, std-enabled dependents) the inherent methods
// shadow it and the import sits idle.
#[allow(unused_imports)]
use num_traits::Float;

/// Dense complex matrix in column-major order, so each column is a
/// contiguous slice. All algebra in this crate is column-centric.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = Complex64::ONE;
        }
        m
    }

    /// Builds a matrix entrywise from `f(row, col)`.
    pub fn from_fn<F: FnMut(usize, usize) -> Complex64>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Column `k` as a contiguous slice.
    pub fn col(&self, k: usize) -> &[Complex64] {
        &self.data[k * self.rows..(k + 1) * self.rows]
    }

    pub fn col_mut(&mut self, k: usize) -> &mut [Complex64] {
        &mut self.data[k * self.rows..(k + 1) * self.rows]
    }

    /// Euclidean norm of column `k`.
    pub fn col_norm(&self, k: usize) -> f64 {
        norm2(self.col(k))
    }

    /// Multiplies column `k` by a real scalar.
    pub fn scale_col(&mut self, k: usize, s: f64) {
        for z in self.col_mut(k) {
            *z *= s;
        }
    }

    /// New matrix keeping only the listed columns, in the listed order.
    pub fn select_columns(&self, keep: &[usize]) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows, keep.len());
        for (dst, &src) in keep.iter().enumerate() {
            out.col_mut(dst).copy_from_slice(self.col(src));
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// True when every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
}

impl core::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[c * self.rows + r]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[c * self.rows + r]
    }
}

/// Inner product `sum_i conj(x_i) * y_i`, conjugate-linear in the first
/// argument.
pub fn dot_conj(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = Complex64::ZERO;
    for (a, b) in x.iter().zip(y) {
        acc += a.conj() * b;
    }
    acc
}

/// Euclidean norm of a complex vector.
pub fn norm2(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `G x = b` for Hermitian positive definite `G`, overwriting the
/// lower triangle of `g` with its Cholesky factor and `b` with the solution.
/// Returns `false` (leaving `b` unspecified) when a pivot is not strictly
/// positive, meaning `G` is not numerically positive definite.
pub fn solve_hermitian_in_place(g: &mut CMatrix, b: &mut [Complex64]) -> bool {
    let n = g.rows();
    debug_assert_eq!(g.cols(), n);
    debug_assert_eq!(b.len(), n);

    // Lower Cholesky factor: G = L * L^H.
    for j in 0..n {
        let mut d = g[(j, j)].re;
        for k in 0..j {
            d -= g[(j, k)].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let ljj = d.sqrt();
        g[(j, j)] = Complex64::new(ljj, 0.0);
        for i in (j + 1)..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= g[(i, k)] * g[(j, k)].conj();
            }
            g[(i, j)] = s / ljj;
        }
    }

    // Forward substitution: L y = b.
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= g[(i, k)] * b[k];
        }
        b[i] = s / g[(i, i)].re;
    }

    // Back substitution: L^H x = y.
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= g[(k, i)].conj() * b[k];
        }
        b[i] = s / g[(i, i)].re;
    }
    true
}

/// Thin singular value decomposition `A = U diag(sigma) V^H`.
///
/// `u` has the shape of `A` with orthonormal columns where the matching
/// singular value is nonzero (and zero columns otherwise), `sigma` is sorted
/// descending, and `v` is square unitary.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    /// Ratio of largest to smallest singular value; infinite when the
    /// smallest is zero.
    pub fn condition_number(&self) -> f64 {
        match (self.sigma.first(), self.sigma.last()) {
            (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
            (Some(&hi), _) if hi > 0.0 => f64::INFINITY,
            _ => f64::INFINITY,
        }
    }

    /// Least-squares solve `min_x |A x - y|` via the decomposition.
    ///
    /// With `tikhonov > 0` the inverted spectrum is `sigma / (sigma^2 + t)`;
    /// with `tikhonov == 0` singular values below `max(rows, cols) * eps *
    /// sigma_max` are treated as exactly zero (minimum-norm solution).
    pub fn solve(&self, y: &[Complex64], tikhonov: f64) -> Vec<Complex64> {
        debug_assert_eq!(y.len(), self.u.rows());
        let n = self.v.rows();
        let mut x = vec![Complex64::ZERO; n];
        let sigma_max = self.sigma.first().copied().unwrap_or(0.0);
        let cutoff = sigma_max * f64::EPSILON * self.u.rows().max(n) as f64;
        for (k, &s) in self.sigma.iter().enumerate() {
            let filter = if tikhonov > 0.0 {
                s / (s * s + tikhonov)
            } else if s > cutoff && s > 0.0 {
                1.0 / s
            } else {
                continue;
            };
            let coeff = dot_conj(self.u.col(k), y) * filter;
            for (xi, vi) in x.iter_mut().zip(self.v.col(k)) {
                *xi += coeff * vi;
            }
        }
        x
    }
}

/// One-sided Jacobi SVD. Rotates column pairs until all columns are mutually
/// orthogonal, accumulating the rotations into `V`; the surviving column
/// norms are the singular values.
pub fn jacobi_svd(a: &CMatrix) -> Svd {
    let (sigma, w, v) = jacobi_core(a, true);
    let v = v.expect("V accumulation requested");
    let mut u = w;
    for k in 0..u.cols() {
        let s = sigma[k];
        if s > 0.0 {
            u.scale_col(k, 1.0 / s);
        } else {
            u.col_mut(k).fill(Complex64::ZERO);
        }
    }
    Svd { u, sigma, v }
}

/// Singular values only (descending), skipping the `V` accumulation.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    jacobi_core(a, false).0
}

fn jacobi_core(a: &CMatrix, want_v: bool) -> (Vec<f64>, CMatrix, Option<CMatrix>) {
    let n = a.cols();
    let mut w = a.clone();
    let mut v = if want_v { Some(CMatrix::identity(n)) } else { None };

    // Relative off-diagonal threshold for skipping a rotation; convergence is
    // quadratic so the sweep cap is generous.
    const TOL: f64 = 1e-14;
    const MAX_SWEEPS: usize = 60;

    // A column driven down to the rounding floor of the whole matrix is
    // numerically zero. Rotating it further only churns noise (its direction
    // could never be orthogonal to the surviving columns, e.g. when the input
    // is wider than tall), so such columns are frozen during the sweeps and
    // zeroed afterwards.
    let dead = n as f64 * f64::EPSILON * a.frobenius_norm();
    let dead2 = dead * dead;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let app = norm2(w.col(p)).powi(2);
                let aqq = norm2(w.col(q)).powi(2);
                if app <= dead2 || aqq <= dead2 {
                    continue;
                }
                let apq = dot_conj(w.col(p), w.col(q));
                let bound = TOL * (app * aqq).sqrt();
                let r = apq.norm();
                if r <= bound || r == 0.0 {
                    continue;
                }
                rotated = true;

                // Unitary 2x2 that orthogonalizes the pair: a diagonal phase
                // makes the coupling real, then a real Jacobi rotation
                // annihilates it.
                let phase = apq / r;
                let tau = (aqq - app) / (2.0 * r);
                let sgn = if tau >= 0.0 { 1.0 } else { -1.0 };
                let t = sgn / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                rotate_pair(&mut w, p, q, c, s, phase);
                if let Some(v) = v.as_mut() {
                    rotate_pair(v, p, q, c, s, phase);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Numerically dead columns are exact zeros of the factorization.
    for k in 0..n {
        if norm2(w.col(k)) <= dead {
            w.col_mut(k).fill(Complex64::ZERO);
        }
    }

    // Column norms are the singular values; sort them descending and permute
    // the columns to match.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|k| norm2(w.col(k))).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(core::cmp::Ordering::Equal));
    let sigma: Vec<f64> = order.iter().map(|&k| norms[k]).collect();
    let w = w.select_columns(&order);
    let v = v.map(|v| v.select_columns(&order));
    (sigma, w, v)
}

/// Applies `[w_p, w_q] <- [w_p, w_q] * J` with
/// `J = [[c, s], [-s*conj(phase), c*conj(phase)]]`.
fn rotate_pair(m: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: Complex64) {
    let pc = phase.conj();
    let rows = m.rows();
    for r in 0..rows {
        let wp = m[(r, p)];
        let wq = m[(r, q)];
        m[(r, p)] = c * wp - s * pc * wq;
        m[(r, q)] = s * wp + c * pc * wq;
    }
}
