//! Spectral compressed sensing via structured tensor completion.
//!
//! A mixture of `K` complex sinusoids sampled at `t = 1..N`,
//!
//! ```text
//! x_t = sum_k a_k * exp(-j * omega_k * (t - 1)),
//! ```
//!
//! is observed on a small random subset of the `N` time indices. Folding the
//! samples into a third-order tensor with Hankel-like structure turns every
//! pure sinusoid into a rank-one term with Vandermonde factors, so the full
//! signal can be recovered by low-rank tensor completion: a group-regularized
//! alternating least squares solve over the observed cells, followed by
//! frequency extraction from the factor columns.
//!
//! The crate is `no_std` (with `alloc`) and splits into:
//!
//! * [`signal`]: the sinusoid mixture model, synthesis, and random sampling;
//! * [`tensor`]: folding samples into a masked tensor and back;
//! * [`cp`]: CP factor algebra (reconstruction, unfoldings, Khatri-Rao,
//!   k-rank and the Kruskal uniqueness check, solution alignment);
//! * [`linalg`]: the small dense complex kernels the solver needs;
//! * [`solver`]: masked rank-pruning ALS completion;
//! * [`recovery`]: frequency and amplitude estimation from solved factors.

#![no_std]
#![forbid(unsafe_code)]
// Guards written as `!(x > 0.0)` are deliberate: unlike `x <= 0.0`, the
// negated form also rejects NaN, which is the correct outcome for every
// validation site in this crate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// The numerical kernels index several arrays by one shared loop variable;
// zipped iterator chains obscure the subscript arithmetic they mirror.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cp;
pub mod error;
pub mod linalg;
pub mod recovery;
pub mod signal;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64;
