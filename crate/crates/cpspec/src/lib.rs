//! Workstation companion to `cpspec-core`: CSV and gnuplot output, quality
//! metrics, experiment configuration, a parallel trial harness, and the
//! `cpspec` command-line tool built from them.
//!
//! The core crate owns the math (folding, the masked completion solver,
//! frequency and amplitude recovery). This crate owns everything that needs
//! an operating system: files, clocks, thread pools, and argument parsing.

// Guards written as `!(x > 0.0)` are deliberate: unlike `x <= 0.0`, the
// negated form also rejects NaN, which is the correct outcome for every
// validation site in this crate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod harness;
pub mod metrics;
pub mod report;
