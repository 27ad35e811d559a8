// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod bilinear;
pub mod checks;
pub mod counterexamples;
pub mod dyadic;
pub mod error;
pub mod families;
mod fft;
pub mod harness;
pub mod norms;
pub mod solver;
pub mod spectral;
