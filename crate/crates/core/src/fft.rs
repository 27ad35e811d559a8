//! Thin wrapper over `rustfft` with a per-thread planner cache.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unnormalized forward DFT, `X_m = sum_n x_n e^{-2 pi i nm/N}`, in place.
pub(crate) fn forward(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), false).process(buf);
    }
}

/// Unnormalized inverse DFT, `x_n = sum_m X_m e^{+2 pi i nm/N}`, in place.
pub(crate) fn inverse(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len(), true).process(buf);
    }
}

/// Signed mode number of FFT-ordered index `i` for a transform of length `n`.
pub(crate) fn signed_mode(i: usize, n: usize) -> i64 {
    if i < n.div_ceil(2) {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signed_modes_even_and_odd() {
        let even: Vec<i64> = (0..4).map(|i| signed_mode(i, 4)).collect();
        assert_eq!(even, vec![0, 1, -2, -1]);
        let odd: Vec<i64> = (0..5).map(|i| signed_mode(i, 5)).collect();
        assert_eq!(odd, vec![0, 1, 2, -2, -1]);
    }
}
