//! Smooth dyadic cutoffs, shells, modulation regions and weights.
//!
//! `eta0` is even, equal to 1 on `[-5/4, 5/4]` and vanishes outside
//! `[-8/5, 8/5]`. Every other cutoff is derived from it by dilation and
//! differencing, so telescoping sums are evaluated in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::spectral::{dispersion_symbol, Representation, SpaceTimeField, C64};

pub const PLATEAU: f64 = 1.25;
pub const SUPPORT: f64 = 1.6;

/// Smooth step: 0 for `s <= 0`, 1 for `s >= 1`, `C^inf` everywhere.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        // e^{-1/s} / (e^{-1/s} + e^{-1/(1-s)}), rewritten to avoid underflow.
        1.0 / (1.0 + (1.0 / s - 1.0 / (1.0 - s)).exp())
    }
}

/// Base bump.
pub fn eta0(xi: f64) -> f64 {
    let a = xi.abs();
    if a <= PLATEAU {
        1.0
    } else if a >= SUPPORT {
        0.0
    } else {
        smooth_step((SUPPORT - a) / (SUPPORT - PLATEAU))
    }
}

/// Time/modulation bump with the same plateau and support as `eta0`.
pub fn psi(x: f64) -> f64 {
    eta0(x)
}

/// Second derivative of [`psi`], in closed form.
pub fn psi_second(x: f64) -> f64 {
    let a = x.abs();
    if a <= PLATEAU || a >= SUPPORT {
        return 0.0;
    }
    let w = SUPPORT - PLATEAU;
    let s = (SUPPORT - a) / w;
    let step = smooth_step(s);
    let r = 1.0 - s;
    // step' = step (1 - step) h with h = 1/s^2 + 1/(1-s)^2.
    let h = 1.0 / (s * s) + 1.0 / (r * r);
    let dh = -2.0 / (s * s * s) + 2.0 / (r * r * r);
    let d1 = step * (1.0 - step) * h;
    let d2 = d1 * (1.0 - 2.0 * step) * h + step * (1.0 - step) * dh;
    d2 / (w * w)
}

fn pow2(l: i32) -> f64 {
    2f64.powi(l)
}

/// `chi_l(xi) = eta0(xi / 2^l) - eta0(xi / 2^{l-1})`.
pub fn chi(l: i32, xi: f64) -> f64 {
    eta0(xi / pow2(l)) - eta0(xi / pow2(l - 1))
}

/// `eta_l`: `eta0` for `l = 0`, `chi_l` for `l >= 1`, zero for `l <= -1`.
pub fn eta(l: i32, xi: f64) -> f64 {
    match l {
        l if l < 0 => 0.0,
        0 => eta0(xi),
        l => chi(l, xi),
    }
}

/// `eta_{<= l}`, closed form of the telescoping sum.
pub fn eta_leq(l: i32, xi: f64) -> f64 {
    if l < 0 {
        0.0
    } else {
        eta0(xi / pow2(l))
    }
}

/// `eta_{[l1, l2]}`, closed form of the telescoping sum.
pub fn eta_range(l1: i32, l2: i32, xi: f64) -> Result<f64> {
    if l1 > l2 {
        return Err(LabError::Domain(format!("empty cutoff range [{l1}, {l2}]")));
    }
    if l2 < 0 {
        return Ok(0.0);
    }
    let lo = l1.max(0);
    Ok(eta_leq(l2, xi) - eta_leq(lo - 1, xi))
}

/// Modulation weight `1 + 2^{(j - 2k)/2}`, defined for `k >= 1`.
pub fn beta(k: i32, j: i32) -> Result<f64> {
    if k < 1 || j < 0 {
        return Err(LabError::Domain(format!(
            "weight needs k >= 1 and j >= 0, got (k, j) = ({k}, {j})"
        )));
    }
    Ok(1.0 + 2f64.powf(f64::from(j - 2 * k) / 2.0))
}

/// Range `(lo, hi)` of indices `l` that may have `eta_l(x) != 0`; at most
/// two consecutive values, so callers evaluate both.
pub fn active_etas(x: f64) -> (i32, i32) {
    let a = x.abs();
    if a < PLATEAU {
        return (0, 0);
    }
    // eta_l(x) != 0 needs a / 1.6 < 2^l < a / 0.625, i.e. l in {b, b + 1}.
    let b = a.log2().floor() as i32;
    (b.max(0), b + 1)
}

/// Smallest `l >= 0` with `eta_{<= l} = 1` on `[-x, x]`.
pub fn covering_index(x: f64) -> i32 {
    let mut l = 0;
    while pow2(l) * PLATEAU < x {
        l += 1;
    }
    l
}

/// Whether `xi` lies in the closed shell `I_l = {|xi| in [2^{l-1}, 2^{l+1}]}`.
pub fn in_shell(l: i32, xi: f64) -> bool {
    let a = xi.abs();
    a >= pow2(l - 1) && a <= pow2(l + 1)
}

/// Whether `s` lies in `I~_j`: `[-2, 2]` for `j = 0`, `I_j` otherwise.
pub fn in_modulation_band(j: i32, s: f64) -> bool {
    if j == 0 {
        s.abs() <= 2.0
    } else {
        in_shell(j, s)
    }
}

/// Shell/modulation address of a region `D_{k,j}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicIndex {
    pub k: i32,
    pub j: i32,
}

impl DyadicIndex {
    pub fn new(k: i32, j: i32) -> Result<Self> {
        if j < 0 {
            return Err(LabError::Domain(format!(
                "modulation index must be >= 0, got {j}"
            )));
        }
        Ok(Self { k, j })
    }

    /// Membership of `(xi, tau)` in `D_{k,j}`. For `k >= 1` the modulation is
    /// measured from the dispersion surface, for `k <= 0` from `tau = 0`.
    pub fn contains(&self, xi: f64, tau: f64) -> bool {
        if !in_shell(self.k, xi) {
            return false;
        }
        let s = if self.k >= 1 {
            tau - dispersion_symbol(xi)
        } else {
            tau
        };
        in_modulation_band(self.j, s)
    }
}

/// Zeroes the samples of `f` outside `D_{k,j}`.
pub fn region_mask(k: i32, j: i32, f: &SpaceTimeField) -> Result<SpaceTimeField> {
    f.require(Representation::Frequency)?;
    let index = DyadicIndex::new(k, j)?;
    Ok(f.map(|xi, tau, v| {
        if index.contains(xi, tau) {
            v
        } else {
            C64::new(0.0, 0.0)
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eta0_examples() {
        assert_eq!(eta0(1.0), 1.0);
        assert_eq!(eta0(2.0), 0.0);
        let v = eta0(1.45);
        assert!(v > 0.0 && v < 1.0);
        assert_eq!(eta0(-1.45), v);
        assert_eq!(eta0(1.25), 1.0);
        assert_eq!(eta0(1.6), 0.0);
    }

    #[test]
    fn psi_second_matches_differences() {
        let h = 1e-4;
        for i in 0..200 {
            let x = -1.7 + 3.4 * f64::from(i) / 199.0;
            let fd = (psi(x + h) - 2.0 * psi(x) + psi(x - h)) / (h * h);
            let an = psi_second(x);
            assert!(
                (fd - an).abs() < 1e-3 * (1.0 + an.abs()),
                "x={x} fd={fd} an={an}"
            );
        }
    }

    #[test]
    fn chi_vanishes_at_origin_and_telescopes() {
        for l in -30..30 {
            assert_eq!(chi(l, 0.0), 0.0);
        }
        let s: f64 = (-20..=20).map(|l| chi(l, 3.0)).sum();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn chi_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let l = rng.gen_range(-10..20);
            let xi: f64 = rng.gen_range(-1.0..1.0) * 2f64.powi(l + 2);
            let a = xi.abs() / 2f64.powi(l);
            if !(0.625..=1.6).contains(&a) {
                assert!(chi(l, xi).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let xi: f64 = rng.gen_range(-1e6..1e6);
            let s: f64 = eta0(xi) + (1..=30).map(|l| eta(l, xi)).sum::<f64>();
            assert!((s - 1.0).abs() <= 1e-12, "xi={xi} sum={s}");
        }
    }

    #[test]
    fn range_matches_termwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let xi: f64 = rng.gen_range(-300.0..300.0);
            let (a, b) = (rng.gen_range(-3..6), rng.gen_range(6..10));
            let direct: f64 = (a..=b).map(|l| eta(l, xi)).sum();
            assert!((direct - eta_range(a, b, xi).unwrap()).abs() < 1e-14);
        }
        assert!(eta_range(3, 2, 1.0).is_err());
        assert_eq!(eta_leq(4, 3.0), eta0(3.0 / 16.0));
    }

    #[test]
    fn active_etas_cover_nonzero_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20_000 {
            let x: f64 = rng.gen_range(-5000.0..5000.0) * rng.gen_range(0.0f64..1.0).powi(6);
            let (lo, hi) = active_etas(x);
            assert!(hi - lo <= 1);
            for l in 0..20 {
                if eta(l, x) != 0.0 {
                    assert!(l >= lo && l <= hi, "x={x} l={l} range=({lo},{hi})");
                }
            }
        }
    }

    #[test]
    fn covering_index_is_minimal() {
        for &x in &[0.0, 1.0, 1.25, 1.3, 2.5, 2.6, 100.0] {
            let l = covering_index(x);
            assert_eq!(eta_leq(l, x), 1.0);
            if l > 0 {
                assert!(eta_leq(l - 1, x) < 1.0 || 2f64.powi(l - 1) * PLATEAU < x);
            }
        }
    }

    #[test]
    fn beta_examples() {
        for k in 1..10 {
            assert_eq!(beta(k, 2 * k).unwrap(), 2.0);
            let mut prev = 0.0;
            for j in 0..=4 * k {
                let b = beta(k, j).unwrap();
                assert!(b >= 1.0 && b >= prev);
                prev = b;
            }
        }
        assert_eq!(beta(5, 0).unwrap(), 1.0 + 2f64.powi(-5));
        assert!(beta(0, 1).is_err());
    }

    #[test]
    fn regions() {
        let d = DyadicIndex::new(3, 0).unwrap();
        assert!(d.contains(5.0, -25.0 + 1.5));
        assert!(!d.contains(5.0, -25.0 + 2.5));
        assert!(!d.contains(17.0, dispersion_symbol(17.0)));
        let d0 = DyadicIndex::new(0, 1).unwrap();
        assert!(d0.contains(1.0, 1.5));
        assert!(!d0.contains(1.0, 0.5));
        assert!(d0.contains(1.0, -2.5));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cutoffs_sum_to_one(xi in -1e8f64..1e8) {
                let s = eta0(xi) + (1..=30).map(|l| eta(l, xi)).sum::<f64>();
                prop_assert!((s - 1.0).abs() <= 1e-12);
            }

            #[test]
            fn at_most_two_shells_active(xi in -1e6f64..1e6) {
                let active = (1..=25).filter(|&l| eta(l, xi) > 0.0).count()
                    + usize::from(eta0(xi) > 0.0);
                prop_assert!(active <= 2);
            }

            #[test]
            fn cutoffs_are_even_and_bounded(xi in -1e4f64..1e4, l in 1i32..20) {
                prop_assert_eq!(eta(l, xi), eta(l, -xi));
                prop_assert!((0.0..=1.0).contains(&eta(l, xi)));
            }
        }
    }
}
