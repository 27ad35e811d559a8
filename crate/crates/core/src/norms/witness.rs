//! Measured constants of the linear space-time estimates: for a datum `f_k`
//! each witness reports `lhs / rhs` of one inequality.

use serde::{Deserialize, Serialize};

use super::b0::b0_norm_with;
use super::fsigma::tau_smoothing;
use super::optimizer::SplitOptions;
use super::shells::{xk_norm, zk_norm_with};
use super::{mixed_norm, MixedNorm};
use crate::dyadic::eta;
use crate::error::{LabError, Result};
use crate::spectral::{dispersion_symbol, forward_transform, SpaceTimeField, C64};

/// Which linear estimate to witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lemma21Part {
    /// Modulation localization is bounded on `Z_k`.
    B,
    /// Time traces are bounded by `Z_k` (`L^2`, or `B_0` when `k = 0`).
    D,
    /// Maximal function: `L^2_x L^inf_t <= C 2^{k/2} ||(I - d_tau^2) f||_{Z_k}`.
    E,
    /// Local smoothing: `L^inf_x L^2_t <= C 2^{-k/2} ||f||_{Z_k}`.
    F,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub part: Lemma21Part,
    pub k: i32,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Set when `rhs = 0` but `lhs != 0`.
    pub violation: bool,
}

impl Witness {
    pub fn new(part: Lemma21Part, k: i32, lhs: f64, rhs: f64) -> Self {
        let (ratio, violation) = if rhs > 0.0 {
            (lhs / rhs, false)
        } else if lhs == 0.0 {
            (0.0, false)
        } else {
            (f64::INFINITY, true)
        };
        Self {
            part,
            k,
            lhs,
            rhs,
            ratio,
            violation,
        }
    }
}

/// Measured ratio of one linear estimate for a frequency-side datum `f`
/// supported in shell `k`. Infimum norms use `opts`.
pub fn lemma21_witness(
    f: &SpaceTimeField,
    k: i32,
    part: Lemma21Part,
    opts: &SplitOptions,
) -> Result<Witness> {
    if k < 0 {
        return Err(LabError::Domain(format!(
            "shell index must be >= 0, got {k}"
        )));
    }
    if matches!(part, Lemma21Part::B | Lemma21Part::E | Lemma21Part::F) && k == 0 {
        return Err(LabError::Domain("this estimate needs k >= 1".into()));
    }
    let z = |g: &SpaceTimeField| zk_norm_with(g, k, opts).map(|(r, _)| r.value);
    match part {
        Lemma21Part::B => {
            let rhs = z(f)?;
            let j_max = crate::dyadic::covering_index(
                f.xgrid().xi_max().powi(2) + f.tgrid().dtau() * f.nt() as f64,
            );
            let mut lhs: f64 = 0.0;
            for j in 0..=j_max {
                let piece = f.map(|xi, tau, v| v * eta(j, tau - dispersion_symbol(xi)));
                lhs = lhs.max(xk_norm(&piece, k)?.value);
            }
            Ok(Witness::new(part, k, lhs, rhs))
        }
        Lemma21Part::D => {
            let rhs = z(f)?;
            let traces = time_traces(f)?;
            let mut lhs: f64 = 0.0;
            for trace in traces {
                let v = if k >= 1 {
                    trace.l2_norm()
                } else {
                    b0_norm_with(&trace, opts)?.0.value
                };
                lhs = lhs.max(v);
            }
            Ok(Witness::new(part, k, lhs, rhs))
        }
        Lemma21Part::E => {
            let lhs = mixed_norm(&f.in_physical(), MixedNorm::L2xLinfT)?;
            let smoothed = tau_smoothing(f)?;
            let rhs = 2f64.powf(f64::from(k) / 2.0) * z(&smoothed)?;
            Ok(Witness::new(part, k, lhs, rhs))
        }
        Lemma21Part::F => {
            let lhs = mixed_norm(&f.in_physical(), MixedNorm::LinfxL2t)?;
            let rhs = 2f64.powf(-f64::from(k) / 2.0) * z(f)?;
            Ok(Witness::new(part, k, lhs, rhs))
        }
    }
}

/// `xi -> int f(xi, tau) e^{i t tau} dtau` at every lattice time, as spectral
/// fields (the integral is `2 pi` times the inverse time transform).
pub fn time_traces(f: &SpaceTimeField) -> Result<Vec<crate::spectral::SpectralField>> {
    let u = f.in_physical();
    let nt = u.nt();
    let xg = *u.xgrid();
    (0..nt)
        .map(|it| {
            let samples: Vec<C64> = (0..u.nx()).map(|ix| u.get(ix, it)).collect();
            forward_transform(xg, &samples)
                .map(|s| s.scale(C64::new(2.0 * std::f64::consts::PI, 0.0)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::psi;
    use crate::spectral::{FrequencyGrid, Representation, TimeGrid};

    #[test]
    fn zero_datum_gives_zero_ratio() {
        let xg = FrequencyGrid::new(32.0, 64).unwrap();
        let tg = TimeGrid::new(4.0, 33).unwrap();
        let f = SpaceTimeField::zeros(xg, tg, Representation::Frequency);
        for part in [
            Lemma21Part::B,
            Lemma21Part::D,
            Lemma21Part::E,
            Lemma21Part::F,
        ] {
            let w = lemma21_witness(&f, 2, part, &SplitOptions::baselines()).unwrap();
            assert_eq!(w.ratio, 0.0);
            assert!(!w.violation);
        }
    }

    #[test]
    fn local_smoothing_ratio_is_moderate() {
        let xg = FrequencyGrid::new(64.0, 512).unwrap();
        let tg = TimeGrid::new(16.0, 513).unwrap();
        let k = 3;
        let f = SpaceTimeField::from_frequency_fn(xg, tg, |xi, tau| {
            let s = tau - dispersion_symbol(xi);
            C64::new(psi((xi - 8.0) / 2.0) * psi(s), 0.0)
        });
        let w = lemma21_witness(&f, k, Lemma21Part::F, &SplitOptions::baselines()).unwrap();
        assert!(w.ratio > 0.0 && w.ratio < 10.0, "{w:?}");
    }
}
