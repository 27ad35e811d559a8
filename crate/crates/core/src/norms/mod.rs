//! Computable function-space norms on space-time lattices.
//!
//! Infimum-defined norms (`B_0`, `Z_0`, `Z_k` for `k >= 100`) are evaluated
//! by a splitting optimizer and are always upper bounds; the trivial
//! splittings are reported alongside.

mod b0;
mod fsigma;
mod optimizer;
mod report;
mod shells;
mod witness;

pub use b0::{b0_norm, b0_norm_with, hsigma_tilde_norm, hsigma_tilde_norm_with};
pub use fsigma::{
    fsigma_norm, fsigma_norm_with, nsigma_norm, nsigma_norm_with, tau_smoothing, tau_smoothing_fd,
    weight_symbol,
};
pub use optimizer::{SplitEffort, SplitOptions};
pub use report::{BreakdownRow, NormReport, OptimizerStatus, SplitDecomposition};
pub use shells::{
    x0_by_subindex, xk_norm, yk_norm, zk_norm, zk_norm_with, KP_MIN, SUPPORT_TOL, Y_THRESHOLD,
};
pub use witness::{lemma21_witness, time_traces, Lemma21Part, Witness};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::spectral::{Representation, SpaceTimeField};

/// Iterated Lebesgue norms; the inner norm is taken in the second variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MixedNorm {
    /// `|| ||u(x, .)||_{L^2_t} ||_{L^1_x}`
    L1xL2t,
    /// `|| sup_t |u(x, t)| ||_{L^2_x}`
    L2xLinfT,
    /// `sup_x ||u(x, .)||_{L^2_t}`
    LinfxL2t,
    /// `L^2_{x,t}`
    L2,
}

/// Iterated norm of a physical-side field with `dx`, `dt` quadrature weights.
pub fn mixed_norm(u: &SpaceTimeField, kind: MixedNorm) -> Result<f64> {
    u.require(Representation::Physical)?;
    let (dx, dt) = (u.xgrid().dx(), u.tgrid().dt());
    let rows = (0..u.nx()).map(|ix| u.row(ix));
    let l2t =
        |row: &[crate::spectral::C64]| (dt * row.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
    Ok(match kind {
        MixedNorm::L1xL2t => dx * rows.map(l2t).sum::<f64>(),
        MixedNorm::L2xLinfT => (dx
            * rows
                .map(|r| r.iter().map(|z| z.norm()).fold(0.0, f64::max).powi(2))
                .sum::<f64>())
        .sqrt(),
        MixedNorm::LinfxL2t => rows.map(l2t).fold(0.0, f64::max),
        MixedNorm::L2 => u.l2_norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{FrequencyGrid, TimeGrid, C64};

    #[test]
    fn separable_field_factorizes() {
        let xg = FrequencyGrid::new(16.0, 64).unwrap();
        let tg = TimeGrid::new(2.0, 33).unwrap();
        let a = |x: f64| (-x * x).exp();
        let b = |t: f64| 1.0 + t;
        let u = SpaceTimeField::from_physical_fn(xg, tg, |x, t| C64::new(a(x) * b(t), 0.0));
        let l1a: f64 = (0..xg.len()).map(|i| a(xg.x(i)).abs()).sum::<f64>() * xg.dx();
        let l2b: f64 = ((0..tg.len()).map(|i| b(tg.t(i)).powi(2)).sum::<f64>() * tg.dt()).sqrt();
        let v = mixed_norm(&u, MixedNorm::L1xL2t).unwrap();
        assert!((v - l1a * l2b).abs() < 1e-12 * v);
        let z = SpaceTimeField::zeros(xg, tg, Representation::Physical);
        for kind in [
            MixedNorm::L1xL2t,
            MixedNorm::L2xLinfT,
            MixedNorm::LinfxL2t,
            MixedNorm::L2,
        ] {
            assert_eq!(mixed_norm(&z, kind).unwrap(), 0.0);
        }
    }
}
