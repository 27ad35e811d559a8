//! Solution and nonlinearity norms `F^sigma`, `N^sigma`.

use super::optimizer::SplitOptions;
use super::report::{BreakdownRow, NormReport};
use super::shells::zk_norm_with;
use crate::dyadic::{covering_index, eta};
use crate::error::{LabError, Result};
use crate::spectral::{dispersion_symbol, Representation, SpaceTimeField, C64};

/// `A_k(xi, tau)`: `tau - omega(xi) + i` for `k >= 1`, `tau + i` for `k = 0`.
pub fn weight_symbol(k: i32, xi: f64, tau: f64) -> C64 {
    if k >= 1 {
        C64::new(tau - dispersion_symbol(xi), 1.0)
    } else {
        C64::new(tau, 1.0)
    }
}

/// `(I - d_tau^2) F(u)`, realized as `F((1 + t^2) u)`. Returns a
/// frequency-side field on the same lattice.
pub fn tau_smoothing(f: &SpaceTimeField) -> Result<SpaceTimeField> {
    let u = f.in_physical();
    u.map(|_, t, z| z * (1.0 + t * t)).forward()
}

/// `(I - d_tau^2) f` by centered second differences in `tau` (periodic).
/// Used to cross-check [`tau_smoothing`].
pub fn tau_smoothing_fd(f: &SpaceTimeField) -> Result<SpaceTimeField> {
    f.require(Representation::Frequency)?;
    let nt = f.nt();
    let h2 = f.tgrid().dtau().powi(2);
    let mut out = f.clone();
    let src = f.data();
    for (ix, row) in out.data_mut().chunks_mut(nt).enumerate() {
        let base = ix * nt;
        for (q, z) in row.iter_mut().enumerate() {
            let prev = src[base + (q + nt - 1) % nt];
            let next = src[base + (q + 1) % nt];
            let cur = src[base + q];
            *z = cur - (next - cur * 2.0 + prev) / h2;
        }
    }
    Ok(out)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(LabError::Domain(format!("sigma must be >= 0, got {sigma}")));
    }
    Ok(())
}

/// Which of the two space-time norms to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    F,
    N,
}

fn assemble(u: &SpaceTimeField, sigma: f64, opts: &SplitOptions, kind: Kind) -> Result<NormReport> {
    check_sigma(sigma)?;
    let phys = u.in_physical().pad_time()?;
    let full = match kind {
        Kind::F => phys.map(|_, t, z| z * (1.0 + t * t)).forward()?,
        Kind::N => phys.forward()?,
    };
    let k_max = covering_index(full.xgrid().xi_max());
    let mut rows = Vec::with_capacity(k_max as usize + 1);
    let mut sum = 0.0;
    let mut status = None;
    for k in 0..=k_max {
        let fk = full.map(|xi, tau, z| {
            let e = eta(k, xi);
            if e == 0.0 {
                return C64::new(0.0, 0.0);
            }
            match kind {
                Kind::F => z * e,
                Kind::N => z * e / weight_symbol(k, xi, tau),
            }
        });
        let (r, _) = zk_norm_with(&fk, k, opts)?;
        if k == 0 {
            status = r.optimizer.clone();
        }
        let term = 2f64.powf(sigma * f64::from(k)) * r.value;
        sum += term * term;
        rows.push(BreakdownRow::shell(k, term));
    }
    let name = match kind {
        Kind::F => format!("F^{sigma}"),
        Kind::N => format!("N^{sigma}"),
    };
    let mut report = NormReport::new(name, sum.sqrt(), rows);
    report.optimizer = status;
    Ok(report)
}

/// `F^sigma` norm of a space-time field given on a time lattice; the field
/// is extended by zero to the doubled lattice before transforming.
pub fn fsigma_norm(u: &SpaceTimeField, sigma: f64) -> Result<NormReport> {
    fsigma_norm_with(u, sigma, &SplitOptions::default())
}

pub fn fsigma_norm_with(u: &SpaceTimeField, sigma: f64, opts: &SplitOptions) -> Result<NormReport> {
    assemble(u, sigma, opts, Kind::F)
}

/// `N^sigma` norm, same conventions as [`fsigma_norm`].
pub fn nsigma_norm(u: &SpaceTimeField, sigma: f64) -> Result<NormReport> {
    nsigma_norm_with(u, sigma, &SplitOptions::default())
}

pub fn nsigma_norm_with(u: &SpaceTimeField, sigma: f64, opts: &SplitOptions) -> Result<NormReport> {
    assemble(u, sigma, opts, Kind::N)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{FrequencyGrid, TimeGrid};

    #[test]
    fn zero_field() {
        let xg = FrequencyGrid::new(32.0, 64).unwrap();
        let tg = TimeGrid::new(1.0, 17).unwrap();
        let u = SpaceTimeField::zeros(xg, tg, Representation::Physical);
        assert_eq!(fsigma_norm(&u, 0.0).unwrap().value, 0.0);
        assert_eq!(nsigma_norm(&u, 1.0).unwrap().value, 0.0);
        assert!(fsigma_norm(&u, -1.0).is_err());
    }

    #[test]
    fn smoothing_realizations_agree_on_smooth_data() {
        let xg = FrequencyGrid::new(32.0, 32).unwrap();
        let tg = TimeGrid::new(64.0, 1025).unwrap();
        let u = SpaceTimeField::from_physical_fn(xg, tg, |x, t| {
            C64::new((-(x * x) / 4.0 - t * t / 2.0).exp(), 0.0)
        });
        let f = u.forward().unwrap();
        let a = tau_smoothing(&f).unwrap();
        let b = tau_smoothing_fd(&f).unwrap();
        let rel = a.sub(&b).unwrap().l2_norm() / a.l2_norm();
        assert!(rel < 1e-3, "relative gap {rel}");
    }

    #[test]
    fn single_shell_content_only_hits_neighbours() {
        let xg = FrequencyGrid::new(64.0, 256).unwrap();
        let tg = TimeGrid::new(1.0, 33).unwrap();
        let u = SpaceTimeField::from_physical_fn(xg, tg, |x, t| {
            C64::from_polar((-(x * x) / 50.0).exp(), 6.0 * x + 36.0 * t)
        });
        let r = fsigma_norm_with(&u, 0.0, &SplitOptions::baselines()).unwrap();
        for row in &r.breakdown {
            let k = row.k.unwrap();
            if !(2..=3).contains(&k) {
                assert!(row.value < 1e-8 * r.value, "shell {k}: {}", row.value);
            }
        }
    }
}
