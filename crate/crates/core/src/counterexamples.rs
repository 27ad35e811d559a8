//! Executable versions of the two constructions that justify the shape of
//! the norms: a bilinear bound with `Z_k` replaced by `X_k` loses a factor
//! `k`, and the product estimate needs `sigma >= 0` together with the
//! weights `beta_{1,k}`.
//!
//! All symbols are closed-form [`ShellBump`]s evaluated on banded
//! quadratures (see [`crate::banded`]); `k` is restricted to a desk-scale
//! range and trends across `k` stand in for the large-`k` statements.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::banded::{
    banded_space_norm, banded_xk_norm, region_min, BandedField, Carrier, Convolution, Quadrature,
    ShellBump, Weighted, XiProfile,
};
use crate::checks::{all_pass, Check};
use crate::dyadic::{beta, eta};
use crate::error::{LabError, Result};
use crate::spectral::dispersion_symbol;

/// Smallest and largest `k` the constructions are evaluated at.
pub const K_MIN: i32 = 6;
pub const K_MAX: i32 = 14;

/// Remainder bound for the two resonance identities, and the box half-width
/// `C` on which they are sampled.
pub const RESONANCE_TOL: f64 = 10.0;
pub const RESONANCE_BOX: f64 = 1.6;

fn check_k(k: i32) -> Result<()> {
    if !(K_MIN..=K_MAX).contains(&k) {
        return Err(LabError::Resolution(format!(
            "k = {k} is outside [{K_MIN}, {K_MAX}]; modulation bands reach 2^{} and a uniform \
             tau lattice would need about 2^{} points",
            k + 11,
            k + 13
        )));
    }
    Ok(())
}

fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

/// `f_1 = psi(10 (xi - 2)) psi(tau)` and
/// `f_k = psi(xi - 2^k) psi(2^{-k-10} (tau - omega(xi)))`.
pub fn prop51_fields(k: i32) -> Result<(ShellBump, ShellBump)> {
    check_k(k)?;
    let f1 = ShellBump::new(
        1.0,
        XiProfile::Bump {
            center: 2.0,
            width: 0.1,
        },
        Carrier::Flat,
        1.0,
    )?;
    let fk = ShellBump::new(
        1.0,
        XiProfile::Bump {
            center: pow2(k),
            width: 1.0,
        },
        Carrier::Dispersion,
        pow2(k + 10),
    )?;
    Ok((f1, fk))
}

/// One `k` of the logarithmic-failure construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop51Point {
    pub k: i32,
    /// `2^k ||eta_k (tau - omega + i)^{-1} (f_k * f_1)||_{X_k}`.
    pub lhs: f64,
    /// `||(I - d_tau^2) f_k||_{X_k} ||(I - d_tau^2) f_1||_{X_1}`.
    pub rhs: f64,
    pub ratio: f64,
    pub f1_norm: f64,
    pub fk_norm: f64,
    /// Minimum of `|f_k * f_1|` over `xi in 2^k + 2 +- 1/2`, `|tau - omega| <= 2^k`.
    pub region_min: f64,
    /// The same minimum over `xi in 2^k +- 1/2`, where the convolution is
    /// partly empty (recorded, not checked).
    pub unshifted_region_min: f64,
}

pub fn prop51_ratio(k: i32, q: &Quadrature) -> Result<Prop51Point> {
    let (f1, fk) = prop51_fields(k)?;
    let conv = Convolution::new(&f1, &fk, q)?;
    let piece = Weighted::shell_piece(&conv, k, false, true);
    let lhs = pow2(k) * banded_xk_norm(&piece, k, q)?.value;
    let f1_norm = banded_xk_norm(&f1.tau_smoothed(), 1, q)?.value;
    let fk_norm = banded_xk_norm(&fk.tau_smoothed(), k, q)?.value;
    let rhs = f1_norm * fk_norm;
    let g = |xi: f64, tau: f64| conv.value(xi, tau).abs();
    let s = (-pow2(k), pow2(k));
    let c = 2f64.powi(k);
    let (shifted, _) = region_min(&g, (c + 1.5, c + 2.5), s, &dispersion_symbol, 21);
    let (unshifted, _) = region_min(&g, (c - 0.5, c + 0.5), s, &dispersion_symbol, 21);
    Ok(Prop51Point {
        k,
        lhs,
        rhs,
        ratio: lhs / rhs,
        f1_norm,
        fk_norm,
        region_min: shifted,
        unshifted_region_min: unshifted,
    })
}

/// `u_+-` with `F(u_+-) = psi((xi -+ 2^k) / 4) psi((tau - omega) / 2^10)` and
/// `F(v) = 2^{-k} eta_1(xi) 1_{[0, inf)}(xi) psi((tau + 2^{k+1} xi) / 2^10)`.
pub fn prop52_fields(k: i32) -> Result<(ShellBump, ShellBump, ShellBump)> {
    check_k(k)?;
    let u = |sign: f64| {
        ShellBump::new(
            1.0,
            XiProfile::Bump {
                center: sign * pow2(k),
                width: 4.0,
            },
            Carrier::Dispersion,
            pow2(10),
        )
    };
    let v = ShellBump::new(
        pow2(-k),
        XiProfile::PositiveShell { l: 1 },
        Carrier::Linear {
            slope: -pow2(k + 1),
        },
        pow2(10),
    )?;
    Ok((u(1.0)?, u(-1.0)?, v))
}

/// Largest remainders of `omega(xi_1) + omega(xi - xi_1) = -2^{k+1} xi + O(1)`
/// (`|xi|, |xi_1 - 2^k| <= C`) and
/// `2^{k+1} xi_1 - omega(xi - xi_1) = -omega(xi) + O(1)` (`|xi_1|, |xi - 2^k| <= C`)
/// on an `n x n` grid.
pub fn resonance_remainders(k: i32, n: usize) -> (f64, f64) {
    let c = RESONANCE_BOX;
    let p = pow2(k);
    let grid = |i: usize| -c + 2.0 * c * i as f64 / (n - 1) as f64;
    let (mut low, mut high) = (0.0f64, 0.0f64);
    for a in 0..n {
        for b in 0..n {
            let (xi, xi1) = (grid(a), p + grid(b));
            let r = dispersion_symbol(xi1) + dispersion_symbol(xi - xi1) + 2.0 * p * xi;
            low = low.max(r.abs());
            let (xi1, xi) = (grid(a), p + grid(b));
            let r = 2.0 * p * xi1 - dispersion_symbol(xi - xi1) + dispersion_symbol(xi);
            high = high.max(r.abs());
        }
    }
    (low, high)
}

/// One `k` of the sharpness construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prop52Point {
    pub k: i32,
    pub sigma: f64,
    pub resonance_low: f64,
    pub resonance_high: f64,
    /// `2^k min |eta_1 A^{-1} F[d_x(u_+ u_-)]|` over `xi in [1.6, 2.5]`,
    /// `|tau + 2^{k+1} xi| <= 5/4` (the lower-bound profile is `2^{-k}` there).
    pub low_region_min: f64,
    /// `min |eta_k A^{-1} F[d_x(u_+ v)]|` over `|xi - 2^k| <= 5/4`,
    /// `|tau - omega| <= 5/4` (the lower-bound profile is 1 there).
    pub high_region_min: f64,
    /// `2^{-k/2} beta_{1,k}` from the weight function.
    pub beta_term: f64,
    /// `2^{-k/2} + 1/2`.
    pub beta_expected: f64,
    pub u_plus_norm: f64,
    pub u_minus_norm: f64,
    pub v_norm: f64,
    /// Shell-1 part of `||d_x(u_+ u_-)||_{N^sigma}` against `||u_+|| ||u_-||`.
    pub low_lhs: f64,
    pub low_rhs: f64,
    /// Shell-`k` part of `||d_x(u_+ v)||_{N^sigma}` against `||u_+|| ||v||`.
    pub high_lhs: f64,
    pub high_rhs: f64,
}

impl Prop52Point {
    pub fn low_ratio(&self) -> f64 {
        self.low_lhs / self.low_rhs
    }

    pub fn high_ratio(&self) -> f64 {
        self.high_lhs / self.high_rhs
    }
}

/// Measures both lower bounds, both resonance identities and the norm sizes
/// at one `k`. Space norms are the banded `F^sigma` evaluations; `sigma` may
/// be negative here so that the failure for `sigma < 0` can be observed.
pub fn prop52_check(k: i32, sigma: f64, q: &Quadrature) -> Result<Prop52Point> {
    if !sigma.is_finite() {
        return Err(LabError::Domain(format!(
            "sigma must be finite, got {sigma}"
        )));
    }
    let (up, um, v) = prop52_fields(k)?;
    let (resonance_low, resonance_high) = resonance_remainders(k, 41);
    let p = pow2(k);

    let low = Convolution::new(&um, &up, q)?;
    let g_low = |xi: f64, tau: f64| {
        let s = tau - dispersion_symbol(xi);
        eta(1, xi) * xi.abs() / s.hypot(1.0) * low.value(xi, tau).abs()
    };
    let (m, _) = region_min(&g_low, (1.6, 2.5), (-1.25, 1.25), &|xi| -2.0 * p * xi, 21);
    let low_region_min = p * m;

    let high = Convolution::new(&v, &up, q)?;
    let g_high = |xi: f64, tau: f64| {
        let s = tau - dispersion_symbol(xi);
        eta(k, xi) * xi.abs() / s.hypot(1.0) * high.value(xi, tau).abs()
    };
    let (high_region_min, _) = region_min(
        &g_high,
        (p - 1.25, p + 1.25),
        (-1.25, 1.25),
        &dispersion_symbol,
        21,
    );

    let u_plus_norm = banded_space_norm(&up, sigma, false, q)?.value;
    let u_minus_norm = banded_space_norm(&um, sigma, false, q)?.value;
    let v_norm = banded_space_norm(&v, sigma, false, q)?.value;
    let low_lhs =
        2f64.powf(sigma) * banded_xk_norm(&Weighted::shell_piece(&low, 1, true, true), 1, q)?.value;
    let high_lhs = 2f64.powf(sigma * f64::from(k))
        * banded_xk_norm(&Weighted::shell_piece(&high, k, true, true), k, q)?.value;
    Ok(Prop52Point {
        k,
        sigma,
        resonance_low,
        resonance_high,
        low_region_min,
        high_region_min,
        beta_term: pow2(k).sqrt().recip() * beta(1, k)?,
        beta_expected: pow2(k).sqrt().recip() + 0.5,
        u_plus_norm,
        u_minus_norm,
        v_norm,
        low_lhs,
        low_rhs: u_plus_norm * u_minus_norm,
        high_lhs,
        high_rhs: u_plus_norm * v_norm,
    })
}

/// Least-squares line `y = slope x + intercept`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// What was fitted, e.g. `ratio ~ k`.
    pub law: String,
    pub slope: f64,
    pub intercept: f64,
}

impl GrowthFit {
    pub fn fit(law: impl Into<String>, x: &[f64], y: &[f64]) -> Self {
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        Self {
            law: law.into(),
            slope,
            intercept: my - slope * mx,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub k: i32,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Further measured quantities of this `k`, by name.
    pub values: BTreeMap<String, f64>,
}

/// Sweep over `k` with fitted trends and pass/fail checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    /// `"51"` or `"52"`.
    pub which: String,
    pub sigma: f64,
    pub rows: Vec<ReportRow>,
    pub fits: Vec<GrowthFit>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl CounterexampleReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Ratio table: `k,lhs,rhs,ratio` followed by the named values.
    pub fn to_csv(&self) -> String {
        let keys: Vec<&String> = self
            .rows
            .first()
            .map(|r| r.values.keys().collect())
            .unwrap_or_default();
        let mut out = String::from("k,lhs,rhs,ratio");
        for key in &keys {
            out.push(',');
            out.push_str(key);
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{},{:.17e},{:.17e},{:.17e}",
                r.k, r.lhs, r.rhs, r.ratio
            );
            for key in &keys {
                let _ = write!(
                    out,
                    ",{:.17e}",
                    r.values.get(*key).copied().unwrap_or(f64::NAN)
                );
            }
            out.push('\n');
        }
        out
    }
}

fn validate_sweep(ks: &[i32]) -> Result<()> {
    if ks.is_empty() {
        return Err(LabError::Config("empty k range".into()));
    }
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(LabError::Config(format!(
            "k values must increase strictly, got {ks:?}"
        )));
    }
    ks.iter().try_for_each(|&k| check_k(k))
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    hi / lo
}

/// Logarithmic-failure sweep: ratios must increase with `k` and `ratio / k`
/// must stay within a factor 3; the `X_1`/`X_k` sizes of the data are checked
/// after normalizing by their expected `k`-dependence.
pub fn prop51_sweep(ks: &[i32], q: &Quadrature) -> Result<CounterexampleReport> {
    validate_sweep(ks)?;
    let points = ks
        .iter()
        .map(|&k| prop51_ratio(k, q))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ReportRow> = points
        .iter()
        .map(|p| ReportRow {
            k: p.k,
            lhs: p.lhs,
            rhs: p.rhs,
            ratio: p.ratio,
            values: BTreeMap::from([
                ("f1_norm".to_string(), p.f1_norm),
                ("fk_norm_over_2k".to_string(), p.fk_norm / pow2(p.k)),
                ("region_min".to_string(), p.region_min),
                ("unshifted_region_min".to_string(), p.unshifted_region_min),
            ]),
        })
        .collect();
    let ks_f: Vec<f64> = ks.iter().map(|&k| f64::from(k)).collect();
    let ratios: Vec<f64> = points.iter().map(|p| p.ratio).collect();
    let mut checks = vec![Check::above(
        "ratios positive and finite",
        ratios
            .iter()
            .copied()
            .filter(|r| r.is_finite())
            .fold(f64::INFINITY, f64::min),
        0.0,
    )];
    if ratios.len() > 1 {
        let step = ratios
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        checks.push(Check::above("smallest ratio increment", step, 0.0));
    }
    checks.push(Check::at_most(
        "spread of ratio / k",
        spread(points.iter().map(|p| p.ratio / f64::from(p.k))),
        3.0,
    ));
    checks.push(Check::at_most(
        "spread of ||f_k|| / 2^k",
        spread(points.iter().map(|p| p.fk_norm / pow2(p.k))),
        4.0,
    ));
    checks.push(Check::above(
        "min |f_k * f_1| on the shifted region",
        points
            .iter()
            .map(|p| p.region_min)
            .fold(f64::INFINITY, f64::min),
        0.0,
    ));
    Ok(CounterexampleReport {
        which: "51".into(),
        sigma: 0.0,
        pass: all_pass(&checks),
        fits: vec![GrowthFit::fit("ratio ~ k", &ks_f, &ratios)],
        rows,
        checks,
    })
}

/// Sharpness sweep at a given `sigma`.
pub fn prop52_sweep(ks: &[i32], sigma: f64, q: &Quadrature) -> Result<CounterexampleReport> {
    validate_sweep(ks)?;
    let points = ks
        .iter()
        .map(|&k| prop52_check(k, sigma, q))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ReportRow> = points
        .iter()
        .map(|p| ReportRow {
            k: p.k,
            lhs: p.low_lhs,
            rhs: p.low_rhs,
            ratio: p.low_ratio(),
            values: BTreeMap::from([
                ("resonance_low".to_string(), p.resonance_low),
                ("resonance_high".to_string(), p.resonance_high),
                ("low_region_min".to_string(), p.low_region_min),
                ("high_region_min".to_string(), p.high_region_min),
                ("beta_term".to_string(), p.beta_term),
                ("u_plus_norm".to_string(), p.u_plus_norm),
                ("u_minus_norm".to_string(), p.u_minus_norm),
                ("v_norm".to_string(), p.v_norm),
                ("high_lhs".to_string(), p.high_lhs),
                ("high_rhs".to_string(), p.high_rhs),
                ("high_ratio".to_string(), p.high_ratio()),
            ]),
        })
        .collect();
    let min_of =
        |f: &dyn Fn(&Prop52Point) -> f64| points.iter().map(f).fold(f64::INFINITY, f64::min);
    let max_of = |f: &dyn Fn(&Prop52Point) -> f64| points.iter().map(f).fold(0.0, f64::max);
    let beta_gap = max_of(&|p| (p.beta_term - p.beta_expected).abs() / p.beta_expected);
    let sk = |p: &Prop52Point| 2f64.powf(sigma * f64::from(p.k));
    let checks = vec![
        Check::at_most(
            "resonance remainder (low output)",
            max_of(&|p| p.resonance_low),
            RESONANCE_TOL,
        ),
        Check::at_most(
            "resonance remainder (high output)",
            max_of(&|p| p.resonance_high),
            RESONANCE_TOL,
        ),
        Check::above(
            "low-frequency region minimum",
            min_of(&|p| p.low_region_min),
            0.0,
        ),
        Check::above(
            "high-frequency region minimum",
            min_of(&|p| p.high_region_min),
            0.0,
        ),
        Check::at_most(
            "relative gap of 2^{-k/2} beta_{1,k} to 2^{-k/2} + 1/2",
            beta_gap,
            4.0 * f64::EPSILON,
        ),
        Check::at_most(
            "spread of ||u_+|| / 2^{sigma k}",
            spread(points.iter().map(|p| p.u_plus_norm / sk(p))),
            4.0,
        ),
        Check::at_most(
            "spread of ||v|| / (2^{-k/2} beta_{1,k})",
            spread(points.iter().map(|p| p.v_norm / p.beta_term)),
            4.0,
        ),
        Check::at_most(
            "relative gap ||u_+|| vs ||u_-||",
            max_of(&|p| (p.u_plus_norm - p.u_minus_norm).abs() / p.u_plus_norm),
            1e-6,
        ),
    ];
    let ks_f: Vec<f64> = ks.iter().map(|&k| f64::from(k)).collect();
    let log =
        |f: &dyn Fn(&Prop52Point) -> f64| points.iter().map(|p| f(p).log2()).collect::<Vec<_>>();
    Ok(CounterexampleReport {
        which: "52".into(),
        sigma,
        pass: all_pass(&checks),
        fits: vec![
            GrowthFit::fit("log2(low ratio) ~ k", &ks_f, &log(&|p| p.low_ratio())),
            GrowthFit::fit("log2(high ratio) ~ k", &ks_f, &log(&|p| p.high_ratio())),
        ],
        rows,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_range_is_enforced() {
        assert!(matches!(prop51_fields(3), Err(LabError::Resolution(_))));
        assert!(matches!(prop52_fields(30), Err(LabError::Resolution(_))));
        assert!(matches!(
            prop51_sweep(&[], &Quadrature::default()),
            Err(LabError::Config(_))
        ));
    }

    #[test]
    fn supports_are_exact() {
        let (f1, fk) = prop51_fields(8).unwrap();
        assert_eq!(f1.value(2.17, 0.0), 0.0);
        assert_eq!(f1.value(2.0, 1.61), 0.0);
        assert!(f1.value(2.0, 0.0) > 0.0);
        let w = 1.6 * pow2(18);
        assert_eq!(fk.value(256.0, dispersion_symbol(256.0) + w * 1.001), 0.0);
        assert!(fk.value(256.0, dispersion_symbol(256.0) + w * 0.7) > 0.0);
        let (up, _, v) = prop52_fields(8).unwrap();
        assert_eq!(up.value(256.0 + 6.5, dispersion_symbol(262.5)), 0.0);
        assert_eq!(v.value(-2.0, 512.0 * 2.0), 0.0);
        assert_eq!(v.value(3.3, -512.0 * 3.3), 0.0);
        assert!(v.value(2.0, -512.0 * 2.0 + 1000.0) > 0.0);
    }

    #[test]
    fn resonance_remainders_stay_below_bound() {
        for k in [8, 10, 12] {
            let (a, b) = resonance_remainders(k, 41);
            // Both remainders are bounded by 3 C^2 = 7.68; the phases cancel
            // from size 2^{2k}, so allow roundoff on that scale.
            let tol = 1e-15 * pow2(2 * k);
            assert!(a <= 7.68 + tol && b <= 7.68 + tol, "k={k}: {a} {b}");
            assert!(a > 7.0 && b > 7.0);
        }
    }

    #[test]
    fn beta_identity_is_exact_for_even_k() {
        for k in [6, 8, 10, 12, 14] {
            let t = pow2(k).sqrt().recip() * beta(1, k).unwrap();
            assert_eq!(t, pow2(-k / 2) + 0.5);
        }
    }

    #[test]
    fn growth_fit_recovers_a_line() {
        let f = GrowthFit::fit("y ~ x", &[1.0, 2.0, 3.0], &[5.0, 7.0, 9.0]);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 3.0).abs() < 1e-14);
    }
}
