//! Closed-form space-time symbols and quadrature along modulation bands.
//!
//! The constructions behind the counterexamples and the bilinear witnesses
//! sit at `xi ~ 2^k` with modulation widths up to `2^{k+10}`, far beyond any
//! uniform lattice. Symbols here are functions of `(xi, tau)`; convolutions
//! are product trapezoid rules over the support of one factor, and `X_k`
//! norms are integrated band by band in the modulation variable, on the
//! part of each band that meets the support.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{beta, chi, covering_index, eta, psi, psi_second, PLATEAU, SUPPORT};
use crate::error::{LabError, Result};
use crate::norms::{BreakdownRow, NormReport, KP_MIN};
use crate::spectral::{dispersion_symbol, FrequencyGrid, SpaceTimeField, TimeGrid, C64};

/// Node counts of the product rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Quadrature {
    /// Least number of `xi_1` nodes in a convolution (more are used where
    /// the carriers cross steeply).
    pub inner_xi: usize,
    /// Nodes of the `tau_1` profile integral; the table has eight times as
    /// many entries.
    pub inner_tau: usize,
    /// Nodes per `xi`-interval of an integrated field.
    pub xi: usize,
    /// Nodes per modulation band piece.
    pub band: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            inner_xi: 64,
            inner_tau: 200,
            xi: 40,
            band: 40,
        }
    }
}

impl Quadrature {
    pub const MIN_NODES: usize = 8;

    pub fn validate(&self) -> Result<()> {
        let least = self
            .inner_xi
            .min(self.inner_tau)
            .min(self.xi)
            .min(self.band);
        if least < Self::MIN_NODES {
            return Err(LabError::Resolution(format!(
                "every quadrature needs at least {} nodes, got {self:?}",
                Self::MIN_NODES
            )));
        }
        Ok(())
    }
}

/// Frequency factor of a [`ShellBump`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XiProfile {
    /// `psi((xi - center) / width)`.
    Bump { center: f64, width: f64 },
    /// `eta_l(xi) 1_{[0, inf)}(xi)`, the indicator kept sharp.
    PositiveShell { l: i32 },
}

impl XiProfile {
    fn value(&self, xi: f64) -> f64 {
        match *self {
            XiProfile::Bump { center, width } => psi((xi - center) / width),
            XiProfile::PositiveShell { l } => {
                if xi < 0.0 {
                    0.0
                } else {
                    eta(l, xi)
                }
            }
        }
    }

    fn range(&self) -> (f64, f64) {
        match *self {
            XiProfile::Bump { center, width } => {
                (center - SUPPORT * width, center + SUPPORT * width)
            }
            XiProfile::PositiveShell { l } if l <= 0 => (0.0, SUPPORT),
            XiProfile::PositiveShell { l } => {
                let p = 2f64.powi(l);
                (p * PLATEAU / 2.0, p * SUPPORT)
            }
        }
    }
}

/// Curve `tau = c(xi)` that a [`ShellBump`] is centred on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Carrier {
    /// `c = 0`.
    Flat,
    /// `c = omega(xi)`.
    Dispersion,
    /// `c = slope * xi`.
    Linear { slope: f64 },
}

impl Carrier {
    fn at(&self, xi: f64) -> f64 {
        match *self {
            Carrier::Flat => 0.0,
            Carrier::Dispersion => dispersion_symbol(xi),
            Carrier::Linear { slope } => slope * xi,
        }
    }

    fn slope(&self, xi: f64) -> f64 {
        match *self {
            Carrier::Flat => 0.0,
            Carrier::Dispersion => -2.0 * xi.abs(),
            Carrier::Linear { slope } => slope,
        }
    }
}

/// `a X(xi) psi((tau - c(xi) - offset) / width)`, optionally with
/// `(I - d_tau^2)` applied in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellBump {
    pub amplitude: f64,
    pub xi: XiProfile,
    pub carrier: Carrier,
    pub offset: f64,
    pub width: f64,
    #[serde(default)]
    pub smoothed: bool,
}

impl ShellBump {
    pub fn new(amplitude: f64, xi: XiProfile, carrier: Carrier, width: f64) -> Result<Self> {
        let ok_xi = match xi {
            XiProfile::Bump { center, width } => {
                center.is_finite() && width > 0.0 && width.is_finite()
            }
            XiProfile::PositiveShell { .. } => true,
        };
        if !(ok_xi && amplitude.is_finite() && width > 0.0 && width.is_finite()) {
            return Err(LabError::Domain(format!(
                "bump needs finite amplitude and positive widths, got {amplitude}, {xi:?}, {width}"
            )));
        }
        Ok(Self {
            amplitude,
            xi,
            carrier,
            offset: 0.0,
            width,
            smoothed: false,
        })
    }

    /// Shifts the modulation profile by `offset`.
    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    /// The same symbol with `(I - d_tau^2)` applied.
    pub fn tau_smoothed(&self) -> Self {
        Self {
            smoothed: true,
            ..*self
        }
    }

    pub fn value(&self, xi: f64, tau: f64) -> f64 {
        let x = self.xi.value(xi);
        if x == 0.0 {
            return 0.0;
        }
        let r = (tau - self.carrier.at(xi) - self.offset) / self.width;
        self.amplitude * x * profile(r, self.width, self.smoothed)
    }

    pub fn xi_range(&self) -> (f64, f64) {
        self.xi.range()
    }

    /// Centre of the modulation profile at `xi`.
    pub fn center(&self, xi: f64) -> f64 {
        self.carrier.at(xi) + self.offset
    }

    /// Samples the symbol on a frequency-side lattice.
    pub fn sample(&self, xgrid: FrequencyGrid, tgrid: TimeGrid) -> SpaceTimeField {
        SpaceTimeField::from_frequency_fn(xgrid, tgrid, |xi, tau| {
            C64::new(self.value(xi, tau), 0.0)
        })
    }
}

/// A real function of `(xi, tau)` with a described support.
pub trait BandedField: Sync {
    /// Disjoint intervals covering the `xi`-support.
    fn xi_intervals(&self) -> Vec<(f64, f64)>;
    /// An interval containing the `tau`-support at `xi`, if not empty.
    fn tau_hull(&self, xi: f64) -> Option<(f64, f64)>;
    fn value(&self, xi: f64, tau: f64) -> f64;
}

impl BandedField for ShellBump {
    fn xi_intervals(&self) -> Vec<(f64, f64)> {
        vec![self.xi_range()]
    }

    fn tau_hull(&self, xi: f64) -> Option<(f64, f64)> {
        if self.xi.value(xi) == 0.0 {
            return None;
        }
        let c = self.center(xi);
        Some((c - SUPPORT * self.width, c + SUPPORT * self.width))
    }

    fn value(&self, xi: f64, tau: f64) -> f64 {
        ShellBump::value(self, xi, tau)
    }
}

/// Trapezoid nodes and weights on `[a, b]`.
fn trapezoid(a: f64, b: f64, n: usize) -> impl Iterator<Item = (f64, f64)> {
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(move |i| {
        let w = if i == 0 || i == n - 1 { h / 2.0 } else { h };
        (a + h * i as f64, w)
    })
}

/// Modulation profile `p((tau - c) / w)` of a [`ShellBump`].
fn profile(r: f64, width: f64, smoothed: bool) -> f64 {
    if smoothed {
        psi(r) - psi_second(r) / (width * width)
    } else {
        psi(r)
    }
}

/// `P(z) = int p_a(t / w_a) p_b((z - t) / w_b) dt` on a uniform table,
/// read back with cubic (Catmull-Rom) interpolation.
struct ProfileTable {
    half: f64,
    step: f64,
    values: Vec<f64>,
}

impl ProfileTable {
    fn new(a: &ShellBump, b: &ShellBump, nodes: usize) -> Self {
        let (ha, hb) = (SUPPORT * a.width, SUPPORT * b.width);
        let half = ha + hb;
        let n = 8 * nodes;
        let step = 2.0 * half / n as f64;
        let values = (0..=n)
            .map(|i| {
                let z = -half + step * i as f64;
                let (lo, hi) = ((-ha).max(z - hb), ha.min(z + hb));
                if hi <= lo {
                    return 0.0;
                }
                trapezoid(lo, hi, nodes)
                    .map(|(t, w)| {
                        w * profile(t / a.width, a.width, a.smoothed)
                            * profile((z - t) / b.width, b.width, b.smoothed)
                    })
                    .sum()
            })
            .collect();
        Self { half, step, values }
    }

    fn at(&self, z: f64) -> f64 {
        let u = (z + self.half) / self.step;
        let last = self.values.len() - 1;
        if !(u > 0.0 && u < last as f64) {
            return 0.0;
        }
        let i = u.floor() as usize;
        let t = u - i as f64;
        let get = |m: isize| {
            let m = m.clamp(0, last as isize) as usize;
            self.values[m]
        };
        let (p0, p1, p2, p3) = (
            get(i as isize - 1),
            get(i as isize),
            get(i as isize + 1),
            get(i as isize + 2),
        );
        p1 + 0.5
            * t
            * (p2 - p0
                + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)))
    }
}

/// `(a * b)(xi, tau) = int a(xi_1, tau_1) b(xi - xi_1, tau - tau_1)`.
///
/// The `tau_1` integral depends only on `tau - c_a(xi_1) - c_b(xi - xi_1)`
/// and is tabulated once; the `xi_1` integral runs over the overlap of the
/// two frequency supports with enough nodes to resolve the ridge left by
/// transverse carriers.
pub struct Convolution<'a> {
    inner: ShellBump,
    outer: &'a ShellBump,
    table: ProfileTable,
    min_nodes: usize,
    xi_range: (f64, f64),
}

/// Nodes per table width across the `xi_1` ridge.
const RIDGE_NODES: f64 = 32.0;
const MAX_RIDGE_NODES: usize = 1 << 18;

impl<'a> Convolution<'a> {
    pub fn new(inner: &ShellBump, outer: &'a ShellBump, q: &Quadrature) -> Result<Self> {
        q.validate()?;
        let (a, b) = inner.xi_range();
        let (c, d) = outer.xi_range();
        let base = ShellBump {
            amplitude: 1.0,
            offset: 0.0,
            ..*inner
        };
        let table = ProfileTable::new(
            &base,
            &ShellBump {
                amplitude: 1.0,
                offset: 0.0,
                ..*outer
            },
            q.inner_tau,
        );
        Ok(Self {
            inner: *inner,
            outer,
            table,
            min_nodes: q.inner_xi,
            xi_range: (a + c, b + d),
        })
    }

    /// Trapezoid nodes in `xi_1` for output frequency `xi`, or `None` when
    /// the supports do not overlap.
    fn xi1_nodes(&self, xi: f64) -> Option<impl Iterator<Item = (f64, f64)>> {
        let (a, b) = self.inner.xi_range();
        let (c, d) = self.outer.xi_range();
        let (lo, hi) = (a.max(xi - d), b.min(xi - c));
        if hi <= lo {
            return None;
        }
        // The carrier mismatch is piecewise linear in xi_1 with kinks where
        // either frequency vanishes.
        let slope =
            |x1: f64| (self.inner.carrier.slope(x1) - self.outer.carrier.slope(xi - x1)).abs();
        let mut steep = slope(lo).max(slope(hi));
        for kink in [0.0, xi] {
            if kink > lo && kink < hi {
                steep = steep.max(slope(kink));
            }
        }
        let ridge = 2.0 * self.table.half / SUPPORT;
        let need = (RIDGE_NODES * (hi - lo) * steep / ridge).ceil() as usize;
        Some(trapezoid(
            lo,
            hi,
            need.clamp(self.min_nodes, MAX_RIDGE_NODES),
        ))
    }

    /// Phase `c_a(xi_1) + c_b(xi - xi_1)` including both offsets.
    fn phase(&self, xi: f64, x1: f64) -> f64 {
        self.inner.center(x1) + self.outer.center(xi - x1)
    }
}

impl BandedField for Convolution<'_> {
    fn xi_intervals(&self) -> Vec<(f64, f64)> {
        vec![self.xi_range]
    }

    fn tau_hull(&self, xi: f64) -> Option<(f64, f64)> {
        let nodes: Vec<f64> = self.xi1_nodes(xi)?.map(|(x1, _)| x1).collect();
        let phases: Vec<f64> = nodes.iter().map(|&x1| self.phase(xi, x1)).collect();
        let lo = phases.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = phases.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Between nodes the phase moves by at most the largest jump.
        let jump = phases
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max);
        let pad = self.table.half + jump;
        Some((lo - pad, hi + pad))
    }

    fn value(&self, xi: f64, tau: f64) -> f64 {
        let Some(nodes) = self.xi1_nodes(xi) else {
            return 0.0;
        };
        let mut acc = 0.0;
        for (x1, w) in nodes {
            let p = self.table.at(tau - self.phase(xi, x1));
            if p == 0.0 {
                continue;
            }
            acc += w * self.inner.xi.value(x1) * self.outer.xi.value(xi - x1) * p;
        }
        acc * self.inner.amplitude * self.outer.amplitude
    }
}

/// `w(xi, tau) F(xi, tau)` restricted to the `xi`-intervals `cut`.
pub struct Weighted<'a> {
    base: &'a dyn BandedField,
    weight: Box<dyn Fn(f64, f64) -> f64 + Sync + 'a>,
    cut: Vec<(f64, f64)>,
}

impl<'a> Weighted<'a> {
    pub fn new(
        base: &'a dyn BandedField,
        cut: Vec<(f64, f64)>,
        weight: impl Fn(f64, f64) -> f64 + Sync + 'a,
    ) -> Self {
        Self {
            base,
            weight: Box::new(weight),
            cut,
        }
    }

    /// `|xi|^p eta_m(xi) |A_m(xi, tau)|^{-e} F`: the shell-`m` piece used by
    /// the output side of the bilinear estimates (`p` = 1 for a derivative,
    /// `e` = 1 for the `N`-type weight).
    pub fn shell_piece(
        base: &'a dyn BandedField,
        m: i32,
        derivative: bool,
        inverse_weight: bool,
    ) -> Self {
        Self::new(base, eta_support(m), move |xi, tau| {
            let mut w = eta(m, xi);
            if derivative {
                w *= xi.abs();
            }
            if inverse_weight {
                w /= weight_modulus(m, xi, tau);
            }
            w
        })
    }
}

impl BandedField for Weighted<'_> {
    fn xi_intervals(&self) -> Vec<(f64, f64)> {
        intersect(&self.base.xi_intervals(), &self.cut)
    }

    fn tau_hull(&self, xi: f64) -> Option<(f64, f64)> {
        self.base.tau_hull(xi)
    }

    fn value(&self, xi: f64, tau: f64) -> f64 {
        let w = (self.weight)(xi, tau);
        if w == 0.0 {
            0.0
        } else {
            w * self.base.value(xi, tau)
        }
    }
}

/// `|A_m(xi, tau)|`.
pub fn weight_modulus(m: i32, xi: f64, tau: f64) -> f64 {
    let s = if m >= 1 {
        tau - dispersion_symbol(xi)
    } else {
        tau
    };
    s.hypot(1.0)
}

/// Support of `eta_m` as disjoint intervals.
pub fn eta_support(m: i32) -> Vec<(f64, f64)> {
    if m <= 0 {
        return vec![(-SUPPORT, SUPPORT)];
    }
    let p = 2f64.powi(m);
    let (lo, hi) = (p * PLATEAU / 2.0, p * SUPPORT);
    vec![(-hi, -lo), (lo, hi)]
}

fn intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &(a0, a1) in a {
        for &(b0, b1) in b {
            let (lo, hi) = (a0.max(b0), a1.min(b1));
            if hi > lo {
                out.push((lo, hi));
            }
        }
    }
    out
}

/// Pieces of the modulation band `I~_j` as seen by `eta_j`.
fn band_pieces(j: i32) -> Vec<(f64, f64)> {
    eta_support(j)
}

/// `X_k` norm of a banded field, `k >= 0`. For `k = 0` the low-frequency
/// sum over `k'` runs down to [`KP_MIN`].
pub fn banded_xk_norm(f: &dyn BandedField, k: i32, q: &Quadrature) -> Result<NormReport> {
    q.validate()?;
    if k < 0 {
        return Err(LabError::Domain(format!(
            "shell index must be >= 0, got {k}"
        )));
    }
    let intervals = f.xi_intervals();
    let (lo, hi) = if k == 0 {
        (0.0, 2.0)
    } else {
        (2f64.powi(k - 1), 2f64.powi(k + 1))
    };
    for &(a, b) in &intervals {
        let inside = if k == 0 {
            a >= -hi && b <= hi
        } else {
            (a >= lo && b <= hi) || (a >= -hi && b <= -lo)
        };
        if !inside {
            return Err(LabError::Domain(format!(
                "support [{a:.4}, {b:.4}] leaves shell {k} ([{lo}, {hi}] in |xi|)"
            )));
        }
    }
    let nodes: Vec<(f64, f64, (f64, f64))> = intervals
        .iter()
        .flat_map(|&(a, b)| trapezoid(a, b, q.xi))
        .filter_map(|(xi, w)| {
            let (t0, t1) = f.tau_hull(xi)?;
            let c = if k >= 1 { dispersion_symbol(xi) } else { 0.0 };
            Some((xi, w, (t0 - c, t1 - c)))
        })
        .collect();
    let s_max = nodes
        .iter()
        .map(|(_, _, (a, b))| a.abs().max(b.abs()))
        .fold(0.0, f64::max);
    let j_max = covering_index(s_max) + 1;
    let n_j = j_max as usize + 1;
    // For k = 0 the slots are (k', j) with k' in [KP_MIN, 1].
    let n_kp = if k == 0 { (2 - KP_MIN) as usize } else { 1 };
    let per_node: Vec<Vec<f64>> = nodes
        .par_iter()
        .map(|&(xi, wx, (s0, s1))| {
            let mut m = vec![0.0; n_j * n_kp];
            let lows: Vec<(usize, f64)> = if k == 0 {
                (KP_MIN..=1)
                    .filter_map(|kp| {
                        let c = chi(kp, xi);
                        (c != 0.0).then_some(((kp - KP_MIN) as usize, c * c))
                    })
                    .collect()
            } else {
                vec![(0, 1.0)]
            };
            if lows.is_empty() {
                return m;
            }
            let c = if k >= 1 { dispersion_symbol(xi) } else { 0.0 };
            for j in 0..=j_max {
                let mut acc = 0.0;
                for (b0, b1) in band_pieces(j) {
                    let (a, b) = (b0.max(s0), b1.min(s1));
                    if b <= a {
                        continue;
                    }
                    for (s, ws) in trapezoid(a, b, q.band) {
                        let e = eta(j, s);
                        if e != 0.0 {
                            let v = f.value(xi, c + s);
                            acc += ws * e * e * v * v;
                        }
                    }
                }
                for &(slot, c2) in &lows {
                    m[slot * n_j + j as usize] += wx * c2 * acc;
                }
            }
            m
        })
        .collect();
    let mut mass = vec![0.0; n_j * n_kp];
    for m in &per_node {
        for (t, v) in mass.iter_mut().zip(m) {
            *t += v;
        }
    }
    let mut band_values = vec![0.0; n_j];
    for slot in 0..n_kp {
        for j in 0..n_j {
            let m = mass[slot * n_j + j];
            if m <= 0.0 {
                continue;
            }
            let w = if k == 0 {
                let kp = KP_MIN + slot as i32;
                2f64.powf(j as f64 - f64::from(kp) / 2.0)
            } else {
                2f64.powf(j as f64 / 2.0) * beta(k, j as i32)?
            };
            band_values[j] += w * m.sqrt();
        }
    }
    let rows = band_values
        .iter()
        .enumerate()
        .map(|(j, v)| BreakdownRow::band(j as i32, *v))
        .collect();
    Ok(NormReport::new(
        format!("X_{k} (banded)"),
        band_values.iter().sum(),
        rows,
    ))
}

/// `F^sigma` (or `N^sigma` when `inverse_weight`) of a symbol, shell by shell,
/// with `Z_m` replaced by `X_m`. For `m <= 99` the two agree; for `m = 0` the
/// value is an upper bound (the splitting with empty `Y_0` part).
/// `(I - d_tau^2)` is applied for the `F`-type norm.
pub fn banded_space_norm(
    u: &ShellBump,
    sigma: f64,
    inverse_weight: bool,
    q: &Quadrature,
) -> Result<NormReport> {
    let base = if inverse_weight { *u } else { u.tau_smoothed() };
    let (a, b) = u.xi_range();
    let top = covering_index(a.abs().max(b.abs()));
    let mut rows = Vec::new();
    let mut sum = 0.0;
    for m in 0..=top {
        if intersect(&[(a, b)], &eta_support(m)).is_empty() {
            continue;
        }
        let piece = Weighted::shell_piece(&base, m, false, inverse_weight);
        let x = banded_xk_norm(&piece, m, q)?.value;
        let term = 2f64.powf(sigma * f64::from(m)) * x;
        sum += term * term;
        rows.push(BreakdownRow::shell(m, term));
    }
    let name = if inverse_weight { "N" } else { "F" };
    Ok(NormReport::new(
        format!("{name}^{sigma} (banded)"),
        sum.sqrt(),
        rows,
    ))
}

/// Minimum of `g` over `xi in [x0, x1]`, `s in [s0, s1]` on an `n x n` grid,
/// where `tau = c(xi) + s`. Returns the minimum and its location `(xi, tau)`.
pub fn region_min(
    g: &(dyn Fn(f64, f64) -> f64 + Sync),
    xi: (f64, f64),
    s: (f64, f64),
    center: &(dyn Fn(f64) -> f64 + Sync),
    n: usize,
) -> (f64, (f64, f64)) {
    let pts: Vec<(f64, f64)> = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .map(|(a, b)| {
            let x = xi.0 + (xi.1 - xi.0) * a as f64 / (n - 1) as f64;
            let r = s.0 + (s.1 - s.0) * b as f64 / (n - 1) as f64;
            (x, center(x) + r)
        })
        .collect();
    let vals: Vec<f64> = pts.par_iter().map(|&(x, t)| g(x, t)).collect();
    let mut best = (f64::INFINITY, (f64::NAN, f64::NAN));
    for (v, p) in vals.into_iter().zip(pts) {
        if v < best.0 {
            best = (v, p);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_band_bump(k: i32, j: i32) -> ShellBump {
        // Modulation profile inside the plateau of eta_j.
        let center = 2f64.powi(k);
        let (offset, width) = if j == 0 {
            (0.0, 0.5)
        } else {
            (1.1 * 2f64.powi(j), 0.08 * 2f64.powi(j))
        };
        ShellBump::new(
            1.0,
            XiProfile::Bump { center, width: 1.0 },
            Carrier::Dispersion,
            width,
        )
        .unwrap()
        .with_offset(offset)
    }

    fn plain_l2(f: &ShellBump) -> f64 {
        let (a, b) = f.xi_range();
        let mut m = 0.0;
        for (xi, wx) in trapezoid(a, b, 400) {
            let c = f.center(xi);
            for (t, wt) in trapezoid(c - 1.6 * f.width, c + 1.6 * f.width, 400) {
                m += wx * wt * f.value(xi, t).powi(2);
            }
        }
        m.sqrt()
    }

    #[test]
    fn single_band_norm_matches_weight_times_l2() {
        let coarse = Quadrature::default();
        let fine = Quadrature {
            xi: 200,
            band: 200,
            ..coarse
        };
        for (k, j) in [(4, 0), (4, 3), (6, 9)] {
            let f = unit_band_bump(k, j);
            let expect = 2f64.powf(f64::from(j) / 2.0) * beta(k, j).unwrap() * plain_l2(&f);
            let x = banded_xk_norm(&f, k, &coarse).unwrap().value;
            assert!(
                (x - expect).abs() < 1e-3 * expect,
                "k={k} j={j}: {x} vs {expect}"
            );
            let x = banded_xk_norm(&f, k, &fine).unwrap().value;
            assert!(
                (x - expect).abs() < 1e-6 * expect,
                "k={k} j={j}: {x} vs {expect}"
            );
        }
    }

    /// Direct product rule over the full support of `a`.
    fn brute_convolution(a: &ShellBump, b: &ShellBump, xi: f64, tau: f64, n: usize) -> f64 {
        let (x0, x1) = a.xi_range();
        let mut acc = 0.0;
        for (y, wy) in trapezoid(x0, x1, n) {
            let c = a.center(y);
            for (t, wt) in trapezoid(c - SUPPORT * a.width, c + SUPPORT * a.width, n) {
                acc += wy * wt * a.value(y, t) * b.value(xi - y, tau - t);
            }
        }
        acc
    }

    #[test]
    fn convolution_matches_direct_product_rule() {
        let q = Quadrature::default();
        let a = ShellBump::new(
            1.0,
            XiProfile::Bump {
                center: 2.0,
                width: 0.1,
            },
            Carrier::Flat,
            1.0,
        )
        .unwrap();
        let b = unit_band_bump(5, 2);
        let conv = Convolution::new(&a, &b, &q).unwrap();
        for &(xi, s) in &[(34.0, 3.0), (33.5, -1.0), (35.1, 4.5)] {
            let tau = dispersion_symbol(xi) + s;
            let (v, r) = (
                conv.value(xi, tau),
                brute_convolution(&a, &b, xi, tau, 1500),
            );
            assert!((v - r).abs() < 1e-6 * (1.0 + r.abs()), "{v} vs {r}");
        }
        assert!(conv.tau_hull(0.0).is_none());
    }

    #[test]
    fn convolution_resolves_transverse_carriers() {
        // Thin flat bump against a thin dispersive one: the xi_1 integrand
        // is a ridge of width about 2^-6.
        let q = Quadrature::default();
        let low = ShellBump::new(
            1.0,
            XiProfile::Bump {
                center: 0.5,
                width: 0.2,
            },
            Carrier::Flat,
            0.5,
        )
        .unwrap();
        let high = unit_band_bump(5, 0);
        let conv = Convolution::new(&low, &high, &q).unwrap();
        let xi = 32.6;
        let mut seen = 0.0f64;
        for s in [10.0, 20.0, 30.0, 40.0] {
            let tau = dispersion_symbol(xi) + s;
            let (v, r) = (
                conv.value(xi, tau),
                brute_convolution(&low, &high, xi, tau, 4000),
            );
            seen = seen.max(r.abs());
            assert!((v - r).abs() < 1e-5 * (1e-3 + r.abs()), "s={s}: {v} vs {r}");
            let (lo, hi) = conv.tau_hull(xi).unwrap();
            assert!(r == 0.0 || (lo..=hi).contains(&tau));
        }
        assert!(seen > 1e-3, "probe points miss the support");
    }

    #[test]
    fn support_checks() {
        let q = Quadrature::default();
        let f = unit_band_bump(4, 0);
        assert!(banded_xk_norm(&f, 6, &q).is_err());
        assert!(banded_xk_norm(&f, 4, &q).is_ok());
        let bad = Quadrature { band: 3, ..q };
        assert!(matches!(
            banded_xk_norm(&f, 4, &bad),
            Err(LabError::Resolution(_))
        ));
    }

    #[test]
    fn low_shell_uses_time_modulation() {
        let q = Quadrature {
            xi: 200,
            band: 200,
            ..Quadrature::default()
        };
        // xi where chi_0 = 1, tau in the j = 0 band.
        let f = ShellBump::new(
            1.0,
            XiProfile::Bump {
                center: 1.0,
                width: 0.1,
            },
            Carrier::Flat,
            0.5,
        )
        .unwrap();
        let x = banded_xk_norm(&f, 0, &q).unwrap().value;
        let l2 = plain_l2(&f);
        // Only the (k' = 0, j = 0) cell.
        assert!((x - l2).abs() < 1e-6 * l2, "{x} vs {l2}");
    }

    #[test]
    fn smoothed_symbol_is_one_minus_second_derivative() {
        let f = unit_band_bump(3, 0);
        let g = f.tau_smoothed();
        let xi = 8.0;
        let c = f.center(xi);
        let h = 1e-5;
        for r in [0.0, 0.6, 0.7, 0.75, 0.79] {
            let t = c + r;
            let fd = (f.value(xi, t + h) - 2.0 * f.value(xi, t) + f.value(xi, t - h)) / (h * h);
            let (a, b) = (g.value(xi, t), f.value(xi, t) - fd);
            assert!((a - b).abs() < 1e-3 * (1.0 + a.abs()), "r={r}: {a} vs {b}");
        }
    }
}
