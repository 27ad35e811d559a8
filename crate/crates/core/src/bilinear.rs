//! Measured constants for the dyadic bilinear estimates, and the support
//! scan behind the modulation trichotomy.
//!
//! Inputs are closed-form [`ShellBump`]s. On both sides `Z` norms are
//! replaced by `X` norms: for shells `1..=99` the two coincide, and for the
//! low-frequency factor `X_0` bounds `Z_0` from above, so the reported
//! ratio never overstates the constant on that factor.

use serde::{Deserialize, Serialize};

use crate::banded::{
    banded_space_norm, banded_xk_norm, eta_support, BandedField, Carrier, Convolution, Quadrature,
    ShellBump, Weighted, XiProfile,
};
use crate::dyadic::{beta, covering_index};
use crate::error::{LabError, Result};
use crate::spectral::dispersion_symbol;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BilinearKind {
    /// High times low frequency, `f_{k2} * f_0` with `|k2 - k| <= 2`.
    Lemma33,
    /// High times the intermediate shells `1 <= k1 <= k - 10`.
    Lemma34,
    /// Comparable shells, `max(k, k1, k2) <= min(k, k1, k2) + 30`.
    Lemma35,
    /// High times high into low, `k1, k2 >= k + 10`, `|k1 - k2| <= 2`.
    Lemma36,
    /// Single-band pieces `D_{k1,j1} * D_{k2,j2}`, `k1 <= 1`, per output band.
    Lemma37,
    /// `N^sigma(d_x(u v))` against `F^sigma F^0 + F^0 F^sigma`.
    Prop38,
}

impl BilinearKind {
    pub const ALL: [BilinearKind; 6] = [
        BilinearKind::Lemma33,
        BilinearKind::Lemma34,
        BilinearKind::Lemma35,
        BilinearKind::Lemma36,
        BilinearKind::Lemma37,
        BilinearKind::Prop38,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BilinearKind::Lemma33 => "high-low",
            BilinearKind::Lemma34 => "high-intermediate",
            BilinearKind::Lemma35 => "comparable",
            BilinearKind::Lemma36 => "high-high-low",
            BilinearKind::Lemma37 => "single-band",
            BilinearKind::Prop38 => "product",
        }
    }
}

/// Factors and shell labels of one witness evaluation. `f` carries shell
/// `k1` (the low factor where there is one), `g` carries `k2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearInputs {
    pub k: i32,
    pub k1: i32,
    pub k2: i32,
    pub f: ShellBump,
    pub g: ShellBump,
    /// Regularity index, used by [`BilinearKind::Prop38`] only.
    #[serde(default)]
    pub sigma: f64,
}

/// Support check of a single-band witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSupport {
    pub j1: i32,
    pub j2: i32,
    /// Output bands `j` where the convolution has mass.
    pub bands: Vec<i32>,
    /// Those of `bands` that break the trichotomy.
    pub violations: Vec<i32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearWitness {
    pub kind: BilinearKind,
    pub k: i32,
    pub k1: i32,
    pub k2: i32,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, 0 when both vanish.
    pub ratio: f64,
    /// `ratio 2^{k/4}` for [`BilinearKind::Lemma36`], `ratio` otherwise.
    pub scaled_ratio: f64,
    /// Nonzero left side against a vanishing right side.
    pub violation: bool,
    pub support: Option<BandSupport>,
}

fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

fn hypothesis(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(LabError::Hypothesis(what()))
    }
}

/// Checks the shell relations each estimate assumes. The large-`k`
/// thresholds of the statements are not imposed.
pub fn check_hypotheses(kind: BilinearKind, inputs: &BilinearInputs) -> Result<()> {
    let BilinearInputs { k, k1, k2, .. } = *inputs;
    let near = |a: i32, b: i32| (a - b).abs() <= 2;
    match kind {
        BilinearKind::Lemma33 => {
            hypothesis(k >= 1, || format!("output shell k = {k} must be >= 1"))?;
            hypothesis(k1 == 0, || {
                format!("low factor must sit in shell 0, got k1 = {k1}")
            })?;
            hypothesis(near(k2, k), || {
                format!(
                    "k2 = {k2} must lie in [k - 2, k + 2] = [{}, {}]",
                    k - 2,
                    k + 2
                )
            })
        }
        BilinearKind::Lemma34 => {
            hypothesis((1..=k - 10).contains(&k1), || {
                format!("k1 = {k1} must lie in [1, k - 10] = [1, {}]", k - 10)
            })?;
            hypothesis(near(k2, k), || {
                format!(
                    "k2 = {k2} must lie in [k - 2, k + 2] = [{}, {}]",
                    k - 2,
                    k + 2
                )
            })
        }
        BilinearKind::Lemma35 => {
            hypothesis(k >= 0 && k1 >= 0 && k2 >= 0, || {
                format!("shells must be >= 0, got ({k}, {k1}, {k2})")
            })?;
            let (lo, hi) = (k.min(k1).min(k2), k.max(k1).max(k2));
            hypothesis(hi <= lo + 30, || {
                format!("max(k, k1, k2) = {hi} exceeds min + 30 = {}", lo + 30)
            })
        }
        BilinearKind::Lemma36 => {
            hypothesis(k >= 0, || format!("output shell k = {k} must be >= 0"))?;
            hypothesis(k1 >= k + 10 && k2 >= k + 10, || {
                format!("k1 = {k1}, k2 = {k2} must both be >= k + 10 = {}", k + 10)
            })?;
            hypothesis(near(k1, k2), || {
                format!("|k1 - k2| = {} must be <= 2", (k1 - k2).abs())
            })
        }
        BilinearKind::Lemma37 => {
            hypothesis(k >= 1, || format!("output shell k = {k} must be >= 1"))?;
            hypothesis(k1 <= 1, || format!("k1 = {k1} must be <= 1"))?;
            hypothesis(near(k2, k), || {
                format!(
                    "k2 = {k2} must lie in [k - 2, k + 2] = [{}, {}]",
                    k - 2,
                    k + 2
                )
            })
        }
        BilinearKind::Prop38 => hypothesis(inputs.sigma >= 0.0, || {
            format!("sigma = {} must be >= 0", inputs.sigma)
        }),
    }
}

/// A unit bump in `D_{k,j}`: frequency centre `center`, modulation profile
/// inside the plateau of `eta_j` (measured from `omega` for `k >= 1`, from
/// `0` for `k <= 0`).
pub fn band_bump(k: i32, j: i32, center: f64) -> Result<ShellBump> {
    if j < 0 {
        return Err(LabError::Domain(format!(
            "band index must be >= 0, got {j}"
        )));
    }
    let width = (0.25 * pow2(k)).min(1.0);
    let carrier = if k >= 1 {
        Carrier::Dispersion
    } else {
        Carrier::Flat
    };
    let (offset, w) = if j == 0 {
        (0.0, 0.5)
    } else {
        (1.1 * pow2(j), 0.08 * pow2(j))
    };
    Ok(ShellBump::new(1.0, XiProfile::Bump { center, width }, carrier, w)?.with_offset(offset))
}

/// `||f||_{L^2}` of a bump by a product rule on its support.
pub fn bump_l2(f: &ShellBump, q: &Quadrature) -> f64 {
    let (a, b) = f.xi_range();
    let n = q.xi.max(q.band) * 4;
    let step = |lo: f64, hi: f64| (hi - lo) / (n - 1) as f64;
    let hx = step(a, b);
    let mut m = 0.0;
    for i in 0..n {
        let xi = a + hx * i as f64;
        let wx = if i == 0 || i == n - 1 { hx / 2.0 } else { hx };
        let Some((t0, t1)) = f.tau_hull(xi) else {
            continue;
        };
        let ht = step(t0, t1);
        for l in 0..n {
            let wt = if l == 0 || l == n - 1 { ht / 2.0 } else { ht };
            m += wx * wt * f.value(xi, t0 + ht * l as f64).powi(2);
        }
    }
    m.sqrt()
}

/// The band `j` with `D_{k,j}` containing the support of `f`, if any.
pub fn band_of(f: &ShellBump, k: i32) -> Option<i32> {
    let (a, b) = f.xi_range();
    let n = 65;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let xi = a + (b - a) * i as f64 / (n - 1) as f64;
        if let Some((t0, t1)) = f.tau_hull(xi) {
            let c = if k >= 1 { dispersion_symbol(xi) } else { 0.0 };
            lo = lo.min(t0 - c);
            hi = hi.max(t1 - c);
        }
    }
    if !(lo <= hi) {
        return None;
    }
    (0..=covering_index(lo.abs().max(hi.abs())) + 1).find(|&j| band_contains(j, lo, hi))
}

fn band_contains(j: i32, lo: f64, hi: f64) -> bool {
    if j == 0 {
        return lo >= -2.0 && hi <= 2.0;
    }
    let (a, b) = (pow2(j - 1), pow2(j + 1));
    (lo >= a && hi <= b) || (lo >= -b && hi <= -a)
}

fn in_shell_range(k: i32, (a, b): (f64, f64)) -> bool {
    let (lo, hi) = (pow2(k - 1), pow2(k + 1));
    (a >= lo && b <= hi) || (a >= -hi && b <= -lo)
}

/// Whether `max(j, j1, j2)` lies within 10 of `k + k1`, or above it with
/// the median within 10 of the maximum.
pub fn trichotomy_holds(k: i32, k1: i32, j: i32, j1: i32, j2: i32) -> bool {
    let mut v = [j, j1, j2];
    v.sort_unstable();
    let (med, max) = (v[1], v[2]);
    let base = k + k1;
    (base - 10..=base + 10).contains(&max) || (max >= base + 10 && max - med <= 10)
}

/// Evaluates one witness.
pub fn bilinear_witness(
    kind: BilinearKind,
    inputs: &BilinearInputs,
    q: &Quadrature,
) -> Result<BilinearWitness> {
    check_hypotheses(kind, inputs)?;
    let BilinearInputs {
        k,
        k1,
        k2,
        ref f,
        ref g,
        sigma,
    } = *inputs;
    let mut support = None;
    let (lhs, rhs) = match kind {
        BilinearKind::Lemma33 | BilinearKind::Lemma34 => {
            let conv = Convolution::new(f, g, q)?;
            let piece = Weighted::shell_piece(&conv, k, false, true);
            let lhs = pow2(k) * banded_xk_norm(&piece, k, q)?.value;
            let low = if kind == BilinearKind::Lemma34 {
                f.tau_smoothed()
            } else {
                *f
            };
            (
                lhs,
                banded_xk_norm(&low, k1, q)?.value * banded_xk_norm(g, k2, q)?.value,
            )
        }
        BilinearKind::Lemma35 | BilinearKind::Lemma36 => {
            let conv = Convolution::new(f, g, q)?;
            let piece = Weighted::shell_piece(&conv, k, true, true);
            let lhs = banded_xk_norm(&piece, k, q)?.value;
            (
                lhs,
                banded_xk_norm(f, k1, q)?.value * banded_xk_norm(g, k2, q)?.value,
            )
        }
        BilinearKind::Lemma37 => {
            hypothesis(in_shell_range(k1, f.xi_range()), || {
                format!("first factor leaves I_{k1}")
            })?;
            hypothesis(in_shell_range(k2, g.xi_range()), || {
                format!("second factor leaves I_{k2}")
            })?;
            let j1 = band_of(f, k1).ok_or_else(|| {
                LabError::Hypothesis(format!("first factor is not inside a single D_{{{k1},j}}"))
            })?;
            let j2 = band_of(g, k2).ok_or_else(|| {
                LabError::Hypothesis(format!("second factor is not inside a single D_{{{k2},j}}"))
            })?;
            let conv = Convolution::new(f, g, q)?;
            let piece = Weighted::shell_piece(&conv, k, false, true);
            let report = banded_xk_norm(&piece, k, q)?;
            let per_band: Vec<(i32, f64)> = report
                .breakdown
                .iter()
                .filter_map(|r| Some((r.j?, pow2(k) * r.value)))
                .collect();
            let bands: Vec<i32> = per_band
                .iter()
                .filter(|(_, v)| *v > 0.0)
                .map(|(j, _)| *j)
                .collect();
            let violations = bands
                .iter()
                .copied()
                .filter(|&j| !trichotomy_holds(k, k1, j, j1, j2))
                .collect();
            support = Some(BandSupport {
                j1,
                j2,
                bands,
                violations,
            });
            let rhs = (pow2(k1).sqrt() + pow2(-k).sqrt()).recip()
                * pow2(j1)
                * bump_l2(f, q)
                * pow2(j2).sqrt()
                * beta(k2, j2)?
                * bump_l2(g, q);
            // The bound holds band by band; report the worst band.
            let lhs = per_band.iter().map(|(_, v)| *v).fold(0.0, f64::max);
            (lhs, rhs)
        }
        BilinearKind::Prop38 => {
            let conv = Convolution::new(f, g, q)?;
            let (a, b) = conv.xi_intervals()[0];
            let top = covering_index(a.abs().max(b.abs()));
            let mut sum = 0.0;
            for m in 0..=top {
                let overlaps = eta_support(m).iter().any(|&(c, d)| c.max(a) < d.min(b));
                if !overlaps {
                    continue;
                }
                let piece = Weighted::shell_piece(&conv, m, true, true);
                let x = 2f64.powf(sigma * f64::from(m)) * banded_xk_norm(&piece, m, q)?.value;
                sum += x * x;
            }
            let norm = |u: &ShellBump, s: f64| banded_space_norm(u, s, false, q).map(|r| r.value);
            let rhs = norm(f, sigma)? * norm(g, 0.0)? + norm(f, 0.0)? * norm(g, sigma)?;
            (sum.sqrt(), rhs)
        }
    };
    let violation = rhs == 0.0 && lhs != 0.0;
    let ratio = if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    };
    let scaled_ratio = if kind == BilinearKind::Lemma36 {
        ratio * pow2(k).powf(0.25)
    } else {
        ratio
    };
    Ok(BilinearWitness {
        kind,
        k,
        k1,
        k2,
        lhs,
        rhs,
        ratio,
        scaled_ratio,
        violation,
        support,
    })
}

/// The standard inputs of `kind` at output shell `k`: unit band bumps over
/// a few modulation bands of each factor.
pub fn standard_family(kind: BilinearKind, k: i32) -> Result<Vec<BilinearInputs>> {
    let bands = |top: i32| -> Vec<i32> {
        let mut v = vec![0, top / 2, top];
        v.dedup();
        v
    };
    let mut out = Vec::new();
    let mut push = |k1: i32, k2: i32, f: ShellBump, g: ShellBump| {
        out.push(BilinearInputs {
            k,
            k1,
            k2,
            f,
            g,
            sigma: 0.0,
        });
    };
    match kind {
        BilinearKind::Lemma33 => {
            for j1 in bands(k) {
                for j2 in bands(k) {
                    push(0, k, band_bump(0, j1, 1.0)?, band_bump(k, j2, pow2(k))?);
                }
            }
        }
        BilinearKind::Lemma34 => {
            for k1 in [1, k - 10] {
                for j1 in bands(k) {
                    for j2 in bands(k) {
                        push(
                            k1,
                            k,
                            band_bump(k1, j1, pow2(k1))?,
                            band_bump(k, j2, pow2(k))?,
                        );
                    }
                }
            }
        }
        BilinearKind::Lemma35 => {
            let s = (k - 1).max(0);
            for j1 in bands(2 * k) {
                for j2 in bands(2 * k) {
                    push(s, s, band_bump(s, j1, pow2(s))?, band_bump(s, j2, pow2(s))?);
                }
            }
        }
        BilinearKind::Lemma36 => {
            let h = k + 10;
            for j in bands(k + h) {
                push(
                    h,
                    h,
                    band_bump(h, j, pow2(h))?,
                    band_bump(h, j, pow2(k) - pow2(h))?,
                );
            }
        }
        BilinearKind::Lemma37 => {
            let k1 = -2;
            for j1 in bands(k + 4) {
                for j2 in bands(k + 4) {
                    push(
                        k1,
                        k,
                        band_bump(k1, j1, pow2(k1))?,
                        band_bump(k, j2, pow2(k))?,
                    );
                }
            }
        }
        BilinearKind::Prop38 => {
            for j in bands(k) {
                push(k, k, band_bump(k, j, pow2(k))?, band_bump(k, j, pow2(k))?);
            }
        }
    }
    Ok(out)
}

/// Runs every member of the standard family and returns the witness with
/// the largest ratio, or an error when the family is empty.
pub fn family_max(kind: BilinearKind, k: i32, q: &Quadrature) -> Result<BilinearWitness> {
    let mut best: Option<BilinearWitness> = None;
    for inputs in standard_family(kind, k)? {
        let w = bilinear_witness(kind, &inputs, q)?;
        if best.as_ref().is_none_or(|b| w.ratio > b.ratio) {
            best = Some(w);
        }
    }
    best.ok_or_else(|| LabError::InsufficientData(format!("empty family for {kind:?} at k = {k}")))
}

/// One `(k2, j, j1, j2)` cell where the outer support bound is nonempty but
/// the trichotomy fails.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportCell {
    pub k2: i32,
    pub j: i32,
    pub j1: i32,
    pub j2: i32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportScan {
    pub k: i32,
    pub k1: i32,
    pub j_max: i32,
    /// Frequency sub-cells per shell interval.
    pub subdivisions: usize,
    pub cells: usize,
    pub nonzero: usize,
    pub violations: Vec<SupportCell>,
}

/// Open intervals; the empty union is `[]`.
type Union = Vec<(f64, f64)>;

fn band_union(j: i32) -> Union {
    if j == 0 {
        vec![(-2.0, 2.0)]
    } else {
        let (a, b) = (pow2(j - 1), pow2(j + 1));
        vec![(-b, -a), (a, b)]
    }
}

fn minkowski(a: &Union, b: &Union) -> Union {
    a.iter()
        .flat_map(|&(p, q)| b.iter().map(move |&(r, s)| (p + r, q + s)))
        .collect()
}

fn merge(mut v: Union) -> Union {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Union = Vec::new();
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Whether a closed set of resonance values (intervals, possibly points)
/// meets an open union.
fn meets(closed: &Union, open: &Union) -> bool {
    closed
        .iter()
        .any(|&(a, b)| open.iter().any(|&(c, d)| a < d && b > c))
}

fn abs_range((a, b): (f64, f64)) -> (f64, f64) {
    if a >= 0.0 {
        (a, b)
    } else if b <= 0.0 {
        (-b, -a)
    } else {
        (0.0, a.abs().max(b.abs()))
    }
}

fn disjoint(x: (f64, f64), y: (f64, f64)) -> bool {
    x.1 < y.0 || y.1 < x.0
}

/// Range of `R(xi_1, xi_2) = omega(xi_1 + xi_2) - omega(xi_2)` (and
/// `- omega(xi_1)` when the first factor is measured in modulation) over a
/// box. Where `R` is monotone in each variable the corners are exact;
/// otherwise interval arithmetic gives an enclosure.
fn resonance_range(x1: (f64, f64), x2: (f64, f64), modulated: bool) -> (f64, f64) {
    let r = |a: f64, b: f64| {
        let v = dispersion_symbol(a + b) - dispersion_symbol(b);
        if modulated {
            v - dispersion_symbol(a)
        } else {
            v
        }
    };
    let sum = (x1.0 + x2.0, x1.1 + x2.1);
    // d/dxi_2 = 2(|xi_2| - |xi_1 + xi_2|); d/dxi_1 = -2|xi_1 + xi_2|, plus
    // 2|xi_1| when modulated.
    let mono2 = disjoint(abs_range(x2), abs_range(sum));
    let mono1 = !modulated || disjoint(abs_range(x1), abs_range(sum));
    if mono1 && mono2 {
        let c = [r(x1.0, x2.0), r(x1.0, x2.1), r(x1.1, x2.0), r(x1.1, x2.1)];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return (lo, hi);
    }
    // omega is decreasing.
    let w = |(a, b): (f64, f64)| (dispersion_symbol(b), dispersion_symbol(a));
    let (s, t, u) = (w(sum), w(x2), w(x1));
    let (mut lo, mut hi) = (s.0 - t.1, s.1 - t.0);
    if modulated {
        lo -= u.1;
        hi -= u.0;
    }
    (lo, hi)
}

fn signed_pieces(k: i32, n: usize) -> Vec<(f64, f64)> {
    let (a, b) = (pow2(k - 1), pow2(k + 1));
    let h = (b - a) / n as f64;
    let pos: Vec<(f64, f64)> = (0..n)
        .map(|i| (a + h * i as f64, a + h * (i + 1) as f64))
        .collect();
    pos.iter()
        .map(|&(p, q)| (-q, -p))
        .chain(pos.iter().copied())
        .collect()
}

/// Resonance values reached from `I_{k1} x I_{k2}` with output frequency
/// in `I_k`, as a merged union of closed intervals.
fn resonance_set(k: i32, k1: i32, k2: i32, n: usize) -> Union {
    let (lo, hi) = (pow2(k - 1), pow2(k + 1));
    let mut out = Vec::new();
    for &x1 in &signed_pieces(k1, n) {
        for &x2 in &signed_pieces(k2, n) {
            let (a, b) = abs_range((x1.0 + x2.0, x1.1 + x2.1));
            if b <= lo || a >= hi {
                continue;
            }
            out.push(resonance_range(x1, x2, k1 >= 1));
        }
    }
    merge(out)
}

/// Exhaustive scan of the output bands reachable from `D_{k1,j1} * D_{k2,j2}`
/// for `k2 in [k - 2, k + 2]` and `j, j1, j2 in [0, j_max]`.
///
/// A cell counts as nonzero when the outer bound of the output support
/// meets `D_{k,j}` in positive measure; a violation is a nonzero cell that
/// breaks [`trichotomy_holds`].
pub fn lemma37_support_scan(
    k: i32,
    k1: i32,
    j_max: i32,
    subdivisions: usize,
) -> Result<SupportScan> {
    hypothesis(k >= 1, || format!("output shell k = {k} must be >= 1"))?;
    hypothesis(k1 <= 1, || format!("k1 = {k1} must be <= 1"))?;
    if j_max < 0 || subdivisions == 0 {
        return Err(LabError::Config(format!(
            "need j_max >= 0 and at least one subdivision, got {j_max}, {subdivisions}"
        )));
    }
    let bands: Vec<Union> = (0..=j_max).map(band_union).collect();
    let mut scan = SupportScan {
        k,
        k1,
        j_max,
        subdivisions,
        cells: 0,
        nonzero: 0,
        violations: Vec::new(),
    };
    for k2 in (k - 2).max(1)..=k + 2 {
        let res = resonance_set(k, k1, k2, subdivisions);
        for j1 in 0..=j_max {
            for j2 in 0..=j_max {
                let inputs = minkowski(&bands[j1 as usize], &bands[j2 as usize]);
                for j in 0..=j_max {
                    scan.cells += 1;
                    // s = s1 + s2 - R lands in I~_j iff R in (S1 + S2) - I~_j.
                    let target: Union = inputs
                        .iter()
                        .flat_map(|&(a, b)| {
                            bands[j as usize].iter().map(move |&(c, d)| (a - d, b - c))
                        })
                        .collect();
                    if meets(&res, &target) {
                        scan.nonzero += 1;
                        if !trichotomy_holds(k, k1, j, j1, j2) {
                            scan.violations.push(SupportCell { k2, j, j1, j2 });
                        }
                    }
                }
            }
        }
    }
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quick() -> Quadrature {
        Quadrature {
            xi: 24,
            band: 24,
            inner_xi: 32,
            inner_tau: 100,
        }
    }

    #[test]
    fn zero_inputs_give_zero_ratio() {
        let q = quick();
        for kind in BilinearKind::ALL {
            let k = if kind == BilinearKind::Lemma34 { 12 } else { 4 };
            let mut inputs = standard_family(kind, k).unwrap().remove(0);
            inputs.f.amplitude = 0.0;
            let w = bilinear_witness(kind, &inputs, &q).unwrap();
            assert_eq!(w.ratio, 0.0, "{kind:?}");
            assert!(!w.violation);
        }
    }

    #[test]
    fn hypotheses_are_enforced() {
        let mut inputs = standard_family(BilinearKind::Lemma36, 4).unwrap().remove(0);
        inputs.k1 = inputs.k + 5;
        let err = bilinear_witness(BilinearKind::Lemma36, &inputs, &quick()).unwrap_err();
        assert!(
            matches!(err, LabError::Hypothesis(ref m) if m.contains("k + 10")),
            "{err}"
        );
        let mut inputs = standard_family(BilinearKind::Lemma33, 6).unwrap().remove(0);
        inputs.k2 = 9;
        assert!(matches!(
            bilinear_witness(BilinearKind::Lemma33, &inputs, &quick()),
            Err(LabError::Hypothesis(_))
        ));
    }

    #[test]
    fn band_bumps_sit_in_their_region() {
        for (k, j) in [(-2, 0), (-2, 5), (0, 3), (6, 0), (6, 12)] {
            let f = band_bump(k, j, pow2(k)).unwrap();
            assert_eq!(band_of(&f, k), Some(j), "k={k} j={j}");
        }
    }

    #[test]
    fn witnesses_are_finite_on_the_standard_family() {
        let q = quick();
        for (kind, k) in [
            (BilinearKind::Lemma33, 6),
            (BilinearKind::Lemma35, 5),
            (BilinearKind::Lemma37, 8),
            (BilinearKind::Prop38, 4),
        ] {
            let w = family_max(kind, k, &q).unwrap();
            assert!(w.ratio.is_finite() && w.ratio > 0.0, "{kind:?}: {w:?}");
            assert!(!w.violation);
        }
    }

    #[test]
    fn single_band_witness_respects_the_trichotomy() {
        let q = quick();
        for inputs in standard_family(BilinearKind::Lemma37, 8).unwrap() {
            let w = bilinear_witness(BilinearKind::Lemma37, &inputs, &q).unwrap();
            let s = w.support.unwrap();
            assert!(!s.bands.is_empty());
            assert!(s.violations.is_empty(), "{s:?}");
        }
    }

    #[test]
    fn high_high_gain_is_about_a_quarter_power() {
        let q = quick();
        let scaled: Vec<f64> = [4, 6, 8]
            .iter()
            .map(|&k| {
                family_max(BilinearKind::Lemma36, k, &q)
                    .unwrap()
                    .scaled_ratio
            })
            .collect();
        let (lo, hi) = scaled
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi <= 4.0 * lo, "{scaled:?}");
    }

    #[test]
    fn support_scan_finds_no_violation() {
        let scan = lemma37_support_scan(8, -2, 40, 32).unwrap();
        assert!(scan.nonzero > 0);
        assert!(
            scan.violations.is_empty(),
            "{:?}",
            &scan.violations[..scan.violations.len().min(5)]
        );
        assert_eq!(scan.cells, 5 * 41 * 41 * 41);
    }

    #[test]
    fn trichotomy_cases() {
        // k + k1 = 6.
        assert!(trichotomy_holds(8, -2, 0, 0, 6));
        assert!(trichotomy_holds(8, -2, 30, 25, 0));
        assert!(!trichotomy_holds(8, -2, 30, 3, 0));
    }

    fn band_index(s: f64) -> Vec<i32> {
        (0..=60)
            .filter(|&j| crate::dyadic::in_modulation_band(j, s))
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        /// Random points of `D_{k1,j1} x D_{k2,j2}` land only in cells the
        /// scan marks nonzero, and those cells satisfy the trichotomy.
        #[test]
        fn random_points_land_in_scanned_cells(
            u1 in 0.0f64..1.0, u2 in 0.0f64..1.0, neg1: bool, neg2: bool,
            dk2 in -2i32..=2, l1 in -1.0f64..12.0, l2 in -1.0f64..12.0, n1: bool, n2: bool,
        ) {
            let (k, k1) = (8, -2);
            let k2 = k + dk2;
            let sgn = |n: bool| if n { -1.0 } else { 1.0 };
            let xi1 = sgn(neg1) * pow2(k1 - 1) * (1.0 + 3.0 * u1);
            let xi2 = sgn(neg2) * pow2(k2 - 1) * (1.0 + 3.0 * u2);
            let xi = xi1 + xi2;
            prop_assume!(crate::dyadic::in_shell(k, xi));
            let s1 = sgn(n1) * 2f64.powf(l1);
            let s2 = sgn(n2) * 2f64.powf(l2);
            let s = s1 + s2 + dispersion_symbol(xi2) - dispersion_symbol(xi);
            let res = resonance_set(k, k1, k2, 8);
            let r = dispersion_symbol(xi) - dispersion_symbol(xi2);
            prop_assert!(res.iter().any(|&(a, b)| a <= r && r <= b));
            for j1 in band_index(s1) {
                for j2 in band_index(s2) {
                    for j in band_index(s) {
                        prop_assert!(trichotomy_holds(k, k1, j, j1, j2), "j={} j1={} j2={}", j, j1, j2);
                    }
                }
            }
        }
    }
}
