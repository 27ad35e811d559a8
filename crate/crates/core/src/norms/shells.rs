//! Shell norms `X_k`, `Y_k` and their inf-convolution `Z_k`.

use rayon::prelude::*;

use super::optimizer::{reweight, smooth_norm, ConvexTerm, SplitOptions, SplitProblem};
use super::report::{BreakdownRow, NormReport, SplitDecomposition};
use crate::dyadic::{active_etas, beta, chi, covering_index, eta, eta0, in_shell};
use crate::error::{LabError, Result};
use crate::fft;
use crate::spectral::{
    dispersion_symbol, transpose, FrequencyGrid, Representation, SpaceTimeField, TimeGrid, C64,
};

/// Lowest low-frequency sub-index kept explicitly in `X_0` and `B_0`.
pub const KP_MIN: i32 = -40;
/// First shell where `Y_k` enters `Z_k` (besides `k = 0`).
pub const Y_THRESHOLD: i32 = 100;
/// Relative `L^2` mass tolerated outside a required support.
pub const SUPPORT_TOL: f64 = 1e-10;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
/// Slots per modulation index in the `k = 0` term layout: residual cell plus
/// `k' = KP_MIN ..= 1`.
const KP_SLOTS: usize = (3 - KP_MIN) as usize;

fn pow2(e: f64) -> f64 {
    e.exp2()
}

/// Visits the nonzero low-frequency cutoffs at `xi`: the residual cell
/// `eta0(xi / 2^{KP_MIN - 1})` (slot 0) and `chi_{k'}` for `KP_MIN <= k' <= 1`.
pub(crate) fn for_each_low_cutoff(xi: f64, mut f: impl FnMut(usize, i32, f64)) {
    let r = eta0(xi / pow2(f64::from(KP_MIN - 1)));
    if r != 0.0 {
        f(0, KP_MIN - 1, r);
    }
    let a = xi.abs();
    if a == 0.0 {
        return;
    }
    let b = a.log2().floor() as i32;
    for kp in b..=b + 1 {
        if (KP_MIN..=1).contains(&kp) {
            let c = chi(kp, xi);
            if c != 0.0 {
                f((kp - KP_MIN + 1) as usize, kp, c);
            }
        }
    }
}

/// Weight `2^{-k'/2}` of a low-frequency slot.
pub(crate) fn low_weight(kp: i32) -> f64 {
    pow2(-f64::from(kp) / 2.0)
}

/// Modulation of `(xi, tau)` relative to shell `k`.
fn modulation(k: i32, xi: f64, tau: f64) -> f64 {
    if k >= 1 {
        tau - dispersion_symbol(xi)
    } else {
        tau
    }
}

fn max_tau(tg: &TimeGrid) -> f64 {
    (0..tg.len()).map(|q| tg.tau(q).abs()).fold(0.0, f64::max)
}

/// `X_k` as a weighted sum of `L^2` norms of cutoff pieces.
pub(crate) struct XTerm {
    xg: FrequencyGrid,
    tg: TimeGrid,
    k: i32,
    j_max: i32,
    weights: Vec<f64>,
}

impl XTerm {
    pub fn new(xg: FrequencyGrid, tg: TimeGrid, k: i32) -> Self {
        let s_max = if k >= 1 {
            let xi = xg.xi_max().min(pow2(f64::from(k + 1)));
            max_tau(&tg) + xi * xi
        } else {
            max_tau(&tg)
        };
        let j_max = covering_index(s_max);
        let weights = if k >= 1 {
            (0..=j_max)
                .map(|j| pow2(f64::from(j) / 2.0) * beta(k, j).expect("k >= 1"))
                .collect()
        } else {
            let mut w = Vec::with_capacity((j_max as usize + 1) * KP_SLOTS);
            for j in 0..=j_max {
                for slot in 0..KP_SLOTS {
                    let kp = KP_MIN - 1 + slot as i32;
                    w.push(pow2(f64::from(j)) * low_weight(kp));
                }
            }
            w
        };
        Self {
            xg,
            tg,
            k,
            j_max,
            weights,
        }
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    fn for_each(&self, xi: f64, tau: f64, mut f: impl FnMut(usize, f64)) {
        let s = modulation(self.k, xi, tau);
        let (lo, hi) = active_etas(s);
        for j in lo..=hi.min(self.j_max) {
            let m = eta(j, s);
            if m == 0.0 {
                continue;
            }
            if self.k >= 1 {
                f(j as usize, m);
            } else {
                for_each_low_cutoff(xi, |slot, _, c| f(j as usize * KP_SLOTS + slot, m * c));
            }
        }
    }

    /// Squared `L^2` masses of the pieces.
    pub fn masses(&self, v: &[C64]) -> Vec<f64> {
        let nt = self.tg.len();
        let cell = self.xg.dxi() * self.tg.dtau();
        let n = self.weights.len();
        // Rows are reduced in a fixed order so results do not depend on
        // thread scheduling.
        let rows: Vec<Vec<f64>> = v
            .par_chunks(nt)
            .enumerate()
            .map(|(ix, row)| {
                let mut acc = vec![0.0; n];
                let xi = self.xg.xi(ix);
                for (iq, z) in row.iter().enumerate() {
                    let a = z.norm_sqr();
                    if a == 0.0 {
                        continue;
                    }
                    self.for_each(xi, self.tg.tau(iq), |t, m| acc[t] += m * m * a);
                }
                acc
            })
            .collect();
        let mut acc = vec![0.0; n];
        for row in &rows {
            acc.iter_mut().zip(row).for_each(|(x, y)| *x += y);
        }
        acc.iter_mut().for_each(|m| *m *= cell);
        acc
    }

    /// Per-piece weighted norms.
    pub fn terms(&self, v: &[C64]) -> Vec<f64> {
        self.masses(v)
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w * m.sqrt())
            .collect()
    }

    /// Modulation index and (for `k = 0`) sub-index of a term slot.
    pub fn label(&self, t: usize) -> (i32, Option<i32>) {
        if self.k >= 1 {
            (t as i32, None)
        } else {
            (
                (t / KP_SLOTS) as i32,
                Some(KP_MIN - 1 + (t % KP_SLOTS) as i32),
            )
        }
    }
}

impl ConvexTerm for XTerm {
    fn linearize(&self, v: &[C64], mu: f64) -> (f64, f64, Vec<f64>) {
        let masses = self.masses(v);
        let exact = masses
            .iter()
            .zip(&self.weights)
            .map(|(m, w)| w * m.sqrt())
            .sum();
        let smoothed = masses
            .iter()
            .zip(&self.weights)
            .map(|(&m, w)| w * smooth_norm(m, mu))
            .sum();
        let cell = self.xg.dxi() * self.tg.dtau();
        let coef = masses
            .iter()
            .zip(&self.weights)
            .map(|(&m, &w)| cell * reweight(w, m, mu))
            .collect();
        (exact, smoothed, coef)
    }

    fn apply(&self, c: &[f64], u: &[C64]) -> Vec<C64> {
        let d = self.diagonal(c);
        u.iter().zip(d).map(|(z, w)| z * w).collect()
    }

    fn diagonal(&self, c: &[f64]) -> Vec<f64> {
        let nt = self.tg.len();
        let mut d = vec![0.0; self.xg.len() * nt];
        d.par_chunks_mut(nt).enumerate().for_each(|(ix, row)| {
            let xi = self.xg.xi(ix);
            for (iq, x) in row.iter_mut().enumerate() {
                let mut s = 0.0;
                self.for_each(xi, self.tg.tau(iq), |t, m| s += c[t] * m * m);
                *x = s;
            }
        });
        d
    }

    fn peak(&self, v: &[C64]) -> f64 {
        self.masses(v).into_iter().fold(0.0, f64::max).sqrt()
    }
}

/// `Y_k` as a weighted sum of `L^1_x L^2_t` norms of multiplier images.
pub(crate) struct YTerm {
    xg: FrequencyGrid,
    tg: TimeGrid,
    k: i32,
    pieces: Vec<i32>,
}

impl YTerm {
    pub fn new(xg: FrequencyGrid, tg: TimeGrid, k: i32) -> Self {
        let pieces = if k >= 1 {
            vec![0]
        } else {
            (0..=covering_index(max_tau(&tg))).collect()
        };
        Self { xg, tg, k, pieces }
    }

    fn weight(&self, piece: i32) -> f64 {
        if self.k >= 1 {
            pow2(-f64::from(self.k) / 2.0)
        } else {
            pow2(f64::from(piece))
        }
    }

    fn multiplier(&self, piece: i32, xi: f64, tau: f64) -> C64 {
        if self.k >= 1 {
            C64::new(tau - dispersion_symbol(xi), 1.0)
        } else {
            C64::new(eta(piece, tau), 0.0)
        }
    }

    /// `x`-inverse transforms `(q, G(., tau_q))` of the columns of
    /// `m_piece v` that can be nonzero; `vt` is `v` transposed (`tau` outer).
    fn columns(&self, piece: i32, vt: &[C64]) -> Vec<(usize, Vec<C64>)> {
        let nx = self.xg.len();
        let scale = 1.0 / self.xg.period();
        (0..self.tg.len())
            .into_par_iter()
            .filter_map(|q| {
                let tau = self.tg.tau(q);
                let src = &vt[q * nx..(q + 1) * nx];
                if (self.k < 1 && eta(piece, tau) == 0.0) || src.iter().all(|z| *z == ZERO) {
                    return None;
                }
                let mut buf: Vec<C64> = src
                    .iter()
                    .enumerate()
                    .map(|(i, z)| {
                        let s = if i % 2 == 0 { scale } else { -scale };
                        z * self.multiplier(piece, self.xg.xi(i), tau) * s
                    })
                    .collect();
                fft::inverse(&mut buf);
                Some((q, buf))
            })
            .collect()
    }

    /// `||u(x, .)||_{L^2_t}` for every lattice `x`, by discrete Parseval in `t`.
    fn row_norms(&self, cols: &[(usize, Vec<C64>)]) -> Vec<f64> {
        let c = 1.0 / (self.tg.len() as f64 * self.tg.dt());
        let mut acc = vec![0.0; self.xg.len()];
        for (_, col) in cols {
            acc.iter_mut()
                .zip(col)
                .for_each(|(a, z)| *a += z.norm_sqr());
        }
        acc.into_iter().map(|s| (c * s).sqrt()).collect()
    }

    /// `||F^{-1}[m_piece v]||_{L^1_x L^2_t}` for each piece, unweighted.
    pub fn piece_norms(&self, v: &[C64]) -> Vec<(i32, f64)> {
        let vt = transpose(v, self.xg.len(), self.tg.len());
        self.pieces
            .iter()
            .map(|&p| {
                (
                    p,
                    self.row_norms(&self.columns(p, &vt)).iter().sum::<f64>() * self.xg.dx(),
                )
            })
            .collect()
    }
}

impl ConvexTerm for YTerm {
    fn linearize(&self, v: &[C64], mu: f64) -> (f64, f64, Vec<f64>) {
        let (nx, nt) = (self.xg.len(), self.tg.len());
        let dx = self.xg.dx();
        let vt = transpose(v, nx, nt);
        let c = 1.0 / (nt as f64 * self.tg.dt());
        let (mut exact, mut smoothed) = (0.0, 0.0);
        let mut coef = Vec::with_capacity(self.pieces.len() * nx);
        for &p in &self.pieces {
            let w = self.weight(p) * dx;
            let norms = self.row_norms(&self.columns(p, &vt));
            exact += w * norms.iter().sum::<f64>();
            smoothed += w * norms.iter().map(|n| smooth_norm(n * n, mu)).sum::<f64>();
            coef.extend(norms.iter().map(|n| c * reweight(w, n * n, mu)));
        }
        (exact, smoothed, coef)
    }

    fn apply(&self, c: &[f64], u: &[C64]) -> Vec<C64> {
        let (nx, nt) = (self.xg.len(), self.tg.len());
        let mut g = vec![ZERO; nx * nt];
        let ut = transpose(u, nx, nt);
        let scale = 1.0 / self.xg.period();
        for (ip, &p) in self.pieces.iter().enumerate() {
            let coef = &c[ip * nx..(ip + 1) * nx];
            // Adjoint of the x-inverse: forward DFT, then (-1)^i / L.
            let back: Vec<(usize, Vec<C64>)> = self
                .columns(p, &ut)
                .into_par_iter()
                .map(|(q, mut col)| {
                    col.iter_mut().zip(coef).for_each(|(z, a)| *z *= *a);
                    fft::forward(&mut col);
                    let tau = self.tg.tau(q);
                    for (i, z) in col.iter_mut().enumerate() {
                        let s = if i % 2 == 0 { scale } else { -scale };
                        *z *= self.multiplier(p, self.xg.xi(i), tau).conj() * s;
                    }
                    (q, col)
                })
                .collect();
            for (q, col) in back {
                for (i, z) in col.into_iter().enumerate() {
                    g[i * nt + q] += z;
                }
            }
        }
        g
    }

    fn diagonal(&self, c: &[f64]) -> Vec<f64> {
        let (nx, nt) = (self.xg.len(), self.tg.len());
        let scale = 1.0 / self.xg.period();
        // Per piece the x-part is circulant with diagonal scale^2 sum_x c.
        let kappa: Vec<f64> = (0..self.pieces.len())
            .map(|ip| scale * scale * c[ip * nx..(ip + 1) * nx].iter().sum::<f64>())
            .collect();
        let mut d = vec![0.0; nx * nt];
        d.par_chunks_mut(nt).enumerate().for_each(|(ix, row)| {
            let xi = self.xg.xi(ix);
            for (iq, x) in row.iter_mut().enumerate() {
                let tau = self.tg.tau(iq);
                *x = self
                    .pieces
                    .iter()
                    .zip(&kappa)
                    .map(|(&p, k)| k * self.multiplier(p, xi, tau).norm_sqr())
                    .sum();
            }
        });
        d
    }

    fn peak(&self, v: &[C64]) -> f64 {
        let vt = transpose(v, self.xg.len(), self.tg.len());
        self.pieces
            .iter()
            .flat_map(|&p| self.row_norms(&self.columns(p, &vt)))
            .fold(0.0, f64::max)
    }
}

/// Relative `L^2` mass of `f` outside `{pred}`; errors beyond tolerance.
pub(crate) fn check_support(
    f: &SpaceTimeField,
    shell: &str,
    pred: impl Fn(f64, f64) -> bool + Sync,
) -> Result<()> {
    let nt = f.nt();
    let (xg, tg) = (*f.xgrid(), *f.tgrid());
    let (inside, outside) = f
        .data()
        .par_chunks(nt)
        .enumerate()
        .map(|(ix, row)| {
            let xi = xg.xi(ix);
            row.iter().enumerate().fold((0.0, 0.0), |(a, b), (iq, z)| {
                if pred(xi, tg.tau(iq)) {
                    (a + z.norm_sqr(), b)
                } else {
                    (a, b + z.norm_sqr())
                }
            })
        })
        .collect::<Vec<(f64, f64)>>()
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let total = inside + outside;
    if total == 0.0 {
        return Ok(());
    }
    let rel = (outside / total).sqrt();
    if rel > SUPPORT_TOL {
        return Err(LabError::Support {
            shell: shell.to_string(),
            mass: rel,
            tol: SUPPORT_TOL,
        });
    }
    Ok(())
}

fn check_shell(f: &SpaceTimeField, k: i32, norm: &str) -> Result<()> {
    if k < 0 {
        return Err(LabError::Domain(format!(
            "shell index must be >= 0, got {k}"
        )));
    }
    f.require(Representation::Frequency)?;
    if k == 0 {
        check_support(f, &format!("{norm}: [-2,2]"), |xi, _| xi.abs() <= 2.0)
    } else {
        check_support(f, &format!("{norm}: I_{k}"), |xi, _| in_shell(k, xi))
    }
}

/// Support of `Y_k`, `k >= 1`: `xi in I_k`, `|tau - omega(xi)| <= 2^k`.
fn y_support(k: i32) -> impl Fn(f64, f64) -> bool + Sync {
    move |xi, tau| in_shell(k, xi) && (tau - dispersion_symbol(xi)).abs() <= pow2(f64::from(k))
}

/// `X_k` norm of a frequency-side field.
pub fn xk_norm(f: &SpaceTimeField, k: i32) -> Result<NormReport> {
    check_shell(f, k, "X")?;
    let term = XTerm::new(*f.xgrid(), *f.tgrid(), k);
    let terms = term.terms(f.data());
    let value = terms.iter().sum();
    let j_count = term.j_max() as usize + 1;
    let mut per_j = vec![0.0; j_count];
    for (t, v) in terms.iter().enumerate() {
        per_j[term.label(t).0 as usize] += v;
    }
    let rows = per_j
        .into_iter()
        .enumerate()
        .map(|(j, v)| BreakdownRow::band(j as i32, v))
        .collect();
    Ok(NormReport::new(format!("X_{k}"), value, rows))
}

/// `X_0` contributions split by low-frequency sub-index `k'` (slot
/// `KP_MIN - 1` is the residual cell around `xi = 0`).
pub fn x0_by_subindex(f: &SpaceTimeField) -> Result<Vec<(i32, f64)>> {
    check_shell(f, 0, "X")?;
    let term = XTerm::new(*f.xgrid(), *f.tgrid(), 0);
    let mut out = vec![0.0; KP_SLOTS];
    for (t, v) in term.terms(f.data()).iter().enumerate() {
        out[t % KP_SLOTS] += v;
    }
    Ok(out
        .into_iter()
        .enumerate()
        .map(|(s, v)| (KP_MIN - 1 + s as i32, v))
        .collect())
}

/// `Y_k` norm of a frequency-side field.
pub fn yk_norm(f: &SpaceTimeField, k: i32) -> Result<NormReport> {
    check_shell(f, k, "Y")?;
    if k >= 1 {
        check_support(f, &format!("Y: D_{k},<{k}"), y_support(k))?;
    }
    let term = YTerm::new(*f.xgrid(), *f.tgrid(), k);
    let rows: Vec<BreakdownRow> = term
        .piece_norms(f.data())
        .into_iter()
        .map(|(p, n)| BreakdownRow::band(p, term.weight(p) * n))
        .collect();
    let value = rows.iter().map(|r| r.value).sum();
    Ok(NormReport::new(format!("Y_{k}"), value, rows))
}

/// `Z_k` norm with default optimizer settings.
pub fn zk_norm(f: &SpaceTimeField, k: i32) -> Result<NormReport> {
    zk_norm_with(f, k, &SplitOptions::default()).map(|(r, _)| r)
}

/// `Z_k` norm and the splitting `f = f_X + f_Y` achieving it. For
/// `1 <= k < 100` this is `X_k` with `f_Y = 0`; otherwise the value is an
/// upper bound on the infimum.
pub fn zk_norm_with(
    f: &SpaceTimeField,
    k: i32,
    opts: &SplitOptions,
) -> Result<(NormReport, SplitDecomposition<SpaceTimeField>)> {
    check_shell(f, k, "Z")?;
    let zero = SpaceTimeField::zeros(*f.xgrid(), *f.tgrid(), Representation::Frequency);
    if (1..Y_THRESHOLD).contains(&k) {
        let mut r = xk_norm(f, k)?;
        r.name = format!("Z_{k}");
        let split = SplitDecomposition {
            part_a: f.clone(),
            part_b: zero,
            objective: r.value,
        };
        return Ok((r, split));
    }
    let (xg, tg) = (*f.xgrid(), *f.tgrid());
    let xterm = XTerm::new(xg, tg, k);
    let yterm = YTerm::new(xg, tg, k);
    let nt = tg.len();
    let mask: Vec<bool> = if k == 0 {
        vec![true; f.data().len()]
    } else {
        let pred = y_support(k);
        (0..f.data().len())
            .map(|i| pred(xg.xi(i / nt), tg.tau(i % nt)))
            .collect()
    };
    let b_admits_target = k == 0 || check_support(f, "Y", y_support(k)).is_ok();
    let problem = SplitProblem {
        target: f.data(),
        a: &xterm,
        b: &yterm,
        mask: &mask,
        b_admits_target,
    };
    let out = problem.solve(opts);
    let part_b = SpaceTimeField::new(xg, tg, Representation::Frequency, out.part_b)?;
    let part_a = f.sub(&part_b)?;
    let xa = xterm.eval(part_a.data(), 0.0, None).0;
    let yb = yterm.eval(part_b.data(), 0.0, None).0;
    let mut report = NormReport::new(
        format!("Z_{k}"),
        out.objective,
        vec![BreakdownRow::named("X", xa), BreakdownRow::named("Y", yb)],
    );
    report.optimizer = Some(out.status);
    let split = SplitDecomposition {
        part_a,
        part_b,
        objective: out.objective,
    };
    Ok((report, split))
}
