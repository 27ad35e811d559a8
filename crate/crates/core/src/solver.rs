//! Picard iteration for the Duhamel formulation, an integrating-factor
//! Runge-Kutta oracle, and the diagnostics built on top of both.
//!
//! Iterates are held as one spectral field per lattice time. The Duhamel
//! integral is evaluated in the integrating-factor frame
//! `v(s) = e^{-i s omega} F(u)(s)`, where the integrand is smooth, by
//! cumulative fourth-order quadrature outward from `t = 0`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::smooth_step;
use crate::error::{LabError, Result};
use crate::norms::{
    fsigma_norm_with, hsigma_tilde_norm_with, NormReport, SplitEffort, SplitOptions,
};
use crate::spectral::{
    dispersion_symbol, free_evolution, nonlinear_term, pde_residual_with, FrequencyGrid,
    Representation, SpaceTimeField, SpectralField, TimeGrid, C64,
};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Solver parameters. Defaults: `L = 64`, `N = 512`, `T = 1`, `N_t = 257`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub period: f64,
    pub n_points: usize,
    /// Half-width `T` of the time window `[-T, T]`, at most 1.
    pub half_width: f64,
    /// Time lattice points including both endpoints; must be odd.
    pub n_t: usize,
    /// Smallness threshold on `||phi||` in the `H~^0` proxy.
    pub epsilon_bar: f64,
    pub max_iter: usize,
    /// Stop once `d_n <= tol * ||u_n||` in the `F^0` proxy.
    pub tol: f64,
    pub dealias: bool,
    /// Switches the quadratic term off (linear flow).
    pub nonlinear: bool,
    /// Effort spent on infimum norms inside the diagnostics.
    pub norm_effort: SplitEffort,
    /// Number of `T` samples of the `M(T)` curve.
    pub m_samples: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            period: 64.0,
            n_points: 512,
            half_width: 1.0,
            n_t: 257,
            epsilon_bar: 0.05,
            max_iter: 30,
            tol: 1e-12,
            dealias: true,
            nonlinear: true,
            norm_effort: SplitEffort::Baselines,
            m_samples: 8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(LabError::Config(m));
        if !(self.half_width > 0.0 && self.half_width <= 1.0) {
            return bad(format!(
                "half_width must lie in (0, 1], got {}",
                self.half_width
            ));
        }
        if self.n_t < 7 || self.n_t.is_multiple_of(2) {
            return bad(format!("n_t must be odd and at least 7, got {}", self.n_t));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.epsilon_bar > 0.0) {
            return bad(format!(
                "epsilon_bar must be positive, got {}",
                self.epsilon_bar
            ));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        self.frequency_grid().map(|_| ())
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.period, self.n_points)
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.half_width, self.n_t)
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.half_width / (self.n_t - 1) as f64
    }

    /// Sets `n_t` from a requested step; the step must divide `T` evenly.
    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        let steps = self.half_width / dt;
        let rounded = steps.round();
        if !(dt > 0.0) || (steps - rounded).abs() > 1e-9 * steps.max(1.0) || rounded < 3.0 {
            return Err(LabError::Config(format!(
                "dt = {dt} does not divide T = {} into at least 3 steps",
                self.half_width
            )));
        }
        self.n_t = 2 * rounded as usize + 1;
        Ok(self)
    }

    fn norm_options(&self) -> SplitOptions {
        SplitOptions {
            effort: self.norm_effort,
            ..SplitOptions::default()
        }
    }

    fn check_grid(&self, phi: &SpectralField) -> Result<()> {
        if *phi.grid() != self.frequency_grid()? {
            return Err(LabError::Config(format!(
                "data grid (L = {}, N = {}) differs from the solver grid (L = {}, N = {})",
                phi.grid().period(),
                phi.grid().len(),
                self.period,
                self.n_points
            )));
        }
        Ok(())
    }
}

/// One Picard step `u_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    /// `F^0` proxy of `u_n`.
    pub norm_f0: f64,
    /// `d_n = ||u_n - u_{n-1}||` in the `F^0` proxy.
    pub diff_f0: f64,
    /// Same difference in `sup_t H~^0`.
    pub diff_h0: f64,
    /// `d_n / d_{n-1}`.
    pub ratio: Option<f64>,
    /// `sup_t ||u_n(t)||` in `H~^sigma`, `sigma = 0, 1, 2`.
    pub sup_h: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub pde_max_abs: f64,
    pub pde_l2: f64,
    /// `max_t ||u - W(t) phi - duhamel(u)|| / ||u(t)||` (`L^2_x`).
    pub fixed_point_defect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conservation {
    /// `max_t |int u(t) - int phi| / int |phi|`.
    pub mass_drift: f64,
    /// `max_t | ||u(t)||^2 - ||phi||^2 | / ||phi||^2`; only for real data.
    pub l2_drift: Option<f64>,
}

/// Windowed `F^0` proxy as a function of the window half-width.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCurve {
    pub t: Vec<f64>,
    pub raw: Vec<f64>,
    /// `min_{T' >= T} raw(T')`: still an upper bound for the interval norm,
    /// and monotone.
    pub envelope: Vec<f64>,
}

/// Two-sided bound `M <= C0 (eps + M^2)` read off a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dichotomy {
    /// Measured constant: the larger of `||W phi|| / ||phi||` and
    /// `||duhamel(u)|| / ||u||^2`.
    pub c0: f64,
    pub lower: f64,
    pub upper: f64,
    /// `M(T)` at the full window.
    pub m_full: f64,
    pub below_gap: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    /// `||phi||` in the `H~^0` proxy.
    pub data_h0: f64,
    /// Whether `data_h0 < epsilon_bar`.
    pub admissible: bool,
    pub residual: Option<ResidualSummary>,
    pub conservation: Option<Conservation>,
    pub m_curve: Option<MCurve>,
    pub dichotomy: Option<Dichotomy>,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Synthetic trace with the given `F^0` differences (used to exercise
    /// the contraction monitor).
    pub fn from_differences(d: &[f64]) -> Self {
        let records = d
            .iter()
            .enumerate()
            .map(|(i, &x)| IterationRecord {
                n: i + 1,
                norm_f0: 1.0,
                diff_f0: x,
                diff_h0: x,
                ratio: (i > 0 && d[i - 1] > 0.0).then(|| x / d[i - 1]),
                sup_h: [1.0; 3],
            })
            .collect();
        Self {
            records,
            ..Self::default()
        }
    }

    pub fn differences(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.diff_f0).collect()
    }

    /// One row per iteration.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,norm_f0,diff_f0,diff_h0,ratio,sup_h0,sup_h1,sup_h2\n");
        for r in &self.records {
            let ratio = r.ratio.map(|x| format!("{x:.12e}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{:.12e},{:.12e},{:.12e},{},{:.12e},{:.12e},{:.12e}",
                r.n, r.norm_f0, r.diff_f0, r.diff_h0, ratio, r.sup_h[0], r.sup_h[1], r.sup_h[2]
            );
        }
        s
    }
}

/// One row per lattice time: mass, `L^2` norm and peak of a physical field.
pub fn snapshot_csv(u: &SpaceTimeField) -> Result<String> {
    u.require(Representation::Physical)?;
    let mut s = String::from("t,mass_re,mass_im,l2,max_abs\n");
    for it in 0..u.nt() {
        let slice = u.time_slice(it)?;
        let mass = slice.coeff_at_mode(0);
        let peak = slice
            .to_physical()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let _ = writeln!(
            s,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            u.tgrid().t(it),
            mass.re,
            mass.im,
            slice.l2_physical(),
            peak
        );
    }
    Ok(s)
}

fn origin(tg: &TimeGrid) -> Result<usize> {
    tg.origin().ok_or_else(|| {
        LabError::Domain(format!(
            "time lattice needs t = 0; N_t = {} is even",
            tg.len()
        ))
    })
}

/// Signed time of lattice index `i`, measured from the origin exactly.
fn rel_time(tg: &TimeGrid, o: usize, i: usize) -> f64 {
    (i as f64 - o as f64) * tg.dt()
}

fn phase(grid: &FrequencyGrid, c: &mut [C64], t: f64) {
    for (i, z) in c.iter_mut().enumerate() {
        *z *= C64::from_polar(1.0, t * dispersion_symbol(grid.xi(i)));
    }
}

fn axpy(acc: &mut [C64], a: f64, x: &[C64]) {
    acc.iter_mut().zip(x).for_each(|(y, v)| *y += v * a);
}

/// Cumulative integrals `int_0^{s_n} g` on an equispaced lattice with
/// signed step `h`: Simpson for even `n`, Simpson plus the 3/8 rule for odd
/// `n >= 3`, and a four-point formula on the first interval.
fn cumulative(g: &[Vec<C64>], h: f64) -> Vec<Vec<C64>> {
    let m = g.len() - 1;
    let n = g[0].len();
    let mut out = vec![vec![ZERO; n]; m + 1];
    for k in (2..=m).step_by(2) {
        let mut acc = out[k - 2].clone();
        axpy(&mut acc, h / 3.0, &g[k - 2]);
        axpy(&mut acc, 4.0 * h / 3.0, &g[k - 1]);
        axpy(&mut acc, h / 3.0, &g[k]);
        out[k] = acc;
    }
    let mut first = vec![ZERO; n];
    for (w, gk) in [9.0, 19.0, -5.0, 1.0].iter().zip(g) {
        axpy(&mut first, w * h / 24.0, gk);
    }
    out[1] = first;
    for k in (3..=m).step_by(2) {
        let mut acc = out[k - 3].clone();
        for (w, gk) in [1.0, 3.0, 3.0, 1.0].iter().zip(&g[k - 3..=k]) {
            axpy(&mut acc, 3.0 * w * h / 8.0, gk);
        }
        out[k] = acc;
    }
    out
}

/// `-(1/2) int_0^t W(t - s) d_x(u^2)(s) ds` for per-time spectral slices.
fn duhamel_slices(
    slices: &[SpectralField],
    tg: &TimeGrid,
    dealias: bool,
) -> Result<Vec<SpectralField>> {
    let o = origin(tg)?;
    let nt = tg.len();
    if o < 3 {
        return Err(LabError::TooSmall(format!(
            "Duhamel quadrature needs at least 7 time points, got {nt}"
        )));
    }
    let grid = *slices[0].grid();
    // Integrand in the integrating-factor frame: -e^{-i s omega} d_x(u^2 / 2).
    let g: Vec<Vec<C64>> = slices
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let mut c = nonlinear_term(u, dealias).into_coeffs();
            phase(&grid, &mut c, -rel_time(tg, o, i));
            c.iter_mut().for_each(|z| *z = -*z);
            c
        })
        .collect();
    let dt = tg.dt();
    let fwd = cumulative(&g[o..], dt);
    let back_g: Vec<Vec<C64>> = g[..=o].iter().rev().cloned().collect();
    let back = cumulative(&back_g, -dt);
    let mut out = vec![Vec::new(); nt];
    for (k, c) in fwd.into_iter().enumerate() {
        out[o + k] = c;
    }
    for (k, c) in back.into_iter().enumerate().skip(1) {
        out[o - k] = c;
    }
    out.into_par_iter()
        .enumerate()
        .map(|(i, mut c)| {
            phase(&grid, &mut c, rel_time(tg, o, i));
            SpectralField::new(grid, c)
        })
        .collect()
}

fn slices_of(u: &SpaceTimeField) -> Result<Vec<SpectralField>> {
    u.require(Representation::Physical)?;
    (0..u.nt())
        .into_par_iter()
        .map(|it| u.time_slice(it))
        .collect()
}

/// Duhamel term of a physical field on a lattice containing `t = 0`,
/// with the product dealiased by the 2/3 rule when `dealias` is set.
pub fn duhamel(u: &SpaceTimeField, dealias: bool) -> Result<SpaceTimeField> {
    let slices = slices_of(u)?;
    let d = duhamel_slices(&slices, u.tgrid(), dealias)?;
    SpaceTimeField::from_slices(*u.tgrid(), &d)
}

/// `W(t) phi` at every lattice time, as a physical field.
pub fn linear_flow(phi: &SpectralField, tg: TimeGrid) -> Result<SpaceTimeField> {
    let o = origin(&tg)?;
    SpaceTimeField::from_slices(tg, &linear_slices(phi, &tg, o))
}

fn linear_slices(phi: &SpectralField, tg: &TimeGrid, o: usize) -> Vec<SpectralField> {
    (0..tg.len())
        .into_par_iter()
        .map(|i| free_evolution(phi, rel_time(tg, o, i)))
        .collect()
}

/// Smooth window: 1 on `[-t_win, t_win]`, 0 outside `[-t_win - delta, t_win + delta]`.
pub fn time_window(t: f64, t_win: f64, delta: f64) -> f64 {
    smooth_step((t_win + delta - t.abs()) / delta)
}

/// `F^0` proxy of a physical field restricted to `[-t_win, t_win]`: the
/// field is multiplied by [`time_window`] with `delta = 2 dt` and measured
/// in `F^0`. At `t_win = T` the window is identically 1 on the lattice.
pub fn windowed_f0(u: &SpaceTimeField, t_win: f64, opts: &SplitOptions) -> Result<f64> {
    u.require(Representation::Physical)?;
    let delta = 2.0 * u.tgrid().dt();
    let w = u.map(|_, t, z| z * time_window(t, t_win, delta));
    Ok(fsigma_norm_with(&w, 0.0, opts)?.value)
}

/// `H~^sigma` values for several `sigma` from one `H~^0` report (the
/// `B_0` part does not depend on `sigma`).
fn hsigma_family(r0: &NormReport, sigmas: &[f64]) -> Vec<f64> {
    sigmas
        .iter()
        .map(|&s| {
            r0.breakdown
                .iter()
                .map(|row| {
                    let k = row.k.unwrap_or(0);
                    let v = if k >= 1 {
                        2f64.powf(s * f64::from(k)) * row.value
                    } else {
                        row.value
                    };
                    v * v
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

fn sup_hsigma(slices: &[SpectralField], sigmas: &[f64], opts: &SplitOptions) -> Result<Vec<f64>> {
    let per: Vec<Vec<f64>> = slices
        .par_iter()
        .map(|s| hsigma_tilde_norm_with(s, 0.0, opts).map(|r| hsigma_family(&r, sigmas)))
        .collect::<Result<_>>()?;
    Ok((0..sigmas.len())
        .map(|i| per.iter().map(|v| v[i]).fold(0.0, f64::max))
        .collect())
}

fn sub_slices(a: &[SpectralField], b: &[SpectralField]) -> Vec<SpectralField> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.sub(y).expect("same grid"))
        .collect()
}

fn all_finite(slices: &[SpectralField]) -> bool {
    slices.iter().all(|s| {
        s.coeffs()
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    })
}

/// Runs the Picard iteration `u_0 = W(t) phi`, `u_{n+1} = W(t) phi + duhamel(u_n)`.
///
/// Data above `epsilon_bar` are still iterated; `trace.admissible` records
/// the violation. Three consecutive increases of `d_n`, or a non-finite
/// iterate, abort with [`LabError::Divergence`].
pub fn picard_solve(
    phi: &SpectralField,
    config: &SolverConfig,
) -> Result<(SpaceTimeField, IterationTrace)> {
    config.validate()?;
    config.check_grid(phi)?;
    let tg = config.time_grid()?;
    let o = origin(&tg)?;
    let opts = config.norm_options();
    let data_h0 = hsigma_tilde_norm_with(phi, 0.0, &opts)?.value;
    let mut trace = IterationTrace {
        data_h0,
        admissible: data_h0 < config.epsilon_bar,
        ..IterationTrace::default()
    };
    let lin = linear_slices(phi, &tg, o);
    let f0 = |s: &[SpectralField]| -> Result<f64> {
        windowed_f0(&SpaceTimeField::from_slices(tg, s)?, tg.half_width(), &opts)
    };
    let mut u = lin.clone();
    let mut increases = 0;
    for n in 1..=config.max_iter {
        let next = if config.nonlinear {
            let d = duhamel_slices(&u, &tg, config.dealias)?;
            lin.iter()
                .zip(&d)
                .map(|(a, b)| a.add(b).expect("same grid"))
                .collect()
        } else {
            lin.clone()
        };
        if !all_finite(&next) {
            return Err(LabError::Divergence {
                trace: Box::new(trace),
            });
        }
        let diff = sub_slices(&next, &u);
        let diff_f0 = f0(&diff)?;
        let norm_f0 = f0(&next)?;
        let diff_h0 = sup_hsigma(&diff, &[0.0], &opts)?[0];
        let sup = sup_hsigma(&next, &[0.0, 1.0, 2.0], &opts)?;
        let prev = trace.records.last().map(|r| r.diff_f0);
        let ratio = prev.filter(|&p| p > 0.0).map(|p| diff_f0 / p);
        trace.records.push(IterationRecord {
            n,
            norm_f0,
            diff_f0,
            diff_h0,
            ratio,
            sup_h: [sup[0], sup[1], sup[2]],
        });
        u = next;
        if !(diff_f0.is_finite() && norm_f0.is_finite()) {
            return Err(LabError::Divergence {
                trace: Box::new(trace),
            });
        }
        if diff_f0 <= config.tol * norm_f0 {
            trace.converged = true;
            break;
        }
        increases = match prev {
            Some(p) if diff_f0 > p => increases + 1,
            _ => 0,
        };
        if increases >= 3 {
            return Err(LabError::Divergence {
                trace: Box::new(trace),
            });
        }
    }
    let solution = SpaceTimeField::from_slices(tg, &u)?;
    if trace.converged {
        trace.residual = Some(residual_summary(&solution, &u, &lin, config)?);
        trace.conservation = Some(conservation(phi, &u));
        let curve = m_curve_with(&solution, &m_samples(config), &opts)?;
        trace.dichotomy = Some(dichotomy(&solution, &lin, &u, &curve, data_h0, config)?);
        trace.m_curve = Some(curve);
    }
    Ok((solution, trace))
}

fn m_samples(config: &SolverConfig) -> Vec<f64> {
    let k = config.m_samples.max(1);
    (1..=k)
        .map(|i| config.half_width * i as f64 / k as f64)
        .collect()
}

fn residual_summary(
    solution: &SpaceTimeField,
    u: &[SpectralField],
    lin: &[SpectralField],
    config: &SolverConfig,
) -> Result<ResidualSummary> {
    let pde = pde_residual_with(solution, config.dealias)?;
    let tg = config.time_grid()?;
    let d = if config.nonlinear {
        duhamel_slices(u, &tg, config.dealias)?
    } else {
        vec![SpectralField::zeros(*u[0].grid()); u.len()]
    };
    let defect = u
        .iter()
        .zip(lin)
        .zip(&d)
        .map(|((ui, li), di)| {
            let r = ui
                .sub(li)
                .and_then(|x| x.sub(di))
                .expect("same grid")
                .l2_norm();
            let n = ui.l2_norm();
            if n > 0.0 {
                r / n
            } else {
                r
            }
        })
        .fold(0.0, f64::max);
    Ok(ResidualSummary {
        pde_max_abs: pde.max_abs,
        pde_l2: pde.l2,
        fixed_point_defect: defect,
    })
}

/// Mass and (for real data) `L^2` drift over the lattice.
pub fn conservation(phi: &SpectralField, u: &[SpectralField]) -> Conservation {
    let m0 = phi.coeff_at_mode(0);
    let scale = phi.l1_physical();
    let mass_drift = if scale > 0.0 {
        u.iter()
            .map(|s| (s.coeff_at_mode(0) - m0).norm())
            .fold(0.0, f64::max)
            / scale
    } else {
        0.0
    };
    let phys = phi.to_physical();
    let peak = phys.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let real = phys
        .iter()
        .all(|z| z.im.abs() <= 1e-14 * peak.max(f64::MIN_POSITIVE));
    let e0 = phi.l2_norm().powi(2);
    let l2_drift = (real && e0 > 0.0).then(|| {
        u.iter()
            .map(|s| (s.l2_norm().powi(2) - e0).abs())
            .fold(0.0, f64::max)
            / e0
    });
    Conservation {
        mass_drift,
        l2_drift,
    }
}

/// Conservation diagnostics of a physical solution field.
pub fn conservation_of(phi: &SpectralField, u: &SpaceTimeField) -> Result<Conservation> {
    Ok(conservation(phi, &slices_of(u)?))
}

fn dichotomy(
    solution: &SpaceTimeField,
    lin: &[SpectralField],
    u: &[SpectralField],
    curve: &MCurve,
    data_h0: f64,
    config: &SolverConfig,
) -> Result<Dichotomy> {
    let tg = config.time_grid()?;
    let opts = config.norm_options();
    let full = tg.half_width();
    let lin_f = windowed_f0(&SpaceTimeField::from_slices(tg, lin)?, full, &opts)?;
    let m_full = *curve.envelope.last().unwrap_or(&0.0);
    let mut c0 = if data_h0 > 0.0 { lin_f / data_h0 } else { 0.0 };
    if config.nonlinear && m_full > 0.0 {
        let d = duhamel_slices(u, &tg, config.dealias)?;
        let d_f = windowed_f0(&SpaceTimeField::from_slices(tg, &d)?, full, &opts)?;
        let u_f = windowed_f0(solution, full, &opts)?;
        if u_f > 0.0 {
            c0 = c0.max(d_f / (u_f * u_f));
        }
    }
    let lower = 2.0 * c0 * config.epsilon_bar;
    let upper = if c0 > 0.0 {
        1.0 / (2.0 * c0)
    } else {
        f64::INFINITY
    };
    Ok(Dichotomy {
        c0,
        lower,
        upper,
        m_full,
        below_gap: m_full <= lower,
    })
}

/// `M(T)` samples of a physical field on a lattice covering the samples.
pub fn m_curve(u: &SpaceTimeField, t_samples: &[f64]) -> Result<MCurve> {
    m_curve_with(u, t_samples, &SplitOptions::baselines())
}

pub fn m_curve_with(u: &SpaceTimeField, t_samples: &[f64], opts: &SplitOptions) -> Result<MCurve> {
    u.require(Representation::Physical)?;
    let half = u.tgrid().half_width();
    if let Some(bad) = t_samples
        .iter()
        .find(|&&t| !(t > 0.0 && t <= half * (1.0 + 1e-12)))
    {
        return Err(LabError::Domain(format!(
            "window half-width {bad} outside (0, {half}]"
        )));
    }
    let raw: Vec<f64> = t_samples
        .par_iter()
        .map(|&t| windowed_f0(u, t, opts))
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..t_samples.len()).collect();
    order.sort_by(|&a, &b| t_samples[a].total_cmp(&t_samples[b]));
    let mut envelope = raw.clone();
    let mut running = f64::INFINITY;
    for &i in order.iter().rev() {
        running = running.min(raw[i]);
        envelope[i] = running;
    }
    Ok(MCurve {
        t: t_samples.to_vec(),
        raw,
        envelope,
    })
}

/// Integrating-factor classical Runge-Kutta on the same time lattice,
/// stepping outward from `t = 0`. Independent of the Picard machinery.
pub fn reference_solve(phi: &SpectralField, config: &SolverConfig) -> Result<SpaceTimeField> {
    config.validate()?;
    config.check_grid(phi)?;
    let tg = config.time_grid()?;
    let o = origin(&tg)?;
    let grid = *phi.grid();
    let nt = tg.len();
    let dt = tg.dt();
    // v' = -e^{-i s omega} N(e^{i s omega} v).
    let rhs = |s: f64, v: &[C64]| -> Vec<C64> {
        if !config.nonlinear {
            return vec![ZERO; v.len()];
        }
        let mut c = v.to_vec();
        phase(&grid, &mut c, s);
        let u = SpectralField::new(grid, c).expect("finite state");
        let mut n = nonlinear_term(&u, config.dealias).into_coeffs();
        phase(&grid, &mut n, -s);
        n.iter_mut().for_each(|z| *z = -*z);
        n
    };
    let mut states: Vec<Vec<C64>> = vec![Vec::new(); nt];
    states[o] = phi.coeffs().to_vec();
    for (dir, count) in [(1.0, nt - 1 - o), (-1.0, o)] {
        let h = dir * dt;
        let mut v = phi.coeffs().to_vec();
        for step in 0..count {
            let s = step as f64 * h;
            let k1 = rhs(s, &v);
            let k2 = rhs(s + h / 2.0, &shifted(&v, &k1, h / 2.0));
            let k3 = rhs(s + h / 2.0, &shifted(&v, &k2, h / 2.0));
            let k4 = rhs(s + h, &shifted(&v, &k3, h));
            let before = norm(&v);
            for i in 0..v.len() {
                v[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
            }
            let after = norm(&v);
            let growth = if before > 0.0 { after / before } else { 1.0 };
            if !after.is_finite() || growth > 10.0 {
                return Err(LabError::Stability {
                    step: step + 1,
                    time: s + h,
                    growth,
                });
            }
            let idx = if dir > 0.0 {
                o + step + 1
            } else {
                o - step - 1
            };
            states[idx] = v.clone();
        }
    }
    let slices: Vec<SpectralField> = states
        .into_par_iter()
        .enumerate()
        .map(|(i, mut c)| {
            phase(&grid, &mut c, rel_time(&tg, o, i));
            SpectralField::new(grid, c)
        })
        .collect::<Result<_>>()?;
    SpaceTimeField::from_slices(tg, &slices)
}

fn shifted(v: &[C64], k: &[C64], a: f64) -> Vec<C64> {
    v.iter().zip(k).map(|(x, y)| x + y * a).collect()
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Relative `L^2_x` distance of two physical fields at the final lattice time.
pub fn final_time_distance(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<f64> {
    let (sa, sb) = (a.time_slice(a.nt() - 1)?, b.time_slice(b.nt() - 1)?);
    let d = sa.sub(&sb)?.l2_norm();
    let n = sa.l2_norm();
    Ok(if n > 0.0 { d / n } else { d })
}

/// Observed order of the reference stepper under step halving.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderStudy {
    pub n_t: [usize; 3],
    /// `||u_dt(T) - u_{dt/2}(T)||` and `||u_{dt/2}(T) - u_{dt/4}(T)||`.
    pub differences: [f64; 2],
    pub order: f64,
}

/// Runs the reference stepper at `dt`, `dt/2`, `dt/4` and estimates the
/// order from successive final-time differences.
pub fn oracle_order(phi: &SpectralField, config: &SolverConfig) -> Result<OrderStudy> {
    let n0 = config.n_t;
    let n_t = [n0, 2 * n0 - 1, 4 * n0 - 3];
    let finals: Vec<SpectralField> = n_t
        .par_iter()
        .map(|&n| {
            let c = SolverConfig {
                n_t: n,
                ..config.clone()
            };
            reference_solve(phi, &c).and_then(|u| u.time_slice(u.nt() - 1))
        })
        .collect::<Result<_>>()?;
    let d1 = finals[0].sub(&finals[1])?.l2_norm();
    let d2 = finals[1].sub(&finals[2])?.l2_norm();
    Ok(OrderStudy {
        n_t,
        differences: [d1, d2],
        order: (d1 / d2).log2(),
    })
}

/// Verdict of the contraction monitor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionVerdict {
    /// `exp` of the least-squares slope of `log d_n` against `n`.
    pub fitted_ratio: f64,
    /// `d_{n+1} <= d_n` for every `n >= 2`.
    pub monotone: bool,
    pub pass: bool,
}

/// Fits `log d_n` against `n` over the nonzero differences; passes when
/// the fitted ratio is at most 0.75 and the differences decrease from
/// `n = 2` on.
pub fn contraction_monitor(trace: &IterationTrace) -> Result<ContractionVerdict> {
    let d = trace.differences();
    if d.len() < 4 {
        return Err(LabError::InsufficientData(format!(
            "contraction fit needs at least 4 iterations, trace has {}",
            d.len()
        )));
    }
    let pts: Vec<(f64, f64)> = d
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > 0.0)
        .map(|(i, &x)| ((i + 1) as f64, x.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(LabError::InsufficientData(
            "fewer than 2 nonzero differences".into(),
        ));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + (x - mx) * (y - my), b + (x - mx).powi(2))
    });
    let fitted_ratio = (num / den).exp();
    // d is indexed from n = 1, so d[1..] starts at n = 2.
    let monotone = d[1..].windows(2).all(|w| w[1] <= w[0]);
    Ok(ContractionVerdict {
        fitted_ratio,
        monotone,
        pass: fitted_ratio <= 0.75 && monotone,
    })
}

/// Outcome of a paired solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LipschitzProbe {
    pub sigma: f64,
    /// `sup_t ||u(t) - u'(t)||` in `H~^sigma`.
    pub solution_distance: f64,
    /// `||phi - phi'||` in `H~^sigma`.
    pub data_distance: f64,
    pub ratio: f64,
    /// Set when the data coincide; the ratio is then reported as 0.
    pub identical: bool,
}

/// Solves from `phi` and `phi2` (concurrently) and compares.
pub fn lipschitz_probe(
    phi: &SpectralField,
    phi2: &SpectralField,
    sigma: f64,
    config: &SolverConfig,
) -> Result<LipschitzProbe> {
    let opts = config.norm_options();
    let data_distance = hsigma_tilde_norm_with(&phi.sub(phi2)?, sigma, &opts)?.value;
    if data_distance == 0.0 {
        return Ok(LipschitzProbe {
            sigma,
            solution_distance: 0.0,
            data_distance,
            ratio: 0.0,
            identical: true,
        });
    }
    let (a, b) = rayon::join(|| picard_solve(phi, config), || picard_solve(phi2, config));
    let (ua, ub) = (slices_of(&a?.0)?, slices_of(&b?.0)?);
    let diff = sub_slices(&ua, &ub);
    let per: Vec<f64> = diff
        .par_iter()
        .map(|s| hsigma_tilde_norm_with(s, 0.0, &opts).map(|r| hsigma_family(&r, &[sigma])[0]))
        .collect::<Result<_>>()?;
    let solution_distance = per.into_iter().fold(0.0, f64::max);
    Ok(LipschitzProbe {
        sigma,
        solution_distance,
        data_distance,
        ratio: solution_distance / data_distance,
        identical: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::psi;

    fn small_config() -> SolverConfig {
        SolverConfig {
            period: 32.0,
            n_points: 64,
            n_t: 33,
            ..SolverConfig::default()
        }
    }

    fn bump(grid: FrequencyGrid, a: f64) -> SpectralField {
        SpectralField::from_fn(grid, |x| C64::new(a * (-x * x / 4.0).exp(), 0.0))
    }

    #[test]
    fn cumulative_quadrature_is_exact_on_cubics() {
        let h = 0.1;
        let g: Vec<Vec<C64>> = (0..9)
            .map(|i| {
                let s = i as f64 * h;
                vec![C64::new(s * s * s - 2.0 * s + 1.0, s * s)]
            })
            .collect();
        let out = cumulative(&g, h);
        for (k, c) in out.iter().enumerate() {
            let s: f64 = k as f64 * h;
            let exact = C64::new(s.powi(4) / 4.0 - s * s + s, s.powi(3) / 3.0);
            assert!((c[0] - exact).norm() < 1e-13, "k={k}: {} vs {exact}", c[0]);
        }
    }

    #[test]
    fn zero_data_converges_at_once() {
        let cfg = small_config();
        let phi = SpectralField::zeros(cfg.frequency_grid().unwrap());
        let (u, trace) = picard_solve(&phi, &cfg).unwrap();
        assert_eq!(trace.iterations(), 1);
        assert!(trace.converged);
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn duhamel_vanishes_at_origin() {
        let cfg = small_config();
        let g = cfg.frequency_grid().unwrap();
        let tg = cfg.time_grid().unwrap();
        let u = linear_flow(&bump(g, 0.3), tg).unwrap();
        let d = duhamel(&u, true).unwrap();
        let o = tg.origin().unwrap();
        assert!(d.time_slice(o).unwrap().l2_norm() == 0.0);
        assert!(d.max_abs() > 0.0);
    }

    #[test]
    fn linear_reference_is_free_evolution() {
        let cfg = SolverConfig {
            nonlinear: false,
            ..small_config()
        };
        let phi = bump(cfg.frequency_grid().unwrap(), 0.5);
        let u = reference_solve(&phi, &cfg).unwrap();
        let w = free_evolution(&phi, cfg.half_width);
        let end = u.time_slice(u.nt() - 1).unwrap();
        assert!(end.sub(&w).unwrap().l2_norm() <= 1e-12 * w.l2_norm());
    }

    #[test]
    fn small_bump_agrees_with_reference() {
        let cfg = small_config();
        let phi = bump(cfg.frequency_grid().unwrap(), 0.01);
        let (u, trace) = picard_solve(&phi, &cfg).unwrap();
        assert!(trace.converged, "{:?}", trace.differences());
        let r = reference_solve(&phi, &cfg).unwrap();
        let dist = final_time_distance(&u, &r).unwrap();
        assert!(dist < 1e-6, "{dist}");
        let res = trace.residual.unwrap();
        assert!(res.fixed_point_defect < 1e-9, "{res:?}");
        let c = trace.conservation.unwrap();
        assert!(c.mass_drift < 1e-12);
        assert!(c.l2_drift.unwrap() < 1e-6);
    }

    #[test]
    fn synthetic_traces() {
        let geometric: Vec<f64> = (1..=8).map(|n| 2f64.powi(-n)).collect();
        let v = contraction_monitor(&IterationTrace::from_differences(&geometric)).unwrap();
        assert!((v.fitted_ratio - 0.5).abs() < 1e-12);
        assert!(v.pass);
        let flat = contraction_monitor(&IterationTrace::from_differences(&[1.0; 6])).unwrap();
        assert!(!flat.pass);
        assert!(matches!(
            contraction_monitor(&IterationTrace::from_differences(&[1.0, 0.5])),
            Err(LabError::InsufficientData(_))
        ));
    }

    #[test]
    fn m_curve_of_stationary_field_is_monotone() {
        let g = FrequencyGrid::new(32.0, 64).unwrap();
        let tg = TimeGrid::new(1.0, 33).unwrap();
        let u = SpaceTimeField::from_physical_fn(g, tg, |x, _| C64::new(psi(x / 3.0), 0.0));
        let ts: Vec<f64> = (1..=8).map(|i| i as f64 / 8.0).collect();
        let c = m_curve(&u, &ts).unwrap();
        for w in c.envelope.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
        let zero = SpaceTimeField::zeros(g, tg, Representation::Physical);
        assert!(m_curve(&zero, &ts).unwrap().raw.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identical_data_probe() {
        let cfg = small_config();
        let phi = bump(cfg.frequency_grid().unwrap(), 0.01);
        let p = lipschitz_probe(&phi, &phi, 0.0, &cfg).unwrap();
        assert!(p.identical);
        assert_eq!(p.ratio, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig {
            n_t: 256,
            ..SolverConfig::default()
        }
        .validate()
        .is_err());
        assert!(SolverConfig {
            half_width: 2.0,
            ..SolverConfig::default()
        }
        .validate()
        .is_err());
        let c = SolverConfig::default().with_dt(1.0 / 256.0).unwrap();
        assert_eq!(c.n_t, 513);
        assert!(SolverConfig::default().with_dt(0.3).is_err());
    }
}
