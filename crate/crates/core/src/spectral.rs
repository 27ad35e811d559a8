//! Periodic lattices, Fourier transforms and the linear Benjamin-Ono operators.
//!
//! Conventions: the forward transform is `F(f)(xi) = int f(x) e^{-i x xi} dx`,
//! the inverse carries `1/(2 pi)`. Both are realized by discrete sums scaled
//! with the lattice spacings so that discrete norms approximate continuum
//! norms. The spatial lattice is `x_n = -L/2 + n dx`, the frequency lattice
//! `xi_m = 2 pi m / L` for `m` in `[-N/2, N/2)`, stored in FFT order.

use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::fft;

pub type C64 = Complex64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Periodic spatial lattice and its dual frequency lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    period: f64,
    n_points: usize,
}

impl FrequencyGrid {
    pub fn new(period: f64, n_points: usize) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(LabError::Domain(format!(
                "period must be positive, got {period}"
            )));
        }
        if n_points < 4 || !n_points.is_power_of_two() {
            return Err(LabError::Domain(format!(
                "point count must be a power of two >= 4, got {n_points}"
            )));
        }
        Ok(Self { period, n_points })
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.period / self.n_points as f64
    }

    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn x(&self, i: usize) -> f64 {
        -0.5 * self.period + i as f64 * self.dx()
    }

    pub fn mode(&self, i: usize) -> i64 {
        fft::signed_mode(i, self.n_points)
    }

    /// FFT-order index of signed mode `m`.
    pub fn index_of(&self, m: i64) -> usize {
        m.rem_euclid(self.n_points as i64) as usize
    }

    pub fn xi(&self, i: usize) -> f64 {
        self.mode(i) as f64 * self.dxi()
    }

    pub fn nyquist_index(&self) -> usize {
        self.n_points / 2
    }

    /// Largest representable `|xi|` (the Nyquist frequency).
    pub fn xi_max(&self) -> f64 {
        PI * self.n_points as f64 / self.period
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.xi(i)).collect()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }
}

/// Uniform time lattice `t_i = -T + i dt` on `[-T, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    half_width: f64,
    n_points: usize,
}

impl TimeGrid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(LabError::Domain(format!(
                "time half-width must be positive, got {half_width}"
            )));
        }
        if n_points < 2 {
            return Err(LabError::Domain(
                "time lattice needs at least 2 points".into(),
            ));
        }
        Ok(Self {
            half_width,
            n_points,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        2.0 * self.half_width / (self.n_points - 1) as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dt()
    }

    /// Index of `t = 0`, when it lies on the lattice.
    pub fn origin(&self) -> Option<usize> {
        (self.n_points % 2 == 1).then_some(self.n_points / 2)
    }

    pub fn dtau(&self) -> f64 {
        2.0 * PI / (self.n_points as f64 * self.dt())
    }

    pub fn tau(&self, q: usize) -> f64 {
        fft::signed_mode(q, self.n_points) as f64 * self.dtau()
    }

    /// Same spacing, twice the half-width (`2 n - 1` points).
    pub fn doubled(&self) -> Self {
        Self {
            half_width: 2.0 * self.half_width,
            n_points: 2 * self.n_points - 1,
        }
    }
}

/// Fourier coefficients `F(phi)(xi_m)` of a function on the periodic lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: FrequencyGrid,
    coeffs: Vec<C64>,
}

impl SpectralField {
    pub fn new(grid: FrequencyGrid, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(LabError::Size {
                expected: grid.len(),
                actual: coeffs.len(),
            });
        }
        if coeffs
            .iter()
            .any(|c| !(c.re.is_finite() && c.im.is_finite()))
        {
            return Err(LabError::Domain("non-finite Fourier coefficient".into()));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: FrequencyGrid) -> Self {
        Self {
            grid,
            coeffs: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Builds coefficients from a function of the frequency.
    pub fn from_symbol(grid: FrequencyGrid, f: impl Fn(f64) -> C64) -> Self {
        let coeffs = (0..grid.len()).map(|i| f(grid.xi(i))).collect();
        Self { grid, coeffs }
    }

    /// Forward transform of a function sampled on the spatial lattice.
    pub fn from_fn(grid: FrequencyGrid, f: impl Fn(f64) -> C64) -> Self {
        let samples: Vec<C64> = grid.points().into_iter().map(f).collect();
        forward_transform(grid, &samples).expect("length matches by construction")
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn coeff_at_mode(&self, m: i64) -> C64 {
        self.coeffs[self.grid.index_of(m)]
    }

    pub fn to_physical(&self) -> Vec<C64> {
        inverse_transform(self)
    }

    /// Continuum `L^2_xi` norm, `(int |F|^2 dxi)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.dxi() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `L^1_x` norm of the physical function.
    pub fn l1_physical(&self) -> f64 {
        self.grid.dx() * self.to_physical().iter().map(|c| c.norm()).sum::<f64>()
    }

    /// `L^2_x` norm of the physical function.
    pub fn l2_physical(&self) -> f64 {
        let s: f64 = self.to_physical().iter().map(|c| c.norm_sqr()).sum();
        (self.grid.dx() * s).sqrt()
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|_, v| v * c)
    }

    pub fn map(&self, f: impl Fn(f64, C64) -> C64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &v)| f(self.grid.xi(i), v))
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(LabError::Size {
                expected: self.grid.len(),
                actual: other.grid.len(),
            });
        }
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self {
            grid: self.grid,
            coeffs,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Copy with the Nyquist coefficient set to zero.
    pub fn without_nyquist(&self) -> Self {
        let mut out = self.clone();
        out.coeffs[self.grid.nyquist_index()] = C64::new(0.0, 0.0);
        out
    }

    /// Largest `|f|` over the outer sixteenth of the box on each side,
    /// relative to `max |f|`. Monitors leakage of the periodic truncation.
    pub fn boundary_decay(&self) -> f64 {
        let phys = self.to_physical();
        let n = phys.len();
        let edge = (n / 16).max(1);
        let peak = phys.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let edge_max = phys[..edge]
            .iter()
            .chain(&phys[n - edge..])
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        edge_max / peak
    }
}

/// Forward transform of lattice samples.
pub fn forward_transform(grid: FrequencyGrid, samples: &[C64]) -> Result<SpectralField> {
    if samples.len() != grid.len() {
        return Err(LabError::Size {
            expected: grid.len(),
            actual: samples.len(),
        });
    }
    let mut buf = samples.to_vec();
    fft::forward(&mut buf);
    let dx = grid.dx();
    // x_0 = -L/2 contributes the phase e^{i pi m} = (-1)^m.
    for (i, c) in buf.iter_mut().enumerate() {
        let sign = if i % 2 == 0 { dx } else { -dx };
        *c *= sign;
    }
    SpectralField::new(grid, buf)
}

/// Physical samples of a spectral field.
pub fn inverse_transform(field: &SpectralField) -> Vec<C64> {
    let grid = field.grid;
    let scale = 1.0 / grid.period();
    let mut buf: Vec<C64> = field
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| if i % 2 == 0 { c * scale } else { -c * scale })
        .collect();
    fft::inverse(&mut buf);
    buf
}

/// Dispersion relation of the linearized equation.
pub fn dispersion_symbol(xi: f64) -> f64 {
    -xi * xi.abs()
}

fn sgn(xi: f64) -> f64 {
    if xi > 0.0 {
        1.0
    } else if xi < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Hilbert transform: multiplier `-i sgn(xi)`, with `sgn(0) = 0` and the
/// Nyquist mode annihilated.
pub fn hilbert_transform(f: &SpectralField) -> SpectralField {
    let nyq = f.grid.nyquist_index();
    let mut out = f.map(|xi, c| c * (-I * sgn(xi)));
    out.coeffs[nyq] = C64::new(0.0, 0.0);
    out
}

/// Free evolution `W(t)`: multiplier `e^{i t omega(xi)}` on every mode.
pub fn free_evolution(phi: &SpectralField, t: f64) -> SpectralField {
    phi.map(|xi, c| c * C64::from_polar(1.0, t * dispersion_symbol(xi)))
}

/// Dilation `lambda phi(lambda x)` for `lambda` in `(0, 1]`.
///
/// The source is evaluated at `lambda x_n` through its trigonometric
/// interpolant, which is exact band-limited interpolation on the periodic
/// lattice. The Nyquist term enters as the real cosine mode.
pub fn dilate(phi: &SpectralField, lambda: f64) -> Result<SpectralField> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(LabError::Domain(format!(
            "dilation parameter must lie in (0, 1], got {lambda}"
        )));
    }
    if lambda == 1.0 {
        return Ok(phi.clone());
    }
    let grid = phi.grid;
    let n = grid.len();
    let nyq = grid.nyquist_index();
    let scale = 1.0 / grid.period();
    let samples: Vec<C64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let y = lambda * grid.x(i);
            let step = C64::from_polar(1.0, y * grid.dxi());
            let mut acc = phi.coeffs[0];
            let (mut up, mut down) = (step, step.conj());
            for m in 1..nyq as i64 {
                acc += phi.coeff_at_mode(m) * up + phi.coeff_at_mode(-m) * down;
                up *= step;
                down *= step.conj();
            }
            acc += phi.coeffs[nyq] * (y * grid.xi_max()).cos();
            acc * (scale * lambda)
        })
        .collect();
    forward_transform(grid, &samples)
}

/// `|omega(xi1 + xi2) - omega(xi1) - omega(xi2)| - 2 min * med` over the
/// triple `(|xi1|, |xi2|, |xi1 + xi2|)`. Vanishes identically.
pub fn dispersive_identity_gap(xi1: f64, xi2: f64) -> f64 {
    let resonance =
        (dispersion_symbol(xi1 + xi2) - dispersion_symbol(xi1) - dispersion_symbol(xi2)).abs();
    let (a, b, c) = (xi1.abs(), xi2.abs(), (xi1 + xi2).abs());
    let max = a.max(b).max(c);
    let min = a.min(b).min(c);
    let med = a + b + c - max - min;
    resonance - 2.0 * min * med
}

/// Physical vs. frequency representation of a space-time field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Physical,
    Frequency,
}

/// Samples on an `(x, t)` or `(xi, tau)` lattice, row-major with `x` outer.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    xgrid: FrequencyGrid,
    tgrid: TimeGrid,
    repr: Representation,
    data: Vec<C64>,
}

impl SpaceTimeField {
    pub fn new(
        xgrid: FrequencyGrid,
        tgrid: TimeGrid,
        repr: Representation,
        data: Vec<C64>,
    ) -> Result<Self> {
        let expected = xgrid.len() * tgrid.len();
        if data.len() != expected {
            return Err(LabError::Size {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            xgrid,
            tgrid,
            repr,
            data,
        })
    }

    pub fn zeros(xgrid: FrequencyGrid, tgrid: TimeGrid, repr: Representation) -> Self {
        Self {
            xgrid,
            tgrid,
            repr,
            data: vec![C64::new(0.0, 0.0); xgrid.len() * tgrid.len()],
        }
    }

    pub fn from_physical_fn(
        xgrid: FrequencyGrid,
        tgrid: TimeGrid,
        f: impl Fn(f64, f64) -> C64 + Sync,
    ) -> Self {
        Self::build(xgrid, tgrid, Representation::Physical, |ix, it| {
            f(xgrid.x(ix), tgrid.t(it))
        })
    }

    pub fn from_frequency_fn(
        xgrid: FrequencyGrid,
        tgrid: TimeGrid,
        f: impl Fn(f64, f64) -> C64 + Sync,
    ) -> Self {
        Self::build(xgrid, tgrid, Representation::Frequency, |ix, iq| {
            f(xgrid.xi(ix), tgrid.tau(iq))
        })
    }

    fn build(
        xgrid: FrequencyGrid,
        tgrid: TimeGrid,
        repr: Representation,
        f: impl Fn(usize, usize) -> C64 + Sync,
    ) -> Self {
        let nt = tgrid.len();
        let mut data = vec![C64::new(0.0, 0.0); xgrid.len() * nt];
        data.par_chunks_mut(nt).enumerate().for_each(|(ix, row)| {
            for (it, v) in row.iter_mut().enumerate() {
                *v = f(ix, it);
            }
        });
        Self {
            xgrid,
            tgrid,
            repr,
            data,
        }
    }

    /// Stacks time slices (spectral fields on a shared grid) into a physical field.
    pub fn from_slices(tgrid: TimeGrid, slices: &[SpectralField]) -> Result<Self> {
        if slices.len() != tgrid.len() {
            return Err(LabError::Size {
                expected: tgrid.len(),
                actual: slices.len(),
            });
        }
        let xgrid = slices[0].grid;
        let nt = tgrid.len();
        let mut data = vec![C64::new(0.0, 0.0); xgrid.len() * nt];
        for (it, s) in slices.iter().enumerate() {
            for (ix, v) in s.to_physical().into_iter().enumerate() {
                data[ix * nt + it] = v;
            }
        }
        Self::new(xgrid, tgrid, Representation::Physical, data)
    }

    pub fn xgrid(&self) -> &FrequencyGrid {
        &self.xgrid
    }

    pub fn tgrid(&self) -> &TimeGrid {
        &self.tgrid
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn nx(&self) -> usize {
        self.xgrid.len()
    }

    pub fn nt(&self) -> usize {
        self.tgrid.len()
    }

    pub fn get(&self, ix: usize, it: usize) -> C64 {
        self.data[ix * self.tgrid.len() + it]
    }

    pub fn row(&self, ix: usize) -> &[C64] {
        let nt = self.tgrid.len();
        &self.data[ix * nt..(ix + 1) * nt]
    }

    pub fn require(&self, repr: Representation) -> Result<()> {
        if self.repr != repr {
            return Err(LabError::State(format!(
                "expected {repr:?} representation, field is {:?}",
                self.repr
            )));
        }
        Ok(())
    }

    /// Physical time slice `u(., t_i)` as a spectral field.
    pub fn time_slice(&self, it: usize) -> Result<SpectralField> {
        self.require(Representation::Physical)?;
        let nt = self.tgrid.len();
        let samples: Vec<C64> = (0..self.nx()).map(|ix| self.data[ix * nt + it]).collect();
        forward_transform(self.xgrid, &samples)
    }

    /// Transform `(x, t) -> (xi, tau)`.
    pub fn forward(&self) -> Result<Self> {
        self.require(Representation::Physical)?;
        let (nx, nt) = (self.nx(), self.nt());
        let (dx, dt) = (self.xgrid.dx(), self.tgrid.dt());
        let t0 = self.tgrid.t(0);
        let mut data = self.data.clone();
        // t-transform along contiguous rows; t_0 = -T contributes e^{-i t_0 tau}.
        let tphase: Vec<C64> = (0..nt)
            .map(|q| C64::from_polar(dt, -t0 * self.tgrid.tau(q)))
            .collect();
        data.par_chunks_mut(nt).for_each(|row| {
            fft::forward(row);
            for (v, p) in row.iter_mut().zip(&tphase) {
                *v *= p;
            }
        });
        let mut data = transpose(&data, nx, nt);
        data.par_chunks_mut(nx).for_each(|col| {
            fft::forward(col);
            for (i, v) in col.iter_mut().enumerate() {
                *v *= if i % 2 == 0 { dx } else { -dx };
            }
        });
        let data = transpose(&data, nt, nx);
        Ok(Self {
            xgrid: self.xgrid,
            tgrid: self.tgrid,
            repr: Representation::Frequency,
            data,
        })
    }

    /// Transform `(xi, tau) -> (x, t)`.
    pub fn inverse(&self) -> Result<Self> {
        self.require(Representation::Frequency)?;
        let (nx, nt) = (self.nx(), self.nt());
        let t0 = self.tgrid.t(0);
        let xscale = 1.0 / self.xgrid.period();
        let tscale = 1.0 / (nt as f64 * self.tgrid.dt());
        let tphase: Vec<C64> = (0..nt)
            .map(|q| C64::from_polar(tscale, t0 * self.tgrid.tau(q)))
            .collect();
        let mut data = self.data.clone();
        data.par_chunks_mut(nt).for_each(|row| {
            for (v, p) in row.iter_mut().zip(&tphase) {
                *v *= p;
            }
            fft::inverse(row);
        });
        let mut data = transpose(&data, nx, nt);
        data.par_chunks_mut(nx).for_each(|col| {
            for (i, v) in col.iter_mut().enumerate() {
                *v *= if i % 2 == 0 { xscale } else { -xscale };
            }
            fft::inverse(col);
        });
        let data = transpose(&data, nt, nx);
        Ok(Self {
            xgrid: self.xgrid,
            tgrid: self.tgrid,
            repr: Representation::Physical,
            data,
        })
    }

    /// This field in frequency representation, transforming if needed.
    pub fn in_frequency(&self) -> Self {
        match self.repr {
            Representation::Frequency => self.clone(),
            Representation::Physical => self.forward().expect("representation checked"),
        }
    }

    pub fn in_physical(&self) -> Self {
        match self.repr {
            Representation::Physical => self.clone(),
            Representation::Frequency => self.inverse().expect("representation checked"),
        }
    }

    /// Zero-extends a physical field to the doubled time lattice.
    pub fn pad_time(&self) -> Result<Self> {
        self.require(Representation::Physical)?;
        let nt = self.nt();
        let tgrid = self.tgrid.doubled();
        let nt2 = tgrid.len();
        let offset = (nt2 - nt) / 2;
        let mut data = vec![C64::new(0.0, 0.0); self.nx() * nt2];
        for ix in 0..self.nx() {
            data[ix * nt2 + offset..ix * nt2 + offset + nt].copy_from_slice(self.row(ix));
        }
        Self::new(self.xgrid, tgrid, Representation::Physical, data)
    }

    /// Pointwise map with access to the lattice coordinates of the current
    /// representation (`(x, t)` or `(xi, tau)`).
    pub fn map(&self, f: impl Fn(f64, f64, C64) -> C64 + Sync) -> Self {
        let nt = self.nt();
        let (xg, tg, repr) = (self.xgrid, self.tgrid, self.repr);
        let mut data = self.data.clone();
        data.par_chunks_mut(nt).enumerate().for_each(|(ix, row)| {
            let a = match repr {
                Representation::Physical => xg.x(ix),
                Representation::Frequency => xg.xi(ix),
            };
            for (it, v) in row.iter_mut().enumerate() {
                let b = match repr {
                    Representation::Physical => tg.t(it),
                    Representation::Frequency => tg.tau(it),
                };
                *v = f(a, b, *v);
            }
        });
        Self {
            xgrid: xg,
            tgrid: tg,
            repr,
            data,
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|_, _, v| v * c)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.xgrid != other.xgrid || self.tgrid != other.tgrid {
            return Err(LabError::Size {
                expected: self.data.len(),
                actual: other.data.len(),
            });
        }
        if self.repr != other.repr {
            return Err(LabError::State("representations differ".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    /// Quadrature cell area of the current representation.
    pub fn cell_area(&self) -> f64 {
        match self.repr {
            Representation::Physical => self.xgrid.dx() * self.tgrid.dt(),
            Representation::Frequency => self.xgrid.dxi() * self.tgrid.dtau(),
        }
    }

    /// `L^2` norm in the current representation.
    pub fn l2_norm(&self) -> f64 {
        (self.cell_area() * self.data.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

pub(crate) fn transpose(data: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); data.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = data[r * cols + c];
        }
    }
    out
}

/// Norms of the Benjamin-Ono residual `u_t + H u_xx + (u^2/2)_x`.
#[derive(Clone, Debug)]
pub struct PdeResidual {
    pub field: SpaceTimeField,
    pub max_abs: f64,
    pub l2: f64,
}

/// Spectral-in-`x`, fourth-order-in-`t` residual of the evolution equation.
/// The quadratic term is dealiased with the 2/3 rule.
pub fn pde_residual(u: &SpaceTimeField) -> Result<PdeResidual> {
    pde_residual_with(u, true)
}

pub fn pde_residual_with(u: &SpaceTimeField, dealias: bool) -> Result<PdeResidual> {
    u.require(Representation::Physical)?;
    let (nx, nt) = (u.nx(), u.nt());
    if nt < 5 {
        return Err(LabError::TooSmall(format!(
            "residual needs at least 5 time points, got {nt}"
        )));
    }
    let dt = u.tgrid.dt();
    let grid = u.xgrid;
    // Spatial part per time slice.
    let spatial: Vec<Vec<C64>> = (0..nt)
        .into_par_iter()
        .map(|it| {
            let slice = u.time_slice(it).expect("physical");
            let lin = linear_spatial_term(&slice);
            let nl = nonlinear_term(&slice, dealias);
            lin.add(&nl).expect("same grid").to_physical()
        })
        .collect();
    let mut data = vec![C64::new(0.0, 0.0); nx * nt];
    for ix in 0..nx {
        let row = u.row(ix);
        for it in 0..nt {
            let dudt = time_derivative(row, it, dt);
            data[ix * nt + it] = dudt + spatial[it][ix];
        }
    }
    let field = SpaceTimeField::new(grid, u.tgrid, Representation::Physical, data)?;
    let max_abs = field.max_abs();
    let l2 = field.l2_norm();
    Ok(PdeResidual { field, max_abs, l2 })
}

/// Fourth-order finite difference of `row` at index `i`.
fn time_derivative(row: &[C64], i: usize, dt: f64) -> C64 {
    let n = row.len();
    let h = 12.0 * dt;
    let u = |k: usize| row[k];
    if i >= 2 && i + 2 < n {
        (-u(i + 2) + u(i + 1) * 8.0 - u(i - 1) * 8.0 + u(i - 2)) / h
    } else if i == 0 {
        (u(0) * -25.0 + u(1) * 48.0 - u(2) * 36.0 + u(3) * 16.0 - u(4) * 3.0) / h
    } else if i == 1 {
        (u(0) * -3.0 - u(1) * 10.0 + u(2) * 18.0 - u(3) * 6.0 + u(4)) / h
    } else if i == n - 1 {
        (u(n - 1) * 25.0 - u(n - 2) * 48.0 + u(n - 3) * 36.0 - u(n - 4) * 16.0 + u(n - 5) * 3.0) / h
    } else {
        (u(n - 1) * 3.0 + u(n - 2) * 10.0 - u(n - 3) * 18.0 + u(n - 4) * 6.0 - u(n - 5)) / h
    }
}

/// `H d_x^2 u` in Fourier space: multiplier `i sgn(xi) xi^2`, Nyquist zeroed.
pub fn linear_spatial_term(u: &SpectralField) -> SpectralField {
    let nyq = u.grid.nyquist_index();
    let mut out = u.map(|xi, c| c * (I * sgn(xi) * xi * xi));
    out.coeffs[nyq] = C64::new(0.0, 0.0);
    out
}

/// Keeps `|m| < N/3`, the alias-free band for quadratic products.
pub fn dealias_mask(grid: &FrequencyGrid, i: usize) -> bool {
    3 * grid.mode(i).unsigned_abs() < grid.len() as u64
}

/// Fourier coefficients of `u^2` (physical product, 2/3-rule truncated when
/// `dealias` is set).
pub fn square(u: &SpectralField, dealias: bool) -> SpectralField {
    let grid = u.grid;
    let src = if dealias {
        u.map_indexed(|i, c| {
            if dealias_mask(&grid, i) {
                c
            } else {
                C64::new(0.0, 0.0)
            }
        })
    } else {
        u.without_nyquist()
    };
    let phys = src.to_physical();
    let sq: Vec<C64> = phys.iter().map(|v| v * v).collect();
    let out = forward_transform(grid, &sq).expect("same length");
    if dealias {
        out.map_indexed(|i, c| {
            if dealias_mask(&grid, i) {
                c
            } else {
                C64::new(0.0, 0.0)
            }
        })
    } else {
        out.without_nyquist()
    }
}

/// `d_x (u^2 / 2)` in Fourier space.
pub fn nonlinear_term(u: &SpectralField, dealias: bool) -> SpectralField {
    let nyq = u.grid.nyquist_index();
    let mut out = square(u, dealias).map(|xi, c| c * (0.5 * I * xi));
    out.coeffs[nyq] = C64::new(0.0, 0.0);
    out
}

impl SpectralField {
    pub(crate) fn map_indexed(&self, f: impl Fn(usize, C64) -> C64) -> Self {
        Self {
            grid: self.grid,
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| f(i, c))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::new(64.0, 256).unwrap()
    }

    fn random_field(grid: FrequencyGrid, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<C64> = (0..grid.len())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        forward_transform(grid, &samples).unwrap()
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(FrequencyGrid::new(64.0, 100).is_err());
        assert!(FrequencyGrid::new(-1.0, 64).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
    }

    #[test]
    fn zero_transforms_to_zero() {
        let g = grid();
        let f = forward_transform(g, &vec![C64::new(0.0, 0.0); g.len()]).unwrap();
        assert!(f.coeffs().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn single_exponential_is_single_mode_of_value_period() {
        let g = grid();
        let xi1 = g.dxi();
        let samples: Vec<C64> = g
            .points()
            .iter()
            .map(|&x| C64::from_polar(1.0, xi1 * x))
            .collect();
        let f = forward_transform(g, &samples).unwrap();
        for (i, c) in f.coeffs().iter().enumerate() {
            let expected = if g.mode(i) == 1 { g.period() } else { 0.0 };
            assert!(
                (c - C64::new(expected, 0.0)).norm() < 1e-11,
                "mode {}",
                g.mode(i)
            );
        }
    }

    #[test]
    fn length_mismatch_is_size_error() {
        let err = forward_transform(grid(), &[C64::new(1.0, 0.0); 3]).unwrap_err();
        assert!(matches!(
            err,
            LabError::Size {
                expected: 256,
                actual: 3
            }
        ));
    }

    #[test]
    fn round_trip_random() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<C64> = (0..g.len())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let back = inverse_transform(&forward_transform(g, &samples).unwrap());
        let err: f64 = samples
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let norm: f64 = samples.iter().map(|a| a.norm_sqr()).sum();
        assert!((err / norm).sqrt() < 1e-12);
    }

    #[test]
    fn gaussian_transform_matches_continuum() {
        let g = FrequencyGrid::new(40.0, 256).unwrap();
        let f = SpectralField::from_fn(g, |x| C64::new((-x * x / 2.0).exp(), 0.0));
        for i in 0..g.len() {
            let xi = g.xi(i);
            let exact = (2.0 * PI).sqrt() * (-xi * xi / 2.0).exp();
            assert!((f.coeffs()[i] - C64::new(exact, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dispersion_examples() {
        assert_eq!(dispersion_symbol(0.0), 0.0);
        assert_eq!(dispersion_symbol(2.0), -4.0);
        assert_eq!(dispersion_symbol(-3.0), 9.0);
    }

    #[test]
    fn hilbert_single_positive_mode() {
        let g = grid();
        let mut f = SpectralField::zeros(g);
        f.coeffs_mut()[g.index_of(3)] = C64::new(1.0, 0.0);
        let h = hilbert_transform(&f);
        assert_eq!(h.coeff_at_mode(3), C64::new(0.0, -1.0));
    }

    #[test]
    fn hilbert_preserves_realness() {
        let g = grid();
        let f = SpectralField::from_fn(g, |x| {
            C64::new((-(x - 1.0).powi(2)).exp() * (2.0 * x).cos(), 0.0)
        });
        let h = hilbert_transform(&f).to_physical();
        let max_im = h.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
        assert!(max_im < 1e-14, "imaginary part {max_im}");
    }

    #[test]
    fn hilbert_squared_is_minus_identity_off_zero_mode() {
        let g = grid();
        let f = random_field(g, 11).without_nyquist();
        let hh = hilbert_transform(&hilbert_transform(&f));
        for i in 0..g.len() {
            let expected = if i == 0 {
                C64::new(0.0, 0.0)
            } else {
                -f.coeffs()[i]
            };
            assert_eq!(hh.coeffs()[i], expected);
        }
    }

    #[test]
    fn free_evolution_examples() {
        let g = FrequencyGrid::new(2.0 * PI, 16).unwrap();
        let f = random_field(g, 3);
        assert_eq!(free_evolution(&f, 0.0), f);
        let mut one = SpectralField::zeros(g);
        one.coeffs_mut()[g.index_of(1)] = C64::new(1.0, 0.0);
        let w = free_evolution(&one, PI);
        assert!((w.coeff_at_mode(1) - C64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn free_evolution_is_unitary_and_a_group() {
        let g = grid();
        let f = random_field(g, 5);
        let (s, t) = (0.37, -0.81);
        let ws = free_evolution(&free_evolution(&f, t), s);
        let wst = free_evolution(&f, s + t);
        for i in 0..g.len() {
            let (a, b) = (f.coeffs()[i].norm(), ws.coeffs()[i].norm());
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * a);
            assert!((ws.coeffs()[i] - wst.coeffs()[i]).norm() <= 1e-12 * a.max(1e-300));
        }
        assert!((free_evolution(&f, t).l2_norm() - f.l2_norm()).abs() < 1e-12 * f.l2_norm());
    }

    #[test]
    fn dilation_rejects_bad_lambda() {
        let f = random_field(grid(), 1);
        assert!(dilate(&f, 0.0).is_err());
        assert!(dilate(&f, 1.5).is_err());
        assert_eq!(dilate(&f, 1.0).unwrap(), f);
    }

    #[test]
    fn dilation_preserves_l1_of_gaussian() {
        let g = FrequencyGrid::new(128.0, 1024).unwrap();
        let f = SpectralField::from_fn(g, |x| C64::new((-x * x / 2.0).exp(), 0.0));
        let d = dilate(&f, 0.5).unwrap();
        assert!((d.l1_physical() - f.l1_physical()).abs() < 1e-10);
        // samples equal lambda phi(lambda x)
        let phys = d.to_physical();
        for (i, v) in phys.iter().enumerate().step_by(37) {
            let x = g.x(i);
            let exact = 0.5 * (-(0.5 * x).powi(2) / 2.0).exp();
            assert!((v - C64::new(exact, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dispersive_identity_examples() {
        assert_eq!(dispersive_identity_gap(1.0, 1.0), 0.0);
        assert_eq!(dispersive_identity_gap(2.5, -2.5), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let (a, b): (f64, f64) = (rng.gen_range(-1e3..1e3), rng.gen_range(-1e3..1e3));
            let gap = dispersive_identity_gap(a, b).abs();
            assert!(gap <= 1e-9 * (1.0 + a.abs() + b.abs()).powi(2));
        }
    }

    #[test]
    fn residual_of_zero_is_zero() {
        let xg = FrequencyGrid::new(16.0, 32).unwrap();
        let tg = TimeGrid::new(1.0, 9).unwrap();
        let u = SpaceTimeField::zeros(xg, tg, Representation::Physical);
        let r = pde_residual(&u).unwrap();
        assert_eq!(r.max_abs, 0.0);
        assert_eq!(r.l2, 0.0);
    }

    #[test]
    fn residual_needs_five_times() {
        let xg = FrequencyGrid::new(16.0, 32).unwrap();
        let tg = TimeGrid::new(1.0, 4).unwrap();
        let u = SpaceTimeField::zeros(xg, tg, Representation::Physical);
        assert!(matches!(pde_residual(&u), Err(LabError::TooSmall(_))));
    }

    #[test]
    fn residual_of_free_wave_scales_quadratically() {
        let xg = FrequencyGrid::new(2.0 * PI * 8.0, 64).unwrap();
        let tg = TimeGrid::new(1.0, 129).unwrap();
        let residual = |a: f64| {
            let mut phi = SpectralField::zeros(xg);
            phi.coeffs_mut()[xg.index_of(2)] = C64::new(a * xg.period(), 0.0);
            let slices: Vec<SpectralField> = (0..tg.len())
                .map(|it| free_evolution(&phi, tg.t(it)))
                .collect();
            let u = SpaceTimeField::from_slices(tg, &slices).unwrap();
            pde_residual(&u).unwrap().l2
        };
        let ratio = residual(1e-3) / residual(5e-4);
        assert!((ratio - 4.0).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn space_time_round_trip() {
        let xg = FrequencyGrid::new(16.0, 32).unwrap();
        let tg = TimeGrid::new(1.0, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<C64> = (0..xg.len() * tg.len())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let u = SpaceTimeField::new(xg, tg, Representation::Physical, data).unwrap();
        let back = u.forward().unwrap().inverse().unwrap();
        assert_eq!(back.representation(), Representation::Physical);
        let err = back.sub(&u).unwrap().l2_norm() / u.l2_norm();
        assert!(err < 1e-12);
        assert!(u.inverse().is_err());
    }

    #[test]
    fn space_time_gaussian_matches_continuum() {
        let xg = FrequencyGrid::new(30.0, 128).unwrap();
        let tg = TimeGrid::new(8.0, 129).unwrap();
        let u = SpaceTimeField::from_physical_fn(xg, tg, |x, t| {
            C64::new((-(x * x + t * t) / 2.0).exp(), 0.0)
        });
        let f = u.forward().unwrap();
        for ix in (0..xg.len()).step_by(9) {
            for iq in (0..tg.len()).step_by(7) {
                let (xi, tau) = (xg.xi(ix), tg.tau(iq));
                let exact = 2.0 * PI * (-(xi * xi + tau * tau) / 2.0).exp();
                assert!((f.get(ix, iq) - C64::new(exact, 0.0)).norm() < 1e-10);
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn transform_round_trip(seed: u64) {
                let f = random_field(grid(), seed);
                let back = forward_transform(grid(), &inverse_transform(&f)).unwrap();
                for (a, b) in f.coeffs().iter().zip(back.coeffs()) {
                    prop_assert!((a - b).norm() <= 1e-13);
                }
            }

            #[test]
            fn free_flow_is_unitary_group(seed: u64, s in -2.0f64..2.0, t in -2.0f64..2.0) {
                let f = random_field(grid(), seed);
                let w = free_evolution(&f, t);
                prop_assert!((w.l2_norm() - f.l2_norm()).abs() <= 1e-12 * f.l2_norm());
                let lhs = free_evolution(&w, s);
                let rhs = free_evolution(&f, s + t);
                for (a, b) in lhs.coeffs().iter().zip(rhs.coeffs()) {
                    prop_assert!((a - b).norm() <= 1e-12);
                }
            }

            #[test]
            fn resonance_identity(a in -1e3f64..1e3, b in -1e3f64..1e3) {
                let scale = (1.0 + a.abs() + b.abs()).powi(2);
                prop_assert!(dispersive_identity_gap(a, b).abs() <= 1e-12 * scale);
            }

            #[test]
            fn hilbert_preserves_l2_off_zero_mode(seed: u64) {
                let f = random_field(grid(), seed).without_nyquist();
                let g = f.map(|xi, c| if xi == 0.0 { C64::new(0.0, 0.0) } else { c });
                let h = hilbert_transform(&g);
                prop_assert!((h.l2_norm() - g.l2_norm()).abs() <= 1e-12 * g.l2_norm());
            }
        }
    }
}
