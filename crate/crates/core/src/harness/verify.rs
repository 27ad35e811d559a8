//! Seeded property suites with one PASS/FAIL row per property.

use std::fmt::Write as _;

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::banded::Quadrature;
use crate::bilinear::{family_max, lemma37_support_scan, trichotomy_holds, BilinearKind};
use crate::checks::{all_pass, Check};
use crate::dyadic::{eta, in_modulation_band, in_shell, psi};
use crate::error::Result;
use crate::families::{standard_suite, TestFamily};
use crate::norms::{lemma21_witness, Lemma21Part, SplitOptions};
use crate::solver::{picard_solve, SolverConfig};
use crate::spectral::{
    dispersion_symbol, dispersive_identity_gap, free_evolution, hilbert_transform, FrequencyGrid,
    SpaceTimeField, SpectralField, TimeGrid, C64,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lemma21,
    Bilinear,
    Identities,
    Conservation,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma21 => "lemma21",
            Suite::Bilinear => "bilinear",
            Suite::Identities => "identities",
            Suite::Conservation => "conservation",
            Suite::All => "all",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        all_pass(&self.checks)
    }

    /// `# suite <name> seed <n>`, then one [`Check`] line per property and
    /// a closing verdict line.
    pub fn to_text(&self) -> String {
        let mut s = format!("# suite {} seed {}\n", self.suite.name(), self.seed);
        for c in &self.checks {
            let _ = writeln!(s, "{c}");
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        let _ = writeln!(s, "# {} checks, {failed} failed", self.checks.len());
        s
    }
}

/// Runs one suite (or all four, in a fixed order).
pub fn run_suite(suite: Suite, seed: u64) -> Result<VerifyReport> {
    let checks = match suite {
        Suite::Identities => identities(seed)?,
        Suite::Lemma21 => lemma21(seed)?,
        Suite::Bilinear => bilinear(seed)?,
        Suite::Conservation => conservation(seed)?,
        Suite::All => {
            let mut v = identities(seed)?;
            v.extend(lemma21(seed)?);
            v.extend(bilinear(seed)?);
            v.extend(conservation(seed)?);
            v
        }
    };
    Ok(VerifyReport {
        suite,
        seed,
        checks,
    })
}

/// Magnitude `10^u`, `u` uniform in `[lo, hi]`, with a random sign.
fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let m = 10f64.powf(rng.gen_range(lo..hi));
    if rng.gen::<bool>() {
        m
    } else {
        -m
    }
}

fn random_field(rng: &mut ChaCha8Rng, grid: FrequencyGrid) -> SpectralField {
    let c: Vec<C64> = (0..grid.len())
        .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    SpectralField::new(grid, c).expect("finite")
}

fn max_abs_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn identities(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    let mut gap: f64 = 0.0;
    for _ in 0..100_000 {
        let (a, b) = (
            log_uniform(&mut rng, -3.0, 4.0),
            log_uniform(&mut rng, -3.0, 4.0),
        );
        gap = gap.max(dispersive_identity_gap(a, b).abs() / (1.0 + a.abs() + b.abs()).powi(2));
    }
    out.push(Check::at_most(
        "dispersive identity: max |gap| / (1 + |xi1| + |xi2|)^2",
        gap,
        1e-9,
    ));

    let mut pou: f64 = 0.0;
    for _ in 0..10_000 {
        let xi = log_uniform(&mut rng, -3.0, 8.5);
        let s: f64 = (0..=30).map(|l| eta(l, xi)).sum();
        pou = pou.max((s - 1.0).abs());
    }
    out.push(Check::at_most(
        "partition of unity: max |sum eta_l - 1|",
        pou,
        1e-12,
    ));

    let grid = FrequencyGrid::new(64.0, 256)?;
    let phi = random_field(&mut rng, grid);
    let (s, t) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let w = free_evolution(&phi, t);
    let modulus = phi
        .coeffs()
        .iter()
        .zip(w.coeffs())
        .map(|(a, b)| (a.norm() - b.norm()).abs() / a.norm())
        .fold(0.0, f64::max);
    out.push(Check::at_most(
        "free evolution: max relative change of |coefficient|",
        modulus,
        4.0 * f64::EPSILON,
    ));
    let lhs = free_evolution(&w, s);
    let rhs = free_evolution(&phi, s + t);
    let scale = phi.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    out.push(Check::at_most(
        "free evolution: group law W(s)W(t) = W(s+t)",
        max_abs_diff(&lhs, &rhs) / scale,
        1e-12,
    ));

    let hh = hilbert_transform(&hilbert_transform(&phi));
    let nyq = grid.nyquist_index();
    let zero = grid.index_of(0);
    let expect = phi.map(|_, c| -c);
    let mut expect_c = expect.coeffs().to_vec();
    expect_c[nyq] = C64::new(0.0, 0.0);
    expect_c[zero] = C64::new(0.0, 0.0);
    let expect = SpectralField::new(grid, expect_c)?;
    out.push(Check::at_most(
        "Hilbert transform squares to minus the identity off the zero and Nyquist modes",
        max_abs_diff(&hh, &expect) / scale,
        1e-15,
    ));
    Ok(out)
}

fn lemma21(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2121);
    let xg = FrequencyGrid::new(64.0, 512)?;
    let tg = TimeGrid::new(16.0, 513)?;
    let opts = SplitOptions::baselines();
    let mut out = Vec::new();
    for k in [2, 3] {
        // A bump in the middle of shell k at a random modulation offset.
        let center = 2f64.powi(k) * rng.gen_range(0.9..1.1);
        let offset = rng.gen_range(-0.5..0.5);
        let f = SpaceTimeField::from_frequency_fn(xg, tg, |xi, tau| {
            let s = tau - dispersion_symbol(xi) - offset;
            C64::new(psi((xi - center) / 0.2 / 2f64.powi(k)) * psi(s), 0.0)
        });
        for (part, what) in [
            (Lemma21Part::B, "modulation localization"),
            (Lemma21Part::D, "time traces"),
            (Lemma21Part::E, "maximal function"),
            (Lemma21Part::F, "local smoothing"),
        ] {
            let w = lemma21_witness(&f, k, part, &opts)?;
            // Measured ratios stay below 1.2.
            out.push(Check::at_most(
                format!("{what} ratio at k={k}"),
                w.ratio,
                10.0,
            ));
        }
    }
    Ok(out)
}

fn bilinear(seed: u64) -> Result<Vec<Check>> {
    let q = Quadrature {
        xi: 24,
        band: 24,
        inner_xi: 32,
        inner_tau: 100,
    };
    let mut out = Vec::new();
    for (kind, k) in [
        (BilinearKind::Lemma33, 6),
        (BilinearKind::Lemma34, 12),
        (BilinearKind::Lemma35, 6),
        (BilinearKind::Lemma37, 8),
        (BilinearKind::Prop38, 5),
    ] {
        let w = family_max(kind, k, &q)?;
        // Measured maxima stay below 3; the bound leaves a decade of room.
        out.push(Check::at_most(
            format!("{} witness: largest ratio at k={k}", kind.label()),
            w.ratio,
            25.0,
        ));
        if let Some(s) = &w.support {
            out.push(Check::at_most(
                format!(
                    "{} witness: output bands breaking the trichotomy",
                    kind.label()
                ),
                s.violations.len() as f64,
                0.0,
            ));
        }
    }
    let scaled: Vec<f64> = [4, 6, 8]
        .iter()
        .map(|&k| family_max(BilinearKind::Lemma36, k, &q).map(|w| w.scaled_ratio))
        .collect::<Result<_>>()?;
    let (lo, hi) = scaled
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    out.push(Check::at_most(
        "high-high-low witness: spread of ratio 2^{k/4} over k=4,6,8",
        hi / lo,
        4.0,
    ));

    let scan = lemma37_support_scan(8, -2, 40, 32)?;
    out.push(Check::above(
        "support scan at k=8, k1=-2: nonzero cells",
        scan.nonzero as f64,
        0.0,
    ));
    out.push(Check::at_most(
        "support scan at k=8, k1=-2: cells breaking the trichotomy",
        scan.violations.len() as f64,
        0.0,
    ));

    // Random points of D_{k1,j1} x D_{k2,j2} mapped into D_{k,j}.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3737);
    let (k, k1) = (8, -2);
    let mut bad = 0usize;
    for _ in 0..20_000 {
        let k2 = k + rng.gen_range(-2..=2);
        let sign = |r: &mut ChaCha8Rng| if r.gen::<bool>() { 1.0 } else { -1.0 };
        let xi1 = sign(&mut rng) * 2f64.powi(k1 - 1) * rng.gen_range(1.0..4.0);
        let xi2 = sign(&mut rng) * 2f64.powi(k2 - 1) * rng.gen_range(1.0..4.0);
        let xi = xi1 + xi2;
        if !in_shell(k, xi) {
            continue;
        }
        let s1 = log_uniform(&mut rng, -1.0, 6.0);
        let s2 = log_uniform(&mut rng, -1.0, 6.0);
        let s = s1 + s2 + dispersion_symbol(xi2) - dispersion_symbol(xi);
        let bands = |v: f64| (0..=60).filter(move |&j| in_modulation_band(j, v));
        for j1 in bands(s1) {
            for j2 in bands(s2) {
                for j in bands(s) {
                    if !trichotomy_holds(k, k1, j, j1, j2) {
                        bad += 1;
                    }
                }
            }
        }
    }
    out.push(Check::at_most(
        "random single-band products breaking the trichotomy",
        bad as f64,
        0.0,
    ));
    Ok(out)
}

fn conservation(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0de);
    let config = SolverConfig {
        n_points: 128,
        n_t: 65,
        ..SolverConfig::default()
    };
    let grid = config.frequency_grid()?;
    let mut data = standard_suite(grid, 0.04)?;
    let bump = TestFamily::GaussianBump {
        amplitude: rng.gen_range(0.005..0.01),
        width: rng.gen_range(1.5..3.0),
        center: rng.gen_range(-4.0..4.0),
        carrier: 0.0,
    };
    data.push(("random_real_bump".into(), bump.generate(grid)?));
    let mut out = Vec::new();
    for (name, phi) in &data {
        let (_, trace) = picard_solve(phi, &config)?;
        out.push(Check::at_least(
            format!("{name}: converged"),
            f64::from(u8::from(trace.converged)),
            1.0,
        ));
        let Some(c) = trace.conservation else {
            continue;
        };
        out.push(Check::at_most(
            format!("{name}: mass drift"),
            c.mass_drift,
            1e-8,
        ));
        if let Some(l2) = c.l2_drift {
            out.push(Check::at_most(
                format!("{name}: L2 drift (real data)"),
                l2,
                1e-6,
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identities_pass_and_repeat() {
        let a = run_suite(Suite::Identities, 7).unwrap();
        assert!(a.pass(), "{}", a.to_text());
        let b = run_suite(Suite::Identities, 7).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }
}
