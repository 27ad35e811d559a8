//! Named, seed-deterministic generators of standard test data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{eta, eta0};
use crate::error::{LabError, Result};
use crate::norms::{hsigma_tilde_norm_with, SplitOptions};
use crate::spectral::{FrequencyGrid, SpectralField, C64};

/// A generator of initial data on a given frequency grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFamily {
    /// `a e^{-(x - c)^2 / w^2}` times a carrier `e^{i xi0 x}`.
    GaussianBump {
        amplitude: f64,
        width: f64,
        center: f64,
        carrier: f64,
    },
    /// `a e^{i xi_m x}` for lattice mode `m`; amplitudes are `[re, im]`.
    SingleMode { mode: i64, amplitude: [f64; 2] },
    /// Sum of lattice modes with complex amplitudes.
    MultiMode { modes: Vec<(i64, [f64; 2])> },
    /// Random complex coefficients weighted by `eta_k`, fixed seed.
    ShellRandom {
        shell: i32,
        seed: u64,
        amplitude: f64,
    },
    /// Fourier side `a eta0(xi / s)`: a low-frequency profile whose size is
    /// governed by the `B_0` part of the norm.
    LowFrequency { scale: f64, amplitude: [f64; 2] },
}

impl TestFamily {
    pub fn generate(&self, grid: FrequencyGrid) -> Result<SpectralField> {
        let field = match self {
            TestFamily::GaussianBump {
                amplitude,
                width,
                center,
                carrier,
            } => {
                if !(*width > 0.0) {
                    return Err(LabError::Config(format!(
                        "bump width must be positive, got {width}"
                    )));
                }
                SpectralField::from_fn(grid, |x| {
                    let r = (x - center) / width;
                    C64::from_polar(amplitude * (-r * r).exp(), carrier * x)
                })
            }
            TestFamily::SingleMode { mode, amplitude } => {
                modes_field(grid, &[(*mode, *amplitude)])?
            }
            TestFamily::MultiMode { modes } => modes_field(grid, modes)?,
            TestFamily::ShellRandom {
                shell,
                seed,
                amplitude,
            } => {
                if *shell < 1 || grid.xi_max() < 2f64.powi(*shell - 1) {
                    return Err(LabError::Config(format!(
                        "shell {shell} is not resolved on this grid"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let c: Vec<C64> = (0..grid.len())
                    .map(|i| {
                        let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                        z * (amplitude * eta(*shell, grid.xi(i)))
                    })
                    .collect();
                SpectralField::new(grid, c)?.without_nyquist()
            }
            TestFamily::LowFrequency { scale, amplitude } => {
                if !(*scale > 0.0 && *scale <= 1.0) {
                    return Err(LabError::Config(format!(
                        "scale must lie in (0, 1], got {scale}"
                    )));
                }
                let a = C64::new(amplitude[0], amplitude[1]);
                SpectralField::from_symbol(grid, |xi| a * eta0(xi / scale))
            }
        };
        Ok(field)
    }
}

fn modes_field(grid: FrequencyGrid, modes: &[(i64, [f64; 2])]) -> Result<SpectralField> {
    let half = grid.len() as i64 / 2;
    let mut f = SpectralField::zeros(grid);
    for &(m, a) in modes {
        if m <= -half || m >= half {
            return Err(LabError::Config(format!(
                "mode {m} outside (-{half}, {half})"
            )));
        }
        // A unit-amplitude exponential has coefficient L.
        f.coeffs_mut()[grid.index_of(m)] += C64::new(a[0], a[1]) * grid.period();
    }
    Ok(f)
}

/// Scales `f` so that its `H~^0` proxy (trivial splittings) equals `target`.
pub fn normalize_h0(f: &SpectralField, target: f64) -> Result<SpectralField> {
    let n = hsigma_tilde_norm_with(f, 0.0, &SplitOptions::baselines())?.value;
    if n == 0.0 {
        return Err(LabError::Domain("cannot normalize zero data".into()));
    }
    Ok(f.scale(C64::new(target / n, 0.0)))
}

/// The five standard small data, each scaled to `||phi||_{H~^0} = target`.
pub fn standard_suite(grid: FrequencyGrid, target: f64) -> Result<Vec<(String, SpectralField)>> {
    let members = [
        (
            "gaussian",
            TestFamily::GaussianBump {
                amplitude: 1.0,
                width: 2.0,
                center: 0.0,
                carrier: 0.0,
            },
        ),
        (
            "single_mode",
            TestFamily::SingleMode {
                mode: 4,
                amplitude: [1.0, 0.0],
            },
        ),
        (
            "two_mode",
            TestFamily::MultiMode {
                modes: vec![(3, [1.0, 0.0]), (-7, [0.0, 0.5])],
            },
        ),
        (
            "shell_random",
            TestFamily::ShellRandom {
                shell: 1,
                seed: 7,
                amplitude: 1.0,
            },
        ),
        (
            "low_frequency",
            TestFamily::LowFrequency {
                scale: 0.5,
                amplitude: [1.0, 0.5],
            },
        ),
    ];
    members
        .iter()
        .map(|(name, fam)| {
            Ok((
                name.to_string(),
                normalize_h0(&fam.generate(grid)?, target)?,
            ))
        })
        .collect()
}

/// Looks up a member of [`standard_suite`] by name.
pub fn suite_member(grid: FrequencyGrid, target: f64, name: &str) -> Result<SpectralField> {
    standard_suite(grid, target)?
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, f)| f)
        .ok_or_else(|| LabError::Config(format!("unknown test datum '{name}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_is_normalized_and_deterministic() {
        let g = FrequencyGrid::new(64.0, 256).unwrap();
        let a = standard_suite(g, 0.04).unwrap();
        let b = standard_suite(g, 0.04).unwrap();
        assert_eq!(a.len(), 5);
        for ((na, fa), (_, fb)) in a.iter().zip(&b) {
            assert_eq!(fa, fb, "{na}");
            let n = hsigma_tilde_norm_with(fa, 0.0, &SplitOptions::baselines())
                .unwrap()
                .value;
            assert!((n - 0.04).abs() < 1e-12, "{na}: {n}");
        }
    }

    #[test]
    fn single_mode_coefficient() {
        let g = FrequencyGrid::new(64.0, 64).unwrap();
        let f = TestFamily::SingleMode {
            mode: 1,
            amplitude: [1.0, 0.0],
        }
        .generate(g)
        .unwrap();
        let phys = f.to_physical();
        assert!((phys[5] - C64::from_polar(1.0, g.xi(g.index_of(1)) * g.x(5))).norm() < 1e-12);
        assert!(TestFamily::SingleMode {
            mode: 40,
            amplitude: [1.0, 0.0]
        }
        .generate(g)
        .is_err());
    }
}
