//! Solution distance against data distance for shrinking perturbations.
//!
//! ```text
//! cargo run --release --example lipschitz_probe
//! ```

use bo_lab::families::suite_member;
use bo_lab::solver::{lipschitz_probe, SolverConfig};
use bo_lab::spectral::C64;

fn main() -> bo_lab::error::Result<()> {
    let config = SolverConfig {
        period: 32.0,
        n_points: 64,
        n_t: 33,
        ..SolverConfig::default()
    };
    let grid = config.frequency_grid()?;
    let phi = suite_member(grid, 0.04, "gaussian")?;
    let direction = suite_member(grid, 0.04, "shell_random")?;
    for delta in [0.1, 0.01, 0.001] {
        let phi2 = phi.add(&direction.scale(C64::new(delta, 0.0)))?;
        let p = lipschitz_probe(&phi, &phi2, 0.0, &config)?;
        println!(
            "delta {delta:<6} data {:.4e} solution {:.4e} ratio {:.6}",
            p.data_distance, p.solution_distance, p.ratio
        );
    }
    Ok(())
}
