//! The Picard solution against the integrating-factor RK4 reference, and the
//! observed order of the reference under step halving.
//!
//! ```text
//! cargo run --release --example reference_oracle
//! ```

use bo_lab::families::standard_suite;
use bo_lab::solver::{
    final_time_distance, oracle_order, picard_solve, reference_solve, SolverConfig,
};

fn main() -> bo_lab::error::Result<()> {
    let config = SolverConfig {
        period: 32.0,
        n_points: 64,
        n_t: 65,
        ..SolverConfig::default()
    };
    // Coarse enough that step halving is not swamped by rounding.
    let coarse = SolverConfig {
        n_t: 17,
        ..config.clone()
    };
    for (name, phi) in standard_suite(config.frequency_grid()?, 0.04)? {
        let (u, _) = picard_solve(&phi, &config)?;
        let reference = reference_solve(&phi, &config)?;
        let study = oracle_order(&phi, &coarse)?;
        println!(
            "{name:<14} distance {:.3e}  order {:.3} (n_t {:?})",
            final_time_distance(&u, &reference)?,
            study.order,
            study.n_t
        );
    }
    Ok(())
}
