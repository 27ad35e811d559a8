//! Picard iteration on one small datum, with its residual, conservation
//! and contraction diagnostics.
//!
//! ```text
//! cargo run --release --example picard_solve
//! ```

use bo_lab::families::suite_member;
use bo_lab::solver::{contraction_monitor, picard_solve, SolverConfig};

fn main() -> bo_lab::error::Result<()> {
    let config = SolverConfig {
        period: 32.0,
        n_points: 64,
        n_t: 33,
        ..SolverConfig::default()
    };
    let phi = suite_member(config.frequency_grid()?, 0.04, "gaussian")?;
    let (u, trace) = picard_solve(&phi, &config)?;

    print!("{}", trace.to_csv());
    println!(
        "converged {} after {} iterations, admissible {}",
        trace.converged,
        trace.iterations(),
        trace.admissible
    );
    if let Some(r) = &trace.residual {
        println!(
            "pde residual max {:.3e}, fixed-point defect {:.3e}",
            r.pde_max_abs, r.fixed_point_defect
        );
    }
    if let Some(c) = &trace.conservation {
        println!("mass drift {:.3e}, L2 drift {:?}", c.mass_drift, c.l2_drift);
    }
    let v = contraction_monitor(&trace)?;
    println!(
        "fitted ratio {:.4}, monotone {}, pass {}",
        v.fitted_ratio, v.monotone, v.pass
    );
    println!("solution on {} x {} points", u.nx(), u.nt());
    Ok(())
}
