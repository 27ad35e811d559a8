//! High-low interaction whose ratio grows linearly in `k`.
//!
//! ```text
//! cargo run --release --example log_loss_sweep
//! ```

use bo_lab::banded::Quadrature;
use bo_lab::counterexamples::prop51_sweep;

fn main() -> bo_lab::error::Result<()> {
    let report = prop51_sweep(&[6, 8, 10], &Quadrature::default())?;
    for row in &report.rows {
        println!(
            "k={:<3} lhs {:.4e} rhs {:.4e} ratio {:.4e} ratio/k {:.4e}",
            row.k,
            row.lhs,
            row.rhs,
            row.ratio,
            row.ratio / f64::from(row.k)
        );
    }
    for fit in &report.fits {
        println!("fit {}: slope {:.4e}", fit.law, fit.slope);
    }
    for check in &report.checks {
        println!("{check}");
    }
    Ok(())
}
