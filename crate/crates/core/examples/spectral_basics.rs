//! Grids, transforms and the free flow.
//!
//! ```text
//! cargo run --release --example spectral_basics
//! ```

use bo_lab::families::suite_member;
use bo_lab::spectral::{
    dispersion_symbol, forward_transform, free_evolution, hilbert_transform, inverse_transform,
    FrequencyGrid,
};

fn main() -> bo_lab::error::Result<()> {
    let grid = FrequencyGrid::new(64.0, 256)?;
    println!(
        "period {} points {} dx {:.4} dxi {:.4} xi_max {:.3}",
        grid.period(),
        grid.len(),
        grid.dx(),
        grid.dxi(),
        grid.xi_max()
    );

    let phi = suite_member(grid, 0.04, "gaussian")?;
    let back = forward_transform(grid, &inverse_transform(&phi))?;
    let err = phi
        .coeffs()
        .iter()
        .zip(back.coeffs())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    println!("round trip error {err:.2e}");

    for t in [0.0, 0.5, 1.0] {
        let w = free_evolution(&phi, t);
        println!("t = {t}: L2 {:.12}, L1 {:.6}", w.l2_norm(), w.l1_physical());
    }

    let h = hilbert_transform(&phi);
    println!(
        "||H phi|| = {:.12}, ||phi|| = {:.12}",
        h.l2_norm(),
        phi.l2_norm()
    );
    for xi in [-2.0, -0.5, 0.5, 2.0] {
        println!("omega({xi}) = {}", dispersion_symbol(xi));
    }
    Ok(())
}
