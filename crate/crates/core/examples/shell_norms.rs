//! Shell norms with their breakdowns, on a low-frequency space-time bump.
//!
//! ```text
//! cargo run --release --example shell_norms
//! ```

use bo_lab::dyadic::{eta0, psi};
use bo_lab::families::suite_member;
use bo_lab::norms::{
    b0_norm, hsigma_tilde_norm, xk_norm, yk_norm, zk_norm_with, NormReport, SplitOptions,
};
use bo_lab::spectral::{FrequencyGrid, SpaceTimeField, TimeGrid, C64};

fn show(r: &NormReport) {
    println!("{} = {:.6e} (tail {:.1e})", r.name, r.value, r.tail);
    for row in r.breakdown.iter().take(6) {
        println!("    {:<24} {:.6e}", row.label, row.value);
    }
    if r.breakdown.len() > 6 {
        println!("    ... {} rows", r.breakdown.len());
    }
}

fn main() -> bo_lab::error::Result<()> {
    let (xg, tg) = (FrequencyGrid::new(32.0, 64)?, TimeGrid::new(2.0, 17)?);
    let f = SpaceTimeField::from_frequency_fn(xg, tg, |xi, tau| {
        C64::new(
            eta0(xi) * psi(tau / 0.8),
            0.3 * psi((xi - 1.5) / 0.3) * psi((tau - 1.0) / 0.5),
        )
    });
    show(&xk_norm(&f, 0)?);
    show(&yk_norm(&f, 0)?);
    let (z, split) = zk_norm_with(&f, 0, &SplitOptions::default())?;
    show(&z);
    println!("    split objective {:.6e}", split.objective);

    let phi = suite_member(FrequencyGrid::new(64.0, 256)?, 0.04, "two_mode")?;
    show(&b0_norm(&phi)?);
    show(&hsigma_tilde_norm(&phi, 1.0)?);
    Ok(())
}
