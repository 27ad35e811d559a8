//! The three-bump construction against the weighted norms, per `k`.
//!
//! ```text
//! cargo run --release --example sharpness_sweep
//! ```

use bo_lab::banded::Quadrature;
use bo_lab::counterexamples::prop52_check;

fn main() -> bo_lab::error::Result<()> {
    let q = Quadrature::default();
    for k in [6, 8, 10] {
        let p = prop52_check(k, 0.0, &q)?;
        println!(
            "k={k:<3} remainders {:.3}/{:.3} region minima {:.3e}/{:.3e} low ratio {:.4e} high ratio {:.4e} beta {} vs {}",
            p.resonance_low,
            p.resonance_high,
            p.low_region_min,
            p.high_region_min,
            p.low_ratio(),
            p.high_ratio(),
            p.beta_term,
            p.beta_expected
        );
    }
    Ok(())
}
