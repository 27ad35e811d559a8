//! Measured ratios of the linear estimates on a bump in shell `k`.
//!
//! ```text
//! cargo run --release --example linear_estimates
//! ```

use bo_lab::dyadic::psi;
use bo_lab::norms::{lemma21_witness, Lemma21Part, SplitOptions};
use bo_lab::spectral::{dispersion_symbol, FrequencyGrid, SpaceTimeField, TimeGrid, C64};

fn main() -> bo_lab::error::Result<()> {
    let xg = FrequencyGrid::new(64.0, 512)?;
    let tg = TimeGrid::new(16.0, 513)?;
    let opts = SplitOptions::baselines();
    for k in [2, 3] {
        let center = 2f64.powi(k);
        let f = SpaceTimeField::from_frequency_fn(xg, tg, |xi, tau| {
            let s = tau - dispersion_symbol(xi);
            C64::new(psi((xi - center) / 0.2 / center) * psi(s), 0.0)
        });
        for part in [
            Lemma21Part::B,
            Lemma21Part::D,
            Lemma21Part::E,
            Lemma21Part::F,
        ] {
            let w = lemma21_witness(&f, k, part, &opts)?;
            println!(
                "k={k} {part:?}: lhs {:.4e} rhs {:.4e} ratio {:.4}",
                w.lhs, w.rhs, w.ratio
            );
        }
    }
    Ok(())
}
