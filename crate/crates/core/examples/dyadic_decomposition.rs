//! Littlewood-Paley cutoffs, modulation bands and the weight `beta`.
//!
//! ```text
//! cargo run --release --example dyadic_decomposition
//! ```

use bo_lab::dyadic::{active_etas, beta, eta, eta0, in_modulation_band};

fn main() -> bo_lab::error::Result<()> {
    println!(
        "{:>8} {:>10} {:>10} {:>10} {:>10}",
        "xi", "eta0", "eta_1", "eta_2", "sum"
    );
    for xi in [0.1, 0.9, 1.3, 2.0, 3.1, 5.0, 40.0] {
        let sum = eta0(xi) + (1..=30).map(|l| eta(l, xi)).sum::<f64>();
        println!(
            "{xi:>8} {:>10.6} {:>10.6} {:>10.6} {sum:>10.6}",
            eta0(xi),
            eta(1, xi),
            eta(2, xi)
        );
    }

    let (lo, hi) = active_etas(37.0);
    println!("shells active at xi = 37: {lo}..={hi}");

    for j in 0..4 {
        let s = 1.5 * 2f64.powi(j);
        println!("modulation {s}: in band {j}? {}", in_modulation_band(j, s));
    }

    for (k, j) in [(1, 0), (1, 8), (6, 2), (6, 12)] {
        println!("beta({k}, {j}) = {:.6}", beta(k, j)?);
    }
    Ok(())
}
