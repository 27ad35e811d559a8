//! Largest ratio of each bilinear estimate over its standard family, and the
//! modulation support scan for single-band products.
//!
//! ```text
//! cargo run --release --example bilinear_witnesses
//! ```

use bo_lab::banded::Quadrature;
use bo_lab::bilinear::{family_max, lemma37_support_scan, BilinearKind};

fn main() -> bo_lab::error::Result<()> {
    let q = Quadrature::default();
    for (kind, k) in [
        (BilinearKind::Lemma33, 6),
        (BilinearKind::Lemma34, 12),
        (BilinearKind::Lemma35, 6),
        (BilinearKind::Lemma36, 6),
        (BilinearKind::Lemma37, 8),
        (BilinearKind::Prop38, 5),
    ] {
        let w = family_max(kind, k, &q)?;
        println!(
            "{:<18} k={k:<3} k1={:<3} k2={:<3} ratio {:.4} scaled {:.4}",
            kind.label(),
            w.k1,
            w.k2,
            w.ratio,
            w.scaled_ratio
        );
    }
    let scan = lemma37_support_scan(8, -2, 40, 32)?;
    println!(
        "support scan: {} cells, {} nonzero, {} violating",
        scan.cells,
        scan.nonzero,
        scan.violations.len()
    );
    Ok(())
}
