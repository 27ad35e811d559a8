//! Writing and reading `.bofield` files, and a hashed run directory.
//!
//! ```text
//! cargo run --release --example field_files
//! ```

use bo_lab::families::suite_member;
use bo_lab::harness::fieldfile::{decode, encode, FieldData};
use bo_lab::harness::manifest::{read_manifest, stale_artifacts, RunDir};
use bo_lab::norms::b0_norm;
use bo_lab::spectral::FrequencyGrid;

fn main() -> bo_lab::error::Result<()> {
    let phi = suite_member(FrequencyGrid::new(64.0, 256)?, 0.04, "two_mode")?;
    let bytes = encode(&FieldData::Line(phi.clone()), "two-mode example");
    let header_end = bytes.iter().position(|&b| b == b'\n').unwrap();
    println!("{}", String::from_utf8_lossy(&bytes[..header_end]));
    let (header, back) = decode(&bytes)?;
    println!("{header:?}");
    let FieldData::Line(back) = back else {
        unreachable!()
    };
    assert_eq!(back.coeffs(), phi.coeffs());

    let out = std::env::temp_dir().join("bo-lab-field-files-example");
    let _ = std::fs::remove_dir_all(&out);
    let config = serde_json::json!({ "family": "two_mode", "target": 0.04 });
    let mut run = RunDir::create("example", &config, Some(&out))?;
    run.write("phi.bofield", &bytes)?;
    run.write("b0.json", b0_norm(&phi)?.to_json())?;
    let manifest = run.finish()?;
    println!("run {} in {}", manifest.run_id, out.display());
    for a in &manifest.artifacts {
        println!("  {} {}", a.sha256, a.name);
    }
    let again = read_manifest(&out)?;
    println!("stale: {:?}", stale_artifacts(&out, &again));
    Ok(())
}
