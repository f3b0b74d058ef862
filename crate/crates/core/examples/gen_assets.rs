//! Regenerates the committed assets under `assets/`. Run from the crate root:
//! `cargo run --example gen_assets`.

use polarlens::sim::synthetic_speckle_psf;

fn main() -> polarlens::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
    std::fs::create_dir_all(&dir)?;

    let gray = synthetic_speckle_psf(1, 33, 33, 42)?;
    polarlens::ptf::save_psf(&gray, dir.join("speckle_psf_gray.ptf"))?;

    let rgb = synthetic_speckle_psf(3, 33, 33, 42)?;
    polarlens::ptf::save_psf(&rgb, dir.join("speckle_psf_rgb.ptf"))?;

    println!("wrote {}", dir.display());
    Ok(())
}
