//! Building the masked image fed to the image encoder: pixels outside the
//! mask are zeroed, nothing is cropped.
//!
//! Run with `cargo run -p zsba --example masked_image [OUT.ppm]`.

use zsba::netpbm::save_ppm;
use zsba::{apply_mask, BinaryMask, RasterImage};

fn main() -> zsba::Result<()> {
    let (w, h) = (8, 6);
    // A gradient "photo".
    let pixels = (0..h)
        .flat_map(|y| (0..w).flat_map(move |x| [(x * 32) as u8, (y * 40) as u8, 200]))
        .collect();
    let image = RasterImage::new(w, h, pixels)?;

    // A window-shaped mask in the middle.
    let mask = BinaryMask {
        id: "window".into(),
        pixels: (0..h)
            .flat_map(|y| (0..w).map(move |x| (2..6).contains(&x) && (1..4).contains(&y)))
            .collect(),
    };
    let masked = apply_mask(&image, &mask)?;

    for y in 0..h {
        let row: Vec<String> = (0..w).map(|x| format!("{:3}", masked.rgb(x, y)[0])).collect();
        println!("{}", row.join(" "));
    }
    assert_eq!(apply_mask(&masked, &mask)?, masked, "masking is idempotent");

    if let Some(path) = std::env::args().nth(1) {
        save_ppm(&masked, &path)?;
        println!("wrote {path}");
    }
    Ok(())
}
