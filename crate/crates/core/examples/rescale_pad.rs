//! Letterbox an arbitrary image into the 224x224 canonical frame.
//!
//! ```sh
//! cargo run --example rescale_pad -- path/to/scan.jpeg canonical.png
//! ```
//! Without arguments a synthetic 768x469 scan is used.

use octfeat::imaging::{self, GrayImage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let img = match args.first() {
        Some(path) => imaging::load_image(path)?,
        None => GrayImage::from_fn(768, 469, |x, y| ((x / 24 + y / 24) % 2) as f32),
    };

    let canonical = imaging::canonicalize(&img)?;
    let r = canonical.content_rect();
    println!("input   {}x{}", img.width(), img.height());
    println!("content {}x{} at ({}, {})", r.width, r.height, r.x, r.y);
    println!("output  {0}x{0}", canonical.side());

    // canonical images are a fixed point
    let again = imaging::canonicalize(canonical.image())?;
    assert_eq!(again.image(), canonical.image());

    if let Some(out) = args.get(1) {
        imaging::save_png(canonical.image(), out)?;
        println!("wrote {out}");
    }
    Ok(())
}
