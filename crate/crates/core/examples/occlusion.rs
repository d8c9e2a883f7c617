//! Places a textured block over a face-sized image at several fractions.
//!
//!     cargo run --example occlusion

use mmsldl::data::{builtin_patches, occlude};
use mmsldl::modality::ImagePlane;

fn main() -> mmsldl::Result<()> {
    let face = ImagePlane::from_fn(96, 84, 1, |x, y, _| 0.5 + 0.3 * ((x as f64 / 9.0).sin() * (y as f64 / 7.0).cos()))?;
    let patches = builtin_patches();
    for (i, f) in [0.1, 0.2, 0.4, 0.6].into_iter().enumerate() {
        let (out, block) = occlude(&face, f, i as u64, &patches[i % patches.len()])?;
        let covered = block.area() as f64 / (96.0 * 84.0);
        let changed = out.pixels().iter().zip(face.pixels()).filter(|(a, b)| a != b).count();
        println!(
            "fraction {f:.2}: {side}x{side} block at ({x}, {y}), {:.1}% of the image, {changed} pixels changed",
            100.0 * covered,
            side = block.side,
            x = block.x,
            y = block.y
        );
    }
    Ok(())
}
