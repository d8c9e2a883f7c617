//! Builds a two-material color image under a shading ramp, then recovers a
//! shading-free plane by entropy minimization over projection angles.
//!
//!     cargo run --example illumination_invariant [image]

use mmsldl::data::dataset::read_image;
use mmsldl::modality::{illumination_invariant, ImagePlane, InvariantParams};

fn main() -> mmsldl::Result<()> {
    let img = match std::env::args().nth(1) {
        Some(path) => read_image(path.as_ref())?,
        None => ImagePlane::from_fn(48, 48, 3, |x, y, c| {
            let albedo = if (x / 12 + y / 12) % 2 == 0 { [0.8, 0.45, 0.25] } else { [0.25, 0.5, 0.8] };
            // shading and a warm-to-cool illuminant change across the image
            let shade = 0.3 + 0.7 * x as f64 / 47.0;
            let tint = [1.0 + 0.3 * y as f64 / 47.0, 1.0, 1.0 - 0.3 * y as f64 / 47.0];
            albedo[c] * shade * tint[c]
        })?,
    };

    let params = InvariantParams::default();
    let out = illumination_invariant(&img, &params)?;
    match out.theta {
        Some(t) => println!("entropy-minimizing angle: {:.0} degrees", t.to_degrees()),
        None => println!("grayscale input, returned unchanged"),
    }

    // the shading ramp runs along x: compare column means before and after
    let col_mean = |p: &ImagePlane, x: usize| (0..p.height()).map(|y| p.get(x, y, 0)).sum::<f64>() / p.height() as f64;
    let gray = img.to_grayscale();
    let w = gray.width();
    println!(
        "raw column means, left vs right: {:.3} vs {:.3}",
        col_mean(&gray, 0),
        col_mean(&gray, w - 1)
    );
    println!(
        "invariant column means, left vs right: {:.3} vs {:.3}",
        col_mean(&out.plane, 0),
        col_mean(&out.plane, w - 1)
    );
    Ok(())
}
