//! Singular value thresholding and entrywise shrinkage on a small matrix.
//!
//!     cargo run --example proximal_operators

use mmsldl::prox::{nuclear_norm, soft_threshold, spectral_norm, svt, thin_svd};
use nalgebra::DMatrix;

fn main() -> mmsldl::Result<()> {
    // rank 2 plus a little noise
    let a = DMatrix::from_fn(6, 5, |i, j| (i as f64 + 1.0) * (j as f64 - 2.0) + ((i * j) % 3) as f64);
    let noisy = &a + DMatrix::from_fn(6, 5, |i, j| 0.05 * (((i * 7 + j * 13) % 11) as f64 - 5.0));

    let f = thin_svd(&noisy)?;
    println!("singular values: {:.4?}", f.s.as_slice());
    println!("spectral norm {:.4}, nuclear norm {:.4}", spectral_norm(&noisy)?, nuclear_norm(&noisy)?);

    let tau = f.s[2] * 1.01;
    let low = svt(&noisy, tau)?;
    println!("svt(tau = {tau:.4}) keeps rank {}", thin_svd(&low)?.rank());
    println!("distance to the clean matrix: {:.4}", (&low - &a).norm());

    let spikes = DMatrix::from_row_slice(2, 3, &[0.2, -1.5, 0.9, 3.0, -0.1, 0.0]);
    println!("soft threshold at 0.5:{}", soft_threshold(&spikes, 0.5)?);
    Ok(())
}
