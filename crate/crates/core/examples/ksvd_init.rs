//! Per-class KSVD on synthetic subspace data, printing each class's
//! reconstruction error per round.
//!
//!     cargo run --example ksvd_init

use mmsldl::data::{synth_multimodal, SynthSpec};
use mmsldl::slrdl::{default_sparsity, ksvd_class, ksvd_init};
use nalgebra::DMatrix;

fn main() -> mmsldl::Result<()> {
    let spec = SynthSpec {
        classes: 3,
        per_class: 12,
        dim: 40,
        rank: 5,
        corruption: 0.05,
        ..Default::default()
    };
    let ds = synth_multimodal(&spec)?;
    let x = &ds.views[0];
    let blocks: Vec<DMatrix<f64>> = (0..spec.classes)
        .map(|c| x.columns(c * spec.per_class, spec.per_class).into_owned())
        .collect();

    let atoms = vec![4; spec.classes];
    let sparsity = default_sparsity(&atoms).min(2);
    for (c, b) in blocks.iter().enumerate() {
        let fit = ksvd_class(b, atoms[c], sparsity, 8)?;
        let trace: Vec<String> = fit.error_trace.iter().map(|e| format!("{e:.3e}")).collect();
        println!("class {c}: {}", trace.join(" -> "));
    }

    let dict = ksvd_init(&blocks, &atoms, sparsity, 8)?;
    println!(
        "dictionary: {} x {} with {} atoms per class",
        dict.dim(),
        dict.atom_count(),
        dict.atoms_per_class()[0]
    );
    Ok(())
}
