//! Trains the two-modality model on synthetic data with corrupted training
//! samples and reports per-modality and fused accuracy.
//!
//!     cargo run --release --example train_and_classify

use mmsldl::data::{plant_sparse_corruption, split_train_test, synth_multimodal, LabeledDataset, SynthSpec};
use mmsldl::trainer::{accuracy, train, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mmsldl::Result<()> {
    let spec = SynthSpec {
        classes: 5,
        per_class: 20,
        dim: 128,
        modality2_overlap: 0.5,
        view_noise: 1.0,
        seed: 11,
        ..Default::default()
    };
    let ds = synth_multimodal(&spec)?;
    let all = LabeledDataset::new(ds.views.to_vec(), ds.labels, Vec::new())?;
    let (mut tr, te) = split_train_test(&all, 10, 1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for v in tr.views.iter_mut() {
        plant_sparse_corruption(v, 0.2, &mut rng)?;
    }

    let model = train(&tr.views[0], &tr.views[1], &tr.labels, &TrainConfig::default())?;
    let d = &model.diagnostics;
    println!("{} alternations, dictionaries settled: {}", d.alternations, d.dictionaries_converged);

    let preds = model.classify(&te.view_refs())?;
    let fused: Vec<usize> = preds.iter().map(|p| p.label).collect();
    for k in 0..2 {
        let cand: Vec<usize> = preds.iter().map(|p| p.candidates[k]).collect();
        println!("modality {} alone: {:.1}%", k + 1, 100.0 * accuracy(&cand, &te.labels));
    }
    println!("fused: {:.1}%", 100.0 * accuracy(&fused, &te.labels));

    let disagreements = preds.iter().filter(|p| p.fusion.as_ref().is_some_and(|f| !f.agreed())).count();
    println!("{disagreements} of {} test samples needed the residual tie-break", preds.len());
    Ok(())
}
