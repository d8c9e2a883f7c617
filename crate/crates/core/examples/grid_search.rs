//! Cross-validated choice of alpha, beta and lambda on a small synthetic
//! training set.
//!
//!     cargo run --release --example grid_search

use mmsldl::cli::grid::grid_search;
use mmsldl::cli::GridSpec;
use mmsldl::data::{split_train_test, synth_multimodal, LabeledDataset, SynthSpec};
use mmsldl::trainer::TrainConfig;

fn main() -> mmsldl::Result<()> {
    let spec = SynthSpec {
        classes: 4,
        per_class: 16,
        modality2_overlap: 0.5,
        view_noise: 1.0,
        ..Default::default()
    };
    let ds = synth_multimodal(&spec)?;
    let all = LabeledDataset::new(ds.views.to_vec(), ds.labels, Vec::new())?;
    let (tr, _) = split_train_test(&all, 8, 0)?;

    let grid = GridSpec {
        alpha: vec![0.0, 0.1],
        beta: vec![0.5],
        lambda: vec![0.3, 1.0],
        folds: 4,
    };
    let out = grid_search(&tr, &TrainConfig::default(), &grid, 0)?;
    for s in &out.scores {
        match s.accuracy {
            Some(a) => println!("a={} b={} l={} fold {}: {a:.1}%", s.alpha, s.beta, s.lambda, s.fold),
            None => println!("a={} b={} l={} fold {}: failed", s.alpha, s.beta, s.lambda, s.fold),
        }
    }
    println!(
        "picked alpha={} beta={} lambda={} ({:.1}%)",
        out.best.alpha, out.best.beta, out.best.lambda, out.best_score
    );
    Ok(())
}
