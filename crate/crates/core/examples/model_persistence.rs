//! Saves a trained model, reloads it, and checks the reloaded model gives
//! the same predictions. Also shows what a damaged archive reports.
//!
//!     cargo run --release --example model_persistence

use mmsldl::data::{load_model, save_model, split_train_test, synth_multimodal, LabeledDataset, SynthSpec};
use mmsldl::trainer::{train, TrainConfig};

fn main() -> mmsldl::Result<()> {
    let ds = synth_multimodal(&SynthSpec::default())?;
    let all = LabeledDataset::new(ds.views.to_vec(), ds.labels, Vec::new())?;
    let (tr, te) = split_train_test(&all, 8, 0)?;
    let model = train(&tr.views[0], &tr.views[1], &tr.labels, &TrainConfig::default())?;

    let dir = std::env::temp_dir().join(format!("mmsldl-model-{}", std::process::id()));
    save_model(&model, &dir)?;
    let mut files: Vec<String> = std::fs::read_dir(&dir)?
        .map(|e| e.map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect::<std::io::Result<_>>()?;
    files.sort();
    println!("{} files, e.g. {}", files.len(), files[..3].join(", "));

    let back = load_model(&dir)?;
    let a = model.classify(&te.view_refs())?;
    let b = back.classify(&te.view_refs())?;
    println!("identical predictions after reload: {}", a == b);

    // flip one byte of a blob
    let blob = dir.join("m1_dictionary.mat64");
    let mut bytes = std::fs::read(&blob)?;
    bytes[40] ^= 0xff;
    std::fs::write(&blob, bytes)?;
    match load_model(&dir) {
        Err(e) => println!("damaged archive: {e}"),
        Ok(_) => println!("damaged archive loaded?"),
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
