//! One function per subcommand. Each takes the effective configuration and
//! writes its results under `cfg.out`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{RunConfig, SourceSpec};
use super::grid::{grid_search, write_grid, GridOutcome};
use super::pipeline::DataSource;
use super::report::{evaluate, write_metrics, MeanMetrics, RepeatMetrics};
use crate::data::dataset::read_image;
use crate::data::{load_model, save_labeled, save_model, synth_multimodal, LabeledDataset};
use crate::error::{Error, Result};
use crate::modality::{illumination_invariant, IlluminationInvariant, ImagePlane};
use crate::trainer::{train, ModelBundle};

pub const MODEL_DIR: &str = "model";
pub const DATASET_DIR: &str = "dataset";
pub const TRAIN_REPORT: &str = "train_report.json";
pub const RESIDUALS_TSV: &str = "residuals.tsv";

/// Trains on `train` and attaches class names and the run seed.
pub fn fit(train_set: &LabeledDataset, cfg: &RunConfig) -> Result<ModelBundle> {
    if train_set.views.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "expected two modalities, found {}",
            train_set.views.len()
        )));
    }
    let mut model = train(&train_set.views[0], &train_set.views[1], &train_set.labels, &cfg.train)?;
    model.label_map = train_set.class_names.clone();
    model.seed = Some(cfg.seed);
    Ok(model)
}

#[derive(Debug, Serialize)]
struct TrainReport<'a> {
    seed: u64,
    train_samples: usize,
    classes: usize,
    runtime_secs: f64,
    alternations: usize,
    dictionaries_converged: bool,
    recode_converged: &'a [bool],
    passes: Vec<PassSummary>,
}

#[derive(Debug, Serialize)]
struct PassSummary {
    alternation: usize,
    modality: usize,
    coding_iterations: usize,
    coding_converged: bool,
    final_feasibility: Option<f64>,
    final_split: Option<f64>,
    dict_iterations: usize,
    dict_converged: bool,
}

/// `train`: fits on the split-0 training set and saves the model with its
/// residual traces.
pub fn run_train(cfg: &RunConfig) -> Result<ModelBundle> {
    let source = DataSource::open(cfg)?;
    let (train_set, _) = source.prepare(cfg, 0)?;
    let start = Instant::now();
    let model = fit(&train_set, cfg)?;
    let runtime = start.elapsed().as_secs_f64();
    save_model(&model, &cfg.out.join(MODEL_DIR))?;

    let diag = &model.diagnostics;
    let passes = diag
        .traces
        .iter()
        .map(|t| PassSummary {
            alternation: t.alternation,
            modality: t.modality + 1,
            coding_iterations: t.history.len(),
            coding_converged: t.coding_converged,
            final_feasibility: t.history.last().map(|r| r.feasibility),
            final_split: t.history.last().map(|r| r.split),
            dict_iterations: t.dict_iterations,
            dict_converged: t.dict_converged,
        })
        .collect();
    let report = TrainReport {
        seed: cfg.seed,
        train_samples: train_set.len(),
        classes: train_set.class_count(),
        runtime_secs: runtime,
        alternations: diag.alternations,
        dictionaries_converged: diag.dictionaries_converged,
        recode_converged: &diag.recode_converged,
        passes,
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(cfg.out.join(TRAIN_REPORT), json)?;

    let mut tsv = String::from("alternation\tmodality\titer\tfeasibility\tsplit\tmu\n");
    for t in &diag.traces {
        for r in &t.history {
            let _ = writeln!(
                tsv,
                "{}\t{}\t{}\t{:.6e}\t{:.6e}\t{:.6e}",
                t.alternation,
                t.modality + 1,
                r.iter,
                r.feasibility,
                r.split,
                r.mu
            );
        }
    }
    std::fs::write(cfg.out.join(RESIDUALS_TSV), tsv)?;
    eprintln!(
        "trained on {} samples of {} classes in {runtime:.1}s ({} alternations); model in {}",
        train_set.len(),
        train_set.class_count(),
        diag.alternations,
        cfg.out.join(MODEL_DIR).display()
    );
    Ok(model)
}

/// `eval`: recognition rates over `cfg.split.repeats` random splits, or of
/// a saved model on the split-0 test set.
pub fn run_eval(cfg: &RunConfig, model_dir: Option<&Path>) -> Result<MeanMetrics> {
    let source = DataSource::open(cfg)?;
    let rows: Vec<RepeatMetrics> = match model_dir {
        Some(dir) => {
            let model = load_model(dir)?;
            let (_, test) = source.prepare(cfg, 0)?;
            vec![evaluate(&model, &test, 0, cfg.seed)?]
        }
        None => (0..cfg.split.repeats)
            .into_par_iter()
            .map(|r| {
                let start = Instant::now();
                let (train_set, test) = source.prepare(cfg, r)?;
                let model = fit(&train_set, cfg)?;
                let mut m = evaluate(&model, &test, r, cfg.seed.wrapping_add(r as u64))?;
                m.runtime_secs = start.elapsed().as_secs_f64();
                eprintln!("repeat {r}: {:.2}%", m.recognition_rate);
                Ok(m)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    let mean = write_metrics(&cfg.out, &rows, &source.all().class_names)?;
    println!(
        "recognition rate {:.2}% ± {:.2} over {} repeat(s)",
        mean.recognition_rate, mean.recognition_std, mean.repeats
    );
    Ok(mean)
}

/// Writes a column-major vector as an 8-bit grayscale PNG, clamping to
/// `[0, 1]`.
pub fn write_gray_png(v: &[f64], width: usize, height: usize, path: &Path) -> Result<()> {
    if v.len() != width * height {
        return Err(Error::InvalidInput(format!(
            "vector of length {} does not fit {width}x{height}",
            v.len()
        )));
    }
    let img = image::GrayImage::from_fn(width as u32, height as u32, |x, y| {
        let val = v[x as usize * height + y as usize];
        let val = if val.is_finite() { val.clamp(0.0, 1.0) } else { 0.0 };
        image::Luma([(val * 255.0).round() as u8])
    });
    img.save(path).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

fn write_plane_png(plane: &ImagePlane, path: &Path) -> Result<()> {
    let gray = plane.to_grayscale();
    let (w, h) = (gray.width(), gray.height());
    let column_major: Vec<f64> = (0..w * h).map(|i| gray.get(i / h, i % h, 0)).collect();
    write_gray_png(&column_major, w, h, path)
}

#[derive(Debug, Serialize)]
struct DecomposedSample {
    index: usize,
    label: usize,
    /// `‖E‖² / ‖x‖²` per modality (0 for a zero sample).
    error_energy: Vec<f64>,
    files: Vec<String>,
}

/// `decompose`: for each requested test sample and modality, writes the
/// sample, its dictionary part `DZ` and `|E|` as PNGs.
pub fn run_decompose(cfg: &RunConfig, model_dir: &Path, samples: &[usize], repeat: usize) -> Result<()> {
    let model = load_model(model_dir)?;
    let source = DataSource::open(cfg)?;
    let (_, test) = source.prepare(cfg, repeat)?;
    if let Some(&bad) = samples.iter().find(|&&i| i >= test.len()) {
        return Err(Error::InvalidInput(format!(
            "sample {bad} is out of range: the test set has {} samples",
            test.len()
        )));
    }
    let (w, h) = source.geometry();
    let mut records: Vec<DecomposedSample> = samples
        .iter()
        .map(|&index| DecomposedSample {
            index,
            label: test.labels[index],
            error_energy: Vec::new(),
            files: Vec::new(),
        })
        .collect();
    for k in 0..model.modality_count() {
        let x = test.views[k].select_columns(samples);
        let coded = model.code(k, &x)?;
        let dz: DMatrix<f64> = model.modalities[k].dictionary.atoms() * &coded.state.z;
        for (col, rec) in records.iter_mut().enumerate() {
            let xs: DVector<f64> = x.column(col).into_owned();
            let e: DVector<f64> = coded.state.e.column(col).abs();
            let energy = xs.norm_squared();
            rec.error_energy.push(if energy > 0.0 { e.norm_squared() / energy } else { 0.0 });
            let parts: [(&str, Vec<f64>); 3] = [
                ("original", xs.iter().copied().collect()),
                ("lowrank", dz.column(col).iter().copied().collect()),
                ("error", e.iter().copied().collect()),
            ];
            for (part, v) in parts {
                let name = format!("sample{}_m{}_{part}.png", rec.index, k + 1);
                write_gray_png(&v, w, h, &cfg.out.join(&name))?;
                rec.files.push(name);
            }
        }
    }
    let json = serde_json::to_string_pretty(&records).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(cfg.out.join("decompose.json"), json)?;
    eprintln!(
        "wrote {} images for {} sample(s) to {}",
        records.iter().map(|r| r.files.len()).sum::<usize>(),
        records.len(),
        cfg.out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct TransformRecord {
    input: PathBuf,
    width: usize,
    height: usize,
    channels: usize,
    /// Projection angle in degrees; absent for grayscale input.
    theta_deg: Option<f64>,
    passthrough: bool,
    raw: String,
    invariant: String,
}

/// `transform`: writes `<stem>_raw.png` and `<stem>_invariant.png` per input.
pub fn run_transform(cfg: &RunConfig, inputs: &[PathBuf], size: Option<(usize, usize)>) -> Result<()> {
    let inv = IlluminationInvariant { params: cfg.invariant };
    let records = inputs
        .par_iter()
        .map(|path| {
            let mut img = read_image(path)?;
            if let Some((w, h)) = size {
                img = img.resize(w, h)?;
            }
            let (plane, theta, passthrough) = if img.channels() == 3 {
                let out = illumination_invariant(&img, &cfg.invariant)?;
                (out.plane, out.theta.map(f64::to_degrees), out.passthrough)
            } else {
                (inv.plane(&img)?, None, false)
            };
            let stem = path.file_stem().map_or_else(|| "image".into(), |s| s.to_string_lossy().into_owned());
            let raw = format!("{stem}_raw.png");
            let invariant = format!("{stem}_invariant.png");
            write_plane_png(&img, &cfg.out.join(&raw))?;
            write_plane_png(&plane, &cfg.out.join(&invariant))?;
            Ok(TransformRecord {
                input: path.clone(),
                width: img.width(),
                height: img.height(),
                channels: img.channels(),
                theta_deg: theta,
                passthrough,
                raw,
                invariant,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut jsonl = String::new();
    for r in &records {
        let line = serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?;
        jsonl.push_str(&line);
        jsonl.push('\n');
    }
    std::fs::write(cfg.out.join("transform.jsonl"), jsonl)?;
    eprintln!("transformed {} image(s) into {}", records.len(), cfg.out.display());
    Ok(())
}

/// `synth`: writes the generated views, labels and ground truth under
/// `out/dataset`. Returns the dump directory.
pub fn run_synth(cfg: &RunConfig) -> Result<PathBuf> {
    let SourceSpec::Synthetic(spec) = &cfg.source else {
        return Err(Error::InvalidConfig("synth needs a synthetic source".into()));
    };
    let ds = synth_multimodal(spec).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let labeled = LabeledDataset::new(ds.views.to_vec(), ds.labels.clone(), Vec::new())?;
    let spec_json = serde_json::to_value(spec).map_err(|e| Error::Format(e.to_string()))?;
    let dir = cfg.out.join(DATASET_DIR);
    save_labeled(&labeled, &dir, Some(spec_json), Some(&ds))?;
    eprintln!(
        "wrote {} samples of {} classes (d = {}) to {}",
        labeled.len(),
        labeled.class_count(),
        spec.dim,
        dir.display()
    );
    Ok(dir)
}

/// `gridsearch`: k-fold cross-validation on the split-0 training set.
pub fn run_gridsearch(cfg: &RunConfig) -> Result<GridOutcome> {
    let source = DataSource::open(cfg)?;
    let (train_set, _) = source.prepare(cfg, 0)?;
    let outcome = grid_search(&train_set, &cfg.train, &cfg.grid, cfg.seed)?;
    write_grid(&cfg.out, &outcome)?;
    println!(
        "best alpha={} beta={} lambda={} ({:.2}% mean over {} folds)",
        outcome.best.alpha, outcome.best.beta, outcome.best.lambda, outcome.best_score, cfg.grid.folds
    );
    Ok(outcome)
}
