//! Cross-validated search over `(α, β, λ)`.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::GridSpec;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::slrdl::Hyperparams;
use crate::trainer::{accuracy, train, TrainConfig};

/// Fold id of every sample. Each class is shuffled and dealt round-robin,
/// so fold sizes per class differ by at most one.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0; labels.len()];
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        for (rank, i) in idx.into_iter().enumerate() {
            out[i] = rank % folds;
        }
    }
    out
}

/// Validation accuracy of one grid point on one fold, or why it failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridScore {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub fold: usize,
    /// Percent correct on the held-out fold.
    pub accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best: Hyperparams,
    /// Mean held-out accuracy of `best`, in percent.
    pub best_score: f64,
    pub scores: Vec<GridScore>,
}

fn fold_score(data: &LabeledDataset, fold_of: &[usize], fold: usize, cfg: &TrainConfig) -> Result<f64> {
    let (fit_idx, val_idx): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| fold_of[i] != fold);
    let fit = data.select(&fit_idx)?;
    let val = data.select(&val_idx)?;
    if fit.per_class_counts.iter().any(|&n| n == 0) {
        return Err(Error::InvalidDataset(format!(
            "fold {fold} leaves a class without training samples"
        )));
    }
    let model = train(&fit.views[0], &fit.views[1], &fit.labels, cfg)?;
    let predicted: Vec<usize> = model.classify(&val.view_refs())?.iter().map(|p| p.label).collect();
    Ok(100.0 * accuracy(&predicted, &val.labels))
}

/// Scores every grid point on every fold and picks the best mean accuracy.
///
/// Points with any failed fold are not eligible. Ties go to the smaller
/// `α`, then `β`, then `λ`.
pub fn grid_search(data: &LabeledDataset, base: &TrainConfig, grid: &GridSpec, seed: u64) -> Result<GridOutcome> {
    if data.views.len() != 2 {
        return Err(Error::InvalidInput("grid search needs two modalities".into()));
    }
    let fold_of = stratified_folds(&data.labels, grid.folds, seed);
    let mut scores = Vec::new();
    let mut eligible: Vec<(f64, f64, f64, f64)> = Vec::new();
    for (alpha, beta, lambda) in grid.points() {
        let mut cfg = base.clone();
        cfg.hyper.alpha = alpha;
        cfg.hyper.beta = beta;
        cfg.hyper.lambda = lambda;
        let mut fold_scores = Vec::new();
        for fold in 0..grid.folds {
            let result = cfg
                .hyper
                .validate()
                .and_then(|_| fold_score(data, &fold_of, fold, &cfg));
            let (accuracy, error) = match result {
                Ok(a) => (Some(a), None),
                Err(e) => (None, Some(e.to_string())),
            };
            if let Some(a) = accuracy {
                fold_scores.push(a);
            }
            scores.push(GridScore {
                alpha,
                beta,
                lambda,
                fold,
                accuracy,
                error,
            });
        }
        if fold_scores.len() == grid.folds {
            let mean = fold_scores.iter().sum::<f64>() / grid.folds as f64;
            eligible.push((mean, alpha, beta, lambda));
        }
    }
    let best = eligible.into_iter().min_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.total_cmp(&b.2))
            .then(a.3.total_cmp(&b.3))
    });
    let Some((best_score, alpha, beta, lambda)) = best else {
        return Err(Error::numerical("grid search", "every grid point failed on some fold"));
    };
    let mut hyper = base.hyper.clone();
    hyper.alpha = alpha;
    hyper.beta = beta;
    hyper.lambda = lambda;
    Ok(GridOutcome {
        best: hyper,
        best_score,
        scores,
    })
}

pub const SCORES_TSV: &str = "scores.tsv";
pub const BEST_TOML: &str = "best.toml";

/// Writes `scores.tsv` (one row per point and fold) and `best.toml`.
pub fn write_grid(dir: &Path, outcome: &GridOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut tsv = String::from("alpha\tbeta\tlambda\tfold\taccuracy\terror\n");
    for s in &outcome.scores {
        let acc = s.accuracy.map_or_else(|| "-".to_string(), |a| format!("{a:.2}"));
        let err = s.error.as_deref().unwrap_or("-").replace(['\t', '\n'], " ");
        let _ = writeln!(tsv, "{}\t{}\t{}\t{}\t{acc}\t{err}", s.alpha, s.beta, s.lambda, s.fold);
    }
    std::fs::write(dir.join(SCORES_TSV), tsv)?;
    let best = serde_json::json!({
        "score": outcome.best_score,
        "hyper": &outcome.best,
    });
    let text = toml::to_string_pretty(&best).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    std::fs::write(dir.join(BEST_TOML), text)?;
    Ok(())
}
