//! Joint training across modalities and test-time coding.
//!
//! Training alternates over modalities in order (raw pixels first). Each
//! modality solves its coding problem against the other modality's latest
//! code, then refits its dictionary with the codes fixed. After training,
//! the training data is recoded with the coupling switched off so that the
//! ridge classifier is fit on the same kind of code it will see at test
//! time.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    candidate_label, fuse, ClassNoiseStats, FusionDecision, RidgeClassifier, RpcaParams,
};
use crate::error::{Error, ResidualRecord, Result};
use crate::slrdl::{
    class_counts, default_sparsity, dictionary_converged, fit_dictionary, ksvd_init, solve_coding,
    CodingResult, Coupling, Dictionary, Hyperparams, IdealCode, KsvdParams,
};

/// Everything `train` needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hyper: Hyperparams,
    /// Ridge weight of the label regression.
    pub ridge_lambda: f64,
    pub ksvd: KsvdParams,
    pub rpca: RpcaParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hyper: Hyperparams::default(),
            ridge_lambda: 1.0,
            ksvd: KsvdParams::default(),
            rpca: RpcaParams::default(),
        }
    }
}

/// Per-modality part of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityModel {
    pub dictionary: Dictionary,
    /// Training codes recoded with `α = 0`.
    pub train_code: DMatrix<f64>,
    pub train_error: DMatrix<f64>,
    pub ridge: RidgeClassifier,
    /// One low-rank class model per class.
    pub class_stats: Vec<ClassNoiseStats>,
}

/// One coding-plus-dictionary pass of one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternationTrace {
    pub alternation: usize,
    pub modality: usize,
    pub coding_converged: bool,
    pub history: Vec<ResidualRecord>,
    pub dict_iterations: usize,
    pub dict_converged: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainDiagnostics {
    pub traces: Vec<AlternationTrace>,
    pub alternations: usize,
    /// Whether the outer loop stopped because every dictionary settled.
    pub dictionaries_converged: bool,
    /// Convergence flag of the final `α = 0` recoding, per modality.
    pub recode_converged: Vec<bool>,
}

/// Trained dictionaries, codes, classifiers and class models.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub modalities: Vec<ModalityModel>,
    pub ideal_code: IdealCode,
    pub labels: Vec<usize>,
    pub config: TrainConfig,
    pub label_map: Vec<String>,
    /// Seed of the run that produced the model, when known.
    pub seed: Option<u64>,
    pub diagnostics: TrainDiagnostics,
}

/// Classification of one test sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Candidate label per modality.
    pub candidates: Vec<usize>,
    /// Present when two modalities were fused.
    pub fusion: Option<FusionDecision>,
    pub label: usize,
}

/// How a lone modality is coupled during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Partner {
    /// The other modality's latest code.
    Modalities,
    /// A fixed identity partner, reducing the coupling to `α‖Z − Q‖²_F`.
    Identity,
}

/// Trains on two column-aligned modalities.
pub fn train(x1: &DMatrix<f64>, x2: &DMatrix<f64>, labels: &[usize], cfg: &TrainConfig) -> Result<ModelBundle> {
    if x1.ncols() != x2.ncols() {
        return Err(Error::InvalidInput(format!(
            "modalities are not column-aligned: {} vs {} samples",
            x1.ncols(),
            x2.ncols()
        )));
    }
    fit_views(&[x1, x2], labels, cfg, Partner::Modalities)
}

/// Trains a single modality with the ideal-code term `α‖Z − Q‖²_F`.
pub fn train_single_modality(x: &DMatrix<f64>, labels: &[usize], cfg: &TrainConfig) -> Result<ModelBundle> {
    fit_views(&[x], labels, cfg, Partner::Identity)
}

fn split_classes(x: &DMatrix<f64>, counts: &[usize]) -> Vec<DMatrix<f64>> {
    let mut start = 0;
    counts
        .iter()
        .map(|&p| {
            let block = x.columns(start, p).into_owned();
            start += p;
            block
        })
        .collect()
}

fn fit_views(views: &[&DMatrix<f64>], labels: &[usize], cfg: &TrainConfig, partner: Partner) -> Result<ModelBundle> {
    let h = &cfg.hyper;
    h.validate()?;
    let n = labels.len();
    if n == 0 {
        return Err(Error::InvalidInput("no training samples".into()));
    }
    for (k, x) in views.iter().enumerate() {
        if x.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "modality {} has {} samples but there are {n} labels",
                k + 1,
                x.ncols()
            )));
        }
        if x.nrows() == 0 || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "modality {} data is empty or non-finite",
                k + 1
            )));
        }
    }
    let counts = class_counts(labels)?;
    if let Some(c) = counts.iter().position(|&p| p == 0) {
        return Err(Error::InvalidInput(format!("class {c} has no training samples")));
    }
    let ideal = IdealCode::build(labels, &counts)?;
    let sparsity = cfg.ksvd.sparsity.unwrap_or_else(|| default_sparsity(&counts));

    let mut dicts = views
        .iter()
        .enumerate()
        .map(|(k, x)| {
            ksvd_init(&split_classes(x, &counts), &counts, sparsity, cfg.ksvd.rounds)
                .map_err(|e| e.in_modality(k))
        })
        .collect::<Result<Vec<_>>>()?;

    // zero initialization of every code, so coupling activates once a
    // partner has produced a code
    let identity = DMatrix::identity(n, n);
    let mut latest: Vec<DMatrix<f64>> = views.iter().map(|_| DMatrix::zeros(n, n)).collect();
    let mut diagnostics = TrainDiagnostics::default();

    for alt in 0..h.max_outer_alternations {
        let previous = dicts.clone();
        for k in 0..views.len() {
            let partner_code = match partner {
                Partner::Identity => &identity,
                Partner::Modalities => &latest[(k + 1) % views.len()],
            };
            let coupling = Coupling {
                ideal: &ideal,
                partner: partner_code,
            };
            let coded = solve_coding(views[k], &dicts[k], Some(coupling), h).map_err(|e| e.in_modality(k))?;
            let CodingResult {
                mut state,
                converged,
                history,
            } = coded;
            let fit = fit_dictionary(&dicts[k], &mut state, views[k], h).map_err(|e| e.in_modality(k))?;
            diagnostics.traces.push(AlternationTrace {
                alternation: alt,
                modality: k,
                coding_converged: converged,
                history,
                dict_iterations: fit.iterations,
                dict_converged: fit.converged,
            });
            dicts[k] = fit.dictionary;
            latest[k] = state.z;
        }
        diagnostics.alternations = alt + 1;
        if dicts
            .iter()
            .zip(&previous)
            .all(|(new, old)| dictionary_converged(new, old, h))
        {
            diagnostics.dictionaries_converged = true;
            break;
        }
    }

    let mut modalities = Vec::with_capacity(views.len());
    for (k, (x, dict)) in views.iter().zip(dicts).enumerate() {
        let model = finish_modality(x, dict, labels, &counts, cfg).map_err(|e| e.in_modality(k))?;
        diagnostics.recode_converged.push(model.1);
        modalities.push(model.0);
    }

    Ok(ModelBundle {
        modalities,
        ideal_code: ideal,
        labels: labels.to_vec(),
        config: cfg.clone(),
        label_map: (0..counts.len()).map(|c| format!("class_{c}")).collect(),
        seed: None,
        diagnostics,
    })
}

fn finish_modality(
    x: &DMatrix<f64>,
    dictionary: Dictionary,
    labels: &[usize],
    counts: &[usize],
    cfg: &TrainConfig,
) -> Result<(ModalityModel, bool)> {
    let coded = code_samples(x, &dictionary, &cfg.hyper)?;
    let ridge = RidgeClassifier::fit(coded.z(), labels, &dictionary, cfg.ridge_lambda)?;
    let class_stats = split_classes(x, counts)
        .par_iter()
        .map(|block| ClassNoiseStats::fit(block, &cfg.rpca))
        .collect::<Result<Vec<_>>>()?;
    let converged = coded.converged;
    let CodingResult { state, .. } = coded;
    Ok((
        ModalityModel {
            dictionary,
            train_code: state.z,
            train_error: state.e,
            ridge,
            class_stats,
        },
        converged,
    ))
}

/// Codes a data matrix against a trained dictionary with the coupling term
/// switched off.
pub fn code_samples(x: &DMatrix<f64>, dict: &Dictionary, h: &Hyperparams) -> Result<CodingResult> {
    solve_coding(x, dict, None, &h.uncoupled())
}

/// Fused decision for one sample given its codes and raw views in both
/// modalities.
pub fn fuse_and_classify(
    model: &ModelBundle,
    z_ts: [&DVector<f64>; 2],
    x_ts: [&DVector<f64>; 2],
) -> Result<FusionDecision> {
    if model.modalities.len() != 2 {
        return Err(Error::InvalidInput("fusion needs a two-modality model".into()));
    }
    let (c1, _) = candidate_label(&model.modalities[0].ridge, z_ts[0])?;
    let (c2, _) = candidate_label(&model.modalities[1].ridge, z_ts[1])?;
    fuse(
        (c1, c2),
        x_ts,
        [
            &model.modalities[0].class_stats,
            &model.modalities[1].class_stats,
        ],
    )
}

impl ModelBundle {
    pub fn class_count(&self) -> usize {
        self.label_map.len()
    }

    pub fn modality_count(&self) -> usize {
        self.modalities.len()
    }

    /// Stored class model of class `c` in modality `k`.
    pub fn class_stats(&self, c: usize, k: usize) -> Option<&ClassNoiseStats> {
        self.modalities.get(k)?.class_stats.get(c)
    }

    /// Codes test data of modality `k` with `α = 0`.
    pub fn code(&self, k: usize, x: &DMatrix<f64>) -> Result<CodingResult> {
        let m = self
            .modalities
            .get(k)
            .ok_or_else(|| Error::InvalidInput(format!("model has no modality {}", k + 1)))?;
        code_samples(x, &m.dictionary, &self.config.hyper).map_err(|e| e.in_modality(k))
    }

    /// Classifies a batch of test samples, one matrix per modality.
    ///
    /// The batch is coded jointly per modality. With two modalities the
    /// candidate labels are fused; with one, the candidate is the answer.
    pub fn classify(&self, views: &[&DMatrix<f64>]) -> Result<Vec<Prediction>> {
        if views.len() != self.modalities.len() {
            return Err(Error::InvalidInput(format!(
                "model has {} modalities but {} views were given",
                self.modalities.len(),
                views.len()
            )));
        }
        let n = views[0].ncols();
        if views.iter().any(|v| v.ncols() != n) {
            return Err(Error::InvalidInput("test views are not column-aligned".into()));
        }
        let codes = views
            .iter()
            .enumerate()
            .map(|(k, x)| self.code(k, x).map(|c| c.state.z))
            .collect::<Result<Vec<_>>>()?;

        (0..n)
            .map(|i| {
                let z: Vec<DVector<f64>> = codes.iter().map(|z| z.column(i).into_owned()).collect();
                let candidates = self
                    .modalities
                    .iter()
                    .zip(&z)
                    .map(|(m, zi)| candidate_label(&m.ridge, zi).map(|(c, _)| c))
                    .collect::<Result<Vec<_>>>()?;
                if self.modalities.len() == 2 {
                    let x0 = views[0].column(i).into_owned();
                    let x1 = views[1].column(i).into_owned();
                    let decision = fuse(
                        (candidates[0], candidates[1]),
                        [&x0, &x1],
                        [
                            &self.modalities[0].class_stats,
                            &self.modalities[1].class_stats,
                        ],
                    )?;
                    Ok(Prediction {
                        label: decision.winner,
                        candidates,
                        fusion: Some(decision),
                    })
                } else {
                    Ok(Prediction {
                        label: candidates[0],
                        candidates,
                        fusion: None,
                    })
                }
            })
            .collect()
    }
}

/// Fraction of predictions equal to the reference labels.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len() as f64
}
