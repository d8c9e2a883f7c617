//! Recognition metrics and the files they are written to.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::data::LabeledDataset;
use crate::error::Result;
use crate::trainer::{accuracy, ModelBundle};

/// Test-set results of one split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepeatMetrics {
    pub repeat: usize,
    pub seed: u64,
    pub test_samples: usize,
    /// Percent of test samples labeled correctly.
    pub recognition_rate: f64,
    /// Percent of test samples whose modality candidates agreed.
    pub agreement_rate: f64,
    /// Percent correct of each modality's candidate alone.
    pub candidate_rates: Vec<f64>,
    /// Percent correct per class; `None` for classes absent from the test set.
    pub per_class: Vec<Option<f64>>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub runtime_secs: f64,
}

/// Classifies `test` with `model` and tallies the results.
pub fn evaluate(model: &ModelBundle, test: &LabeledDataset, repeat: usize, seed: u64) -> Result<RepeatMetrics> {
    let start = std::time::Instant::now();
    let predictions = model.classify(&test.view_refs())?;
    let classes = model.class_count().max(test.class_count());
    let predicted: Vec<usize> = predictions.iter().map(|p| p.label).collect();
    let mut confusion = vec![vec![0usize; classes]; classes];
    for (&t, &p) in test.labels.iter().zip(&predicted) {
        confusion[t][p.min(classes - 1)] += 1;
    }
    let per_class = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let total: usize = row.iter().sum();
            (total > 0).then(|| 100.0 * row[c] as f64 / total as f64)
        })
        .collect();
    let candidate_rates = (0..model.modality_count())
        .map(|k| {
            let cand: Vec<usize> = predictions.iter().map(|p| p.candidates[k]).collect();
            100.0 * accuracy(&cand, &test.labels)
        })
        .collect();
    let agreed = predictions
        .iter()
        .filter(|p| p.candidates.windows(2).all(|w| w[0] == w[1]))
        .count();
    let n = test.len();
    Ok(RepeatMetrics {
        repeat,
        seed,
        test_samples: n,
        recognition_rate: 100.0 * accuracy(&predicted, &test.labels),
        agreement_rate: if n == 0 { 0.0 } else { 100.0 * agreed as f64 / n as f64 },
        candidate_rates,
        per_class,
        confusion,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanMetrics {
    pub repeats: usize,
    pub recognition_rate: f64,
    pub recognition_std: f64,
    pub agreement_rate: f64,
    pub candidate_rates: Vec<f64>,
}

pub fn summarize(rows: &[RepeatMetrics]) -> MeanMetrics {
    let pick = |f: &dyn Fn(&RepeatMetrics) -> f64| mean_std(&rows.iter().map(f).collect::<Vec<_>>());
    let (rate, std) = pick(&|r| r.recognition_rate);
    let modalities = rows.first().map_or(0, |r| r.candidate_rates.len());
    MeanMetrics {
        repeats: rows.len(),
        recognition_rate: rate,
        recognition_std: std,
        agreement_rate: pick(&|r| r.agreement_rate).0,
        candidate_rates: (0..modalities).map(|k| pick(&|r| r.candidate_rates[k]).0).collect(),
    }
}

pub const METRICS_TSV: &str = "metrics.tsv";
pub const METRICS_JSONL: &str = "metrics.jsonl";
pub const CONFUSION_TSV: &str = "confusion.tsv";

/// Writes `metrics.tsv` (one row per repeat plus a mean row),
/// `metrics.jsonl` and the summed `confusion.tsv` into `dir`.
pub fn write_metrics(dir: &Path, rows: &[RepeatMetrics], class_names: &[String]) -> Result<MeanMetrics> {
    std::fs::create_dir_all(dir)?;
    let mean = summarize(rows);
    let modalities = mean.candidate_rates.len();

    let mut tsv = String::from("repeat\tseed\ttest_samples\trecognition_rate\tagreement_rate");
    for k in 0..modalities {
        let _ = write!(tsv, "\tmodality{}_rate", k + 1);
    }
    tsv.push('\n');
    for r in rows {
        let _ = write!(
            tsv,
            "{}\t{}\t{}\t{:.2}\t{:.2}",
            r.repeat, r.seed, r.test_samples, r.recognition_rate, r.agreement_rate
        );
        for c in &r.candidate_rates {
            let _ = write!(tsv, "\t{c:.2}");
        }
        tsv.push('\n');
    }
    let total: usize = rows.iter().map(|r| r.test_samples).sum();
    let _ = write!(
        tsv,
        "mean\t-\t{}\t{:.2}\t{:.2}",
        total, mean.recognition_rate, mean.agreement_rate
    );
    for c in &mean.candidate_rates {
        let _ = write!(tsv, "\t{c:.2}");
    }
    tsv.push('\n');
    std::fs::write(dir.join(METRICS_TSV), tsv)?;

    let mut jsonl = std::io::BufWriter::new(std::fs::File::create(dir.join(METRICS_JSONL))?);
    for r in rows {
        writeln!(jsonl, "{}", serde_json::to_string(r).map_err(std::io::Error::other)?)?;
    }
    writeln!(
        jsonl,
        "{}",
        serde_json::json!({ "repeat": "mean", "summary": &mean })
    )?;
    jsonl.flush()?;

    let classes = rows.first().map_or(0, |r| r.confusion.len());
    let name = |c: usize| class_names.get(c).cloned().unwrap_or_else(|| format!("class_{c}"));
    let mut conf = String::from("true\\predicted");
    for c in 0..classes {
        let _ = write!(conf, "\t{}", name(c));
    }
    conf.push('\n');
    for t in 0..classes {
        conf.push_str(&name(t));
        for p in 0..classes {
            let sum: usize = rows.iter().map(|r| r.confusion[t][p]).sum();
            let _ = write!(conf, "\t{sum}");
        }
        conf.push('\n');
    }
    std::fs::write(dir.join(CONFUSION_TSV), conf)?;
    Ok(mean)
}
