//! Directory archives of named matrices: trained models and synthetic
//! dataset dumps.
//!
//! An archive is a directory holding a `manifest` (pretty JSON followed by a
//! `# sha256:<hex>` trailer line over the JSON bytes) and one `<name>.mat64`
//! blob per matrix. A blob is a 16-byte header (`MM64`, format version,
//! rows, cols as little-endian `u32`) followed by the entries in
//! column-major order as little-endian `f64`. The manifest records each
//! blob's shape and SHA-256, so a flipped byte anywhere is caught before
//! any content is interpreted.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::classifier::{ClassNoiseStats, RidgeClassifier};
use crate::data::dataset::LabeledDataset;
use crate::data::synth::SynthDataset;
use crate::error::{Error, Result};
use crate::slrdl::{Dictionary, IdealCode};
use crate::trainer::{ModalityModel, ModelBundle, TrainConfig, TrainDiagnostics};

pub const FORMAT_VERSION: u32 = 1;
pub const BLOB_MAGIC: [u8; 4] = *b"MM64";
pub const HEADER_LEN: usize = 16;
pub const MANIFEST_NAME: &str = "manifest";
const TRAILER_PREFIX: &str = "# sha256:";

pub const MODEL_KIND: &str = "mmsldl-model";
pub const SYNTH_KIND: &str = "mmsldl-synthetic";
pub const GROUND_TRUTH_DIR: &str = "ground_truth";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestDoc {
    format: String,
    version: u32,
    blobs: Vec<BlobEntry>,
    meta: Value,
}

/// A loaded archive: free-form metadata plus matrices by name.
#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    pub kind: String,
    pub meta: Value,
    pub blobs: BTreeMap<String, DMatrix<f64>>,
}

impl Archive {
    pub fn blob(&self, name: &str) -> Result<&DMatrix<f64>> {
        self.blobs
            .get(name)
            .ok_or_else(|| Error::Format(format!("archive has no blob '{name}'")))
    }

    fn take(&mut self, name: &str) -> Result<DMatrix<f64>> {
        self.blobs
            .remove(name)
            .ok_or_else(|| Error::Format(format!("archive has no blob '{name}'")))
    }
}

/// Serializes one matrix into the blob layout.
pub fn encode_blob(m: &DMatrix<f64>) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.nrows()).map_err(|_| Error::Format("matrix has too many rows".into()))?;
    let cols = u32::try_from(m.ncols()).map_err(|_| Error::Format("matrix has too many columns".into()))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.len());
    out.extend_from_slice(&BLOB_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    // nalgebra storage is column-major already
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

/// Parses a blob whose length has already been checked.
pub fn decode_blob(name: &str, bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            name: name.into(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    if bytes[..4] != BLOB_MAGIC {
        return Err(Error::Format(format!("blob '{name}' has a bad magic number")));
    }
    let version = u32_at(bytes, 4);
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let rows = u32_at(bytes, 8) as usize;
    let cols = u32_at(bytes, 12) as usize;
    let expected = HEADER_LEN + 8 * rows * cols;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            name: name.into(),
            expected,
            found: bytes.len(),
        });
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(DMatrix::from_vec(rows, cols, data))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn valid_blob_name(name: &str) -> bool {
    !name.is_empty()
        && name != MANIFEST_NAME
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn temp_sibling(dir: &Path) -> Result<PathBuf> {
    let name = dir
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("archive path {} has no final component", dir.display())))?;
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    Ok(parent.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id())))
}

fn write_contents(dir: &Path, kind: &str, meta: &Value, blobs: &[(String, &DMatrix<f64>)]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(blobs.len());
    for (name, m) in blobs {
        if !valid_blob_name(name) {
            return Err(Error::InvalidInput(format!("invalid blob name '{name}'")));
        }
        let bytes = encode_blob(m)?;
        fs::write(dir.join(format!("{name}.mat64")), &bytes)?;
        entries.push(BlobEntry {
            name: name.clone(),
            rows: m.nrows(),
            cols: m.ncols(),
            sha256: sha256_hex(&bytes),
        });
    }
    let doc = ManifestDoc {
        format: kind.into(),
        version: FORMAT_VERSION,
        blobs: entries,
        meta: meta.clone(),
    };
    let body = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
    let text = format!("{body}\n{TRAILER_PREFIX}{}\n", sha256_hex(body.as_bytes()));
    fs::write(dir.join(MANIFEST_NAME), text)?;
    Ok(())
}

/// Writes an archive atomically: contents go to a temporary sibling that is
/// renamed over `dir`.
pub fn write_archive(dir: &Path, kind: &str, meta: &Value, blobs: &[(String, &DMatrix<f64>)]) -> Result<()> {
    let tmp = temp_sibling(dir)?;
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    if let Err(e) = write_contents(&tmp, kind, meta, blobs) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    fs::rename(&tmp, dir)?;
    Ok(())
}

fn read_manifest(dir: &Path) -> Result<ManifestDoc> {
    let path = dir.join(MANIFEST_NAME);
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    let raw = fs::read(&path)?;
    let text = String::from_utf8(raw).map_err(|_| Error::Checksum(MANIFEST_NAME.into()))?;
    let trimmed = text.strip_suffix('\n').unwrap_or(&text);
    let (body, trailer) = trimmed
        .rsplit_once('\n')
        .ok_or_else(|| Error::Checksum(MANIFEST_NAME.into()))?;
    let recorded = trailer
        .strip_prefix(TRAILER_PREFIX)
        .ok_or_else(|| Error::Checksum(MANIFEST_NAME.into()))?;
    if recorded != sha256_hex(body.as_bytes()) {
        return Err(Error::Checksum(MANIFEST_NAME.into()));
    }
    let value: Value = serde_json::from_str(body).map_err(|e| Error::Format(format!("manifest: {e}")))?;
    let version = value
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Format("manifest has no version".into()))?;
    if version != u64::from(FORMAT_VERSION) {
        return Err(Error::Version {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            supported: FORMAT_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| Error::Format(format!("manifest: {e}")))
}

/// Reads and verifies an archive of the given kind.
///
/// Checks run manifest checksum, version, then per blob: length against
/// the recorded shape, checksum, header. Nothing is returned unless every
/// blob passes.
pub fn read_archive(dir: &Path, kind: &str) -> Result<Archive> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let doc = read_manifest(dir)?;
    if doc.format != kind {
        return Err(Error::Format(format!(
            "archive holds '{}', expected '{kind}'",
            doc.format
        )));
    }
    let mut blobs = BTreeMap::new();
    for entry in &doc.blobs {
        if !valid_blob_name(&entry.name) {
            return Err(Error::Format(format!("invalid blob name '{}'", entry.name)));
        }
        let path = dir.join(format!("{}.mat64", entry.name));
        if !path.is_file() {
            return Err(Error::MissingFile(path));
        }
        let bytes = fs::read(&path)?;
        let expected = HEADER_LEN + 8 * entry.rows * entry.cols;
        if bytes.len() != expected {
            return Err(Error::Truncated {
                name: entry.name.clone(),
                expected,
                found: bytes.len(),
            });
        }
        if sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::Checksum(entry.name.clone()));
        }
        let m = decode_blob(&entry.name, &bytes)?;
        if m.shape() != (entry.rows, entry.cols) {
            return Err(Error::Format(format!("blob '{}' disagrees with its manifest shape", entry.name)));
        }
        blobs.insert(entry.name.clone(), m);
    }
    Ok(Archive {
        kind: doc.format,
        meta: doc.meta,
        blobs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelMeta {
    labels: Vec<usize>,
    label_map: Vec<String>,
    config: TrainConfig,
    seed: Option<u64>,
    modalities: Vec<ModalityMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModalityMeta {
    atoms_per_class: Vec<usize>,
    ridge_lambda: f64,
    class_stats_converged: Vec<bool>,
}

fn column(v: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len(), 1, v.as_slice())
}

/// Saves a trained model. Training diagnostics are not part of the archive.
pub fn save_model(bundle: &ModelBundle, dir: &Path) -> Result<()> {
    let mut owned: Vec<(String, DMatrix<f64>)> = Vec::new();
    let mut borrowed: Vec<(String, &DMatrix<f64>)> = vec![("ideal_code".into(), bundle.ideal_code.matrix())];
    let mut modalities = Vec::new();
    for (k, m) in bundle.modalities.iter().enumerate() {
        borrowed.push((format!("m{k}_dictionary"), m.dictionary.atoms()));
        borrowed.push((format!("m{k}_train_code"), &m.train_code));
        borrowed.push((format!("m{k}_train_error"), &m.train_error));
        borrowed.push((format!("m{k}_ridge_w"), &m.ridge.w_hat));
        borrowed.push((format!("m{k}_ridge_h"), &m.ridge.h));
        borrowed.push((format!("m{k}_ridge_q"), &m.ridge.q_score));
        for (c, s) in m.class_stats.iter().enumerate() {
            borrowed.push((format!("m{k}_class{c}_low_rank"), &s.low_rank));
            borrowed.push((format!("m{k}_class{c}_basis"), &s.basis));
            owned.push((format!("m{k}_class{c}_mean_noise"), column(&s.mean_noise)));
        }
        modalities.push(ModalityMeta {
            atoms_per_class: m.dictionary.atoms_per_class(),
            ridge_lambda: m.ridge.lambda_ridge,
            class_stats_converged: m.class_stats.iter().map(|s| s.converged).collect(),
        });
    }
    borrowed.extend(owned.iter().map(|(n, m)| (n.clone(), m)));
    let meta = ModelMeta {
        labels: bundle.labels.clone(),
        label_map: bundle.label_map.clone(),
        config: bundle.config.clone(),
        seed: bundle.seed,
        modalities,
    };
    let meta = serde_json::to_value(meta).map_err(|e| Error::Format(e.to_string()))?;
    write_archive(dir, MODEL_KIND, &meta, &borrowed)
}

/// Loads a model saved by [`save_model`].
pub fn load_model(dir: &Path) -> Result<ModelBundle> {
    let mut archive = read_archive(dir, MODEL_KIND)?;
    let meta: ModelMeta =
        serde_json::from_value(archive.meta.clone()).map_err(|e| Error::Format(format!("model metadata: {e}")))?;
    let ideal_matrix = archive.take("ideal_code")?;
    let counts = crate::slrdl::class_counts(&meta.labels)?;
    let ideal_code = IdealCode::build(&meta.labels, &counts)?;
    if ideal_code.matrix() != &ideal_matrix {
        return Err(Error::Format("stored ideal code disagrees with the stored labels".into()));
    }
    let mut modalities = Vec::with_capacity(meta.modalities.len());
    for (k, mm) in meta.modalities.iter().enumerate() {
        let dictionary = Dictionary::new(archive.take(&format!("m{k}_dictionary"))?, &mm.atoms_per_class)?;
        let ridge = RidgeClassifier {
            w_hat: archive.take(&format!("m{k}_ridge_w"))?,
            h: archive.take(&format!("m{k}_ridge_h"))?,
            lambda_ridge: mm.ridge_lambda,
            q_score: archive.take(&format!("m{k}_ridge_q"))?,
        };
        let mut class_stats = Vec::with_capacity(mm.class_stats_converged.len());
        for (c, &converged) in mm.class_stats_converged.iter().enumerate() {
            let noise = archive.take(&format!("m{k}_class{c}_mean_noise"))?;
            class_stats.push(ClassNoiseStats {
                low_rank: archive.take(&format!("m{k}_class{c}_low_rank"))?,
                mean_noise: DVector::from_column_slice(noise.as_slice()),
                basis: archive.take(&format!("m{k}_class{c}_basis"))?,
                converged,
            });
        }
        modalities.push(ModalityModel {
            dictionary,
            train_code: archive.take(&format!("m{k}_train_code"))?,
            train_error: archive.take(&format!("m{k}_train_error"))?,
            ridge,
            class_stats,
        });
    }
    Ok(ModelBundle {
        modalities,
        ideal_code,
        labels: meta.labels,
        config: meta.config,
        label_map: meta.label_map,
        seed: meta.seed,
        diagnostics: TrainDiagnostics::default(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SynthMeta {
    labels: Vec<usize>,
    class_names: Vec<String>,
    #[serde(default)]
    spec: Option<Value>,
}

/// Writes a labeled dataset, optionally with the generator's ground truth in
/// a `ground_truth` sub-archive.
pub fn save_labeled(ds: &LabeledDataset, dir: &Path, spec: Option<Value>, truth: Option<&SynthDataset>) -> Result<()> {
    let meta = SynthMeta {
        labels: ds.labels.clone(),
        class_names: ds.class_names.clone(),
        spec,
    };
    let meta = serde_json::to_value(meta).map_err(|e| Error::Format(e.to_string()))?;
    let blobs: Vec<(String, &DMatrix<f64>)> = ds
        .views
        .iter()
        .enumerate()
        .map(|(k, v)| (format!("x{}", k + 1), v))
        .collect();
    write_archive(dir, SYNTH_KIND, &meta, &blobs)?;
    if let Some(t) = truth {
        let mut gt: Vec<(String, &DMatrix<f64>)> = Vec::new();
        for k in 0..2 {
            gt.push((format!("clean{}", k + 1), &t.clean[k]));
            gt.push((format!("mask{}", k + 1), &t.masks[k]));
            for (c, b) in t.bases[k].iter().enumerate() {
                gt.push((format!("basis{}_class{c}", k + 1), b));
            }
        }
        write_contents(&dir.join(GROUND_TRUTH_DIR), SYNTH_KIND, &Value::Null, &gt)?;
    }
    Ok(())
}

/// Reads a dataset written by [`save_labeled`]; ground truth is ignored.
pub fn load_labeled(dir: &Path) -> Result<LabeledDataset> {
    let mut archive = read_archive(dir, SYNTH_KIND)?;
    let meta: SynthMeta =
        serde_json::from_value(archive.meta.clone()).map_err(|e| Error::Format(format!("dataset metadata: {e}")))?;
    let mut views = Vec::new();
    for k in 1.. {
        match archive.blobs.remove(&format!("x{k}")) {
            Some(m) => views.push(m),
            None => break,
        }
    }
    if views.is_empty() {
        return Err(Error::Format("dataset archive has no views".into()));
    }
    LabeledDataset::new(views, meta.labels, meta.class_names)
}

/// Ground-truth blobs of a synthetic dump, by name.
pub fn load_ground_truth(dir: &Path) -> Result<BTreeMap<String, DMatrix<f64>>> {
    Ok(read_archive(&dir.join(GROUND_TRUTH_DIR), SYNTH_KIND)?.blobs)
}
