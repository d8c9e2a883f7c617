//! The two views of an image: raw pixels and an illumination-invariant
//! plane.
//!
//! The invariant follows the entropy-minimization construction on
//! log-chromaticity: lighting changes move a pixel's 2-D log-chromaticity
//! along a common direction, so projecting onto the direction that minimizes
//! the entropy of the projected values collapses that variation. Pure
//! intensity changes (shadows that scale all channels) cancel in the
//! chromaticity ratios themselves.
//!
//! Grayscale inputs have no chromaticity. For those the second view is a
//! local normalization: log intensity minus its box-blurred mean.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Luma weights for RGB to gray.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major image with interleaved channels, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl ImagePlane {
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("image dimensions must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidInput(format!("images have 1 or 3 channels, got {channels}")));
        }
        if pixels.len() != width * height * channels {
            return Err(Error::InvalidInput(format!(
                "{width}x{height}x{channels} image needs {} values, got {}",
                width * height * channels,
                pixels.len()
            )));
        }
        if let Some(v) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    /// Builds a plane from a closure over `(x, y, channel)`, clamping to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, channels: usize, f: impl Fn(usize, usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    pixels.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Self::new(width, height, channels, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let w = self.width;
        let ch = self.channels;
        self.pixels[(y * w + x) * ch + c] = v;
    }

    pub fn to_grayscale(&self) -> ImagePlane {
        if self.channels == 1 {
            return self.clone();
        }
        let pixels = self
            .pixels
            .chunks_exact(3)
            .map(|p| (LUMA[0] * p[0] + LUMA[1] * p[1] + LUMA[2] * p[2]).clamp(0.0, 1.0))
            .collect();
        ImagePlane {
            width: self.width,
            height: self.height,
            channels: 1,
            pixels,
        }
    }

    /// Multiplies every intensity by `s`, clamping to `[0, 1]`.
    pub fn scaled(&self, s: f64) -> ImagePlane {
        ImagePlane {
            pixels: self.pixels.iter().map(|v| (v * s).clamp(0.0, 1.0)).collect(),
            ..self.clone()
        }
    }

    /// Bilinear resampling to a new geometry (pixel-center aligned).
    pub fn resize(&self, width: usize, height: usize) -> Result<ImagePlane> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("target dimensions must be positive".into()));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let mut out = Vec::with_capacity(width * height * self.channels);
        for y in 0..height {
            let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let ty = fy - y0 as f64;
            for x in 0..width {
                let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let tx = fx - x0 as f64;
                for c in 0..self.channels {
                    let top = self.get(x0, y0, c) * (1.0 - tx) + self.get(x1, y0, c) * tx;
                    let bottom = self.get(x0, y1, c) * (1.0 - tx) + self.get(x1, y1, c) * tx;
                    out.push((top * (1.0 - ty) + bottom * ty).clamp(0.0, 1.0));
                }
            }
        }
        ImagePlane::new(width, height, self.channels, out)
    }

    /// Content hash over geometry and pixel bits.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update((self.width as u64).to_le_bytes());
        hasher.update((self.height as u64).to_le_bytes());
        hasher.update((self.channels as u64).to_le_bytes());
        for v in &self.pixels {
            hasher.update(v.to_le_bytes());
        }
        hasher.finalize().into()
    }
}

/// Column-major stacking of the grayscale plane into a `width·height` vector.
pub fn to_raw_vector(img: &ImagePlane) -> DVector<f64> {
    let gray = img.to_grayscale();
    let (w, h) = (gray.width, gray.height);
    DVector::from_fn(w * h, |i, _| gray.pixels[(i % h) * w + i / h])
}

/// Inverse of [`to_raw_vector`] for a single-channel plane.
pub fn from_raw_vector(v: &DVector<f64>, width: usize, height: usize) -> Result<ImagePlane> {
    if v.len() != width * height {
        return Err(Error::InvalidInput(format!(
            "vector of length {} does not fit {width}x{height}",
            v.len()
        )));
    }
    let mut pixels = vec![0.0; width * height];
    for (i, &val) in v.iter().enumerate() {
        pixels[(i % height) * width + i / height] = val;
    }
    ImagePlane::new(width, height, 1, pixels)
}

/// Per-pixel log-chromaticity `(log((R+ε)/(G+ε)), log((B+ε)/(G+ε)))`.
pub fn log_chromaticity(img: &ImagePlane, eps: f64) -> Result<Vec<[f64; 2]>> {
    if img.channels != 3 {
        return Err(Error::InvalidInput("log-chromaticity needs a 3-channel image".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    Ok(img
        .pixels
        .chunks_exact(3)
        .map(|p| {
            let g = p[1] + eps;
            [((p[0] + eps) / g).ln(), ((p[2] + eps) / g).ln()]
        })
        .collect())
}

/// Fixed settings of the invariant construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InvariantParams {
    pub eps: f64,
    pub bins: usize,
    /// Percentile range spanned by the histogram.
    pub lower_percentile: f64,
    pub upper_percentile: f64,
    pub grid_step_deg: f64,
    /// Half-width of the box filter in the grayscale fallback (3 gives 7×7).
    pub box_radius: usize,
}

impl Default for InvariantParams {
    fn default() -> Self {
        Self {
            eps: 1.0 / 255.0,
            bins: 64,
            lower_percentile: 5.0,
            upper_percentile: 95.0,
            grid_step_deg: 1.0,
            box_radius: 3,
        }
    }
}

fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Shannon entropy (nats) of the histogram of projections onto
/// `(cos θ, sin θ)`.
///
/// The histogram spans the configured percentile range; values outside it
/// land in the edge bins. A degenerate range falls back to min–max, and a
/// field of identical projections has entropy 0.
pub fn entropy_of_projection(field: &[[f64; 2]], theta: f64, params: &InvariantParams) -> Result<f64> {
    if field.is_empty() {
        return Err(Error::InvalidInput("empty chromaticity field".into()));
    }
    if params.bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    let (c, s) = (theta.cos(), theta.sin());
    let mut proj: Vec<f64> = field.iter().map(|p| p[0] * c + p[1] * s).collect();
    proj.sort_by(|a, b| a.total_cmp(b));
    let mut lo = percentile(&proj, params.lower_percentile);
    let mut hi = percentile(&proj, params.upper_percentile);
    let spread_floor = 1e-12 * (1.0 + proj[0].abs().max(proj[proj.len() - 1].abs()));
    if hi - lo <= spread_floor {
        lo = proj[0];
        hi = proj[proj.len() - 1];
        if hi - lo <= spread_floor {
            return Ok(0.0);
        }
    }
    let mut counts = vec![0usize; params.bins];
    let width = (hi - lo) / params.bins as f64;
    for v in &proj {
        let b = ((v - lo) / width).floor();
        let b = if b < 0.0 { 0 } else { (b as usize).min(params.bins - 1) };
        counts[b] += 1;
    }
    let n = proj.len() as f64;
    Ok(counts
        .iter()
        .filter(|&&k| k > 0)
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.ln()
        })
        .sum())
}

/// Grid angles in `[0, π)`.
fn angle_grid(step_deg: f64) -> Vec<f64> {
    let steps = (180.0 / step_deg).round().max(1.0) as usize;
    (0..steps).map(|i| (i as f64 * step_deg).to_radians()).filter(|t| *t < PI).collect()
}

/// Result of [`illumination_invariant`].
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantOutput {
    pub plane: ImagePlane,
    /// Entropy-minimizing angle; `None` for pass-through.
    pub theta: Option<f64>,
    /// Set when a grayscale input was returned unchanged.
    pub passthrough: bool,
}

fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let range = hi - lo;
    if !(range > 1e-12 * (1.0 + hi.abs())) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
}

/// Entropy-minimizing log-chromaticity projection, min–max normalized.
///
/// Grayscale inputs are returned unchanged with `passthrough` set.
pub fn illumination_invariant(img: &ImagePlane, params: &InvariantParams) -> Result<InvariantOutput> {
    if img.channels == 1 {
        return Ok(InvariantOutput {
            plane: img.clone(),
            theta: None,
            passthrough: true,
        });
    }
    let field = log_chromaticity(img, params.eps)?;
    let mut best = (f64::INFINITY, 0.0);
    for theta in angle_grid(params.grid_step_deg) {
        let h = entropy_of_projection(&field, theta, params)?;
        if h < best.0 {
            best = (h, theta);
        }
    }
    let theta = best.1;
    let (c, s) = (theta.cos(), theta.sin());
    let proj: Vec<f64> = field.iter().map(|p| p[0] * c + p[1] * s).collect();
    let plane = ImagePlane::new(img.width, img.height, 1, min_max_normalize(&proj))?;
    Ok(InvariantOutput {
        plane,
        theta: Some(theta),
        passthrough: false,
    })
}

/// Log intensity minus its `(2r+1)²` box mean, min–max normalized.
pub fn local_normalization(img: &ImagePlane, params: &InvariantParams) -> Result<ImagePlane> {
    let gray = img.to_grayscale();
    let (w, h) = (gray.width, gray.height);
    let logs: Vec<f64> = gray.pixels.iter().map(|v| (v + params.eps).ln()).collect();

    // summed-area table for the box mean, window clipped at the borders
    let mut sat = vec![0.0; (w + 1) * (h + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += logs[y * w + x];
            sat[(y + 1) * (w + 1) + x + 1] = sat[y * (w + 1) + x + 1] + row;
        }
    }
    let r = params.box_radius;
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(h));
        for x in 0..w {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(w));
            let sum = sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0]
                + sat[y0 * (w + 1) + x0];
            let area = ((y1 - y0) * (x1 - x0)) as f64;
            out.push(logs[y * w + x] - sum / area);
        }
    }
    ImagePlane::new(w, h, 1, min_max_normalize(&out))
}

/// A deterministic map from an image to one modality's feature vector.
pub trait ModalityTransform: Send + Sync {
    fn name(&self) -> &str;
    /// Output length for an input geometry; never depends on content.
    fn output_dim(&self, width: usize, height: usize) -> usize;
    fn apply(&self, img: &ImagePlane) -> Result<DVector<f64>>;
}

/// First modality: grayscale pixels, column-major.
#[derive(Debug, Clone, Copy, Default)]
pub struct RawPixels;

impl ModalityTransform for RawPixels {
    fn name(&self) -> &str {
        "raw"
    }

    fn output_dim(&self, width: usize, height: usize) -> usize {
        width * height
    }

    fn apply(&self, img: &ImagePlane) -> Result<DVector<f64>> {
        Ok(to_raw_vector(img))
    }
}

/// Second modality: entropy-minimization invariant for color input, local
/// normalization for grayscale input.
#[derive(Debug, Clone, Copy, Default)]
pub struct IlluminationInvariant {
    pub params: InvariantParams,
}

impl IlluminationInvariant {
    pub fn plane(&self, img: &ImagePlane) -> Result<ImagePlane> {
        if img.channels == 1 {
            local_normalization(img, &self.params)
        } else {
            Ok(illumination_invariant(img, &self.params)?.plane)
        }
    }
}

impl ModalityTransform for IlluminationInvariant {
    fn name(&self) -> &str {
        "invariant"
    }

    fn output_dim(&self, width: usize, height: usize) -> usize {
        width * height
    }

    fn apply(&self, img: &ImagePlane) -> Result<DVector<f64>> {
        Ok(to_raw_vector(&self.plane(img)?))
    }
}

/// Memoizes a transform per image content hash.
#[derive(Default)]
pub struct TransformCache {
    entries: HashMap<[u8; 32], DVector<f64>>,
}

impl TransformCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_apply(&mut self, transform: &dyn ModalityTransform, img: &ImagePlane) -> Result<DVector<f64>> {
        let key = img.content_hash();
        if let Some(v) = self.entries.get(&key) {
            return Ok(v.clone());
        }
        let v = transform.apply(img)?;
        self.entries.insert(key, v.clone());
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
