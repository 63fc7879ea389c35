//! Sources of time-frequency masks: imported segmentation PNGs, a classical
//! per-row threshold segmenter, and a clean-reference oracle for synthetic
//! experiments.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{magnitude_db, mask_image_to_grid, MaskImage};
use crate::morphology::BinaryGrid;
use crate::spectral::{centered_row, natural_bin, stft, symmetrize_mask, AudioClip, Spectrogram, StftParams, TfMask};

/// Consistency constant relating MAD to a Gaussian standard deviation.
const MAD_SCALE: f64 = 1.4826;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub k_mad: f64,
    pub min_region_px: usize,
    pub morph_radius: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            k_mad: 3.0,
            min_region_px: 20,
            morph_radius: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskProvider {
    /// Reads `<dir>/<clip_id>_mask.png`, or the clip's own mask artifact when
    /// `dir` is `None`.
    Import {
        dir: Option<PathBuf>,
    },
    Baseline(BaselineParams),
    /// Thresholds the spectrogram of a clean reference.
    Oracle {
        threshold_db: f64,
    },
}

impl MaskProvider {
    pub fn kind(&self) -> &'static str {
        match self {
            MaskProvider::Import { .. } => "import",
            MaskProvider::Baseline(_) => "baseline",
            MaskProvider::Oracle { .. } => "oracle",
        }
    }
}

/// Per-clip inputs a provider may draw on.
pub struct ProviderInput<'a> {
    pub clip_id: &'a str,
    pub spec: &'a Spectrogram,
    /// Mask artifact recorded for the clip, if any.
    pub mask_path: Option<&'a Path>,
    /// Clean reference signal, if any.
    pub clean: Option<&'a AudioClip>,
    pub n_sources: u8,
}

impl MaskProvider {
    pub fn mask_for(&self, input: &ProviderInput<'_>) -> Result<TfMask> {
        match self {
            MaskProvider::Import { dir } => {
                let path = match dir {
                    Some(dir) => dir.join(format!("{}_mask.png", input.clip_id)),
                    None => input
                        .mask_path
                        .map(Path::to_path_buf)
                        .ok_or_else(|| Error::InvalidArgument(format!("no mask for clip {}", input.clip_id)))?,
                };
                import_mask(path, input.spec.shape(), input.n_sources)
            }
            MaskProvider::Baseline(p) => Ok(baseline_segment(input.spec, p)),
            MaskProvider::Oracle { threshold_db } => {
                let clean = input.clean.ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "oracle provider needs a clean reference for clip {}",
                        input.clip_id
                    ))
                })?;
                oracle_mask(clean, &input.spec.params, *threshold_db)
            }
        }
    }
}

/// Loads a mask PNG and maps it onto a `(dft_len, n_frames)` grid.
pub fn import_mask(path: impl AsRef<Path>, target: (usize, usize), n_sources: u8) -> Result<TfMask> {
    let img = MaskImage::load(path)?;
    mask_image_to_grid(&img, target, n_sources)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Bins that stand out from their frequency row, before any morphology.
/// The grid is row-major in the centered layout.
pub fn threshold_rows(spec: &Spectrogram, k_mad: f64) -> BinaryGrid {
    let spec = spec.natural();
    let (bins, frames) = spec.shape();
    let mut grid = BinaryGrid::new(bins, frames);
    let mut row = vec![0.0; frames];
    let mut scratch = vec![0.0; frames];
    for k in 0..bins {
        for (t, v) in row.iter_mut().enumerate() {
            *v = magnitude_db(spec.get(k, t).norm());
        }
        scratch.copy_from_slice(&row);
        scratch.sort_by(f64::total_cmp);
        let floor = median(&scratch);
        for (s, v) in scratch.iter_mut().zip(&row) {
            *s = (v - floor).abs();
        }
        scratch.sort_by(f64::total_cmp);
        let mad = MAD_SCALE * median(&scratch);
        let threshold = floor + k_mad * mad;
        let r = centered_row(k, bins);
        for (t, &v) in row.iter().enumerate() {
            // NaN threshold (infinite k with zero spread) selects nothing
            if v > threshold {
                grid.set(r, t, true);
            }
        }
    }
    grid
}

/// Classical segmenter: per-row median/MAD threshold, close-then-open with a
/// square element, small-component removal, then symmetrization.
pub fn baseline_segment(spec: &Spectrogram, params: &BaselineParams) -> TfMask {
    let (bins, frames) = spec.shape();
    if frames == 0 {
        return TfMask::zeros(bins, 0, 1);
    }
    let grid = threshold_rows(spec, params.k_mad)
        .close(params.morph_radius)
        .open(params.morph_radius)
        .remove_small_components(params.min_region_px);
    let mut mask = TfMask::zeros(bins, frames, 1);
    for r in 0..bins {
        let k = natural_bin(r, bins);
        for t in 0..frames {
            if grid.get(r, t) {
                mask.set(k, t, 1);
            }
        }
    }
    symmetrize_mask(&mask)
}

/// Marks bins of the clean signal within `threshold_db` of its loudest bin.
pub fn oracle_mask(clean: &AudioClip, params: &StftParams, threshold_db: f64) -> Result<TfMask> {
    let spec = stft(clean, params)?;
    let db: Vec<f64> = spec.data.iter().map(|c| magnitude_db(c.norm())).collect();
    let peak = db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cutoff = peak - threshold_db;
    let labels = db.iter().map(|&v| u8::from(v >= cutoff)).collect();
    let mask = TfMask {
        labels,
        n_bins: params.dft_len,
        n_frames: spec.n_frames,
        n_sources: 1,
    };
    Ok(symmetrize_mask(&mask))
}
