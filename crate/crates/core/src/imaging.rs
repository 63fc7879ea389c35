//! Audio images and mask images.
//!
//! Both are 8-bit grayscale, `dft_len` rows by `n_frames` columns, in the
//! centered layout (DC on row `dft_len / 2`). Audio images carry log-magnitude
//! gray levels; mask images carry raw label integers.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::spectral::{centered_row, natural_bin, symmetrize_mask, Layout, Spectrogram, TfMask};

/// Dynamic range kept below the per-image peak.
pub const DB_RANGE: f64 = 80.0;
const MAG_EPS: f64 = 1e-10;

pub(crate) fn magnitude_db(m: f64) -> f64 {
    20.0 * (m + MAG_EPS).log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioImage {
    /// Row-major, `rows * cols`.
    pub pixels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
    pub layout: Layout,
    pub db_floor: f64,
    pub max_db: f64,
}

impl AudioImage {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.cols + col]
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        encode_gray_png(&self.pixels, self.rows, self.cols)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_png()?)
    }
}

/// Raw-label mask image in the centered layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskImage {
    /// Row-major, `rows * cols`.
    pub pixels: Vec<u8>,
    pub rows: usize,
    pub cols: usize,
}

impl MaskImage {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.cols + col]
    }

    pub fn max_label(&self) -> u8 {
        self.pixels.iter().copied().max().unwrap_or(0)
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        encode_gray_png(&self.pixels, self.rows, self.cols)
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self> {
        let (pixels, rows, cols) = decode_gray_png(bytes)?;
        Ok(Self { pixels, rows, cols })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_png(&bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_png()?)
    }
}

fn encode_gray_png(pixels: &[u8], rows: usize, cols: usize) -> Result<Vec<u8>> {
    let img = GrayImage::from_raw(cols as u32, rows as u32, pixels.to_vec())
        .ok_or_else(|| Error::Image("pixel buffer does not match dimensions".into()))?;
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Image(e.to_string()))?;
    Ok(out.into_inner())
}

/// Decodes an 8-bit PNG without altering pixel values. Color images are
/// accepted only when every pixel is gray (R = G = B).
fn decode_gray_png(bytes: &[u8]) -> Result<(Vec<u8>, usize, usize)> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| Error::Image(e.to_string()))?;
    let (cols, rows) = (img.width() as usize, img.height() as usize);
    let pixels = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw(),
        DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| p.0[0]).collect(),
        DynamicImage::ImageRgb8(c) => gray_channel(c.pixels().map(|p| [p.0[0], p.0[1], p.0[2]]))?,
        DynamicImage::ImageRgba8(c) => gray_channel(c.pixels().map(|p| [p.0[0], p.0[1], p.0[2]]))?,
        other => return Err(Error::Image(format!("unsupported PNG color type {:?}", other.color()))),
    };
    if rows == 0 || cols == 0 {
        return Err(Error::Image("empty image".into()));
    }
    Ok((pixels, rows, cols))
}

fn gray_channel(pixels: impl Iterator<Item = [u8; 3]>) -> Result<Vec<u8>> {
    pixels
        .map(|[r, g, b]| {
            if r == g && g == b {
                Ok(r)
            } else {
                Err(Error::Image("color mask pixels must be gray".into()))
            }
        })
        .collect()
}

/// Log-magnitude image of a spectrogram, normalized to its own peak.
pub fn render_image(spec: &Spectrogram) -> AudioImage {
    let spec = spec.natural();
    let (rows, cols) = spec.shape();
    let mut db = vec![0.0; rows * cols];
    let mut hi = f64::NEG_INFINITY;
    for t in 0..cols {
        for (k, c) in spec.frame(t).iter().enumerate() {
            let v = magnitude_db(c.norm());
            hi = hi.max(v);
            db[centered_row(k, rows) * cols + t] = v;
        }
    }
    let lo = (hi - DB_RANGE).max(magnitude_db(0.0));
    let span = hi - lo;
    let pixels = if span > 0.0 {
        db.iter()
            .map(|&v| (255.0 * (v.clamp(lo, hi) - lo) / span).round() as u8)
            .collect()
    } else {
        vec![0; rows * cols]
    };
    AudioImage {
        pixels,
        rows,
        cols,
        layout: Layout::Centered,
        db_floor: DB_RANGE,
        max_db: hi,
    }
}

fn nearest(dst: usize, dst_len: usize, src_len: usize) -> usize {
    ((2 * dst + 1) * src_len / (2 * dst_len)).min(src_len - 1)
}

/// Maps a (possibly resized) centered mask image onto a natural-layout grid
/// of `(dft_len, n_frames)`, using nearest-neighbor resampling, and
/// symmetrizes the result.
pub fn mask_image_to_grid(img: &MaskImage, target: (usize, usize), n_sources: u8) -> Result<TfMask> {
    if img.rows == 0 || img.cols == 0 || img.pixels.len() != img.rows * img.cols {
        return Err(Error::Image("empty or malformed mask image".into()));
    }
    let max = img.max_label();
    if max > n_sources {
        return Err(Error::LabelOutOfRange {
            label: max,
            max: n_sources,
        });
    }
    let (bins, frames) = target;
    let col_map: Vec<usize> = (0..frames).map(|c| nearest(c, frames, img.cols)).collect();
    let mut mask = TfMask::zeros(bins, frames, n_sources);
    for row in 0..bins {
        let src_row = nearest(row, bins, img.rows);
        let bin = natural_bin(row, bins);
        for (t, &src_col) in col_map.iter().enumerate() {
            mask.set(bin, t, img.get(src_row, src_col));
        }
    }
    Ok(symmetrize_mask(&mask))
}

pub fn grid_to_mask_image(mask: &TfMask) -> MaskImage {
    let (rows, cols) = mask.shape();
    let mut pixels = vec![0; rows * cols];
    for t in 0..cols {
        for k in 0..rows {
            pixels[centered_row(k, rows) * cols + t] = mask.get(k, t);
        }
    }
    MaskImage { pixels, rows, cols }
}

const LABEL_COLORS: [[u8; 3]; 6] = [
    [255, 64, 64],
    [64, 160, 255],
    [64, 220, 96],
    [255, 200, 0],
    [200, 80, 255],
    [0, 220, 220],
];

/// Display-only color overlay of a mask on its audio image.
pub fn overlay_png(image: &AudioImage, mask: &MaskImage, opacity: f64) -> Result<Vec<u8>> {
    if (image.rows, image.cols) != (mask.rows, mask.cols) {
        return Err(Error::ShapeMismatch {
            expected: (image.rows, image.cols),
            actual: (mask.rows, mask.cols),
        });
    }
    let alpha = opacity.clamp(0.0, 1.0);
    let mut rgb = RgbImage::new(image.cols as u32, image.rows as u32);
    for (i, px) in rgb.pixels_mut().enumerate() {
        let g = image.pixels[i] as f64;
        let label = mask.pixels[i];
        px.0 = if label == 0 {
            [image.pixels[i]; 3]
        } else {
            let color = LABEL_COLORS[(label as usize - 1) % LABEL_COLORS.len()];
            color.map(|c| ((1.0 - alpha) * g + alpha * c as f64).round() as u8)
        };
    }
    let mut out = Cursor::new(Vec::new());
    rgb.write_to(&mut out, ImageFormat::Png)
        .map_err(|e| Error::Image(e.to_string()))?;
    Ok(out.into_inner())
}
