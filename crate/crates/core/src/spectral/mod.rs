//! Windowed STFT analysis, time-frequency masking and weighted overlap-add
//! synthesis.
//!
//! Spectrograms are two-sided (`dft_len` rows) so that their magnitude image
//! is the symmetric picture a labeler paints on. Internally everything is kept
//! in the natural layout (bin 0 = DC); the centered layout only exists for
//! rendering and for mask images.

mod mask;
mod pipeline;
mod transform;
mod window;

pub use mask::{apply_mask, symmetrize_mask, TfMask};
pub use pipeline::{denoise, enhance, estimate_noise, separate};
pub use transform::{istft, stft};
pub use window::make_window;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// DFT-even Hamming, `0.54 - 0.46 cos(2 pi n / N)`.
    #[default]
    HammingPeriodic,
}

/// Analysis parameters shared by [`stft`] and [`istft`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftParams {
    pub window_len: usize,
    pub hop: usize,
    pub dft_len: usize,
    pub window_kind: WindowKind,
}

impl Default for StftParams {
    /// 128-point window, 64-sample hop, 1024-point DFT.
    fn default() -> Self {
        Self {
            window_len: 128,
            hop: 64,
            dft_len: 1024,
            window_kind: WindowKind::HammingPeriodic,
        }
    }
}

impl StftParams {
    pub fn new(window_len: usize, hop: usize, dft_len: usize) -> Result<Self> {
        let params = Self {
            window_len,
            hop,
            dft_len,
            window_kind: WindowKind::HammingPeriodic,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 {
            return Err(Error::InvalidParams(format!(
                "window_len must be at least 2 (got {})",
                self.window_len
            )));
        }
        if self.hop == 0 || self.hop > self.window_len || self.window_len > self.dft_len {
            return Err(Error::InvalidParams(format!(
                "need 0 < hop <= window_len <= dft_len (got hop={}, window_len={}, dft_len={})",
                self.hop, self.window_len, self.dft_len
            )));
        }
        Ok(())
    }

    /// Number of complete frames that fit in `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.window_len {
            0
        } else {
            (len - self.window_len) / self.hop + 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Left,
    Right,
    #[default]
    Mono,
}

impl Channel {
    /// Suffix appended to a file stem to form a clip id.
    pub fn suffix(self) -> &'static str {
        match self {
            Channel::Left => "_L",
            Channel::Right => "_R",
            Channel::Mono => "",
        }
    }
}

/// A single channel of audio at its native sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub channel: Channel,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
            channel: Channel::Mono,
        }
    }

    pub fn with_channel(mut self, channel: Channel) -> Self {
        self.channel = channel;
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        if self.sample_rate == 0 {
            0.0
        } else {
            self.samples.len() as f64 / self.sample_rate as f64
        }
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Row 0 holds DC.
    Natural,
    /// DC sits at row `dft_len / 2`.
    Centered,
}

/// Centered-layout row that displays natural bin `bin`.
pub fn centered_row(bin: usize, dft_len: usize) -> usize {
    (bin + dft_len / 2) % dft_len
}

/// Natural bin displayed at centered-layout row `row`.
pub fn natural_bin(row: usize, dft_len: usize) -> usize {
    (row + dft_len - dft_len / 2) % dft_len
}

/// Bin holding the conjugate partner of `bin` for a real signal.
pub fn mirror_bin(bin: usize, dft_len: usize) -> usize {
    (dft_len - bin) % dft_len
}

/// Complex STFT coefficients, `dft_len` bins by `n_frames` frames.
///
/// Storage is frame-major: the column for frame `t` is the contiguous slice
/// `data[t * dft_len..(t + 1) * dft_len]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub data: Vec<Complex64>,
    pub params: StftParams,
    pub original_len: usize,
    pub sample_rate: u32,
    pub n_frames: usize,
    pub layout: Layout,
}

impl Spectrogram {
    pub fn zeros(params: StftParams, original_len: usize, sample_rate: u32) -> Self {
        let n_frames = params.n_frames(original_len);
        Self {
            data: vec![Complex64::new(0.0, 0.0); params.dft_len * n_frames],
            params,
            original_len,
            sample_rate,
            n_frames,
            layout: Layout::Natural,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.params.dft_len
    }

    /// `(bins, frames)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.params.dft_len, self.n_frames)
    }

    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[frame * self.params.dft_len + bin]
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        let n = self.params.dft_len;
        &self.data[frame * n..(frame + 1) * n]
    }

    pub fn frame_mut(&mut self, frame: usize) -> &mut [Complex64] {
        let n = self.params.dft_len;
        &mut self.data[frame * n..(frame + 1) * n]
    }

    /// Reorders rows into `layout`. A no-op when already there.
    pub fn to_layout(&self, layout: Layout) -> Spectrogram {
        if layout == self.layout {
            return self.clone();
        }
        let n = self.params.dft_len;
        let mut out = self.clone();
        out.layout = layout;
        for t in 0..self.n_frames {
            let src = self.frame(t);
            let dst = out.frame_mut(t);
            for (k, v) in src.iter().enumerate() {
                // row index in the destination layout
                let row = match layout {
                    Layout::Centered => centered_row(k, n),
                    Layout::Natural => natural_bin(k, n),
                };
                dst[row] = *v;
            }
        }
        out
    }

    pub(crate) fn natural(&self) -> std::borrow::Cow<'_, Spectrogram> {
        match self.layout {
            Layout::Natural => std::borrow::Cow::Borrowed(self),
            Layout::Centered => std::borrow::Cow::Owned(self.to_layout(Layout::Natural)),
        }
    }

    /// Element-wise sum of two spectrograms of identical shape.
    pub fn add(&self, other: &Spectrogram) -> Result<Spectrogram> {
        if self.shape() != other.shape() || self.layout != other.layout {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_are_valid() {
        let p = StftParams::default();
        assert_eq!((p.window_len, p.hop, p.dft_len), (128, 64, 1024));
        p.validate().unwrap();
    }

    #[test]
    fn rejects_bad_params() {
        assert!(StftParams::new(1, 1, 4).is_err());
        assert!(StftParams::new(128, 0, 1024).is_err());
        assert!(StftParams::new(128, 129, 1024).is_err());
        assert!(StftParams::new(128, 64, 64).is_err());
    }

    #[test]
    fn frame_count_formula() {
        let p = StftParams::default();
        assert_eq!(p.n_frames(320_000), 4999);
        assert_eq!(p.n_frames(127), 0);
        assert_eq!(p.n_frames(128), 1);
        assert_eq!(p.n_frames(191), 1);
        assert_eq!(p.n_frames(192), 2);
    }

    #[test]
    fn layout_maps_are_inverse() {
        for n in [4usize, 7, 1024] {
            for k in 0..n {
                assert_eq!(natural_bin(centered_row(k, n), n), k);
            }
        }
        assert_eq!(centered_row(0, 1024), 512);
        assert_eq!(mirror_bin(0, 1024), 0);
        assert_eq!(mirror_bin(1, 1024), 1023);
        assert_eq!(mirror_bin(512, 1024), 512);
    }

    #[test]
    fn centered_round_trip() {
        let p = StftParams::new(4, 2, 8).unwrap();
        let mut s = Spectrogram::zeros(p, 10, 8000);
        for (i, v) in s.data.iter_mut().enumerate() {
            *v = Complex64::new(i as f64, -(i as f64));
        }
        let c = s.to_layout(Layout::Centered);
        assert_eq!(c.get(4, 0), s.get(0, 0));
        assert_eq!(c.to_layout(Layout::Natural), s);
    }
}
