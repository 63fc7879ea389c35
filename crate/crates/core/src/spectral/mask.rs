use rustfft::num_complex::Complex64;

use super::{mirror_bin, Spectrogram};
use crate::error::{Error, Result};

/// Integer label grid aligned with a natural-layout [`Spectrogram`].
///
/// Label 0 marks noise, labels `1..=n_sources` mark sources. Storage is
/// frame-major like the spectrogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TfMask {
    pub labels: Vec<u8>,
    pub n_bins: usize,
    pub n_frames: usize,
    pub n_sources: u8,
}

impl TfMask {
    pub fn filled(n_bins: usize, n_frames: usize, n_sources: u8, label: u8) -> Self {
        Self {
            labels: vec![label; n_bins * n_frames],
            n_bins,
            n_frames,
            n_sources: n_sources.max(1),
        }
    }

    pub fn zeros(n_bins: usize, n_frames: usize, n_sources: u8) -> Self {
        Self::filled(n_bins, n_frames, n_sources, 0)
    }

    pub fn from_fn(n_bins: usize, n_frames: usize, n_sources: u8, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut labels = Vec::with_capacity(n_bins * n_frames);
        for t in 0..n_frames {
            for k in 0..n_bins {
                labels.push(f(k, t));
            }
        }
        Self {
            labels,
            n_bins,
            n_frames,
            n_sources: n_sources.max(1),
        }
    }

    /// Builds a mask from frame-major labels, validating the label range.
    pub fn from_labels(labels: Vec<u8>, n_bins: usize, n_frames: usize, n_sources: u8) -> Result<Self> {
        if labels.len() != n_bins * n_frames {
            return Err(Error::ShapeMismatch {
                expected: (n_bins, n_frames),
                actual: (labels.len(), 1),
            });
        }
        let mask = Self {
            labels,
            n_bins,
            n_frames,
            n_sources: n_sources.max(1),
        };
        mask.check_labels()?;
        Ok(mask)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_bins, self.n_frames)
    }

    pub fn get(&self, bin: usize, frame: usize) -> u8 {
        self.labels[frame * self.n_bins + bin]
    }

    pub fn set(&mut self, bin: usize, frame: usize, label: u8) {
        self.labels[frame * self.n_bins + bin] = label;
    }

    pub fn check_labels(&self) -> Result<()> {
        match self.labels.iter().copied().find(|&l| l > self.n_sources) {
            Some(label) => Err(Error::LabelOutOfRange {
                label,
                max: self.n_sources,
            }),
            None => Ok(()),
        }
    }

    /// First `(bin, frame)` whose label differs from its mirror bin, if any.
    pub fn asymmetry(&self) -> Option<(usize, usize)> {
        let n = self.n_bins;
        for t in 0..self.n_frames {
            let col = &self.labels[t * n..(t + 1) * n];
            for k in 0..n {
                if col[k] != col[mirror_bin(k, n)] {
                    return Some((k, t));
                }
            }
        }
        None
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry().is_none()
    }

    /// Number of bins carrying `label`.
    pub fn count(&self, label: u8) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Binary mask with every non-zero label mapped to 1.
    pub fn union(&self) -> TfMask {
        TfMask {
            labels: self.labels.iter().map(|&l| u8::from(l > 0)).collect(),
            n_bins: self.n_bins,
            n_frames: self.n_frames,
            n_sources: 1,
        }
    }
}

/// Mirrors labels across DC so that bin `k` and bin `dft_len - k` agree.
///
/// Conflicts resolve to the larger label, so a region painted on only one
/// half of the image is never dropped.
pub fn symmetrize_mask(mask: &TfMask) -> TfMask {
    let n = mask.n_bins;
    let mut out = mask.clone();
    for t in 0..mask.n_frames {
        let src = &mask.labels[t * n..(t + 1) * n];
        let dst = &mut out.labels[t * n..(t + 1) * n];
        for k in 0..n {
            dst[k] = src[k].max(src[mirror_bin(k, n)]);
        }
    }
    out
}

/// Keeps the bins labelled `keep_label` and zeroes every other bin.
pub fn apply_mask(spec: &Spectrogram, mask: &TfMask, keep_label: u8) -> Result<Spectrogram> {
    let spec = spec.natural();
    if spec.shape() != mask.shape() {
        return Err(Error::ShapeMismatch {
            expected: spec.shape(),
            actual: mask.shape(),
        });
    }
    if keep_label == 0 || keep_label > mask.n_sources {
        return Err(Error::LabelOutOfRange {
            label: keep_label,
            max: mask.n_sources,
        });
    }
    if let Some((bin, frame)) = mask.asymmetry() {
        return Err(Error::AsymmetricMask { bin, frame });
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut out = spec.into_owned();
    for (v, &label) in out.data.iter_mut().zip(&mask.labels) {
        if label != keep_label {
            *v = zero;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{stft, AudioClip, StftParams};
    use proptest::prelude::*;

    fn small_spec() -> Spectrogram {
        let p = StftParams::new(8, 4, 16).unwrap();
        let x: Vec<f64> = (0..40).map(|n| ((n * 37) % 11) as f64 - 5.0).collect();
        stft(&AudioClip::new(x, 8000), &p).unwrap()
    }

    #[test]
    fn all_ones_is_bitwise_identity() {
        let s = small_spec();
        let m = TfMask::filled(16, s.n_frames, 1, 1);
        let out = apply_mask(&s, &m, 1).unwrap();
        for (a, b) in out.data.iter().zip(&s.data) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn all_zeros_clears_everything() {
        let s = small_spec();
        let out = apply_mask(&s, &TfMask::zeros(16, s.n_frames, 1), 1).unwrap();
        assert!(out.data.iter().all(|c| c.re == 0.0 && c.im == 0.0));
    }

    #[test]
    fn rejects_shape_mismatch_and_asymmetry() {
        let s = small_spec();
        let err = apply_mask(&s, &TfMask::zeros(16, s.n_frames + 1, 1), 1).unwrap_err();
        assert_eq!(err.code(), "shape_mismatch");

        let mut m = TfMask::zeros(16, s.n_frames, 1);
        m.set(3, 0, 1);
        let err = apply_mask(&s, &m, 1).unwrap_err();
        assert_eq!(err.code(), "asymmetric_mask");

        let err = apply_mask(&s, &symmetrize_mask(&m), 2).unwrap_err();
        assert_eq!(err.code(), "label_out_of_range");
    }

    #[test]
    fn symmetrize_mirrors_and_takes_max() {
        let mut m = TfMask::zeros(8, 2, 2);
        m.set(1, 0, 1);
        m.set(2, 1, 1);
        m.set(6, 1, 2);
        let s = symmetrize_mask(&m);
        assert_eq!(s.get(7, 0), 1);
        assert_eq!(s.get(1, 0), 1);
        assert_eq!(s.get(2, 1), 2);
        assert_eq!(s.get(6, 1), 2);
        assert!(s.is_symmetric());
        assert_eq!(symmetrize_mask(&s), s);
    }

    #[test]
    fn from_labels_checks_range() {
        assert!(TfMask::from_labels(vec![0, 1, 3, 0], 2, 2, 1).is_err());
        assert!(TfMask::from_labels(vec![0, 1, 1, 0], 2, 2, 1).is_ok());
        assert!(TfMask::from_labels(vec![0, 1, 1], 2, 2, 1).is_err());
    }

    fn arb_mask() -> impl Strategy<Value = TfMask> {
        (1usize..12, 1usize..6).prop_flat_map(|(bins, frames)| {
            prop::collection::vec(0u8..=3, bins * frames)
                .prop_map(move |labels| TfMask::from_labels(labels, bins, frames, 3).unwrap())
        })
    }

    proptest! {
        #[test]
        fn symmetrize_is_idempotent(m in arb_mask()) {
            let once = symmetrize_mask(&m);
            prop_assert!(once.is_symmetric());
            prop_assert_eq!(symmetrize_mask(&once), once);
        }

        #[test]
        fn masking_is_linear(
            a in prop::collection::vec(-1.0f64..1.0, 64),
            b in prop::collection::vec(-1.0f64..1.0, 64),
            seed in any::<u64>(),
        ) {
            let p = StftParams::new(8, 4, 16).unwrap();
            let sa = stft(&AudioClip::new(a, 8000), &p).unwrap();
            let sb = stft(&AudioClip::new(b, 8000), &p).unwrap();
            let raw = TfMask::from_fn(16, sa.n_frames, 1, |k, t| {
                ((seed >> ((k * 7 + t * 3) % 64)) & 1) as u8
            });
            let m = symmetrize_mask(&raw);
            let lhs = apply_mask(&sa.add(&sb).unwrap(), &m, 1).unwrap();
            let rhs = apply_mask(&sa, &m, 1).unwrap().add(&apply_mask(&sb, &m, 1).unwrap()).unwrap();
            // zeroing commutes with addition exactly
            prop_assert_eq!(lhs.data, rhs.data);
        }
    }
}
