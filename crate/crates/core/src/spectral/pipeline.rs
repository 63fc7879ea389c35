use super::{apply_mask, istft, stft, symmetrize_mask, AudioClip, StftParams, TfMask};
use crate::error::{Error, Result};

fn check_mask_shape(mask: &TfMask, params: &StftParams, len: usize) -> Result<()> {
    let expected = (params.dft_len, params.n_frames(len));
    if mask.shape() != expected {
        return Err(Error::ShapeMismatch {
            expected,
            actual: mask.shape(),
        });
    }
    Ok(())
}

/// Keeps the bins labelled 1 and resynthesises a clip of the input length.
pub fn denoise(clip: &AudioClip, mask: &TfMask, params: &StftParams) -> Result<AudioClip> {
    let spec = stft(clip, params)?;
    check_mask_shape(mask, params, clip.len())?;
    let kept = apply_mask(&spec, &symmetrize_mask(mask), 1)?;
    let mut out = istft(&kept, clip.len())?;
    out.channel = clip.channel;
    Ok(out)
}

/// One resynthesised clip per source label `1..=n_sources`.
pub fn separate(clip: &AudioClip, mask: &TfMask, params: &StftParams) -> Result<Vec<AudioClip>> {
    if mask.n_sources < 2 {
        return Err(Error::UseDenoise(mask.n_sources));
    }
    let spec = stft(clip, params)?;
    check_mask_shape(mask, params, clip.len())?;
    let mask = symmetrize_mask(mask);
    (1..=mask.n_sources)
        .map(|label| {
            let mut out = istft(&apply_mask(&spec, &mask, label)?, clip.len())?;
            out.channel = clip.channel;
            Ok(out)
        })
        .collect()
}

/// Scales every sample by `gain`. No clipping is applied.
pub fn enhance(denoised: &AudioClip, gain: f64) -> Result<AudioClip> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::InvalidGain(gain));
    }
    Ok(AudioClip {
        samples: denoised.samples.iter().map(|s| s * gain).collect(),
        ..denoised.clone()
    })
}

/// Residual left after removing the denoised signal from the original.
pub fn estimate_noise(original: &AudioClip, denoised: &AudioClip) -> Result<AudioClip> {
    if original.len() != denoised.len() {
        return Err(Error::ClipMismatch(format!(
            "lengths {} and {}",
            original.len(),
            denoised.len()
        )));
    }
    if original.sample_rate != denoised.sample_rate {
        return Err(Error::ClipMismatch(format!(
            "sample rates {} and {}",
            original.sample_rate, denoised.sample_rate
        )));
    }
    Ok(AudioClip {
        samples: original
            .samples
            .iter()
            .zip(&denoised.samples)
            .map(|(o, d)| o - d)
            .collect(),
        ..original.clone()
    })
}
