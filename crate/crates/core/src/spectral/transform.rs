use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::{make_window, AudioClip, Layout, Spectrogram, StftParams};
use crate::error::{Error, Result};

const COLA_FLOOR: f64 = 1e-12;
const IMAG_TOLERANCE: f64 = 1e-6;

/// Forward STFT. Frame `t` covers samples `[t * hop, t * hop + window_len)`,
/// is windowed, zero-padded to `dft_len` and transformed. Trailing samples
/// that do not fill a complete frame are not analysed.
pub fn stft(clip: &AudioClip, params: &StftParams) -> Result<Spectrogram> {
    params.validate()?;
    if clip.samples.len() < params.window_len {
        return Err(Error::ClipTooShort {
            len: clip.samples.len(),
            window_len: params.window_len,
        });
    }
    let window = make_window(params)?;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(params.dft_len);
    let mut spec = Spectrogram::zeros(*params, clip.samples.len(), clip.sample_rate);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];

    for t in 0..spec.n_frames {
        let start = t * params.hop;
        let frame = spec.frame_mut(t);
        for (i, (x, w)) in clip.samples[start..start + params.window_len]
            .iter()
            .zip(&window)
            .enumerate()
        {
            frame[i] = Complex64::new(x * w, 0.0);
        }
        fft.process_with_scratch(frame, &mut scratch);
    }
    Ok(spec)
}

/// Weighted overlap-add inverse of [`stft`].
///
/// Each column is inverse transformed, truncated to `window_len`, multiplied
/// by the synthesis window and accumulated at its hop offset; the sum is then
/// divided by the accumulated squared window. Samples past the last frame are
/// zero. The result is truncated or zero-padded to `out_len`.
pub fn istft(spec: &Spectrogram, out_len: usize) -> Result<AudioClip> {
    let params = spec.params;
    params.validate()?;
    let spec = spec.natural();
    let expected = params.dft_len * spec.n_frames;
    if spec.data.len() != expected {
        return Err(Error::ShapeMismatch {
            expected: (params.dft_len, spec.n_frames),
            actual: (params.dft_len, spec.data.len() / params.dft_len.max(1)),
        });
    }
    debug_assert_eq!(spec.layout, Layout::Natural);

    let mut out = vec![0.0; out_len];
    if spec.n_frames == 0 {
        return Ok(AudioClip::new(out, spec.sample_rate));
    }

    let window = make_window(&params)?;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(params.dft_len);
    let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); params.dft_len];

    let covered = (spec.n_frames - 1) * params.hop + params.window_len;
    let mut acc = vec![0.0; covered];
    let mut denom = vec![0.0; covered];
    let scale = 1.0 / params.dft_len as f64;
    let (mut real_energy, mut imag_energy) = (0.0, 0.0);

    for t in 0..spec.n_frames {
        buf.copy_from_slice(spec.frame(t));
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let start = t * params.hop;
        for (i, (v, w)) in buf.iter().zip(&window).enumerate() {
            let re = v.re * scale;
            let im = v.im * scale;
            real_energy += re * re;
            imag_energy += im * im;
            acc[start + i] += re * w;
            denom[start + i] += w * w;
        }
    }

    let (norm, residue) = (real_energy.sqrt(), imag_energy.sqrt());
    if residue > IMAG_TOLERANCE * norm.max(f64::EPSILON) {
        return Err(Error::NonrealReconstruction { residue, norm });
    }

    let interior = params.window_len..covered.saturating_sub(params.window_len);
    for (n, sample) in out.iter_mut().enumerate().take(covered) {
        if denom[n] < COLA_FLOOR {
            if interior.contains(&n) {
                return Err(Error::ColaViolation(n));
            }
            continue;
        }
        *sample = acc[n] / denom[n];
    }
    Ok(AudioClip::new(out, spec.sample_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, 32_000)
    }

    #[test]
    fn too_short_clip_is_rejected() {
        let err = stft(&clip(vec![0.0; 127]), &StftParams::default()).unwrap_err();
        assert_eq!(err.code(), "clip_too_short");
    }

    #[test]
    fn zeros_in_zeros_out() {
        let p = StftParams::default();
        let s = stft(&clip(vec![0.0; 32_000]), &p).unwrap();
        assert!(s.data.iter().all(|c| c.norm() == 0.0));
        let y = istft(&s, 32_000).unwrap();
        assert!(y.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frame_count_matches_formula() {
        let p = StftParams::default();
        let s = stft(&clip(vec![0.0; 320_000]), &p).unwrap();
        assert_eq!(s.n_frames, 4999);
        assert_eq!(s.data.len(), 1024 * 4999);
    }

    #[test]
    fn impulse_column_is_flat() {
        let p = StftParams::default();
        let mut x = vec![0.0; 1024];
        x[0] = 1.0;
        let s = stft(&clip(x), &p).unwrap();
        for k in 0..1024 {
            let c = s.get(k, 0);
            assert!((c.re - 0.08).abs() < 1e-12 && c.im.abs() < 1e-12);
        }
    }

    #[test]
    fn tone_round_trip_keeps_frequency() {
        let p = StftParams::default();
        let x: Vec<f64> = (0..32_000)
            .map(|n| (2.0 * PI * 1000.0 * n as f64 / 32_000.0).sin())
            .collect();
        let y = istft(&stft(&clip(x.clone()), &p).unwrap(), x.len()).unwrap();
        let err: f64 = x[128..x.len() - 128]
            .iter()
            .zip(&y.samples[128..x.len() - 128])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn output_is_padded_to_requested_length() {
        let p = StftParams::new(4, 2, 8).unwrap();
        let x = clip(vec![1.0; 11]);
        let s = stft(&x, &p).unwrap();
        assert_eq!(s.n_frames, 4);
        let y = istft(&s, 11).unwrap();
        assert_eq!(y.samples.len(), 11);
        // sample 10 lies past the last frame
        assert_eq!(y.samples[10], 0.0);
        for v in &y.samples[..10] {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(istft(&s, 6).unwrap().samples.len(), 6);
    }

    #[test]
    fn asymmetric_spectrum_is_nonreal() {
        let p = StftParams::new(8, 4, 8).unwrap();
        let mut s = Spectrogram::zeros(p, 16, 8000);
        s.frame_mut(1)[1] = Complex64::new(1.0, 0.0);
        let err = istft(&s, 16).unwrap_err();
        assert_eq!(err.code(), "nonreal_reconstruction");
    }

    #[test]
    fn centered_input_is_accepted() {
        let p = StftParams::default();
        let x: Vec<f64> = (0..2048).map(|n| ((n * 7919) % 101) as f64 / 101.0 - 0.5).collect();
        let s = stft(&clip(x.clone()), &p).unwrap();
        let a = istft(&s, x.len()).unwrap();
        let b = istft(&s.to_layout(Layout::Centered), x.len()).unwrap();
        assert_eq!(a, b);
    }
}
