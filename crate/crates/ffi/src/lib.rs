//! C ABI over the `specmask` engine.
//!
//! Clips and masks cross the boundary as opaque heap handles that the caller
//! releases with the matching `_free` function. Every fallible call returns an
//! [`SmStatus`]; on failure [`sm_last_error_message`] describes the error on
//! the calling thread. Panics are caught and reported as `SM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use specmask::audio_io::{probe_wav, read_wav, write_wav, SampleFormat};
use specmask::metrics::{mask_scores, sdr};
use specmask::providers::import_mask;
use specmask::spectral::{denoise, enhance, estimate_noise, AudioClip, StftParams, TfMask};
use specmask::Error;

/// Opaque mono audio clip.
pub struct SmClip(AudioClip);

/// Opaque time-frequency label grid.
pub struct SmMask(TfMask);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ClipTooShort = 3,
    ShapeMismatch = 4,
    AsymmetricMask = 5,
    LabelOutOfRange = 6,
    ReconstructionFailed = 7,
    UndefinedSdr = 8,
    UnsupportedFormat = 9,
    CorruptWav = 10,
    Io = 11,
    Image = 12,
    Panic = 13,
    Other = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmStftParams {
    pub window_len: usize,
    pub hop: usize,
    pub dft_len: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmMaskScores {
    pub f1: f64,
    pub iou: f64,
    pub dice: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmSampleFormat {
    Pcm16 = 0,
    Float32 = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(SmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.code() {
            "clip_too_short" => SmStatus::ClipTooShort,
            "shape_mismatch" | "clip_mismatch" => SmStatus::ShapeMismatch,
            "asymmetric_mask" => SmStatus::AsymmetricMask,
            "label_out_of_range" | "non_binary_mask" | "use_denoise" => SmStatus::LabelOutOfRange,
            "cola_violation" | "nonreal_reconstruction" => SmStatus::ReconstructionFailed,
            "undefined_sdr" => SmStatus::UndefinedSdr,
            "unsupported_format" => SmStatus::UnsupportedFormat,
            "corrupt_wav" => SmStatus::CorruptWav,
            "io_error" => SmStatus::Io,
            "image_error" => SmStatus::Image,
            "invalid_params" | "invalid_gain" | "invalid_argument" => SmStatus::InvalidArgument,
            _ => SmStatus::Other,
        };
        Failure(status, format!("{}: {e}", e.code()))
    }
}

fn null(what: &str) -> Failure {
    Failure(SmStatus::NullPointer, format!("{what} is null"))
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SmStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside specmask");
            SmStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| Failure(SmStatus::InvalidArgument, "path is not UTF-8".into()))
}

unsafe fn params_arg(p: *const SmStftParams) -> Result<StftParams, Failure> {
    let p = match p.as_ref() {
        Some(p) => *p,
        None => sm_stft_params_default(),
    };
    Ok(StftParams::new(p.window_len, p.hop, p.dft_len)?)
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Window 128, hop 64, DFT 1024.
#[no_mangle]
pub extern "C" fn sm_stft_params_default() -> SmStftParams {
    let p = StftParams::default();
    SmStftParams {
        window_len: p.window_len,
        hop: p.hop,
        dft_len: p.dft_len,
    }
}

/// # Safety
/// `samples` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sm_clip_new(
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    out: *mut *mut SmClip,
) -> SmStatus {
    guard(|| {
        if samples.is_null() && len > 0 {
            return Err(null("samples"));
        }
        let data = if len == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(samples, len).to_vec()
        };
        put(out, SmClip(AudioClip::new(data, sample_rate)))
    })
}

/// # Safety
/// `clip` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sm_clip_free(clip: *mut SmClip) {
    if !clip.is_null() {
        drop(Box::from_raw(clip));
    }
}

/// # Safety
/// `clip` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn sm_clip_len(clip: *const SmClip) -> usize {
    clip.as_ref().map_or(0, |c| c.0.len())
}

/// # Safety
/// `clip` must be a live handle or null (returns 0).
#[no_mangle]
pub unsafe extern "C" fn sm_clip_sample_rate(clip: *const SmClip) -> u32 {
    clip.as_ref().map_or(0, |c| c.0.sample_rate)
}

/// Borrowed pointer to the clip's `sm_clip_len` samples, valid while the
/// handle lives.
///
/// # Safety
/// `clip` must be a live handle or null (returns null).
#[no_mangle]
pub unsafe extern "C" fn sm_clip_samples(clip: *const SmClip) -> *const f64 {
    clip.as_ref().map_or(std::ptr::null(), |c| c.0.samples.as_ptr())
}

/// Number of channels in a WAV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sm_wav_channels(path: *const c_char, out: *mut usize) -> SmStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = probe_wav(path)?.channels as usize;
        Ok(())
    })
}

/// Reads one channel (0 = left or mono, 1 = right) of a WAV file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sm_read_wav(path: *const c_char, channel: usize, out: *mut *mut SmClip) -> SmStatus {
    guard(|| {
        let path = path_arg(path)?;
        let mut clips = read_wav(path)?;
        if channel >= clips.len() {
            return Err(Failure(
                SmStatus::InvalidArgument,
                format!("channel {channel} of {}", clips.len()),
            ));
        }
        put(out, SmClip(clips.swap_remove(channel)))
    })
}

/// `format` is an `SmSampleFormat` value.
///
/// # Safety
/// `clip` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sm_write_wav(clip: *const SmClip, path: *const c_char, format: u32) -> SmStatus {
    guard(|| {
        let clip = deref(clip, "clip")?;
        let fmt = match format {
            f if f == SmSampleFormat::Pcm16 as u32 => SampleFormat::Pcm16,
            f if f == SmSampleFormat::Float32 as u32 => SampleFormat::Float32,
            f => return Err(Failure(SmStatus::InvalidArgument, format!("sample format {f}"))),
        };
        Ok(write_wav(&clip.0, path_arg(path)?, fmt)?)
    })
}

/// Builds a mask from `n_bins * n_frames` labels stored frame by frame.
///
/// # Safety
/// `labels` must point to `n_bins * n_frames` readable bytes; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sm_mask_from_labels(
    labels: *const u8,
    n_bins: usize,
    n_frames: usize,
    n_sources: u8,
    out: *mut *mut SmMask,
) -> SmStatus {
    guard(|| {
        let n = n_bins
            .checked_mul(n_frames)
            .ok_or_else(|| Failure(SmStatus::InvalidArgument, "mask too large".into()))?;
        if labels.is_null() && n > 0 {
            return Err(null("labels"));
        }
        let data = if n == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(labels, n).to_vec()
        };
        put(out, SmMask(TfMask::from_labels(data, n_bins, n_frames, n_sources)?))
    })
}

/// Loads a mask PNG and maps it onto the STFT grid of `clip`.
///
/// # Safety
/// `path` must be a NUL-terminated string, `clip` a live handle, `params`
/// null (defaults) or readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sm_mask_import(
    path: *const c_char,
    clip: *const SmClip,
    params: *const SmStftParams,
    n_sources: u8,
    out: *mut *mut SmMask,
) -> SmStatus {
    guard(|| {
        let clip = deref(clip, "clip")?;
        let params = params_arg(params)?;
        let target = (params.dft_len, params.n_frames(clip.0.len()));
        put(out, SmMask(import_mask(path_arg(path)?, target, n_sources)?))
    })
}

/// # Safety
/// `mask` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sm_mask_free(mask: *mut SmMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// # Safety
/// `clip` and `mask` must be live handles, `params` null (defaults) or
/// readable, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sm_denoise(
    clip: *const SmClip,
    mask: *const SmMask,
    params: *const SmStftParams,
    out: *mut *mut SmClip,
) -> SmStatus {
    guard(|| {
        let clip = deref(clip, "clip")?;
        let mask = deref(mask, "mask")?;
        let params = params_arg(params)?;
        put(out, SmClip(denoise(&clip.0, &mask.0, &params)?))
    })
}

/// # Safety
/// `clip` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sm_enhance(clip: *const SmClip, gain: f64, out: *mut *mut SmClip) -> SmStatus {
    guard(|| {
        let clip = deref(clip, "clip")?;
        put(out, SmClip(enhance(&clip.0, gain)?))
    })
}

/// # Safety
/// `original` and `denoised` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sm_estimate_noise(
    original: *const SmClip,
    denoised: *const SmClip,
    out: *mut *mut SmClip,
) -> SmStatus {
    guard(|| {
        let o = deref(original, "original")?;
        let d = deref(denoised, "denoised")?;
        put(out, SmClip(estimate_noise(&o.0, &d.0)?))
    })
}

/// F1, IoU and Dice of `pred` against `gt` as fractions in [0, 1].
///
/// # Safety
/// `pred` and `gt` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sm_mask_scores(pred: *const SmMask, gt: *const SmMask, out: *mut SmMaskScores) -> SmStatus {
    guard(|| {
        let pred = deref(pred, "pred")?;
        let gt = deref(gt, "gt")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = mask_scores(&pred.0, &gt.0)?;
        *out = SmMaskScores {
            f1: s.f1,
            iou: s.iou,
            dice: s.dice,
        };
        Ok(())
    })
}

/// Signal-to-distortion ratio in dB.
///
/// # Safety
/// `reference` and `estimate` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sm_sdr(reference: *const SmClip, estimate: *const SmClip, out: *mut f64) -> SmStatus {
    guard(|| {
        let r = deref(reference, "reference")?;
        let e = deref(estimate, "estimate")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = sdr(&r.0, &e.0)?;
        Ok(())
    })
}
