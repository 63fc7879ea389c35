//! Audio denoising by segmenting spectrogram images.
//!
//! A clip is turned into a two-sided STFT, rendered as a grayscale image,
//! and paired with a label mask that marks clean-signal bins. Zeroing the
//! unlabelled bins and resynthesising by weighted overlap-add yields the
//! denoised clip; multi-label masks separate sources the same way.
//!
//! ```no_run
//! use specmask::{audio_io, providers, spectral};
//!
//! let clip = audio_io::read_wav("bird.wav")?.remove(0);
//! let params = spectral::StftParams::default();
//! let spec = spectral::stft(&clip, &params)?;
//! let mask = providers::baseline_segment(&spec, &providers::BaselineParams::default());
//! let clean = spectral::denoise(&clip, &mask, &params)?;
//! audio_io::write_wav(&clean, "bird_denoised.wav", audio_io::SampleFormat::Float32)?;
//! # Ok::<(), specmask::Error>(())
//! ```

pub mod audio_io;
pub mod cli;
pub mod dataset;
pub mod error;
mod fsutil;
pub mod imaging;
pub mod metrics;
pub mod morphology;
pub mod providers;
pub mod service;
pub mod spectral;

pub use error::{Error, Result};
