//! RIFF/WAVE reading and writing.
//!
//! Only 16-bit PCM and 32-bit IEEE float are accepted. Stereo files are split
//! into a left and a right clip, each of which is processed independently.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::spectral::{AudioClip, Channel};

const PCM16_SCALE: f64 = 32768.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleFormat {
    Pcm16,
    #[default]
    Float32,
}

impl std::str::FromStr for SampleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcm16" => Ok(SampleFormat::Pcm16),
            "float32" | "f32" => Ok(SampleFormat::Float32),
            other => Err(Error::InvalidArgument(format!(
                "unknown sample format {other:?} (expected pcm16 or float32)"
            ))),
        }
    }
}

/// Header-level description of a WAV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioFile {
    pub path: PathBuf,
    pub channels: u16,
    pub sample_rate: u32,
    pub sample_format: SampleFormat,
    pub n_samples: usize,
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::Unsupported | hound::Error::InvalidSampleFormat => Error::UnsupportedFormat(err.to_string()),
        hound::Error::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::CorruptWav("unexpected end of file".into())
        }
        other => Error::CorruptWav(other.to_string()),
    }
}

fn open(path: &Path) -> Result<hound::WavReader<std::io::BufReader<std::fs::File>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    hound::WavReader::new(std::io::BufReader::new(file)).map_err(map_hound)
}

fn sample_format(spec: &hound::WavSpec) -> Result<SampleFormat> {
    match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => Ok(SampleFormat::Pcm16),
        (hound::SampleFormat::Float, 32) => Ok(SampleFormat::Float32),
        (fmt, bits) => Err(Error::UnsupportedFormat(format!("{bits}-bit {fmt:?}"))),
    }
}

fn channel_tags(channels: u16) -> Result<&'static [Channel]> {
    match channels {
        1 => Ok(&[Channel::Mono]),
        2 => Ok(&[Channel::Left, Channel::Right]),
        n => Err(Error::UnsupportedFormat(format!("{n} channels"))),
    }
}

/// Reads only the header.
pub fn probe_wav(path: impl AsRef<Path>) -> Result<AudioFile> {
    let path = path.as_ref();
    let reader = open(path)?;
    let spec = reader.spec();
    let format = sample_format(&spec)?;
    channel_tags(spec.channels)?;
    let n_samples = reader.duration() as usize;
    if n_samples == 0 {
        return Err(Error::CorruptWav("no samples".into()));
    }
    Ok(AudioFile {
        path: path.to_path_buf(),
        channels: spec.channels,
        sample_rate: spec.sample_rate,
        sample_format: format,
        n_samples,
    })
}

/// One clip per channel, `[left, right]` for stereo files.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Vec<AudioClip>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let spec = reader.spec();
    let format = sample_format(&spec)?;
    let tags = channel_tags(spec.channels)?;
    let interleaved: Vec<f64> = match format {
        SampleFormat::Pcm16 => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
        SampleFormat::Float32 => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>()
            .map_err(map_hound)?,
    };
    let channels = tags.len();
    if !interleaved.len().is_multiple_of(channels) {
        return Err(Error::CorruptWav("partial sample frame".into()));
    }
    Ok(tags
        .iter()
        .enumerate()
        .map(|(c, &tag)| {
            let samples = interleaved.iter().skip(c).step_by(channels).copied().collect();
            AudioClip::new(samples, spec.sample_rate).with_channel(tag)
        })
        .collect())
}

pub(crate) fn quantize_pcm16(sample: f64) -> i16 {
    let clamped = sample.clamp(-1.0, 1.0 - 1.0 / PCM16_SCALE);
    // f64::round rounds half away from zero
    (clamped * PCM16_SCALE).round() as i16
}

/// Encodes one or two equally long clips as an interleaved WAV image.
pub fn encode_wav(clips: &[&AudioClip], format: SampleFormat) -> Result<Vec<u8>> {
    let first = clips
        .first()
        .ok_or_else(|| Error::InvalidArgument("no channels to write".into()))?;
    if clips.len() > 2 {
        return Err(Error::UnsupportedFormat(format!("{} channels", clips.len())));
    }
    if clips
        .iter()
        .any(|c| c.len() != first.len() || c.sample_rate != first.sample_rate)
    {
        return Err(Error::ClipMismatch("channels differ in length or rate".into()));
    }
    let spec = hound::WavSpec {
        channels: clips.len() as u16,
        sample_rate: first.sample_rate,
        bits_per_sample: match format {
            SampleFormat::Pcm16 => 16,
            SampleFormat::Float32 => 32,
        },
        sample_format: match format {
            SampleFormat::Pcm16 => hound::SampleFormat::Int,
            SampleFormat::Float32 => hound::SampleFormat::Float,
        },
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec).map_err(map_hound)?;
        for i in 0..first.len() {
            for clip in clips {
                let s = clip.samples[i];
                match format {
                    SampleFormat::Pcm16 => writer.write_sample(quantize_pcm16(s)),
                    SampleFormat::Float32 => writer.write_sample(s as f32),
                }
                .map_err(map_hound)?;
            }
        }
        writer.finalize().map_err(map_hound)?;
    }
    Ok(cursor.into_inner())
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>, format: SampleFormat) -> Result<()> {
    write_wav_channels(&[clip], path, format)
}

pub fn write_wav_channels(clips: &[&AudioClip], path: impl AsRef<Path>, format: SampleFormat) -> Result<()> {
    let bytes = encode_wav(clips, format)?;
    write_atomic(path.as_ref(), &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pcm16_quantization() {
        assert_eq!(quantize_pcm16(0.5), 16384);
        assert_eq!(quantize_pcm16(2.0), i16::MAX);
        assert_eq!(quantize_pcm16(-2.0), i16::MIN);
        assert_eq!(quantize_pcm16(1.5 / 32768.0), 2);
        assert_eq!(quantize_pcm16(-1.5 / 32768.0), -2);
    }

    #[test]
    fn float32_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let samples: Vec<f64> = (0..1000).map(|i| ((i as f32) * 0.001 - 0.5).sin() as f64).collect();
        let clip = AudioClip::new(samples, 44_100);
        write_wav(&clip, &path, SampleFormat::Float32).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].channel, Channel::Mono);
        assert_eq!(back[0].sample_rate, 44_100);
        for (a, b) in clip.samples.iter().zip(&back[0].samples) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn pcm16_round_trip_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let samples: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.37).sin() * 0.99).collect();
        let clip = AudioClip::new(samples, 8000);
        write_wav(&clip, &path, SampleFormat::Pcm16).unwrap();
        let back = &read_wav(&path).unwrap()[0];
        for (a, b) in clip.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
        let info = probe_wav(&path).unwrap();
        assert_eq!(info.sample_format, SampleFormat::Pcm16);
        assert_eq!(info.n_samples, 2000);
    }

    #[test]
    fn stereo_channels_keep_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let left = AudioClip::new(vec![0.25, 0.5, 0.75], 16_000);
        let right = AudioClip::new(vec![-0.25, -0.5, -0.75], 16_000);
        write_wav_channels(&[&left, &right], &path, SampleFormat::Pcm16).unwrap();
        let clips = read_wav(&path).unwrap();
        assert_eq!(clips.len(), 2);
        assert_eq!(clips[0].channel, Channel::Left);
        assert_eq!(clips[1].channel, Channel::Right);
        assert_eq!(clips[0].samples, vec![0.25, 0.5, 0.75]);
        assert_eq!(clips[1].samples, vec![-0.25, -0.5, -0.75]);
    }

    #[test]
    fn sixteen_bit_value_scales_to_half() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(16384i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert_eq!(read_wav(&path).unwrap()[0].samples, vec![0.5, 0.0]);
    }

    #[test]
    fn unsupported_and_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u8.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(5i32).unwrap();
        w.finalize().unwrap();
        assert_eq!(read_wav(&path).unwrap_err().code(), "unsupported_format");

        let good = dir.path().join("good.wav");
        write_wav(&AudioClip::new(vec![0.1; 100], 8000), &good, SampleFormat::Float32).unwrap();
        let bytes = std::fs::read(&good).unwrap();
        let cut = dir.path().join("cut.wav");
        std::fs::write(&cut, &bytes[..bytes.len() - 37]).unwrap();
        assert_eq!(read_wav(&cut).unwrap_err().code(), "corrupt_wav");
        let header_only = dir.path().join("hdr.wav");
        std::fs::write(&header_only, &bytes[..20]).unwrap();
        assert_eq!(read_wav(&header_only).unwrap_err().code(), "corrupt_wav");

        assert_eq!(read_wav(dir.path().join("missing.wav")).unwrap_err().code(), "io_error");
    }
}
