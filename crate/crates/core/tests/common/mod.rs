#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

use specmask::audio_io::{write_wav, SampleFormat};
use specmask::dataset::Split;
use specmask::imaging::grid_to_mask_image;
use specmask::service::{serve, LabelService, ServiceConfig};
use specmask::spectral::{AudioClip, TfMask};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

/// Box-Muller standard normal samples.
pub fn gaussian(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let u1: f64 = r.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = r.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
        })
        .collect()
}

pub fn tone(n: usize, sr: u32, freq: f64, amp: f64) -> Vec<f64> {
    (0..n)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / sr as f64).sin())
        .collect()
}

/// Linear chirp from `f0` to `f1` Hz over the whole clip.
pub fn chirp(n: usize, sr: u32, f0: f64, f1: f64, amp: f64) -> Vec<f64> {
    let dur = n as f64 / sr as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            amp * (2.0 * PI * (f0 * t + 0.5 * (f1 - f0) / dur * t * t)).sin()
        })
        .collect()
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Scales `noise` so that signal/noise energy is `snr_db`.
pub fn mix_at_snr(signal: &[f64], noise: &[f64], snr_db: f64) -> (Vec<f64>, Vec<f64>) {
    let g = (energy(signal) / energy(noise) / 10f64.powf(snr_db / 10.0)).sqrt();
    let scaled: Vec<f64> = noise.iter().map(|v| v * g).collect();
    let mixed = signal.iter().zip(&scaled).map(|(s, n)| s + n).collect();
    (mixed, scaled)
}

pub fn rel_l2_interior(x: &[f64], y: &[f64], margin: usize) -> f64 {
    let range = margin..x.len() - margin;
    let err: f64 = range.clone().map(|i| (x[i] - y[i]).powi(2)).sum();
    let base: f64 = range.map(|i| x[i].powi(2)).sum();
    (err / base).sqrt()
}

pub fn ncc(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (energy(a).sqrt() * energy(b).sqrt())
}

/// Magnitude of the single-frequency DFT of `x` at `freq` Hz.
pub fn tone_amplitude(x: &[f64], sr: u32, freq: f64) -> f64 {
    let w = 2.0 * PI * freq / sr as f64;
    let (re, im) = x.iter().enumerate().fold((0.0, 0.0), |(re, im), (n, v)| {
        (re + v * (w * n as f64).cos(), im - v * (w * n as f64).sin())
    });
    (re * re + im * im).sqrt() * 2.0 / x.len() as f64
}

/// Direct-summation STFT: frame t holds `sum_n x[t*hop+n] w[n] e^{-2 pi i k n / dft}`.
pub fn direct_stft(x: &[f64], wl: usize, hop: usize, dft: usize) -> Vec<Vec<Complex64>> {
    let win: Vec<f64> = (0..wl)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / wl as f64).cos())
        .collect();
    let frames = (x.len() - wl) / hop + 1;
    (0..frames)
        .map(|t| {
            (0..dft)
                .map(|k| {
                    (0..wl).fold(Complex64::new(0.0, 0.0), |acc, n| {
                        let ang = -2.0 * PI * ((k * n) % dft) as f64 / dft as f64;
                        acc + Complex64::from_polar(x[t * hop + n] * win[n], ang)
                    })
                })
                .collect()
        })
        .collect()
}

pub fn clip(samples: Vec<f64>, sr: u32) -> AudioClip {
    AudioClip::new(samples, sr)
}

pub fn write_clip(path: &Path, samples: Vec<f64>, sr: u32) {
    write_wav(&clip(samples, sr), path, SampleFormat::Float32).unwrap();
}

pub fn write_mask(path: &Path, mask: &TfMask) {
    grid_to_mask_image(mask).save(path).unwrap();
}

/// Creates every split directory with its four sub-folders.
pub fn empty_tree(root: &Path) {
    for split in Split::ALL {
        for sub in ["raw_audios", "denoised_audios", "images", "masks"] {
            std::fs::create_dir_all(root.join(split.dir_name()).join(sub)).unwrap();
        }
    }
}

pub fn split_dir(root: &Path, split: Split, sub: &str) -> PathBuf {
    root.join(split.dir_name()).join(sub)
}

/// Every file under `dir`, recursively, sorted.
pub fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(rd) = std::fs::read_dir(&d) else { continue };
        for e in rd.flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

/// A label service bound to an ephemeral port on its own runtime.
pub struct TestServer {
    pub base: String,
    pub service: Arc<LabelService>,
    _rt: tokio::runtime::Runtime,
}

impl TestServer {
    pub fn start(cfg: ServiceConfig) -> Self {
        let service = Arc::new(LabelService::new(cfg).unwrap());
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
        let addr = listener.local_addr().unwrap();
        rt.spawn(serve(listener, service.clone()));
        Self {
            base: format!("http://{addr}"),
            service,
            _rt: rt,
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}
