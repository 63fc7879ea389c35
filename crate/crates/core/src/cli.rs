//! Command-line driver. Exit codes: 0 ok, 1 runtime error, 2 usage error.
//! Runtime errors are reported on stderr as `error[<code>]: <message>`.

use std::ffi::OsString;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::audio_io::{read_wav, write_wav_channels, SampleFormat};
use crate::dataset::{batch_denoise, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::imaging::{grid_to_mask_image, overlay_png, render_image};
use crate::metrics::evaluate_split;
use crate::providers::{import_mask, BaselineParams, MaskProvider, ProviderInput};
use crate::service::{run_blocking, ServiceConfig};
use crate::spectral::{denoise, enhance, estimate_noise, separate, stft, AudioClip, StftParams};

#[derive(Parser, Debug)]
#[command(name = "specmask", version, about = "Spectral-mask audio denoising")]
struct Cli {
    /// Analysis window length in samples
    #[arg(long, global = true, default_value_t = 128)]
    stft_window: usize,
    /// Hop between frames in samples
    #[arg(long, global = true, default_value_t = 64)]
    stft_hop: usize,
    /// DFT length (frames are zero-padded)
    #[arg(long, global = true, default_value_t = 1024)]
    stft_dft: usize,
    /// Worker threads for batch work; 0 = one per logical core
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Echo effective parameters and log progress on stderr
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render the audio image of a WAV file
    Spectrogram {
        input: PathBuf,
        /// Output PNG; stereo inputs get `_L`/`_R` inserted before the extension
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Denoise one file, or a whole split with --root/--split/--out-dir
    Denoise(DenoiseArgs),
    /// Split a file into one WAV per mask label
    Separate {
        input: PathBuf,
        /// Multi-label mask PNG, one per channel
        #[arg(long, required = true)]
        mask: Vec<PathBuf>,
        /// Number of labels in the mask
        #[arg(long, default_value_t = 2)]
        sources: u8,
        /// Output directory for `<stem>_src<k>.wav`
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Float32)]
        format: Format,
    },
    /// Multiply a (denoised) signal by a gain, without clipping
    Enhance {
        input: PathBuf,
        #[arg(long, default_value_t = 200.0)]
        gain: f64,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Float32)]
        format: Format,
    },
    /// Write ORIGINAL minus DENOISED
    EstimateNoise {
        original: PathBuf,
        denoised: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Float32)]
        format: Format,
    },
    /// Run the baseline segmenter and write its mask
    Segment {
        input: PathBuf,
        /// Output mask PNG; stereo inputs get `_L`/`_R` inserted before the extension
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        baseline: BaselineArgs,
        /// Also write a color overlay of the mask on the audio image
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        opacity: f64,
    },
    /// Score a provider on a dataset split
    Eval {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        split: Split,
        #[command(flatten)]
        provider: ProviderArgs,
        /// Also write per-clip and mean records as JSON lines
        #[arg(long)]
        json: Option<PathBuf>,
        /// Ignore the cached manifest
        #[arg(long)]
        rescan: bool,
    },
    /// Index a dataset tree and cache its manifest
    Scan {
        #[arg(long)]
        root: PathBuf,
        #[arg(long)]
        rescan: bool,
    },
    /// Run the labeling HTTP service
    Serve {
        #[arg(long)]
        workspace: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Number of mask labels
        #[arg(long, default_value_t = 1)]
        sources: u8,
    },
}

#[derive(Args, Debug)]
struct DenoiseArgs {
    input: Option<PathBuf>,
    /// Mask PNG; give one per channel, or one shared by all channels
    #[arg(long)]
    mask: Vec<PathBuf>,
    /// Clean reference WAV for the oracle provider
    #[arg(long)]
    clean: Option<PathBuf>,
    #[command(flatten)]
    provider: ProviderArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Float32)]
    format: Format,
    /// Dataset root for batch mode
    #[arg(long, requires_all = ["split", "out_dir"], conflicts_with = "input")]
    root: Option<PathBuf>,
    #[arg(long)]
    split: Option<Split>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProviderArgs {
    #[arg(long, value_enum)]
    provider: Option<ProviderKind>,
    /// Directory of `<id>_mask.png` files for the import provider
    #[arg(long)]
    masks: Option<PathBuf>,
    /// Oracle keeps bins within this many dB of the clean peak
    #[arg(long, default_value_t = 40.0)]
    threshold_db: f64,
    #[command(flatten)]
    baseline: BaselineArgs,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    /// Baseline threshold in robust deviations above the row floor
    #[arg(long, default_value_t = 3.0)]
    k_mad: f64,
    /// Baseline minimum region size in pixels
    #[arg(long, default_value_t = 20)]
    min_region: usize,
    /// Baseline closing/opening radius
    #[arg(long, default_value_t = 2)]
    morph_radius: usize,
}

impl BaselineArgs {
    fn params(&self) -> Result<BaselineParams> {
        if self.k_mad.is_nan() || self.k_mad < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "--k-mad must be >= 0, got {}",
                self.k_mad
            )));
        }
        Ok(BaselineParams {
            k_mad: self.k_mad,
            min_region_px: self.min_region,
            morph_radius: self.morph_radius,
        })
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ProviderKind {
    Import,
    Baseline,
    Oracle,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Format {
    Pcm16,
    Float32,
}

impl From<Format> for SampleFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Pcm16 => SampleFormat::Pcm16,
            Format::Float32 => SampleFormat::Float32,
        }
    }
}

impl ProviderArgs {
    fn build(&self, default: ProviderKind) -> Result<MaskProvider> {
        Ok(match self.provider.unwrap_or(default) {
            ProviderKind::Import => MaskProvider::Import {
                dir: self.masks.clone(),
            },
            ProviderKind::Baseline => MaskProvider::Baseline(self.baseline.params()?),
            ProviderKind::Oracle => MaskProvider::Oracle {
                threshold_db: self.threshold_db,
            },
        })
    }
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cli.verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            1
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    if suffix.is_empty() {
        return path.to_path_buf();
    }
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

fn pick_mask(masks: &[PathBuf], index: usize, n_channels: usize) -> Result<&Path> {
    match masks.len() {
        1 => Ok(&masks[0]),
        n if n == n_channels => Ok(&masks[index]),
        n => Err(Error::InvalidArgument(format!(
            "got {n} masks for {n_channels} channels"
        ))),
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let params = StftParams::new(cli.stft_window, cli.stft_hop, cli.stft_dft)?;
    if cli.verbose {
        eprintln!(
            "stft: window={} hop={} dft={} window_kind=hamming_periodic; jobs={}",
            params.window_len, params.hop, params.dft_len, cli.jobs
        );
    }
    match &cli.command {
        Command::Spectrogram { input, output } => {
            for clip in read_wav(input)? {
                let path = with_suffix(output, clip.channel.suffix());
                render_image(&stft(&clip, &params)?).save(&path)?;
                log::info!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Denoise(args) => run_denoise(cli, args, &params),
        Command::Separate {
            input,
            mask,
            sources,
            output,
            format,
        } => {
            let clips = read_wav(input)?;
            let stem = input.file_stem().unwrap_or_default().to_string_lossy();
            for (i, clip) in clips.iter().enumerate() {
                let spec = stft(clip, &params)?;
                let m = import_mask(pick_mask(mask, i, clips.len())?, spec.shape(), *sources)?;
                for (k, part) in separate(clip, &m, &params)?.iter().enumerate() {
                    let path = output.join(format!("{stem}{}_src{}.wav", clip.channel.suffix(), k + 1));
                    write_wav_channels(&[part], &path, (*format).into())?;
                    log::info!("wrote {}", path.display());
                }
            }
            Ok(())
        }
        Command::Enhance {
            input,
            gain,
            output,
            format,
        } => {
            if cli.verbose {
                eprintln!("enhance: gain={gain}");
            }
            let out = read_wav(input)?
                .iter()
                .map(|c| enhance(c, *gain))
                .collect::<Result<Vec<_>>>()?;
            write_wav_channels(&out.iter().collect::<Vec<_>>(), output, (*format).into())
        }
        Command::EstimateNoise {
            original,
            denoised,
            output,
            format,
        } => {
            let orig = read_wav(original)?;
            let den = read_wav(denoised)?;
            if orig.len() != den.len() {
                return Err(Error::ClipMismatch(format!("{} channels vs {}", orig.len(), den.len())));
            }
            let noise = orig
                .iter()
                .zip(&den)
                .map(|(o, d)| estimate_noise(o, d))
                .collect::<Result<Vec<_>>>()?;
            write_wav_channels(&noise.iter().collect::<Vec<_>>(), output, (*format).into())
        }
        Command::Segment {
            input,
            output,
            baseline,
            overlay,
            opacity,
        } => {
            let bp = baseline.params()?;
            if cli.verbose {
                eprintln!(
                    "baseline: k_mad={} min_region={} morph_radius={}",
                    bp.k_mad, bp.min_region_px, bp.morph_radius
                );
            }
            for clip in read_wav(input)? {
                let spec = stft(&clip, &params)?;
                let mask = MaskProvider::Baseline(bp).mask_for(&ProviderInput {
                    clip_id: "",
                    spec: &spec,
                    mask_path: None,
                    clean: None,
                    n_sources: 1,
                })?;
                let img = grid_to_mask_image(&mask);
                let suffix = clip.channel.suffix();
                img.save(with_suffix(output, suffix))?;
                if let Some(ov) = overlay {
                    let png = overlay_png(&render_image(&spec), &img, *opacity)?;
                    let path = with_suffix(ov, suffix);
                    crate::fsutil::write_atomic(&path, &png)?;
                }
            }
            Ok(())
        }
        Command::Eval {
            root,
            split,
            provider,
            json,
            rescan,
        } => {
            let provider = provider.build(ProviderKind::Import)?;
            if cli.verbose {
                eprintln!("provider: {}", serde_json::to_string(&provider)?);
            }
            let manifest = DatasetManifest::load_or_scan(root, *rescan)?;
            let report = evaluate_split(&manifest, *split, &provider, &params, cli.jobs)?;
            print_out(&report.to_table());
            if let Some(path) = json {
                crate::fsutil::write_atomic(path, report.to_jsonl()?.as_bytes())?;
            }
            Ok(())
        }
        Command::Scan { root, rescan } => {
            let manifest = DatasetManifest::load_or_scan(root, *rescan)?;
            let mut out = String::new();
            for (split, n) in manifest.counts() {
                out.push_str(&format!("{split}\t{n}\n"));
            }
            for msg in &manifest.inconsistencies {
                out.push_str(&format!("inconsistency\t{msg}\n"));
            }
            for path in &manifest.unknown_files {
                out.push_str(&format!("unknown\t{}\n", path.display()));
            }
            print_out(&out);
            Ok(())
        }
        Command::Serve {
            workspace,
            port,
            host,
            sources,
        } => {
            let cfg = ServiceConfig {
                params,
                n_sources: *sources,
                ..ServiceConfig::new(workspace)
            };
            run_blocking(cfg, SocketAddr::new(*host, *port))
        }
    }
}

fn run_denoise(cli: &Cli, args: &DenoiseArgs, params: &StftParams) -> Result<()> {
    if let Some(root) = &args.root {
        let (Some(split), Some(out_dir)) = (args.split, &args.out_dir) else {
            return Err(Error::InvalidArgument("batch mode needs --split and --out-dir".into()));
        };
        let provider = args.provider.build(ProviderKind::Import)?;
        if cli.verbose {
            eprintln!("provider: {}", serde_json::to_string(&provider)?);
        }
        let manifest = DatasetManifest::load_or_scan(root, false)?;
        let summary = batch_denoise(&manifest, split, &provider, params, out_dir, cli.jobs)?;
        let mut out = format!(
            "succeeded\t{}\nfailed\t{}\n",
            summary.succeeded.len(),
            summary.failed.len()
        );
        for (id, why) in &summary.failed {
            out.push_str(&format!("failed\t{id}\t{why}\n"));
        }
        print_out(&out);
        return Ok(());
    }

    let (Some(input), Some(output)) = (&args.input, &args.output) else {
        return Err(Error::InvalidArgument("denoise needs INPUT and -o OUTPUT".into()));
    };
    let kind = args.provider.provider.unwrap_or(ProviderKind::Import);
    if kind == ProviderKind::Import && args.mask.is_empty() {
        return Err(Error::InvalidArgument("give --mask or --provider".into()));
    }
    let provider = args.provider.build(kind)?;
    if cli.verbose {
        eprintln!("provider: {}", serde_json::to_string(&provider)?);
    }
    let clips = read_wav(input)?;
    let clean = match (&provider, &args.clean) {
        (MaskProvider::Oracle { .. }, Some(path)) => Some(read_wav(path)?),
        (MaskProvider::Oracle { .. }, None) => {
            return Err(Error::InvalidArgument("oracle provider needs --clean".into()))
        }
        _ => None,
    };
    let mut outputs: Vec<AudioClip> = Vec::with_capacity(clips.len());
    for (i, clip) in clips.iter().enumerate() {
        let spec = stft(clip, params)?;
        let mask = match &provider {
            MaskProvider::Import { .. } => import_mask(pick_mask(&args.mask, i, clips.len())?, spec.shape(), 1)?,
            p => p.mask_for(&ProviderInput {
                clip_id: "",
                spec: &spec,
                mask_path: None,
                clean: clean.as_ref().and_then(|c| c.get(i)),
                n_sources: 1,
            })?,
        };
        outputs.push(denoise(clip, &mask, params)?);
    }
    write_wav_channels(&outputs.iter().collect::<Vec<_>>(), output, args.format.into())
}

fn print_out(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    let _ = out.flush();
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn suffix_goes_before_extension() {
        assert_eq!(with_suffix(Path::new("a/b.png"), "_L"), PathBuf::from("a/b_L.png"));
        assert_eq!(with_suffix(Path::new("b"), "_R"), PathBuf::from("b_R"));
        assert_eq!(with_suffix(Path::new("b.png"), ""), PathBuf::from("b.png"));
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["specmask", "frobnicate"]), 2);
        assert_eq!(run(["specmask", "enhance", "--bogus"]), 2);
        assert_eq!(run(["specmask", "--help"]), 0);
    }

    #[test]
    fn runtime_errors_exit_one() {
        assert_eq!(
            run(["specmask", "spectrogram", "/nonexistent.wav", "-o", "/tmp/x.png"]),
            1
        );
        assert_eq!(
            run(["specmask", "--stft-hop", "0", "scan", "--root", "/nonexistent"]),
            1
        );
    }
}
