//! Dataset folder layout, the `Accepted` tree, and batch processing.
//!
//! ```text
//! <root>/{training,validation,test}/{raw_audios,denoised_audios,images,masks}/
//! <root>/Accepted/{original_audio,denoised_audio,audio_images,audio_masks}/
//! ```
//!
//! A clip id is the raw file stem, suffixed `_L` / `_R` for the two channels
//! of a stereo recording. Denoised audio and images are named `<id>.wav` /
//! `<id>.png`, masks `<id>_mask.png`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio_io::{encode_wav, probe_wav, read_wav, SampleFormat};
use crate::error::{Error, Result};
use crate::fsutil::{staging_path, write_atomic};
use crate::imaging::{grid_to_mask_image, render_image};
use crate::providers::{MaskProvider, ProviderInput};
use crate::spectral::{denoise, stft, AudioClip, Channel, StftParams, TfMask};

pub const RAW_AUDIOS: &str = "raw_audios";
pub const DENOISED_AUDIOS: &str = "denoised_audios";
pub const IMAGES: &str = "images";
pub const MASKS: &str = "masks";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const ACCEPTED_DIR: &str = "Accepted";
pub const ACCEPTED_ORIGINAL: &str = "original_audio";
pub const ACCEPTED_DENOISED: &str = "denoised_audio";
pub const ACCEPTED_IMAGES: &str = "audio_images";
pub const ACCEPTED_MASKS: &str = "audio_masks";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Training,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Training, Split::Validation, Split::Test];

    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Training => "training",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir_name())
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.dir_name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown split {s:?}")))
    }
}

pub fn mask_file_name(clip_id: &str) -> String {
    format!("{clip_id}_mask.png")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub id: String,
    pub raw_audio: PathBuf,
    pub channel: Channel,
    pub channel_index: usize,
    pub denoised_audio: Option<PathBuf>,
    pub image: Option<PathBuf>,
    pub mask: Option<PathBuf>,
}

impl ClipEntry {
    /// The channel of the raw recording this clip refers to.
    pub fn load_raw(&self) -> Result<AudioClip> {
        load_channel(&self.raw_audio, self.channel_index)
    }

    /// The reference denoised audio, if recorded.
    pub fn load_denoised(&self) -> Result<Option<AudioClip>> {
        self.denoised_audio.as_deref().map(|p| load_channel(p, 0)).transpose()
    }
}

fn load_channel(path: &Path, index: usize) -> Result<AudioClip> {
    read_wav(path)?
        .into_iter()
        .nth(index)
        .ok_or_else(|| Error::UnsupportedFormat(format!("{} has no channel {index}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub splits: BTreeMap<Split, Vec<ClipEntry>>,
    /// Artifacts that do not resolve to a raw audio, unreadable raw files.
    pub inconsistencies: Vec<String>,
    pub unknown_files: Vec<PathBuf>,
}

impl DatasetManifest {
    pub fn clips(&self, split: Split) -> &[ClipEntry] {
        self.splits.get(&split).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn counts(&self) -> BTreeMap<Split, usize> {
        Split::ALL.into_iter().map(|s| (s, self.clips(s).len())).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        write_atomic(path.as_ref(), &json)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Returns the cached manifest at `<root>/manifest.json` unless `rescan`
    /// is set or no cache exists, in which case the tree is scanned and the
    /// cache rewritten.
    pub fn load_or_scan(root: impl AsRef<Path>, rescan: bool) -> Result<Self> {
        let root = root.as_ref();
        let cache = root.join(MANIFEST_FILE);
        if !rescan && cache.is_file() {
            if let Ok(m) = Self::load(&cache) {
                return Ok(m);
            }
            log::warn!("ignoring unreadable manifest cache {}", cache.display());
        }
        let manifest = scan_dataset(root)?;
        manifest.save(&cache)?;
        Ok(manifest)
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        out.push(entry.path());
    }
    out.sort();
    Ok(out)
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.is_file() && path.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Walks the three splits and pairs every raw clip with its artifacts.
pub fn scan_dataset(root: impl AsRef<Path>) -> Result<DatasetManifest> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root not found"),
        ));
    }
    let missing: Vec<String> = Split::ALL
        .iter()
        .filter(|s| !root.join(s.dir_name()).is_dir())
        .map(|s| s.dir_name().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingSplits {
            root: root.to_path_buf(),
            missing,
        });
    }

    let mut manifest = DatasetManifest {
        root: root.to_path_buf(),
        splits: BTreeMap::new(),
        inconsistencies: Vec::new(),
        unknown_files: Vec::new(),
    };
    let known_dirs = [RAW_AUDIOS, DENOISED_AUDIOS, IMAGES, MASKS];

    for split in Split::ALL {
        let split_dir = root.join(split.dir_name());
        for path in sorted_entries(&split_dir)? {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned());
            if !(path.is_dir() && known_dirs.iter().any(|d| Some(*d) == name.as_deref())) {
                manifest.unknown_files.push(path);
            }
        }

        let mut clips: BTreeMap<String, ClipEntry> = BTreeMap::new();
        let raw_dir = split_dir.join(RAW_AUDIOS);
        if !raw_dir.is_dir() {
            manifest
                .inconsistencies
                .push(format!("{split}: missing {RAW_AUDIOS}/ folder"));
        }
        for path in sorted_entries(&raw_dir)? {
            if !has_ext(&path, "wav") {
                manifest.unknown_files.push(path);
                continue;
            }
            let base = stem(&path);
            let channels: Vec<Channel> = match probe_wav(&path) {
                Ok(info) if info.channels == 2 => vec![Channel::Left, Channel::Right],
                Ok(_) => vec![Channel::Mono],
                Err(e) => {
                    manifest
                        .inconsistencies
                        .push(format!("{split}: unreadable raw audio {}: {e}", path.display()));
                    vec![Channel::Mono]
                }
            };
            for (index, channel) in channels.into_iter().enumerate() {
                let id = format!("{base}{}", channel.suffix());
                clips.insert(
                    id.clone(),
                    ClipEntry {
                        id,
                        raw_audio: path.clone(),
                        channel,
                        channel_index: index,
                        denoised_audio: None,
                        image: None,
                        mask: None,
                    },
                );
            }
        }

        for (folder, ext, suffix) in [
            (DENOISED_AUDIOS, "wav", ""),
            (IMAGES, "png", ""),
            (MASKS, "png", "_mask"),
        ] {
            for path in sorted_entries(&split_dir.join(folder))? {
                let id = stem(&path);
                let id = match id.strip_suffix(suffix) {
                    Some(id) if has_ext(&path, ext) => id.to_string(),
                    _ => {
                        manifest.unknown_files.push(path);
                        continue;
                    }
                };
                match clips.get_mut(&id) {
                    Some(entry) => {
                        let slot = match folder {
                            DENOISED_AUDIOS => &mut entry.denoised_audio,
                            IMAGES => &mut entry.image,
                            _ => &mut entry.mask,
                        };
                        *slot = Some(path);
                    }
                    None => manifest
                        .inconsistencies
                        .push(format!("{split}: {} has no raw audio for clip {id}", path.display())),
                }
            }
        }
        manifest.splits.insert(split, clips.into_values().collect());
    }
    Ok(manifest)
}

/// Where [`accept_clip`] put the four artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AcceptedPaths {
    pub original_audio: PathBuf,
    pub denoised_audio: PathBuf,
    pub audio_image: PathBuf,
    pub audio_mask: PathBuf,
}

impl AcceptedPaths {
    pub fn new(accepted_root: &Path, clip_id: &str) -> Self {
        Self {
            original_audio: accepted_root.join(ACCEPTED_ORIGINAL).join(format!("{clip_id}.wav")),
            denoised_audio: accepted_root.join(ACCEPTED_DENOISED).join(format!("{clip_id}.wav")),
            audio_image: accepted_root.join(ACCEPTED_IMAGES).join(format!("{clip_id}.png")),
            audio_mask: accepted_root.join(ACCEPTED_MASKS).join(mask_file_name(clip_id)),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [
            &self.original_audio,
            &self.denoised_audio,
            &self.audio_image,
            &self.audio_mask,
        ]
    }
}

/// Stages every file next to its destination, then renames them into place.
/// On any failure the staged files and those already renamed are removed.
fn commit_all(files: &[(&Path, Vec<u8>)]) -> Result<()> {
    let mut staged: Vec<PathBuf> = Vec::with_capacity(files.len());
    let cleanup = |paths: &[PathBuf]| {
        for p in paths {
            let _ = std::fs::remove_file(p);
        }
    };
    for (dest, bytes) in files {
        let parent = dest.parent().unwrap_or(Path::new("."));
        let tmp = staging_path(dest);
        let res = std::fs::create_dir_all(parent)
            .map_err(|e| Error::io(parent, e))
            .and_then(|_| std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e)));
        if let Err(e) = res {
            let _ = std::fs::remove_file(&tmp);
            cleanup(&staged);
            return Err(e);
        }
        staged.push(tmp);
    }
    for (i, ((dest, _), tmp)) in files.iter().zip(&staged).enumerate() {
        if let Err(e) = std::fs::rename(tmp, dest) {
            let committed: Vec<PathBuf> = files[..i].iter().map(|(d, _)| d.to_path_buf()).collect();
            cleanup(&committed);
            cleanup(&staged[i..]);
            return Err(Error::io(*dest, e));
        }
    }
    Ok(())
}

/// Writes original audio, denoised audio, audio image and mask for one clip
/// into the `Accepted` tree as a unit. Re-accepting overwrites.
pub fn accept_clip(
    clip_id: &str,
    clip: &AudioClip,
    mask: &TfMask,
    denoised: &AudioClip,
    params: &StftParams,
    accepted_root: impl AsRef<Path>,
) -> Result<AcceptedPaths> {
    let image = render_image(&stft(clip, params)?);
    let paths = AcceptedPaths::new(accepted_root.as_ref(), clip_id);
    let files = [
        (
            paths.original_audio.as_path(),
            encode_wav(&[clip], SampleFormat::Float32)?,
        ),
        (
            paths.denoised_audio.as_path(),
            encode_wav(&[denoised], SampleFormat::Float32)?,
        ),
        (paths.audio_image.as_path(), image.to_png()?),
        (paths.audio_mask.as_path(), grid_to_mask_image(mask).to_png()?),
    ];
    commit_all(&files)?;
    Ok(paths)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BatchSummary {
    pub succeeded: Vec<String>,
    pub failed: Vec<(String, String)>,
}

pub(crate) fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

fn denoise_entry(entry: &ClipEntry, provider: &MaskProvider, params: &StftParams, out_dir: &Path) -> Result<()> {
    let clip = entry.load_raw()?;
    let spec = stft(&clip, params)?;
    let clean = match provider {
        MaskProvider::Oracle { .. } => entry.load_denoised()?,
        _ => None,
    };
    let mask = provider.mask_for(&ProviderInput {
        clip_id: &entry.id,
        spec: &spec,
        mask_path: entry.mask.as_deref(),
        clean: clean.as_ref(),
        n_sources: 1,
    })?;
    let out = denoise(&clip, &mask, params)?;
    write_atomic(
        &out_dir.join(format!("{}.wav", entry.id)),
        &encode_wav(&[&out], SampleFormat::Float32)?,
    )?;
    render_image(&spec).save(out_dir.join(format!("{}.png", entry.id)))?;
    grid_to_mask_image(&mask).save(out_dir.join(mask_file_name(&entry.id)))?;
    Ok(())
}

/// Denoises every clip of `split` into `out_dir`, writing `<id>.wav`,
/// `<id>.png` and `<id>_mask.png`. A failing clip is recorded and skipped.
/// `jobs = 0` uses one thread per logical core.
pub fn batch_denoise(
    manifest: &DatasetManifest,
    split: Split,
    provider: &MaskProvider,
    params: &StftParams,
    out_dir: impl AsRef<Path>,
    jobs: usize,
) -> Result<BatchSummary> {
    params.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let clips = manifest.clips(split);
    let results: Vec<(String, Result<()>)> = thread_pool(jobs)?.install(|| {
        clips
            .par_iter()
            .map(|entry| (entry.id.clone(), denoise_entry(entry, provider, params, out_dir)))
            .collect()
    });
    let mut summary = BatchSummary::default();
    for (id, res) in results {
        match res {
            Ok(()) => summary.succeeded.push(id),
            Err(e) => {
                log::warn!("{id}: {e}");
                summary.failed.push((id, format!("{}: {e}", e.code())));
            }
        }
    }
    Ok(summary)
}
