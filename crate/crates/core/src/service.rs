//! HTTP backend for mask labeling.
//!
//! All state lives in the workspace directory; the service can be restarted
//! at any time and rebuilds everything from disk except the short-lived
//! writer leases.
//!
//! ```text
//! <ws>/clips/<stem>.wav            raw audio (stereo files yield <stem>_L, <stem>_R)
//! <ws>/coarse/<id>_mask.png        imported coarse masks
//! <ws>/masks/<id>_mask.png         labeled masks (symmetrized, native dims)
//! <ws>/rejected/<id>               rejection markers
//! <ws>/cache/<id>.<w>-<h>-<d>.png  rendered audio images
//! <ws>/Accepted/...                accepted clips
//! ```
//!
//! | method | path                       | body      | response       |
//! |--------|----------------------------|-----------|----------------|
//! | GET    | `/clips`                   |           | JSON list      |
//! | GET    | `/clips/{id}/image.png`    |           | PNG            |
//! | GET    | `/clips/{id}/mask.png`     |           | PNG            |
//! | PUT    | `/clips/{id}/mask.png`     | PNG       | JSON           |
//! | POST   | `/clips/{id}/denoise`      |           | `audio/wav`    |
//! | POST   | `/clips/{id}/accept`       |           | JSON           |
//! | POST   | `/clips/{id}/reject`       |           | JSON           |
//! | POST   | `/clips/{id}/compare`      | PNG       | JSON scores    |
//!
//! Writers identify themselves with an `X-Labeler` header. A save takes a
//! lease on the clip; other labelers get 409 until it expires or the clip is
//! accepted or rejected.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::audio_io::{encode_wav, probe_wav, read_wav, SampleFormat};
use crate::dataset::{accept_clip, mask_file_name, AcceptedPaths, ACCEPTED_DIR};
use crate::error::Error;
use crate::fsutil::write_atomic;
use crate::imaging::{grid_to_mask_image, mask_image_to_grid, render_image, MaskImage};
use crate::metrics::{mask_scores, MaskScores};
use crate::spectral::{denoise, stft, symmetrize_mask, AudioClip, Channel, StftParams, TfMask};

pub const DEFAULT_LEASE: Duration = Duration::from_secs(30);
/// Side length of the square masks produced by external segmentation models.
pub const MODEL_MASK_SIZE: usize = 512;
const LABELER_HEADER: &str = "x-labeler";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipStatus {
    Unlabeled,
    Coarse,
    Labeled,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipInfo {
    pub id: String,
    pub status: ClipStatus,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceError {
    pub status: u16,
    pub code: &'static str,
    pub message: String,
}

impl ServiceError {
    fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn not_found(id: &str) -> Self {
        Self::new(404, "unknown_clip", format!("no clip {id:?}"))
    }

    fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(409, code, message)
    }

    fn invalid(err: Error) -> Self {
        Self::new(422, err.code(), err.to_string())
    }
}

impl From<Error> for ServiceError {
    fn from(err: Error) -> Self {
        Self::new(500, err.code(), err.to_string())
    }
}

impl std::fmt::Display for ServiceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", self.status, self.code, self.message)
    }
}

impl std::error::Error for ServiceError {}

type SvcResult<T> = Result<T, ServiceError>;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub workspace: PathBuf,
    pub params: StftParams,
    pub n_sources: u8,
    pub lease: Duration,
}

impl ServiceConfig {
    pub fn new(workspace: impl Into<PathBuf>) -> Self {
        Self {
            workspace: workspace.into(),
            params: StftParams::default(),
            n_sources: 1,
            lease: DEFAULT_LEASE,
        }
    }
}

struct Lease {
    holder: String,
    expires: Instant,
}

struct ClipSource {
    path: PathBuf,
    channel_index: usize,
}

/// The labeling operations, independent of the HTTP layer.
pub struct LabelService {
    cfg: ServiceConfig,
    leases: Mutex<HashMap<String, Lease>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl LabelService {
    pub fn new(cfg: ServiceConfig) -> crate::Result<Self> {
        cfg.params.validate()?;
        Ok(Self {
            cfg,
            leases: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.cfg
    }

    fn dir(&self, name: &str) -> PathBuf {
        self.cfg.workspace.join(name)
    }

    fn mask_path(&self, id: &str) -> PathBuf {
        self.dir("masks").join(mask_file_name(id))
    }

    fn coarse_path(&self, id: &str) -> PathBuf {
        self.dir("coarse").join(mask_file_name(id))
    }

    fn rejected_path(&self, id: &str) -> PathBuf {
        self.dir("rejected").join(id)
    }

    fn accepted_root(&self) -> PathBuf {
        self.cfg.workspace.join(ACCEPTED_DIR)
    }

    fn cache_path(&self, id: &str) -> PathBuf {
        let p = self.cfg.params;
        self.dir("cache")
            .join(format!("{id}.{}-{}-{}.png", p.window_len, p.hop, p.dft_len))
    }

    fn resolve(&self, id: &str) -> SvcResult<ClipSource> {
        if !valid_id(id) {
            return Err(ServiceError::not_found(id));
        }
        let clips = self.dir("clips");
        let direct = clips.join(format!("{id}.wav"));
        if direct.is_file() {
            return Ok(ClipSource {
                path: direct,
                channel_index: 0,
            });
        }
        for (suffix, index) in [("_L", 0), ("_R", 1)] {
            if let Some(stem) = id.strip_suffix(suffix) {
                let path = clips.join(format!("{stem}.wav"));
                if path.is_file() && probe_wav(&path).is_ok_and(|f| f.channels == 2) {
                    return Ok(ClipSource {
                        path,
                        channel_index: index,
                    });
                }
            }
        }
        Err(ServiceError::not_found(id))
    }

    fn load_clip(&self, id: &str) -> SvcResult<AudioClip> {
        let src = self.resolve(id)?;
        read_wav(&src.path)?
            .into_iter()
            .nth(src.channel_index)
            .ok_or_else(|| ServiceError::not_found(id))
    }

    fn native_dims(&self, clip: &AudioClip) -> (usize, usize) {
        (self.cfg.params.dft_len, self.cfg.params.n_frames(clip.len()))
    }

    pub fn status(&self, id: &str) -> ClipStatus {
        if self.rejected_path(id).exists() {
            ClipStatus::Rejected
        } else if AcceptedPaths::new(&self.accepted_root(), id).audio_mask.is_file() {
            ClipStatus::Accepted
        } else if self.mask_path(id).is_file() {
            ClipStatus::Labeled
        } else if self.coarse_path(id).is_file() {
            ClipStatus::Coarse
        } else {
            ClipStatus::Unlabeled
        }
    }

    pub fn list_clips(&self) -> SvcResult<Vec<ClipInfo>> {
        let dir = self.dir("clips");
        let mut out = Vec::new();
        if !dir.is_dir() {
            return Ok(out);
        }
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "wav"))
            .collect();
        paths.sort();
        for path in paths {
            let Ok(info) = probe_wav(&path) else {
                log::warn!("skipping unreadable clip {}", path.display());
                continue;
            };
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            let channels: &[Channel] = if info.channels == 2 {
                &[Channel::Left, Channel::Right]
            } else {
                &[Channel::Mono]
            };
            for ch in channels {
                let id = format!("{stem}{}", ch.suffix());
                out.push(ClipInfo {
                    status: self.status(&id),
                    duration_s: info.n_samples as f64 / info.sample_rate as f64,
                    id,
                });
            }
        }
        Ok(out)
    }

    /// Audio image at native dimensions, cached on disk after first render.
    pub fn get_image(&self, id: &str) -> SvcResult<Vec<u8>> {
        self.resolve(id)?;
        let cache = self.cache_path(id);
        if let Ok(bytes) = std::fs::read(&cache) {
            return Ok(bytes);
        }
        let clip = self.load_clip(id)?;
        let png = render_image(&stft(&clip, &self.cfg.params).map_err(ServiceError::invalid)?).to_png()?;
        write_atomic(&cache, &png)?;
        Ok(png)
    }

    /// Labeled mask, else coarse mask, else an all-zero mask; stored bytes
    /// are returned unchanged.
    pub fn get_mask(&self, id: &str) -> SvcResult<Vec<u8>> {
        let clip = self.load_clip(id)?;
        for path in [self.mask_path(id), self.coarse_path(id)] {
            if let Ok(bytes) = std::fs::read(&path) {
                return Ok(bytes);
            }
        }
        let (bins, frames) = self.native_dims(&clip);
        Ok(grid_to_mask_image(&TfMask::zeros(bins, frames, self.cfg.n_sources)).to_png()?)
    }

    fn current_mask(&self, id: &str, clip: &AudioClip) -> SvcResult<Option<TfMask>> {
        for path in [self.mask_path(id), self.coarse_path(id)] {
            if path.is_file() {
                let img = MaskImage::load(&path)?;
                let mask = mask_image_to_grid(&img, self.native_dims(clip), self.cfg.n_sources)
                    .map_err(ServiceError::invalid)?;
                if path == self.mask_path(id) && !mask.is_symmetric() {
                    log::warn!("stored mask for {id} is not symmetric");
                }
                return Ok(Some(mask));
            }
        }
        Ok(None)
    }

    fn take_lease(&self, id: &str, labeler: &str) -> SvcResult<()> {
        let mut leases = self.leases.lock().expect("lease table poisoned");
        let now = Instant::now();
        if let Some(lease) = leases.get(id) {
            if lease.holder != labeler && lease.expires > now {
                return Err(ServiceError::conflict(
                    "clip_locked",
                    format!("clip {id} is being edited by {}", lease.holder),
                ));
            }
        }
        leases.insert(
            id.to_string(),
            Lease {
                holder: labeler.to_string(),
                expires: now + self.cfg.lease,
            },
        );
        Ok(())
    }

    fn check_lease(&self, id: &str, labeler: &str) -> SvcResult<()> {
        let leases = self.leases.lock().expect("lease table poisoned");
        match leases.get(id) {
            Some(l) if l.holder != labeler && l.expires > Instant::now() => Err(ServiceError::conflict(
                "clip_locked",
                format!("clip {id} is being edited by {}", l.holder),
            )),
            _ => Ok(()),
        }
    }

    fn release_lease(&self, id: &str) {
        self.leases.lock().expect("lease table poisoned").remove(id);
    }

    /// Validates, symmetrizes and stores a mask. Native-size masks and
    /// square model-size masks are accepted.
    pub fn save_mask(&self, id: &str, labeler: &str, png: &[u8]) -> SvcResult<()> {
        let clip = self.load_clip(id)?;
        match self.status(id) {
            ClipStatus::Accepted | ClipStatus::Rejected => {
                return Err(ServiceError::conflict(
                    "bad_transition",
                    format!("clip {id} is already {:?}", self.status(id)),
                ))
            }
            _ => {}
        }
        let img = MaskImage::from_png(png).map_err(ServiceError::invalid)?;
        let (bins, frames) = self.native_dims(&clip);
        let dims = (img.rows, img.cols);
        if dims != (bins, frames) && dims != (MODEL_MASK_SIZE, MODEL_MASK_SIZE) {
            return Err(ServiceError::new(
                422,
                "bad_dimensions",
                format!("mask is {dims:?}, expected {:?} or 512x512", (bins, frames)),
            ));
        }
        let mask = mask_image_to_grid(&img, (bins, frames), self.cfg.n_sources).map_err(ServiceError::invalid)?;
        self.take_lease(id, labeler)?;
        let bytes = grid_to_mask_image(&symmetrize_mask(&mask)).to_png()?;
        write_atomic(&self.mask_path(id), &bytes)?;
        Ok(())
    }

    /// Float32 WAV of the clip denoised with its current mask.
    pub fn preview_denoise(&self, id: &str) -> SvcResult<Vec<u8>> {
        let clip = self.load_clip(id)?;
        let mask = self
            .current_mask(id, &clip)?
            .ok_or_else(|| ServiceError::conflict("no_mask", format!("clip {id} has no mask")))?;
        let out = denoise(&clip, &mask.union(), &self.cfg.params).map_err(ServiceError::invalid)?;
        Ok(encode_wav(&[&out], SampleFormat::Float32)?)
    }

    fn require_labeled(&self, id: &str) -> SvcResult<()> {
        match self.status(id) {
            ClipStatus::Labeled => Ok(()),
            other => Err(ServiceError::conflict(
                "bad_transition",
                format!("clip {id} is {other:?}, expected Labeled"),
            )),
        }
    }

    pub fn accept(&self, id: &str, labeler: &str) -> SvcResult<AcceptedPaths> {
        let clip = self.load_clip(id)?;
        self.require_labeled(id)?;
        self.check_lease(id, labeler)?;
        let mask = self
            .current_mask(id, &clip)?
            .ok_or_else(|| ServiceError::conflict("no_mask", format!("clip {id} has no mask")))?;
        let denoised = denoise(&clip, &mask.union(), &self.cfg.params).map_err(ServiceError::invalid)?;
        let paths = accept_clip(id, &clip, &mask, &denoised, &self.cfg.params, self.accepted_root())?;
        self.release_lease(id);
        Ok(paths)
    }

    pub fn reject(&self, id: &str, labeler: &str) -> SvcResult<()> {
        self.resolve(id)?;
        self.require_labeled(id)?;
        self.check_lease(id, labeler)?;
        write_atomic(&self.rejected_path(id), b"")?;
        self.release_lease(id);
        Ok(())
    }

    /// Scores a predicted mask against the clip's saved mask.
    pub fn compare(&self, id: &str, predicted_png: &[u8]) -> SvcResult<MaskScores> {
        let clip = self.load_clip(id)?;
        let gt_path = self.mask_path(id);
        if !gt_path.is_file() {
            return Err(ServiceError::conflict(
                "no_ground_truth",
                format!("clip {id} has no saved mask"),
            ));
        }
        let dims = self.native_dims(&clip);
        let gt =
            mask_image_to_grid(&MaskImage::load(&gt_path)?, dims, self.cfg.n_sources).map_err(ServiceError::invalid)?;
        let img = MaskImage::from_png(predicted_png).map_err(ServiceError::invalid)?;
        let pred = mask_image_to_grid(&img, dims, self.cfg.n_sources).map_err(ServiceError::invalid)?;
        mask_scores(&pred, &gt).map_err(ServiceError::invalid)
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = Json(serde_json::json!({ "error": self.code, "message": self.message }));
        (status, body).into_response()
    }
}

type Shared = Arc<LabelService>;

fn labeler(headers: &HeaderMap) -> String {
    headers
        .get(LABELER_HEADER)
        .and_then(|v| v.to_str().ok())
        .filter(|s| !s.is_empty())
        .unwrap_or("anonymous")
        .to_string()
}

async fn blocking<T, F>(svc: Shared, f: F) -> SvcResult<T>
where
    T: Send + 'static,
    F: FnOnce(&LabelService) -> SvcResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ServiceError::new(500, "internal", e.to_string()))?
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn list(State(svc): State<Shared>) -> SvcResult<Json<Vec<ClipInfo>>> {
    blocking(svc, |s| s.list_clips()).await.map(Json)
}

async fn image(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> SvcResult<Response> {
    blocking(svc, move |s| s.get_image(&id)).await.map(png)
}

async fn get_mask(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> SvcResult<Response> {
    blocking(svc, move |s| s.get_mask(&id)).await.map(png)
}

async fn put_mask(
    State(svc): State<Shared>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
    body: Bytes,
) -> SvcResult<Json<serde_json::Value>> {
    let who = labeler(&headers);
    blocking(svc, move |s| {
        s.save_mask(&id, &who, &body)?;
        Ok(Json(serde_json::json!({ "id": id, "status": s.status(&id) })))
    })
    .await
}

async fn preview(State(svc): State<Shared>, UrlPath(id): UrlPath<String>) -> SvcResult<Response> {
    let wav = blocking(svc, move |s| s.preview_denoise(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "audio/wav")], wav).into_response())
}

async fn accept(
    State(svc): State<Shared>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
) -> SvcResult<Json<serde_json::Value>> {
    let who = labeler(&headers);
    blocking(svc, move |s| {
        s.accept(&id, &who)?;
        Ok(Json(serde_json::json!({ "id": id, "status": s.status(&id) })))
    })
    .await
}

async fn reject(
    State(svc): State<Shared>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
) -> SvcResult<Json<serde_json::Value>> {
    let who = labeler(&headers);
    blocking(svc, move |s| {
        s.reject(&id, &who)?;
        Ok(Json(serde_json::json!({ "id": id, "status": s.status(&id) })))
    })
    .await
}

async fn compare(State(svc): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> SvcResult<Json<MaskScores>> {
    blocking(svc, move |s| s.compare(&id, &body)).await.map(Json)
}

pub fn router(service: Arc<LabelService>) -> Router {
    Router::new()
        .route("/clips", get(list))
        .route("/clips/{id}/image.png", get(image))
        .route("/clips/{id}/mask.png", get(get_mask).put(put_mask))
        .route("/clips/{id}/denoise", post(preview))
        .route("/clips/{id}/accept", post(accept))
        .route("/clips/{id}/reject", post(reject))
        .route("/clips/{id}/compare", post(compare))
        .with_state(service)
}

/// Serves on an already bound listener until the task is dropped.
pub async fn serve(listener: tokio::net::TcpListener, service: Arc<LabelService>) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}

/// Binds `addr` and serves forever on a fresh runtime.
pub fn run_blocking(cfg: ServiceConfig, addr: SocketAddr) -> crate::Result<()> {
    let service = Arc::new(LabelService::new(cfg)?);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::io("<runtime>", e))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| Error::io(addr.to_string(), e))?;
        log::info!(
            "listening on {}",
            listener.local_addr().map_err(|e| Error::io(addr.to_string(), e))?
        );
        serve(listener, service)
            .await
            .map_err(|e| Error::io(addr.to_string(), e))
    })
}
