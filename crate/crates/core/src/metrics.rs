//! Mask agreement scores, dice loss, SDR, and split-level evaluation.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{thread_pool, ClipEntry, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::providers::{import_mask, MaskProvider, ProviderInput};
use crate::spectral::{denoise, stft, AudioClip, StftParams, TfMask};

/// Value reported when the estimate matches the reference exactly.
pub const SDR_CAP_DB: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskScores {
    pub f1: f64,
    pub iou: f64,
    pub dice: f64,
}

fn check_pair(pred: &TfMask, gt: &TfMask) -> Result<()> {
    if pred.shape() != gt.shape() {
        return Err(Error::ShapeMismatch {
            expected: gt.shape(),
            actual: pred.shape(),
        });
    }
    Ok(())
}

fn check_binary(mask: &TfMask) -> Result<()> {
    match mask.labels.iter().find(|&&l| l > 1) {
        Some(&l) => Err(Error::NonBinaryMask(l)),
        None => Ok(()),
    }
}

pub fn confusion(pred: &TfMask, gt: &TfMask) -> Result<Confusion> {
    check_pair(pred, gt)?;
    check_binary(pred)?;
    check_binary(gt)?;
    let mut c = Confusion::default();
    for (&p, &g) in pred.labels.iter().zip(&gt.labels) {
        match (p, g) {
            (1, 1) => c.true_pos += 1,
            (1, 0) => c.false_pos += 1,
            (0, 1) => c.false_neg += 1,
            _ => c.true_neg += 1,
        }
    }
    Ok(c)
}

/// F1, IoU and Dice of a binary prediction against binary ground truth.
///
/// Two empty masks agree perfectly (all scores 1); exactly one empty mask
/// scores 0.
pub fn mask_scores(pred: &TfMask, gt: &TfMask) -> Result<MaskScores> {
    let c = confusion(pred, gt)?;
    let tp = c.true_pos as f64;
    let (fp, fneg) = (c.false_pos as f64, c.false_neg as f64);
    if c.true_pos + c.false_pos + c.false_neg == 0 {
        return Ok(MaskScores {
            f1: 1.0,
            iou: 1.0,
            dice: 1.0,
        });
    }
    Ok(MaskScores {
        f1: tp / (tp + 0.5 * (fp + fneg)),
        iou: tp / (tp + fp + fneg),
        dice: 2.0 * tp / ((tp + fp) + (tp + fneg)),
    })
}

/// `1 - 2 sum(p g) / (sum p + sum g)` for a soft prediction in `[0, 1]`,
/// laid out frame-major like [`TfMask::labels`]. Zero when both are empty.
pub fn dice_loss(pred_soft: &[f64], gt: &TfMask) -> Result<f64> {
    if pred_soft.len() != gt.labels.len() {
        return Err(Error::ShapeMismatch {
            expected: gt.shape(),
            actual: (pred_soft.len(), 1),
        });
    }
    check_binary(gt)?;
    let (mut inter, mut sum_p, mut sum_g) = (0.0, 0.0, 0.0);
    for (&p, &g) in pred_soft.iter().zip(&gt.labels) {
        let g = g as f64;
        inter += p * g;
        sum_p += p;
        sum_g += g;
    }
    let denom = sum_p + sum_g;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 - 2.0 * inter / denom)
}

/// `10 log10(|ref|^2 / |est - ref|^2)` in dB, capped at [`SDR_CAP_DB`].
pub fn sdr(reference: &AudioClip, estimate: &AudioClip) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::ClipMismatch(format!(
            "lengths {} and {}",
            reference.len(),
            estimate.len()
        )));
    }
    let signal = reference.energy();
    if signal == 0.0 {
        return Err(Error::UndefinedSdr);
    }
    let distortion: f64 = reference
        .samples
        .iter()
        .zip(&estimate.samples)
        .map(|(r, e)| (e - r) * (e - r))
        .sum();
    if distortion == 0.0 {
        return Ok(SDR_CAP_DB);
    }
    Ok((10.0 * (signal / distortion).log10()).min(SDR_CAP_DB))
}

/// One evaluated clip. Mask scores are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub clip_id: String,
    pub f1: f64,
    pub iou: f64,
    pub dice: f64,
    pub sdr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skipped {
    pub clip_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: Option<Split>,
    pub provider: String,
    pub rows: Vec<EvalRow>,
    /// Unweighted per-clip means; `None` when every clip was skipped.
    pub means: Option<EvalRow>,
    pub skipped: Vec<Skipped>,
}

impl EvalReport {
    pub fn from_rows(split: Option<Split>, provider: &str, rows: Vec<EvalRow>, skipped: Vec<Skipped>) -> Self {
        let means = (!rows.is_empty()).then(|| {
            let n = rows.len() as f64;
            let mut m = EvalRow {
                clip_id: "mean".into(),
                f1: 0.0,
                iou: 0.0,
                dice: 0.0,
                sdr: 0.0,
            };
            for r in &rows {
                m.f1 += r.f1;
                m.iou += r.iou;
                m.dice += r.dice;
                m.sdr += r.sdr;
            }
            m.f1 /= n;
            m.iou /= n;
            m.dice /= n;
            m.sdr /= n;
            m
        });
        Self {
            split,
            provider: provider.to_string(),
            rows,
            means,
            skipped,
        }
    }

    /// Fixed-width table: one line per clip, then the mean line.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let width = self.rows.iter().map(|r| r.clip_id.len()).chain([4]).max().unwrap_or(4);
        let split = self.split.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(out, "# split: {split}  provider: {}", self.provider);
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>7}  {:>7}  {:>8}",
            "clip", "F1", "IoU", "Dice", "SDR"
        );
        for r in self.rows.iter().chain(&self.means) {
            let _ = writeln!(
                out,
                "{:<width$}  {:>7.2}  {:>7.2}  {:>7.2}  {:>8.2}",
                r.clip_id, r.f1, r.iou, r.dice, r.sdr
            );
        }
        if !self.skipped.is_empty() {
            let _ = writeln!(out, "# skipped: {}", self.skipped.len());
            for s in &self.skipped {
                let _ = writeln!(out, "#   {}: {}", s.clip_id, s.reason);
            }
        }
        out
    }

    /// Newline-delimited JSON: one record per clip, then a means record.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.rows {
            out.push_str(&serde_json::to_string(&serde_json::json!({
                "record": "clip", "clip_id": r.clip_id,
                "f1": r.f1, "iou": r.iou, "dice": r.dice, "sdr": r.sdr,
            }))?);
            out.push('\n');
        }
        if let Some(m) = &self.means {
            out.push_str(&serde_json::to_string(&serde_json::json!({
                "record": "mean", "clips": self.rows.len(), "skipped": self.skipped.len(),
                "f1": m.f1, "iou": m.iou, "dice": m.dice, "sdr": m.sdr,
            }))?);
            out.push('\n');
        }
        for s in &self.skipped {
            out.push_str(&serde_json::to_string(&serde_json::json!({
                "record": "skipped", "clip_id": s.clip_id, "reason": s.reason,
            }))?);
            out.push('\n');
        }
        Ok(out)
    }
}

fn evaluate_clip(entry: &ClipEntry, provider: &MaskProvider, params: &StftParams) -> Result<EvalRow> {
    let gt_path = entry
        .mask
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument("missing ground-truth mask".into()))?;
    let reference = entry
        .load_denoised()?
        .ok_or_else(|| Error::InvalidArgument("missing reference denoised audio".into()))?;
    let clip = entry.load_raw()?;
    let spec = stft(&clip, params)?;
    let gt = import_mask(gt_path, spec.shape(), 1)?;
    let pred = provider.mask_for(&ProviderInput {
        clip_id: &entry.id,
        spec: &spec,
        mask_path: Some(gt_path),
        clean: Some(&reference),
        n_sources: 1,
    })?;
    let scores = mask_scores(&pred, &gt)?;
    let denoised = denoise(&clip, &pred, params)?;
    Ok(EvalRow {
        clip_id: entry.id.clone(),
        f1: 100.0 * scores.f1,
        iou: 100.0 * scores.iou,
        dice: 100.0 * scores.dice,
        sdr: sdr(&reference, &denoised)?,
    })
}

/// Scores `provider` on every clip of `split` against its ground-truth mask
/// and reference denoised audio. Clips that cannot be evaluated are listed
/// under `skipped` and excluded from the means.
pub fn evaluate_split(
    manifest: &DatasetManifest,
    split: Split,
    provider: &MaskProvider,
    params: &StftParams,
    jobs: usize,
) -> Result<EvalReport> {
    params.validate()?;
    let clips = manifest.clips(split);
    if clips.is_empty() {
        return Err(Error::EmptySplit);
    }
    let results: Vec<(String, Result<EvalRow>)> = thread_pool(jobs)?.install(|| {
        clips
            .par_iter()
            .map(|c| (c.id.clone(), evaluate_clip(c, provider, params)))
            .collect()
    });
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (clip_id, res) in results {
        match res {
            Ok(row) => rows.push(row),
            Err(e) => skipped.push(Skipped {
                clip_id,
                reason: format!("{}: {e}", e.code()),
            }),
        }
    }
    Ok(EvalReport::from_rows(Some(split), provider.kind(), rows, skipped))
}
