use std::f64::consts::PI;

use super::{StftParams, WindowKind};
use crate::error::{Error, Result};

pub fn make_window(params: &StftParams) -> Result<Vec<f64>> {
    let n = params.window_len;
    if n < 2 {
        return Err(Error::InvalidParams(format!("window_len must be at least 2 (got {n})")));
    }
    let window = match params.window_kind {
        WindowKind::HammingPeriodic => (0..n)
            .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos())
            .collect(),
    };
    Ok(window)
}
