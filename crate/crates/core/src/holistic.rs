//! Perspective-weighted foreground counting and the magnitude weight model.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Per-row weights compensating for perspective, normalised to mean 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PerspectiveMap {
    weights: Vec<f64>,
}

impl PerspectiveMap {
    /// Normalises arbitrary positive row weights to mean 1.
    pub fn from_weights(raw: Vec<f64>) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::param("perspective map has no rows"));
        }
        if let Some((y, w)) = raw.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::param(format!("perspective weight {w} at row {y} must be positive")));
        }
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        Ok(Self {
            weights: raw.into_iter().map(|w| w / mean).collect(),
        })
    }

    /// Reads one weight per line; blank lines and `#` comments are ignored.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Ingestion {
            path: path.to_path_buf(),
            source,
        })?;
        let mut raw = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            raw.push(line.parse::<f64>().map_err(|_| {
                Error::Format(format!("{} line {}: bad weight `{line}`", path.display(), n + 1))
            })?);
        }
        Self::from_weights(raw)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Linear ramp from `w_top` (row 0) to `w_bottom` (last row), mean-normalised.
pub fn linear_perspective(height: usize, w_top: f64, w_bottom: f64) -> Result<PerspectiveMap> {
    if height < 2 {
        return Err(Error::param("perspective map needs at least 2 rows"));
    }
    if !(w_top > 0.0 && w_bottom > 0.0) {
        return Err(Error::param(format!(
            "perspective end weights must be positive, got {w_top} and {w_bottom}"
        )));
    }
    let last = (height - 1) as f64;
    PerspectiveMap::from_weights(
        (0..height)
            .map(|y| w_top + (w_bottom - w_top) * y as f64 / last)
            .collect(),
    )
}

/// `Σ_y W_p(y) · N_T(y)`.
pub fn feat_n(map: &PerspectiveMap, row_counts: &[usize]) -> Result<f64> {
    if map.len() != row_counts.len() {
        return Err(Error::param(format!(
            "perspective map has {} rows, mask has {}",
            map.len(),
            row_counts.len()
        )));
    }
    Ok(map
        .weights
        .iter()
        .zip(row_counts)
        .map(|(w, &n)| w * n as f64)
        .sum())
}

/// Location and scale of training-frame motion magnitudes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightModel {
    pub mu: f64,
    /// Largest absolute deviation from `mu` seen in training.
    pub sigma_max: f64,
    /// Number of training frames.
    pub frames: usize,
}

pub fn fit_weight_model(train_magnitudes: &[f64]) -> Result<WeightModel> {
    if train_magnitudes.len() < 2 {
        return Err(Error::Training(format!(
            "weight model needs at least 2 frames, got {}",
            train_magnitudes.len()
        )));
    }
    let mu = train_magnitudes.iter().sum::<f64>() / train_magnitudes.len() as f64;
    let sigma_max = train_magnitudes
        .iter()
        .map(|d| (d - mu).abs())
        .fold(0.0, f64::max);
    if sigma_max <= 0.0 {
        return Err(Error::Training(
            "training magnitudes are all equal; weight scale would be zero".into(),
        ));
    }
    Ok(WeightModel {
        mu,
        sigma_max,
        frames: train_magnitudes.len(),
    })
}

impl WeightModel {
    /// `W_d = (d − μ) / σ_max + 1`.
    pub fn weigh(&self, d: f64) -> f64 {
        (d - self.mu) / self.sigma_max + 1.0
    }
}
