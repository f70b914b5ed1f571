//! Flat `key = value` pipeline configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bgmodel::GmmParams;
use crate::error::{Error, Result};
use crate::klt::{CornerParams, LkParams};
use crate::texture::GlcmParams;

/// Every tunable of the detection pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub patch_rows: usize,
    pub patch_cols: usize,
    pub hist_bins: usize,
    pub tau: f64,
    pub gmm_components: usize,
    pub gmm_alpha: f32,
    pub gmm_bg_ratio: f32,
    pub gmm_cleanup: bool,
    pub klt_max_corners: usize,
    pub klt_quality: f32,
    pub klt_min_distance: f32,
    pub klt_window: usize,
    pub klt_levels: usize,
    pub klt_iters: usize,
    pub klt_epsilon: f32,
    pub perspective_top: f64,
    pub perspective_bottom: f64,
    /// Overrides the linear ramp when set.
    pub perspective_file: Option<PathBuf>,
    pub glcm_levels: usize,
    pub glcm_offset_x: isize,
    pub glcm_offset_y: isize,
    pub normalized_correlation: bool,
    /// Cap on training frames taken from the first normal span; 0 = whole span.
    pub train_frames: usize,
    pub smoothing: bool,
    pub smoothing_window: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let gmm = GmmParams::default();
        let corners = CornerParams::default();
        let lk = LkParams::default();
        let glcm = GlcmParams::default();
        Self {
            patch_rows: 30,
            patch_cols: 40,
            hist_bins: 16,
            tau: 0.5,
            gmm_components: gmm.components,
            gmm_alpha: gmm.alpha,
            gmm_bg_ratio: gmm.bg_ratio,
            gmm_cleanup: gmm.cleanup,
            klt_max_corners: corners.max_corners,
            klt_quality: corners.quality,
            klt_min_distance: corners.min_distance,
            klt_window: lk.window,
            klt_levels: 3,
            klt_iters: lk.max_iters,
            klt_epsilon: lk.epsilon,
            perspective_top: 0.5,
            perspective_bottom: 1.5,
            perspective_file: None,
            glcm_levels: glcm.levels,
            glcm_offset_x: glcm.offset.0,
            glcm_offset_y: glcm.offset.1,
            normalized_correlation: glcm.normalized_correlation,
            train_frames: 0,
            smoothing: true,
            smoothing_window: 5,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        key: key.to_string(),
        message: format!("cannot parse `{value}`"),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config {
            key: key.to_string(),
            message: format!("expected true/false, got `{value}`"),
        }),
    }
}

fn reject(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

impl PipelineConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "patch_rows" => self.patch_rows = parse(key, v)?,
            "patch_cols" => self.patch_cols = parse(key, v)?,
            "hist_bins" => self.hist_bins = parse(key, v)?,
            "tau" => self.tau = parse(key, v)?,
            "gmm_components" => self.gmm_components = parse(key, v)?,
            "gmm_alpha" => self.gmm_alpha = parse(key, v)?,
            "gmm_bg_ratio" => self.gmm_bg_ratio = parse(key, v)?,
            "gmm_cleanup" => self.gmm_cleanup = parse_bool(key, v)?,
            "klt_max_corners" => self.klt_max_corners = parse(key, v)?,
            "klt_quality" => self.klt_quality = parse(key, v)?,
            "klt_min_distance" => self.klt_min_distance = parse(key, v)?,
            "klt_window" => self.klt_window = parse(key, v)?,
            "klt_levels" => self.klt_levels = parse(key, v)?,
            "klt_iters" => self.klt_iters = parse(key, v)?,
            "klt_epsilon" => self.klt_epsilon = parse(key, v)?,
            "perspective_top" => self.perspective_top = parse(key, v)?,
            "perspective_bottom" => self.perspective_bottom = parse(key, v)?,
            "perspective_file" => {
                self.perspective_file = (!v.is_empty()).then(|| PathBuf::from(v));
            }
            "glcm_levels" => self.glcm_levels = parse(key, v)?,
            "glcm_offset_x" => self.glcm_offset_x = parse(key, v)?,
            "glcm_offset_y" => self.glcm_offset_y = parse(key, v)?,
            "normalized_correlation" => self.normalized_correlation = parse_bool(key, v)?,
            "train_frames" => self.train_frames = parse(key, v)?,
            "smoothing" => self.smoothing = parse_bool(key, v)?,
            "smoothing_window" => self.smoothing_window = parse(key, v)?,
            other => return Err(reject(other, "unknown key")),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                reject(line, format!("line {}: expected `key = value`", n + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Ingestion {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, ok: bool| if ok { Ok(()) } else { Err(reject(key, "must be positive")) };
        positive("patch_rows", self.patch_rows > 0)?;
        positive("patch_cols", self.patch_cols > 0)?;
        positive("hist_bins", self.hist_bins > 0)?;
        positive("tau", self.tau > 0.0 && self.tau.is_finite())?;
        positive("gmm_components", self.gmm_components > 0)?;
        if !(self.gmm_alpha > 0.0 && self.gmm_alpha < 1.0) {
            return Err(reject("gmm_alpha", "must lie in (0, 1)"));
        }
        if !(self.gmm_bg_ratio > 0.0 && self.gmm_bg_ratio < 1.0) {
            return Err(reject("gmm_bg_ratio", "must lie in (0, 1)"));
        }
        if !(self.klt_quality > 0.0 && self.klt_quality <= 1.0) {
            return Err(reject("klt_quality", "must lie in (0, 1]"));
        }
        if !(self.klt_min_distance >= 1.0) {
            return Err(reject("klt_min_distance", "must be at least 1"));
        }
        positive("klt_window", self.klt_window > 0)?;
        positive("klt_levels", self.klt_levels > 0)?;
        positive("klt_iters", self.klt_iters > 0)?;
        positive("klt_epsilon", self.klt_epsilon > 0.0)?;
        positive("perspective_top", self.perspective_top > 0.0)?;
        positive("perspective_bottom", self.perspective_bottom > 0.0)?;
        if !(2..=256).contains(&self.glcm_levels) {
            return Err(reject("glcm_levels", "must lie in 2..=256"));
        }
        if (self.glcm_offset_x, self.glcm_offset_y) == (0, 0) {
            return Err(reject("glcm_offset_x", "GLCM offset must be non-zero"));
        }
        positive("smoothing_window", self.smoothing_window > 0)?;
        Ok(())
    }

    /// Canonical dump; loading it back reproduces this config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("patch_rows", self.patch_rows.to_string());
        kv("patch_cols", self.patch_cols.to_string());
        kv("hist_bins", self.hist_bins.to_string());
        kv("tau", self.tau.to_string());
        kv("gmm_components", self.gmm_components.to_string());
        kv("gmm_alpha", self.gmm_alpha.to_string());
        kv("gmm_bg_ratio", self.gmm_bg_ratio.to_string());
        kv("gmm_cleanup", self.gmm_cleanup.to_string());
        kv("klt_max_corners", self.klt_max_corners.to_string());
        kv("klt_quality", self.klt_quality.to_string());
        kv("klt_min_distance", self.klt_min_distance.to_string());
        kv("klt_window", self.klt_window.to_string());
        kv("klt_levels", self.klt_levels.to_string());
        kv("klt_iters", self.klt_iters.to_string());
        kv("klt_epsilon", self.klt_epsilon.to_string());
        kv("perspective_top", self.perspective_top.to_string());
        kv("perspective_bottom", self.perspective_bottom.to_string());
        kv(
            "perspective_file",
            self.perspective_file
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
        );
        kv("glcm_levels", self.glcm_levels.to_string());
        kv("glcm_offset_x", self.glcm_offset_x.to_string());
        kv("glcm_offset_y", self.glcm_offset_y.to_string());
        kv("normalized_correlation", self.normalized_correlation.to_string());
        kv("train_frames", self.train_frames.to_string());
        kv("smoothing", self.smoothing.to_string());
        kv("smoothing_window", self.smoothing_window.to_string());
        s
    }

    pub fn gmm(&self) -> GmmParams {
        GmmParams {
            components: self.gmm_components,
            alpha: self.gmm_alpha,
            bg_ratio: self.gmm_bg_ratio,
            cleanup: self.gmm_cleanup,
            ..GmmParams::default()
        }
    }

    pub fn corners(&self) -> CornerParams {
        CornerParams {
            max_corners: self.klt_max_corners,
            quality: self.klt_quality,
            min_distance: self.klt_min_distance,
        }
    }

    pub fn lk(&self) -> LkParams {
        LkParams {
            window: self.klt_window,
            max_iters: self.klt_iters,
            epsilon: self.klt_epsilon,
        }
    }

    pub fn glcm(&self) -> GlcmParams {
        GlcmParams {
            levels: self.glcm_levels,
            offset: (self.glcm_offset_x, self.glcm_offset_y),
            normalized_correlation: self.normalized_correlation,
        }
    }
}
