//! Per-frame stage wiring and whole-sequence detection.

use std::ops::RangeInclusive;

use crate::bgmodel::{count_foreground_rows, filter_vectors, BackgroundModel, ForegroundMask};
use crate::config::PipelineConfig;
use crate::detector::{
    build_dictionary, extract_features, moving_median, Dictionary, FrameFeatureVector,
    FrameMeasurements,
};
use crate::error::{Error, Result};
use crate::framesource::{Frame, LabelTrack};
use crate::grid::Plane;
use crate::holistic::{feat_n, fit_weight_model, linear_perspective, PerspectiveMap, WeightModel};
use crate::klt::{build_pyramid, detect_corners_masked, track, MotionVector, Pyramid};
use crate::patches::{build_descriptors, PatchDescriptor, PatchGrid, PatternStore};
use crate::texture::{foreground_fractions, pad_frame, patch_quads, weighted_quad, TextureQuad};

/// Deviation reported for a patch that founded a pattern in an empty store:
/// the largest distance two L1-normalised histograms can have.
pub const FOUNDING_DEVIATION: f64 = std::f64::consts::SQRT_2;

/// Intermediate products of one frame, for dumps and tests.
#[derive(Debug, Clone)]
pub struct FrameProducts {
    pub mask: ForegroundMask,
    /// Foreground-filtered motion vectors from the previous frame into this one.
    pub vectors: Vec<MotionVector>,
    pub descriptors: Vec<PatchDescriptor>,
    pub deviations: Vec<Option<f64>>,
    pub quads: Vec<TextureQuad>,
}

#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub measurements: FrameMeasurements,
    pub products: FrameProducts,
}

/// Stateful per-stream pipeline: background model, previous pyramid and
/// the coherent-pattern store.
pub struct FramePipeline {
    config: PipelineConfig,
    grid: PatchGrid,
    perspective: PerspectiveMap,
    background: BackgroundModel,
    patterns: PatternStore,
    previous: Option<(Plane, Pyramid)>,
    next_index: usize,
    dims: (usize, usize),
    keep_descriptors: bool,
}

impl FramePipeline {
    pub fn new(config: &PipelineConfig, width: usize, height: usize) -> Result<Self> {
        config.validate()?;
        let perspective = match &config.perspective_file {
            Some(path) => PerspectiveMap::load(path)?,
            None => linear_perspective(height, config.perspective_top, config.perspective_bottom)?,
        };
        if perspective.len() != height {
            return Err(Error::Config {
                key: "perspective_file".into(),
                message: format!("{} weights for a {height}-row frame", perspective.len()),
            });
        }
        Ok(Self {
            grid: PatchGrid::new(width, height, config.patch_rows, config.patch_cols)?,
            perspective,
            background: BackgroundModel::new(config.gmm())?,
            patterns: PatternStore::new(),
            previous: None,
            next_index: 0,
            dims: (width, height),
            keep_descriptors: false,
            config: config.clone(),
        })
    }

    /// Keep the full descriptor tensor in each frame's measurements.
    pub fn keep_descriptors(mut self, keep: bool) -> Self {
        self.keep_descriptors = keep;
        self
    }

    pub fn grid(&self) -> &PatchGrid {
        &self.grid
    }

    pub fn patterns(&self) -> &PatternStore {
        &self.patterns
    }

    pub fn process(&mut self, frame: &Frame) -> Result<FrameOutput> {
        if frame.index() != self.next_index {
            return Err(Error::Sequencing(format!(
                "expected frame {}, got frame {}",
                self.next_index,
                frame.index()
            )));
        }
        if (frame.width(), frame.height()) != self.dims {
            return Err(Error::Format(format!(
                "frame {} is {}x{}, pipeline was set up for {}x{}",
                frame.index(),
                frame.width(),
                frame.height(),
                self.dims.0,
                self.dims.1
            )));
        }
        let cfg = &self.config;
        let mask = self.background.update_and_classify(frame.pixels())?;

        let plane = frame.to_grayscale_f32();
        let pyramid = build_pyramid(&plane, cfg.klt_levels)?;
        let vectors = match &self.previous {
            Some((prev_plane, prev_pyramid)) if mask.population() > 0 => {
                let corners = detect_corners_masked(prev_plane, &cfg.corners(), mask.bits());
                let tracked: Vec<MotionVector> = track(prev_pyramid, &pyramid, &corners, &cfg.lk())?
                    .into_iter()
                    .flatten()
                    .collect();
                filter_vectors(&mask, &tracked)
            }
            _ => Vec::new(),
        };
        self.previous = Some((plane, pyramid));

        let mean_magnitude = if vectors.is_empty() {
            0.0
        } else {
            vectors.iter().map(|v| v.magnitude as f64).sum::<f64>() / vectors.len() as f64
        };
        let weighted_count = feat_n(&self.perspective, &count_foreground_rows(&mask))?;

        let descriptors = build_descriptors(&self.grid, &vectors, cfg.hist_bins);
        let deviations = self.patterns.cluster_frame(&descriptors, cfg.tau);
        let devs: Vec<f64> = deviations
            .iter()
            .flatten()
            .map(|&d| if d.is_finite() { d } else { FOUNDING_DEVIATION })
            .collect();
        let pattern_dev = if devs.is_empty() {
            [0.0, 0.0]
        } else {
            [
                devs.iter().sum::<f64>() / devs.len() as f64,
                devs.iter().copied().fold(0.0, f64::max),
            ]
        };

        let padded = pad_frame(frame.pixels(), &self.grid);
        let quads = patch_quads(&padded, &self.grid, &cfg.glcm())?;
        let texture = weighted_quad(&quads, &foreground_fractions(&mask, &self.grid));

        self.next_index += 1;
        Ok(FrameOutput {
            measurements: FrameMeasurements {
                frame_index: frame.index(),
                mean_magnitude,
                weighted_count,
                texture,
                pattern_dev,
                descriptors: self.keep_descriptors.then(|| descriptors.clone()),
            },
            products: FrameProducts {
                mask,
                vectors,
                descriptors,
                deviations,
                quads,
            },
        })
    }
}

/// Result of a full detection run.
#[derive(Debug, Clone)]
pub struct Detection {
    pub features: Vec<FrameFeatureVector>,
    pub raw_scores: Vec<f64>,
    /// Raw scores after optional median smoothing.
    pub scores: Vec<f64>,
    /// Per-frame labels: 0 normal, 1 abnormal, -1 unlabeled.
    pub labels: Vec<i8>,
    pub training: RangeInclusive<usize>,
    pub weight_model: WeightModel,
    pub dictionary: Dictionary,
}

/// Frames used to fit the weight model and the dictionary: the first normal
/// span, capped at `train_frames` when that is non-zero.
pub fn training_range(
    labels: &LabelTrack,
    n_frames: usize,
    train_frames: usize,
) -> Result<RangeInclusive<usize>> {
    let span = labels.first_normal_span().ok_or_else(|| Error::Config {
        key: "label".into(),
        message: "manifest has no normal span to train on".into(),
    })?;
    if span.start >= n_frames {
        return Err(Error::Config {
            key: "label".into(),
            message: format!("normal span starts at {} but the sequence has {n_frames} frames", span.start),
        });
    }
    let mut end = span.end.min(n_frames - 1);
    if train_frames > 0 {
        end = end.min(span.start + train_frames - 1);
    }
    Ok(span.start..=end)
}

/// Weight model, feature assembly, dictionary and scoring over already
/// measured frames.
pub fn score_measurements(
    measurements: &[FrameMeasurements],
    labels: &LabelTrack,
    config: &PipelineConfig,
) -> Result<Detection> {
    let n = measurements.len();
    let training = training_range(labels, n, config.train_frames)?;
    let train_d: Vec<f64> = measurements[training.clone()]
        .iter()
        .map(|m| m.mean_magnitude)
        .collect();
    let weight_model = fit_weight_model(&train_d)?;
    let features = (0..n)
        .map(|i| extract_features(measurements, &weight_model, measurements[i].frame_index))
        .collect::<Result<Vec<_>>>()?;
    let dictionary = build_dictionary(&features[training.clone()])?;
    let raw_scores: Vec<f64> = features.iter().map(|f| dictionary.score(f)).collect();
    let scores = if config.smoothing {
        moving_median(&raw_scores, config.smoothing_window)
    } else {
        raw_scores.clone()
    };
    Ok(Detection {
        features,
        raw_scores,
        scores,
        labels: labels.frame_labels(n),
        training,
        weight_model,
        dictionary,
    })
}

/// Runs every stage over a frame sequence and scores it.
///
/// `observe` sees each frame's intermediate products as they are produced.
pub fn detect<I>(
    frames: I,
    labels: &LabelTrack,
    config: &PipelineConfig,
    keep_descriptors: bool,
    mut observe: impl FnMut(&Frame, &FrameOutput) -> Result<()>,
) -> Result<Detection>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    let mut pipeline: Option<FramePipeline> = None;
    let mut measurements = Vec::new();
    for frame in frames {
        let frame = frame?;
        let stage = match pipeline.as_mut() {
            Some(p) => p,
            None => pipeline.insert(
                FramePipeline::new(config, frame.width(), frame.height())?
                    .keep_descriptors(keep_descriptors),
            ),
        };
        let out = stage.process(&frame)?;
        observe(&frame, &out)?;
        measurements.push(out.measurements);
    }
    if measurements.is_empty() {
        return Err(Error::Format("sequence has no frames".into()));
    }
    score_measurements(&measurements, labels, config)
}
