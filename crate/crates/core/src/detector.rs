//! Frame feature assembly, the normal-behaviour dictionary and anomaly
//! scoring.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::holistic::WeightModel;
use crate::patches::PatchDescriptor;
use crate::texture::TextureQuad;

/// Number of scored feature dimensions.
pub const FEATURE_DIMS: usize = 7;

pub const MIN_ATOMS: usize = 10;

/// Everything the upstream stages record about one frame, before the
/// sequence-level weight model is known.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMeasurements {
    pub frame_index: usize,
    /// Mean magnitude of the foreground motion vectors (`d_i`).
    pub mean_magnitude: f64,
    /// Perspective-weighted foreground count (`FeatN_i`).
    pub weighted_count: f64,
    pub texture: TextureQuad,
    /// Mean and max patch deviation from the coherent patterns.
    pub pattern_dev: [f64; 2],
    pub descriptors: Option<Vec<PatchDescriptor>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatureVector {
    pub frame_index: usize,
    /// `W_d(i) · FeatN_i`.
    pub feat_n: f64,
    pub texture: TextureQuad,
    pub pattern_dev: [f64; 2],
    /// Full per-patch descriptors, kept only for dumps.
    pub raw: Option<Vec<PatchDescriptor>>,
}

impl FrameFeatureVector {
    pub fn scored(&self) -> [f64; FEATURE_DIMS] {
        let t = self.texture.to_array();
        [
            self.feat_n,
            t[0],
            t[1],
            t[2],
            t[3],
            self.pattern_dev[0],
            self.pattern_dev[1],
        ]
    }
}

/// Assembles frame `index`'s feature vector from the recorded measurements.
pub fn extract_features(
    measurements: &[FrameMeasurements],
    weights: &WeightModel,
    index: usize,
) -> Result<FrameFeatureVector> {
    let m = measurements
        .iter()
        .find(|m| m.frame_index == index)
        .ok_or_else(|| Error::Sequencing(format!("frame {index} has not been processed")))?;
    let feature = FrameFeatureVector {
        frame_index: index,
        feat_n: weights.weigh(m.mean_magnitude) * m.weighted_count,
        texture: m.texture,
        pattern_dev: m.pattern_dev,
        raw: m.descriptors.clone(),
    };
    if let Some(bad) = feature.scored().iter().position(|v| !v.is_finite()) {
        return Err(Error::Sequencing(format!(
            "frame {index}: feature dimension {bad} is not finite"
        )));
    }
    Ok(feature)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStat {
    pub mean: f64,
    pub scale: f64,
}

const SCALE_FLOOR: f64 = 1e-9;

/// Normalised training vectors plus the statistics that normalise them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Vec<[f64; FEATURE_DIMS]>,
    norm_stats: [NormStat; FEATURE_DIMS],
}

pub fn build_dictionary(features: &[FrameFeatureVector]) -> Result<Dictionary> {
    if features.len() < MIN_ATOMS {
        return Err(Error::Training(format!(
            "dictionary needs at least {MIN_ATOMS} training frames, got {}",
            features.len()
        )));
    }
    let rows: Vec<[f64; FEATURE_DIMS]> = features.iter().map(FrameFeatureVector::scored).collect();
    if let Some(f) = features.iter().find(|f| f.scored().iter().any(|v| !v.is_finite())) {
        return Err(Error::Training(format!(
            "training frame {} has non-finite features",
            f.frame_index
        )));
    }
    let n = rows.len() as f64;
    let mut norm_stats = [NormStat { mean: 0.0, scale: 0.0 }; FEATURE_DIMS];
    for (d, stat) in norm_stats.iter_mut().enumerate() {
        let mean = rows.iter().map(|r| r[d]).sum::<f64>() / n;
        let spread = rows.iter().map(|r| (r[d] - mean).abs()).fold(0.0, f64::max);
        *stat = NormStat {
            mean,
            scale: spread.max(SCALE_FLOOR),
        };
    }
    let atoms = rows.iter().map(|r| normalise(r, &norm_stats)).collect();
    Ok(Dictionary { atoms, norm_stats })
}

fn normalise(row: &[f64; FEATURE_DIMS], stats: &[NormStat; FEATURE_DIMS]) -> [f64; FEATURE_DIMS] {
    std::array::from_fn(|d| (row[d] - stats[d].mean) / stats[d].scale)
}

impl Dictionary {
    pub fn atoms(&self) -> &[[f64; FEATURE_DIMS]] {
        &self.atoms
    }

    pub fn norm_stats(&self) -> &[NormStat; FEATURE_DIMS] {
        &self.norm_stats
    }

    /// Distance from the normalised feature to its nearest atom.
    pub fn score(&self, feature: &FrameFeatureVector) -> f64 {
        let q = normalise(&feature.scored(), &self.norm_stats);
        self.atoms
            .iter()
            .map(|a| {
                a.iter()
                    .zip(&q)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }
}

/// Centred moving median; the window shrinks at the ends of the series.
pub fn moving_median(series: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let mut buf = Vec::with_capacity(window);
    (0..series.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(series.len());
            buf.clear();
            buf.extend_from_slice(&series[lo..hi]);
            buf.sort_by(f64::total_cmp);
            let m = buf.len();
            if m % 2 == 1 {
                buf[m / 2]
            } else {
                0.5 * (buf[m / 2 - 1] + buf[m / 2])
            }
        })
        .collect()
}

/// One row of a scores CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRecord {
    pub frame: usize,
    pub score: f64,
    /// 0 normal, 1 abnormal, -1 unlabeled.
    pub label: i8,
}

pub const SCORES_HEADER: &str = "frame,score,label";

pub fn write_scores_csv(path: &Path, records: &[ScoreRecord]) -> Result<()> {
    let mut out = String::with_capacity(24 * records.len() + 20);
    out.push_str(SCORES_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!("{},{},{}\n", r.frame, r.score, r.label));
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn parse_scores_csv(text: &str) -> Result<Vec<ScoreRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SCORES_HEADER => {}
        _ => {
            return Err(Error::Format(format!(
                "line 1: expected header `{SCORES_HEADER}`"
            )))
        }
    }
    let mut records = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Format(format!("line {}: malformed score row `{line}`", n + 1));
        let mut fields = line.split(',').map(str::trim);
        let frame = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        let score: f64 = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        let label: i8 = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        if fields.next().is_some() || !score.is_finite() || !(-1..=1).contains(&label) {
            return Err(bad());
        }
        records.push(ScoreRecord { frame, score, label });
    }
    Ok(records)
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRecord>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Ingestion {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scores_csv(&text).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(i: usize, vals: [f64; FEATURE_DIMS]) -> FrameFeatureVector {
        FrameFeatureVector {
            frame_index: i,
            feat_n: vals[0],
            texture: TextureQuad {
                contrast: vals[1],
                correlation: vals[2],
                energy: vals[3],
                homogeneity: vals[4],
            },
            pattern_dev: [vals[5], vals[6]],
            raw: None,
        }
    }

    fn training() -> Vec<FrameFeatureVector> {
        (0..20)
            .map(|i| {
                let t = i as f64;
                fv(i, [100.0 + t, 2.0 + 0.1 * t, -0.5, 0.3, 0.6 + 0.01 * t, 0.1 * (t % 3.0), 0.2])
            })
            .collect()
    }

    #[test]
    fn training_frames_score_zero() {
        let train = training();
        let dict = build_dictionary(&train).unwrap();
        for f in &train {
            assert_eq!(dict.score(f), 0.0);
        }
    }

    #[test]
    fn single_axis_offset_scales_by_norm() {
        let train = training();
        let dict = build_dictionary(&train).unwrap();
        let scale = dict.norm_stats()[0].scale;
        // pushed past the last atom so that atom stays the nearest
        let mut probe = train[19].clone();
        probe.feat_n += 3.0;
        assert!((dict.score(&probe) - 3.0 / scale).abs() < 1e-12);
    }

    #[test]
    fn degenerate_training_hits_the_scale_floor() {
        let same: Vec<_> = (0..50).map(|i| fv(i, [1.0, 2.0, 3.0, 0.5, 0.5, 0.0, 0.0])).collect();
        let dict = build_dictionary(&same).unwrap();
        assert!(dict.atoms().iter().all(|a| a.iter().all(|&v| v == 0.0)));
        assert!(dict.norm_stats().iter().all(|s| s.scale == 1e-9));
    }

    #[test]
    fn atom_count_threshold() {
        let train = training();
        assert!(build_dictionary(&train[..10]).is_ok());
        assert!(matches!(build_dictionary(&train[..9]), Err(Error::Training(_))));
    }

    #[test]
    fn non_finite_training_is_rejected() {
        let mut train = training();
        train[3].pattern_dev[1] = f64::NAN;
        assert!(build_dictionary(&train).is_err());
    }

    #[test]
    fn extraction_requires_processed_frame() {
        let wm = crate::holistic::fit_weight_model(&[1.0, 3.0]).unwrap();
        let m = FrameMeasurements {
            frame_index: 0,
            mean_magnitude: 3.0,
            weighted_count: 10.0,
            texture: TextureQuad::default(),
            pattern_dev: [0.0, 0.0],
            descriptors: None,
        };
        let f = extract_features(std::slice::from_ref(&m), &wm, 0).unwrap();
        assert_eq!(f.feat_n, 20.0);
        assert!(matches!(extract_features(&[m], &wm, 1), Err(Error::Sequencing(_))));
    }

    #[test]
    fn median_filter() {
        assert_eq!(moving_median(&[1.0, 9.0, 2.0, 8.0, 3.0], 5), vec![2.0, 5.0, 3.0, 5.5, 3.0]);
        assert_eq!(moving_median(&[], 5), Vec::<f64>::new());
        assert_eq!(moving_median(&[4.0, 1.0], 1), vec![4.0, 1.0]);
    }

    #[test]
    fn scores_csv_round_trip_and_errors() {
        let records = vec![
            ScoreRecord { frame: 0, score: 0.0, label: 0 },
            ScoreRecord { frame: 1, score: 0.1 + 0.2, label: 1 },
            ScoreRecord { frame: 2, score: 1e-300, label: -1 },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_scores_csv(&p, &records).unwrap();
        assert_eq!(read_scores_csv(&p).unwrap(), records);

        let err = parse_scores_csv("frame,score,label\n0,1.0,0\n1,abc,1\n").unwrap_err();
        assert!(err.to_string().contains("line 3"));
        assert!(parse_scores_csv("nope\n").is_err());
        assert!(parse_scores_csv("frame,score,label\n0,1.0,2\n").is_err());
    }
}
