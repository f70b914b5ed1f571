//! Subcommand implementations behind the `crowdscan` binary.
//!
//! Kept out of `main.rs` so integration tests can drive whole runs without
//! spawning processes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crowdscan::detector::{read_scores_csv, write_scores_csv, ScoreRecord, FEATURE_DIMS};
use crowdscan::evalkit::{emit_reports, labelled, roc, RocCurve};
use crowdscan::framesource::{open_sequence, pgm};
use crowdscan::pipeline::{detect, Detection};
use crowdscan::synthgen::{self, RenderedScene};
use crowdscan::{Error, PipelineConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Pipeline(#[from] Error),
}

impl CliError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Pipeline(e) => match e {
                Error::Parameter(_) | Error::Config { .. } => 2,
                Error::Ingestion { .. } | Error::Io { .. } => 3,
                Error::Format(_) | Error::Training(_) | Error::Sequencing(_) => 4,
                Error::Evaluation(_) => 5,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Defaults, then the config file, then `key=value` overrides.
pub fn resolve_config(file: Option<&Path>, overrides: &[String]) -> CliResult<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|source| Error::Ingestion {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.apply_text(&text)?;
    }
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override `{o}` is not key=value")))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn score_records(d: &Detection) -> Vec<ScoreRecord> {
    d.scores
        .iter()
        .zip(&d.labels)
        .enumerate()
        .map(|(frame, (&score, &label))| ScoreRecord { frame, score, label })
        .collect()
}

#[derive(Debug, Clone)]
pub struct DetectSummary {
    pub frames: usize,
    pub atoms: usize,
    pub seconds: f64,
}

impl DetectSummary {
    pub fn fps(&self) -> f64 {
        if self.seconds > 0.0 {
            self.frames as f64 / self.seconds
        } else {
            f64::INFINITY
        }
    }
}

pub fn cmd_detect(manifest: &Path, cfg: &PipelineConfig, out: &Path) -> CliResult<DetectSummary> {
    let start = Instant::now();
    let (frames, labels) = open_sequence(manifest)?;
    let d = detect(frames, &labels, cfg, false, |_, _| Ok(()))?;
    write_scores_csv(out, &score_records(&d))?;
    Ok(DetectSummary {
        frames: d.scores.len(),
        atoms: d.dictionary.atoms().len(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Curve name for a scores file: its stem, de-duplicated by position.
fn curve_name(path: &Path, index: usize, taken: &[(String, RocCurve)]) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| format!("curve{index}"));
    if taken.iter().any(|(n, _)| *n == stem) {
        format!("{stem}#{index}")
    } else {
        stem
    }
}

pub fn cmd_eval(scores: &[PathBuf], roc_csv: &Path, svg: &Path) -> CliResult<Vec<(String, RocCurve)>> {
    if scores.is_empty() {
        return Err(CliError::Usage("eval needs at least one scores file".into()));
    }
    let mut curves = Vec::with_capacity(scores.len());
    for (i, path) in scores.iter().enumerate() {
        let records = read_scores_csv(path)?;
        let (s, l) = labelled(&records);
        let curve = roc(&s, &l).map_err(|e| match e {
            Error::Evaluation(m) => Error::Evaluation(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let name = curve_name(path, i, &curves);
        curves.push((name, curve));
    }
    emit_reports(&curves, roc_csv, svg)?;
    Ok(curves)
}

pub fn cmd_synth(preset: &str, seed: u64, out_dir: &Path) -> CliResult<RenderedScene> {
    let mut script = synthgen::preset(preset)?;
    script.seed = seed;
    fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    Ok(synthgen::render(&script, out_dir)?)
}

/// Which intermediate products `features` writes.
#[derive(Debug, Clone, Copy, Default)]
pub struct DumpSelection {
    pub masks: bool,
    pub descriptors: bool,
}

pub const VECTORS_CSV: &str = "vectors.csv";
pub const DESCRIPTORS_CSV: &str = "descriptors.csv";
pub const TEXTURE_CSV: &str = "texture.csv";
pub const FEATURES_CSV: &str = "features.csv";
pub const SCORES_CSV: &str = "scores.csv";
pub const MASK_DIR: &str = "masks";

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| {
        CliError::from(Error::Io {
            path: path.to_path_buf(),
            source,
        })
    })
}

/// Runs the pipeline and writes per-frame intermediates into `out_dir`:
/// foreground motion vectors, texture quads, final feature vectors and
/// scores, plus optional patch descriptors and foreground masks.
pub fn cmd_features(
    manifest: &Path,
    cfg: &PipelineConfig,
    out_dir: &Path,
    sel: DumpSelection,
) -> CliResult<Detection> {
    let mk = |p: &Path| {
        fs::create_dir_all(p).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        })
    };
    mk(out_dir)?;
    let mask_dir = out_dir.join(MASK_DIR);
    if sel.masks {
        mk(&mask_dir)?;
    }
    let (frames, labels) = open_sequence(manifest)?;

    let mut vectors = String::from("frame,x,y,magnitude,direction\n");
    let mut texture = String::from("frame,contrast,correlation,energy,homogeneity\n");
    let mut descriptors = String::new();
    let d = detect(frames, &labels, cfg, sel.descriptors, |frame, out| {
        let i = frame.index();
        for v in &out.products.vectors {
            let _ = writeln!(vectors, "{i},{},{},{},{}", v.x, v.y, v.magnitude, v.direction);
        }
        let t = out.measurements.texture.to_array();
        let _ = writeln!(texture, "{i},{},{},{},{}", t[0], t[1], t[2], t[3]);
        if sel.descriptors {
            if descriptors.is_empty() {
                descriptors.push_str("frame,patch_row,patch_col");
                let bins = out.products.descriptors.first().map_or(0, |p| p.hist.len());
                for b in 0..bins {
                    let _ = write!(descriptors, ",bin{b}");
                }
                descriptors.push('\n');
            }
            for p in &out.products.descriptors {
                let _ = write!(descriptors, "{i},{},{}", p.row, p.col);
                for h in &p.hist {
                    let _ = write!(descriptors, ",{h}");
                }
                descriptors.push('\n');
            }
        }
        if sel.masks {
            pgm::write(&mask_dir.join(format!("mask_{i:04}.pgm")), &out.products.mask.to_image())?;
        }
        Ok(())
    })?;

    let mut features = String::from(
        "frame,feat_n,contrast,correlation,energy,homogeneity,dev_mean,dev_max,raw_score,score,label\n",
    );
    for (k, f) in d.features.iter().enumerate() {
        let v: [f64; FEATURE_DIMS] = f.scored();
        let _ = write!(features, "{}", f.frame_index);
        for x in v {
            let _ = write!(features, ",{x}");
        }
        let _ = writeln!(features, ",{},{},{}", d.raw_scores[k], d.scores[k], d.labels[k]);
    }

    write_text(&out_dir.join(VECTORS_CSV), &vectors)?;
    write_text(&out_dir.join(TEXTURE_CSV), &texture)?;
    write_text(&out_dir.join(FEATURES_CSV), &features)?;
    if sel.descriptors {
        write_text(&out_dir.join(DESCRIPTORS_CSV), &descriptors)?;
    }
    write_scores_csv(&out_dir.join(SCORES_CSV), &score_records(&d))?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_class() {
        let cases = [
            (CliError::Usage("x".into()), 2),
            (Error::Parameter("x".into()).into(), 2),
            (Error::Config { key: "tau".into(), message: "x".into() }.into(), 2),
            (
                Error::Io { path: "p".into(), source: std::io::Error::other("x") }.into(),
                3,
            ),
            (Error::Format("x".into()).into(), 4),
            (Error::Training("x".into()).into(), 4),
            (Error::Evaluation("x".into()).into(), 5),
        ];
        for (e, code) in cases {
            assert_eq!(e.exit_code(), code, "{e}");
        }
    }

    #[test]
    fn overrides_beat_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "tau = 0.3\ngmm_alpha = 0.02\n").unwrap();
        let cfg = resolve_config(Some(&path), &["tau=0.7".into()]).unwrap();
        assert_eq!(cfg.tau, 0.7);
        assert_eq!(cfg.gmm_alpha, 0.02);
        let err = resolve_config(None, &["tau".into()]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        match resolve_config(None, &["tau=-1".into()]).unwrap_err() {
            CliError::Pipeline(Error::Config { key, .. }) => assert_eq!(key, "tau"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn missing_config_file_is_io() {
        let err = resolve_config(Some(Path::new("/nonexistent/x.cfg")), &[]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
