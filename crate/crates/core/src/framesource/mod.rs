//! Frame ingestion: PGM/Y4M decoding, sequence manifests and ground-truth
//! label tracks.

pub mod pgm;
pub mod y4m;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::{Grid, Plane};

/// Smallest side accepted for a frame.
pub const MIN_FRAME_SIDE: usize = 16;

/// One grayscale frame of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    index: usize,
    pixels: Grid<u8>,
}

impl Frame {
    pub fn new(index: usize, pixels: Grid<u8>) -> Result<Self> {
        if pixels.width() < MIN_FRAME_SIDE || pixels.height() < MIN_FRAME_SIDE {
            return Err(Error::Format(format!(
                "frame {index} is {}x{}, minimum is {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}",
                pixels.width(),
                pixels.height()
            )));
        }
        Ok(Self { index, pixels })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    pub fn pixels(&self) -> &Grid<u8> {
        &self.pixels
    }

    /// Intensities rescaled to `[0, 1]`.
    pub fn to_grayscale_f32(&self) -> Plane {
        self.pixels.map(|p| p as f32 / 255.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpanClass {
    Normal,
    Abnormal,
}

impl SpanClass {
    pub fn as_label(self) -> i8 {
        match self {
            SpanClass::Normal => 0,
            SpanClass::Abnormal => 1,
        }
    }
}

impl fmt::Display for SpanClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpanClass::Normal => "normal",
            SpanClass::Abnormal => "abnormal",
        })
    }
}

impl FromStr for SpanClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(SpanClass::Normal),
            "abnormal" => Ok(SpanClass::Abnormal),
            other => Err(Error::Format(format!("unknown label class `{other}`"))),
        }
    }
}

/// Inclusive frame range with a class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelSpan {
    pub start: usize,
    pub end: usize,
    pub class: SpanClass,
}

/// Sorted, non-overlapping ground-truth spans.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelTrack {
    spans: Vec<LabelSpan>,
}

impl LabelTrack {
    pub fn new(spans: Vec<LabelSpan>) -> Result<Self> {
        let mut track = LabelTrack::default();
        for span in spans {
            track.push(span)?;
        }
        Ok(track)
    }

    /// Appends a span; it must start after the previous span ends.
    pub fn push(&mut self, span: LabelSpan) -> Result<()> {
        if span.end < span.start {
            return Err(Error::Format(format!(
                "label span {}..{} ends before it starts",
                span.start, span.end
            )));
        }
        if let Some(last) = self.spans.last() {
            if span.start <= last.end {
                return Err(Error::Format(format!(
                    "label span {}..{} overlaps or precedes {}..{}",
                    span.start, span.end, last.start, last.end
                )));
            }
        }
        self.spans.push(span);
        Ok(())
    }

    pub fn spans(&self) -> &[LabelSpan] {
        &self.spans
    }

    pub fn class_of(&self, frame: usize) -> Option<SpanClass> {
        let idx = self.spans.partition_point(|s| s.end < frame);
        self.spans
            .get(idx)
            .filter(|s| s.start <= frame)
            .map(|s| s.class)
    }

    /// Per-frame labels: 0 normal, 1 abnormal, -1 unlabeled.
    pub fn frame_labels(&self, n_frames: usize) -> Vec<i8> {
        (0..n_frames)
            .map(|i| self.class_of(i).map_or(-1, SpanClass::as_label))
            .collect()
    }

    pub fn first_normal_span(&self) -> Option<LabelSpan> {
        self.spans
            .iter()
            .copied()
            .find(|s| s.class == SpanClass::Normal)
    }
}

/// Parsed sequence manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    /// `frames` directive arguments in file order.
    pub frames: Vec<String>,
    pub fps: Option<u32>,
    pub labels: LabelTrack,
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut manifest = Manifest::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at = |msg: String| Error::Format(format!("manifest line {}: {msg}", lineno + 1));
            let mut words = line.split_whitespace();
            match words.next() {
                Some("frames") => {
                    let rest = line["frames".len()..].trim();
                    if rest.is_empty() {
                        return Err(at("`frames` needs a path or glob".into()));
                    }
                    manifest.frames.push(rest.to_string());
                }
                Some("fps") => {
                    let fps = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| at("`fps` needs an integer".into()))?;
                    manifest.fps = Some(fps);
                }
                Some("label") => {
                    let parts: Vec<&str> = words.collect();
                    let [start, end, class] = parts[..] else {
                        return Err(at("expected `label <start> <end> <normal|abnormal>`".into()));
                    };
                    let start = start
                        .parse()
                        .map_err(|_| at(format!("bad start frame `{start}`")))?;
                    let end = end.parse().map_err(|_| at(format!("bad end frame `{end}`")))?;
                    let class = class.parse().map_err(|e: Error| at(e.to_string()))?;
                    manifest
                        .labels
                        .push(LabelSpan { start, end, class })
                        .map_err(|e| at(e.to_string()))?;
                }
                Some(other) => return Err(at(format!("unknown directive `{other}`"))),
                None => unreachable!(),
            }
        }
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Ingestion {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}

impl fmt::Display for Manifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for frames in &self.frames {
            writeln!(f, "frames {frames}")?;
        }
        if let Some(fps) = self.fps {
            writeln!(f, "fps {fps}")?;
        }
        for s in self.labels.spans() {
            writeln!(f, "label {} {} {}", s.start, s.end, s.class)?;
        }
        Ok(())
    }
}

enum Source {
    Pgm(PathBuf),
    Y4m(PathBuf),
}

fn resolve_sources(base: &Path, directive: &str) -> Result<Vec<Source>> {
    let target = base.join(directive);
    if target.is_dir() {
        let entries = fs::read_dir(&target).map_err(|source| Error::Ingestion {
            path: target.clone(),
            source,
        })?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("pgm")))
            .collect();
        files.sort();
        return Ok(files.into_iter().map(Source::Pgm).collect());
    }
    if target.is_file() {
        let is_y4m = target
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("y4m"));
        return Ok(vec![if is_y4m {
            Source::Y4m(target)
        } else {
            Source::Pgm(target)
        }]);
    }
    let pattern = target.to_string_lossy().into_owned();
    let paths = glob::glob(&pattern)
        .map_err(|e| Error::Format(format!("bad frames pattern `{directive}`: {e}")))?;
    let mut files = Vec::new();
    for entry in paths {
        let path = entry.map_err(|e| Error::Ingestion {
            path: e.path().to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })?;
        files.push(path);
    }
    if files.is_empty() {
        return Err(Error::Ingestion {
            path: target,
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no frames match"),
        });
    }
    files.sort();
    Ok(files.into_iter().map(Source::Pgm).collect())
}

/// Lazily decoded frames of one sequence, in index order.
pub struct FrameSequence {
    sources: std::vec::IntoIter<Source>,
    current_y4m: Option<y4m::Y4mReader>,
    next_index: usize,
    dims: Option<(usize, usize)>,
    failed: bool,
}

impl FrameSequence {
    fn new(sources: Vec<Source>) -> Self {
        Self {
            sources: sources.into_iter(),
            current_y4m: None,
            next_index: 0,
            dims: None,
            failed: false,
        }
    }

    fn next_pixels(&mut self) -> Option<Result<Grid<u8>>> {
        loop {
            if let Some(reader) = self.current_y4m.as_mut() {
                match reader.next_luma() {
                    Ok(Some(luma)) => return Some(Ok(luma)),
                    Ok(None) => self.current_y4m = None,
                    Err(e) => return Some(Err(e)),
                }
            }
            match self.sources.next()? {
                Source::Pgm(path) => return Some(pgm::read(&path)),
                Source::Y4m(path) => match y4m::Y4mReader::open(&path) {
                    Ok(r) => self.current_y4m = Some(r),
                    Err(e) => return Some(Err(e)),
                },
            }
        }
    }
}

impl Iterator for FrameSequence {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let result = self.next_pixels()?.and_then(|pixels| {
            let index = self.next_index;
            let dims = (pixels.width(), pixels.height());
            match self.dims {
                Some(expected) if expected != dims => Err(Error::Format(format!(
                    "frame {index} is {}x{}, sequence is {}x{}",
                    dims.0, dims.1, expected.0, expected.1
                ))),
                _ => {
                    self.dims = Some(dims);
                    Frame::new(index, pixels)
                }
            }
        });
        match &result {
            Ok(_) => self.next_index += 1,
            Err(_) => self.failed = true,
        }
        Some(result)
    }
}

/// Opens the sequence described by a manifest file.
///
/// Every PGM reference is resolved up front so a missing file fails here,
/// naming the path; decoding stays lazy.
pub fn open_sequence(manifest_path: &Path) -> Result<(FrameSequence, LabelTrack)> {
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut sources = Vec::new();
    for directive in &manifest.frames {
        sources.extend(resolve_sources(base, directive)?);
    }
    if sources.is_empty() {
        return Err(Error::Format(format!(
            "{}: manifest lists no frames",
            manifest_path.display()
        )));
    }
    Ok((FrameSequence::new(sources), manifest.labels))
}
