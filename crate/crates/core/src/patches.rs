//! Patch grid, per-patch motion descriptors and coherent-pattern clustering.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::klt::MotionVector;

/// Regular `rows × cols` tiling of a (zero-padded) frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
    pub patch_w: usize,
    pub patch_h: usize,
}

impl PatchGrid {
    pub fn new(width: usize, height: usize, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || width == 0 || height == 0 {
            return Err(Error::param(format!(
                "cannot tile {width}x{height} into {rows}x{cols} patches"
            )));
        }
        Ok(Self {
            rows,
            cols,
            patch_w: width.div_ceil(cols),
            patch_h: height.div_ceil(rows),
        })
    }

    pub fn padded_width(&self) -> usize {
        self.cols * self.patch_w
    }

    pub fn padded_height(&self) -> usize {
        self.rows * self.patch_h
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Patch `(row, col)` containing the point; cells are half-open.
    pub fn cell_of(&self, x: f32, y: f32) -> (usize, usize) {
        let col = ((x.max(0.0) as usize) / self.patch_w).min(self.cols - 1);
        let row = ((y.max(0.0) as usize) / self.patch_h).min(self.rows - 1);
        (row, col)
    }
}

/// Buckets vectors by patch; index `row * cols + col`.
pub fn assign_to_patches(grid: &PatchGrid, vectors: &[MotionVector]) -> Vec<Vec<MotionVector>> {
    let mut buckets = vec![Vec::new(); grid.len()];
    for v in vectors {
        let (r, c) = grid.cell_of(v.x, v.y);
        buckets[r * grid.cols + c].push(*v);
    }
    buckets
}

/// Motion summary of one patch: a magnitude-weighted orientation histogram
/// plus the Gaussian moments of the member displacements.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchDescriptor {
    pub row: usize,
    pub col: usize,
    pub hist: Vec<f64>,
    pub mean_v: [f64; 2],
    /// Population covariance (divides by `count`).
    pub cov_v: [[f64; 2]; 2],
    pub count: usize,
}

impl PatchDescriptor {
    pub fn empty(row: usize, col: usize, bins: usize) -> Self {
        Self {
            row,
            col,
            hist: vec![0.0; bins],
            mean_v: [0.0; 2],
            cov_v: [[0.0; 2]; 2],
            count: 0,
        }
    }
}

pub fn orientation_bin(direction: f64, bins: usize) -> usize {
    let width = TAU / bins as f64;
    ((direction / width).floor().max(0.0) as usize).min(bins - 1)
}

pub fn build_descriptor(
    row: usize,
    col: usize,
    vectors: &[MotionVector],
    bins: usize,
) -> PatchDescriptor {
    let mut d = PatchDescriptor::empty(row, col, bins);
    if vectors.is_empty() {
        return d;
    }
    let n = vectors.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for v in vectors {
        d.hist[orientation_bin(v.direction as f64, bins)] += v.magnitude as f64;
        sx += v.dx() as f64;
        sy += v.dy() as f64;
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut cxx, mut cxy, mut cyy) = (0.0, 0.0, 0.0);
    for v in vectors {
        let (ex, ey) = (v.dx() as f64 - mx, v.dy() as f64 - my);
        cxx += ex * ex;
        cxy += ex * ey;
        cyy += ey * ey;
    }
    d.mean_v = [mx, my];
    d.cov_v = [[cxx / n, cxy / n], [cxy / n, cyy / n]];
    d.count = vectors.len();
    d
}

/// Descriptors for every patch of the grid, row-major.
pub fn build_descriptors(grid: &PatchGrid, vectors: &[MotionVector], bins: usize) -> Vec<PatchDescriptor> {
    assign_to_patches(grid, vectors)
        .iter()
        .enumerate()
        .map(|(i, members)| build_descriptor(i / grid.cols, i % grid.cols, members, bins))
        .collect()
}

/// A running-mean cluster of similar histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentPattern {
    pub model: Vec<f64>,
    pub member_count: usize,
}

impl CoherentPattern {
    pub fn seed(hist: &[f64]) -> Self {
        Self {
            model: hist.to_vec(),
            member_count: 1,
        }
    }
}

/// `M ← P/(N+1) + (1 − 1/(N+1))·M`, then `N ← N + 1`.
pub fn merge_pattern(pattern: &CoherentPattern, incoming: &[f64]) -> CoherentPattern {
    debug_assert_eq!(pattern.model.len(), incoming.len());
    let step = 1.0 / (pattern.member_count as f64 + 1.0);
    CoherentPattern {
        model: pattern
            .model
            .iter()
            .zip(incoming)
            .map(|(&m, &p)| step * p + (1.0 - step) * m)
            .collect(),
        member_count: pattern.member_count + 1,
    }
}

fn l1_normalised(h: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = h.iter().sum();
    (total > 0.0).then(|| h.iter().map(|v| v / total).collect())
}

/// Euclidean distance between the L1-normalised histograms; `None` when
/// either side has no mass.
pub fn deviation(a: &[f64], b: &[f64]) -> Option<f64> {
    let a = l1_normalised(a)?;
    let b = l1_normalised(b)?;
    Some(
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
    )
}

/// Sequence-wide store of coherent patterns.
#[derive(Debug, Clone, Default)]
pub struct PatternStore {
    patterns: Vec<CoherentPattern>,
}

impl PatternStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn patterns(&self) -> &[CoherentPattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Assigns each descriptor to its nearest pattern, merging when the
    /// deviation is within `tau` and founding a new pattern otherwise.
    ///
    /// Returns one entry per descriptor: `None` for descriptors without
    /// motion (skipped), `Some(f64::INFINITY)` when the store was empty,
    /// else the smallest deviation found before the update.
    pub fn cluster_frame(&mut self, descriptors: &[PatchDescriptor], tau: f64) -> Vec<Option<f64>> {
        assert!(tau > 0.0, "tau must be positive");
        descriptors
            .iter()
            .map(|d| {
                if d.count == 0 || d.hist.iter().sum::<f64>() <= 0.0 {
                    return None;
                }
                let nearest = self
                    .patterns
                    .iter()
                    .enumerate()
                    .filter_map(|(i, p)| deviation(&d.hist, &p.model).map(|dev| (i, dev)))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                match nearest {
                    Some((i, dev)) if dev <= tau => {
                        self.patterns[i] = merge_pattern(&self.patterns[i], &d.hist);
                        Some(dev)
                    }
                    Some((_, dev)) => {
                        self.patterns.push(CoherentPattern::seed(&d.hist));
                        Some(dev)
                    }
                    None => {
                        self.patterns.push(CoherentPattern::seed(&d.hist));
                        Some(f64::INFINITY)
                    }
                }
            })
            .collect()
    }
}
