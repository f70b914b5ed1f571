//! Gray-level co-occurrence matrices and the contrast / correlation /
//! energy / homogeneity quadruple, computed per patch.

use crate::bgmodel::ForegroundMask;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::patches::PatchGrid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcmParams {
    pub levels: usize,
    pub offset: (isize, isize),
    /// Divide the correlation term by `σ_i σ_j`.
    pub normalized_correlation: bool,
}

impl Default for GlcmParams {
    fn default() -> Self {
        Self {
            levels: 8,
            offset: (1, 0),
            normalized_correlation: false,
        }
    }
}

impl GlcmParams {
    pub fn validate(&self) -> Result<()> {
        if !(2..=256).contains(&self.levels) {
            return Err(Error::param(format!("GLCM levels {} not in 2..=256", self.levels)));
        }
        if self.offset == (0, 0) {
            return Err(Error::param("GLCM offset must be non-zero"));
        }
        Ok(())
    }
}

/// Normalised symmetric co-occurrence matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    pub levels: usize,
    /// Row-major `levels × levels` probabilities.
    pub p: Vec<f64>,
    pub mu_i: f64,
    pub mu_j: f64,
}

impl Glcm {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TextureQuad {
    pub contrast: f64,
    pub correlation: f64,
    pub energy: f64,
    pub homogeneity: f64,
}

impl TextureQuad {
    pub fn to_array(self) -> [f64; 4] {
        [self.contrast, self.correlation, self.energy, self.homogeneity]
    }
}

#[inline]
pub fn quantize(pixel: u8, levels: usize) -> usize {
    (pixel as usize * levels / 256).min(levels - 1)
}

pub fn glcm(patch: &Grid<u8>, levels: usize, offset: (isize, isize)) -> Result<Glcm> {
    glcm_region(patch, 0, 0, patch.width(), patch.height(), levels, offset)
}

/// GLCM of the `w × h` window at `(x0, y0)`; only pairs with both pixels
/// inside the window count.
pub fn glcm_region(
    image: &Grid<u8>,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    levels: usize,
    offset: (isize, isize),
) -> Result<Glcm> {
    GlcmParams {
        levels,
        offset,
        normalized_correlation: false,
    }
    .validate()?;
    let (dx, dy) = offset;
    let xs = 0.max(-dx)..(w as isize).min(w as isize - dx);
    let ys = 0.max(-dy)..(h as isize).min(h as isize - dy);
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::param(format!(
            "{w}x{h} patch has no pixel pairs at offset ({dx},{dy})"
        )));
    }
    let mut counts = vec![0u32; levels * levels];
    let mut pairs = 0u32;
    for y in ys {
        for x in xs.clone() {
            let a = quantize(image.get(x0 + x as usize, y0 + y as usize), levels);
            let b = quantize(
                image.get(x0 + (x + dx) as usize, y0 + (y + dy) as usize),
                levels,
            );
            counts[a * levels + b] += 1;
            counts[b * levels + a] += 1;
            pairs += 2;
        }
    }
    let total = pairs as f64;
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    let (mut mu_i, mut mu_j) = (0.0, 0.0);
    for i in 0..levels {
        for j in 0..levels {
            let v = p[i * levels + j];
            mu_i += i as f64 * v;
            mu_j += j as f64 * v;
        }
    }
    Ok(Glcm {
        levels,
        p,
        mu_i,
        mu_j,
    })
}

pub fn texture_quad(g: &Glcm, normalized_correlation: bool) -> TextureQuad {
    let mut q = TextureQuad::default();
    let (mut var_i, mut var_j) = (0.0, 0.0);
    for i in 0..g.levels {
        for j in 0..g.levels {
            let v = g.at(i, j);
            if v == 0.0 {
                continue;
            }
            let diff = i.abs_diff(j) as f64;
            let (ei, ej) = (i as f64 - g.mu_i, j as f64 - g.mu_j);
            q.contrast += v * diff * diff;
            q.correlation += v * ei * ej;
            q.energy += v * v;
            q.homogeneity += v / (1.0 + diff);
            var_i += v * ei * ei;
            var_j += v * ej * ej;
        }
    }
    if normalized_correlation {
        let scale = (var_i * var_j).sqrt();
        // a single-level patch is perfectly (if trivially) correlated
        q.correlation = if scale > 0.0 { q.correlation / scale } else { 1.0 };
    }
    q
}

/// Appends zero rows and columns so the patch grid tiles exactly.
pub fn pad_frame(frame: &Grid<u8>, grid: &PatchGrid) -> Grid<u8> {
    let (pw, ph) = (grid.padded_width(), grid.padded_height());
    if (pw, ph) == (frame.width(), frame.height()) {
        return frame.clone();
    }
    Grid::from_fn(pw, ph, |x, y| {
        if x < frame.width() && y < frame.height() {
            frame.get(x, y)
        } else {
            0
        }
    })
}

/// One quadruple per patch of an already padded frame, row-major.
pub fn patch_quads(padded: &Grid<u8>, grid: &PatchGrid, params: &GlcmParams) -> Result<Vec<TextureQuad>> {
    let mut quads = Vec::with_capacity(grid.len());
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let g = glcm_region(
                padded,
                c * grid.patch_w,
                r * grid.patch_h,
                grid.patch_w,
                grid.patch_h,
                params.levels,
                params.offset,
            )?;
            quads.push(texture_quad(&g, params.normalized_correlation));
        }
    }
    Ok(quads)
}

/// Foreground pixel fraction of each patch; padding counts as background.
pub fn foreground_fractions(mask: &ForegroundMask, grid: &PatchGrid) -> Vec<f64> {
    let mut counts = vec![0usize; grid.len()];
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                let (r, c) = (y / grid.patch_h, x / grid.patch_w);
                counts[r * grid.cols + c] += 1;
            }
        }
    }
    let area = (grid.patch_w * grid.patch_h) as f64;
    counts.into_iter().map(|n| n as f64 / area).collect()
}

/// Weighted mean of the patch quadruples; falls back to the plain mean when
/// no patch carries weight.
pub fn weighted_quad(quads: &[TextureQuad], weights: &[f64]) -> TextureQuad {
    assert_eq!(quads.len(), weights.len());
    let total: f64 = weights.iter().sum();
    let uniform = total <= 0.0;
    let norm = if uniform { quads.len() as f64 } else { total };
    let mut acc = [0.0f64; 4];
    for (q, &w) in quads.iter().zip(weights) {
        let w = if uniform { 1.0 } else { w };
        for (a, v) in acc.iter_mut().zip(q.to_array()) {
            *a += w * v;
        }
    }
    TextureQuad {
        contrast: acc[0] / norm,
        correlation: acc[1] / norm,
        energy: acc[2] / norm,
        homogeneity: acc[3] / norm,
    }
}
