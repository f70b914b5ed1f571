//! Per-pixel Gaussian-mixture background subtraction.
//!
//! Intensities are modelled on the 0–255 scale so that the variance floor and
//! the initial variance read in familiar units.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::klt::MotionVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmParams {
    /// Components per pixel.
    pub components: usize,
    /// Learning rate in `(0, 1)`.
    pub alpha: f32,
    /// Cumulative weight that the background components account for.
    pub bg_ratio: f32,
    /// Match radius in standard deviations.
    pub match_sigmas: f32,
    pub variance_floor: f32,
    pub initial_variance: f32,
    /// Weight given to a component that replaces the weakest one.
    pub replacement_weight: f32,
    /// 3×3 majority-vote cleanup of the mask.
    pub cleanup: bool,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            components: 3,
            alpha: 0.01,
            bg_ratio: 0.7,
            match_sigmas: 2.5,
            variance_floor: 4.0,
            initial_variance: 225.0,
            replacement_weight: 0.05,
            cleanup: true,
        }
    }
}

impl GmmParams {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::param("GMM needs at least one component"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("GMM alpha {} not in (0,1)", self.alpha)));
        }
        if !(self.bg_ratio > 0.0 && self.bg_ratio < 1.0) {
            return Err(Error::param(format!("GMM bg_ratio {} not in (0,1)", self.bg_ratio)));
        }
        if !(self.variance_floor > 0.0 && self.initial_variance >= self.variance_floor) {
            return Err(Error::param("GMM variances must be positive with initial >= floor"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub weight: f32,
    pub mean: f32,
    pub variance: f32,
}

impl Component {
    fn rank_key(&self) -> f32 {
        self.weight / self.variance.sqrt()
    }
}

/// One pixel's mixture, strongest (`w/σ`) component first. Unused slots
/// carry zero weight.
pub type PixelMixture = [Component];

/// Boolean per-pixel foreground flags (`true` = foreground).
#[derive(Debug, Clone, PartialEq)]
pub struct ForegroundMask(Grid<bool>);

impl ForegroundMask {
    pub fn new(bits: Grid<bool>) -> Self {
        Self(bits)
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self(Grid::filled(width, height, false))
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.0.get(x, y)
    }

    pub fn bits(&self) -> &Grid<bool> {
        &self.0
    }

    pub fn population(&self) -> usize {
        self.0.as_slice().iter().filter(|&&b| b).count()
    }

    /// 0 for background, 255 for foreground.
    pub fn to_image(&self) -> Grid<u8> {
        self.0.map(|b| if b { 255 } else { 0 })
    }

    fn majority_filtered(&self) -> Self {
        let g = &self.0;
        Self(Grid::from_fn(g.width(), g.height(), |x, y| {
            let (mut on, mut total) = (0, 0);
            for ny in y.saturating_sub(1)..=(y + 1).min(g.height() - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(g.width() - 1) {
                    total += 1;
                    on += g.get(nx, ny) as usize;
                }
            }
            2 * on > total
        }))
    }
}

/// Mixture grid for one stream. Starts empty and initialises itself from the
/// first frame it sees.
#[derive(Debug, Clone)]
pub struct BackgroundModel {
    params: GmmParams,
    width: usize,
    height: usize,
    // `components` slots per pixel, row-major pixels
    mixtures: Vec<Component>,
}

impl BackgroundModel {
    pub fn new(params: GmmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            width: 0,
            height: 0,
            mixtures: Vec::new(),
        })
    }

    pub fn params(&self) -> &GmmParams {
        &self.params
    }

    pub fn is_initialised(&self) -> bool {
        !self.mixtures.is_empty()
    }

    pub fn mixture(&self, x: usize, y: usize) -> &PixelMixture {
        let k = self.params.components;
        let at = (y * self.width + x) * k;
        &self.mixtures[at..at + k]
    }

    fn initialise(&mut self, frame: &Grid<u8>) {
        let k = self.params.components;
        self.width = frame.width();
        self.height = frame.height();
        self.mixtures = Vec::with_capacity(frame.as_slice().len() * k);
        for &p in frame.as_slice() {
            self.mixtures.push(Component {
                weight: 1.0,
                mean: p as f32,
                variance: self.params.initial_variance,
            });
            for _ in 1..k {
                self.mixtures.push(Component {
                    weight: 0.0,
                    mean: 0.0,
                    variance: self.params.initial_variance,
                });
            }
        }
    }

    /// Folds `frame` into the model and classifies each pixel.
    ///
    /// The very first frame initialises the model and is reported as all
    /// background.
    pub fn update_and_classify(&mut self, frame: &Grid<u8>) -> Result<ForegroundMask> {
        if !self.is_initialised() {
            self.initialise(frame);
            return Ok(ForegroundMask::empty(frame.width(), frame.height()));
        }
        if frame.width() != self.width || frame.height() != self.height {
            return Err(Error::param(format!(
                "frame is {}x{}, background model is {}x{}",
                frame.width(),
                frame.height(),
                self.width,
                self.height
            )));
        }
        let k = self.params.components;
        let params = self.params;
        let bits: Vec<bool> = self
            .mixtures
            .chunks_exact_mut(k)
            .zip(frame.as_slice())
            .map(|(mix, &p)| update_pixel(mix, p as f32, &params))
            .collect();
        let mask = ForegroundMask(Grid::from_vec(self.width, self.height, bits).expect("sized"));
        Ok(if params.cleanup {
            mask.majority_filtered()
        } else {
            mask
        })
    }
}

/// Updates one pixel's mixture; returns `true` when the pixel is foreground.
fn update_pixel(mix: &mut [Component], value: f32, p: &GmmParams) -> bool {
    let mut matched = None;
    let mut best = f32::INFINITY;
    for (i, c) in mix.iter().enumerate() {
        if c.weight <= 0.0 {
            continue;
        }
        let z = (value - c.mean).abs() / c.variance.sqrt();
        if z <= p.match_sigmas && z < best {
            best = z;
            matched = Some(i);
        }
    }

    let hit = match matched {
        Some(m) => {
            for (i, c) in mix.iter_mut().enumerate() {
                c.weight *= 1.0 - p.alpha;
                if i == m {
                    c.weight += p.alpha;
                    c.mean += p.alpha * (value - c.mean);
                    let d = value - c.mean;
                    c.variance = (c.variance + p.alpha * (d * d - c.variance)).max(p.variance_floor);
                }
            }
            m
        }
        None => {
            let weakest = mix
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.weight.total_cmp(&b.1.weight))
                .map(|(i, _)| i)
                .expect("at least one component");
            mix[weakest] = Component {
                weight: p.replacement_weight,
                mean: value,
                variance: p.initial_variance,
            };
            weakest
        }
    };

    let total: f32 = mix.iter().map(|c| c.weight).sum();
    for c in mix.iter_mut() {
        c.weight /= total;
    }

    // keep slots ordered by w/σ, tracking where the hit component lands
    let mut hit = hit;
    for i in 1..mix.len() {
        let mut j = i;
        while j > 0 && mix[j].rank_key() > mix[j - 1].rank_key() {
            mix.swap(j, j - 1);
            if hit == j {
                hit = j - 1;
            } else if hit == j - 1 {
                hit = j;
            }
            j -= 1;
        }
    }

    let preceding: f32 = mix[..hit].iter().map(|c| c.weight).sum();
    preceding >= p.bg_ratio
}

/// Keeps the vectors whose rounded source position is a foreground pixel.
pub fn filter_vectors(mask: &ForegroundMask, vectors: &[MotionVector]) -> Vec<MotionVector> {
    vectors
        .iter()
        .copied()
        .filter(|v| {
            let (x, y) = (v.x.round(), v.y.round());
            x >= 0.0
                && y >= 0.0
                && (x as usize) < mask.width()
                && (y as usize) < mask.height()
                && mask.get(x as usize, y as usize)
        })
        .collect()
}

/// Foreground pixel count per row.
pub fn count_foreground_rows(mask: &ForegroundMask) -> Vec<usize> {
    (0..mask.height())
        .map(|y| mask.bits().row(y).iter().filter(|&&b| b).count())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn backdrop(w: usize, h: usize) -> Grid<u8> {
        Grid::from_fn(w, h, |x, y| (100 + (x * 13 + y * 7) % 50) as u8)
    }

    fn weights_normalised(model: &BackgroundModel) -> bool {
        (0..model.height).all(|y| {
            (0..model.width).all(|x| {
                let s: f32 = model.mixture(x, y).iter().map(|c| c.weight).sum();
                (s - 1.0).abs() < 1e-6 && model.mixture(x, y).iter().all(|c| c.variance >= 4.0)
            })
        })
    }

    #[test]
    fn first_frame_is_all_background() {
        let mut m = BackgroundModel::new(GmmParams::default()).unwrap();
        let mask = m.update_and_classify(&backdrop(32, 24)).unwrap();
        assert_eq!(mask.population(), 0);
    }

    #[test]
    fn static_scene_converges() {
        let mut m = BackgroundModel::new(GmmParams::default()).unwrap();
        let frame = backdrop(40, 30);
        for i in 0..200 {
            let mask = m.update_and_classify(&frame).unwrap();
            if i >= 50 {
                assert!((mask.population() as f64) / 1200.0 < 0.001);
            }
            assert!(weights_normalised(&m));
            if i == 99 {
                for y in 0..30 {
                    for x in 0..40 {
                        let dominant = m.mixture(x, y)[0];
                        assert!((dominant.mean - frame.get(x, y) as f32).abs() <= 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn moving_square_is_segmented() {
        let (w, h) = (200, 60);
        let bg = backdrop(w, h);
        let mut m = BackgroundModel::new(GmmParams::default()).unwrap();
        for t in 0..90usize {
            let sx = 5 + 2 * t;
            let frame = Grid::from_fn(w, h, |x, y| {
                if (sx..sx + 10).contains(&x) && (25..35).contains(&y) { 230 } else { bg.get(x, y) }
            });
            let mask = m.update_and_classify(&frame).unwrap();
            assert!(weights_normalised(&m));
            if t >= 50 {
                let mut inter = 0;
                let mut union = 0;
                for y in 0..h {
                    for x in 0..w {
                        let truth = (sx..sx + 10).contains(&x) && (25..35).contains(&y);
                        let got = mask.get(x, y);
                        inter += (truth && got) as usize;
                        union += (truth || got) as usize;
                    }
                }
                let iou = inter as f64 / union as f64;
                assert!(iou >= 0.5, "frame {t}: IoU {iou}");
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut m = BackgroundModel::new(GmmParams::default()).unwrap();
        m.update_and_classify(&backdrop(32, 24)).unwrap();
        assert!(matches!(m.update_and_classify(&backdrop(24, 32)), Err(Error::Parameter(_))));
    }

    #[test]
    fn bad_params_are_rejected() {
        let p = GmmParams { alpha: 1.0, ..GmmParams::default() };
        assert!(BackgroundModel::new(p).is_err());
        let p = GmmParams { bg_ratio: 0.0, ..GmmParams::default() };
        assert!(BackgroundModel::new(p).is_err());
    }

    fn v(x: f32, y: f32) -> MotionVector {
        MotionVector::from_displacement(x, y, 1.0, 0.0)
    }

    #[test]
    fn filter_respects_mask() {
        let vectors = vec![v(1.0, 1.0), v(6.2, 3.0), v(3.4, 7.0), v(8.6, 2.0)];
        assert!(filter_vectors(&ForegroundMask::empty(10, 10), &vectors).is_empty());
        let full = ForegroundMask::new(Grid::filled(10, 10, true));
        assert_eq!(filter_vectors(&full, &vectors), vectors);
        // right half foreground: x >= 5
        let half = ForegroundMask::new(Grid::from_fn(10, 10, |x, _| x >= 5));
        let kept = filter_vectors(&half, &vectors);
        assert_eq!(kept, vec![vectors[1], vectors[3]]);
        // 4.6 rounds to 5 and lands on the foreground side
        assert_eq!(filter_vectors(&half, &[v(4.6, 0.0)]).len(), 1);
    }

    #[test]
    fn row_counts() {
        assert_eq!(count_foreground_rows(&ForegroundMask::empty(4, 3)), vec![0, 0, 0]);
        let full = ForegroundMask::new(Grid::filled(4, 3, true));
        assert_eq!(count_foreground_rows(&full), vec![4, 4, 4]);
        let row1 = ForegroundMask::new(Grid::from_fn(5, 4, |_, y| y == 1));
        assert_eq!(count_foreground_rows(&row1), vec![0, 5, 0, 0]);
    }

    #[test]
    fn majority_filter_removes_isolated_pixels() {
        let speck = ForegroundMask::new(Grid::from_fn(9, 9, |x, y| x == 4 && y == 4));
        assert_eq!(speck.majority_filtered().population(), 0);
        let block = ForegroundMask::new(Grid::from_fn(9, 9, |x, y| (2..7).contains(&x) && (2..7).contains(&y)));
        // block interior survives, its four corners erode
        assert_eq!(block.majority_filtered().population(), 21);
    }
}
