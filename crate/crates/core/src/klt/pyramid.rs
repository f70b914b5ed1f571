use crate::error::{Error, Result};
use crate::grid::Plane;

const BINOMIAL5: [f32; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Coarse-to-fine image stack; level 0 is full resolution.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<Plane>,
}

impl Pyramid {
    pub fn levels(&self) -> &[Plane] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &Plane {
        &self.levels[k]
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn base(&self) -> &Plane {
        &self.levels[0]
    }

    fn geometry(&self) -> Vec<(usize, usize)> {
        self.levels.iter().map(|l| (l.width(), l.height())).collect()
    }

    pub fn same_geometry(&self, other: &Pyramid) -> bool {
        self.geometry() == other.geometry()
    }
}

/// Builds a `levels`-deep pyramid: each level is the previous one smoothed
/// with a 5-tap binomial kernel and decimated by two.
pub fn build_pyramid(image: &Plane, levels: usize) -> Result<Pyramid> {
    if levels == 0 {
        return Err(Error::param("pyramid needs at least one level"));
    }
    let min_side = (1usize << (levels - 1)) * 8;
    if image.width() < min_side || image.height() < min_side {
        return Err(Error::param(format!(
            "{}x{} image is too small for {levels} pyramid levels (need {min_side} px per side)",
            image.width(),
            image.height()
        )));
    }
    let mut stack = Vec::with_capacity(levels);
    stack.push(image.clone());
    for _ in 1..levels {
        let next = downsample(stack.last().expect("non-empty"));
        stack.push(next);
    }
    Ok(Pyramid { levels: stack })
}

fn downsample(src: &Plane) -> Plane {
    let (w, h) = (src.width(), src.height());
    // horizontal pass at even columns only
    let out_w = w.div_ceil(2);
    let out_h = h.div_ceil(2);
    let horiz = Plane::from_fn(out_w, h, |x, y| {
        let cx = (2 * x) as isize;
        BINOMIAL5
            .iter()
            .enumerate()
            .map(|(k, &c)| c * src.get_clamped(cx + k as isize - 2, y as isize))
            .sum()
    });
    Plane::from_fn(out_w, out_h, |x, y| {
        let cy = (2 * y) as isize;
        BINOMIAL5
            .iter()
            .enumerate()
            .map(|(k, &c)| c * horiz.get_clamped(x as isize, cy + k as isize - 2))
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_sizes() {
        let img = Plane::filled(320, 240, 0.25);
        let p = build_pyramid(&img, 3).unwrap();
        let dims: Vec<_> = p.levels().iter().map(|l| (l.width(), l.height())).collect();
        assert_eq!(dims, vec![(320, 240), (160, 120), (80, 60)]);
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = Plane::filled(64, 48, 0.7);
        let p = build_pyramid(&img, 3).unwrap();
        for level in p.levels() {
            assert!(level.as_slice().iter().all(|&v| (v - 0.7).abs() < 1e-6));
        }
    }

    #[test]
    fn single_level_is_identity() {
        let img = Plane::from_fn(16, 16, |x, y| (x * y) as f32);
        let p = build_pyramid(&img, 1).unwrap();
        assert_eq!(p.depth(), 1);
        assert_eq!(p.base(), &img);
    }

    #[test]
    fn too_small_for_depth() {
        let img = Plane::filled(31, 64, 0.0);
        assert!(matches!(build_pyramid(&img, 3), Err(Error::Parameter(_))));
        assert!(build_pyramid(&Plane::filled(32, 32, 0.0), 3).is_ok());
        assert!(build_pyramid(&img, 0).is_err());
    }
}
