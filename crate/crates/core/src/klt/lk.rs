//! Pyramidal Lucas–Kanade tracking of sparse points.

use std::f32::consts::TAU;

use super::corners::{min_eigenvalue, CornerPoint};
use super::pyramid::Pyramid;
use crate::error::{Error, Result};
use crate::grid::Plane;

/// Displacement of one tracked feature between two consecutive frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionVector {
    /// Source position in the earlier frame.
    pub x: f32,
    pub y: f32,
    /// Displacement length in pixels per frame.
    pub magnitude: f32,
    /// Displacement angle in `[0, 2π)`, image axes (y down).
    pub direction: f32,
}

impl MotionVector {
    pub fn from_displacement(x: f32, y: f32, dx: f32, dy: f32) -> Self {
        let mut direction = dy.atan2(dx).rem_euclid(TAU);
        // rem_euclid can round up to exactly TAU for tiny negative angles
        if direction >= TAU {
            direction = 0.0;
        }
        Self {
            x,
            y,
            magnitude: dx.hypot(dy),
            direction,
        }
    }

    pub fn dx(&self) -> f32 {
        self.magnitude * self.direction.cos()
    }

    pub fn dy(&self) -> f32 {
        self.magnitude * self.direction.sin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LkParams {
    /// Window half-size; the window is `(2·half + 1)²`.
    pub window: usize,
    pub max_iters: usize,
    /// Stop once the update step is shorter than this (pixels).
    pub epsilon: f32,
}

impl Default for LkParams {
    fn default() -> Self {
        Self {
            window: 5,
            max_iters: 10,
            epsilon: 0.01,
        }
    }
}

// Windows whose gradient matrix is this flat per pixel cannot be aligned.
const MIN_EIGEN_PER_PIXEL: f32 = 1e-7;

/// Tracks each corner from `prev` into `next`.
///
/// Returns one entry per input corner: `None` when the window is
/// untextured, the solve diverges, or the destination window leaves the
/// image.
pub fn track(
    prev: &Pyramid,
    next: &Pyramid,
    corners: &[CornerPoint],
    params: &LkParams,
) -> Result<Vec<Option<MotionVector>>> {
    if !prev.same_geometry(next) {
        return Err(Error::param("LK pyramids differ in geometry"));
    }
    let gradients: Vec<(Plane, Plane)> = prev.levels().iter().map(lk_gradients).collect();
    Ok(corners
        .iter()
        .map(|c| track_point(prev, next, &gradients, c.x, c.y, params))
        .collect())
}

/// Central differences on an unsmoothed pyramid level.
fn lk_gradients(level: &Plane) -> (Plane, Plane) {
    super::corners::central_gradients(level)
}

fn track_point(
    prev: &Pyramid,
    next: &Pyramid,
    gradients: &[(Plane, Plane)],
    x: f32,
    y: f32,
    params: &LkParams,
) -> Option<MotionVector> {
    let half = params.window as isize;
    let side = 2 * params.window + 1;
    let n = side * side;
    let mut template = vec![0.0f32; n];
    let mut grad_x = vec![0.0f32; n];
    let mut grad_y = vec![0.0f32; n];

    let mut guess = (0.0f32, 0.0f32);
    for level in (0..prev.depth()).rev() {
        let scale = (1u32 << level) as f32;
        let (px, py) = (x / scale, y / scale);
        let img = prev.level(level);
        let target = next.level(level);
        let (gx_img, gy_img) = &gradients[level];

        let (mut a, mut b, mut c) = (0.0f32, 0.0f32, 0.0f32);
        let mut k = 0;
        for wy in -half..=half {
            for wx in -half..=half {
                let sx = px + wx as f32;
                let sy = py + wy as f32;
                let ix = gx_img.sample(sx, sy);
                let iy = gy_img.sample(sx, sy);
                template[k] = img.sample(sx, sy);
                grad_x[k] = ix;
                grad_y[k] = iy;
                a += ix * ix;
                b += ix * iy;
                c += iy * iy;
                k += 1;
            }
        }
        if min_eigenvalue(a, b, c) / (n as f32) < MIN_EIGEN_PER_PIXEL {
            return None;
        }
        let det = a * c - b * b;

        let mut step = (0.0f32, 0.0f32);
        for _ in 0..params.max_iters {
            let (mut bx, mut by) = (0.0f32, 0.0f32);
            let ox = px + guess.0 + step.0;
            let oy = py + guess.1 + step.1;
            let mut k = 0;
            for wy in -half..=half {
                for wx in -half..=half {
                    let diff = template[k] - target.sample(ox + wx as f32, oy + wy as f32);
                    bx += diff * grad_x[k];
                    by += diff * grad_y[k];
                    k += 1;
                }
            }
            let eta_x = (c * bx - b * by) / det;
            let eta_y = (a * by - b * bx) / det;
            step.0 += eta_x;
            step.1 += eta_y;
            if !(step.0.is_finite() && step.1.is_finite()) {
                return None;
            }
            if eta_x.hypot(eta_y) < params.epsilon {
                break;
            }
        }
        guess = if level > 0 {
            (2.0 * (guess.0 + step.0), 2.0 * (guess.1 + step.1))
        } else {
            (guess.0 + step.0, guess.1 + step.1)
        };
    }

    // the destination window must lie inside the image; windows that reach
    // past the border see clamped samples and give unreliable motion
    let base = prev.base();
    let margin = params.window as f32;
    let (qx, qy) = (x + guess.0, y + guess.1);
    let inside = qx >= margin
        && qy >= margin
        && qx <= (base.width() - 1) as f32 - margin
        && qy <= (base.height() - 1) as f32 - margin;
    inside.then(|| MotionVector::from_displacement(x, y, guess.0, guess.1))
}
