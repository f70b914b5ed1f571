//! Shi–Tomasi ("good features to track") corner detection.

use crate::grid::{Grid, Plane};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerPoint {
    pub x: f32,
    pub y: f32,
    /// Minimum eigenvalue of the local structure tensor.
    pub response: f32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerParams {
    pub max_corners: usize,
    /// Fraction of the strongest response a corner must reach, in `(0, 1]`.
    pub quality: f32,
    /// Minimum pairwise separation in pixels.
    pub min_distance: f32,
}

impl Default for CornerParams {
    fn default() -> Self {
        Self {
            max_corners: 500,
            quality: 0.01,
            min_distance: 5.0,
        }
    }
}

/// 3×3 Gaussian (`[1 2 1]/4` separable) smoothing with border clamping.
pub fn smooth3(image: &Plane) -> Plane {
    let horiz = Plane::from_fn(image.width(), image.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        0.25 * image.get_clamped(x - 1, y) + 0.5 * image.get_clamped(x, y) + 0.25 * image.get_clamped(x + 1, y)
    });
    Plane::from_fn(image.width(), image.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        0.25 * horiz.get_clamped(x, y - 1) + 0.5 * horiz.get_clamped(x, y) + 0.25 * horiz.get_clamped(x, y + 1)
    })
}

/// Central-difference gradients `(I(x+1) - I(x-1)) / 2`, clamped at borders.
pub fn central_gradients(image: &Plane) -> (Plane, Plane) {
    let gx = Plane::from_fn(image.width(), image.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        0.5 * (image.get_clamped(x + 1, y) - image.get_clamped(x - 1, y))
    });
    let gy = Plane::from_fn(image.width(), image.height(), |x, y| {
        let (x, y) = (x as isize, y as isize);
        0.5 * (image.get_clamped(x, y + 1) - image.get_clamped(x, y - 1))
    });
    (gx, gy)
}

/// Smaller eigenvalue of the symmetric matrix `[[a, b], [b, c]]`.
#[inline]
pub fn min_eigenvalue(a: f32, b: f32, c: f32) -> f32 {
    let half_trace = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    let disc = (half_diff * half_diff + b * b).sqrt();
    (half_trace - disc).max(0.0)
}

/// Per-pixel minimum-eigenvalue response over a 3×3 gradient window.
pub fn corner_response(image: &Plane) -> Plane {
    let (gx, gy) = central_gradients(&smooth3(image));
    response_from_gradients(&gx, &gy)
}

fn response_from_gradients(gx: &Plane, gy: &Plane) -> Plane {
    let (w, h) = (gx.width(), gx.height());
    let xx = Plane::from_fn(w, h, |x, y| gx.get(x, y) * gx.get(x, y));
    let xy = Plane::from_fn(w, h, |x, y| gx.get(x, y) * gy.get(x, y));
    let yy = Plane::from_fn(w, h, |x, y| gy.get(x, y) * gy.get(x, y));
    let box3 = |p: &Plane, x: isize, y: isize| -> f32 {
        let mut s = 0.0;
        for dy in -1..=1 {
            for dx in -1..=1 {
                s += p.get_clamped(x + dx, y + dy);
            }
        }
        s
    };
    Plane::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        min_eigenvalue(box3(&xx, x, y), box3(&xy, x, y), box3(&yy, x, y))
    })
}

pub fn detect_corners(image: &Plane, params: &CornerParams) -> Vec<CornerPoint> {
    select(image, params, None)
}

/// Like [`detect_corners`], but only pixels set in `mask` may host a corner.
/// The quality threshold still refers to the strongest response in the whole
/// image.
pub fn detect_corners_masked(
    image: &Plane,
    params: &CornerParams,
    mask: &Grid<bool>,
) -> Vec<CornerPoint> {
    assert!(image.same_shape(mask), "mask must match image geometry");
    select(image, params, Some(mask))
}

fn select(image: &Plane, params: &CornerParams, mask: Option<&Grid<bool>>) -> Vec<CornerPoint> {
    if params.max_corners == 0 {
        return Vec::new();
    }
    let smoothed = smooth3(image);
    let (gx, gy) = central_gradients(&smoothed);
    let response = response_from_gradients(&gx, &gy);
    let peak = response.as_slice().iter().copied().fold(0.0f32, f32::max);
    if peak <= 0.0 {
        return Vec::new();
    }
    let threshold = params.quality * peak;
    let (w, h) = (image.width(), image.height());
    let mut candidates = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let r = response.get(x, y);
            if r <= 0.0 || r < threshold {
                continue;
            }
            if mask.is_some_and(|m| !m.get(x, y)) {
                continue;
            }
            let (xi, yi) = (x as isize, y as isize);
            let is_peak = (-1..=1).all(|dy| {
                (-1..=1).all(|dx| response.get_clamped(xi + dx, yi + dy) <= r)
            });
            if is_peak {
                candidates.push((x, y, r));
            }
        }
    }
    // strongest first; raster order breaks ties deterministically
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.1, a.0).cmp(&(b.1, b.0))));

    let min_d2 = params.min_distance * params.min_distance;
    let mut accepted: Vec<CornerPoint> = Vec::new();
    for (x, y, r) in candidates {
        let (sx, sy) = refine(&gx, &gy, x, y);
        let clash = accepted.iter().any(|c| {
            let (dx, dy) = (c.x - sx, c.y - sy);
            dx * dx + dy * dy < min_d2
        });
        if clash {
            continue;
        }
        accepted.push(CornerPoint {
            x: sx,
            y: sy,
            response: r,
        });
        if accepted.len() == params.max_corners {
            break;
        }
    }
    accepted
}

const REFINE_HALF: isize = 3;
const REFINE_ITERS: usize = 5;
const REFINE_MAX_SHIFT: f32 = 2.5;

/// Subpixel corner location: the point `q` that every nearby gradient is
/// orthogonal to, i.e. the solution of `Σ g gᵀ (q − p) = 0` over a 7×7
/// window. Falls back to the pixel centre if the system is singular or the
/// estimate wanders off.
fn refine(gx: &Plane, gy: &Plane, x: usize, y: usize) -> (f32, f32) {
    let (mut qx, mut qy) = (x as f32, y as f32);
    for _ in 0..REFINE_ITERS {
        let (mut a, mut b, mut c, mut bx, mut by) = (0.0f32, 0.0f32, 0.0f32, 0.0f32, 0.0f32);
        let (cx, cy) = (qx.round() as isize, qy.round() as isize);
        for dy in -REFINE_HALF..=REFINE_HALF {
            for dx in -REFINE_HALF..=REFINE_HALF {
                let (px, py) = (cx + dx, cy + dy);
                let ix = gx.get_clamped(px, py);
                let iy = gy.get_clamped(px, py);
                let (gxx, gxy, gyy) = (ix * ix, ix * iy, iy * iy);
                a += gxx;
                b += gxy;
                c += gyy;
                bx += gxx * px as f32 + gxy * py as f32;
                by += gxy * px as f32 + gyy * py as f32;
            }
        }
        let det = a * c - b * b;
        if det.abs() <= f32::EPSILON * (a * c).abs().max(f32::MIN_POSITIVE) {
            return (x as f32, y as f32);
        }
        let nx = (c * bx - b * by) / det;
        let ny = (a * by - b * bx) / det;
        let settled = (nx - qx).hypot(ny - qy) < 0.01;
        (qx, qy) = (nx, ny);
        if settled {
            break;
        }
    }
    let moved = (qx - x as f32).hypot(qy - y as f32);
    let inside = qx >= 0.0 && qy >= 0.0 && qx <= (gx.width() - 1) as f32 && qy <= (gx.height() - 1) as f32;
    if moved <= REFINE_MAX_SHIFT && inside {
        (qx, qy)
    } else {
        (x as f32, y as f32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(cols: usize, rows: usize, cell: usize) -> Plane {
        Plane::from_fn(cols * cell, rows * cell, |x, y| ((x / cell + y / cell) % 2) as f32)
    }

    fn near(c: &CornerPoint, tx: f32, ty: f32, tol: f32) -> bool {
        (c.x - tx).abs() <= tol && (c.y - ty).abs() <= tol
    }

    #[test]
    fn flat_image_has_no_corners_and_zero_response() {
        let img = Plane::filled(40, 30, 0.4);
        assert!(corner_response(&img).as_slice().iter().all(|&r| r == 0.0));
        assert!(detect_corners(&img, &CornerParams::default()).is_empty());
    }

    #[test]
    fn checkerboard_interior_intersections() {
        // 5×3 cells of 20 px: interior intersections at x ∈ {20,40,60,80},
        // y ∈ {20,40}; in pixel-centre coordinates they sit at k·20 − 0.5
        let img = checkerboard(5, 3, 20);
        let corners = detect_corners(&img, &CornerParams::default());
        assert_eq!(corners.len(), 8, "{corners:?}");
        for gx in [20.0, 40.0, 60.0, 80.0] {
            for gy in [20.0, 40.0] {
                let hits = corners.iter().filter(|c| near(c, gx - 0.5, gy - 0.5, 1.0)).count();
                assert_eq!(hits, 1, "intersection ({gx},{gy})");
            }
        }
    }

    #[test]
    fn white_square_vertices() {
        let img = Plane::from_fn(64, 64, |x, y| {
            if (20..44).contains(&x) && (16..40).contains(&y) { 1.0 } else { 0.0 }
        });
        let corners = detect_corners(&img, &CornerParams::default());
        assert_eq!(corners.len(), 4, "{corners:?}");
        for (vx, vy) in [(19.5, 15.5), (43.5, 15.5), (19.5, 39.5), (43.5, 39.5)] {
            assert!(corners.iter().any(|c| near(c, vx, vy, 1.0)), "vertex ({vx},{vy})");
        }
    }

    #[test]
    fn contract_sorted_spaced_capped_and_thresholded() {
        let img = Plane::from_fn(96, 80, |x, y| {
            let v = ((x * 7919 + y * 104729) % 251) as f32 / 251.0;
            v * v
        });
        let params = CornerParams { max_corners: 40, quality: 0.05, min_distance: 6.0 };
        let corners = detect_corners(&img, &params);
        assert!(!corners.is_empty() && corners.len() <= 40);
        let peak = corner_response(&img).as_slice().iter().copied().fold(0.0, f32::max);
        for pair in corners.windows(2) {
            assert!(pair[0].response >= pair[1].response);
        }
        for (i, a) in corners.iter().enumerate() {
            assert!(a.response > 0.0 && a.response >= 0.05 * peak);
            assert!(a.x >= 0.0 && a.x < 96.0 && a.y >= 0.0 && a.y < 80.0);
            for b in &corners[i + 1..] {
                assert!(((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt() >= 6.0);
            }
        }
    }

    #[test]
    fn masked_detection_stays_inside_mask() {
        let img = checkerboard(5, 3, 20);
        let mask = Grid::from_fn(100, 60, |x, _| x < 50);
        let corners = detect_corners_masked(&img, &CornerParams::default(), &mask);
        assert_eq!(corners.len(), 4);
        assert!(corners.iter().all(|c| c.x < 50.0));
    }

    #[test]
    fn gradients_are_central_differences_of_the_smoothed_image() {
        let img = Plane::from_fn(12, 10, |x, y| ((x * x + 3 * y) % 17) as f32 / 17.0);
        let s = smooth3(&img);
        let (gx, gy) = central_gradients(&s);
        for y in 1..9 {
            for x in 1..11 {
                assert_eq!(gx.get(x, y), 0.5 * (s.get(x + 1, y) - s.get(x - 1, y)));
                assert_eq!(gy.get(x, y), 0.5 * (s.get(x, y + 1) - s.get(x, y - 1)));
            }
        }
    }

    #[test]
    fn response_is_never_negative() {
        let img = Plane::from_fn(32, 32, |x, y| ((x * 31 + y * 17) % 13) as f32);
        assert!(corner_response(&img).as_slice().iter().all(|&r| r >= 0.0));
    }
}
