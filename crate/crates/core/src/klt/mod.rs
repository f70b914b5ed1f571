//! KLT corner selection and sparse pyramidal optical flow.

mod corners;
mod lk;
mod pyramid;

pub use corners::{
    central_gradients, corner_response, detect_corners, detect_corners_masked, min_eigenvalue,
    smooth3, CornerParams, CornerPoint,
};
pub use lk::{track, LkParams, MotionVector};
pub use pyramid::{build_pyramid, Pyramid};
