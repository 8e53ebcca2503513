//! Marker-based perspective rectification to a constant ground sampling
//! distance (GSD, px/mm) and GSD resampling.

mod homography;
mod warp;

pub use homography::{estimate_homography, parse_correspondences, Correspondence, Homography, HomographyEstimate};
pub use warp::{resample_gsd, warp_rectify, Rectification, RectifiedImage};
