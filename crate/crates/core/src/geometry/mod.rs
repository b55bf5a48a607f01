//! Detection-region geometry: point-symmetric region pairs on the readout
//! grid, closed-form mode counts, and the geometric correction coefficient A.

mod counts;
mod regions;

pub use counts::{
    a_gradient, compute_a, mode_counts, offset_magnitude, uncertainty_of_a, GeometricCorrection,
    ModeCounts, VALIDITY_RATIO,
};
pub use regions::{nested_regions, pixel_pairs, place_regions, place_regions_sp, Rect, RegionPair};
