//! Measurement pipeline: count series, balancing and noise reduction
//! factors, correlation map and coherence radius, centering scan, and
//! efficiency extraction.

mod calibration;
mod centering;
mod correlation;
mod efficiency;
mod nrf;
mod series;

pub use calibration::{
    multi_l_calibration, point_efficiency, CalibrationGeometry, CalibrationOptions,
    CalibrationResult, LinearFit, PerL,
};
pub use centering::{center_scan, parabola_fit, ScanPoint, ScanStep, VertexFit};
pub use correlation::{coherence_radius, cross_correlation_map, CoherenceRadius, CorrelationMap};
pub use efficiency::{eta_from_point, eta_partner, eta_uncertainty, EtaHat};
pub use nrf::{
    alpha_hat, alpha_hat_corrected, background_correct, background_correct_series, nrf, NrfEstimate,
};
pub use series::{extract_many, extract_rects, extract_series, PairSeries};
