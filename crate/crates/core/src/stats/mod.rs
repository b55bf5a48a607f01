//! Photon-number level simulation of a twin-beam exposure on a CCD.
//!
//! Each lattice site is one spatio-temporal mode pair. Per frame every pair
//! draws one thermal photon number that is thinned independently into the
//! idler and signal arm; detected photons are deposited on the sensor, and
//! stray light plus read noise are added per readout pixel.

mod frame;
mod lattice;
mod sampling;
mod scene;
mod simulate;
mod spread;

pub use frame::{bin_frame, Frame, FrameStack};
pub use lattice::{ModeLattice, SitePair, BORDER_BAND_FACTOR, LATTICE_ANGLE};
pub use sampling::{sample_thermal, thin, ThermalSampler};
pub use scene::{Fidelity, SceneModel, SensorModel};
pub use simulate::{simulate_background_stack, simulate_frame, simulate_stack, FrameSynth};
pub use spread::{landing_radius, pixel_correlation_fwhm};
