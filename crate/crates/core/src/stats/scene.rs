use std::fmt;
use std::str::FromStr;

use crate::error::{ensure_finite, ensure_unit_interval, Error, Result};

/// Where the detected photons of a mode land.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fidelity {
    /// All photons of a mode land on the pixel holding the mode center;
    /// modes close to a super-pixel edge split their photons across it.
    PointMode,
    /// Mode centers are drawn uniformly anew every frame (as many as the
    /// lattice holds) and each photon lands uniformly on a disc about its
    /// mode center.
    SpreadMode,
}

impl FromStr for Fidelity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "point" | "point-mode" => Ok(Fidelity::PointMode),
            "spread" | "spread-mode" => Ok(Fidelity::SpreadMode),
            other => Err(Error::invalid(
                "fidelity",
                format!("expected `point` or `spread`, got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for Fidelity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fidelity::PointMode => f.write_str("point"),
            Fidelity::SpreadMode => f.write_str("spread"),
        }
    }
}

/// Ground-truth physical configuration of a simulated exposure.
///
/// Lengths are in μm, signals in photo-electrons. `d_offset` is the
/// displacement of the physical center of symmetry from the sensor's nominal
/// one.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneModel {
    mu: f64,
    r_coh: f64,
    d_offset: [f64; 2],
    eta_i: f64,
    eta_s: f64,
    beta: f64,
    read_noise_std: f64,
    stray_mean: f64,
    fidelity: Fidelity,
    noise_after_binning: bool,
}

impl SceneModel {
    /// Scene with no offset, `beta = 0.5`, no noise, point-mode fidelity.
    ///
    /// `mu = 0` is accepted and describes a dark (background-only) exposure.
    pub fn new(mu: f64, r_coh: f64, eta_i: f64, eta_s: f64) -> Result<Self> {
        ensure_finite("mu", mu)?;
        if mu < 0.0 {
            return Err(Error::invalid("mu", format!("must be >= 0, got {mu}")));
        }
        ensure_finite("r_coh", r_coh)?;
        if r_coh <= 0.0 {
            return Err(Error::invalid("r_coh", format!("must be > 0, got {r_coh}")));
        }
        ensure_unit_interval("eta_i", eta_i)?;
        ensure_unit_interval("eta_s", eta_s)?;
        Ok(SceneModel {
            mu,
            r_coh,
            d_offset: [0.0, 0.0],
            eta_i,
            eta_s,
            beta: 0.5,
            read_noise_std: 0.0,
            stray_mean: 0.0,
            fidelity: Fidelity::PointMode,
            noise_after_binning: true,
        })
    }

    pub fn with_offset(mut self, d_offset: [f64; 2]) -> Result<Self> {
        ensure_finite("d_offset.x", d_offset[0])?;
        ensure_finite("d_offset.y", d_offset[1])?;
        self.d_offset = d_offset;
        Ok(self)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        ensure_unit_interval("beta", beta)?;
        self.beta = beta;
        Ok(self)
    }

    pub fn with_read_noise(mut self, std: f64) -> Result<Self> {
        ensure_finite("read_noise_std", std)?;
        if std < 0.0 {
            return Err(Error::invalid("read_noise_std", "must be >= 0"));
        }
        self.read_noise_std = std;
        Ok(self)
    }

    pub fn with_stray(mut self, mean: f64) -> Result<Self> {
        ensure_finite("stray_mean", mean)?;
        if mean < 0.0 {
            return Err(Error::invalid("stray_mean", "must be >= 0"));
        }
        self.stray_mean = mean;
        Ok(self)
    }

    pub fn with_fidelity(mut self, fidelity: Fidelity) -> Self {
        self.fidelity = fidelity;
        self
    }

    /// `true`: one read per readout pixel. `false`: one read per physical
    /// pixel, summed by the binning.
    pub fn with_noise_after_binning(mut self, after: bool) -> Self {
        self.noise_after_binning = after;
        self
    }

    /// Same scene with the light switched off (background frames).
    pub fn dark(&self) -> Self {
        SceneModel {
            mu: 0.0,
            ..self.clone()
        }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn r_coh(&self) -> f64 {
        self.r_coh
    }
    pub fn d_offset(&self) -> [f64; 2] {
        self.d_offset
    }
    pub fn eta_i(&self) -> f64 {
        self.eta_i
    }
    pub fn eta_s(&self) -> f64 {
        self.eta_s
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn read_noise_std(&self) -> f64 {
        self.read_noise_std
    }
    pub fn stray_mean(&self) -> f64 {
        self.stray_mean
    }
    pub fn fidelity(&self) -> Fidelity {
        self.fidelity
    }
    pub fn noise_after_binning(&self) -> bool {
        self.noise_after_binning
    }
}

/// CCD geometry. Pixel coordinates are physical pixels; the readout grid is
/// the binned (super-pixel) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    width: usize,
    height: usize,
    pixel_pitch: f64,
    bin_factor: usize,
    cs_position: [f64; 2],
}

impl SensorModel {
    pub fn new(
        width: usize,
        height: usize,
        pixel_pitch: f64,
        bin_factor: usize,
        cs_position: [f64; 2],
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("sensor", "width and height must be >= 1"));
        }
        ensure_finite("pixel_pitch", pixel_pitch)?;
        if pixel_pitch <= 0.0 {
            return Err(Error::invalid("pixel_pitch", "must be > 0"));
        }
        if bin_factor == 0 {
            return Err(Error::invalid("bin_factor", "must be >= 1"));
        }
        if !width.is_multiple_of(bin_factor) || !height.is_multiple_of(bin_factor) {
            return Err(Error::invalid(
                "bin_factor",
                format!("{width}x{height} is not divisible by {bin_factor}"),
            ));
        }
        let [cx, cy] = cs_position;
        let inside = cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64;
        if !inside {
            return Err(Error::invalid(
                "cs_position",
                format!("({cx}, {cy}) is not strictly inside {width}x{height}"),
            ));
        }
        Ok(SensorModel {
            width,
            height,
            pixel_pitch,
            bin_factor,
            cs_position,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }
    pub fn bin_factor(&self) -> usize {
        self.bin_factor
    }
    /// Center of symmetry in physical-pixel coordinates.
    pub fn cs_position(&self) -> [f64; 2] {
        self.cs_position
    }

    pub fn cs_um(&self) -> [f64; 2] {
        [
            self.cs_position[0] * self.pixel_pitch,
            self.cs_position[1] * self.pixel_pitch,
        ]
    }

    pub fn extent_um(&self) -> [f64; 2] {
        [
            self.width as f64 * self.pixel_pitch,
            self.height as f64 * self.pixel_pitch,
        ]
    }

    pub fn readout_width(&self) -> usize {
        self.width / self.bin_factor
    }
    pub fn readout_height(&self) -> usize {
        self.height / self.bin_factor
    }

    /// Side of one readout pixel in μm.
    pub fn readout_pitch(&self) -> f64 {
        self.pixel_pitch * self.bin_factor as f64
    }

    /// Same sensor read out without binning.
    pub fn unbinned(&self) -> Self {
        SensorModel {
            bin_factor: 1,
            ..self.clone()
        }
    }

    /// Same sensor with a different nominal center of symmetry.
    pub fn with_cs(&self, cs_position: [f64; 2]) -> Result<Self> {
        SensorModel::new(
            self.width,
            self.height,
            self.pixel_pitch,
            self.bin_factor,
            cs_position,
        )
    }

    /// Readout pixel index holding the point `p` (μm), if it lies on the sensor.
    pub(crate) fn readout_index(&self, p: [f64; 2]) -> Option<usize> {
        let px = (p[0] / self.pixel_pitch).floor();
        let py = (p[1] / self.pixel_pitch).floor();
        if px < 0.0 || py < 0.0 || px >= self.width as f64 || py >= self.height as f64 {
            return None;
        }
        let rx = px as usize / self.bin_factor;
        let ry = py as usize / self.bin_factor;
        Some(ry * self.readout_width() + rx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_bounds_are_enforced() {
        assert!(SceneModel::new(0.01, 43.0, 0.72, 0.784).is_ok());
        assert!(SceneModel::new(0.0, 43.0, 0.72, 0.784).is_ok());
        assert!(SceneModel::new(-0.1, 43.0, 0.72, 0.784).is_err());
        assert!(SceneModel::new(0.01, 0.0, 0.72, 0.784).is_err());
        assert!(SceneModel::new(0.01, 43.0, 1.2, 0.784).is_err());
        assert!(SceneModel::new(0.01, 43.0, 0.72, -0.1).is_err());
        let s = SceneModel::new(0.01, 43.0, 0.72, 0.784).unwrap();
        assert!(s.clone().with_beta(1.5).is_err());
        assert!(s.clone().with_read_noise(-1.0).is_err());
        assert!(s.clone().with_stray(f64::NAN).is_err());
        assert_eq!(s.beta(), 0.5);
    }

    #[test]
    fn sensor_requires_divisible_binning_and_interior_cs() {
        assert!(SensorModel::new(48, 48, 20.0, 24, [24.0, 24.0]).is_ok());
        assert!(SensorModel::new(50, 48, 20.0, 24, [24.0, 24.0]).is_err());
        assert!(SensorModel::new(48, 48, 20.0, 24, [0.0, 24.0]).is_err());
        assert!(SensorModel::new(48, 48, 20.0, 24, [24.0, 48.0]).is_err());
    }

    #[test]
    fn readout_index_maps_points_to_super_pixels() {
        let s = SensorModel::new(48, 24, 20.0, 24, [24.0, 12.0]).unwrap();
        assert_eq!(s.readout_width(), 2);
        assert_eq!(s.readout_index([10.0, 10.0]), Some(0));
        assert_eq!(s.readout_index([481.0, 10.0]), Some(1));
        assert_eq!(s.readout_index([-1.0, 10.0]), None);
        assert_eq!(s.readout_index([960.0, 10.0]), None);
    }

    #[test]
    fn fidelity_parses() {
        assert_eq!("point".parse::<Fidelity>().unwrap(), Fidelity::PointMode);
        assert_eq!(
            "spread-mode".parse::<Fidelity>().unwrap(),
            Fidelity::SpreadMode
        );
        assert!("blurred".parse::<Fidelity>().is_err());
    }
}
