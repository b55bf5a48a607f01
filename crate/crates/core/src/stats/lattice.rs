use std::f64::consts::PI;

use super::scene::{SceneModel, SensorModel};

/// Rotation of the mode lattice against the pixel grid, in radians.
///
/// An irrational slope keeps the lattice incommensurate with every pixel
/// grid, so site-to-edge distances are equidistributed along any region edge
/// and the per-region mode counts track the area and perimeter laws.
pub const LATTICE_ANGLE: f64 = 0.553_574_358_897_045_2; // atan(1 / golden ratio)

/// Half-width of the border band around super-pixel edges, in units of the
/// coherence radius. At a lattice density of 1 / (pi r^2), a band of
/// half-width (pi / 4) r on both sides of an edge of length L holds 2 L / r
/// sites.
pub const BORDER_BAND_FACTOR: f64 = PI / 4.0;

/// Positions (μm) of the two members of one correlated mode pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SitePair {
    pub idler: [f64; 2],
    pub signal: [f64; 2],
}

/// Square lattice of mode pairs, one mode per cell of area pi r^2.
///
/// Idler sites fill the part of the sensor left of the center of symmetry;
/// each signal site is the point reflection of its idler through the
/// physical center of symmetry (nominal center plus the scene offset).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeLattice {
    sites: Vec<SitePair>,
    cell_side: f64,
    r_coh: f64,
    center_um: [f64; 2],
    sensor_extent: [f64; 2],
    x_max: f64,
}

impl ModeLattice {
    pub fn build(scene: &SceneModel, sensor: &SensorModel) -> Self {
        let r = scene.r_coh();
        let side = PI.sqrt() * r;
        let cs = sensor.cs_um();
        let d = scene.d_offset();
        let center = [cs[0] + d[0], cs[1] + d[1]];
        let [w, h] = sensor.extent_um();
        let x_max = cs[0];

        let (sin, cos) = LATTICE_ANGLE.sin_cos();
        let e1 = [side * cos, side * sin];
        let e2 = [-side * sin, side * cos];
        // anchor half a cell off the nominal center so no site sits on it
        let origin = [cs[0] - 0.5 * (e1[0] + e2[0]), cs[1] - 0.5 * (e1[1] + e2[1])];
        let reach = (w.hypot(h) / side).ceil() as i64 + 2;

        let mut sites = Vec::new();
        for j in -reach..=reach {
            for i in -reach..=reach {
                let (fi, fj) = (i as f64, j as f64);
                let x = origin[0] + fi * e1[0] + fj * e2[0];
                let y = origin[1] + fi * e1[1] + fj * e2[1];
                if x >= 0.0 && x < x_max && y >= 0.0 && y < h {
                    sites.push(SitePair {
                        idler: [x, y],
                        signal: [2.0 * center[0] - x, 2.0 * center[1] - y],
                    });
                }
            }
        }
        // row-major order (by y then x) keeps the draw order independent of
        // the lattice indexing
        sites.sort_by(|a, b| {
            a.idler[1]
                .total_cmp(&b.idler[1])
                .then(a.idler[0].total_cmp(&b.idler[0]))
        });

        ModeLattice {
            sites,
            cell_side: side,
            r_coh: r,
            center_um: center,
            sensor_extent: [w, h],
            x_max,
        }
    }

    pub fn sites(&self) -> &[SitePair] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// μm² per mode.
    pub fn cell_area(&self) -> f64 {
        self.cell_side * self.cell_side
    }

    pub fn cell_side(&self) -> f64 {
        self.cell_side
    }

    pub fn r_coh(&self) -> f64 {
        self.r_coh
    }

    /// Idler half of the sensor, `[0, x_max) x [0, height)` in μm.
    pub fn idler_domain(&self) -> [f64; 2] {
        [self.x_max, self.sensor_extent[1]]
    }

    /// Physical center of symmetry the signal sites are reflected through.
    pub fn center_um(&self) -> [f64; 2] {
        self.center_um
    }

    /// Whether this lattice was built for `scene` on `sensor`.
    pub fn is_consistent_with(&self, scene: &SceneModel, sensor: &SensorModel) -> bool {
        let cs = sensor.cs_um();
        let d = scene.d_offset();
        self.r_coh == scene.r_coh()
            && self.sensor_extent == sensor.extent_um()
            && self.center_um == [cs[0] + d[0], cs[1] + d[1]]
    }
}
