use crate::error::{ensure_finite, Error, Result};
use crate::stats::SensorModel;

/// Axis-aligned block of readout pixels, `[x0, x0 + width) x [y0, y0 + height)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rect {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.width && y >= self.y0 && y < self.y0 + self.height
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x0 >= self.x0
            && other.y0 >= self.y0
            && other.x0 + other.width <= self.x0 + self.width
            && other.y0 + other.height <= self.y0 + self.height
    }

    pub fn fits_in(&self, width: usize, height: usize) -> bool {
        self.x0 + self.width <= width && self.y0 + self.height <= height
    }

    pub fn overlaps(&self, other: &Rect) -> bool {
        self.x0 < other.x0 + other.width
            && other.x0 < self.x0 + self.width
            && self.y0 < other.y0 + other.height
            && other.y0 < self.y0 + self.height
    }

    /// Row-major pixel coordinates.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y0 + self.height)
            .flat_map(move |y| (self.x0..self.x0 + self.width).map(move |x| (x, y)))
    }
}

/// Two point-symmetric detection regions on the readout grid.
///
/// The reflection center is kept as doubled integer readout coordinates
/// `cs2`, so pixel `(x, y)` mirrors exactly onto `(cs2.x - 1 - x, cs2.y - 1 - y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionPair {
    region_i: Rect,
    region_s: Rect,
    cs2: [i64; 2],
    l_um: f64,
    snap_residual_um: [f64; 2],
}

impl RegionPair {
    pub fn region_i(&self) -> Rect {
        self.region_i
    }
    pub fn region_s(&self) -> Rect {
        self.region_s
    }
    pub fn cs2(&self) -> [i64; 2] {
        self.cs2
    }
    /// Linear size in μm.
    pub fn l_um(&self) -> f64 {
        self.l_um
    }
    /// Snapped reflection center minus the requested center of symmetry, μm.
    /// Fold this into the offset `d` when computing A.
    pub fn snap_residual_um(&self) -> [f64; 2] {
        self.snap_residual_um
    }

    /// Mirror of readout pixel `(x, y)` through the reflection center.
    pub fn mirror(&self, x: usize, y: usize) -> Option<(usize, usize)> {
        let mx = self.cs2[0] - 1 - x as i64;
        let my = self.cs2[1] - 1 - y as i64;
        (mx >= 0 && my >= 0).then_some((mx as usize, my as usize))
    }
}

fn axis_placement(
    axis: &'static str,
    center_ro: f64,
    cs2: i64,
    k: usize,
    extent: usize,
) -> Result<(usize, usize)> {
    let anchor = center_ro.floor() as i64;
    let x0 = anchor - (k / 2) as i64;
    let k = k as i64;
    let xs0 = cs2 - x0 - k;
    let extent = extent as i64;
    if x0 < 0 || x0 + k > extent || xs0 < 0 || xs0 + k > extent {
        return Err(Error::Geometry(format!(
            "regions of {k} readout pixels do not fit along {axis}: idler starts at {x0}, \
             signal at {xs0}, sensor has {extent}"
        )));
    }
    Ok((x0 as usize, xs0 as usize))
}

/// Places a pair of `k` x `k` readout-pixel regions: the idler region is
/// anchored on `arm_center_um`, the signal region is its reflection through
/// `cs_um` snapped to the nearest half readout pixel.
///
/// Growing `k` about the same centers yields nested regions.
pub fn place_regions_sp(
    sensor: &SensorModel,
    cs_um: [f64; 2],
    arm_center_um: [f64; 2],
    k: usize,
) -> Result<RegionPair> {
    if k == 0 {
        return Err(Error::invalid(
            "L",
            "region size must be at least one readout pixel",
        ));
    }
    for v in cs_um.iter().chain(&arm_center_um) {
        ensure_finite("region center", *v)?;
    }
    let pitch = sensor.readout_pitch();
    let cs2 = [
        (2.0 * cs_um[0] / pitch).round() as i64,
        (2.0 * cs_um[1] / pitch).round() as i64,
    ];
    let (x0, xs0) = axis_placement(
        "x",
        arm_center_um[0] / pitch,
        cs2[0],
        k,
        sensor.readout_width(),
    )?;
    let (y0, ys0) = axis_placement(
        "y",
        arm_center_um[1] / pitch,
        cs2[1],
        k,
        sensor.readout_height(),
    )?;
    let region_i = Rect {
        x0,
        y0,
        width: k,
        height: k,
    };
    let region_s = Rect {
        x0: xs0,
        y0: ys0,
        width: k,
        height: k,
    };
    if region_i.overlaps(&region_s) {
        return Err(Error::Geometry(format!(
            "regions of {k} readout pixels overlap; move the arm center away from the center of symmetry"
        )));
    }
    Ok(RegionPair {
        region_i,
        region_s,
        cs2,
        l_um: k as f64 * pitch,
        snap_residual_um: [
            0.5 * cs2[0] as f64 * pitch - cs_um[0],
            0.5 * cs2[1] as f64 * pitch - cs_um[1],
        ],
    })
}

/// Like [`place_regions_sp`] with the size given in μm; it must be a whole
/// number of readout pixels.
pub fn place_regions(
    sensor: &SensorModel,
    cs_um: [f64; 2],
    arm_center_um: [f64; 2],
    l_um: f64,
) -> Result<RegionPair> {
    ensure_finite("L", l_um)?;
    let k = l_um / sensor.readout_pitch();
    let kr = k.round();
    if kr < 1.0 || (k - kr).abs() > 1e-9 * kr.max(1.0) {
        return Err(Error::invalid(
            "L",
            format!(
                "{l_um} μm is not a whole number of {} μm readout pixels",
                sensor.readout_pitch()
            ),
        ));
    }
    place_regions_sp(sensor, cs_um, arm_center_um, kr as usize)
}

/// Region pairs for strictly increasing sizes about fixed centers.
pub fn nested_regions(
    sensor: &SensorModel,
    cs_um: [f64; 2],
    arm_center_um: [f64; 2],
    sizes: &[usize],
) -> Result<Vec<RegionPair>> {
    if sizes.is_empty() {
        return Err(Error::invalid("L list", "empty"));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "L list",
            "sizes must be strictly increasing",
        ));
    }
    sizes
        .iter()
        .map(|&k| place_regions_sp(sensor, cs_um, arm_center_um, k))
        .collect()
}

/// Every single-readout-pixel pair whose idler pixel lies wholly on the
/// idler side (`x < cs`) and whose partner is on the sensor.
pub fn pixel_pairs(sensor: &SensorModel, cs_um: [f64; 2]) -> Vec<RegionPair> {
    let p = sensor.readout_pitch();
    let mut out = Vec::new();
    for y in 0..sensor.readout_height() {
        for x in 0..sensor.readout_width() {
            if (x + 1) as f64 * p > cs_um[0] + 1e-9 {
                continue;
            }
            let center = [(x as f64 + 0.5) * p, (y as f64 + 0.5) * p];
            if let Ok(pair) = place_regions_sp(sensor, cs_um, center, 1) {
                out.push(pair);
            }
        }
    }
    out
}
