use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{Rect, RegionPair};
use crate::stats::FrameStack;

/// Spatial cross-correlation coefficient c(ξ) on a square grid of shifts
/// `-m..=m` per axis, in pixels of size `pitch` μm.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMap {
    max_shift: usize,
    pitch: f64,
    values: Vec<f64>,
}

impl CorrelationMap {
    /// `values` are row-major over (dy, dx), both running from `-max_shift`.
    pub fn new(max_shift: usize, pitch: f64, values: Vec<f64>) -> Result<Self> {
        let side = 2 * max_shift + 1;
        if values.len() != side * side {
            return Err(Error::invalid(
                "map",
                format!("expected {} values, got {}", side * side, values.len()),
            ));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(Error::invalid("pitch", format!("must be > 0, got {pitch}")));
        }
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || v.abs() > 1.0 + 1e-9)
        {
            return Err(Error::invalid(
                "map",
                format!("coefficient {v} outside [-1, 1]"),
            ));
        }
        Ok(CorrelationMap {
            max_shift,
            pitch,
            values,
        })
    }

    pub fn max_shift(&self) -> usize {
        self.max_shift
    }
    pub fn pitch(&self) -> f64 {
        self.pitch
    }
    pub fn side(&self) -> usize {
        2 * self.max_shift + 1
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, dx: i64, dy: i64) -> f64 {
        let m = self.max_shift as i64;
        self.values[((dy + m) * (2 * m + 1) + dx + m) as usize]
    }

    /// `(dx, dy, c)` for every shift, row-major.
    pub fn entries(&self) -> impl Iterator<Item = (i64, i64, f64)> + '_ {
        let m = self.max_shift as i64;
        let side = self.side();
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &v)| ((k % side) as i64 - m, (k / side) as i64 - m, v))
    }
}

// standardized temporal series, pixel-major: z[p * n + t]
fn standardize(stack: &FrameStack, rect: &Rect) -> Result<Vec<f64>> {
    let n = stack.len();
    let w = stack.width();
    let mut z = Vec::with_capacity(rect.area() * n);
    for (x, y) in rect.pixels() {
        let start = z.len();
        z.extend(stack.frames().map(|f| f[y * w + x] as f64));
        let col = &mut z[start..];
        let m = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
        if ss <= 0.0 {
            return Err(Error::degenerate(format!(
                "pixel ({x}, {y}) has zero temporal variance"
            )));
        }
        let scale = 1.0 / ss.sqrt();
        col.iter_mut().for_each(|v| *v = (*v - m) * scale);
    }
    Ok(z)
}

/// Mean over idler-region pixels x of the temporal correlation coefficient
/// between N(x) and N(-x + ξ), where -x is the mirror pixel through the
/// pair's center of symmetry.
///
/// Frames must be unbinned; the region pair supplies both the idler region
/// and the reflection center.
pub fn cross_correlation_map(
    frames: &FrameStack,
    pair: &RegionPair,
    max_shift: usize,
    exec: Exec,
) -> Result<CorrelationMap> {
    if frames.len() < 2 {
        return Err(Error::invalid("frames", "need at least 2 frames"));
    }
    let ri = pair.region_i();
    let rs = pair.region_s();
    let m = max_shift;
    if rs.x0 < m || rs.y0 < m {
        return Err(Error::Geometry(format!(
            "shift range {m} leaves the sensor around the signal region"
        )));
    }
    let window = Rect {
        x0: rs.x0 - m,
        y0: rs.y0 - m,
        width: rs.width + 2 * m,
        height: rs.height + 2 * m,
    };
    if !ri.fits_in(frames.width(), frames.height())
        || !window.fits_in(frames.width(), frames.height())
    {
        return Err(Error::Geometry(format!(
            "regions with shift range {m} exceed the {}x{} frame",
            frames.width(),
            frames.height()
        )));
    }
    let n = frames.len();
    let zi = standardize(frames, &ri)?;
    let zs = standardize(frames, &window)?;
    let partner: Vec<(usize, usize)> = ri
        .pixels()
        .map(|(x, y)| pair.mirror(x, y).expect("mirror lies in the signal region"))
        .collect();
    let side = 2 * m + 1;
    let values = exec.map_indexed(side * side, |k| {
        let (dx, dy) = (k % side, k / side);
        let mut acc = 0.0;
        for (p, &(mx, my)) in partner.iter().enumerate() {
            let wx = mx - rs.x0 + dx;
            let wy = my - rs.y0 + dy;
            let q = wy * window.width + wx;
            let a = &zi[p * n..(p + 1) * n];
            let b = &zs[q * n..(q + 1) * n];
            acc += a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
        }
        acc / partner.len() as f64
    });
    CorrelationMap::new(m, pair.l_um() / ri.width as f64, values)
}

/// FWHM-based coherence radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceRadius {
    /// Mean of the two axis FWHMs, μm.
    pub r: f64,
    pub u_r: f64,
    pub fwhm_x: f64,
    pub fwhm_y: f64,
    pub peak: (i64, i64),
    pub peak_value: f64,
    pub baseline: f64,
    /// Set when a neighbor of the peak is already below half maximum, so
    /// the width is not resolved by the pixel grid.
    pub under_resolved: bool,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct Crossing {
    log: f64,
    lin: f64,
    first_step: bool,
}

// distance (in pixels) from the peak to the half-height crossing along (sx, sy)
fn crossing(
    map: &CorrelationMap,
    peak: (i64, i64),
    step: (i64, i64),
    base: f64,
    half: f64,
) -> Result<Crossing> {
    let m = map.max_shift() as i64;
    let h0_peak = map.get(peak.0, peak.1) - base;
    let hh = half - base;
    let mut prev = h0_peak;
    for k in 1.. {
        let (x, y) = (peak.0 + k * step.0, peak.1 + k * step.1);
        if x.abs() > m || y.abs() > m {
            return Err(Error::degenerate(
                "correlation peak does not fall to half maximum inside the map".to_string(),
            ));
        }
        let h = map.get(x, y) - base;
        if h < hh {
            let lin = (prev - hh) / (prev - h);
            let log = if h > 0.0 {
                (prev / hh).ln() / (prev / h).ln()
            } else {
                lin
            };
            return Ok(Crossing {
                log: (k - 1) as f64 + log,
                lin: (k - 1) as f64 + lin,
                first_step: k == 1,
            });
        }
        prev = h;
    }
    unreachable!()
}

/// Coherence radius as the FWHM of the correlation peak.
///
/// Half-maximum crossings are interpolated linearly in log height (exact for
/// a Gaussian profile) and averaged over the two axes. `u_r` combines the
/// half-spread between axes with half the gap to plain linear interpolation.
pub fn coherence_radius(map: &CorrelationMap) -> Result<CoherenceRadius> {
    let m = map.max_shift() as i64;
    if m < 2 {
        return Err(Error::invalid("map", "shift range must be at least 2"));
    }
    let (mut peak, mut best, mut ties) = ((0, 0), f64::NEG_INFINITY, 0);
    for (dx, dy, v) in map.entries() {
        if v > best {
            (peak, best, ties) = ((dx, dy), v, 1);
        } else if v == best {
            ties += 1;
        }
    }
    if ties > 1 {
        return Err(Error::degenerate(
            "correlation map has no unique maximum".to_string(),
        ));
    }
    let mut tail: Vec<f64> = map
        .entries()
        .filter(|(dx, dy, _)| dx.abs() == m || dy.abs() == m)
        .map(|(_, _, v)| v)
        .collect();
    let base = median(&mut tail);
    let mut dev: Vec<f64> = tail.iter().map(|v| (v - base).abs()).collect();
    let mad = median(&mut dev);
    if best - base <= 5.0 * mad || best <= base {
        return Err(Error::degenerate(format!(
            "correlation peak {best:.4} is not above the noise floor \
             (tail median {base:.4}, MAD {mad:.4})"
        )));
    }
    let half = base + 0.5 * (best - base);
    let mut fwhm = [[0.0; 2]; 2];
    let mut under_resolved = false;
    for (axis, step) in [(1, 0), (0, 1)].into_iter().enumerate() {
        let fwd = crossing(map, peak, step, base, half)?;
        let back = crossing(map, peak, (-step.0, -step.1), base, half)?;
        under_resolved |= fwd.first_step || back.first_step;
        fwhm[axis] = [
            (fwd.log + back.log) * map.pitch(),
            (fwd.lin + back.lin) * map.pitch(),
        ];
    }
    let (fx, fy) = (fwhm[0][0], fwhm[1][0]);
    let interp = 0.25 * ((fwhm[0][1] - fx).abs() + (fwhm[1][1] - fy).abs());
    Ok(CoherenceRadius {
        r: 0.5 * (fx + fy),
        u_r: (0.5 * (fx - fy)).hypot(interp),
        fwhm_x: fx,
        fwhm_y: fy,
        peak,
        peak_value: best,
        baseline: base,
        under_resolved,
    })
}
