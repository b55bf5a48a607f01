use crate::error::{Error, Result};
use crate::geometry::{Rect, RegionPair};
use crate::stats::FrameStack;

/// Per-frame integrated counts over the two regions of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSeries {
    n_i: Vec<f64>,
    n_s: Vec<f64>,
}

impl PairSeries {
    pub fn new(n_i: Vec<f64>, n_s: Vec<f64>) -> Result<Self> {
        if n_i.len() != n_s.len() {
            return Err(Error::invalid(
                "series",
                format!("arm lengths differ: {} vs {}", n_i.len(), n_s.len()),
            ));
        }
        if n_i.is_empty() {
            return Err(Error::invalid("series", "no frames"));
        }
        if n_i.iter().chain(&n_s).any(|v| !v.is_finite()) {
            return Err(Error::invalid("series", "non-finite count"));
        }
        Ok(PairSeries { n_i, n_s })
    }

    pub fn n_i(&self) -> &[f64] {
        &self.n_i
    }
    pub fn n_s(&self) -> &[f64] {
        &self.n_s
    }
    pub fn frame_count(&self) -> usize {
        self.n_i.len()
    }

    /// Series built from the frames at `indices` (with repetition).
    pub fn resample(&self, indices: &[usize]) -> PairSeries {
        PairSeries {
            n_i: indices.iter().map(|&k| self.n_i[k]).collect(),
            n_s: indices.iter().map(|&k| self.n_s[k]).collect(),
        }
    }
}

fn check_region(stack: &FrameStack, r: &Rect, which: &str) -> Result<()> {
    if !r.fits_in(stack.width(), stack.height()) {
        return Err(Error::Geometry(format!(
            "{which} region {r:?} exceeds the {}x{} frame",
            stack.width(),
            stack.height()
        )));
    }
    Ok(())
}

fn region_sum(frame: &[f32], width: usize, r: &Rect) -> f64 {
    let mut acc = 0.0;
    for y in r.y0..r.y0 + r.height {
        let row = &frame[y * width + r.x0..y * width + r.x0 + r.width];
        acc += row.iter().map(|&v| v as f64).sum::<f64>();
    }
    acc
}

/// Exact per-frame sums over `pair`'s two regions.
pub fn extract_series(stack: &FrameStack, pair: &RegionPair) -> Result<PairSeries> {
    extract_rects(stack, &pair.region_i(), &pair.region_s())
}

/// Like [`extract_series`] for an arbitrary pair of rectangles.
pub fn extract_rects(stack: &FrameStack, ri: &Rect, rs: &Rect) -> Result<PairSeries> {
    if stack.is_empty() {
        return Err(Error::invalid("frames", "empty frame stack"));
    }
    check_region(stack, ri, "idler")?;
    check_region(stack, rs, "signal")?;
    let w = stack.width();
    let (n_i, n_s) = stack
        .frames()
        .map(|f| (region_sum(f, w, ri), region_sum(f, w, rs)))
        .unzip();
    PairSeries::new(n_i, n_s)
}

/// Series for each pair in one pass over the stack.
pub fn extract_many(stack: &FrameStack, pairs: &[RegionPair]) -> Result<Vec<PairSeries>> {
    if stack.is_empty() {
        return Err(Error::invalid("frames", "empty frame stack"));
    }
    for p in pairs {
        check_region(stack, &p.region_i(), "idler")?;
        check_region(stack, &p.region_s(), "signal")?;
    }
    let w = stack.width();
    let mut cols: Vec<(Vec<f64>, Vec<f64>)> = pairs
        .iter()
        .map(|_| {
            (
                Vec::with_capacity(stack.len()),
                Vec::with_capacity(stack.len()),
            )
        })
        .collect();
    for f in stack.frames() {
        for (p, (ci, cs)) in pairs.iter().zip(cols.iter_mut()) {
            ci.push(region_sum(f, w, &p.region_i()));
            cs.push(region_sum(f, w, &p.region_s()));
        }
    }
    cols.into_iter()
        .map(|(a, b)| PairSeries::new(a, b))
        .collect()
}
