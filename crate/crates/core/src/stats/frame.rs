use crate::error::{Error, Result};

/// One readout: row-major per-pixel signal in photo-electrons.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    values: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::invalid(
                "frame",
                format!("{} values for a {width}x{height} frame", values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "frame",
                format!("non-finite value at pixel ({}, {})", i % width, i / width),
            ));
        }
        Ok(Frame {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Frame {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn values(&self) -> &[f32] {
        &self.values
    }
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }
    pub fn sum(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum()
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }
}

/// Sums each `k`x`k` block into one output pixel (software binning).
pub fn bin_frame(frame: &Frame, k: usize) -> Result<Frame> {
    if k == 0 {
        return Err(Error::invalid("k", "binning factor must be >= 1"));
    }
    if !frame.width.is_multiple_of(k) || !frame.height.is_multiple_of(k) {
        return Err(Error::invalid(
            "k",
            format!("{}x{} is not divisible by {k}", frame.width, frame.height),
        ));
    }
    if k == 1 {
        return Ok(frame.clone());
    }
    let (bw, bh) = (frame.width / k, frame.height / k);
    let mut acc = vec![0.0f64; bw * bh];
    for y in 0..frame.height {
        let row = &frame.values[y * frame.width..(y + 1) * frame.width];
        let out = &mut acc[(y / k) * bw..(y / k + 1) * bw];
        for (x, &v) in row.iter().enumerate() {
            out[x / k] += v as f64;
        }
    }
    Ok(Frame {
        width: bw,
        height: bh,
        values: acc.into_iter().map(|v| v as f32).collect(),
    })
}

/// Frames of identical shape stored contiguously, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl FrameStack {
    pub fn new(width: usize, height: usize) -> Self {
        FrameStack {
            width,
            height,
            data: Vec::new(),
        }
    }

    /// Wraps raw frame-major data; the length must be a whole number of frames.
    pub fn from_raw(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        let px = width * height;
        if px == 0 || !data.len().is_multiple_of(px) {
            return Err(Error::invalid(
                "frame stack",
                format!("{} values do not form {width}x{height} frames", data.len()),
            ));
        }
        Ok(FrameStack {
            width,
            height,
            data,
        })
    }

    pub fn from_frames(frames: Vec<Frame>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("frame stack", "no frames"))?;
        let mut stack = FrameStack::new(first.width, first.height);
        stack.data.reserve(frames.len() * first.values.len());
        for f in &frames {
            stack.push(f)?;
        }
        Ok(stack)
    }

    pub fn push(&mut self, frame: &Frame) -> Result<()> {
        if frame.width != self.width || frame.height != self.height {
            return Err(Error::invalid(
                "frame stack",
                format!(
                    "frame is {}x{}, stack is {}x{}",
                    frame.width, frame.height, self.width, self.height
                ),
            ));
        }
        self.data.extend_from_slice(&frame.values);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn pixels_per_frame(&self) -> usize {
        self.width * self.height
    }

    pub fn len(&self) -> usize {
        match self.pixels_per_frame() {
            0 => 0,
            px => self.data.len() / px,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        let px = self.pixels_per_frame();
        &self.data[i * px..(i + 1) * px]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.pixels_per_frame().max(1))
    }

    pub fn to_frame(&self, i: usize) -> Frame {
        Frame {
            width: self.width,
            height: self.height,
            values: self.frame(i).to_vec(),
        }
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Domain};
    use rand::Rng;

    #[test]
    fn binning_ones_sums_blocks() {
        let f = Frame::new(48, 48, vec![1.0; 48 * 48]).unwrap();
        let b = bin_frame(&f, 24).unwrap();
        assert_eq!((b.width(), b.height()), (2, 2));
        assert!(b.values().iter().all(|&v| v == 576.0));
    }

    #[test]
    fn binning_by_one_is_identity() {
        let f = Frame::new(3, 2, vec![1.5, 2.0, 0.0, 4.0, 5.0, 6.25]).unwrap();
        assert_eq!(bin_frame(&f, 1).unwrap(), f);
    }

    #[test]
    fn binning_conserves_integer_counts_exactly() {
        let mut rng = substream(9, Domain::Misc, 0);
        let vals: Vec<f32> = (0..96 * 96)
            .map(|_| rng.random_range(0..5000) as f32)
            .collect();
        let f = Frame::new(96, 96, vals).unwrap();
        let b = bin_frame(&f, 24).unwrap();
        assert_eq!(b.sum(), f.sum());
    }

    #[test]
    fn binning_rejects_non_divisible() {
        let f = Frame::zeros(50, 48);
        assert!(bin_frame(&f, 24).is_err());
        assert!(bin_frame(&f, 0).is_err());
    }

    #[test]
    fn frame_rejects_nan_and_bad_length() {
        assert!(Frame::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Frame::new(2, 1, vec![0.0, f32::NAN]).is_err());
    }

    #[test]
    fn stack_indexing() {
        let a = Frame::new(2, 1, vec![1.0, 2.0]).unwrap();
        let b = Frame::new(2, 1, vec![3.0, 4.0]).unwrap();
        let s = FrameStack::from_frames(vec![a, b.clone()]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.frame(1), &[3.0, 4.0]);
        assert_eq!(s.to_frame(1), b);
        assert!(FrameStack::from_frames(vec![]).is_err());
        let mut s2 = s.clone();
        assert!(s2.push(&Frame::zeros(1, 1)).is_err());
    }
}
