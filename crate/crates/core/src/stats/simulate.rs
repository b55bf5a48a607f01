use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::frame::{Frame, FrameStack};
use super::lattice::{ModeLattice, BORDER_BAND_FACTOR};
use super::sampling::{thin_unchecked, ThermalSampler};
use super::scene::{Fidelity, SceneModel, SensorModel};
use super::spread::landing_radius;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::{substream, Domain};

/// Where the photons of one arm of one site go in point mode.
#[derive(Debug, Clone, Copy)]
struct Landing {
    own: Option<usize>,
    border: bool,
    /// Pixel across the nearest super-pixel edge, for border sites.
    neighbor: Option<usize>,
}

#[derive(Debug, Clone)]
enum Placement {
    Point {
        idler: Vec<Landing>,
        signal: Vec<Landing>,
    },
    // mode centers are redrawn uniformly over the idler domain every frame
    Spread {
        rho: f64,
        modes: usize,
        domain: [f64; 2],
        center: [f64; 2],
    },
}

/// Precomputed per-site geometry for repeated frame synthesis.
#[derive(Debug, Clone)]
pub struct FrameSynth {
    sensor: SensorModel,
    eta_i: f64,
    eta_s: f64,
    beta: f64,
    thermal: ThermalSampler,
    placement: Placement,
    read_noise: Option<Normal<f64>>,
    stray: Option<Poisson<f64>>,
}

fn point_landing(sensor: &SensorModel, p: [f64; 2], band: f64) -> Landing {
    let pitch = sensor.readout_pitch();
    let own = sensor.readout_index(p);
    let edge = |c: f64| {
        let line = (c / pitch).round() * pitch;
        (line, (c - line).abs())
    };
    let (line_x, dx) = edge(p[0]);
    let (line_y, dy) = edge(p[1]);
    if dx.min(dy) >= band {
        return Landing {
            own,
            border: false,
            neighbor: None,
        };
    }
    let mirrored = if dx <= dy {
        [2.0 * line_x - p[0], p[1]]
    } else {
        [p[0], 2.0 * line_y - p[1]]
    };
    Landing {
        own,
        border: true,
        neighbor: sensor.readout_index(mirrored),
    }
}

impl FrameSynth {
    pub fn new(scene: &SceneModel, sensor: &SensorModel, lattice: &ModeLattice) -> Result<Self> {
        if !lattice.is_consistent_with(scene, sensor) {
            return Err(Error::Geometry(
                "mode lattice was built for a different scene or sensor".into(),
            ));
        }
        let placement = match scene.fidelity() {
            Fidelity::PointMode => {
                let band = BORDER_BAND_FACTOR * scene.r_coh();
                let (idler, signal) = lattice
                    .sites()
                    .iter()
                    .map(|s| {
                        (
                            point_landing(sensor, s.idler, band),
                            point_landing(sensor, s.signal, band),
                        )
                    })
                    .unzip();
                Placement::Point { idler, signal }
            }
            Fidelity::SpreadMode => Placement::Spread {
                rho: landing_radius(scene.r_coh(), sensor.pixel_pitch())?,
                modes: lattice.len(),
                domain: lattice.idler_domain(),
                center: lattice.center_um(),
            },
        };
        let bin = sensor.bin_factor() as f64;
        let read_std = if scene.noise_after_binning() {
            scene.read_noise_std()
        } else {
            // k^2 independent reads per super-pixel
            bin * scene.read_noise_std()
        };
        let read_noise = (read_std > 0.0)
            .then(|| Normal::new(0.0, read_std))
            .transpose()
            .map_err(|e| Error::invalid("read_noise_std", e.to_string()))?;
        let stray_mean = scene.stray_mean() * bin * bin;
        let stray = (stray_mean > 0.0)
            .then(|| Poisson::new(stray_mean))
            .transpose()
            .map_err(|e| Error::invalid("stray_mean", e.to_string()))?;
        Ok(FrameSynth {
            sensor: sensor.clone(),
            eta_i: scene.eta_i(),
            eta_s: scene.eta_s(),
            beta: scene.beta(),
            thermal: ThermalSampler::new(scene.mu())?,
            placement,
            read_noise,
            stray,
        })
    }

    pub fn frame<R: Rng + ?Sized>(&self, rng: &mut R) -> Frame {
        let (w, h) = (self.sensor.readout_width(), self.sensor.readout_height());
        let mut counts = vec![0u64; w * h];
        match &self.placement {
            Placement::Point { idler, signal } => {
                for (li, ls) in idler.iter().zip(signal) {
                    let n = self.thermal.sample(rng);
                    if n == 0 {
                        continue;
                    }
                    let ki = thin_unchecked(n, self.eta_i, rng);
                    let ks = thin_unchecked(n, self.eta_s, rng);
                    self.deposit_point(&mut counts, li, ki, rng);
                    self.deposit_point(&mut counts, ls, ks, rng);
                }
            }
            Placement::Spread {
                rho,
                modes,
                domain,
                center,
            } => {
                for _ in 0..*modes {
                    let n = self.thermal.sample(rng);
                    if n == 0 {
                        continue;
                    }
                    let idler = [
                        domain[0] * rng.random::<f64>(),
                        domain[1] * rng.random::<f64>(),
                    ];
                    let signal = [2.0 * center[0] - idler[0], 2.0 * center[1] - idler[1]];
                    let ki = thin_unchecked(n, self.eta_i, rng);
                    let ks = thin_unchecked(n, self.eta_s, rng);
                    self.deposit_spread(&mut counts, idler, *rho, ki, rng);
                    self.deposit_spread(&mut counts, signal, *rho, ks, rng);
                }
            }
        }

        let mut frame = Frame::zeros(w, h);
        for (v, &c) in frame.values_mut().iter_mut().zip(&counts) {
            let mut x = c as f64;
            if let Some(stray) = &self.stray {
                x += stray.sample(rng);
            }
            if let Some(noise) = &self.read_noise {
                x += noise.sample(rng);
            }
            *v = x as f32;
        }
        frame
    }

    fn deposit_point<R: Rng + ?Sized>(
        &self,
        counts: &mut [u64],
        landing: &Landing,
        k: u64,
        rng: &mut R,
    ) {
        if k == 0 {
            return;
        }
        let stay = if landing.border {
            thin_unchecked(k, self.beta, rng)
        } else {
            k
        };
        if let Some(i) = landing.own {
            counts[i] += stay;
        }
        if let Some(j) = landing.neighbor {
            counts[j] += k - stay;
        }
    }

    fn deposit_spread<R: Rng + ?Sized>(
        &self,
        counts: &mut [u64],
        center: [f64; 2],
        rho: f64,
        k: u64,
        rng: &mut R,
    ) {
        for _ in 0..k {
            let radius = rho * rng.random::<f64>().sqrt();
            let (sin, cos) = (2.0 * PI * rng.random::<f64>()).sin_cos();
            let p = [center[0] + radius * cos, center[1] + radius * sin];
            if let Some(i) = self.sensor.readout_index(p) {
                counts[i] += 1;
            }
        }
    }

    /// `n` frames, frame `k` drawn from substream `(seed, domain, k)`.
    pub fn stack(&self, n: usize, seed: u64, domain: Domain, exec: Exec) -> FrameStack {
        let frames = exec.map_indexed(n, |k| self.frame(&mut substream(seed, domain, k as u64)));
        let (w, h) = (self.sensor.readout_width(), self.sensor.readout_height());
        let mut data = Vec::with_capacity(n * w * h);
        for f in &frames {
            data.extend_from_slice(f.values());
        }
        FrameStack::from_raw(w, h, data).unwrap_or_else(|_| FrameStack::new(w, h))
    }
}

/// One readout of the sensor (binned when `sensor.bin_factor() > 1`).
pub fn simulate_frame<R: Rng + ?Sized>(
    scene: &SceneModel,
    sensor: &SensorModel,
    lattice: &ModeLattice,
    rng: &mut R,
) -> Result<Frame> {
    Ok(FrameSynth::new(scene, sensor, lattice)?.frame(rng))
}

pub fn simulate_stack(
    scene: &SceneModel,
    sensor: &SensorModel,
    lattice: &ModeLattice,
    n_frames: usize,
    seed: u64,
    exec: Exec,
) -> Result<FrameStack> {
    if n_frames == 0 {
        return Err(Error::invalid("n_frames", "must be >= 1"));
    }
    Ok(FrameSynth::new(scene, sensor, lattice)?.stack(n_frames, seed, Domain::Frame, exec))
}

/// Frames with the twin-beam light off: stray light and read noise only.
pub fn simulate_background_stack(
    scene: &SceneModel,
    sensor: &SensorModel,
    n_frames: usize,
    seed: u64,
    exec: Exec,
) -> Result<FrameStack> {
    if n_frames == 0 {
        return Err(Error::invalid("n_frames", "must be >= 1"));
    }
    let dark = scene.dark();
    let lattice = ModeLattice::build(&dark, sensor);
    Ok(FrameSynth::new(&dark, sensor, &lattice)?.stack(n_frames, seed, Domain::Background, exec))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sensor() -> SensorModel {
        SensorModel::new(80, 40, 20.0, 10, [40.0, 20.0]).unwrap()
    }

    #[test]
    fn dark_frames_are_read_noise_about_stray() {
        let scene = SceneModel::new(0.0, 43.0, 0.72, 0.784)
            .unwrap()
            .with_read_noise(2.0)
            .unwrap();
        let s = sensor();
        let lattice = ModeLattice::build(&scene, &s);
        let stack = simulate_stack(&scene, &s, &lattice, 400, 1, Exec::Parallel).unwrap();
        let vals: Vec<f64> = stack.data().iter().map(|&v| v as f64).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.05, "{mean}");
        assert!((var.sqrt() - 2.0).abs() < 0.05, "{}", var.sqrt());
    }

    #[test]
    fn noise_before_binning_scales_with_bin_factor() {
        let scene = SceneModel::new(0.0, 43.0, 0.72, 0.784)
            .unwrap()
            .with_read_noise(1.0)
            .unwrap()
            .with_noise_after_binning(false);
        let s = sensor();
        let lattice = ModeLattice::build(&scene, &s);
        let stack = simulate_stack(&scene, &s, &lattice, 400, 2, Exec::Parallel).unwrap();
        let n = stack.data().len() as f64;
        let var = stack
            .data()
            .iter()
            .map(|&v| (v as f64).powi(2))
            .sum::<f64>()
            / n;
        assert!((var.sqrt() - 10.0).abs() < 0.3, "{}", var.sqrt());
    }

    #[test]
    fn lossless_point_mode_frames_are_mirror_images() {
        // beta = 1: border photons never cross an edge
        let scene = SceneModel::new(0.5, 43.0, 1.0, 1.0)
            .unwrap()
            .with_beta(1.0)
            .unwrap();
        let s = sensor();
        let lattice = ModeLattice::build(&scene, &s);
        let stack = simulate_stack(&scene, &s, &lattice, 50, 3, Exec::Sequential).unwrap();
        let (w, h) = (stack.width(), stack.height());
        for f in stack.frames() {
            let left: f32 = (0..h)
                .flat_map(|y| (0..w / 2).map(move |x| (x, y)))
                .map(|(x, y)| f[y * w + x])
                .sum();
            let right: f32 = (0..h)
                .flat_map(|y| (w / 2..w).map(move |x| (x, y)))
                .map(|(x, y)| f[y * w + x])
                .sum();
            assert_eq!(left, right);
            for y in 0..h {
                for x in 0..w {
                    assert_eq!(f[y * w + x], f[(h - 1 - y) * w + (w - 1 - x)]);
                }
            }
        }
    }

    #[test]
    fn frames_are_integral_without_noise() {
        let scene = SceneModel::new(0.3, 43.0, 0.72, 0.784)
            .unwrap()
            .with_fidelity(Fidelity::SpreadMode);
        let s = sensor();
        let lattice = ModeLattice::build(&scene, &s);
        let stack = simulate_stack(&scene, &s, &lattice, 20, 4, Exec::Parallel).unwrap();
        assert!(stack.data().iter().all(|&v| v >= 0.0 && v.fract() == 0.0));
        assert!(stack.data().iter().any(|&v| v > 0.0));
    }

    #[test]
    fn stale_lattice_rejected() {
        let scene = SceneModel::new(0.3, 43.0, 0.72, 0.784).unwrap();
        let s = sensor();
        let lattice = ModeLattice::build(&scene, &s);
        let other = SceneModel::new(0.3, 60.0, 0.72, 0.784).unwrap();
        let mut rng = substream(0, Domain::Misc, 0);
        assert!(matches!(
            simulate_frame(&other, &s, &lattice, &mut rng),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn parallel_and_sequential_stacks_are_bit_identical() {
        let scene = SceneModel::new(0.2, 43.0, 0.72, 0.784)
            .unwrap()
            .with_read_noise(1.5)
            .unwrap()
            .with_stray(0.01)
            .unwrap();
        let s = sensor();
        let lattice = ModeLattice::build(&scene, &s);
        let a = simulate_stack(&scene, &s, &lattice, 64, 11, Exec::Sequential).unwrap();
        let b = simulate_stack(&scene, &s, &lattice, 64, 11, Exec::Parallel).unwrap();
        let bits = |st: &FrameStack| st.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}
