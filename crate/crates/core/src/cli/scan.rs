//! Simulated sensor-displacement scans for centering.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::estimators::{center_scan, extract_many, parabola_fit, ScanPoint, ScanStep, VertexFit};
use crate::exec::Exec;
use crate::geometry::{pixel_pairs, RegionPair};
use crate::rng::{substream, Domain};
use crate::stats::{FrameSynth, ModeLattice, SceneModel, SensorModel};

use crate::io::ScanSettings;

/// One pass of a single-axis scan.
#[derive(Debug, Clone)]
pub struct ScanPass {
    pub center: f64,
    pub points: Vec<ScanPoint>,
    pub fit: VertexFit,
}

#[derive(Debug, Clone)]
pub struct AxisScan {
    pub axis: usize,
    pub passes: Vec<ScanPass>,
}

impl AxisScan {
    pub fn fit(&self) -> &VertexFit {
        &self.passes.last().expect("at least one pass").fit
    }
}

fn step_seed(seed: u64, axis: usize, pass: usize, step: usize) -> u64 {
    let index = ((axis as u64) << 40) | ((pass as u64) << 20) | step as u64;
    substream(seed, Domain::Scan, index).next_u64()
}

/// Series of every super-pixel pair at sensor displacement `position`.
///
/// Moving the sensor by `position` is equivalent to moving the twin-beam
/// center of symmetry by `-position` relative to the pixel grid.
fn step_series(
    scene: &SceneModel,
    sensor: &SensorModel,
    pairs: &[RegionPair],
    position: [f64; 2],
    frames: usize,
    seed: u64,
    exec: Exec,
) -> Result<ScanStep> {
    let d0 = scene.d_offset();
    let shifted = scene
        .clone()
        .with_offset([d0[0] - position[0], d0[1] - position[1]])?;
    let lattice = ModeLattice::build(&shifted, sensor);
    let synth = FrameSynth::new(&shifted, sensor, &lattice)?;
    let stack = synth.stack(frames, seed, Domain::Frame, exec);
    Ok(ScanStep {
        displacement: 0.0,
        pairs: extract_many(&stack, pairs)?,
    })
}

/// Scans `axis` with the other coordinate held at `fixed`, refining the
/// scan center on the previous vertex for each pass.
///
/// The scene's offset is the injected misalignment to be found.
pub fn simulate_axis_scan(
    scene: &SceneModel,
    sensor: &SensorModel,
    settings: &ScanSettings,
    axis: usize,
    fixed: f64,
    seed: u64,
    exec: Exec,
) -> Result<AxisScan> {
    let pairs = pixel_pairs(sensor, sensor.cs_um());
    if pairs.is_empty() {
        return Err(Error::Geometry(
            "no super-pixel pairs fit on the sensor".into(),
        ));
    }
    let mut center = 0.0;
    let mut passes = Vec::with_capacity(settings.passes);
    for pass in 0..settings.passes {
        let half = (settings.steps - 1) as f64 / 2.0;
        let mut steps = Vec::with_capacity(settings.steps);
        for k in 0..settings.steps {
            let along = center + (k as f64 - half) * settings.step;
            let mut position = [0.0; 2];
            position[axis] = along;
            position[1 - axis] = fixed;
            let mut step = step_series(
                scene,
                sensor,
                &pairs,
                position,
                settings.frames,
                step_seed(seed, axis, pass, k),
                exec,
            )?;
            step.displacement = along;
            steps.push(step);
        }
        let points = center_scan(&steps, None)?;
        let fit = parabola_fit(&points)?;
        passes.push(ScanPass {
            center,
            points,
            fit,
        });
        // keep the next pass inside the previous span
        let span = half * settings.step;
        center = fit.d_min.clamp(center - span, center + span);
    }
    Ok(AxisScan { axis, passes })
}

/// x scan, then a y scan at the fitted x position.
pub fn simulate_double_scan(
    scene: &SceneModel,
    sensor: &SensorModel,
    settings: &ScanSettings,
    seed: u64,
    exec: Exec,
) -> Result<[AxisScan; 2]> {
    let x = simulate_axis_scan(scene, sensor, settings, 0, 0.0, seed, exec)?;
    let y = simulate_axis_scan(scene, sensor, settings, 1, x.fit().d_min, seed, exec)?;
    Ok([x, y])
}
