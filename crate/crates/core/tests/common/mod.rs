#![allow(dead_code)]

use twinbeam::geometry::Rect;
use twinbeam::io::ExperimentConfig;
use twinbeam::stats::{ModeLattice, SensorModel};

/// Desk-scale point-mode experiment: 200 μm super-pixels, idler arm centered
/// 1400 μm from the sensor edge, about a thousand modes in the largest
/// region.
pub const DESK: &str = "\
mu = 0.01
r_coh = 43
eta_i = 0.72
eta_s = 0.784
beta = 0.5
fidelity = point
width = 280
height = 140
pixel_pitch = 20
bin_factor = 10
cs_x = 140
cs_y = 70
arm_x = 70
arm_y = 70
seed = 20240611
frames = 5000
background_frames = 5000
l_list = 3,4,5,6,7,8,9,10,11,12
bootstrap = 1000
";

pub fn desk() -> ExperimentConfig {
    ExperimentConfig::parse(DESK).unwrap()
}

pub fn desk_with(overrides: &[(&str, &str)]) -> ExperimentConfig {
    let o: Vec<(&str, String)> = overrides.iter().map(|(k, v)| (*k, v.to_string())).collect();
    desk().with_overrides(&o).unwrap()
}

/// Unbinned spread-mode scene for the correlation map.
pub const COHERENCE: &str = "\
mu = 1
r_coh = 43
eta_i = 0.72
eta_s = 0.784
fidelity = spread
width = 96
height = 48
pixel_pitch = 20
bin_factor = 1
cs_x = 48
cs_y = 24
arm_x = 24
arm_y = 24
coherence_size = 24
max_shift = 6
seed = 77
frames = 2000
";

/// Centering scan with 480 μm super-pixels and an injected misalignment.
pub const CENTERING: &str = "\
mu = 0.5
r_coh = 43
eta_i = 0.72
eta_s = 0.784
fidelity = spread
width = 240
height = 120
pixel_pitch = 20
bin_factor = 24
cs_x = 120
cs_y = 60
offset_x = 30
offset_y = -12
seed = 4242
frames = 500
scan_step = 10
scan_steps = 11
scan_frames = 500
scan_passes = 3
";

fn pixel_of(sensor: &SensorModel, p: [f64; 2]) -> Option<(usize, usize)> {
    let pitch = sensor.readout_pitch();
    let (x, y) = (p[0] / pitch, p[1] / pitch);
    if x < 0.0 || y < 0.0 {
        return None;
    }
    let (x, y) = (x.floor() as usize, y.floor() as usize);
    (x < sensor.readout_width() && y < sensor.readout_height()).then_some((x, y))
}

/// Expected fraction of one arm's detected photons from a mode centered at
/// `p` that land inside `rect`, in point mode.
///
/// A mode within π r/4 of a super-pixel edge is a border mode: a fraction β
/// of its photons stays in its own pixel and the rest crosses the nearest
/// edge.
pub fn collected_fraction(
    sensor: &SensorModel,
    r_coh: f64,
    beta: f64,
    p: [f64; 2],
    rect: &Rect,
) -> f64 {
    let pitch = sensor.readout_pitch();
    let inside = |q: [f64; 2]| pixel_of(sensor, q).is_some_and(|(x, y)| rect.contains(x, y));
    let nearest = |c: f64| {
        let line = (c / pitch).round() * pitch;
        (line, (c - line).abs())
    };
    let (lx, dx) = nearest(p[0]);
    let (ly, dy) = nearest(p[1]);
    let band = std::f64::consts::PI * r_coh / 4.0;
    let own = if inside(p) { 1.0 } else { 0.0 };
    if dx.min(dy) >= band {
        return own;
    }
    let across = if dx <= dy {
        [2.0 * lx - p[0], p[1]]
    } else {
        [p[0], 2.0 * ly - p[1]]
    };
    beta * own + (1.0 - beta) * if inside(across) { 1.0 } else { 0.0 }
}

/// Moments predicted from per-mode collection fractions:
/// [⟨N_i⟩, ⟨N_s⟩, Var N_i, Var N_s, Cov].
#[allow(clippy::too_many_arguments)]
pub fn predicted_moments(
    lattice: &ModeLattice,
    sensor: &SensorModel,
    ri: &Rect,
    rs: &Rect,
    mu: f64,
    eta: [f64; 2],
    r_coh: f64,
    beta: f64,
) -> [f64; 5] {
    let mut m = [0.0; 5];
    for site in lattice.sites() {
        let fi = collected_fraction(sensor, r_coh, beta, site.idler, ri);
        let fs = collected_fraction(sensor, r_coh, beta, site.signal, rs);
        // regions away from the symmetry line never see the other arm
        assert_eq!(
            collected_fraction(sensor, r_coh, beta, site.signal, ri),
            0.0
        );
        assert_eq!(collected_fraction(sensor, r_coh, beta, site.idler, rs), 0.0);
        let (gi, gs) = (eta[0] * fi, eta[1] * fs);
        m[0] += gi * mu;
        m[1] += gs * mu;
        m[2] += gi * mu * (1.0 + gi * mu);
        m[3] += gs * mu * (1.0 + gs * mu);
        m[4] += gi * gs * mu * (1.0 + mu);
    }
    m
}

/// Sample moments with their standard errors, in the order of
/// [`predicted_moments`].
pub fn sample_moments(a: &[f64], b: &[f64]) -> ([f64; 5], [f64; 5]) {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let central = |f: &dyn Fn(f64, f64) -> f64| {
        a.iter().zip(b).map(|(x, y)| f(x - ma, y - mb)).sum::<f64>() / n
    };
    let va = central(&|x, _| x * x) * n / (n - 1.0);
    let vb = central(&|_, y| y * y) * n / (n - 1.0);
    let cab = central(&|x, y| x * y) * n / (n - 1.0);
    let m4a = central(&|x, _| x.powi(4));
    let m4b = central(&|_, y| y.powi(4));
    let m22 = central(&|x, y| x * x * y * y);
    let se = [
        (va / n).sqrt(),
        (vb / n).sqrt(),
        ((m4a - va * va) / n).sqrt(),
        ((m4b - vb * vb) / n).sqrt(),
        ((m22 - cab * cab) / n).sqrt(),
    ];
    ([ma, mb, va, vb, cab], se)
}

/// Prints the criterion line in a fixed format and returns whether it passed.
///
/// Writes to the stdout handle directly so the line survives the test
/// harness's output capture.
pub fn report(id: &str, pass: bool, detail: impl std::fmt::Display) -> bool {
    use std::io::Write;
    let line = format!(
        "criterion {id}: {} | {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    pass
}
