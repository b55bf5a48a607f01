use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use twinbeam::cli::{calibrate_stacks, coherence_from_stack};
use twinbeam::io::ExperimentConfig;
use twinbeam::stats::{simulate_background_stack, simulate_stack, ModeLattice};
use twinbeam::Exec;

const DESK: &str = "\
mu = 0.01
r_coh = 43
eta_i = 0.72
eta_s = 0.784
width = 280
height = 140
pixel_pitch = 20
bin_factor = 10
arm_x = 70
arm_y = 70
frames = 2000
l_list = 3,4,5,6,7,8,9,10,11,12
bootstrap = 200
";

const COHERENCE: &str = "\
mu = 1
r_coh = 43
eta_i = 0.72
eta_s = 0.784
fidelity = spread
width = 96
height = 48
pixel_pitch = 20
arm_x = 24
arm_y = 24
coherence_size = 24
max_shift = 6
frames = 500
";

fn policies() -> Vec<(&'static str, Exec)> {
    let mut v = vec![("sequential", Exec::Sequential)];
    if Exec::default() != Exec::Sequential {
        v.push(("parallel", Exec::default()));
    }
    v
}

fn synthesis(c: &mut Criterion) {
    let cfg = ExperimentConfig::parse(DESK).unwrap();
    let lattice = ModeLattice::build(&cfg.scene, &cfg.sensor);
    let mut g = c.benchmark_group("simulate_2000_frames");
    g.sample_size(10);
    for (name, exec) in policies() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                simulate_stack(&cfg.scene, &cfg.sensor, &lattice, cfg.frames, 1, exec).unwrap()
            })
        });
    }
    g.finish();
}

fn calibration(c: &mut Criterion) {
    let cfg = ExperimentConfig::parse(DESK).unwrap();
    let lattice = ModeLattice::build(&cfg.scene, &cfg.sensor);
    let frames = simulate_stack(
        &cfg.scene,
        &cfg.sensor,
        &lattice,
        cfg.frames,
        1,
        Exec::default(),
    )
    .unwrap();
    let bg =
        simulate_background_stack(&cfg.scene, &cfg.sensor, cfg.frames, 1, Exec::default()).unwrap();
    let mut g = c.benchmark_group("calibrate_10_sizes_200_replicates");
    g.sample_size(10);
    for (name, exec) in policies() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| calibrate_stacks(&frames, &bg, &cfg, exec).unwrap())
        });
    }
    g.finish();
}

fn correlation(c: &mut Criterion) {
    let cfg = ExperimentConfig::parse(COHERENCE).unwrap();
    let lattice = ModeLattice::build(&cfg.scene, &cfg.sensor);
    let frames = simulate_stack(
        &cfg.scene,
        &cfg.sensor,
        &lattice,
        cfg.frames,
        1,
        Exec::default(),
    )
    .unwrap();
    let mut g = c.benchmark_group("correlation_map_13x13");
    g.sample_size(10);
    for (name, exec) in policies() {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| coherence_from_stack(&frames, &cfg, exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, synthesis, calibration, correlation);
criterion_main!(benches);
