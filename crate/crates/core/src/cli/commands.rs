use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimators::{
    center_scan, coherence_radius, cross_correlation_map, eta_from_point, eta_partner,
    eta_uncertainty, extract_many, multi_l_calibration, parabola_fit, CalibrationGeometry,
    CalibrationOptions, CalibrationResult, CoherenceRadius, CorrelationMap, ScanStep, VertexFit,
};
use crate::exec::Exec;
use crate::geometry::{nested_regions, pixel_pairs, place_regions_sp};
use crate::io::{
    cell, read_sidecar, read_store, write_sidecar, write_store, ExperimentConfig, StoreKind, Table,
};
use crate::stats::{simulate_background_stack, simulate_stack, FrameStack, ModeLattice};

use super::scan::{simulate_double_scan, AxisScan};

/// `key=value` lines for stdout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    lines: Vec<(String, String)>,
}

impl Report {
    pub fn add(&mut self, key: &str, value: impl ToString) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

fn load_config(config: Option<&Path>, store: &Path) -> Result<ExperimentConfig> {
    match config {
        Some(p) => ExperimentConfig::from_file(p),
        None => read_sidecar(store).map(|(c, _)| c),
    }
}

fn truth_eta(store: &Path) -> Option<(f64, f64)> {
    read_sidecar(store)
        .ok()
        .map(|(c, _)| (c.scene.eta_i(), c.scene.eta_s()))
}

pub struct SimulateOutput {
    pub frames: FrameStack,
    pub background: Option<FrameStack>,
    pub report: Report,
}

/// Simulates the signal store (and optionally a dark background store)
/// described by `config`, writing each with its sidecar.
pub fn cmd_simulate(
    config: &ExperimentConfig,
    out: &Path,
    background: Option<&Path>,
    exec: Exec,
) -> Result<SimulateOutput> {
    let lattice = ModeLattice::build(&config.scene, &config.sensor);
    let frames = simulate_stack(
        &config.scene,
        &config.sensor,
        &lattice,
        config.frames,
        config.seed,
        exec,
    )?;
    write_store(&frames, out)?;
    write_sidecar(out, config, StoreKind::Signal, frames.len())?;
    let mut report = Report::default();
    report.add("store", out.display());
    report.add("frames", frames.len());
    report.add("width", frames.width());
    report.add("height", frames.height());
    report.add("modes", lattice.len());
    let bg = match background {
        Some(p) => {
            let bg = simulate_background_stack(
                &config.scene,
                &config.sensor,
                config.background_frames,
                config.seed,
                exec,
            )?;
            write_store(&bg, p)?;
            write_sidecar(p, config, StoreKind::Background, bg.len())?;
            report.add("background", p.display());
            Some(bg)
        }
        None => None,
    };
    Ok(SimulateOutput {
        frames,
        background: bg,
        report,
    })
}

pub struct CoherenceOutput {
    pub map: CorrelationMap,
    pub radius: CoherenceRadius,
    pub report: Report,
}

/// Correlation map around the mirrored base region and the FWHM radius.
pub fn coherence_from_stack(
    frames: &FrameStack,
    config: &ExperimentConfig,
    exec: Exec,
) -> Result<(CorrelationMap, CoherenceRadius)> {
    let sensor = &config.sensor;
    if sensor.bin_factor() != 1
        || frames.width() != sensor.width()
        || frames.height() != sensor.height()
    {
        return Err(Error::invalid(
            "store",
            "coherence estimation needs unbinned frames (bin_factor = 1)",
        ));
    }
    let pair = place_regions_sp(
        sensor,
        sensor.cs_um(),
        config.arm_center_um(),
        config.coherence_size,
    )?;
    let map = cross_correlation_map(frames, &pair, config.max_shift, exec)?;
    let radius = coherence_radius(&map)?;
    Ok((map, radius))
}

pub fn cmd_coherence(
    store: &Path,
    config: Option<&Path>,
    out: &Path,
    exec: Exec,
) -> Result<CoherenceOutput> {
    let config = load_config(config, store)?;
    let frames = read_store(store)?;
    let (map, radius) = coherence_from_stack(&frames, &config, exec)?;
    let mut table = Table::new(["dx_px", "dy_px", "dx_um", "dy_um", "c"]);
    for (dx, dy, c) in map.entries() {
        table.push(vec![
            dx.to_string(),
            dy.to_string(),
            cell(dx as f64 * map.pitch()),
            cell(dy as f64 * map.pitch()),
            cell(c),
        ])?;
    }
    table.write(out)?;
    let mut report = Report::default();
    report.add("r_um", radius.r);
    report.add("u_r_um", radius.u_r);
    report.add("fwhm_x_um", radius.fwhm_x);
    report.add("fwhm_y_um", radius.fwhm_y);
    report.add("peak_value", radius.peak_value);
    report.add("under_resolved", radius.under_resolved);
    if let Ok((c, _)) = read_sidecar(store) {
        report.add("truth_r_coh_um", c.scene.r_coh());
    }
    report.add("csv", out.display());
    Ok(CoherenceOutput {
        map,
        radius,
        report,
    })
}

fn scan_table(scan: &AxisScan) -> Result<Table> {
    let mut t = Table::new([
        "pass",
        "d_um",
        "sigma",
        "u_sigma",
        "fit_d_min_um",
        "fit_u_dmin_um",
    ]);
    for (k, pass) in scan.passes.iter().enumerate() {
        for p in &pass.points {
            t.push(vec![
                k.to_string(),
                cell(p.d),
                cell(p.sigma),
                cell(p.u_sigma),
                cell(pass.fit.d_min),
                cell(pass.fit.u_dmin),
            ])?;
        }
    }
    Ok(t)
}

pub struct CenterOutput {
    pub scans: [AxisScan; 2],
    pub report: Report,
}

/// Simulated x-then-y centering scan; the scene offset in `config` is the
/// injected misalignment.
pub fn cmd_center(
    config: &ExperimentConfig,
    out_x: &Path,
    out_y: &Path,
    exec: Exec,
) -> Result<CenterOutput> {
    let scans = simulate_double_scan(
        &config.scene,
        &config.sensor,
        &config.scan,
        config.seed,
        exec,
    )?;
    scan_table(&scans[0])?.write(out_x)?;
    scan_table(&scans[1])?.write(out_y)?;
    let mut report = Report::default();
    for (name, s) in ["x", "y"].iter().zip(&scans) {
        report.add(&format!("d_min_{name}_um"), s.fit().d_min);
        report.add(&format!("u_dmin_{name}_um"), s.fit().u_dmin);
    }
    let d = config.scene.d_offset();
    report.add("truth_offset_x_um", d[0]);
    report.add("truth_offset_y_um", d[1]);
    Ok(CenterOutput { scans, report })
}

/// Centering fit over recorded stores, one per displacement (μm) along a
/// single axis.
pub fn cmd_center_stores(
    stores: &[(f64, PathBuf)],
    config: Option<&Path>,
    out: &Path,
) -> Result<(VertexFit, Report)> {
    let first = stores
        .first()
        .ok_or_else(|| Error::invalid("scan", "no stores given"))?;
    let config = load_config(config, &first.1)?;
    let pairs = pixel_pairs(&config.sensor, config.sensor.cs_um());
    let mut steps = Vec::with_capacity(stores.len());
    for (d, path) in stores {
        let frames = read_store(path)?;
        steps.push(ScanStep {
            displacement: *d,
            pairs: extract_many(&frames, &pairs)?,
        });
    }
    let points = center_scan(&steps, None)?;
    let fit = parabola_fit(&points)?;
    let mut t = Table::new(["d_um", "sigma", "u_sigma", "fit_d_min_um", "fit_u_dmin_um"]);
    for p in &points {
        t.push(vec![
            cell(p.d),
            cell(p.sigma),
            cell(p.u_sigma),
            cell(fit.d_min),
            cell(fit.u_dmin),
        ])?;
    }
    t.write(out)?;
    let mut report = Report::default();
    report.add("d_min_um", fit.d_min);
    report.add("u_dmin_um", fit.u_dmin);
    Ok((fit, report))
}

pub struct CalibrateOutput {
    pub result: CalibrationResult,
    pub report: Report,
}

/// Multi-size calibration on in-memory stacks.
pub fn calibrate_stacks(
    frames: &FrameStack,
    background: &FrameStack,
    config: &ExperimentConfig,
    exec: Exec,
) -> Result<CalibrationResult> {
    if config.l_list.is_empty() {
        return Err(Error::Config("key `l_list` is empty".into()));
    }
    let sensor = &config.sensor;
    let regions = nested_regions(
        sensor,
        sensor.cs_um(),
        config.arm_center_um(),
        &config.l_list,
    )?;
    let geometry = CalibrationGeometry {
        r_coh: config.scene.r_coh(),
        u_r: config.u_r,
        d: config.scene.d_offset(),
        u_d: config.u_d,
        beta: config.scene.beta(),
        mu: config.scene.mu(),
    };
    let options = CalibrationOptions {
        replicates: config.bootstrap,
        seed: config.seed,
        exec,
    };
    multi_l_calibration(frames, background, &regions, &geometry, &options)
}

pub fn calibration_table(result: &CalibrationResult) -> Result<Table> {
    let mut t = Table::new([
        "L_um",
        "A",
        "u_A",
        "alpha",
        "sigma_raw",
        "sigma_alpha",
        "sigma_alpha_B",
        "u_sigma",
        "eta",
        "u_eta",
        "in_range",
    ]);
    for row in &result.per_l {
        t.push(vec![
            cell(row.l_um),
            cell(row.a),
            cell(row.u_a),
            cell(row.nrf.alpha),
            cell(row.nrf.sigma_raw),
            cell(row.nrf.sigma_alpha),
            cell(row.nrf.sigma_alpha_b),
            cell(row.nrf.u_sigma),
            cell(row.eta),
            cell(row.u_eta),
            row.in_range.to_string(),
        ])?;
    }
    Ok(t)
}

pub fn calibration_report(result: &CalibrationResult) -> Report {
    let mut r = Report::default();
    r.add("alpha", result.alpha);
    r.add("u_alpha", result.u_alpha);
    r.add("eta_bar", result.eta_bar);
    r.add("u_eta", result.u_eta);
    r.add("u_eta_geom", result.u_eta_geom);
    r.add("u_eta_rel", result.u_eta / result.eta_bar);
    r.add("eta_fit", result.eta_fit);
    r.add("u_eta_fit", result.u_eta_fit);
    r.add("eta_s_bar", result.eta_s_bar);
    r.add("u_eta_s", result.u_eta_s);
    if let Some(f) = result.fit {
        r.add("fit_slope", f.slope);
        r.add("fit_intercept", f.intercept);
        r.add("fit_r", f.r);
    }
    r.add("replicates", result.replicates);
    r
}

pub fn cmd_calibrate(
    store: &Path,
    background: &Path,
    config: Option<&Path>,
    out: &Path,
    exec: Exec,
) -> Result<CalibrateOutput> {
    let config = load_config(config, store)?;
    let frames = read_store(store)?;
    let bg = read_store(background)?;
    let result = calibrate_stacks(&frames, &bg, &config, exec)?;
    calibration_table(&result)?.write(out)?;
    let mut report = calibration_report(&result);
    if let Some((ei, es)) = truth_eta(store) {
        report.add("truth_eta_i", ei);
        report.add("truth_eta_s", es);
    }
    report.add("csv", out.display());
    Ok(CalibrateOutput { result, report })
}

/// Efficiency from directly supplied α, σ_α,B and A, without frames.
pub fn point_arithmetic(
    alpha: f64,
    u_alpha: f64,
    sigma: f64,
    u_sigma: f64,
    a: f64,
    u_a: f64,
) -> Result<Report> {
    let hat = eta_from_point(sigma, alpha, a)?;
    let u = eta_uncertainty(hat.eta, a, u_sigma, u_alpha, u_a);
    let (eta_s, u_s) = eta_partner(hat.eta, u, alpha, u_alpha)?;
    let mut r = Report::default();
    r.add("eta_i", hat.eta);
    r.add("u_eta_i", u);
    r.add("eta_s", eta_s);
    r.add("u_eta_s", u_s);
    r.add("in_range", hat.in_range);
    Ok(r)
}
