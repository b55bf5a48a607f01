use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{ensure_finite, Error, Result};
use crate::exec::Exec;
use crate::geometry::{offset_magnitude, uncertainty_of_a, RegionPair};
use crate::rng::{substream, Domain};
use crate::stats::FrameStack;

use super::efficiency::{eta_from_point, eta_partner, eta_uncertainty};
use super::nrf::{alpha_hat_corrected, background_correct_series, nrf, NrfEstimate};
use super::series::{extract_many, PairSeries};

/// Geometric inputs of A: coherence radius and offset (μm) with their
/// uncertainties, border collection β and mean photons per mode μ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationGeometry {
    pub r_coh: f64,
    pub u_r: f64,
    pub d: [f64; 2],
    pub u_d: f64,
    pub beta: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub replicates: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            replicates: 1000,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

/// One row of the per-size table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerL {
    pub l_um: f64,
    pub a: f64,
    pub u_a: f64,
    pub nrf: NrfEstimate,
    pub eta: f64,
    /// Bootstrap standard deviation of `eta`.
    pub u_eta: f64,
    pub in_range: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation of σ_α,B against A.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub per_l: Vec<PerL>,
    /// Background-corrected balancing factor from the largest region.
    pub alpha: f64,
    pub u_alpha: f64,
    /// Arithmetic mean of the per-size efficiencies.
    pub eta_bar: f64,
    /// Statistical uncertainty of `eta_bar` from the bootstrap covariance.
    pub u_eta: f64,
    /// Uncertainty of `eta_bar` from the errors on d and r, fully
    /// correlated across sizes.
    pub u_eta_geom: f64,
    pub eta_s_bar: f64,
    pub u_eta_s: f64,
    pub cov_matrix: DMatrix<f64>,
    /// Slope of (1+α)/2 - σ_α,B against A through the origin.
    pub eta_fit: f64,
    pub u_eta_fit: f64,
    /// Unconstrained σ_α,B = slope·A + intercept; needs three sizes.
    pub fit: Option<LinearFit>,
    pub replicates: usize,
}

impl CalibrationResult {
    pub fn u_eta_total(&self) -> f64 {
        self.u_eta.hypot(self.u_eta_geom)
    }
}

/// Per-size η, constrained-fit η and partner η of one bootstrap replicate.
type Replicate = (Vec<f64>, f64, f64);

struct Pass {
    alpha: f64,
    u_alpha: f64,
    nrf: Vec<NrfEstimate>,
    eta: Vec<f64>,
    eta_fit: f64,
}

impl Pass {
    fn eta_bar(&self) -> f64 {
        self.eta.iter().sum::<f64>() / self.eta.len() as f64
    }
}

fn constrained_slope(alpha: f64, a: &[f64], sigma: &[f64]) -> f64 {
    let y0 = 0.5 * (1.0 + alpha);
    let num: f64 = a.iter().zip(sigma).map(|(a, s)| a * (y0 - s)).sum();
    let den: f64 = a.iter().map(|a| a * a).sum();
    num / den
}

fn run_pass(series: &[PairSeries], bg: &[PairSeries], a: &[f64], l_um: &[f64]) -> Result<Pass> {
    let last = series.len() - 1;
    let (alpha, u_alpha) = alpha_hat_corrected(&series[last], &bg[last])?;
    let mut nrfs = Vec::with_capacity(series.len());
    let mut eta = Vec::with_capacity(series.len());
    for k in 0..series.len() {
        let step = || -> Result<(NrfEstimate, f64)> {
            let e = background_correct_series(&nrf(&series[k], alpha)?, &bg[k])?;
            Ok((e, eta_from_point(e.sigma_alpha_b, alpha, a[k])?.eta))
        };
        let (e, h) = step().map_err(|err| at_size(l_um[k], err))?;
        nrfs.push(e);
        eta.push(h);
    }
    let sig: Vec<f64> = nrfs.iter().map(|e| e.sigma_alpha_b).collect();
    Ok(Pass {
        alpha,
        u_alpha,
        eta_fit: constrained_slope(alpha, a, &sig),
        nrf: nrfs,
        eta,
    })
}

fn at_size(l: f64, err: Error) -> Error {
    match err {
        Error::Degenerate(m) => Error::Degenerate(format!("at L = {l} μm: {m}")),
        Error::Geometry(m) => Error::Geometry(format!("at L = {l} μm: {m}")),
        Error::InvalidParameter { name, reason } => Error::InvalidParameter {
            name,
            reason: format!("at L = {l} μm: {reason}"),
        },
        other => other,
    }
}

fn pearson(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r: sxy / (sxx * syy).sqrt(),
    }
}

fn check_nested(regions: &[RegionPair]) -> Result<()> {
    if regions.is_empty() {
        return Err(Error::invalid("L list", "empty"));
    }
    for w in regions.windows(2) {
        if w[1].l_um() <= w[0].l_um()
            || !w[1].region_i().contains_rect(&w[0].region_i())
            || !w[1].region_s().contains_rect(&w[0].region_s())
            || w[1].cs2() != w[0].cs2()
        {
            return Err(Error::invalid(
                "L list",
                format!(
                    "regions must be strictly increasing and nested about one center (L = {} then {})",
                    w[0].l_um(),
                    w[1].l_um()
                ),
            ));
        }
    }
    Ok(())
}

/// Efficiency from a set of nested region sizes.
///
/// Each size yields σ_α,B and, with its geometric coefficient A, one η̂; the
/// result is their arithmetic mean. Frame-level bootstrap (signal and
/// background stacks resampled independently, the whole per-size pipeline
/// rerun per replicate) supplies the covariance of the η̂'s.
pub fn multi_l_calibration(
    frames: &FrameStack,
    bg_frames: &FrameStack,
    regions: &[RegionPair],
    geometry: &CalibrationGeometry,
    options: &CalibrationOptions,
) -> Result<CalibrationResult> {
    check_nested(regions)?;
    if options.replicates < 100 {
        return Err(Error::invalid(
            "bootstrap replicates",
            format!("need at least 100, got {}", options.replicates),
        ));
    }
    for v in geometry.d {
        ensure_finite("d", v)?;
    }
    let mut geo = Vec::with_capacity(regions.len());
    for p in regions {
        let res = p.snap_residual_um();
        let d = offset_magnitude([geometry.d[0] - res[0], geometry.d[1] - res[1]]);
        let g = uncertainty_of_a(
            p.l_um(),
            d,
            geometry.u_d,
            geometry.r_coh,
            geometry.u_r,
            geometry.beta,
            geometry.mu,
        )
        .map_err(|e| at_size(p.l_um(), e))?;
        geo.push(g);
    }
    let a: Vec<f64> = geo.iter().map(|g| g.a).collect();
    let l_um: Vec<f64> = regions.iter().map(|p| p.l_um()).collect();

    let series = extract_many(frames, regions)?;
    let bg = extract_many(bg_frames, regions)?;
    let base = run_pass(&series, &bg, &a, &l_um)?;

    let n = frames.len();
    let nb = bg_frames.len();
    let reps = options.exec.try_map_indexed(options.replicates, |b| {
        let mut rng = substream(options.seed, Domain::Bootstrap, b as u64);
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let bidx: Vec<usize> = (0..nb).map(|_| rng.random_range(0..nb)).collect();
        let s: Vec<PairSeries> = series.iter().map(|s| s.resample(&idx)).collect();
        let g: Vec<PairSeries> = bg.iter().map(|s| s.resample(&bidx)).collect();
        let p = run_pass(&s, &g, &a, &l_um)
            .map_err(|e| Error::degenerate(format!("bootstrap replicate {b}: {e}")))?;
        let eta_s = p.eta_bar() / p.alpha;
        Ok::<_, Error>((p.eta, p.eta_fit, eta_s))
    })?;

    let k = regions.len();
    let r = reps.len() as f64;
    let mut mean = vec![0.0; k];
    for (e, _, _) in &reps {
        for j in 0..k {
            mean[j] += e[j] / r;
        }
    }
    let cov = DMatrix::from_fn(k, k, |i, j| {
        reps.iter()
            .map(|(e, _, _)| (e[i] - mean[i]) * (e[j] - mean[j]))
            .sum::<f64>()
            / (r - 1.0)
    });
    let sd = |v: &dyn Fn(&Replicate) -> f64| {
        let m = reps.iter().map(v).sum::<f64>() / r;
        (reps.iter().map(|x| (v(x) - m).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
    };
    let u_eta = (cov.sum().max(0.0)).sqrt() / k as f64;
    let u_eta_fit = sd(&|x| x.1);
    let eta_bar = base.eta_bar();

    // dη/dA = -η/A per size; the d and r errors are shared by all sizes
    let (mut gd, mut gr) = (0.0, 0.0);
    for (g, e) in geo.iter().zip(&base.eta) {
        gd += -e / g.a * g.da_dd / k as f64;
        gr += -e / g.a * g.da_dr / k as f64;
    }
    let u_eta_geom = (gd * geometry.u_d).hypot(gr * geometry.u_r);
    let (eta_s_bar, _) = eta_partner(eta_bar, u_eta, base.alpha, base.u_alpha)?;
    let u_eta_s = sd(&|x| x.2).hypot(eta_s_bar * u_eta_geom / eta_bar.abs().max(f64::MIN_POSITIVE));

    let per_l = (0..k)
        .map(|j| PerL {
            l_um: l_um[j],
            a: a[j],
            u_a: geo[j].u_a,
            nrf: base.nrf[j],
            eta: base.eta[j],
            u_eta: cov[(j, j)].max(0.0).sqrt(),
            in_range: (0.0..=1.0).contains(&base.eta[j]),
        })
        .collect();
    let sig: Vec<f64> = base.nrf.iter().map(|e| e.sigma_alpha_b).collect();
    Ok(CalibrationResult {
        per_l,
        alpha: base.alpha,
        u_alpha: base.u_alpha,
        eta_bar,
        u_eta,
        u_eta_geom,
        eta_s_bar,
        u_eta_s,
        cov_matrix: cov,
        eta_fit: base.eta_fit,
        u_eta_fit,
        fit: (k >= 3).then(|| pearson(&a, &sig)),
        replicates: options.replicates,
    })
}

/// Single-size efficiency with first-order (not bootstrap) uncertainties,
/// as used for a quick point estimate.
pub fn point_efficiency(
    series: &PairSeries,
    bg: &PairSeries,
    a: f64,
    u_a: f64,
) -> Result<(f64, f64, NrfEstimate)> {
    let (alpha, u_alpha) = alpha_hat_corrected(series, bg)?;
    let e = background_correct_series(&nrf(series, alpha)?, bg)?;
    let eta = eta_from_point(e.sigma_alpha_b, alpha, a)?.eta;
    Ok((eta, eta_uncertainty(eta, a, e.u_sigma, u_alpha, u_a), e))
}
