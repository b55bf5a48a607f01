use crate::error::{ensure_finite, Error, Result};
use crate::geometry::RegionPair;
use crate::stats::FrameStack;

use super::series::{extract_series, PairSeries};

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

// (mean, unbiased variance, fourth central moment)
fn moments(x: &[f64]) -> (f64, f64, f64) {
    let m = mean(x);
    let (mut s2, mut s4) = (0.0, 0.0);
    for &v in x {
        let d = (v - m) * (v - m);
        s2 += d;
        s4 += d * d;
    }
    let n = x.len() as f64;
    (m, s2 / (n - 1.0), s4 / n)
}

fn check_alpha(alpha: f64) -> Result<()> {
    ensure_finite("alpha", alpha)?;
    if alpha <= 0.0 {
        return Err(Error::invalid("alpha", format!("must be > 0, got {alpha}")));
    }
    Ok(())
}

fn check_frames(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::invalid(
            "frames",
            format!("need at least 2 frames, got {n}"),
        ));
    }
    Ok(())
}

/// Balancing factor ⟨N_i⟩/⟨N_s⟩ and its first-order standard error.
pub fn alpha_hat(series: &PairSeries) -> Result<(f64, f64)> {
    check_frames(series.frame_count())?;
    let (mi, vi, _) = moments(series.n_i());
    let (ms, vs, _) = moments(series.n_s());
    if ms <= 0.0 {
        return Err(Error::degenerate(format!(
            "signal-arm mean is {ms}, cannot balance"
        )));
    }
    let n = series.frame_count() as f64;
    let cov = covariance(series.n_i(), mi, series.n_s(), ms);
    let a = mi / ms;
    let rel2 = vi / (mi * mi) + vs / (ms * ms) - 2.0 * cov / (mi * ms);
    Ok((a, a * (rel2.max(0.0) / n).sqrt()))
}

/// As [`alpha_hat`] with background means subtracted from both arms.
pub fn alpha_hat_corrected(series: &PairSeries, bg: &PairSeries) -> Result<(f64, f64)> {
    check_frames(series.frame_count())?;
    check_frames(bg.frame_count())?;
    let (mi, vi, _) = moments(series.n_i());
    let (ms, vs, _) = moments(series.n_s());
    let (bi, vbi, _) = moments(bg.n_i());
    let (bs, vbs, _) = moments(bg.n_s());
    let (ci, cs) = (mi - bi, ms - bs);
    if cs <= 0.0 || ci <= 0.0 {
        return Err(Error::degenerate(
            "background-corrected arm mean is not positive".to_string(),
        ));
    }
    let n = series.frame_count() as f64;
    let nb = bg.frame_count() as f64;
    let cov = covariance(series.n_i(), mi, series.n_s(), ms);
    let a = ci / cs;
    let rel2 = (vi / n + vbi / nb) / (ci * ci) + (vs / n + vbs / nb) / (cs * cs)
        - 2.0 * cov / (n * ci * cs);
    Ok((a, a * rel2.max(0.0).sqrt()))
}

fn covariance(x: &[f64], mx: f64, y: &[f64], my: f64) -> f64 {
    let s: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    s / (x.len() as f64 - 1.0)
}

/// Noise reduction factors for one region pair.
///
/// `sigma_alpha_b` equals `sigma_alpha` until [`background_correct`] is
/// applied; `u_sigma` always refers to `sigma_alpha_b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrfEstimate {
    pub alpha: f64,
    pub sigma_raw: f64,
    pub sigma_alpha: f64,
    pub sigma_alpha_b: f64,
    pub u_sigma: f64,
    pub frames: usize,
    pub mean_i: f64,
    pub mean_s: f64,
    /// Unbiased variance of N_i - alpha N_s.
    pub var_diff: f64,
    // delta-method ingredients: Var(var_diff), Var(mean of N_i + alpha N_s),
    // and their covariance
    var_var: f64,
    var_mean: f64,
    cov_var_mean: f64,
}

// first-order standard error of num / den
fn ratio_uncertainty(num: f64, den: f64, var_num: f64, var_den: f64, cov: f64) -> f64 {
    let r = num / den;
    let v = (var_num - 2.0 * r * cov + r * r * var_den) / (den * den);
    v.max(0.0).sqrt()
}

fn sigma_of(ni: &[f64], ns: &[f64], alpha: f64) -> Result<f64> {
    let d: Vec<f64> = ni.iter().zip(ns).map(|(a, b)| a - alpha * b).collect();
    let den = mean(ni) + alpha * mean(ns);
    if den <= 0.0 {
        return Err(Error::degenerate(format!("shot-noise level is {den}")));
    }
    Ok(moments(&d).1 / den)
}

/// σ_α = Var(N_i - α N_s) / ⟨N_i + α N_s⟩ with the raw (α = 1) factor
/// alongside.
pub fn nrf(series: &PairSeries, alpha: f64) -> Result<NrfEstimate> {
    check_alpha(alpha)?;
    check_frames(series.frame_count())?;
    let (ni, ns) = (series.n_i(), series.n_s());
    let n = series.frame_count() as f64;
    let d: Vec<f64> = ni.iter().zip(ns).map(|(a, b)| a - alpha * b).collect();
    let s: Vec<f64> = ni.iter().zip(ns).map(|(a, b)| a + alpha * b).collect();
    let (md, var_diff, m4) = moments(&d);
    let (ms, var_sum, _) = moments(&s);
    if ms <= 0.0 {
        return Err(Error::degenerate(format!("shot-noise level is {ms}")));
    }
    let m21 = d
        .iter()
        .zip(&s)
        .map(|(a, b)| (a - md) * (a - md) * (b - ms))
        .sum::<f64>()
        / n;
    let var_var = ((m4 - var_diff * var_diff) / n).max(0.0);
    let var_mean = var_sum / n;
    let cov_var_mean = m21 / n;
    let sigma_alpha = var_diff / ms;
    let sigma_raw = sigma_of(ni, ns, 1.0)?;
    let u = ratio_uncertainty(var_diff, ms, var_var, var_mean, cov_var_mean);
    Ok(NrfEstimate {
        alpha,
        sigma_raw,
        sigma_alpha,
        sigma_alpha_b: sigma_alpha,
        u_sigma: u,
        frames: series.frame_count(),
        mean_i: mean(ni),
        mean_s: mean(ns),
        var_diff,
        var_var,
        var_mean,
        cov_var_mean,
    })
}

/// Subtracts background variances from the numerator and background means
/// from the denominator of σ_α, using background series over the same
/// regions.
///
/// A corrected denominator not clearly above zero (within three standard
/// errors) means the background dominates and is rejected.
pub fn background_correct_series(est: &NrfEstimate, bg: &PairSeries) -> Result<NrfEstimate> {
    check_frames(bg.frame_count())?;
    let a = est.alpha;
    let (bi, vbi, m4i) = moments(bg.n_i());
    let (bs, vbs, m4s) = moments(bg.n_s());
    let nb = bg.frame_count() as f64;
    let num = est.var_diff - vbi - a * a * vbs;
    let den = est.mean_i - bi + a * (est.mean_s - bs);
    let var_bg_mean = (vbi + a * a * vbs) / nb;
    let u_den = (est.var_mean + var_bg_mean).sqrt();
    if den <= 3.0 * u_den {
        return Err(Error::degenerate(format!(
            "background-corrected shot-noise level {den:.6} is not significantly positive \
             (standard error {u_den:.6})"
        )));
    }
    let var_bg_var = ((m4i - vbi * vbi) + a.powi(4) * (m4s - vbs * vbs)) / nb;
    let u = ratio_uncertainty(
        num,
        den,
        est.var_var + var_bg_var.max(0.0),
        est.var_mean + var_bg_mean,
        est.cov_var_mean,
    );
    Ok(NrfEstimate {
        sigma_alpha_b: num / den,
        u_sigma: u,
        ..*est
    })
}

/// [`background_correct_series`] on a background stack and region pair.
/// `alpha` must be the balancing factor the estimate was computed with.
pub fn background_correct(
    est: &NrfEstimate,
    bg_frames: &FrameStack,
    pair: &RegionPair,
    alpha: f64,
) -> Result<NrfEstimate> {
    check_alpha(alpha)?;
    if (alpha - est.alpha).abs() > 1e-12 * est.alpha {
        return Err(Error::invalid(
            "alpha",
            format!("{alpha} differs from the estimate's {}", est.alpha),
        ));
    }
    let bg = extract_series(bg_frames, pair)?;
    background_correct_series(est, &bg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    fn series(a: &[f64], b: &[f64]) -> PairSeries {
        PairSeries::new(a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn alpha_of_identical_series_is_one() {
        let s = series(&[3.0, 5.0, 4.0], &[3.0, 5.0, 4.0]);
        let (a, u) = alpha_hat(&s).unwrap();
        assert_eq!(a, 1.0);
        assert!(u.abs() < 1e-12);
    }

    #[test]
    fn alpha_is_ratio_of_means() {
        let s = series(&[9.0, 9.3734], &[10.0, 10.0]);
        assert!((alpha_hat(&s).unwrap().0 - 0.91867).abs() < 1e-12);
        assert!(alpha_hat(&series(&[1.0, 2.0], &[0.0, 0.0])).is_err());
    }

    #[test]
    fn perfect_correlation_gives_zero() {
        let s = series(&[3.0, 7.0, 1.0, 4.0], &[3.0, 7.0, 1.0, 4.0]);
        let e = nrf(&s, 1.0).unwrap();
        assert_eq!(e.sigma_alpha, 0.0);
        assert_eq!(e.sigma_raw, 0.0);
    }

    #[test]
    fn independent_poisson_arms_reach_shot_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = Poisson::new(20.0).unwrap();
        let n = 200_000;
        let a: Vec<f64> = (0..n).map(|_| p.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..n).map(|_| p.sample(&mut rng)).collect();
        let e = nrf(&series(&a, &b), 1.0).unwrap();
        assert!((e.sigma_alpha - 1.0).abs() < 3.0 * e.u_sigma, "{e:?}");
        assert!(e.u_sigma < 0.01);
    }

    #[test]
    fn balancing_absorbs_gain() {
        let a = [12.0, 15.0, 9.0, 11.0, 14.0];
        let b = [10.0, 13.0, 8.0, 12.0, 11.0];
        let c = 2.5;
        let bc: Vec<f64> = b.iter().map(|v| v * c).collect();
        let e1 = nrf(&series(&a, &b), 0.9).unwrap();
        let e2 = nrf(&series(&a, &bc), 0.9 / c).unwrap();
        assert!((e1.sigma_alpha - e2.sigma_alpha).abs() < 1e-12);
    }

    #[test]
    fn single_frame_rejected() {
        assert!(nrf(&series(&[1.0], &[1.0]), 1.0).is_err());
        assert!(nrf(&series(&[1.0, 2.0], &[1.0, 2.0]), 0.0).is_err());
    }

    #[test]
    fn zero_background_is_null_correction() {
        let s = series(&[12.0, 15.0, 9.0, 11.0], &[10.0, 13.0, 8.0, 12.0]);
        let e = nrf(&s, 1.1).unwrap();
        let bg = series(&[0.0; 4], &[0.0; 4]);
        let c = background_correct_series(&e, &bg).unwrap();
        assert!((c.sigma_alpha_b - e.sigma_alpha).abs() < 1e-12 * e.sigma_alpha);
        assert!((c.u_sigma - e.u_sigma).abs() < 1e-12);
    }

    #[test]
    fn background_only_signal_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let noise = rand_distr::Normal::new(100.0, 5.0).unwrap();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| noise.sample(&mut rng)).collect() };
        let sig = series(&draw(2000), &draw(2000));
        let bg = series(&draw(2000), &draw(2000));
        let e = nrf(&sig, 1.0).unwrap();
        let err = background_correct_series(&e, &bg).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
