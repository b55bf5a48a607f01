use crate::error::{ensure_finite, Error, Result};

/// Efficiency from one noise reduction factor, with an out-of-range flag
/// instead of clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaHat {
    pub eta: f64,
    pub in_range: bool,
}

/// Inverts σ_α = (1 + α)/2 - η A.
pub fn eta_from_point(sigma_alpha_b: f64, alpha: f64, a_coeff: f64) -> Result<EtaHat> {
    ensure_finite("sigma", sigma_alpha_b)?;
    ensure_finite("alpha", alpha)?;
    ensure_finite("A", a_coeff)?;
    if a_coeff <= 0.0 {
        return Err(Error::invalid("A", format!("must be > 0, got {a_coeff}")));
    }
    let eta = (0.5 * (1.0 + alpha) - sigma_alpha_b) / a_coeff;
    Ok(EtaHat {
        eta,
        in_range: (0.0..=1.0).contains(&eta),
    })
}

/// First-order uncertainty of [`eta_from_point`] from independent errors on
/// σ, α and A.
pub fn eta_uncertainty(eta: f64, a_coeff: f64, u_sigma: f64, u_alpha: f64, u_a: f64) -> f64 {
    let ds = u_sigma / a_coeff;
    let da = 0.5 * u_alpha / a_coeff;
    let dg = eta * u_a / a_coeff;
    (ds * ds + da * da + dg * dg).sqrt()
}

/// η_s = η_i / α with first-order uncertainty.
pub fn eta_partner(eta_i: f64, u_eta_i: f64, alpha: f64, u_alpha: f64) -> Result<(f64, f64)> {
    ensure_finite("eta", eta_i)?;
    ensure_finite("alpha", alpha)?;
    if alpha <= 0.0 {
        return Err(Error::invalid("alpha", format!("must be > 0, got {alpha}")));
    }
    let eta_s = eta_i / alpha;
    let u = (u_eta_i / alpha).hypot(eta_s * u_alpha / alpha);
    Ok((eta_s, u))
}
