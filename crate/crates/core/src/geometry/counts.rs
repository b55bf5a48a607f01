use std::f64::consts::PI;

use crate::error::{ensure_finite, ensure_unit_interval, Error, Result};

/// Minimum L/r and L/d for the closed-form mode counts to apply.
pub const VALIDITY_RATIO: f64 = 4.0;

/// Correlated, uncorrelated, and border mode numbers of one region pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCounts {
    pub m_c: f64,
    pub m_u: f64,
    pub m_b: f64,
}

impl ModeCounts {
    pub fn new(m_c: f64, m_u: f64, m_b: f64) -> Result<Self> {
        for (name, v) in [("m_c", m_c), ("m_u", m_u), ("m_b", m_b)] {
            ensure_finite(name, v)?;
            if v < 0.0 {
                return Err(Error::invalid(name, format!("must be >= 0, got {v}")));
            }
        }
        Ok(ModeCounts { m_c, m_u, m_b })
    }
}

/// Collapses a 2D grid offset to the scalar used by the mode counts: each
/// axis opens its own strip of uncorrelated modes, so the magnitudes add.
pub fn offset_magnitude(d: [f64; 2]) -> f64 {
    d[0].abs() + d[1].abs()
}

fn check_inputs(l: f64, d: f64, r: f64) -> Result<()> {
    ensure_finite("L", l)?;
    ensure_finite("d", d)?;
    ensure_finite("r", r)?;
    if l <= 0.0 {
        return Err(Error::invalid("L", format!("must be > 0, got {l}")));
    }
    if r <= 0.0 {
        return Err(Error::invalid("r", format!("must be > 0, got {r}")));
    }
    if d < 0.0 {
        return Err(Error::invalid("d", format!("must be >= 0, got {d}")));
    }
    if l < VALIDITY_RATIO * r {
        return Err(Error::Geometry(format!(
            "L/r = {:.3} is below {VALIDITY_RATIO} (L = {l} μm, r = {r} μm)",
            l / r
        )));
    }
    if l < VALIDITY_RATIO * d {
        return Err(Error::Geometry(format!(
            "L/d = {:.3} is below {VALIDITY_RATIO} (L = {l} μm, d = {d} μm)",
            l / d
        )));
    }
    Ok(())
}

/// Mode numbers for square L x L regions offset by `d` from the center of
/// symmetry, with coherence radius `r` (all μm):
/// M_u = 2Ld / (pi r^2), M_b = 2L / r, M_c = (L^2 - 2Ld) / (pi r^2).
pub fn mode_counts(l: f64, d: f64, r: f64) -> Result<ModeCounts> {
    check_inputs(l, d, r)?;
    let per_area = 1.0 / (PI * r * r);
    Ok(ModeCounts {
        m_c: (l * l - 2.0 * l * d) * per_area,
        m_u: 2.0 * l * d * per_area,
        m_b: 2.0 * l / r,
    })
}

/// A = (M_c + M_b beta^2 - M_u mu) / (M_c + M_u + M_b beta).
pub fn compute_a(counts: &ModeCounts, beta: f64, mu: f64) -> Result<f64> {
    ensure_unit_interval("beta", beta)?;
    ensure_finite("mu", mu)?;
    if mu < 0.0 {
        return Err(Error::invalid("mu", "must be >= 0"));
    }
    let den = counts.m_c + counts.m_u + counts.m_b * beta;
    if den <= 0.0 {
        return Err(Error::Geometry(
            "A denominator M_c + M_u + M_b beta is zero".into(),
        ));
    }
    Ok((counts.m_c + counts.m_b * beta * beta - counts.m_u * mu) / den)
}

/// A together with its first-order uncertainty from independent errors on
/// the offset and the coherence radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricCorrection {
    pub a: f64,
    pub u_a: f64,
    /// dA/dd, one-sided at d = 0.
    pub da_dd: f64,
    pub da_dr: f64,
}

/// Analytic (dA/dd, dA/dr) at (L, d, r).
pub fn a_gradient(l: f64, d: f64, r: f64, beta: f64, mu: f64) -> Result<(f64, f64)> {
    let c = mode_counts(l, d, r)?;
    let num = c.m_c + c.m_b * beta * beta - c.m_u * mu;
    let den = c.m_c + c.m_u + c.m_b * beta;
    if den <= 0.0 {
        return Err(Error::Geometry("A denominator is zero".into()));
    }
    let per_area = 1.0 / (PI * r * r);
    // M_c + M_u = L^2 / (pi r^2) does not move with d
    let dnum_dd = -2.0 * l * per_area * (1.0 + mu);
    let dnum_dr = (-2.0 * c.m_c - c.m_b * beta * beta + 2.0 * c.m_u * mu) / r;
    let dden_dr = (-2.0 * (c.m_c + c.m_u) - c.m_b * beta) / r;
    let da_dd = dnum_dd / den;
    let da_dr = (dnum_dr * den - num * dden_dr) / (den * den);
    Ok((da_dd, da_dr))
}

pub fn uncertainty_of_a(
    l: f64,
    d: f64,
    u_d: f64,
    r: f64,
    u_r: f64,
    beta: f64,
    mu: f64,
) -> Result<GeometricCorrection> {
    for (name, u) in [("u_d", u_d), ("u_r", u_r)] {
        ensure_finite(name, u)?;
        if u < 0.0 {
            return Err(Error::invalid(name, "must be >= 0"));
        }
    }
    let a = compute_a(&mode_counts(l, d, r)?, beta, mu)?;
    let (da_dd, da_dr) = a_gradient(l, d, r, beta, mu)?;
    Ok(GeometricCorrection {
        a,
        u_a: (da_dd * u_d).hypot(da_dr * u_r),
        da_dd,
        da_dr,
    })
}
