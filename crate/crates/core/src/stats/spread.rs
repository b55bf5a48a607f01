//! Landing-disc calibration for spread-mode synthesis.
//!
//! The coherence radius is the FWHM of the pixel-level cross-correlation
//! profile. With both twin photons landing uniformly on a disc of radius rho
//! and square pixels of side p, that profile along one axis is
//!
//!   h(xi) = integral T(u) T(v) O(|(xi - u, v)|) du dv,
//!
//! where O is the overlap area of two rho-discs and T the triangular
//! autocorrelation of the pixel aperture. `landing_radius` inverts
//! FWHM(rho) = r_coh.

use crate::error::{Error, Result};

const QUAD_NODES: usize = 40;

fn disc_overlap(rho: f64, t: f64) -> f64 {
    if t >= 2.0 * rho {
        return 0.0;
    }
    let q = t / (2.0 * rho);
    2.0 * rho * rho * q.acos() - 0.5 * t * (4.0 * rho * rho - t * t).sqrt()
}

// midpoint nodes and triangular weights on [-p, p], split at the kink
fn triangle_nodes(pitch: f64) -> Vec<(f64, f64)> {
    let h = pitch / QUAD_NODES as f64;
    let mut nodes = Vec::with_capacity(2 * QUAD_NODES);
    for k in 0..QUAD_NODES {
        let u = (k as f64 + 0.5) * h;
        let w = (1.0 - u / pitch) * h;
        nodes.push((u, w));
        nodes.push((-u, w));
    }
    nodes
}

fn profile(rho: f64, xi: f64, nodes: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    for &(u, wu) in nodes {
        for &(v, wv) in nodes {
            acc += wu * wv * disc_overlap(rho, (xi - u).hypot(v));
        }
    }
    acc
}

/// FWHM (μm) of the pixel-level cross-correlation profile for landing-disc
/// radius `rho` and pixel pitch `pitch`.
pub fn pixel_correlation_fwhm(rho: f64, pitch: f64) -> f64 {
    let nodes = triangle_nodes(pitch);
    let peak = profile(rho, 0.0, &nodes);
    let (mut lo, mut hi) = (0.0, 2.0 * rho + 2.0 * pitch);
    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        if profile(rho, mid, &nodes) > 0.5 * peak {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + hi
}

/// Landing-disc radius whose pixel-level correlation FWHM equals `r_coh`.
pub fn landing_radius(r_coh: f64, pitch: f64) -> Result<f64> {
    // the pixel aperture alone yields a triangle with FWHM = pitch
    let floor = pitch;
    if r_coh <= floor * 1.01 {
        return Err(Error::invalid(
            "r_coh",
            format!("{r_coh} μm is not resolvable with {pitch} μm pixels (floor {floor:.2} μm)"),
        ));
    }
    let (mut lo, mut hi) = (1e-3 * pitch, r_coh);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if pixel_correlation_fwhm(mid, pitch) < r_coh {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_limits() {
        let rho: f64 = 10.0;
        assert!((disc_overlap(rho, 0.0) - std::f64::consts::PI * rho * rho).abs() < 1e-9);
        assert_eq!(disc_overlap(rho, 20.0), 0.0);
    }

    #[test]
    fn negligible_pixels_give_disc_autocorrelation_width() {
        // two equal discs overlap by half at a center distance of 0.8079 rho
        let fwhm = pixel_correlation_fwhm(30.0, 0.01);
        assert!((fwhm - 2.0 * 0.807_9 * 30.0).abs() < 0.05, "{fwhm}");
    }

    #[test]
    fn inverse_reproduces_target() {
        let rho = landing_radius(43.0, 20.0).unwrap();
        assert!(rho > 15.0 && rho < 27.0, "{rho}");
        assert!((pixel_correlation_fwhm(rho, 20.0) - 43.0).abs() < 0.01);
    }

    #[test]
    fn unresolvable_radius_rejected() {
        assert!(landing_radius(15.0, 20.0).is_err());
    }
}
