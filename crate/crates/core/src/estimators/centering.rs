use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{ensure_finite, Error, Result};

use super::nrf::nrf;
use super::series::PairSeries;

/// One scan position: sensor displacement (μm) and the region-pair series
/// recorded there.
#[derive(Debug, Clone)]
pub struct ScanStep {
    pub displacement: f64,
    pub pairs: Vec<PairSeries>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub d: f64,
    pub sigma: f64,
    pub u_sigma: f64,
}

/// Noise reduction factor at each scan step, averaged over the step's
/// region pairs. Unbalanced (α = 1) unless `alpha` is given.
pub fn center_scan(steps: &[ScanStep], alpha: Option<f64>) -> Result<Vec<ScanPoint>> {
    let mut ds: Vec<f64> = steps.iter().map(|s| s.displacement).collect();
    ds.sort_by(f64::total_cmp);
    ds.dedup();
    if ds.len() < 3 {
        return Err(Error::invalid(
            "scan",
            format!("need at least 3 distinct displacements, got {}", ds.len()),
        ));
    }
    let alpha = alpha.unwrap_or(1.0);
    steps
        .iter()
        .map(|step| {
            ensure_finite("displacement", step.displacement)?;
            if step.pairs.is_empty() {
                return Err(Error::invalid("scan", "step without region pairs"));
            }
            let mut sum = 0.0;
            let mut var = 0.0;
            for s in &step.pairs {
                let e = nrf(s, alpha)?;
                sum += e.sigma_alpha;
                var += e.u_sigma * e.u_sigma;
            }
            let k = step.pairs.len() as f64;
            Ok(ScanPoint {
                d: step.displacement,
                sigma: sum / k,
                u_sigma: var.sqrt() / k,
            })
        })
        .collect()
}

/// Quadratic fit σ(d) = a (d - d̄)² + b (d - d̄) + c and its vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexFit {
    pub d_min: f64,
    pub u_dmin: f64,
    /// Coefficients about `d_ref`, the mean scan position.
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d_ref: f64,
    pub chi2: f64,
    pub dof: usize,
}

/// Weighted least-squares parabola through `(d, σ, u_σ)` points.
///
/// With all `u_σ > 0` the weights are `1/u_σ²` and the parameter covariance
/// is inflated by the reduced χ² when that exceeds one. With all `u_σ = 0`
/// the fit is unweighted and the residual variance sets the scale.
pub fn parabola_fit(points: &[ScanPoint]) -> Result<VertexFit> {
    let n = points.len();
    if n < 3 {
        return Err(Error::invalid(
            "scan",
            format!("need at least 3 points, got {n}"),
        ));
    }
    for p in points {
        ensure_finite("d", p.d)?;
        ensure_finite("sigma", p.sigma)?;
        ensure_finite("u_sigma", p.u_sigma)?;
        if p.u_sigma < 0.0 {
            return Err(Error::invalid("u_sigma", "must be >= 0"));
        }
    }
    let zero_u = points.iter().filter(|p| p.u_sigma == 0.0).count();
    let weighted = match zero_u {
        0 => true,
        k if k == n => false,
        _ => {
            return Err(Error::invalid(
                "u_sigma",
                "either all or none of the uncertainties may be zero",
            ))
        }
    };
    let d_ref = points.iter().map(|p| p.d).sum::<f64>() / n as f64;
    let x = DMatrix::from_fn(n, 3, |i, j| (points[i].d - d_ref).powi(2 - j as i32));
    let y = DVector::from_iterator(n, points.iter().map(|p| p.sigma));
    let w = DVector::from_iterator(
        n,
        points.iter().map(|p| {
            if weighted {
                1.0 / (p.u_sigma * p.u_sigma)
            } else {
                1.0
            }
        }),
    );
    let xtw = x.transpose() * DMatrix::from_diagonal(&w);
    let normal: Matrix3<f64> = (&xtw * &x).fixed_view::<3, 3>(0, 0).into();
    let rhs: Vector3<f64> = (&xtw * &y).fixed_view::<3, 1>(0, 0).into();
    let inv = normal
        .try_inverse()
        .ok_or_else(|| Error::invalid("scan", "displacements do not determine a parabola"))?;
    let beta = inv * rhs;
    let resid = &y - &x * DVector::from_column_slice(beta.as_slice());
    let chi2: f64 = resid.iter().zip(w.iter()).map(|(r, w)| w * r * r).sum();
    let dof = n - 3;
    let scale = if weighted {
        if dof > 0 {
            (chi2 / dof as f64).max(1.0)
        } else {
            1.0
        }
    } else if dof > 0 {
        chi2 / dof as f64
    } else {
        0.0
    };
    let cov = inv * scale;
    let (a, b, c) = (beta[0], beta[1], beta[2]);
    // curvature at rounding level means a flat profile, not a shallow bowl
    let half_span = points
        .iter()
        .map(|p| (p.d - d_ref).abs())
        .fold(0.0, f64::max);
    let scale_y = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if a <= 0.0 || a * half_span * half_span <= 1e-10 * scale_y {
        return Err(Error::degenerate(format!(
            "fitted parabola is not convex (a = {a:.3e}); the scan does not bracket the minimum"
        )));
    }
    let xv = -b / (2.0 * a);
    let g = Vector3::new(b / (2.0 * a * a), -1.0 / (2.0 * a), 0.0);
    let var = (g.transpose() * cov * g)[0];
    Ok(VertexFit {
        d_min: d_ref + xv,
        u_dmin: var.max(0.0).sqrt(),
        a,
        b,
        c,
        d_ref,
        chi2,
        dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flat_profile_is_degenerate() {
        let p = pts(|_| 0.4, &[-10.0, 0.0, 10.0, 20.0], 0.01);
        assert_eq!(parabola_fit(&p).unwrap_err().exit_code(), 3);
    }

    fn pts(f: impl Fn(f64) -> f64, ds: &[f64], u: f64) -> Vec<ScanPoint> {
        ds.iter()
            .map(|&d| ScanPoint {
                d,
                sigma: f(d),
                u_sigma: u,
            })
            .collect()
    }

    #[test]
    fn exact_quadratic_vertex() {
        let ds: Vec<f64> = (-5..=10).map(|k| k as f64).collect();
        let fit = parabola_fit(&pts(|d| (d - 5.0).powi(2) + 2.0, &ds, 0.0)).unwrap();
        assert!((fit.d_min - 5.0).abs() < 1e-9);
        assert!(fit.u_dmin < 1e-6);
    }

    #[test]
    fn symmetric_noisy_points_center_on_zero() {
        let ds = [-20.0, -10.0, 0.0, 10.0, 20.0];
        let noise = [0.02, -0.01, 0.015, -0.01, 0.02];
        let p: Vec<ScanPoint> = ds
            .iter()
            .zip(noise)
            .map(|(&d, e)| ScanPoint {
                d,
                sigma: 0.3 + 1e-3 * d * d + e,
                u_sigma: 0.02,
            })
            .collect();
        let fit = parabola_fit(&p).unwrap();
        assert!(fit.d_min.abs() <= fit.u_dmin, "{fit:?}");
    }

    #[test]
    fn monotone_scan_is_not_convex() {
        let ds = [0.0, 10.0, 20.0, 30.0];
        let err = parabola_fit(&pts(|d| 1.0 - 0.01 * d - 1e-4 * d * d, &ds, 0.01)).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn mixed_zero_uncertainties_rejected() {
        let mut p = pts(|d| d * d, &[-1.0, 0.0, 1.0], 0.1);
        p[1].u_sigma = 0.0;
        assert!(parabola_fit(&p).is_err());
    }

    #[test]
    fn too_few_steps_rejected() {
        let s = PairSeries::new(vec![1.0, 2.0], vec![1.0, 3.0]).unwrap();
        let steps: Vec<ScanStep> = [0.0, 1.0, 1.0]
            .iter()
            .map(|&d| ScanStep {
                displacement: d,
                pairs: vec![s.clone()],
            })
            .collect();
        assert!(center_scan(&steps, None).is_err());
    }

    proptest! {
        #[test]
        fn vertex_invariant_under_affine_sigma(
            shift in -1.0f64..1.0,
            scale in 0.1f64..10.0,
            noise in proptest::collection::vec(-0.05f64..0.05, 7),
        ) {
            let ds = [-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0];
            let base: Vec<ScanPoint> = ds.iter().zip(&noise).map(|(&d, e)| ScanPoint {
                d, sigma: 0.4 + 2e-4 * (d - 3.0).powi(2) + e, u_sigma: 0.03,
            }).collect();
            let moved: Vec<ScanPoint> = base.iter().map(|p| ScanPoint {
                sigma: scale * p.sigma + shift, ..*p
            }).collect();
            match (parabola_fit(&base), parabola_fit(&moved)) {
                (Ok(f0), Ok(f1)) => prop_assert!((f0.d_min - f1.d_min).abs() < 1e-7 * (1.0 + f0.d_min.abs())),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "convexity changed"),
            }
        }
    }
}
