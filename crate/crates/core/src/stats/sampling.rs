use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric};

use crate::error::{ensure_finite, ensure_unit_interval, Error, Result};

/// Bose-Einstein photon-number source, P(n) = mu^n / (1 + mu)^(n + 1).
///
/// This is a geometric law counting failures before the first success, with
/// success probability 1 / (1 + mu).
#[derive(Debug, Clone, Copy)]
pub struct ThermalSampler {
    mu: f64,
    geometric: Geometric,
}

impl ThermalSampler {
    pub fn new(mu: f64) -> Result<Self> {
        ensure_finite("mu", mu)?;
        if mu < 0.0 {
            return Err(Error::invalid("mu", format!("must be >= 0, got {mu}")));
        }
        let geometric =
            Geometric::new(1.0 / (1.0 + mu)).map_err(|e| Error::invalid("mu", e.to_string()))?;
        Ok(ThermalSampler { mu, geometric })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.geometric.sample(rng)
    }
}

pub fn sample_thermal<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> Result<u64> {
    Ok(ThermalSampler::new(mu)?.sample(rng))
}

/// Binomial loss channel: each of `n` photons survives with probability `eta`.
pub fn thin<R: Rng + ?Sized>(n: u64, eta: f64, rng: &mut R) -> Result<u64> {
    ensure_unit_interval("eta", eta)?;
    Ok(thin_unchecked(n, eta, rng))
}

#[inline]
pub(crate) fn thin_unchecked<R: Rng + ?Sized>(n: u64, eta: f64, rng: &mut R) -> u64 {
    if n == 0 || eta == 0.0 {
        return 0;
    }
    if eta == 1.0 {
        return n;
    }
    // eta is validated upstream, so construction cannot fail
    Binomial::new(n, eta).expect("eta in [0, 1]").sample(rng)
}
