//! Coverage and separation bounds for vMF class hypercones, plus a Monte-Carlo
//! checker that reports how the separation bound compares with simulation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{clamped_acos, UnitVector};
use crate::vmf::{sample_vmf_one, CosineSampler};

/// 1 - cos(theta), without cancellation near theta = 0.
pub(crate) fn one_minus_cos(theta: f64) -> f64 {
    2.0 * (0.5 * theta).sin().powi(2)
}

/// Lower bound on the vMF mass inside the cone of half-angle `theta` around the mean.
pub fn coverage_lower_bound(kappa: f64, theta: f64) -> f64 {
    (-(-kappa * one_minus_cos(theta)).exp_m1()).clamp(0.0, 1.0)
}

/// Smallest concentration for which [`coverage_lower_bound`] reaches `1 - epsilon`.
pub fn min_kappa_for_coverage(theta: f64, epsilon: f64) -> Result<f64> {
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::param("epsilon", format!("{epsilon} not in (0, 1)")));
    }
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::param("theta", format!("{theta} not in [0, pi]")));
    }
    if theta == 0.0 {
        return Err(Error::DegenerateCone);
    }
    Ok(-epsilon.ln() / one_minus_cos(theta))
}

/// exp(-kappa (1 - cos theta)) for two class means `theta` apart.
pub fn separation_error_bound(kappa: f64, theta: f64) -> f64 {
    (-kappa * one_minus_cos(theta)).exp()
}

/// One cell of the separation check: the bound beside two empirical rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationCell {
    pub d: usize,
    pub kappa: f64,
    pub theta: f64,
    pub bound: f64,
    /// Fraction of draws from the first class farther than theta/2 from its mean.
    pub beyond_half_angle: f64,
    /// Fraction of draws from the first class strictly nearer the second mean.
    pub nearer_other: f64,
    pub n: usize,
}

impl SeparationCell {
    pub fn bound_holds(&self) -> bool {
        self.nearer_other <= self.bound
    }
}

/// Draws `n` points from vMF(mu_1, kappa) with a second mean `theta` away and
/// counts how often they stray past the bisector.
pub fn separation_check<R: Rng + ?Sized>(
    rng: &mut R,
    d: usize,
    kappa: f64,
    theta: f64,
    n: usize,
) -> Result<SeparationCell> {
    if n == 0 {
        return Err(Error::param("n", "need at least one draw"));
    }
    let mu1 = UnitVector::basis(d, 0)?;
    let mut m2 = vec![0.0; d];
    m2[0] = theta.cos();
    m2[1] = theta.sin();
    let mu2 = UnitVector::new(m2)?;
    let sampler = CosineSampler::new(d, kappa)?;
    let (mut beyond, mut nearer) = (0usize, 0usize);
    for _ in 0..n {
        let x = sample_vmf_one(rng, &mu1, &sampler)?;
        let c1 = x.dot(&mu1);
        if clamped_acos(c1) > 0.5 * theta {
            beyond += 1;
        }
        if x.dot(&mu2) > c1 {
            nearer += 1;
        }
    }
    Ok(SeparationCell {
        d,
        kappa,
        theta,
        bound: separation_error_bound(kappa, theta),
        beyond_half_angle: beyond as f64 / n as f64,
        nearer_other: nearer as f64 / n as f64,
        n,
    })
}
