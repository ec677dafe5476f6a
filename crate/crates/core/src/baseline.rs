//! Euclidean variance-preserving diffusion baseline.
//!
//! Each class is modelled as an isotropic Gaussian (class mean, pooled
//! variance) in the ambient space. Under VP noising the marginal at step `t`
//! stays Gaussian, so the ancestral sampler runs with the exact noise
//! prediction instead of a trained network, and final samples are projected
//! onto the sphere for comparison with the spherical pipeline.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{project_to_sphere, UnitVector};

pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_BETA_MIN: f64 = 1e-3;
pub const DEFAULT_BETA_MAX: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianVpBaseline {
    means: BTreeMap<usize, Vec<f64>>,
    variance: f64,
    betas: Vec<f64>,
    alphabars: Vec<f64>,
}

impl GaussianVpBaseline {
    /// Fits class means and the pooled per-coordinate variance; betas rise linearly.
    pub fn fit(labels: &[usize], points: &[UnitVector], steps: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if labels.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: labels.len(),
            });
        }
        if steps < 2 {
            return Err(Error::InvalidLength {
                len: steps,
                reason: "baseline needs at least two steps",
            });
        }
        if !(0.0 < beta_min && beta_min <= beta_max && beta_max < 1.0) {
            return Err(Error::param("beta", "need 0 < beta_min <= beta_max < 1"));
        }
        let d = points[0].dim();
        let mut sums: BTreeMap<usize, (Vec<f64>, usize)> = BTreeMap::new();
        for (l, p) in labels.iter().zip(points) {
            p.check_dim(d)?;
            let e = sums.entry(*l).or_insert_with(|| (vec![0.0; d], 0));
            e.0.iter_mut().zip(p.as_slice()).for_each(|(a, b)| *a += b);
            e.1 += 1;
        }
        let means: BTreeMap<usize, Vec<f64>> = sums
            .into_iter()
            .map(|(l, (s, n))| (l, s.into_iter().map(|v| v / n as f64).collect()))
            .collect();
        let mut ss = 0.0;
        for (l, p) in labels.iter().zip(points) {
            ss += p
                .as_slice()
                .iter()
                .zip(&means[l])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        let variance = ss / (points.len() * d) as f64;
        let betas: Vec<f64> = (0..steps)
            .map(|i| beta_min + (beta_max - beta_min) * i as f64 / (steps - 1) as f64)
            .collect();
        let mut acc = 1.0;
        let alphabars = betas
            .iter()
            .map(|b| {
                acc *= 1.0 - b;
                acc
            })
            .collect();
        Ok(Self {
            means,
            variance,
            betas,
            alphabars,
        })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn mean(&self, label: usize) -> Result<&[f64]> {
        self.means.get(&label).map(Vec::as_slice).ok_or(Error::UnknownLabel(label))
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    /// `alphabar_t` for 1-based `t`.
    pub fn alphabar(&self, t: usize) -> f64 {
        self.alphabars[t - 1]
    }

    /// Ancestral DDPM sampling for class `y`, projected onto the sphere.
    pub fn sample<R: Rng + ?Sized>(&self, y: usize, rng: &mut R) -> Result<UnitVector> {
        let m = self.mean(y)?;
        let mut x: Vec<f64> = (0..m.len()).map(|_| rng.sample(StandardNormal)).collect();
        for t in (1..=self.steps()).rev() {
            let beta = self.betas[t - 1];
            let ab = self.alphabars[t - 1];
            let ab_prev = if t > 1 { self.alphabars[t - 2] } else { 1.0 };
            let marginal_var = ab * self.variance + 1.0 - ab;
            let coef = beta / marginal_var;
            let sd = ((1.0 - ab_prev) / (1.0 - ab) * beta).sqrt();
            let inv = 1.0 / (1.0 - beta).sqrt();
            for (xi, mi) in x.iter_mut().zip(m) {
                // eps_hat * beta / sqrt(1 - ab) = beta (x - sqrt(ab) m) / marginal_var
                let mean = inv * (*xi - coef * (*xi - ab.sqrt() * mi));
                let noise: f64 = if t > 1 { rng.sample(StandardNormal) } else { 0.0 };
                *xi = mean + sd * noise;
            }
        }
        project_to_sphere(&x)
    }
}
