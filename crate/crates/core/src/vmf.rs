//! The von Mises-Fisher family on S^{d-1}.
//!
//! Density `f(x; mu, kappa) = C_d(kappa) exp(kappa mu^T x)` with
//! `C_d(kappa) = kappa^{d/2-1} / ((2 pi)^{d/2} I_{d/2-1}(kappa))`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use statrs::function::gamma::ln_gamma;

use crate::bessel::log_bessel_i;
use crate::error::{Error, Result};
use crate::sphere::{
    clamped_acos, compose, dot, geodesic_angle, tangent_project, uniform_sphere_sample,
    uniform_tangent_direction, Hypercone, UnitVector,
};

/// Proposals allowed per accepted draw before a rejection sampler gives up.
pub const REJECTION_BUDGET: usize = 1000;

/// Mean direction and concentration of one vMF component.
#[derive(Debug, Clone, PartialEq)]
pub struct VmfParams {
    mu: UnitVector,
    kappa: f64,
    log_norm: f64,
}

impl VmfParams {
    pub fn new(mu: UnitVector, kappa: f64) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::param("kappa", format!("{kappa} is not a finite value >= 0")));
        }
        let log_norm = log_norm_const(mu.dim(), kappa)?;
        Ok(Self { mu, kappa, log_norm })
    }

    /// The uniform distribution on S^{d-1}, anchored at an arbitrary mean.
    pub fn uniform(d: usize) -> Result<Self> {
        Self::new(UnitVector::basis(d, 0)?, 0.0)
    }

    pub fn mu(&self) -> &UnitVector {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn log_norm_const(&self) -> f64 {
        self.log_norm
    }

    /// E[x] = A_d(kappa) mu; this returns the scalar A_d(kappa).
    pub fn mean_resultant_length(&self) -> f64 {
        bessel_ratio(self.dim(), self.kappa)
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidDimension(d))
    } else {
        Ok(())
    }
}

/// log of the surface area of S^{d-1}: log(2 pi^{d/2} / Gamma(d/2)).
pub fn log_sphere_area(d: usize) -> f64 {
    let h = 0.5 * d as f64;
    2f64.ln() + h * PI.ln() - ln_gamma(h)
}

/// log C_d(kappa), evaluated without leaving log space.
pub fn log_norm_const(d: usize, kappa: f64) -> Result<f64> {
    check_dim(d)?;
    if !(kappa >= 0.0) {
        return Err(Error::param("kappa", format!("{kappa} < 0")));
    }
    if kappa == 0.0 {
        return Ok(-log_sphere_area(d));
    }
    let nu = 0.5 * d as f64 - 1.0;
    Ok(nu * kappa.ln() - 0.5 * d as f64 * (2.0 * PI).ln() - log_bessel_i(nu, kappa))
}

pub fn log_density(x: &UnitVector, p: &VmfParams) -> Result<f64> {
    p.mu.check_dim(x.dim())?;
    Ok(p.log_norm + p.kappa * x.dot(&p.mu))
}

/// Riemannian gradient of the log-density: (I - x x^T)(kappa mu).
pub fn score(x: &UnitVector, p: &VmfParams) -> Result<Vec<f64>> {
    tangent_project(x, &ambient_score(p))
}

/// Euclidean gradient of `kappa mu^T x`, i.e. `kappa mu`.
pub fn ambient_score(p: &VmfParams) -> Vec<f64> {
    p.mu.as_slice().iter().map(|m| p.kappa * m).collect()
}

/// Mean resultant length A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa).
pub fn bessel_ratio(d: usize, kappa: f64) -> f64 {
    if kappa <= 0.0 {
        return 0.0;
    }
    let nu = 0.5 * d as f64 - 1.0;
    (log_bessel_i(nu + 1.0, kappa) - log_bessel_i(nu, kappa)).exp()
}

/// Inverts `bessel_ratio(d, .)`: the concentration whose mean resultant length is `rbar`.
pub fn kappa_from_resultant(d: usize, rbar: f64) -> Result<f64> {
    check_dim(d)?;
    if !(0.0..1.0).contains(&rbar) {
        return Err(Error::param("rbar", format!("{rbar} not in [0, 1)")));
    }
    if rbar == 0.0 {
        return Ok(0.0);
    }
    let df = d as f64;
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut k = rbar * (df - rbar * rbar) / (1.0 - rbar * rbar);
    for _ in 0..100 {
        let a = bessel_ratio(d, k);
        let f = a - rbar;
        if f > 0.0 {
            hi = k;
        } else {
            lo = k;
        }
        let slope = 1.0 - a * a - (df - 1.0) * a / k;
        let mut next = k - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * k.max(1.0) };
        }
        if (next - k).abs() <= 1e-14 * k.max(1.0) {
            return Ok(next);
        }
        k = next;
    }
    Ok(k)
}

/// A finite vMF mixture with simplex weights.
#[derive(Debug, Clone)]
pub struct VmfMixture {
    components: Vec<VmfParams>,
    log_weights: Vec<f64>,
}

impl VmfMixture {
    pub fn new(components: Vec<VmfParams>, weights: &[f64]) -> Result<Self> {
        let first = components.first().ok_or(Error::EmptyMixture)?;
        let d = first.dim();
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: components.len(),
                found: weights.len(),
            });
        }
        for c in &components {
            first.mu.check_dim(c.dim())?;
        }
        let _ = d;
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidWeights { sum });
        }
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            components,
        })
    }

    /// Equal weights over `components`.
    pub fn uniform_weights(components: Vec<VmfParams>) -> Result<Self> {
        let k = components.len();
        if k == 0 {
            return Err(Error::EmptyMixture);
        }
        Self::new(components, &vec![1.0 / k as f64; k])
    }

    pub fn components(&self) -> &[VmfParams] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    fn log_joint(&self, x: &UnitVector) -> Result<Vec<f64>> {
        self.components
            .iter()
            .zip(&self.log_weights)
            .map(|(c, lw)| Ok(lw + log_density(x, c)?))
            .collect()
    }

    pub fn log_density(&self, x: &UnitVector) -> Result<f64> {
        Ok(log_sum_exp(&self.log_joint(x)?))
    }

    /// Posterior component probabilities r_c(x).
    pub fn responsibilities(&self, x: &UnitVector) -> Result<Vec<f64>> {
        let lj = self.log_joint(x)?;
        let lse = log_sum_exp(&lj);
        Ok(lj.iter().map(|l| (l - lse).exp()).collect())
    }

    /// sum_c r_c(x) kappa_c mu_c.
    pub fn ambient_score(&self, x: &UnitVector) -> Result<Vec<f64>> {
        let r = self.responsibilities(x)?;
        let mut out = vec![0.0; self.dim()];
        for (c, rc) in self.components.iter().zip(r) {
            let w = rc * c.kappa;
            out.iter_mut().zip(c.mu.as_slice()).for_each(|(o, m)| *o += w * m);
        }
        Ok(out)
    }

    pub fn tangent_score(&self, x: &UnitVector) -> Result<Vec<f64>> {
        tangent_project(x, &self.ambient_score(x)?)
    }
}

/// Ambient gradient of the log mixture density at `x`.
pub fn mixture_score(x: &UnitVector, components: &[VmfParams], weights: &[f64]) -> Result<Vec<f64>> {
    VmfMixture::new(components.to_vec(), weights)?.ambient_score(x)
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Wood's rejection sampler for the cosine w = mu^T x, prepared for one (d, kappa).
#[derive(Debug, Clone)]
pub struct CosineSampler {
    d: usize,
    kappa: f64,
    b: f64,
    one_minus_x0: f64,
    log_one_minus_x0_sq: f64,
    beta: Option<Beta<f64>>,
}

impl CosineSampler {
    pub fn new(d: usize, kappa: f64) -> Result<Self> {
        check_dim(d)?;
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::param("kappa", format!("{kappa} is not a finite value >= 0")));
        }
        let dm1 = d as f64 - 1.0;
        let b = dm1 / (2.0 * kappa + (4.0 * kappa * kappa + dm1 * dm1).sqrt());
        let one_minus_x0 = 2.0 * b / (1.0 + b);
        let beta = if kappa > 0.0 {
            Some(Beta::new(0.5 * dm1, 0.5 * dm1).map_err(|e| Error::param("d", e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            d,
            kappa,
            b,
            one_minus_x0,
            log_one_minus_x0_sq: (one_minus_x0 * (2.0 - one_minus_x0)).ln(),
            beta,
        })
    }

    /// Returns `(w, 1 - w)`; the second value keeps precision when w is close to 1.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(f64, f64)> {
        let Some(beta) = &self.beta else {
            // Uniform on the sphere: w has density proportional to (1 - w^2)^{(d-3)/2}.
            let u = uniform_sphere_sample(rng, self.d)?;
            let w = u.as_slice()[0];
            return Ok((w, 1.0 - w));
        };
        let dm1 = self.d as f64 - 1.0;
        let b = self.b;
        let x0 = 1.0 - self.one_minus_x0;
        for _ in 0..REJECTION_BUDGET {
            let z = beta.sample(rng);
            let one_minus_w = 2.0 * b * z / (1.0 - (1.0 - b) * z);
            let log_u = rng.random::<f64>().ln();
            let log_ratio = self.kappa * (self.one_minus_x0 - one_minus_w)
                + dm1 * ((self.one_minus_x0 + x0 * one_minus_w).ln() - self.log_one_minus_x0_sq);
            if log_ratio >= log_u {
                return Ok((1.0 - one_minus_w, one_minus_w));
            }
        }
        Err(Error::RejectionBudgetExceeded {
            budget: REJECTION_BUDGET,
        })
    }
}

/// One vMF draw with mean direction `mu`.
pub fn sample_vmf_one<R: Rng + ?Sized>(
    rng: &mut R,
    mu: &UnitVector,
    sampler: &CosineSampler,
) -> Result<UnitVector> {
    mu.check_dim(sampler.d)?;
    let (w, one_minus_w) = sampler.sample(rng)?;
    let sin_w = (one_minus_w * (1.0 + w)).max(0.0).sqrt();
    let tangent = uniform_tangent_direction(rng, mu);
    Ok(compose(mu, w, sin_w, &tangent))
}

/// `n` i.i.d. draws from vMF(mu, kappa) (Wood rejection for the cosine, uniform tangent direction).
pub fn sample_vmf<R: Rng + ?Sized>(rng: &mut R, p: &VmfParams, n: usize) -> Result<Vec<UnitVector>> {
    if n == 0 {
        return Err(Error::param("n", "need at least one draw"));
    }
    let sampler = CosineSampler::new(p.dim(), p.kappa)?;
    (0..n).map(|_| sample_vmf_one(rng, &p.mu, &sampler)).collect()
}

/// Exact inverse-CDF sampler for d = 3; kept as an independent check on [`sample_vmf`].
pub fn sample_vmf_s2<R: Rng + ?Sized>(rng: &mut R, p: &VmfParams, n: usize) -> Result<Vec<UnitVector>> {
    if p.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: p.dim(),
        });
    }
    if !(p.kappa > 0.0) {
        return Err(Error::param("kappa", "inverse-CDF sampler needs kappa > 0"));
    }
    let (e1, e2) = orthonormal_complement_s2(&p.mu);
    let k = p.kappa;
    let tail = (-2.0 * k).exp();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let one_minus_w = (-(u + (1.0 - u) * tail).ln() / k).min(2.0);
        let w = 1.0 - one_minus_w;
        let sin_w = (one_minus_w * (1.0 + w)).max(0.0).sqrt();
        let phi = 2.0 * PI * rng.random::<f64>();
        let tangent: Vec<f64> = e1
            .iter()
            .zip(&e2)
            .map(|(a, b)| phi.cos() * a + phi.sin() * b)
            .collect();
        out.push(compose(&p.mu, w, sin_w, &tangent));
    }
    Ok(out)
}

fn orthonormal_complement_s2(mu: &UnitVector) -> (Vec<f64>, Vec<f64>) {
    let m = mu.as_slice();
    let pivot = (0..3)
        .min_by(|&a, &b| m[a].abs().total_cmp(&m[b].abs()))
        .unwrap();
    let mut seed = [0.0; 3];
    seed[pivot] = 1.0;
    let mut e1 = tangent_project(mu, &seed).unwrap();
    let n = dot(&e1, &e1).sqrt();
    e1.iter_mut().for_each(|c| *c /= n);
    let e2 = vec![
        m[1] * e1[2] - m[2] * e1[1],
        m[2] * e1[0] - m[0] * e1[2],
        m[0] * e1[1] - m[1] * e1[0],
    ];
    (e1, e2)
}

/// P(mu^T x >= cos theta) for x ~ vMF(mu, kappa) on S^2.
pub fn cap_probability_s2(kappa: f64, theta: f64) -> f64 {
    let theta = theta.clamp(0.0, PI);
    let gap = 2.0 * (0.5 * theta).sin().powi(2);
    if kappa <= 0.0 {
        return 0.5 * gap;
    }
    ((-kappa * gap).exp_m1() / (-2.0 * kappa).exp_m1()).clamp(0.0, 1.0)
}

/// vMF restricted to a hypercone and renormalized.
#[derive(Debug, Clone)]
pub struct TruncatedVmf {
    base: VmfParams,
    support: Hypercone,
}

impl TruncatedVmf {
    pub fn new(base: VmfParams, support: Hypercone) -> Result<Self> {
        base.mu.check_dim(support.dim())?;
        if support.theta() <= 0.0 {
            return Err(Error::DegenerateCone);
        }
        Ok(Self { base, support })
    }

    pub fn base(&self) -> &VmfParams {
        &self.base
    }

    pub fn support(&self) -> &Hypercone {
        &self.support
    }

    /// One exact draw.
    ///
    /// Proposals alternate between the base vMF (accepted when inside the cone)
    /// and a uniform draw inside the cone (accepted with probability
    /// `exp(kappa (mu^T z - max_cone mu^T z))`). Both are exact rejection samplers
    /// of the same target, so whichever accepts first yields a correct draw; the
    /// second stream keeps small cones far from the base mean tractable.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R, sampler: &CosineSampler) -> Result<UnitVector> {
        if self.support.is_full() {
            return sample_vmf_one(rng, &self.base.mu, sampler);
        }
        let gamma = geodesic_angle(&self.base.mu, &self.support.axis)?;
        let max_cos = (gamma - self.support.theta()).max(0.0).cos();
        for i in 0..REJECTION_BUDGET {
            if i % 2 == 0 {
                let (w, one_minus_w) = match sampler.sample(rng) {
                    Ok(v) => v,
                    Err(_) => continue,
                };
                let sin_w = (one_minus_w * (1.0 + w)).max(0.0).sqrt();
                let tangent = uniform_tangent_direction(rng, &self.base.mu);
                let z = compose(&self.base.mu, w, sin_w, &tangent);
                if self.support.contains(&z)? {
                    return Ok(z);
                }
            } else {
                let z = uniform_in_cone(rng, &self.support);
                let log_accept = self.base.kappa * (z.dot(&self.base.mu) - max_cos);
                if rng.random::<f64>().ln() <= log_accept {
                    return Ok(z);
                }
            }
        }
        Err(Error::RejectionBudgetExceeded {
            budget: REJECTION_BUDGET,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<UnitVector>> {
        let sampler = CosineSampler::new(self.base.dim(), self.base.kappa)?;
        (0..n).map(|_| self.sample_one(rng, &sampler)).collect()
    }

    /// Monte-Carlo estimate of log Z(kappa, C) = log P_base(C) - log C_d(kappa),
    /// the normalizer of `exp(kappa mu^T z) 1{z in C}` over the sphere.
    pub fn log_partition_mc<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<f64> {
        let mass = if self.support.is_full() {
            1.0
        } else {
            let sampler = CosineSampler::new(self.base.dim(), self.base.kappa)?;
            let mut hits = 0usize;
            for _ in 0..n {
                if self.support.contains(&sample_vmf_one(rng, &self.base.mu, &sampler)?)? {
                    hits += 1;
                }
            }
            if hits == 0 {
                return Err(Error::param("support", "no Monte-Carlo draw hit the cone"));
            }
            hits as f64 / n as f64
        };
        Ok(mass.ln() - self.base.log_norm)
    }

    /// log density given a previously estimated `log_partition`; -inf outside the cone.
    pub fn log_density(&self, x: &UnitVector, log_partition: f64) -> Result<f64> {
        if !self.support.contains(x)? {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.base.kappa * x.dot(&self.base.mu) - log_partition)
    }
}

/// `n` draws from the truncated vMF.
pub fn sample_truncated_vmf<R: Rng + ?Sized>(
    rng: &mut R,
    t: &TruncatedVmf,
    n: usize,
) -> Result<Vec<UnitVector>> {
    t.sample(rng, n)
}

/// Uniform draw from the cone: polar angle density ∝ sin^{d-2} on [0, theta].
pub(crate) fn uniform_in_cone<R: Rng + ?Sized>(rng: &mut R, cone: &Hypercone) -> UnitVector {
    let d = cone.dim();
    let theta = cone.theta();
    let peak = theta.min(0.5 * PI).sin();
    let psi = loop {
        let psi = theta * rng.random::<f64>();
        if d == 2 || rng.random::<f64>() <= (psi.sin() / peak).powi(d as i32 - 2) {
            break psi;
        }
    };
    let tangent = uniform_tangent_direction(rng, &cone.axis);
    compose(&cone.axis, psi.cos(), psi.sin(), &tangent)
}

/// KL(p || q) in closed form.
pub fn vmf_kl(p: &VmfParams, q: &VmfParams) -> Result<f64> {
    p.mu.check_dim(q.dim())?;
    let a = bessel_ratio(p.dim(), p.kappa);
    Ok(p.log_norm - q.log_norm + (p.kappa - q.kappa * q.mu.dot(&p.mu)) * a)
}

/// Angle between a draw and the mean, for diagnostics.
pub fn angle_to_mean(x: &UnitVector, p: &VmfParams) -> f64 {
    clamped_acos(x.dot(&p.mu))
}
