//! Forward (noising) processes on the sphere, the dual magnitude/direction
//! walk, spherical Brownian motion and the Euclidean variance-preserving baseline.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::AngularSchedule;
use crate::sphere::{
    clamped_acos, compose, dot, norm, project_to_sphere, tangent_project, uniform_sphere_sample,
    uniform_tangent_direction, UnitVector,
};
use crate::vmf::{sample_vmf_one, CosineSampler};

/// Smallest magnitude a dual state may take.
pub const MIN_ALPHA: f64 = 1e-6;

/// How one forward step corrupts a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForwardMode {
    /// `Π(cos θ z + sin θ v)` with `v` uniform on the sphere.
    #[default]
    Angular,
    /// `cos θ z + sin θ v` with `v` a uniform unit tangent at `z`; no projection needed.
    AngularTangent,
    /// `vMF(z, cot θ)`.
    Vmf,
}

impl FromStr for ForwardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "angular" => Ok(Self::Angular),
            "angular-tangent" => Ok(Self::AngularTangent),
            "vmf" => Ok(Self::Vmf),
            other => Err(Error::param("mode", format!("unknown forward mode `{other}`"))),
        }
    }
}

impl fmt::Display for ForwardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Angular => "angular",
            Self::AngularTangent => "angular-tangent",
            Self::Vmf => "vmf",
        })
    }
}

pub fn forward_step_angular<R: Rng + ?Sized>(z: &UnitVector, theta: f64, rng: &mut R) -> Result<UnitVector> {
    let v = uniform_sphere_sample(rng, z.dim())?;
    let (c, s) = (theta.cos(), theta.sin());
    let mixed: Vec<f64> = z
        .as_slice()
        .iter()
        .zip(v.as_slice())
        .map(|(a, b)| c * a + s * b)
        .collect();
    project_to_sphere(&mixed)
}

pub fn forward_step_angular_tangent<R: Rng + ?Sized>(z: &UnitVector, theta: f64, rng: &mut R) -> UnitVector {
    let v = uniform_tangent_direction(rng, z);
    compose(z, theta.cos(), theta.sin(), &v)
}

pub fn forward_step_vmf<R: Rng + ?Sized>(z: &UnitVector, kappa: f64, rng: &mut R) -> Result<UnitVector> {
    sample_vmf_one(rng, z, &CosineSampler::new(z.dim(), kappa)?)
}

/// States `z_0, ..., z_T` of one forward chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<UnitVector>,
    pub mode: ForwardMode,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    /// `z_t` for `t` in `0..=T`.
    pub fn state(&self, t: usize) -> &UnitVector {
        &self.states[t]
    }

    pub fn terminal(&self) -> &UnitVector {
        self.states.last().expect("trajectory holds z_0")
    }
}

pub fn forward_trajectory<R: Rng + ?Sized>(
    z0: &UnitVector,
    schedule: &AngularSchedule,
    mode: ForwardMode,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(schedule.len() + 1);
    states.push(z0.clone());
    for t in 1..=schedule.len() {
        let z = states.last().unwrap();
        let theta = schedule.theta_at(t)?;
        let next = match mode {
            ForwardMode::Angular => forward_step_angular(z, theta, rng),
            ForwardMode::AngularTangent => Ok(forward_step_angular_tangent(z, theta, rng)),
            ForwardMode::Vmf => forward_step_vmf(z, schedule.kappa_at(t)?, rng),
        }
        .map_err(|e| e.at_step(t))?;
        states.push(next);
    }
    Ok(Trajectory { states, mode })
}

/// Magnitude and direction of an ambient point `alpha * direction`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub alpha: f64,
    pub direction: UnitVector,
}

impl DualState {
    pub fn new(alpha: f64, direction: UnitVector) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param("alpha", format!("{alpha} must be positive")));
        }
        Ok(Self { alpha, direction })
    }

    /// Splits a nonzero ambient vector into magnitude and direction.
    pub fn from_ambient(x: &[f64]) -> Result<Self> {
        let direction = project_to_sphere(x)?;
        Ok(Self {
            alpha: norm(x),
            direction,
        })
    }

    pub fn to_ambient(&self) -> Vec<f64> {
        self.direction.as_slice().iter().map(|c| self.alpha * c).collect()
    }
}

/// `alpha += sigma * eps` (clamped at [`MIN_ALPHA`]) and `direction ~ vMF(direction, kappa)`.
pub fn dual_forward_step<R: Rng + ?Sized>(
    s: &DualState,
    sigma: f64,
    kappa: f64,
    rng: &mut R,
) -> Result<DualState> {
    if !(sigma >= 0.0) {
        return Err(Error::param("sigma", format!("{sigma} < 0")));
    }
    let eps: f64 = rng.sample(StandardNormal);
    let alpha = (s.alpha + sigma * eps).max(MIN_ALPHA);
    let direction = forward_step_vmf(&s.direction, kappa, rng)?;
    Ok(DualState { alpha, direction })
}

/// One Euler-Maruyama step of `dz = sqrt(2 sigma^2) P_z dw`, renormalized.
pub fn brownian_forward_step<R: Rng + ?Sized>(
    z: &UnitVector,
    sigma: f64,
    dt: f64,
    rng: &mut R,
) -> Result<UnitVector> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("{dt} must be positive")));
    }
    if sigma == 0.0 {
        return Ok(z.clone());
    }
    let g: Vec<f64> = (0..z.dim()).map(|_| rng.sample(StandardNormal)).collect();
    let scale = (2.0 * sigma * sigma * dt).sqrt();
    let step = tangent_project(z, &g)?;
    let moved: Vec<f64> = z
        .as_slice()
        .iter()
        .zip(&step)
        .map(|(a, b)| a + scale * b)
        .collect();
    project_to_sphere(&moved)
}

/// `sqrt(alphabar) x + sqrt(1 - alphabar) eps` in ambient space.
pub fn gaussian_vp_forward<R: Rng + ?Sized>(x: &[f64], alphabar: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(alphabar > 0.0 && alphabar <= 1.0) {
        return Err(Error::param("alphabar", format!("{alphabar} not in (0, 1]")));
    }
    let (a, b) = (alphabar.sqrt(), (1.0 - alphabar).sqrt());
    Ok(x.iter()
        .map(|v| a * v + b * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// How isotropic Gaussian noise distorts points on the sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub dim: usize,
    pub sigma: f64,
    /// Norms of the noised points `x + sigma z`.
    pub noised_norms: Vec<f64>,
    pub noised_norm_mean: f64,
    pub noised_norm_std: f64,
    /// Mean of `|angle(x_i + sigma z_i, x_j + sigma z_j) - angle(x_i, x_j)|` over pairs.
    pub mean_abs_angle_change: f64,
    pub mean_clean_pair_angle: f64,
    pub mean_noised_pair_angle: f64,
    /// Mean and standard deviation of `|z| / sqrt(d)` over the noise draws.
    pub noise_norm_ratio_mean: f64,
    pub noise_norm_ratio_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

fn vector_angle(a: &[f64], b: &[f64]) -> f64 {
    clamped_acos(dot(a, b) / (norm(a) * norm(b)))
}

/// Adds `sigma z`, `z ~ N(0, I)`, to every point and measures the damage over all pairs.
pub fn gaussian_distortion_stats<R: Rng + ?Sized>(
    points: &[UnitVector],
    sigma: f64,
    rng: &mut R,
) -> Result<DistortionReport> {
    if !(sigma > 0.0) {
        return Err(Error::param("sigma", format!("{sigma} must be positive")));
    }
    if points.len() < 2 {
        return Err(Error::EmptyInput);
    }
    let d = points[0].dim();
    let sqrt_d = (d as f64).sqrt();
    let mut ratios = Vec::with_capacity(points.len());
    let noised: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            ratios.push(norm(&z) / sqrt_d);
            p.as_slice().iter().zip(&z).map(|(a, b)| a + sigma * b).collect()
        })
        .collect();
    let norms: Vec<f64> = noised.iter().map(|x| norm(x)).collect();
    let (mut change, mut clean, mut noisy, mut pairs) = (0.0, 0.0, 0.0, 0usize);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let a0 = clamped_acos(points[i].dot(&points[j]));
            let a1 = vector_angle(&noised[i], &noised[j]);
            change += (a1 - a0).abs();
            clean += a0;
            noisy += a1;
            pairs += 1;
        }
    }
    let p = pairs as f64;
    let (noised_norm_mean, noised_norm_std) = mean_std(&norms);
    let (noise_norm_ratio_mean, noise_norm_ratio_std) = mean_std(&ratios);
    Ok(DistortionReport {
        dim: d,
        sigma,
        noised_norms: norms,
        noised_norm_mean,
        noised_norm_std,
        mean_abs_angle_change: change / p,
        mean_clean_pair_angle: clean / p,
        mean_noised_pair_angle: noisy / p,
        noise_norm_ratio_mean,
        noise_norm_ratio_std,
    })
}
