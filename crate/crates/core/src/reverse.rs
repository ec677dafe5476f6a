//! Reverse (denoising) samplers: score-guided vMF steps, the angular variant,
//! cone-constrained sampling with adaptive truncation, the reverse SDE, the
//! dual magnitude/direction reverse and per-step ELBO diagnostics.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bounds::min_kappa_for_coverage;
use crate::error::{Error, Result};
use crate::forward::{DualState, Trajectory, MIN_ALPHA};
use crate::metrics::ClassCone;
use crate::schedule::{adaptive_kappa, AdaptiveKappaConfig, AngularSchedule};
use crate::score::ScoreModel;
use crate::sphere::{
    clamped_acos, norm, project_to_sphere, tangent_project, uniform_sphere_sample, Hypercone,
    UnitVector,
};
use crate::vmf::{sample_vmf_one, vmf_kl, CosineSampler, TruncatedVmf, VmfParams};

/// Concentration used by the reverse steps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaPolicy {
    /// `cot(theta_t)` from the schedule.
    #[default]
    Scheduled,
    /// The same concentration at every step.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReverseVariant {
    /// `vMF(Π(z + eta s), kappa_t)`.
    #[default]
    Drift,
    /// `vMF(Π(cos θ_t z + sin θ_t ŝ), kappa_t)` with `ŝ` the normalized score.
    Angular,
}

impl FromStr for ReverseVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drift" => Ok(Self::Drift),
            "angular" => Ok(Self::Angular),
            other => Err(Error::param("variant", format!("unknown reverse variant `{other}`"))),
        }
    }
}

impl fmt::Display for ReverseVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Drift => "drift",
            Self::Angular => "angular",
        })
    }
}

/// Step sizes and concentrations for one reverse run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseConfig {
    schedule: AngularSchedule,
    etas: Vec<f64>,
    kappa: KappaPolicy,
    adaptive: Option<AdaptiveKappaConfig>,
}

pub const DEFAULT_ETA: f64 = 0.05;

impl ReverseConfig {
    pub fn new(schedule: AngularSchedule, etas: Vec<f64>) -> Result<Self> {
        if etas.len() != schedule.len() {
            return Err(Error::DimensionMismatch {
                expected: schedule.len(),
                found: etas.len(),
            });
        }
        if etas.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::param("eta", "step sizes must be positive"));
        }
        Ok(Self {
            schedule,
            etas,
            kappa: KappaPolicy::Scheduled,
            adaptive: None,
        })
    }

    pub fn constant_eta(schedule: AngularSchedule, eta: f64) -> Result<Self> {
        let n = schedule.len();
        Self::new(schedule, vec![eta; n])
    }

    /// `eta_t = eta * t / T`, shrinking toward the end of sampling.
    pub fn decaying_eta(schedule: AngularSchedule, eta: f64) -> Result<Self> {
        let n = schedule.len();
        Self::new(schedule, (1..=n).map(|t| eta * t as f64 / n as f64).collect())
    }

    pub fn with_kappa(mut self, kappa: KappaPolicy) -> Result<Self> {
        if let KappaPolicy::Constant(c) = kappa {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::param("kappa", format!("{c} must be finite and >= 0")));
            }
        }
        self.kappa = kappa;
        Ok(self)
    }

    pub fn with_adaptive(mut self, adaptive: Option<AdaptiveKappaConfig>) -> Self {
        self.adaptive = adaptive;
        self
    }

    pub fn schedule(&self) -> &AngularSchedule {
        &self.schedule
    }

    pub fn steps(&self) -> usize {
        self.schedule.len()
    }

    pub fn adaptive(&self) -> Option<&AdaptiveKappaConfig> {
        self.adaptive.as_ref()
    }

    pub fn eta_at(&self, t: usize) -> Result<f64> {
        self.schedule.theta_at(t)?;
        Ok(self.etas[t - 1])
    }

    pub fn kappa_at(&self, t: usize) -> Result<f64> {
        match self.kappa {
            KappaPolicy::Scheduled => self.schedule.kappa_at(t),
            KappaPolicy::Constant(c) => {
                self.schedule.theta_at(t)?;
                Ok(c)
            }
        }
    }
}

fn axpy(z: &UnitVector, a: f64, v: &[f64]) -> Vec<f64> {
    z.as_slice().iter().zip(v).map(|(x, s)| x + a * s).collect()
}

fn draw<R: Rng + ?Sized>(rng: &mut R, mean: &UnitVector, kappa: f64) -> Result<UnitVector> {
    sample_vmf_one(rng, mean, &CosineSampler::new(mean.dim(), kappa)?)
}

/// Mean direction `Π(z + eta_t s)` of the drift step.
fn drift_mean<S: ScoreModel + ?Sized>(
    z: &UnitVector,
    t: usize,
    y: usize,
    cfg: &ReverseConfig,
    score: &S,
) -> Result<UnitVector> {
    let s = score.score(z, t, y)?;
    project_to_sphere(&axpy(z, cfg.eta_at(t)?, &s))
}

/// One step of the score-guided sampler: `z_{t-1} ~ vMF(Π(z_t + eta_t s), kappa_t)`.
pub fn reverse_step<S: ScoreModel + ?Sized, R: Rng + ?Sized>(
    z: &UnitVector,
    t: usize,
    y: usize,
    cfg: &ReverseConfig,
    score: &S,
    rng: &mut R,
) -> Result<UnitVector> {
    let m = drift_mean(z, t, y, cfg, score)?;
    draw(rng, &m, cfg.kappa_at(t)?)
}

/// Mean direction `Π(cos θ_t z + sin θ_t ŝ)`, or `z` itself when the score vanishes.
pub fn angular_mean<S: ScoreModel + ?Sized>(
    z: &UnitVector,
    t: usize,
    y: usize,
    cfg: &ReverseConfig,
    score: &S,
) -> Result<UnitVector> {
    let s = score.score(z, t, y)?;
    let n = norm(&s);
    if n < 1e-12 {
        return Ok(z.clone());
    }
    let theta = cfg.schedule.theta_at(t)?;
    let (c, si) = (theta.cos(), theta.sin() / n);
    let mixed: Vec<f64> = z
        .as_slice()
        .iter()
        .zip(&s)
        .map(|(a, b)| c * a + si * b)
        .collect();
    project_to_sphere(&mixed)
}

pub fn reverse_step_angular<S: ScoreModel + ?Sized, R: Rng + ?Sized>(
    z: &UnitVector,
    t: usize,
    y: usize,
    cfg: &ReverseConfig,
    score: &S,
    rng: &mut R,
) -> Result<UnitVector> {
    let m = angular_mean(z, t, y, cfg, score)?;
    draw(rng, &m, cfg.kappa_at(t)?)
}

/// States `z_T, z_{T-1}, ..., z_1` of one reverse chain started from a uniform draw.
pub fn reverse_trajectory<S: ScoreModel + ?Sized, R: Rng + ?Sized>(
    y: usize,
    cfg: &ReverseConfig,
    variant: ReverseVariant,
    score: &S,
    rng: &mut R,
) -> Result<Vec<UnitVector>> {
    let steps = cfg.steps();
    let mut states = Vec::with_capacity(steps);
    states.push(uniform_sphere_sample(rng, score.dim())?);
    // The step at t = 1 is skipped: z_1 is the returned sample.
    for t in (2..=steps).rev() {
        let z = states.last().unwrap();
        let next = match variant {
            ReverseVariant::Drift => reverse_step(z, t, y, cfg, score, rng),
            ReverseVariant::Angular => reverse_step_angular(z, t, y, cfg, score, rng),
        }
        .map_err(|e| e.at_step(t))?;
        states.push(next);
    }
    Ok(states)
}

/// One class-conditional sample `z_1`.
pub fn sample_class<S: ScoreModel + ?Sized, R: Rng + ?Sized>(
    y: usize,
    cfg: &ReverseConfig,
    variant: ReverseVariant,
    score: &S,
    rng: &mut R,
) -> Result<UnitVector> {
    Ok(reverse_trajectory(y, cfg, variant, score, rng)?.pop().unwrap())
}

/// Sigmoid concentration whose plateau reaches `1 - epsilon` coverage of a cone of half-angle `theta`.
pub fn adaptive_for_cone(theta: f64, epsilon: f64, beta: f64) -> Result<AdaptiveKappaConfig> {
    AdaptiveKappaConfig::new(min_kappa_for_coverage(theta, epsilon)?, beta)
}

/// Sampler that keeps every draw inside the class cone `{angle(z, mean) <= theta_max}`.
///
/// The score drift is switched off while `z_t` lies outside the cone, the
/// concentration follows the adaptive sigmoid when configured (the schedule
/// otherwise), and each draw comes from the vMF truncated to the cone.
pub fn sample_hypercone_constrained<S: ScoreModel + ?Sized, R: Rng + ?Sized>(
    y: usize,
    cfg: &ReverseConfig,
    cone: &ClassCone,
    score: &S,
    rng: &mut R,
) -> Result<UnitVector> {
    let support = Hypercone::new(cone.mean.clone(), cone.theta_max)?;
    if cfg.steps() < 2 && !support.is_full() {
        return Err(Error::InvalidLength {
            len: cfg.steps(),
            reason: "constrained sampling needs T >= 2",
        });
    }
    let d = score.dim();
    let mut z = uniform_sphere_sample(rng, d)?;
    for t in (2..=cfg.steps()).rev() {
        let mut step = || -> Result<UnitVector> {
            let phi = clamped_acos(z.dot(&cone.mean));
            let kappa = match &cfg.adaptive {
                Some(a) => adaptive_kappa(phi, cone.theta_max, a),
                None => cfg.kappa_at(t)?,
            };
            let u = if support.contains(&z)? {
                drift_mean(&z, t, y, cfg, score)?
            } else {
                z.clone()
            };
            let sampler = CosineSampler::new(d, kappa)?;
            TruncatedVmf::new(VmfParams::new(u, kappa)?, support.clone())?.sample_one(rng, &sampler)
        };
        let next = step().map_err(|e| e.at_step(t))?;
        assert!(support.contains(&next)?, "truncated draw left the cone at t = {t}");
        z = next;
    }
    Ok(z)
}

/// One Euler-Maruyama step of `dz = sigma^2 P_z s dt + sqrt(2 sigma^2) P_z dw`, renormalized.
pub fn reverse_sde_step<S: ScoreModel + ?Sized, R: Rng + ?Sized>(
    z: &UnitVector,
    t: usize,
    y: usize,
    sigma: f64,
    dt: f64,
    score: &S,
    rng: &mut R,
) -> Result<UnitVector> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("{dt} must be positive")));
    }
    let s = score.tangent_score(z, t, y)?;
    let g: Vec<f64> = (0..z.dim()).map(|_| rng.sample(StandardNormal)).collect();
    let noise = tangent_project(z, &g)?;
    let (drift, diff) = (sigma * sigma * dt, (2.0 * sigma * sigma * dt).sqrt());
    let moved: Vec<f64> = z
        .as_slice()
        .iter()
        .zip(s.iter().zip(&noise))
        .map(|(x, (a, b))| x + drift * a + diff * b)
        .collect();
    project_to_sphere(&moved)
}

/// Integrates the reverse SDE for `steps` steps from a uniform start; `t` counts down from `steps`.
pub fn sample_sde<S: ScoreModel + ?Sized, R: Rng + ?Sized>(
    y: usize,
    steps: usize,
    sigma: f64,
    dt: f64,
    score: &S,
    rng: &mut R,
) -> Result<UnitVector> {
    let mut z = uniform_sphere_sample(rng, score.dim())?;
    for t in (1..=steps).rev() {
        z = reverse_sde_step(&z, t, y, sigma, dt, score, rng).map_err(|e| e.at_step(t))?;
    }
    Ok(z)
}

/// Where the reverse direction update points.
#[derive(Clone, Copy)]
pub enum DirectionTarget<'a> {
    /// A known mean direction.
    Fixed(&'a UnitVector),
    /// `Π(d + eta s(d, t, y))`.
    Score {
        model: &'a dyn ScoreModel,
        class: usize,
        eta: f64,
    },
}

/// Parameters of one dual reverse step.
#[derive(Clone, Copy)]
pub struct DualReverse<'a> {
    /// Estimate of the clean magnitude alpha_0.
    pub alpha_target: f64,
    /// Standard deviation of the magnitude draw.
    pub sigma: f64,
    /// Concentration of the direction draw; infinity returns the mean direction.
    pub kappa: f64,
    pub direction: DirectionTarget<'a>,
}

/// `alpha ~ N(target + (t-1)/t (alpha_t - target), sigma^2)` and
/// `direction ~ vMF(m, kappa)`.
///
/// The magnitude mean is the Gaussian random-walk bridge pinned at the target,
/// so the step at `t = 1` lands on the target itself.
pub fn dual_reverse_step<R: Rng + ?Sized>(
    s: &DualState,
    t: usize,
    params: &DualReverse<'_>,
    rng: &mut R,
) -> Result<DualState> {
    if t == 0 {
        return Err(Error::IndexOutOfRange { index: 0, len: 0 });
    }
    let keep = (t - 1) as f64 / t as f64;
    let mean = params.alpha_target + keep * (s.alpha - params.alpha_target);
    let eps: f64 = if params.sigma > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
    let alpha = (mean + params.sigma * eps).max(MIN_ALPHA);
    let m = match params.direction {
        DirectionTarget::Fixed(d) => d.clone(),
        DirectionTarget::Score { model, class, eta } => {
            let sc = model.score(&s.direction, t, class)?;
            project_to_sphere(&axpy(&s.direction, eta, &sc))?
        }
    };
    let direction = if params.kappa.is_infinite() {
        m
    } else {
        draw(rng, &m, params.kappa)?
    };
    Ok(DualState { alpha, direction })
}

/// Dual reverse chain: the direction follows [`reverse_step`] for `t = T..2`,
/// the magnitude follows the bridge for `t = T..1` with noise `sigma sqrt((t-1)/t)`.
pub fn sample_dual<S: ScoreModel, R: Rng + ?Sized>(
    y: usize,
    alpha_start: f64,
    alpha_target: f64,
    sigma: f64,
    cfg: &ReverseConfig,
    score: &S,
    rng: &mut R,
) -> Result<DualState> {
    let mut s = DualState::new(alpha_start, uniform_sphere_sample(rng, score.dim())?)?;
    for t in (1..=cfg.steps()).rev() {
        let keep = (t - 1) as f64 / t as f64;
        if t == 1 {
            let mean = alpha_target + keep * (s.alpha - alpha_target);
            s.alpha = mean.max(MIN_ALPHA);
            break;
        }
        let params = DualReverse {
            alpha_target,
            sigma: sigma * keep.sqrt(),
            kappa: cfg.kappa_at(t)?,
            direction: DirectionTarget::Score {
                model: score,
                class: y,
                eta: cfg.eta_at(t)?,
            },
        };
        s = dual_reverse_step(&s, t, &params, rng).map_err(|e| e.at_step(t))?;
    }
    Ok(s)
}

/// Per-step terms of the negative ELBO of one forward trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElboReport {
    /// `KL(vMF(z_{t-1}, kappa_t) || p(z_t | z_{t+1}))` for `t = 1..T-1`.
    pub kl: Vec<f64>,
    /// `-log p(z_0 | z_1)` under the truncated reverse kernel.
    pub reconstruction: f64,
    /// Monte-Carlo estimate of the truncated kernel's log normalizer.
    pub log_partition: f64,
    pub total: f64,
}

/// Reverse kernels `p(z_k | z_{k+1}) = vMF(Π(z_{k+1} + eta s), kappa_{k+1})` for `k = 0..T-1`.
pub fn reverse_kernels<S: ScoreModel + ?Sized>(
    trajectory: &Trajectory,
    y: usize,
    cfg: &ReverseConfig,
    score: &S,
) -> Result<Vec<VmfParams>> {
    if cfg.steps() != trajectory.steps() {
        return Err(Error::DimensionMismatch {
            expected: trajectory.steps(),
            found: cfg.steps(),
        });
    }
    (0..trajectory.steps())
        .map(|k| {
            let t = k + 1;
            VmfParams::new(drift_mean(trajectory.state(t), t, y, cfg, score)?, cfg.kappa_at(t)?)
        })
        .collect()
}

/// KL terms against the forward kernels `vMF(z_{t-1}, kappa_t)` and the
/// reconstruction term under the reverse kernel truncated to `cone`.
pub fn elbo_diagnostics<R: Rng + ?Sized>(
    trajectory: &Trajectory,
    forward: &AngularSchedule,
    reverse: &[VmfParams],
    cone: &Hypercone,
    mc_samples: usize,
    rng: &mut R,
) -> Result<ElboReport> {
    let steps = trajectory.steps();
    if forward.len() != steps || reverse.len() != steps {
        return Err(Error::DimensionMismatch {
            expected: steps,
            found: reverse.len().min(forward.len()),
        });
    }
    let kl = (1..steps)
        .map(|t| {
            let q = VmfParams::new(trajectory.state(t - 1).clone(), forward.kappa_at(t)?)?;
            vmf_kl(&q, &reverse[t])
        })
        .collect::<Result<Vec<f64>>>()?;
    let truncated = TruncatedVmf::new(reverse[0].clone(), cone.clone())?;
    let log_partition = truncated.log_partition_mc(rng, mc_samples)?;
    let reconstruction = -truncated.log_density(trajectory.state(0), log_partition)?;
    let total = reconstruction + kl.iter().sum::<f64>();
    Ok(ElboReport {
        kl,
        reconstruction,
        log_partition,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{forward_trajectory, ForwardMode};
    use crate::schedule::{make_schedule, ScheduleShape};
    use crate::score::{AnalyticScore, ZeroScore};
    use crate::vmf::cap_probability_s2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn cfg(steps: usize, shape: ScheduleShape) -> ReverseConfig {
        ReverseConfig::constant_eta(make_schedule(steps, shape).unwrap(), DEFAULT_ETA).unwrap()
    }

    fn single(d: usize, kappa: f64) -> (UnitVector, AnalyticScore) {
        let mu = UnitVector::basis(d, 0).unwrap();
        (mu.clone(), AnalyticScore::single(VmfParams::new(mu, kappa).unwrap()))
    }

    #[test]
    fn config_validation() {
        let s = make_schedule(4, ScheduleShape::Linear).unwrap();
        assert!(ReverseConfig::new(s.clone(), vec![0.1; 3]).is_err());
        assert!(ReverseConfig::new(s.clone(), vec![0.1, 0.1, 0.0, 0.1]).is_err());
        let c = ReverseConfig::decaying_eta(s.clone(), 0.2).unwrap();
        assert!((c.eta_at(2).unwrap() - 0.1).abs() < 1e-15);
        let c = c.with_kappa(KappaPolicy::Constant(7.0)).unwrap();
        assert_eq!(c.kappa_at(3).unwrap(), 7.0);
        assert!(c.kappa_at(5).is_err());
        assert!(ReverseConfig::constant_eta(s, 0.1)
            .unwrap()
            .with_kappa(KappaPolicy::Constant(-1.0))
            .is_err());
    }

    #[test]
    fn zero_score_and_sharp_kappa_keeps_state() {
        let mut r = rng(1);
        let c = cfg(10, ScheduleShape::Linear).with_kappa(KappaPolicy::Constant(1e8)).unwrap();
        let z = UnitVector::new(vec![0.3, 0.1, -0.9]).unwrap();
        let out = reverse_step(&z, 5, 0, &c, &ZeroScore(3), &mut r).unwrap();
        assert!(clamped_acos(out.dot(&z)) < 1e-3);
        let out = reverse_step_angular(&z, 5, 0, &c, &ZeroScore(3), &mut r).unwrap();
        assert!(clamped_acos(out.dot(&z)) < 1e-3);
    }

    #[test]
    fn at_mode_stays_near_mode() {
        let mut r = rng(2);
        let (mu, score) = single(3, 20.0);
        let c = cfg(10, ScheduleShape::Linear).with_kappa(KappaPolicy::Constant(100.0)).unwrap();
        let n = 2000;
        let close = (0..n)
            .filter(|_| clamped_acos(reverse_step(&mu, 5, 0, &c, &score, &mut r).unwrap().dot(&mu)) <= 0.1)
            .count();
        let expected = cap_probability_s2(100.0, 0.1);
        assert!(close as f64 / n as f64 >= expected - 0.03);
        assert!(expected > 0.35);
    }

    #[test]
    fn angular_mean_limits() {
        let (mu, score) = single(4, 5.0);
        let z = UnitVector::basis(4, 1).unwrap();
        let early = AngularSchedule::from_thetas(vec![1e-9, crate::schedule::THETA_CEILING]).unwrap();
        let c = ReverseConfig::constant_eta(early, 0.1).unwrap();
        assert!(angular_mean(&z, 1, 0, &c, &score).unwrap().dot(&z) > 1.0 - 1e-12);
        assert!(angular_mean(&z, 2, 0, &c, &score).unwrap().dot(&mu) > 1.0 - 1e-11);
        assert_eq!(angular_mean(&z, 2, 0, &c, &ZeroScore(4)).unwrap(), z);
    }

    #[test]
    fn single_step_schedule_returns_uniform_draw() {
        let s = AngularSchedule::from_thetas(vec![0.5]).unwrap();
        let c = ReverseConfig::constant_eta(s, 0.05).unwrap();
        let (_, score) = single(3, 20.0);
        let a = sample_class(0, &c, ReverseVariant::Drift, &score, &mut rng(3)).unwrap();
        let b = uniform_sphere_sample(&mut rng(3), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_is_deterministic() {
        let c = cfg(50, ScheduleShape::Cosine);
        let (_, score) = single(6, 20.0);
        for v in [ReverseVariant::Drift, ReverseVariant::Angular] {
            let a = reverse_trajectory(0, &c, v, &score, &mut rng(4)).unwrap();
            let b = reverse_trajectory(0, &c, v, &score, &mut rng(4)).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.len(), 50);
        }
    }

    #[test]
    fn constrained_full_cone_matches_plain_sampler() {
        let c = cfg(30, ScheduleShape::Linear);
        let (mu, score) = single(5, 20.0);
        let cone = ClassCone {
            mean: mu,
            theta_max: PI,
        };
        for seed in 0..5 {
            let a = sample_hypercone_constrained(0, &c, &cone, &score, &mut rng(seed)).unwrap();
            let b = sample_class(0, &c, ReverseVariant::Drift, &score, &mut rng(seed)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn constrained_samples_stay_in_cone() {
        let (mu, score) = single(8, 20.0);
        let cone = ClassCone {
            mean: mu.clone(),
            theta_max: PI / 8.0,
        };
        let c = cfg(20, ScheduleShape::Linear).with_adaptive(Some(adaptive_for_cone(PI / 8.0, 0.05, 10.0).unwrap()));
        let mut r = rng(5);
        for _ in 0..500 {
            let z = sample_hypercone_constrained(0, &c, &cone, &score, &mut r).unwrap();
            assert!(clamped_acos(z.dot(&mu)) <= PI / 8.0 + 1e-12);
        }
        let short = ReverseConfig::constant_eta(AngularSchedule::from_thetas(vec![0.4]).unwrap(), 0.05).unwrap();
        assert!(sample_hypercone_constrained(0, &short, &cone, &score, &mut r).is_err());
    }

    #[test]
    fn sde_step_limits() {
        let mut r = rng(6);
        let z = UnitVector::basis(3, 2).unwrap();
        assert_eq!(reverse_sde_step(&z, 1, 0, 0.0, 0.1, &ZeroScore(3), &mut r).unwrap(), z);
        assert!(reverse_sde_step(&z, 1, 0, 1.0, 0.0, &ZeroScore(3), &mut r).is_err());
    }

    #[test]
    fn dual_noiseless_oracle_recovers_start() {
        let mut r = rng(7);
        let d0 = UnitVector::new(vec![0.2, 0.5, -0.3, 0.7]).unwrap();
        let s = DualState::new(3.7, UnitVector::basis(4, 1).unwrap()).unwrap();
        let params = DualReverse {
            alpha_target: 2.0,
            sigma: 0.0,
            kappa: f64::INFINITY,
            direction: DirectionTarget::Fixed(&d0),
        };
        let out = dual_reverse_step(&s, 1, &params, &mut r).unwrap();
        assert_eq!(out.alpha, 2.0);
        assert_eq!(out.direction, d0);
    }

    #[test]
    fn elbo_zero_when_reverse_equals_forward() {
        let mut r = rng(8);
        let schedule = make_schedule(10, ScheduleShape::Linear).unwrap();
        let z0 = UnitVector::basis(3, 0).unwrap();
        let tr = forward_trajectory(&z0, &schedule, ForwardMode::Vmf, &mut r).unwrap();
        let reverse: Vec<VmfParams> = (0..10)
            .map(|k| {
                if k == 0 {
                    VmfParams::new(z0.clone(), 5.0).unwrap()
                } else {
                    VmfParams::new(tr.state(k - 1).clone(), schedule.kappa_at(k).unwrap()).unwrap()
                }
            })
            .collect();
        let cone = Hypercone::new(z0.clone(), PI / 3.0).unwrap();
        let rep = elbo_diagnostics(&tr, &schedule, &reverse, &cone, 10_000, &mut r).unwrap();
        assert_eq!(rep.kl.len(), 9);
        assert!(rep.kl.iter().all(|k| k.abs() < 1e-10), "{:?}", rep.kl);
        assert!(rep.total.is_finite());
    }

    #[test]
    fn elbo_terms_nonnegative_with_score_kernels() {
        let mut r = rng(9);
        let c = cfg(12, ScheduleShape::Linear);
        let (mu, score) = single(5, 15.0);
        for _ in 0..10 {
            let z0 = uniform_sphere_sample(&mut r, 5).unwrap();
            let tr = forward_trajectory(&z0, c.schedule(), ForwardMode::Angular, &mut r).unwrap();
            let kernels = reverse_kernels(&tr, 0, &c, &score).unwrap();
            let cone = Hypercone::full(mu.clone());
            let rep = elbo_diagnostics(&tr, c.schedule(), &kernels, &cone, 1000, &mut r).unwrap();
            assert!(rep.kl.iter().all(|k| *k >= -1e-12));
            assert!(rep.total.is_finite());
        }
    }

    #[test]
    fn elbo_single_step_reconstruction_matches_closed_form() {
        let mut r = rng(10);
        let schedule = AngularSchedule::from_thetas(vec![0.3]).unwrap();
        let mu = UnitVector::basis(3, 0).unwrap();
        let z0 = UnitVector::new(vec![0.95, 0.2, 0.1]).unwrap();
        let tr = forward_trajectory(&z0, &schedule, ForwardMode::Vmf, &mut r).unwrap();
        let kernel = VmfParams::new(mu.clone(), 6.0).unwrap();
        let cone = Hypercone::new(mu.clone(), PI / 4.0).unwrap();
        let rep = elbo_diagnostics(&tr, &schedule, std::slice::from_ref(&kernel), &cone, 400_000, &mut r).unwrap();
        let log_z = cap_probability_s2(6.0, PI / 4.0).ln() - kernel.log_norm_const();
        let exact = -(6.0 * z0.dot(&mu) - log_z);
        assert!(rep.kl.is_empty());
        assert!((rep.reconstruction - exact).abs() <= 0.02 * exact.abs(), "{} vs {exact}", rep.reconstruction);
    }
}
