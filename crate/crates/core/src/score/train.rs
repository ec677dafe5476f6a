use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::LossKind;
use super::mlp::{GradSample, MlpScoreNet};
use crate::error::{Error, Result};
use crate::forward::{forward_step_angular, forward_step_angular_tangent, forward_step_vmf, ForwardMode};
use crate::schedule::AngularSchedule;
use crate::sphere::{dot, norm, tangent_project, UnitVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub loss: LossKind,
    pub forward_mode: ForwardMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 128,
            learning_rate: 1e-3,
            momentum: 0.9,
            loss: LossKind::Mse,
            forward_mode: ForwardMode::Angular,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss of every epoch.
    pub loss_curve: Vec<f64>,
}

fn corrupt<R: Rng + ?Sized>(
    x: &UnitVector,
    t: usize,
    schedule: &AngularSchedule,
    mode: ForwardMode,
    rng: &mut R,
) -> Result<UnitVector> {
    let theta = schedule.theta_at(t)?;
    match mode {
        ForwardMode::Angular => forward_step_angular(x, theta, rng),
        ForwardMode::AngularTangent => Ok(forward_step_angular_tangent(x, theta, rng)),
        ForwardMode::Vmf => forward_step_vmf(x, schedule.kappa_at(t)?, rng),
    }
}

/// One noised training example with target `kappa_t (I - z z^T) x`.
fn make_example<R: Rng + ?Sized>(
    x: &UnitVector,
    y: usize,
    schedule: &AngularSchedule,
    mode: ForwardMode,
    rng: &mut R,
) -> Result<GradSample> {
    let t = rng.random_range(1..=schedule.len());
    let z = corrupt(x, t, schedule, mode, rng)?;
    let kappa = schedule.kappa_at(t)?;
    let target = tangent_project(&z, x.as_slice())?
        .into_iter()
        .map(|v| kappa * v)
        .collect();
    Ok(GradSample {
        z: z.into_inner(),
        t,
        y,
        target,
    })
}

/// Minibatch SGD with momentum on noised copies of `points`.
pub fn train_score<R: Rng + ?Sized>(
    net: &mut MlpScoreNet,
    labels: &[usize],
    points: &[UnitVector],
    schedule: &AngularSchedule,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if labels.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: labels.len(),
        });
    }
    if schedule.len() != net.config().steps {
        return Err(Error::DimensionMismatch {
            expected: net.config().steps,
            found: schedule.len(),
        });
    }
    if cfg.batch_size == 0 {
        return Err(Error::param("batch_size", "must be positive"));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    let mut velocity = vec![0.0; net.num_params()];
    let mut grad = vec![0.0; net.num_params()];
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut sum = 0.0;
        let mut batches = 0;
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<GradSample> = chunk
                .iter()
                .map(|&i| make_example(&points[i], labels[i], schedule, cfg.forward_mode, rng))
                .collect::<Result<_>>()?;
            let loss = net.batch_loss(&batch, cfg.loss, Some(&mut grad))?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, step, loss });
            }
            for ((p, v), g) in net.params_mut().iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v + g;
                *p -= cfg.learning_rate * *v;
            }
            sum += loss;
            batches += 1;
        }
        curve.push(sum / batches as f64);
    }
    Ok(TrainReport { loss_curve: curve })
}

/// Mean cosine between the network output and `(I - z z^T) mu_y` on freshly
/// noised copies of `points`, where `means[y]` is the class mean direction.
pub fn held_out_cosine<R: Rng + ?Sized>(
    net: &MlpScoreNet,
    means: &[UnitVector],
    labels: &[usize],
    points: &[UnitVector],
    schedule: &AngularSchedule,
    mode: ForwardMode,
    rng: &mut R,
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, &y) in points.iter().zip(labels) {
        let mu = means.get(y).ok_or(Error::UnknownLabel(y))?;
        let t = rng.random_range(1..=schedule.len());
        let z = corrupt(x, t, schedule, mode, rng)?;
        let target = tangent_project(&z, mu.as_slice())?;
        let out = net.predict(z.as_slice(), t, y)?;
        let (nt, no) = (norm(&target), norm(&out));
        if nt < 1e-9 || no == 0.0 {
            continue;
        }
        total += dot(&out, &target) / (nt * no);
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(total / count as f64)
}
