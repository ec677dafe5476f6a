//! Score providers: the analytic vMF score used as ground truth and a small
//! trainable network, plus the three regression losses.

mod loss;
mod mlp;
mod train;

pub use loss::{loss_and_grad, loss_cosine, loss_geodesic, loss_mse, LossKind};
pub use mlp::{gradient_check, Activation, GradSample, MlpConfig, MlpScoreNet};
pub use train::{held_out_cosine, train_score, TrainConfig, TrainReport};

use crate::error::{Error, Result};
use crate::sphere::{tangent_project, UnitVector};
use crate::vmf::{ambient_score, VmfMixture, VmfParams};

/// Evaluates a score at state `z`, 1-based step `t` and class `y`.
pub trait ScoreModel: Sync {
    fn dim(&self) -> usize;

    /// Ambient gradient of the log-density.
    fn score(&self, z: &UnitVector, t: usize, y: usize) -> Result<Vec<f64>>;

    /// The score projected onto the tangent space at `z`.
    fn tangent_score(&self, z: &UnitVector, t: usize, y: usize) -> Result<Vec<f64>> {
        tangent_project(z, &self.score(z, t, y)?)
    }
}

impl<S: ScoreModel + ?Sized> ScoreModel for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn score(&self, z: &UnitVector, t: usize, y: usize) -> Result<Vec<f64>> {
        (**self).score(z, t, y)
    }
}

/// Closed-form scores of vMF class models; time-independent.
#[derive(Debug, Clone)]
pub enum AnalyticScore {
    /// `kappa_y mu_y` for class `y`, one component per label.
    ClassConditional(Vec<VmfParams>),
    /// Score of the whole mixture; the label is ignored.
    Mixture(VmfMixture),
}

impl AnalyticScore {
    pub fn single(p: VmfParams) -> Self {
        Self::ClassConditional(vec![p])
    }
}

impl ScoreModel for AnalyticScore {
    fn dim(&self) -> usize {
        match self {
            Self::ClassConditional(c) => c[0].dim(),
            Self::Mixture(m) => m.dim(),
        }
    }

    fn score(&self, z: &UnitVector, _t: usize, y: usize) -> Result<Vec<f64>> {
        match self {
            Self::ClassConditional(c) => {
                let p = c.get(y).ok_or(Error::UnknownLabel(y))?;
                p.mu().check_dim(z.dim())?;
                Ok(ambient_score(p))
            }
            Self::Mixture(m) => m.ambient_score(z),
        }
    }
}

/// A score that is identically zero.
#[derive(Debug, Clone, Copy)]
pub struct ZeroScore(pub usize);

impl ScoreModel for ZeroScore {
    fn dim(&self) -> usize {
        self.0
    }

    fn score(&self, _z: &UnitVector, _t: usize, _y: usize) -> Result<Vec<f64>> {
        Ok(vec![0.0; self.0])
    }
}
