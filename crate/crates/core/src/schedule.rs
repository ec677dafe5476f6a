//! Angular noise schedules and the concentrations derived from them.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest angle a schedule may reach, keeping `cot` strictly positive.
pub const THETA_CEILING: f64 = FRAC_PI_2 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleShape {
    Linear,
    Cosine,
    /// Built from an explicit angle list.
    Custom,
}

impl FromStr for ScheduleShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Self::Linear),
            "cosine" => Ok(Self::Cosine),
            other => Err(Error::param("shape", format!("unknown schedule shape `{other}`"))),
        }
    }
}

impl fmt::Display for ScheduleShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::Cosine => "cosine",
            Self::Custom => "custom",
        })
    }
}

/// Strictly increasing angles theta_1 < ... < theta_T in (0, pi/2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngularSchedule {
    thetas: Vec<f64>,
    shape: ScheduleShape,
}

impl AngularSchedule {
    /// Wraps an explicit angle list; `T = 1` is allowed here.
    pub fn from_thetas(thetas: Vec<f64>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::InvalidLength {
                len: 0,
                reason: "schedule needs at least one step",
            });
        }
        if !(thetas[0] > 0.0) || thetas.iter().any(|t| !(*t <= THETA_CEILING)) {
            return Err(Error::param("thetas", "angles must lie in (0, pi/2 - 1e-6]"));
        }
        if thetas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("thetas", "angles must be strictly increasing"));
        }
        Ok(Self {
            thetas,
            shape: ScheduleShape::Custom,
        })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn shape(&self) -> ScheduleShape {
        self.shape
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    fn index(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.thetas.len() {
            return Err(Error::IndexOutOfRange {
                index: t,
                len: self.thetas.len(),
            });
        }
        Ok(t - 1)
    }

    /// theta_t for 1-based `t`.
    pub fn theta_at(&self, t: usize) -> Result<f64> {
        Ok(self.thetas[self.index(t)?])
    }

    /// kappa_t = cot(theta_t) for 1-based `t`.
    pub fn kappa_at(&self, t: usize) -> Result<f64> {
        Ok(1.0 / self.theta_at(t)?.tan())
    }
}

pub fn make_schedule(steps: usize, shape: ScheduleShape) -> Result<AngularSchedule> {
    if steps < 2 {
        return Err(Error::InvalidLength {
            len: steps,
            reason: "schedule needs T >= 2",
        });
    }
    if shape == ScheduleShape::Custom {
        return Err(Error::param("shape", "custom schedules are built with from_thetas"));
    }
    let n = steps as f64;
    let thetas = (1..=steps)
        .map(|t| {
            let s = t as f64 / n;
            match shape {
                ScheduleShape::Linear => s * THETA_CEILING,
                ScheduleShape::Cosine => THETA_CEILING * (1.0 - (FRAC_PI_2 * s).cos()),
                ScheduleShape::Custom => unreachable!(),
            }
        })
        .collect();
    Ok(AngularSchedule { thetas, shape })
}

/// kappa_t for 1-based `t`.
pub fn kappa_at(schedule: &AngularSchedule, t: usize) -> Result<f64> {
    schedule.kappa_at(t)
}

/// Parameters of the sigmoid concentration used inside class cones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveKappaConfig {
    kappa_max: f64,
    beta: f64,
}

impl AdaptiveKappaConfig {
    pub fn new(kappa_max: f64, beta: f64) -> Result<Self> {
        if !(kappa_max > 0.0 && kappa_max.is_finite()) {
            return Err(Error::param("kappa_max", format!("{kappa_max} must be positive")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::param("beta", format!("{beta} must be positive")));
        }
        Ok(Self { kappa_max, beta })
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// kappa_max * sigmoid(beta * (theta_y - angle)).
pub fn adaptive_kappa(angle: f64, theta_y: f64, cfg: &AdaptiveKappaConfig) -> f64 {
    let x = cfg.beta * (theta_y - angle);
    let sig = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    cfg.kappa_max * sig
}
