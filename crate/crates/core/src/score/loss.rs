use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{clamped_acos, dot, norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Mse,
    Cosine,
    Geodesic,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(Self::Mse),
            "cosine" => Ok(Self::Cosine),
            "geodesic" => Ok(Self::Geodesic),
            other => Err(Error::param("loss", format!("unknown loss `{other}`"))),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mse => "mse",
            Self::Cosine => "cosine",
            Self::Geodesic => "geodesic",
        })
    }
}

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            found: a.len(),
        });
    }
    Ok(())
}

/// `|pred - target|^2`.
pub fn loss_mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    same_len(pred, target)?;
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum())
}

/// Normalized cosine between the two vectors plus the norm of `pred`.
fn cosine_parts(pred: &[f64], target: &[f64]) -> Result<(f64, f64, f64)> {
    same_len(pred, target)?;
    let (np, nt) = (norm(pred), norm(target));
    if np == 0.0 || nt == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(((dot(pred, target) / (np * nt)).clamp(-1.0, 1.0), np, nt))
}

/// `1 - cos(pred, target)`, in `[0, 2]`.
pub fn loss_cosine(pred: &[f64], target: &[f64]) -> Result<f64> {
    Ok(1.0 - cosine_parts(pred, target)?.0)
}

/// `arccos(cos(pred, target))^2`, in `[0, pi^2]`.
pub fn loss_geodesic(pred: &[f64], target: &[f64]) -> Result<f64> {
    Ok(clamped_acos(cosine_parts(pred, target)?.0).powi(2))
}

/// Loss value and its gradient with respect to `pred`.
pub fn loss_and_grad(kind: LossKind, pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if kind == LossKind::Mse {
        let l = loss_mse(pred, target)?;
        return Ok((l, pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t)).collect()));
    }
    let (c, np, nt) = cosine_parts(pred, target)?;
    // d cos / d pred = (t_hat - c p_hat) / |p|
    let dcos = |g: f64| -> Vec<f64> {
        pred.iter()
            .zip(target)
            .map(|(p, t)| g * (t / nt - c * p / np) / np)
            .collect()
    };
    match kind {
        LossKind::Cosine => Ok((1.0 - c, dcos(-1.0))),
        LossKind::Geodesic => {
            let a = clamped_acos(c);
            let s = (1.0 - c * c).sqrt();
            // arccos(c) / sin(arccos(c)) -> 1 as c -> 1.
            let ratio = if s < 1e-8 && c > 0.0 { 1.0 } else { a / s.max(1e-300) };
            Ok((a * a, dcos(-2.0 * ratio)))
        }
        LossKind::Mse => unreachable!(),
    }
}
