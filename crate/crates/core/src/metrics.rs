//! Class statistics and the hypercone metrics: coverage ratio (HCR), difficulty
//! skew (HDS), cosine summaries and the Rayleigh uniformity test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::sphere::{clamped_acos, norm, spherical_mean, UnitVector};

pub const DEFAULT_PERCENTILE: f64 = 95.0;
pub const DEFAULT_BINS: usize = 5;

/// Mean direction and angular radius of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCone {
    pub mean: UnitVector,
    pub theta_max: f64,
}

impl ClassCone {
    pub fn angle_to(&self, x: &UnitVector) -> f64 {
        clamped_acos(x.dot(&self.mean))
    }
}

/// Per-class cones plus the shared sub-cone weighting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub classes: BTreeMap<usize, ClassCone>,
    pub percentile: f64,
    weights: Vec<f64>,
}

impl ClassStats {
    pub fn new(classes: BTreeMap<usize, ClassCone>, percentile: f64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::param("bins", "need at least one sub-cone"));
        }
        let m = bins as f64;
        let weights = (1..=bins).map(|i| (m - i as f64 + 1.0) / m).collect();
        Ok(Self {
            classes,
            percentile,
            weights,
        })
    }

    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    /// `w_m = (M - m + 1) / M`, innermost first.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cone(&self, label: usize) -> Result<&ClassCone> {
        self.classes.get(&label).ok_or(Error::UnknownLabel(label))
    }

    /// Sub-cone edges `0 = theta_0 < ... < theta_M = theta_max` of a class.
    pub fn edges(&self, label: usize) -> Result<Vec<f64>> {
        let cone = self.cone(label)?;
        let m = self.bins();
        Ok((0..=m).map(|i| cone.theta_max * i as f64 / m as f64).collect())
    }

    /// 0-based sub-cone index of an angle, or `None` beyond `theta_max`.
    fn bin_of(&self, angle: f64, theta_max: f64) -> Option<usize> {
        if angle > theta_max {
            return None;
        }
        let m = self.bins();
        let pos = (angle / theta_max * m as f64).ceil() as usize;
        Some(pos.clamp(1, m) - 1)
    }
}

/// Linear-interpolation percentile of `values` (0..=100); sorts in place.
pub fn percentile(values: &mut [f64], pct: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(0.0..=100.0).contains(&pct) {
        return Err(Error::param("percentile", format!("{pct} not in [0, 100]")));
    }
    values.sort_by(f64::total_cmp);
    let pos = pct / 100.0 * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(values[lo] + (pos - lo as f64) * (values[hi] - values[lo]))
}

fn group<'a>(labels: &[usize], points: &'a [UnitVector]) -> Result<BTreeMap<usize, Vec<&'a UnitVector>>> {
    if labels.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: labels.len(),
        });
    }
    let mut by: BTreeMap<usize, Vec<&UnitVector>> = BTreeMap::new();
    for (l, p) in labels.iter().zip(points) {
        by.entry(*l).or_default().push(p);
    }
    Ok(by)
}

/// Fits `(mean, theta_max)` per class; `theta_max` is the `pct` percentile of angles to the mean.
pub fn fit_class_stats(labels: &[usize], points: &[UnitVector], pct: f64, bins: usize) -> Result<ClassStats> {
    let by = group(labels, points)?;
    if by.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut classes = BTreeMap::new();
    for (label, pts) in by {
        if pts.len() < 2 {
            return Err(Error::InvalidLength {
                len: pts.len(),
                reason: "each class needs at least two samples",
            });
        }
        let owned: Vec<UnitVector> = pts.iter().map(|p| (*p).clone()).collect();
        let mean = spherical_mean(&owned)?;
        let mut angles: Vec<f64> = pts.iter().map(|p| clamped_acos(p.dot(&mean))).collect();
        let theta_max = percentile(&mut angles, pct)?;
        classes.insert(label, ClassCone { mean, theta_max });
    }
    ClassStats::new(classes, pct, bins)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: usize,
    pub n: usize,
    pub outside: usize,
    pub hcr: f64,
    /// `None` when no sample of the class falls inside its cone.
    pub hds: Option<f64>,
    /// Fraction of in-cone samples per sub-cone, innermost first.
    pub bin_fractions: Vec<f64>,
    pub cos_mean: f64,
    pub cos_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub hcr: f64,
    pub hds: f64,
    /// Cosine of every sample to its own class mean, pooled.
    pub cos_mean: f64,
    pub cos_std: f64,
    pub n: usize,
    pub per_class: Vec<ClassMetrics>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, var.sqrt())
}

/// Cosine of every sample to the mean of its own class.
pub fn class_cosines(labels: &[usize], samples: &[UnitVector], stats: &ClassStats) -> Result<Vec<f64>> {
    if labels.len() != samples.len() {
        return Err(Error::DimensionMismatch {
            expected: samples.len(),
            found: labels.len(),
        });
    }
    labels
        .iter()
        .zip(samples)
        .map(|(l, x)| Ok(x.dot(&stats.cone(*l)?.mean)))
        .collect()
}

fn per_class(labels: &[usize], cosines: &[f64], stats: &ClassStats) -> Result<Vec<ClassMetrics>> {
    if labels.len() != cosines.len() {
        return Err(Error::DimensionMismatch {
            expected: cosines.len(),
            found: labels.len(),
        });
    }
    let mut by: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (l, c) in labels.iter().zip(cosines) {
        by.entry(*l).or_default().push(*c);
    }
    let mut out = Vec::with_capacity(by.len());
    for (label, cosines) in by {
        let cone = stats.cone(label)?;
        let mut counts = vec![0usize; stats.bins()];
        let mut outside = 0;
        for &c in &cosines {
            match stats.bin_of(clamped_acos(c), cone.theta_max) {
                Some(b) => counts[b] += 1,
                None => outside += 1,
            }
        }
        let inside = cosines.len() - outside;
        if inside > 0 && cone.theta_max <= 0.0 {
            return Err(Error::DegenerateCone);
        }
        let bin_fractions: Vec<f64> = counts
            .iter()
            .map(|c| if inside == 0 { 0.0 } else { *c as f64 / inside as f64 })
            .collect();
        let hds = (inside > 0).then(|| {
            bin_fractions
                .iter()
                .zip(stats.weights())
                .map(|(p, w)| p * w)
                .sum()
        });
        let (cos_mean, cos_std) = mean_std(&cosines);
        out.push(ClassMetrics {
            label,
            n: cosines.len(),
            outside,
            hcr: outside as f64 / cosines.len() as f64,
            hds,
            bin_fractions,
            cos_mean,
            cos_std,
        });
    }
    Ok(out)
}

/// Mean over classes of the fraction of samples outside the class cone.
pub fn hcr(labels: &[usize], samples: &[UnitVector], stats: &ClassStats) -> Result<f64> {
    let rows = per_class(labels, &class_cosines(labels, samples, stats)?, stats)?;
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(rows.iter().map(|r| r.hcr).sum::<f64>() / rows.len() as f64)
}

/// Mean over classes of the weighted sub-cone occupancy of in-cone samples.
pub fn hds(labels: &[usize], samples: &[UnitVector], stats: &ClassStats) -> Result<f64> {
    hds_of(&per_class(labels, &class_cosines(labels, samples, stats)?, stats)?)
}

fn hds_of(rows: &[ClassMetrics]) -> Result<f64> {
    let vals: Vec<f64> = rows.iter().filter_map(|r| r.hds).collect();
    if vals.is_empty() {
        return Err(Error::EmptyAfterExclusion);
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// HCR, HDS and cosine summaries in one pass.
pub fn evaluate(labels: &[usize], samples: &[UnitVector], stats: &ClassStats) -> Result<MetricReport> {
    evaluate_cosines(labels, &class_cosines(labels, samples, stats)?, stats)
}

/// [`evaluate`] from precomputed cosines to each sample's class mean.
pub fn evaluate_cosines(labels: &[usize], cosines: &[f64], stats: &ClassStats) -> Result<MetricReport> {
    let rows = per_class(labels, cosines, stats)?;
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let hcr = rows.iter().map(|r| r.hcr).sum::<f64>() / rows.len() as f64;
    let hds = hds_of(&rows)?;
    let (cos_mean, cos_std) = mean_std(cosines);
    Ok(MetricReport {
        hcr,
        hds,
        cos_mean,
        cos_std,
        n: cosines.len(),
        per_class: rows,
    })
}

/// Mean and population standard deviation of cosines to `mean_dir`.
pub fn cosine_stats(samples: &[UnitVector], mean_dir: &UnitVector) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let c: Vec<f64> = samples.iter().map(|x| x.dot(mean_dir)).collect();
    Ok(mean_std(&c))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityTest {
    pub resultant_length: f64,
    pub statistic: f64,
    pub p_value: f64,
}

/// Rayleigh test: `d N Rbar^2` is asymptotically chi-squared with `d` degrees of freedom.
pub fn uniformity_test(samples: &[UnitVector]) -> Result<UniformityTest> {
    if samples.len() < 30 {
        return Err(Error::InvalidLength {
            len: samples.len(),
            reason: "Rayleigh test needs at least 30 samples",
        });
    }
    let d = samples[0].dim();
    let mut sum = vec![0.0; d];
    for x in samples {
        x.check_dim(d)?;
        sum.iter_mut().zip(x.as_slice()).for_each(|(a, b)| *a += b);
    }
    let n = samples.len() as f64;
    let rbar = norm(&sum) / n;
    let statistic = d as f64 * n * rbar * rbar;
    let chi = ChiSquared::new(d as f64).map_err(|e| Error::param("d", e.to_string()))?;
    Ok(UniformityTest {
        resultant_length: rbar,
        statistic,
        p_value: chi.sf(statistic),
    })
}

/// Wasserstein-1 distance between two empirical distributions on the line.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = a[0].min(b[0]);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let next = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.min(*y),
            (Some(x), None) => *x,
            (None, Some(y)) => *y,
            (None, None) => unreachable!(),
        };
        total += (next - prev) * (i as f64 / na - j as f64 / nb).abs();
        prev = next;
        while i < a.len() && a[i] <= next {
            i += 1;
        }
        while j < b.len() && b[j] <= next {
            j += 1;
        }
    }
    Ok(total)
}
