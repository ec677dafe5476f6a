//! Grids for the coverage and separation bounds, and forward-process statistics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use vmfdiff::bounds::{coverage_lower_bound, separation_check, SeparationCell};
use vmfdiff::forward::{forward_trajectory, ForwardMode};
use vmfdiff::metrics::{uniformity_test, UniformityTest};
use vmfdiff::schedule::{make_schedule, ScheduleShape};
use vmfdiff::vmf::{cap_probability_s2, sample_vmf_one, CosineSampler};
use vmfdiff::UnitVector;

use crate::chains::{chain_rng, run_chains, Purpose};
use crate::error::{Result, Stage};

pub const GRID_KAPPAS: [f64; 4] = [1.0, 5.0, 10.0, 20.0];
pub const GRID_THETAS: [f64; 4] = [PI / 6.0, PI / 4.0, PI / 3.0, PI / 2.0];
pub const GRID_DIMS: [usize; 2] = [3, 16];

/// Empirical in-cone rate of vMF draws beside the coverage lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageCell {
    pub d: usize,
    pub kappa: f64,
    pub theta: f64,
    pub n: usize,
    pub bound: f64,
    pub empirical: f64,
    /// Monte-Carlo standard error of `empirical`.
    pub std_error: f64,
    /// Exact cap probability, available on the 2-sphere.
    pub exact: Option<f64>,
}

impl CoverageCell {
    /// The bound holds up to three standard errors.
    pub fn passes(&self) -> bool {
        self.empirical >= self.bound - 3.0 * self.std_error
    }
}

fn grid() -> Vec<(usize, f64, f64)> {
    let mut cells = Vec::new();
    for d in GRID_DIMS {
        for kappa in GRID_KAPPAS {
            for theta in GRID_THETAS {
                cells.push((d, kappa, theta));
            }
        }
    }
    cells
}

/// Draws `n` points per cell and counts those within `theta` of the mean.
pub fn coverage_grid(seed: u64, n: usize) -> Result<Vec<CoverageCell>> {
    let cells = grid();
    run_chains(cells.len(), 1, |i, _| {
        let (d, kappa, theta) = cells[i];
        let mut rng = chain_rng(seed, Purpose::Check, i, 0);
        let mu = UnitVector::basis(d, 0).stage("coverage grid")?;
        let sampler = CosineSampler::new(d, kappa).stage("coverage grid")?;
        let cos_theta = theta.cos();
        let mut inside = 0usize;
        for _ in 0..n {
            let x = sample_vmf_one(&mut rng, &mu, &sampler).stage("coverage grid")?;
            inside += usize::from(x.as_slice()[0] >= cos_theta);
        }
        let p = inside as f64 / n as f64;
        Ok(CoverageCell {
            d,
            kappa,
            theta,
            n,
            bound: coverage_lower_bound(kappa, theta),
            empirical: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            exact: (d == 3).then(|| cap_probability_s2(kappa, theta)),
        })
    })
}

/// Separation check on every grid cell; the bound is reported, not enforced.
pub fn separation_grid(seed: u64, n: usize) -> Result<Vec<SeparationCell>> {
    let cells = grid();
    run_chains(cells.len(), 1, |i, _| {
        let (d, kappa, theta) = cells[i];
        let mut rng = chain_rng(seed, Purpose::Check, 1000 + i, 0);
        separation_check(&mut rng, d, kappa, theta, n).stage("separation grid")
    })
}

/// Per-step statistics of forward chains from a fixed start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardStep {
    pub t: usize,
    pub theta: f64,
    pub kappa: f64,
    pub mean_cos: f64,
    /// Standard error of `mean_cos`.
    pub std_error: f64,
    pub resultant_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardSummary {
    pub steps: Vec<ForwardStep>,
    pub terminal: UniformityTest,
}

/// Runs `chains` forward trajectories from the first basis vector of R^dim.
pub fn forward_diagnostics(
    seed: u64,
    dim: usize,
    steps: usize,
    shape: ScheduleShape,
    mode: ForwardMode,
    chains: usize,
) -> Result<ForwardSummary> {
    let schedule = make_schedule(steps, shape).stage("schedule")?;
    let z0 = UnitVector::basis(dim, 0).stage("forward")?;
    let trajectories = run_chains(1, chains, |_, i| {
        let mut rng = chain_rng(seed, Purpose::Forward, 0, i);
        forward_trajectory(&z0, &schedule, mode, &mut rng).stage("forward")
    })?;
    let n = chains as f64;
    let mut out = Vec::with_capacity(steps);
    for t in 1..=steps {
        let mut sum = vec![0.0; dim];
        let (mut c1, mut c2) = (0.0, 0.0);
        for tr in &trajectories {
            let x = &tr.states[t];
            sum.iter_mut().zip(x.as_slice()).for_each(|(s, v)| *s += v);
            let c = x.as_slice()[0];
            c1 += c;
            c2 += c * c;
        }
        let m = c1 / n;
        out.push(ForwardStep {
            t,
            theta: schedule.theta_at(t).stage("forward")?,
            kappa: schedule.kappa_at(t).stage("forward")?,
            mean_cos: m,
            std_error: ((c2 / n - m * m).max(0.0) / n).sqrt(),
            resultant_length: vmfdiff::sphere::norm(&sum) / n,
        });
    }
    let terminal: Vec<UnitVector> = trajectories.into_iter().map(|t| t.states[steps].clone()).collect();
    Ok(ForwardSummary {
        steps: out,
        terminal: uniformity_test(&terminal).stage("uniformity")?,
    })
}
