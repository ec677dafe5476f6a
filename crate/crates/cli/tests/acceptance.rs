//! Acceptance checks: one PASS/FAIL line per criterion.
//!
//! Exits 0 regardless of outcome unless `ACCEPTANCE_STRICT=1` is set, so the
//! report is always printed in full by `cargo test`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vmfdiff::forward::{
    brownian_forward_step, dual_forward_step, forward_step_angular, forward_step_vmf, forward_trajectory, DualState,
    ForwardMode,
};
use vmfdiff::metrics::{wasserstein_1d, ClassCone};
use vmfdiff::reverse::{
    elbo_diagnostics, reverse_kernels, sample_class, sample_hypercone_constrained, sample_sde, ReverseConfig,
    ReverseVariant, DEFAULT_ETA,
};
use vmfdiff::schedule::{make_schedule, ScheduleShape, THETA_CEILING};
use vmfdiff::score::{
    gradient_check, held_out_cosine, train_score, AnalyticScore, GradSample, LossKind, MlpConfig, MlpScoreNet,
    TrainConfig,
};
use vmfdiff::sphere::{clamped_acos, uniform_sphere_sample};
use vmfdiff::vmf::{bessel_ratio, cap_probability_s2, log_density, sample_vmf, vmf_kl};
use vmfdiff::{Hypercone, UnitVector, VmfParams};
use vmfdiff_cli::chains::{chain_rng, run_chains, Purpose};
use vmfdiff_cli::data::place_means;
use vmfdiff_cli::diagnostics::{coverage_grid, forward_diagnostics, separation_grid};
use vmfdiff_cli::experiment::{ablate_schedule, run_experiment};
use vmfdiff_cli::ExperimentConfig;

type Check = Result<Verdict, String>;
type Criterion = (&'static str, fn() -> Check);

struct Verdict {
    pass: bool,
    lines: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self {
            pass: true,
            lines: Vec::new(),
        }
    }

    /// Records a sub-check; the criterion passes only if every sub-check does.
    fn check(&mut self, ok: bool, line: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {line}", if ok { "ok " } else { "BAD" }));
    }

    fn note(&mut self, line: String) {
        self.lines.push(format!("    {line}"));
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Independent closed forms on the 2-sphere.

/// `P(cos <= c)` for vMF on S^2.
fn cosine_cdf_s2(kappa: f64, c: f64) -> f64 {
    ((kappa * (c - 1.0)).exp() - (-2.0 * kappa).exp()) / -(-2.0 * kappa).exp_m1()
}

/// `P(angle <= theta)` for vMF on S^2.
fn cap_s2(kappa: f64, theta: f64) -> f64 {
    -(-kappa * (1.0 - theta.cos())).exp_m1() / -(-2.0 * kappa).exp_m1()
}

fn log_density_s2(x: &UnitVector, mu: &UnitVector, kappa: f64) -> f64 {
    let log_c = kappa.ln() - (2.0 * PI).ln() - kappa - (-(-2.0 * kappa).exp()).ln_1p();
    log_c + kappa * x.dot(mu)
}

fn mean_resultant_s2(kappa: f64) -> f64 {
    1.0 / kappa.tanh() - 1.0 / kappa
}

/// `E[cos]` under vMF on S^{d-1} by Simpson quadrature of the cosine marginal.
fn mean_cosine_quadrature(d: usize, kappa: f64) -> f64 {
    let n = 200_000;
    let h = 2.0 / n as f64;
    let e = (d as f64 - 3.0) / 2.0;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..=n {
        let t = -1.0 + h * i as f64;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let base = (1.0 - t * t).max(0.0);
        let f = (kappa * (t - 1.0)).exp() * if e == 0.0 { 1.0 } else { base.powf(e) };
        num += w * t * f;
        den += w * f;
    }
    num / den
}

fn resultant(points: &[UnitVector]) -> f64 {
    let d = points[0].dim();
    let mut sum = vec![0.0; d];
    for p in points {
        sum.iter_mut().zip(p.as_slice()).for_each(|(s, v)| *s += v);
    }
    sum.iter().map(|v| v * v).sum::<f64>().sqrt() / points.len() as f64
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

fn sampler_exactness() -> Check {
    let mut v = Verdict::new();
    let n = 200_000;
    let mu = UnitVector::basis(3, 0).map_err(err)?;
    for (i, kappa) in [1.0, 5.0, 20.0].into_iter().enumerate() {
        let start = Instant::now();
        let p = VmfParams::new(mu.clone(), kappa).map_err(err)?;
        let draws = sample_vmf(&mut rng(100 + i as u64), &p, n).map_err(err)?;
        let mut cos: Vec<f64> = draws.iter().map(|x| x.dot(&mu)).collect();
        cos.sort_by(f64::total_cmp);
        let mut sup: f64 = 0.0;
        let mut oracle_gap: f64 = 0.0;
        for (j, c) in cos.iter().enumerate() {
            let f = 1.0 - cap_probability_s2(kappa, clamped_acos(*c));
            oracle_gap = oracle_gap.max((f - cosine_cdf_s2(kappa, *c)).abs());
            sup = sup.max(f - j as f64 / n as f64).max((j + 1) as f64 / n as f64 - f);
        }
        let secs = start.elapsed().as_secs_f64();
        v.check(
            sup <= 0.005 && secs <= 10.0 && oracle_gap < 1e-9,
            format!("kappa {kappa:>4}: sup CDF deviation {sup:.5} (<= 0.005), {secs:.2} s (<= 10), closed-form gap {oracle_gap:.1e}"),
        );
    }
    Ok(v)
}

fn moment_identity() -> Check {
    let mut v = Verdict::new();
    let n = 100_000;
    let mut seed = 200;
    for d in [3, 8, 64] {
        for kappa in [0.5, 5.0, 50.0] {
            seed += 1;
            let p = VmfParams::new(UnitVector::basis(d, 0).map_err(err)?, kappa).map_err(err)?;
            let draws = sample_vmf(&mut rng(seed), &p, n).map_err(err)?;
            let rbar = resultant(&draws);
            let a = mean_cosine_quadrature(d, kappa);
            let lib = bessel_ratio(d, kappa);
            v.check(
                (rbar - a).abs() <= 0.01 && (lib - a).abs() < 1e-6,
                format!("d {d:>2} kappa {kappa:>4}: |mean| {rbar:.5}, A_d {a:.5} (library {lib:.5})"),
            );
        }
    }
    Ok(v)
}

fn coverage_bound() -> Check {
    let mut v = Verdict::new();
    let cells = coverage_grid(300, 100_000).map_err(err)?;
    for c in &cells {
        let mut line = format!(
            "d {:>2} kappa {:>4} theta {:.4}: empirical {:.5} +- {:.5}, bound {:.5}",
            c.d, c.kappa, c.theta, c.empirical, c.std_error, c.bound
        );
        let mut ok = c.passes();
        if c.d == 3 {
            let exact = c.exact.ok_or("missing closed form on S^2")?;
            let oracle = cap_s2(c.kappa, c.theta);
            ok &= (exact - oracle).abs() <= 1e-12;
            ok &= (c.empirical - exact).abs() <= 4.0 * c.std_error.max(1.0 / c.n as f64);
            line.push_str(&format!(", exact {exact:.5} (oracle gap {:.1e})", (exact - oracle).abs()));
        }
        v.check(ok, line);
    }
    Ok(v)
}

fn forward_uniformity() -> Check {
    let mut v = Verdict::new();
    let s = forward_diagnostics(400, 8, 100, ScheduleShape::Linear, ForwardMode::Angular, 10_000).map_err(err)?;
    let t = s.terminal;
    v.check(
        t.resultant_length <= 0.03,
        format!("terminal resultant length {:.5} (<= 0.03)", t.resultant_length),
    );
    v.check(
        t.p_value >= 0.01,
        format!("Rayleigh statistic {:.3}, p = {:.4} (not rejected at 0.01)", t.statistic, t.p_value),
    );
    Ok(v)
}

fn step_angles(theta: f64, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>), String> {
    let z = UnitVector::basis(3, 0).map_err(err)?;
    let kappa = 1.0 / theta.tan();
    let mut r = rng(seed);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        a.push(clamped_acos(forward_step_angular(&z, theta, &mut r).map_err(err)?.dot(&z)));
        b.push(clamped_acos(forward_step_vmf(&z, kappa, &mut r).map_err(err)?.dot(&z)));
    }
    Ok((a, b))
}

fn interpolation_equivalence() -> Check {
    let mut v = Verdict::new();
    let n = 100_000;
    for (i, theta) in [PI / 8.0, PI / 4.0, 3.0 * PI / 8.0].into_iter().enumerate() {
        let (a, b) = step_angles(theta, n, 500 + i as u64)?;
        let w = wasserstein_1d(&a, &b).map_err(err)?;
        v.check(w <= 0.05, format!("theta {theta:.4}: W1 {w:.4} rad (<= 0.05)"));
    }
    let (a, b) = step_angles(1e-10, n, 510)?;
    let w = wasserstein_1d(&a, &b).map_err(err)?;
    v.check(w <= 1e-3, format!("theta -> 0: W1 {w:.2e} rad, both steps stay put"));
    let (a, b) = step_angles(THETA_CEILING, n, 511)?;
    let w = wasserstein_1d(&a, &b).map_err(err)?;
    let uniform: Vec<f64> = (0..n).map(|i| (1.0 - 2.0 * (i as f64 + 0.5) / n as f64).acos()).collect();
    let wa = wasserstein_1d(&a, &uniform).map_err(err)?;
    v.check(
        w <= 0.01 && wa <= 0.01,
        format!("theta -> pi/2: W1 {w:.4} rad between steps, {wa:.4} to the uniform law"),
    );
    Ok(v)
}

fn cone_convergence() -> Check {
    let mut v = Verdict::new();
    let start = Instant::now();
    let (classes, d, per_class, half_angle) = (4, 16, 2500, PI / 6.0);
    let means = place_means(classes, d, PI / 3.0, &mut rng(600)).map_err(err)?;
    let mut closest = PI;
    for i in 0..classes {
        for j in 0..i {
            closest = closest.min(clamped_acos(means[i].dot(&means[j])));
        }
    }
    let params = means
        .iter()
        .map(|m| VmfParams::new(m.clone(), 20.0))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let score = AnalyticScore::ClassConditional(params);
    let cfg = ReverseConfig::constant_eta(make_schedule(100, ScheduleShape::Cosine).map_err(err)?, DEFAULT_ETA)
        .map_err(err)?;
    let inside = run_chains(classes, per_class, |y, i| {
        let x = sample_class(y, &cfg, ReverseVariant::Drift, &score, &mut chain_rng(601, Purpose::Vmf, y, i))
            .map_err(|e| vmfdiff_cli::CliError::Data(e.to_string()))?;
        Ok(clamped_acos(x.dot(&means[y])) <= half_angle)
    })
    .map_err(err)?;
    let frac = inside.iter().filter(|b| **b).count() as f64 / inside.len() as f64;
    v.note(format!("closest pair of means {:.4} rad (>= pi/3)", closest));
    v.check(
        frac >= 0.95,
        format!("{:.2}% of {} class-conditional samples inside their pi/6 cone (>= 95%)", 100.0 * frac, inside.len()),
    );
    let constrained = run_chains(classes, per_class, |y, i| {
        let cone = ClassCone {
            mean: means[y].clone(),
            theta_max: half_angle,
        };
        let x = sample_hypercone_constrained(y, &cfg, &cone, &score, &mut chain_rng(602, Purpose::Vmf, y, i))
            .map_err(|e| vmfdiff_cli::CliError::Data(e.to_string()))?;
        Ok(clamped_acos(x.dot(&means[y])) <= half_angle + 1e-12)
    })
    .map_err(err)?;
    let all = constrained.iter().all(|b| *b);
    v.check(all, format!("constrained sampler: all {} samples inside the cone", constrained.len()));
    let secs = start.elapsed().as_secs_f64();
    v.check(secs <= 60.0, format!("runtime {secs:.1} s (<= 60)"));
    Ok(v)
}

fn benchmark_ordering() -> Check {
    let mut v = Verdict::new();
    let (mut dh, mut dd) = (Vec::new(), Vec::new());
    let (mut vm, mut gm, mut vs, mut gs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for seed in 1..=10 {
        let out = run_experiment(&ExperimentConfig::with_seed(seed)).map_err(err)?;
        let m = &out.artifacts.report.metrics;
        let (vmf, gauss) = (m.vmf.as_ref().ok_or("no vmf metrics")?, m.gaussian.as_ref().ok_or("no baseline")?);
        dh.push(gauss.hcr - vmf.hcr);
        dd.push(gauss.hds - vmf.hds);
        vm.push(vmf.cos_mean);
        gm.push(gauss.cos_mean);
        vs.push(vmf.cos_std);
        gs.push(gauss.cos_std);
        v.note(format!(
            "seed {seed:>2}: vmf HCR {:.4} HDS {:.4} cos {:.4}+-{:.4} | gaussian HCR {:.4} HDS {:.4} cos {:.4}+-{:.4}",
            vmf.hcr, vmf.hds, vmf.cos_mean, vmf.cos_std, gauss.hcr, gauss.hds, gauss.cos_mean, gauss.cos_std
        ));
    }
    let k = (dh.len() as f64).sqrt();
    for (name, diffs) in [("HCR", &dh), ("HDS", &dd)] {
        let (m, sd) = mean_sd(diffs);
        let se = sd / k;
        v.check(
            m > 0.0 && m >= 3.0 * se,
            format!("{name}: gaussian - vmf = {m:.4} +- {se:.4} (need > 0 and >= 3 se)"),
        );
    }
    let (vmm, gmm) = (mean_sd(&vm).0, mean_sd(&gm).0);
    let (vsm, gsm) = (mean_sd(&vs).0, mean_sd(&gs).0);
    v.check(vmm < gmm, format!("mean cosine vmf {vmm:.4} < gaussian {gmm:.4}"));
    v.check(vsm > gsm, format!("cosine std vmf {vsm:.4} > gaussian {gsm:.4}"));
    Ok(v)
}

fn grad_samples(r: &mut ChaCha8Rng, cfg: &MlpConfig, n: usize) -> Result<Vec<GradSample>, String> {
    (0..n)
        .map(|_| {
            Ok(GradSample {
                z: uniform_sphere_sample(r, cfg.dim).map_err(err)?.into_inner(),
                t: r.random_range(1..=cfg.steps),
                y: r.random_range(0..cfg.classes),
                target: (0..cfg.dim).map(|_| r.random_range(-2.0..2.0)).collect(),
            })
        })
        .collect()
}

fn score_network() -> Check {
    let mut v = Verdict::new();
    let mut r = rng(800);
    let mut cfg = MlpConfig::new(6, 20, 3);
    cfg.hidden = vec![16, 16];
    let net = MlpScoreNet::new(cfg.clone(), 801, &mut r).map_err(err)?;
    let batch = grad_samples(&mut r, &cfg, 32)?;
    for kind in [LossKind::Mse, LossKind::Cosine, LossKind::Geodesic] {
        let e = gradient_check(&net, &batch, kind, 1e-5, 300, &mut r).map_err(err)?;
        v.check(e <= 1e-4, format!("gradient check {kind:?}: max relative error {e:.2e} (<= 1e-4)"));
    }

    let start = Instant::now();
    let (d, steps) = (8, 100);
    let mu = UnitVector::basis(d, 0).map_err(err)?;
    let p = VmfParams::new(mu.clone(), 10.0).map_err(err)?;
    let train = sample_vmf(&mut r, &p, 2000).map_err(err)?;
    let held = sample_vmf(&mut r, &p, 1000).map_err(err)?;
    let schedule = make_schedule(steps, ScheduleShape::Linear).map_err(err)?;
    let mut cfg = MlpConfig::new(d, steps, 1);
    cfg.hidden = vec![32, 32];
    let mut net = MlpScoreNet::new(cfg, 802, &mut r).map_err(err)?;
    let tc = TrainConfig {
        epochs: 200,
        batch_size: 128,
        learning_rate: 1e-2,
        momentum: 0.9,
        loss: LossKind::Cosine,
        forward_mode: ForwardMode::Angular,
    };
    let rep = train_score(&mut net, &vec![0; train.len()], &train, &schedule, &tc, &mut r).map_err(err)?;
    let cos = held_out_cosine(
        &net,
        std::slice::from_ref(&mu),
        &vec![0; held.len()],
        &held,
        &schedule,
        ForwardMode::Angular,
        &mut r,
    )
    .map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    v.check(
        cos >= 0.9 && rep.loss_curve.len() == 200 && secs <= 300.0,
        format!("held-out cosine to the analytic score {cos:.4} (>= 0.9) after 200 epochs in {secs:.1} s (<= 300)"),
    );
    Ok(v)
}

fn kl_diagnostics() -> Check {
    let mut v = Verdict::new();
    let mut r = rng(900);
    let n = 1_000_000;
    let mut pairs = vec![(
        VmfParams::new(UnitVector::basis(3, 0).map_err(err)?, 5.0).map_err(err)?,
        VmfParams::new(UnitVector::basis(3, 1).map_err(err)?, 2.0).map_err(err)?,
    )];
    while pairs.len() < 21 {
        let mut draw = || -> Result<VmfParams, String> {
            let mu = uniform_sphere_sample(&mut r, 3).map_err(err)?;
            VmfParams::new(mu, r.random_range(1.0..20.0)).map_err(err)
        };
        pairs.push((draw()?, draw()?));
    }
    let (mut worst, mut min_kl, mut self_kl): (f64, f64, f64) = (0.0, f64::INFINITY, 0.0);
    for (i, (p, q)) in pairs.iter().enumerate() {
        let kl = vmf_kl(p, q).map_err(err)?;
        let draws = sample_vmf(&mut rng(901 + i as u64), p, n).map_err(err)?;
        let mc = draws
            .iter()
            .map(|x| log_density_s2(x, p.mu(), p.kappa()) - log_density_s2(x, q.mu(), q.kappa()))
            .sum::<f64>()
            / n as f64;
        let rel = (kl - mc).abs() / mc.abs();
        worst = worst.max(rel);
        min_kl = min_kl.min(kl);
        self_kl = self_kl.max(vmf_kl(p, p).map_err(err)?.abs());
        let lib_gap = draws
            .iter()
            .take(100)
            .map(|x| (log_density(x, p).unwrap() - log_density_s2(x, p.mu(), p.kappa())).abs())
            .fold(0.0, f64::max);
        v.check(
            rel <= 0.01 && lib_gap < 1e-10,
            format!(
                "pair {i:>2}: kappa {:.2} -> {:.2}, closed {kl:.5}, Monte Carlo {mc:.5}, relative gap {:.3}%",
                p.kappa(),
                q.kappa(),
                100.0 * rel
            ),
        );
    }
    v.check(min_kl >= 0.0, format!("smallest KL over the pairs {min_kl:.5} (>= 0)"));
    v.check(self_kl <= 1e-10, format!("largest |KL(p, p)| {self_kl:.1e} (<= 1e-10)"));

    let schedule = make_schedule(50, ScheduleShape::Linear).map_err(err)?;
    let cfg = ReverseConfig::constant_eta(schedule.clone(), DEFAULT_ETA).map_err(err)?;
    let p = VmfParams::new(UnitVector::basis(3, 2).map_err(err)?, 10.0).map_err(err)?;
    let score = AnalyticScore::single(p.clone());
    let mut terms = 0usize;
    let mut lowest = f64::INFINITY;
    for x in sample_vmf(&mut r, &p, 20).map_err(err)? {
        let tr = forward_trajectory(&x, &schedule, ForwardMode::Vmf, &mut r).map_err(err)?;
        let kernels = reverse_kernels(&tr, 0, &cfg, &score).map_err(err)?;
        let cone = Hypercone::new(p.mu().clone(), FRAC_PI_2).map_err(err)?;
        let rep = elbo_diagnostics(&tr, &schedule, &kernels, &cone, 2000, &mut r).map_err(err)?;
        terms += rep.kl.len();
        lowest = rep.kl.iter().copied().fold(lowest, f64::min);
    }
    v.check(lowest >= 0.0, format!("{terms} ELBO KL terms, smallest {lowest:.3e} (>= 0)"));
    Ok(v)
}

fn dual_process() -> Check {
    let mut v = Verdict::new();
    let (chains, horizon, sigma, alpha0) = (10_000, 50, 0.1, 5.0);
    let schedule = make_schedule(100, ScheduleShape::Linear).map_err(err)?;
    let d0 = UnitVector::basis(3, 0).map_err(err)?;
    let kappas = (1..=horizon).map(|t| schedule.kappa_at(t)).collect::<Result<Vec<_>, _>>().map_err(err)?;
    let paths = run_chains(1, chains, |_, i| {
        let mut r = chain_rng(1000, Purpose::Check, 0, i);
        let mut s = DualState::new(alpha0, d0.clone()).map_err(|e| vmfdiff_cli::CliError::Data(e.to_string()))?;
        let mut out = Vec::with_capacity(horizon);
        for k in &kappas {
            s = dual_forward_step(&s, sigma, *k, &mut r).map_err(|e| vmfdiff_cli::CliError::Data(e.to_string()))?;
            out.push((s.alpha - alpha0, s.direction.dot(&d0)));
        }
        Ok(out)
    })
    .map_err(err)?;
    let (mut worst_var, mut worst_dir) = (0.0f64, 0.0f64);
    let mut product = 1.0;
    for t in 1..=horizon {
        let da: Vec<f64> = paths.iter().map(|p| p[t - 1].0).collect();
        let var = mean_sd(&da).1.powi(2);
        let rel = (var / (t as f64 * sigma * sigma) - 1.0).abs();
        product *= mean_resultant_s2(kappas[t - 1]);
        let dir = paths.iter().map(|p| p[t - 1].1).sum::<f64>() / chains as f64;
        worst_var = worst_var.max(rel);
        worst_dir = worst_dir.max((dir - product).abs());
        if t == 1 || t % 10 == 0 {
            v.note(format!("t {t:>2}: Var {var:.5} vs {:.5}, E[d_t.d_0] {dir:.4} vs {product:.4}", t as f64 * sigma * sigma));
        }
    }
    v.check(worst_var <= 0.05, format!("magnitude variance within {:.2}% of t sigma^2 (<= 5%)", 100.0 * worst_var));
    v.check(
        worst_dir <= 0.02,
        format!("direction correlation within {worst_dir:.4} of the Bessel-ratio product (<= 0.02)"),
    );
    Ok(v)
}

fn sde_correspondence() -> Check {
    let mut v = Verdict::new();
    let (d, sigma, chains) = (3, 1.0, 10_000);
    let z0 = UnitVector::basis(d, 0).map_err(err)?;
    for (i, kappa) in [2.0, 50.0].into_iter().enumerate() {
        let a = mean_resultant_s2(kappa);
        let horizon = -a.ln() / ((d as f64 - 1.0) * sigma * sigma);
        let steps = 200;
        let dt = horizon / steps as f64;
        let ends = run_chains(1, chains, |_, c| {
            let mut r = chain_rng(1100 + i as u64, Purpose::Check, 0, c);
            let mut z = z0.clone();
            for _ in 0..steps {
                z = brownian_forward_step(&z, sigma, dt, &mut r).map_err(|e| vmfdiff_cli::CliError::Data(e.to_string()))?;
            }
            Ok(z)
        })
        .map_err(err)?;
        let rb = resultant(&ends);
        let p = VmfParams::new(z0.clone(), kappa).map_err(err)?;
        let rv = resultant(&sample_vmf(&mut rng(1110 + i as u64), &p, chains).map_err(err)?);
        let rel = (rb - rv).abs() / rv;
        v.check(
            rel <= 0.05,
            format!("kappa {kappa}: Brownian resultant {rb:.4} after {steps} steps, vMF {rv:.4}, gap {:.2}% (<= 5%)", 100.0 * rel),
        );
    }

    let p = VmfParams::new(z0.clone(), 10.0).map_err(err)?;
    let score = AnalyticScore::single(p);
    let mut stats = Vec::new();
    for (j, (steps, dt)) in [(500, 0.01), (1000, 0.005)].into_iter().enumerate() {
        let cos = run_chains(1, chains, |_, c| {
            let mut r = chain_rng(1120 + j as u64, Purpose::Check, 0, c);
            sample_sde(0, steps, sigma, dt, &score, &mut r)
                .map(|z| z.dot(&z0))
                .map_err(|e| vmfdiff_cli::CliError::Data(e.to_string()))
        })
        .map_err(err)?;
        let (m, sd) = mean_sd(&cos);
        v.note(format!("dt {dt}: terminal mean cosine {m:.4}, std {sd:.4}"));
        stats.push((m, sd));
    }
    let dm = (stats[0].0 - stats[1].0).abs();
    let ds = (stats[0].1 - stats[1].1).abs();
    v.check(
        dm <= 0.02 && ds <= 0.02,
        format!("step halving moves the mean cosine by {dm:.4} and its std by {ds:.4} (<= 0.02)"),
    );
    Ok(v)
}

fn schedule_ablation() -> Check {
    let mut v = Verdict::new();
    let constants = [5.0, 10.0, 20.0, 30.0, 40.0, 60.0, 100.0];
    let mut rows = Vec::new();
    for seed in 1..=10 {
        rows.push(ablate_schedule(&ExperimentConfig::with_seed(seed), &constants).map_err(err)?);
    }
    let score = |j: usize| rows.iter().map(|r| r[j].hcr + r[j].hds).sum::<f64>() / rows.len() as f64;
    for (j, row) in rows[0].iter().enumerate() {
        let hcr = mean_sd(&rows.iter().map(|r| r[j].hcr).collect::<Vec<_>>()).0;
        let hds = mean_sd(&rows.iter().map(|r| r[j].hds).collect::<Vec<_>>()).0;
        v.note(format!("{:>14}: mean HCR {hcr:.4}, mean HDS {hds:.4}", row.setting));
    }
    let best = (1..=constants.len())
        .min_by(|a, b| score(*a).total_cmp(&score(*b)))
        .expect("constants");
    v.note(format!("best constant by HCR + HDS: {}", rows[0][best].setting));
    let k = (rows.len() as f64).sqrt();
    let hcr: Vec<f64> = rows.iter().map(|r| r[best].hcr - r[0].hcr).collect();
    let hds: Vec<f64> = rows.iter().map(|r| r[best].hds - r[0].hds).collect();
    for (name, diffs) in [("HCR", hcr), ("HDS", hds)] {
        let (m, sd) = mean_sd(&diffs);
        v.check(
            m > 0.0 && m >= 3.0 * sd / k,
            format!("{name}: best constant - scheduled = {m:.4} +- {:.4} (need > 0 and >= 3 se)", sd / k),
        );
    }
    Ok(v)
}

fn separation_checker() -> Check {
    let mut v = Verdict::new();
    let cells = separation_grid(1300, 100_000).map_err(err)?;
    v.check(cells.len() == 32, format!("{} grid cells evaluated", cells.len()));
    let mut worst_eval: f64 = 0.0;
    for c in &cells {
        worst_eval = worst_eval.max((c.bound - (-c.kappa * (1.0 - c.theta.cos())).exp()).abs());
        let mut line = format!(
            "d {:>2} kappa {:>4} theta {:.4}: bound {:.5}, nearer other mean {:.5} ({}), beyond theta/2 {:.5}",
            c.d,
            c.kappa,
            c.theta,
            c.bound,
            c.nearer_other,
            if c.bound_holds() { "holds" } else { "exceeded" },
            c.beyond_half_angle
        );
        if c.d == 3 {
            let exact = 1.0 - cap_s2(c.kappa, c.theta / 2.0);
            let se = (exact * (1.0 - exact) / c.n as f64).sqrt().max(1.0 / c.n as f64);
            let ok = (c.beyond_half_angle - exact).abs() <= 4.0 * se;
            line.push_str(&format!(" vs closed form {exact:.5}"));
            v.check(ok, line);
        } else {
            v.note(line);
        }
    }
    v.check(
        worst_eval <= 1e-12,
        format!("bound evaluator matches exp(-kappa (1 - cos theta)) to {worst_eval:.1e}"),
    );
    Ok(v)
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("sampler exactness on S^2", sampler_exactness),
        ("moment identity", moment_identity),
        ("coverage bound", coverage_bound),
        ("forward terminal uniformity", forward_uniformity),
        ("angular interpolation vs vMF step", interpolation_equivalence),
        ("cone convergence", cone_convergence),
        ("benchmark ordering vs Gaussian VP", benchmark_ordering),
        ("score network validity", score_network),
        ("KL and ELBO diagnostics", kl_diagnostics),
        ("dual process", dual_process),
        ("SDE correspondence", sde_correspondence),
        ("schedule ablation", schedule_ablation),
        ("separation checker", separation_checker),
    ];
    let total = Instant::now();
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = Duration::as_secs_f64(&start.elapsed());
        let (pass, lines) = match outcome {
            Ok(v) => (v.pass, v.lines),
            Err(e) => (false, vec![format!("BAD error: {e}")]),
        };
        println!("{} {:>2} {name} ({secs:.1} s)", if pass { "PASS" } else { "FAIL" }, i + 1);
        for l in lines {
            println!("       {l}");
        }
        if !pass {
            failed.push(i + 1);
        }
    }
    println!(
        "acceptance: {} passed, {} failed {:?} in {:.1} s",
        criteria.len() - failed.len(),
        failed.len(),
        failed,
        total.elapsed().as_secs_f64()
    );
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|s| s == "1") {
        std::process::exit(1);
    }
}
