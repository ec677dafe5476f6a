//! End-to-end runs: data, class statistics, score, vMF and Gaussian sampling, metrics.

use std::collections::BTreeMap;

use vmfdiff::baseline::GaussianVpBaseline;
use vmfdiff::bounds::{coverage_lower_bound, min_kappa_for_coverage};
use vmfdiff::metrics::{class_cosines, evaluate_cosines, fit_class_stats, ClassStats, MetricReport};
use vmfdiff::reverse::{
    adaptive_for_cone, sample_class, sample_hypercone_constrained, KappaPolicy, ReverseConfig, ReverseVariant,
};
use vmfdiff::schedule::make_schedule;
use vmfdiff::score::{train_score, AnalyticScore, MlpConfig, MlpScoreNet, ScoreModel, TrainConfig, TrainReport};
use vmfdiff::sphere::{clamped_acos, norm};
use vmfdiff::vmf::kappa_from_resultant;
use vmfdiff::{UnitVector, VmfParams};

use crate::chains::{chain_rng, run_chains, Purpose};
use crate::config::{DataSource, EtaPolicy, ExperimentConfig, KappaSetting, SamplerVariant, ScoreKind};
use crate::data::{generate_synthetic, ingest_csv, place_means, EmbeddingDataset};
use crate::error::{CliError, Result, Stage};
use crate::report::{Artifacts, BoundRow, Histogram, Metrics, Report, SampleRow, SCHEMA_VERSION};

/// Loaded data with everything fitted from it.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: EmbeddingDataset,
    pub class_names: Vec<String>,
    pub labels: Vec<usize>,
    pub stats: ClassStats,
    /// Per-class vMF fit: mean direction and concentration from the resultant length.
    pub fitted: Vec<VmfParams>,
    /// Generating means, for synthetic data only.
    pub true_means: Option<Vec<UnitVector>>,
}

/// Labeled draws of one sampler, class-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub labels: Vec<usize>,
    pub points: Vec<UnitVector>,
}

/// Loads or generates the dataset and fits class cones and vMF parameters.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let (dataset, true_means) = match cfg.data.source {
        DataSource::Synthetic => {
            let mut mrng = chain_rng(cfg.data.mean_seed.unwrap_or(cfg.seed), Purpose::Means, 0, 0);
            let means = place_means(cfg.data.classes, cfg.data.dim, cfg.data.margin, &mut mrng)?;
            let mut drng = chain_rng(cfg.seed, Purpose::Data, 0, 0);
            (generate_synthetic(&cfg.data, &means, &mut drng)?, Some(means))
        }
        DataSource::Csv => {
            let path = cfg.data.path.as_ref().expect("validated config has a path");
            (ingest_csv(path, cfg.data.normalize)?, None)
        }
    };
    let (class_names, labels) = dataset.label_indices();
    let stats = fit_class_stats(&labels, &dataset.vectors, cfg.metrics.percentile, cfg.metrics.bins)
        .stage("class statistics")?;
    let d = dataset.dim();
    let mut sums = vec![vec![0.0; d]; class_names.len()];
    let mut counts = vec![0usize; class_names.len()];
    for (y, x) in labels.iter().zip(&dataset.vectors) {
        sums[*y].iter_mut().zip(x.as_slice()).for_each(|(s, v)| *s += v);
        counts[*y] += 1;
    }
    let fitted = sums
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(y, (s, n))| {
            let rbar = (norm(s) / *n as f64).min(1.0 - 1e-12);
            let kappa = kappa_from_resultant(d, rbar)?;
            VmfParams::new(stats.cone(y)?.mean.clone(), kappa)
        })
        .collect::<vmfdiff::Result<Vec<_>>>()
        .stage("class fit")?;
    Ok(Prepared {
        dataset,
        class_names,
        labels,
        stats,
        fitted,
        true_means,
    })
}

/// The configured score model, plus the training curve when a network was trained.
pub fn build_score(cfg: &ExperimentConfig, prep: &Prepared) -> Result<(Box<dyn ScoreModel>, Option<TrainReport>)> {
    match cfg.score.kind {
        ScoreKind::Analytic => Ok((Box::new(AnalyticScore::ClassConditional(prep.fitted.clone())), None)),
        ScoreKind::Mlp => {
            let (net, rep) = train_network(cfg, prep)?;
            Ok((Box::new(net), Some(rep)))
        }
    }
}

pub fn train_network(cfg: &ExperimentConfig, prep: &Prepared) -> Result<(MlpScoreNet, TrainReport)> {
    let mut rng = chain_rng(cfg.seed, Purpose::Train, 0, 0);
    let schedule = make_schedule(cfg.schedule_steps, cfg.schedule_shape).stage("schedule")?;
    let mut net_cfg = MlpConfig::new(prep.dataset.dim(), cfg.schedule_steps, prep.class_names.len());
    net_cfg.hidden = cfg.score.hidden.clone();
    let mut net = MlpScoreNet::new(net_cfg, cfg.seed, &mut rng).stage("network init")?;
    let tc = TrainConfig {
        epochs: cfg.score.epochs,
        batch_size: cfg.score.batch_size,
        learning_rate: cfg.score.learning_rate,
        momentum: cfg.score.momentum,
        loss: cfg.score.loss,
        forward_mode: cfg.score.forward_mode,
    };
    let rep = train_score(&mut net, &prep.labels, &prep.dataset.vectors, &schedule, &tc, &mut rng)
        .stage("training")?;
    Ok((net, rep))
}

/// Reverse-sampler settings for the configured schedule and step sizes.
pub fn reverse_config(cfg: &ExperimentConfig, kappa: KappaSetting) -> Result<ReverseConfig> {
    let schedule = make_schedule(cfg.schedule_steps, cfg.schedule_shape).stage("schedule")?;
    let rc = match cfg.sampler.eta_policy {
        EtaPolicy::Constant => ReverseConfig::constant_eta(schedule, cfg.sampler.eta),
        EtaPolicy::Decaying => ReverseConfig::decaying_eta(schedule, cfg.sampler.eta),
    }
    .stage("schedule")?;
    let policy = match kappa {
        KappaSetting::Scheduled => KappaPolicy::Scheduled,
        KappaSetting::Constant(c) => KappaPolicy::Constant(c),
    };
    rc.with_kappa(policy).stage("schedule")
}

/// `samples_per_class` reverse-process draws per class with the given concentration policy.
pub fn sample_vmf_pipeline(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    score: &dyn ScoreModel,
    kappa: KappaSetting,
) -> Result<Draws> {
    let base = reverse_config(cfg, kappa)?;
    let k = prep.class_names.len();
    let per_class: Vec<ReverseConfig> = (0..k)
        .map(|y| {
            let cone = prep.stats.cone(y).stage("sampling")?;
            if cfg.sampler.variant == SamplerVariant::Constrained && cfg.adaptive.enabled {
                let a = adaptive_for_cone(cone.theta_max, cfg.adaptive.epsilon, cfg.adaptive.beta)
                    .stage("adaptive concentration")?;
                Ok(base.clone().with_adaptive(Some(a)))
            } else {
                Ok(base.clone())
            }
        })
        .collect::<Result<_>>()?;
    let n = cfg.sampler.samples_per_class;
    let points = run_chains(k, n, |y, i| {
        let mut rng = chain_rng(cfg.seed, Purpose::Vmf, y, i);
        let rc = &per_class[y];
        match cfg.sampler.variant {
            SamplerVariant::Drift => sample_class(y, rc, ReverseVariant::Drift, score, &mut rng),
            SamplerVariant::Angular => sample_class(y, rc, ReverseVariant::Angular, score, &mut rng),
            SamplerVariant::Constrained => prep
                .stats
                .cone(y)
                .and_then(|cone| sample_hypercone_constrained(y, rc, cone, score, &mut rng)),
        }
        .stage("vmf sampling")
    })?;
    Ok(Draws {
        labels: (0..k).flat_map(|y| std::iter::repeat_n(y, n)).collect(),
        points,
    })
}

/// Draws from the exact-score Gaussian VP baseline fitted to the data.
pub fn sample_gaussian_baseline(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Draws> {
    let b = &cfg.baseline;
    let model = GaussianVpBaseline::fit(&prep.labels, &prep.dataset.vectors, b.steps, b.beta_min, b.beta_max)
        .stage("baseline fit")?;
    let (k, n) = (prep.class_names.len(), cfg.sampler.samples_per_class);
    let points = run_chains(k, n, |y, i| {
        model
            .sample(y, &mut chain_rng(cfg.seed, Purpose::Gaussian, y, i))
            .stage("gaussian sampling")
    })?;
    Ok(Draws {
        labels: (0..k).flat_map(|y| std::iter::repeat_n(y, n)).collect(),
        points,
    })
}

pub fn evaluate_draws(prep: &Prepared, draws: &Draws) -> Result<(MetricReport, Vec<f64>)> {
    let cos = class_cosines(&draws.labels, &draws.points, &prep.stats).stage("metrics")?;
    let rep = evaluate_cosines(&draws.labels, &cos, &prep.stats).stage("metrics")?;
    Ok((rep, cos))
}

fn rows_and_histograms(
    method: &str,
    prep: &Prepared,
    labels: &[usize],
    cosines: &[f64],
    bins: usize,
) -> Result<(Vec<SampleRow>, Vec<Histogram>)> {
    let mut rows = Vec::with_capacity(labels.len());
    let mut by_class: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (y, c) in labels.iter().zip(cosines) {
        let angle = clamped_acos(*c);
        let theta = prep.stats.cone(*y).stage("metrics")?.theta_max;
        rows.push(SampleRow {
            method: method.into(),
            label: prep.class_names[*y].clone(),
            angle,
            cosine: *c,
            in_cone: angle <= theta,
        });
        by_class.entry(*y).or_default().push(angle);
    }
    let hists = by_class
        .into_iter()
        .map(|(y, a)| Histogram::of_angles(method, &prep.class_names[y], a, bins))
        .collect();
    Ok((rows, hists))
}

fn coverage(labels: &[usize], cosines: &[f64], prep: &Prepared, y: usize) -> f64 {
    let theta = prep.stats.classes[&y].theta_max;
    let (mut inside, mut n) = (0usize, 0usize);
    for (l, c) in labels.iter().zip(cosines) {
        if *l == y {
            n += 1;
            inside += usize::from(clamped_acos(*c) <= theta);
        }
    }
    inside as f64 / n.max(1) as f64
}

/// Result of [`run_experiment`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub artifacts: Artifacts,
    pub train: Option<TrainReport>,
}

/// The full pipeline: data, class statistics, score, vMF sampling, optional
/// Gaussian baseline and metrics for both.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let prep = prepare(cfg)?;
    let (score, train) = build_score(cfg, &prep)?;
    let vmf = sample_vmf_pipeline(cfg, &prep, score.as_ref(), cfg.sampler.kappa)?;
    let (vmf_report, vmf_cos) = evaluate_draws(&prep, &vmf)?;
    let bins = cfg.metrics.histogram_bins;

    let data_cos = class_cosines(&prep.labels, &prep.dataset.vectors, &prep.stats).stage("metrics")?;
    let (_, mut histograms) = rows_and_histograms("data", &prep, &prep.labels, &data_cos, bins)?;
    let (mut samples, h) = rows_and_histograms("vmf", &prep, &vmf.labels, &vmf_cos, bins)?;
    histograms.extend(h);

    let gaussian = if cfg.baseline.enabled {
        let g = sample_gaussian_baseline(cfg, &prep)?;
        let (rep, cos) = evaluate_draws(&prep, &g)?;
        let (rows, h) = rows_and_histograms("gaussian", &prep, &g.labels, &cos, bins)?;
        samples.extend(rows);
        histograms.extend(h);
        Some(rep)
    } else {
        None
    };

    let bounds = (0..prep.class_names.len())
        .map(|y| {
            let theta = prep.stats.classes[&y].theta_max;
            let kappa = prep.fitted[y].kappa();
            Ok(BoundRow {
                label: y,
                class: prep.class_names[y].clone(),
                theta_max: theta,
                kappa,
                coverage_bound: coverage_lower_bound(kappa, theta),
                min_kappa: min_kappa_for_coverage(theta, cfg.adaptive.epsilon).unwrap_or(f64::INFINITY),
                epsilon: cfg.adaptive.epsilon,
                data_coverage: coverage(&prep.labels, &data_cos, &prep, y),
                vmf_coverage: Some(coverage(&vmf.labels, &vmf_cos, &prep, y)),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let report = Report {
        version: SCHEMA_VERSION,
        config_echo: cfg.to_pairs(),
        metrics: Metrics {
            vmf: Some(vmf_report),
            gaussian,
        },
        bounds,
    };
    Ok(RunOutcome {
        artifacts: Artifacts {
            report,
            samples,
            histograms,
        },
        train,
    })
}

/// One setting of the concentration ablation.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AblationRow {
    pub setting: String,
    pub kappa: Option<f64>,
    pub hcr: f64,
    pub hds: f64,
    pub cos_mean: f64,
    pub cos_std: f64,
}

/// Scheduled concentration against each constant in `constants`, sharing data,
/// score and random streams across settings.
pub fn ablate_schedule(cfg: &ExperimentConfig, constants: &[f64]) -> Result<Vec<AblationRow>> {
    if constants.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(CliError::config(None, "ablation constants must be finite and >= 0"));
    }
    let prep = prepare(cfg)?;
    let (score, _) = build_score(cfg, &prep)?;
    let settings = std::iter::once(KappaSetting::Scheduled).chain(constants.iter().map(|c| KappaSetting::Constant(*c)));
    settings
        .map(|s| {
            let draws = sample_vmf_pipeline(cfg, &prep, score.as_ref(), s)?;
            let (m, _) = evaluate_draws(&prep, &draws)?;
            let (setting, kappa) = match s {
                KappaSetting::Scheduled => ("scheduled".to_string(), None),
                KappaSetting::Constant(c) => (format!("constant {c}"), Some(c)),
            };
            Ok(AblationRow {
                setting,
                kappa,
                hcr: m.hcr,
                hds: m.hds,
                cos_mean: m.cos_mean,
                cos_std: m.cos_std,
            })
        })
        .collect()
}
