//! Flat `section.key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Every key is optional except
//! `seed`; unknown or repeated keys are rejected with their line number.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Display;
use std::path::PathBuf;
use std::str::FromStr;

use vmfdiff::forward::ForwardMode;
use vmfdiff::schedule::ScheduleShape;
use vmfdiff::score::LossKind;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub source: DataSource,
    pub path: Option<PathBuf>,
    pub normalize: bool,
    pub dim: usize,
    pub classes: usize,
    /// One concentration for every class, or one per class.
    pub kappa: Vec<f64>,
    pub per_class: usize,
    pub margin: f64,
    /// Seed for mean placement; the run seed when absent.
    pub mean_seed: Option<u64>,
}

impl DataConfig {
    pub fn kappa_of(&self, class: usize) -> f64 {
        if self.kappa.len() == 1 {
            self.kappa[0]
        } else {
            self.kappa[class]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerVariant {
    Drift,
    Angular,
    Constrained,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtaPolicy {
    Constant,
    Decaying,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KappaSetting {
    Scheduled,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub variant: SamplerVariant,
    pub eta: f64,
    pub eta_policy: EtaPolicy,
    pub kappa: KappaSetting,
    pub samples_per_class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveConfig {
    pub enabled: bool,
    pub epsilon: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricConfig {
    pub percentile: f64,
    pub bins: usize,
    pub histogram_bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreKind {
    Analytic,
    Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreConfig {
    pub kind: ScoreKind,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub loss: LossKind,
    pub forward_mode: ForwardMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub enabled: bool,
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub schedule_steps: usize,
    pub schedule_shape: ScheduleShape,
    pub sampler: SamplerConfig,
    pub adaptive: AdaptiveConfig,
    pub metrics: MetricConfig,
    pub score: ScoreConfig,
    pub baseline: BaselineConfig,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// The synthetic benchmark defaults with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            data: DataConfig {
                source: DataSource::Synthetic,
                path: None,
                normalize: false,
                dim: 16,
                classes: 4,
                kappa: vec![20.0],
                per_class: 2000,
                margin: PI / 4.0,
                mean_seed: None,
            },
            schedule_steps: 100,
            schedule_shape: ScheduleShape::Linear,
            sampler: SamplerConfig {
                variant: SamplerVariant::Drift,
                eta: vmfdiff::reverse::DEFAULT_ETA,
                eta_policy: EtaPolicy::Constant,
                kappa: KappaSetting::Scheduled,
                samples_per_class: 1000,
            },
            adaptive: AdaptiveConfig {
                enabled: false,
                epsilon: 0.05,
                beta: 10.0,
            },
            metrics: MetricConfig {
                percentile: vmfdiff::metrics::DEFAULT_PERCENTILE,
                bins: vmfdiff::metrics::DEFAULT_BINS,
                histogram_bins: 36,
            },
            score: ScoreConfig {
                kind: ScoreKind::Analytic,
                hidden: vec![64, 64],
                epochs: 200,
                batch_size: 128,
                learning_rate: 1e-2,
                momentum: 0.9,
                loss: LossKind::Cosine,
                forward_mode: ForwardMode::Angular,
            },
            baseline: BaselineConfig {
                enabled: true,
                steps: vmfdiff::baseline::DEFAULT_STEPS,
                beta_min: vmfdiff::baseline::DEFAULT_BETA_MIN,
                beta_max: vmfdiff::baseline::DEFAULT_BETA_MAX,
            },
            output_dir: PathBuf::from("out"),
        }
    }

    /// Parses a config file; `seed_override` replaces (or supplies) `seed`.
    pub fn parse(text: &str, seed_override: Option<u64>) -> Result<Self> {
        let entries = parse_entries(text)?;
        let mut seed = seed_override;
        let mut cfg = Self::with_seed(0);
        for e in &entries {
            if e.key == "seed" {
                let s: u64 = e.parse()?;
                seed = Some(seed_override.unwrap_or(s));
            } else {
                cfg.apply(e)?;
            }
        }
        cfg.seed = seed.ok_or_else(|| CliError::config(None, "`seed` is required"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, e: &Entry) -> Result<()> {
        match e.key.as_str() {
            "data.source" => {
                self.data.source = match e.value.as_str() {
                    "synthetic" => DataSource::Synthetic,
                    "csv" => DataSource::Csv,
                    _ => return Err(e.invalid("expected `synthetic` or `csv`")),
                }
            }
            "data.path" => self.data.path = Some(PathBuf::from(&e.value)),
            "data.normalize" => self.data.normalize = e.parse()?,
            "data.dim" => self.data.dim = e.parse()?,
            "data.classes" => self.data.classes = e.parse()?,
            "data.kappa" => self.data.kappa = e.list()?,
            "data.per_class" => self.data.per_class = e.parse()?,
            "data.margin" => self.data.margin = e.angle()?,
            "data.mean_seed" => self.data.mean_seed = Some(e.parse()?),
            "schedule.steps" => self.schedule_steps = e.parse()?,
            "schedule.shape" => {
                self.schedule_shape = e.parse()?;
                if self.schedule_shape == ScheduleShape::Custom {
                    return Err(e.invalid("custom schedules cannot be configured by name"));
                }
            }
            "sampler.variant" => {
                self.sampler.variant = match e.value.as_str() {
                    "drift" => SamplerVariant::Drift,
                    "angular" => SamplerVariant::Angular,
                    "constrained" => SamplerVariant::Constrained,
                    _ => return Err(e.invalid("expected `drift`, `angular` or `constrained`")),
                }
            }
            "sampler.eta" => self.sampler.eta = e.parse()?,
            "sampler.eta_policy" => {
                self.sampler.eta_policy = match e.value.as_str() {
                    "constant" => EtaPolicy::Constant,
                    "decaying" => EtaPolicy::Decaying,
                    _ => return Err(e.invalid("expected `constant` or `decaying`")),
                }
            }
            "sampler.kappa" => {
                self.sampler.kappa = match e.value.as_str() {
                    "scheduled" => KappaSetting::Scheduled,
                    _ => KappaSetting::Constant(e.parse()?),
                }
            }
            "sampler.samples_per_class" => self.sampler.samples_per_class = e.parse()?,
            "adaptive.enabled" => self.adaptive.enabled = e.parse()?,
            "adaptive.epsilon" => self.adaptive.epsilon = e.parse()?,
            "adaptive.beta" => self.adaptive.beta = e.parse()?,
            "metrics.percentile" => self.metrics.percentile = e.parse()?,
            "metrics.bins" => self.metrics.bins = e.parse()?,
            "metrics.histogram_bins" => self.metrics.histogram_bins = e.parse()?,
            "score.kind" => {
                self.score.kind = match e.value.as_str() {
                    "analytic" => ScoreKind::Analytic,
                    "mlp" => ScoreKind::Mlp,
                    _ => return Err(e.invalid("expected `analytic` or `mlp`")),
                }
            }
            "score.hidden" => self.score.hidden = e.list()?,
            "score.epochs" => self.score.epochs = e.parse()?,
            "score.batch_size" => self.score.batch_size = e.parse()?,
            "score.learning_rate" => self.score.learning_rate = e.parse()?,
            "score.momentum" => self.score.momentum = e.parse()?,
            "score.loss" => self.score.loss = e.parse()?,
            "score.forward_mode" => self.score.forward_mode = e.parse()?,
            "baseline.enabled" => self.baseline.enabled = e.parse()?,
            "baseline.steps" => self.baseline.steps = e.parse()?,
            "baseline.beta_min" => self.baseline.beta_min = e.parse()?,
            "baseline.beta_max" => self.baseline.beta_max = e.parse()?,
            "output.dir" => self.output_dir = PathBuf::from(&e.value),
            _ => return Err(CliError::config(Some(e.line), format!("unknown key `{}`", e.key))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::config(None, msg));
        let d = &self.data;
        if d.source == DataSource::Csv && d.path.is_none() {
            return bad("`data.path` is required when `data.source = csv`".into());
        }
        if d.dim < 2 {
            return bad(format!("data.dim = {} (need >= 2)", d.dim));
        }
        if d.classes == 0 || d.per_class < 2 {
            return bad("need data.classes >= 1 and data.per_class >= 2".into());
        }
        if d.kappa.len() != 1 && d.kappa.len() != d.classes {
            return bad(format!(
                "data.kappa has {} values; give one or one per class ({})",
                d.kappa.len(),
                d.classes
            ));
        }
        if d.kappa.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
            return bad("data.kappa values must be finite and >= 0".into());
        }
        if !(d.margin > 0.0 && d.margin <= PI) {
            return bad(format!("data.margin = {} not in (0, pi]", d.margin));
        }
        if self.schedule_steps < 2 {
            return bad(format!("schedule.steps = {} (need >= 2)", self.schedule_steps));
        }
        let s = &self.sampler;
        if !(s.eta.is_finite() && s.eta >= 0.0) {
            return bad(format!("sampler.eta = {} must be finite and >= 0", s.eta));
        }
        if let KappaSetting::Constant(k) = s.kappa {
            if !(k.is_finite() && k >= 0.0) {
                return bad(format!("sampler.kappa = {k} must be finite and >= 0"));
            }
        }
        if s.samples_per_class == 0 {
            return bad("sampler.samples_per_class must be positive".into());
        }
        let a = &self.adaptive;
        if !(a.epsilon > 0.0 && a.epsilon < 1.0) || !(a.beta > 0.0 && a.beta.is_finite()) {
            return bad("adaptive.epsilon must lie in (0, 1) and adaptive.beta be positive".into());
        }
        let m = &self.metrics;
        if !(m.percentile > 0.0 && m.percentile <= 100.0) || m.bins == 0 || m.histogram_bins == 0 {
            return bad("metrics.percentile must lie in (0, 100] and bin counts be positive".into());
        }
        let sc = &self.score;
        if sc.hidden.is_empty() || sc.hidden.contains(&0) || sc.batch_size == 0 {
            return bad("score.hidden widths and score.batch_size must be positive".into());
        }
        if !(sc.learning_rate > 0.0) || !(0.0..1.0).contains(&sc.momentum) {
            return bad("score.learning_rate must be positive and score.momentum in [0, 1)".into());
        }
        let b = &self.baseline;
        if b.steps == 0 || !(0.0 < b.beta_min && b.beta_min <= b.beta_max && b.beta_max < 1.0) {
            return bad("baseline needs steps >= 1 and 0 < beta_min <= beta_max < 1".into());
        }
        Ok(())
    }

    /// Every effective setting as `key -> value`, parseable back by [`ExperimentConfig::parse`].
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("seed", self.seed.to_string());
        let d = &self.data;
        put(
            "data.source",
            match d.source {
                DataSource::Synthetic => "synthetic",
                DataSource::Csv => "csv",
            }
            .into(),
        );
        if let Some(p) = &d.path {
            put("data.path", p.display().to_string());
        }
        put("data.normalize", d.normalize.to_string());
        put("data.dim", d.dim.to_string());
        put("data.classes", d.classes.to_string());
        put("data.kappa", join(&d.kappa));
        put("data.per_class", d.per_class.to_string());
        put("data.margin", d.margin.to_string());
        if let Some(s) = d.mean_seed {
            put("data.mean_seed", s.to_string());
        }
        put("schedule.steps", self.schedule_steps.to_string());
        put("schedule.shape", self.schedule_shape.to_string());
        let s = &self.sampler;
        put(
            "sampler.variant",
            match s.variant {
                SamplerVariant::Drift => "drift",
                SamplerVariant::Angular => "angular",
                SamplerVariant::Constrained => "constrained",
            }
            .into(),
        );
        put("sampler.eta", s.eta.to_string());
        put(
            "sampler.eta_policy",
            match s.eta_policy {
                EtaPolicy::Constant => "constant",
                EtaPolicy::Decaying => "decaying",
            }
            .into(),
        );
        put(
            "sampler.kappa",
            match s.kappa {
                KappaSetting::Scheduled => "scheduled".into(),
                KappaSetting::Constant(k) => k.to_string(),
            },
        );
        put("sampler.samples_per_class", s.samples_per_class.to_string());
        put("adaptive.enabled", self.adaptive.enabled.to_string());
        put("adaptive.epsilon", self.adaptive.epsilon.to_string());
        put("adaptive.beta", self.adaptive.beta.to_string());
        put("metrics.percentile", self.metrics.percentile.to_string());
        put("metrics.bins", self.metrics.bins.to_string());
        put("metrics.histogram_bins", self.metrics.histogram_bins.to_string());
        let sc = &self.score;
        put(
            "score.kind",
            match sc.kind {
                ScoreKind::Analytic => "analytic",
                ScoreKind::Mlp => "mlp",
            }
            .into(),
        );
        put("score.hidden", join(&sc.hidden));
        put("score.epochs", sc.epochs.to_string());
        put("score.batch_size", sc.batch_size.to_string());
        put("score.learning_rate", sc.learning_rate.to_string());
        put("score.momentum", sc.momentum.to_string());
        put("score.loss", sc.loss.to_string());
        put("score.forward_mode", sc.forward_mode.to_string());
        put("baseline.enabled", self.baseline.enabled.to_string());
        put("baseline.steps", self.baseline.steps.to_string());
        put("baseline.beta_min", self.baseline.beta_min.to_string());
        put("baseline.beta_max", self.baseline.beta_max.to_string());
        put("output.dir", self.output_dir.display().to_string());
        m
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    line: usize,
    key: String,
    value: String,
}

impl Entry {
    fn invalid(&self, why: impl Display) -> CliError {
        CliError::config(
            Some(self.line),
            format!("invalid value `{}` for `{}`: {why}", self.value, self.key),
        )
    }

    fn parse<T: FromStr>(&self) -> Result<T>
    where
        T::Err: Display,
    {
        self.value.parse().map_err(|e| self.invalid(e))
    }

    fn list<T: FromStr>(&self) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        self.value
            .split(',')
            .map(|s| s.trim().parse().map_err(|e| self.invalid(e)))
            .collect()
    }

    /// A number of radians, or `pi`, `pi/N`, `M*pi/N`.
    fn angle(&self) -> Result<f64> {
        if let Ok(v) = self.value.parse::<f64>() {
            return Ok(v);
        }
        let (num, den) = match self.value.split_once('/') {
            Some((a, b)) => (a.trim(), Some(b.trim())),
            None => (self.value.as_str(), None),
        };
        let factor = match num.strip_suffix("pi") {
            Some("") => 1.0,
            Some(m) => m
                .trim()
                .trim_end_matches('*')
                .trim()
                .parse::<f64>()
                .map_err(|e| self.invalid(e))?,
            None => return Err(self.invalid("expected radians or a multiple of pi")),
        };
        let den = match den {
            Some(d) => d.parse::<f64>().map_err(|e| self.invalid(e))?,
            None => 1.0,
        };
        Ok(factor * PI / den)
    }
}

fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| CliError::config(Some(line), format!("expected `key = value`, got `{content}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(CliError::config(Some(line), "empty key or value"));
        }
        if let Some(prev) = seen.insert(key.to_string(), line) {
            return Err(CliError::config(
                Some(line),
                format!("`{key}` already set on line {prev}"),
            ));
        }
        out.push(Entry {
            line,
            key: key.into(),
            value: value.into(),
        });
    }
    Ok(out)
}
