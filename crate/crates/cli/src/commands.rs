//! Subcommand bodies; each returns a one-paragraph summary for stdout.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use vmfdiff::forward::ForwardMode;
use vmfdiff::metrics::{evaluate, fit_class_stats, MetricReport};
use vmfdiff::schedule::ScheduleShape;
use vmfdiff::sphere::norm;
use vmfdiff::vmf::{bessel_ratio, sample_vmf};
use vmfdiff::{UnitVector, VmfParams};

use crate::chains::{chain_rng, Purpose};
use crate::config::ExperimentConfig;
use crate::data::{ingest_csv, write_rows};
use crate::diagnostics::{coverage_grid, forward_diagnostics, separation_grid};
use crate::error::{CliError, Result, Stage};
use crate::experiment::{
    ablate_schedule, build_score, prepare, run_experiment, sample_vmf_pipeline, train_network,
};
use crate::report::{emit_report, RunMetadata};

/// Options shared by the config-driven subcommands.
#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub baseline: Option<bool>,
}

impl RunArgs {
    /// Reads the config file (if any) and applies the command-line overrides.
    pub fn load(&self) -> Result<ExperimentConfig> {
        let text = match &self.config {
            Some(p) => fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
            None => String::new(),
        };
        let mut cfg = ExperimentConfig::parse(&text, self.seed)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(b) = self.baseline {
            cfg.baseline.enabled = b;
        }
        Ok(cfg)
    }
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn metric_line(name: &str, m: &MetricReport) -> String {
    format!(
        "{name:>9}: HCR {:.4}  HDS {:.4}  cos {:.4} +- {:.4}  (n = {})\n",
        m.hcr, m.hds, m.cos_mean, m.cos_std, m.n
    )
}

pub fn run(args: &RunArgs, threads: Option<usize>) -> Result<String> {
    let cfg = args.load()?;
    let started = unix_now();
    let clock = Instant::now();
    let outcome = run_experiment(&cfg)?;
    let meta = RunMetadata {
        started_unix: started,
        elapsed_seconds: clock.elapsed().as_secs_f64(),
        threads,
        tool_version: env!("CARGO_PKG_VERSION").into(),
    };
    let files = emit_report(&outcome.artifacts, &meta, &cfg.output_dir)?;
    let m = &outcome.artifacts.report.metrics;
    let mut s = String::new();
    for (name, rep) in [("vmf", &m.vmf), ("gaussian", &m.gaussian)] {
        if let Some(r) = rep {
            s.push_str(&metric_line(name, r));
        }
    }
    let _ = writeln!(s, "report written to {}", files.report.display());
    Ok(s)
}

pub fn ablate(args: &RunArgs, constants: &[f64]) -> Result<String> {
    let cfg = args.load()?;
    let rows = ablate_schedule(&cfg, constants)?;
    let path = cfg.output_dir.join("ablation.json");
    write_json(&path, &rows)?;
    let mut s = String::new();
    for r in &rows {
        let _ = writeln!(
            s,
            "{:>16}: HCR {:.4}  HDS {:.4}  cos {:.4} +- {:.4}",
            r.setting, r.hcr, r.hds, r.cos_mean, r.cos_std
        );
    }
    let _ = writeln!(s, "ablation written to {}", path.display());
    Ok(s)
}

pub fn reverse(args: &RunArgs) -> Result<String> {
    let cfg = args.load()?;
    let prep = prepare(&cfg)?;
    let (score, _) = build_score(&cfg, &prep)?;
    let draws = sample_vmf_pipeline(&cfg, &prep, score.as_ref(), cfg.sampler.kappa)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join("reverse_samples.csv");
    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    let names = &prep.class_names;
    write_rows(
        file,
        prep.dataset.dim(),
        draws.labels.iter().map(|y| names[*y].as_str()).zip(&draws.points),
    )
    .map_err(|e| CliError::io(&path, e))?;
    Ok(format!("{} samples written to {}\n", draws.points.len(), path.display()))
}

pub fn train(args: &RunArgs) -> Result<String> {
    let cfg = args.load()?;
    let prep = prepare(&cfg)?;
    let (net, rep) = train_network(&cfg, &prep)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
    let model = cfg.output_dir.join("score_net.bin");
    let file = fs::File::create(&model).map_err(|e| CliError::io(&model, e))?;
    net.write_to(std::io::BufWriter::new(file)).stage("saving network")?;
    let curve = cfg.output_dir.join("loss_curve.csv");
    let mut text = String::from("epoch,loss\n");
    for (i, l) in rep.loss_curve.iter().enumerate() {
        let _ = writeln!(text, "{},{l}", i + 1);
    }
    fs::write(&curve, text).map_err(|e| CliError::io(&curve, e))?;
    Ok(format!(
        "{} parameters, final loss {:.6}; model written to {}\n",
        net.num_params(),
        rep.loss_curve.last().copied().unwrap_or(f64::NAN),
        model.display()
    ))
}

pub fn sample_vmf_cmd(dim: usize, kappa: f64, n: usize, seed: u64, out: Option<&Path>) -> Result<String> {
    let mu = UnitVector::basis(dim, 0).stage("sample-vmf")?;
    let p = VmfParams::new(mu, kappa).stage("sample-vmf")?;
    let draws = sample_vmf(&mut chain_rng(seed, Purpose::Vmf, 0, 0), &p, n).stage("sample-vmf")?;
    let mut sum = vec![0.0; dim];
    for x in &draws {
        sum.iter_mut().zip(x.as_slice()).for_each(|(s, v)| *s += v);
    }
    let rbar = norm(&sum) / n as f64;
    if let Some(path) = out {
        let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        write_rows(file, dim, std::iter::repeat("vmf").zip(&draws)).map_err(|e| CliError::io(path, e))?;
    }
    Ok(format!(
        "{n} draws from vMF(e_0, {kappa}) in d = {dim}: resultant length {rbar:.5}, expected {:.5}\n",
        bessel_ratio(dim, kappa)
    ))
}

pub fn forward_cmd(
    dim: usize,
    steps: usize,
    shape: ScheduleShape,
    mode: ForwardMode,
    chains: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<String> {
    let s = forward_diagnostics(seed, dim, steps, shape, mode, chains)?;
    if let Some(path) = out {
        let mut text = String::from("t,theta,kappa,mean_cos,std_error,resultant_length\n");
        for r in &s.steps {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{}",
                r.t, r.theta, r.kappa, r.mean_cos, r.std_error, r.resultant_length
            );
        }
        fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    }
    let last = s.steps.last().expect("at least two steps");
    Ok(format!(
        "terminal resultant length {:.4}; Rayleigh statistic {:.3}, p = {:.4}\n",
        last.resultant_length, s.terminal.statistic, s.terminal.p_value
    ))
}

pub fn metrics_cmd(
    reference: &Path,
    samples: &Path,
    normalize: bool,
    percentile: f64,
    bins: usize,
    out: Option<&Path>,
) -> Result<String> {
    let data = ingest_csv(reference, normalize)?;
    let gen = ingest_csv(samples, normalize)?;
    let (names, labels) = data.label_indices();
    let stats = fit_class_stats(&labels, &data.vectors, percentile, bins).stage("class statistics")?;
    let gen_labels = gen
        .labels
        .iter()
        .enumerate()
        .map(|(row, l)| {
            names
                .binary_search(l)
                .map_err(|_| CliError::Data(format!("sample row {row}: label `{l}` not in the reference data")))
        })
        .collect::<Result<Vec<_>>>()?;
    let rep = evaluate(&gen_labels, &gen.vectors, &stats).stage("metrics")?;
    if let Some(path) = out {
        write_json(path, &rep)?;
    }
    Ok(metric_line("samples", &rep))
}

#[derive(Serialize)]
struct BoundsFile {
    coverage_passed: bool,
    coverage: Vec<crate::diagnostics::CoverageCell>,
    separation: Vec<vmfdiff::bounds::SeparationCell>,
}

pub fn verify_bounds(seed: u64, n: usize, out: &Path) -> Result<String> {
    let coverage = coverage_grid(seed, n)?;
    let separation = separation_grid(seed, n)?;
    let passed = coverage.iter().all(|c| c.passes());
    let path = out.join("bounds.json");
    write_json(
        &path,
        &BoundsFile {
            coverage_passed: passed,
            coverage: coverage.clone(),
            separation: separation.clone(),
        },
    )?;
    let mut s = String::from("    d  kappa  theta   bound  empirical  (coverage)\n");
    for c in &coverage {
        let _ = writeln!(
            s,
            "{:>5} {:>6} {:>6.3} {:>7.4} {:>10.4}  {}",
            c.d,
            c.kappa,
            c.theta,
            c.bound,
            c.empirical,
            if c.passes() { "ok" } else { "VIOLATED" }
        );
    }
    s.push_str("    d  kappa  theta   bound  empirical  (separation)\n");
    for c in &separation {
        let _ = writeln!(
            s,
            "{:>5} {:>6} {:>6.3} {:>7.4} {:>10.4}  {}",
            c.d,
            c.kappa,
            c.theta,
            c.bound,
            c.nearer_other,
            if c.bound_holds() { "holds" } else { "exceeded" }
        );
    }
    let _ = writeln!(s, "written to {}", path.display());
    if !passed {
        return Err(CliError::Numeric {
            stage: "verify-bounds",
            source: vmfdiff::Error::InvalidParameter {
                name: "coverage",
                reason: format!("empirical coverage fell below the bound; see {}", path.display()),
            },
        });
    }
    Ok(s)
}
