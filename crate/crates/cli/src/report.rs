//! Versioned run report and its on-disk artifacts.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vmfdiff::metrics::MetricReport;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub config_echo: BTreeMap<String, String>,
    pub metrics: Metrics,
    pub bounds: Vec<BoundRow>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub vmf: Option<MetricReport>,
    pub gaussian: Option<MetricReport>,
}

/// Coverage bound of a class's fitted vMF next to observed in-cone rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub label: usize,
    pub class: String,
    pub theta_max: f64,
    pub kappa: f64,
    pub coverage_bound: f64,
    /// Concentration needed for the bound to reach `1 - epsilon`.
    pub min_kappa: f64,
    pub epsilon: f64,
    pub data_coverage: f64,
    pub vmf_coverage: Option<f64>,
}

/// One generated sample: its class, angle to the class mean and cone membership.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub method: String,
    pub label: String,
    pub angle: f64,
    pub cosine: f64,
    pub in_cone: bool,
}

/// Angle counts on equal-width bins over `[0, pi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub method: String,
    pub class: String,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn of_angles(method: &str, class: &str, angles: impl IntoIterator<Item = f64>, bins: usize) -> Self {
        let mut counts = vec![0; bins.max(1)];
        let last = counts.len() - 1;
        for a in angles {
            let i = (a.clamp(0.0, PI) / PI * counts.len() as f64) as usize;
            counts[i.min(last)] += 1;
        }
        Self {
            method: method.into(),
            class: class.into(),
            counts,
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn edges(&self) -> Vec<f64> {
        let n = self.counts.len() as f64;
        (0..=self.counts.len()).map(|i| PI * i as f64 / n).collect()
    }
}

/// Everything a run writes besides the timing metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub report: Report,
    pub samples: Vec<SampleRow>,
    pub histograms: Vec<Histogram>,
}

/// Run facts that vary between identical runs; kept out of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub started_unix: f64,
    pub elapsed_seconds: f64,
    pub threads: Option<usize>,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WrittenFiles {
    pub report: PathBuf,
    pub samples: PathBuf,
    pub class_metrics: PathBuf,
    pub histograms: Vec<PathBuf>,
    pub metadata: PathBuf,
}

pub fn to_json(report: &Report) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn from_json(text: &str) -> Result<Report> {
    serde_json::from_str(text).map_err(|e| CliError::Data(format!("report: {e}")))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_samples(path: &Path, rows: &[SampleRow]) -> Result<()> {
    let io = |e: csv::Error| CliError::io(path, e.into());
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["method", "label", "angle", "cosine", "in_cone"]).map_err(io)?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.label.clone(),
            r.angle.to_string(),
            r.cosine.to_string(),
            r.in_cone.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads back a per-sample CSV written by [`emit_report`].
pub fn read_samples(path: &Path) -> Result<Vec<SampleRow>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| {
            r.map_err(|e: csv::Error| CliError::Parse {
                path: path.to_path_buf(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })
        })
        .collect()
}

fn write_class_metrics(path: &Path, report: &Report) -> Result<()> {
    let io = |e: csv::Error| CliError::io(path, e.into());
    let names: BTreeMap<usize, &str> = report
        .bounds
        .iter()
        .map(|b| (b.label, b.class.as_str()))
        .collect();
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["method", "label", "class", "n", "outside", "hcr", "hds", "cos_mean", "cos_std"])
        .map_err(io)?;
    let methods = [("vmf", &report.metrics.vmf), ("gaussian", &report.metrics.gaussian)];
    for (method, m) in methods {
        for c in m.iter().flat_map(|m| &m.per_class) {
            w.write_record([
                method.to_string(),
                c.label.to_string(),
                names.get(&c.label).copied().unwrap_or("").to_string(),
                c.n.to_string(),
                c.outside.to_string(),
                c.hcr.to_string(),
                c.hds.map_or(String::new(), |h| h.to_string()),
                c.cos_mean.to_string(),
                c.cos_std.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// gnuplot data: one block per class (select with `index`), columns `lo hi center count`.
fn write_histograms(path: &Path, hists: &[&Histogram]) -> Result<()> {
    let io = |e| CliError::io(path, e);
    let mut w = create(path)?;
    for (i, h) in hists.iter().enumerate() {
        if i > 0 {
            writeln!(w, "\n").map_err(io)?;
        }
        writeln!(w, "# method {} class {} total {}", h.method, h.class, h.total()).map_err(io)?;
        writeln!(w, "# lo hi center count").map_err(io)?;
        let e = h.edges();
        for (j, c) in h.counts.iter().enumerate() {
            writeln!(w, "{} {} {} {}", e[j], e[j + 1], 0.5 * (e[j] + e[j + 1]), c).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Writes `report.json`, `samples.csv`, `class_metrics.csv`, one
/// `hist_<method>.dat` per method and `metadata.json` into `dir`.
pub fn emit_report(art: &Artifacts, meta: &RunMetadata, dir: &Path) -> Result<WrittenFiles> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let report = dir.join("report.json");
    fs::write(&report, to_json(&art.report)).map_err(|e| CliError::io(&report, e))?;
    let samples = dir.join("samples.csv");
    write_samples(&samples, &art.samples)?;
    let class_metrics = dir.join("class_metrics.csv");
    write_class_metrics(&class_metrics, &art.report)?;
    let mut methods: Vec<&str> = art.histograms.iter().map(|h| h.method.as_str()).collect();
    methods.dedup();
    let mut histograms = Vec::new();
    for m in methods {
        let path = dir.join(format!("hist_{m}.dat"));
        let hs: Vec<&Histogram> = art.histograms.iter().filter(|h| h.method == m).collect();
        write_histograms(&path, &hs)?;
        histograms.push(path);
    }
    let metadata = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    fs::write(&metadata, text + "\n").map_err(|e| CliError::io(&metadata, e))?;
    Ok(WrittenFiles {
        report,
        samples,
        class_metrics,
        histograms,
        metadata,
    })
}
