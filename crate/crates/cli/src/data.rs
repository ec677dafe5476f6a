//! Labeled unit-vector datasets: synthetic vMF classes and CSV ingestion.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use vmfdiff::sphere::{norm, uniform_sphere_sample};
use vmfdiff::vmf::sample_vmf;
use vmfdiff::{UnitVector, VmfParams};

use crate::config::DataConfig;
use crate::error::{CliError, Result, Stage};

/// Allowed deviation of `‖v‖` from 1 when rows are not renormalized.
pub const UNIT_TOLERANCE: f64 = 1e-6;

const PLACEMENT_RESTARTS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    pub labels: Vec<String>,
    pub vectors: Vec<UnitVector>,
    pub source: Option<PathBuf>,
    pub normalized: bool,
}

impl EmbeddingDataset {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, UnitVector::dim)
    }

    /// Sorted distinct class names and each row's index into them.
    pub fn label_indices(&self) -> (Vec<String>, Vec<usize>) {
        let names: Vec<String> = self
            .labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let idx = self
            .labels
            .iter()
            .map(|l| names.binary_search(l).unwrap())
            .collect();
        (names, idx)
    }

    /// Writes the `label,x0,...` format read by [`ingest_csv`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        write_rows(file, self.dim(), self.labels.iter().map(String::as_str).zip(&self.vectors))
            .map_err(|e| CliError::io(path, e))
    }
}

pub(crate) fn write_rows<'a, W: Write>(
    w: W,
    dim: usize,
    rows: impl Iterator<Item = (&'a str, &'a UnitVector)>,
) -> std::io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["label".to_string()];
    header.extend((0..dim).map(|i| format!("x{i}")));
    out.write_record(&header)?;
    for (label, v) in rows {
        let mut rec = vec![label.to_string()];
        rec.extend(v.as_slice().iter().map(f64::to_string));
        out.write_record(&rec)?;
    }
    out.flush()
}

/// Class name of the `k`-th of `classes` synthetic classes; zero padded so names sort by index.
pub fn class_name(k: usize, classes: usize) -> String {
    let width = classes.saturating_sub(1).to_string().len();
    format!("class{k:0width$}")
}

/// Greedy farthest-point placement of `k` directions with pairwise angle at least `margin`.
///
/// Each attempt draws a pool of uniform candidates, starts from a random one and
/// repeatedly adds the candidate farthest from everything chosen so far.
pub fn place_means<R: Rng + ?Sized>(
    k: usize,
    dim: usize,
    margin: f64,
    rng: &mut R,
) -> Result<Vec<UnitVector>> {
    let pool_size = (256 * k).max(4096);
    let min_cos = margin.cos();
    for _ in 0..PLACEMENT_RESTARTS {
        let pool: Vec<UnitVector> = (0..pool_size)
            .map(|_| uniform_sphere_sample(rng, dim))
            .collect::<std::result::Result<_, _>>()
            .stage("mean placement")?;
        let first = rng.random_range(0..pool_size);
        let mut chosen = vec![pool[first].clone()];
        let mut nearest: Vec<f64> = pool.iter().map(|p| p.dot(&pool[first])).collect();
        while chosen.len() < k {
            let (best, &cos) = nearest
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            if cos > min_cos {
                break;
            }
            let pick = pool[best].clone();
            for (n, p) in nearest.iter_mut().zip(&pool) {
                *n = n.max(p.dot(&pick));
            }
            chosen.push(pick);
        }
        if chosen.len() == k {
            return Ok(chosen);
        }
    }
    Err(CliError::MeanPlacementFailed {
        classes: k,
        dim,
        margin,
    })
}

/// `per_class` draws from vMF(mu_k, kappa_k) for every class, plus the means used.
pub fn generate_synthetic<R: Rng + ?Sized>(
    cfg: &DataConfig,
    means: &[UnitVector],
    rng: &mut R,
) -> Result<EmbeddingDataset> {
    if means.len() != cfg.classes {
        return Err(CliError::Data(format!(
            "{} means for {} classes",
            means.len(),
            cfg.classes
        )));
    }
    let mut labels = Vec::with_capacity(cfg.classes * cfg.per_class);
    let mut vectors = Vec::with_capacity(cfg.classes * cfg.per_class);
    for (k, mu) in means.iter().enumerate() {
        let p = VmfParams::new(mu.clone(), cfg.kappa_of(k)).stage("synthetic data")?;
        vectors.extend(sample_vmf(rng, &p, cfg.per_class).stage("synthetic data")?);
        labels.extend(std::iter::repeat_n(class_name(k, cfg.classes), cfg.per_class));
    }
    Ok(EmbeddingDataset {
        labels,
        vectors,
        source: None,
        normalized: false,
    })
}

/// Reads `label,x0,...,x{d-1}` rows. Rows are renormalized when `normalize`
/// is set and rejected when their norm is off by more than [`UNIT_TOLERANCE`] otherwise.
pub fn ingest_csv(path: &Path, normalize: bool) -> Result<EmbeddingDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    // Physical line of a byte offset; the reader's own counter skips blank lines.
    let line_at = |pos: Option<&csv::Position>| {
        pos.map_or(1, |p| {
            let bytes = text.as_bytes();
            let mut end = (p.byte() as usize).min(bytes.len());
            while end < bytes.len() && matches!(bytes[end], b'\n' | b'\r') {
                end += 1;
            }
            bytes[..end].iter().filter(|&&b| b == b'\n').count() as u64 + 1
        })
    };
    let parse_err = |line: u64, message: String| CliError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let csv_err = |e: csv::Error| parse_err(line_at(e.position()), e.to_string());
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.is_empty() || header.get(0) != Some("label") {
        return Err(parse_err(1, "header must start with `label`".into()));
    }
    let dim = header.len() - 1;
    for (i, name) in header.iter().skip(1).enumerate() {
        if name.trim() != format!("x{i}") {
            return Err(parse_err(1, format!("column {} should be `x{i}`, found `{name}`", i + 1)));
        }
    }
    if dim < 2 {
        return Err(parse_err(1, format!("need at least 2 coordinates, found {dim}")));
    }
    let mut labels = Vec::new();
    let mut vectors = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = line_at(rec.position());
        let label = rec[0].trim();
        if label.is_empty() {
            return Err(parse_err(line, "empty label".into()));
        }
        let coords: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(line, format!("`{f}` is not a finite number")))
            })
            .collect::<Result<_>>()?;
        let n = norm(&coords);
        if !normalize && (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(CliError::NonUnitVector {
                path: path.to_path_buf(),
                row,
                norm: n,
            });
        }
        let v = UnitVector::new(coords).map_err(|e| parse_err(line, e.to_string()))?;
        labels.push(label.to_string());
        vectors.push(v);
    }
    if vectors.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    Ok(EmbeddingDataset {
        labels,
        vectors,
        source: Some(path.to_path_buf()),
        normalized: normalize,
    })
}
