use std::io::{Read, Write};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::{loss_and_grad, LossKind};
use super::ScoreModel;
use crate::error::{Error, Result};
use crate::sphere::UnitVector;

const MAGIC: &[u8; 8] = b"VMFNET01";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Self::Tanh => x.tanh(),
            Self::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    fn slope(self, y: f64) -> f64 {
        match self {
            Self::Tanh => 1.0 - y * y,
            Self::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub dim: usize,
    /// Number of diffusion steps; one time embedding per step.
    pub steps: usize,
    pub classes: usize,
    pub time_embed: usize,
    pub class_embed: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl MlpConfig {
    pub fn new(dim: usize, steps: usize, classes: usize) -> Self {
        Self {
            dim,
            steps,
            classes,
            time_embed: 8,
            class_embed: 8,
            hidden: vec![128, 128],
            activation: Activation::Tanh,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidDimension(self.dim));
        }
        if self.steps == 0 || self.classes == 0 || self.hidden.contains(&0) {
            return Err(Error::param("network", "steps, classes and widths must be positive"));
        }
        Ok(())
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.dim + self.time_embed + self.class_embed];
        w.extend(&self.hidden);
        w.push(self.dim);
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerSpan {
    weights: usize,
    bias: usize,
    fan_in: usize,
    fan_out: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    time: usize,
    class: usize,
    layers: Vec<LayerSpan>,
    total: usize,
}

impl Layout {
    fn of(cfg: &MlpConfig) -> Self {
        let time = 0;
        let class = time + cfg.steps * cfg.time_embed;
        let mut off = class + cfg.classes * cfg.class_embed;
        let widths = cfg.widths();
        let layers = widths
            .windows(2)
            .map(|w| {
                let span = LayerSpan {
                    weights: off,
                    bias: off + w[0] * w[1],
                    fan_in: w[0],
                    fan_out: w[1],
                };
                off = span.bias + w[1];
                span
            })
            .collect();
        Self {
            time,
            class,
            layers,
            total: off,
        }
    }
}

/// Fully connected score network on `[z | time embedding | class embedding]`.
///
/// All parameters live in one flat vector so the optimizer and the
/// serializer can treat them uniformly.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpScoreNet {
    cfg: MlpConfig,
    layout: Layout,
    params: Vec<f64>,
    seed: u64,
}

/// Activations of one forward pass, kept for backpropagation.
pub(crate) struct Tape {
    acts: Vec<Vec<f64>>,
}

impl Tape {
    pub(crate) fn output(&self) -> &[f64] {
        self.acts.last().unwrap()
    }
}

impl MlpScoreNet {
    pub fn new<R: Rng + ?Sized>(cfg: MlpConfig, seed: u64, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::of(&cfg);
        let mut params = vec![0.0; layout.total];
        for p in &mut params[layout.time..layout.layers[0].weights] {
            *p = rng.random_range(-0.1..0.1);
        }
        for span in &layout.layers {
            let a = (3.0 / span.fan_in as f64).sqrt();
            for p in &mut params[span.weights..span.bias] {
                *p = rng.random_range(-a..a);
            }
        }
        Ok(Self {
            cfg,
            layout,
            params,
            seed,
        })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check_inputs(&self, z: &[f64], t: usize, y: usize) -> Result<()> {
        if z.len() != self.cfg.dim {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.dim,
                found: z.len(),
            });
        }
        if t == 0 || t > self.cfg.steps {
            return Err(Error::IndexOutOfRange {
                index: t,
                len: self.cfg.steps,
            });
        }
        if y >= self.cfg.classes {
            return Err(Error::UnknownLabel(y));
        }
        Ok(())
    }

    pub(crate) fn forward(&self, z: &[f64], t: usize, y: usize) -> Result<Tape> {
        self.check_inputs(z, t, y)?;
        let (te, ce) = (self.cfg.time_embed, self.cfg.class_embed);
        let mut input = z.to_vec();
        let ts = self.layout.time + (t - 1) * te;
        input.extend_from_slice(&self.params[ts..ts + te]);
        let cs = self.layout.class + y * ce;
        input.extend_from_slice(&self.params[cs..cs + ce]);
        let mut acts = vec![input];
        let last = self.layout.layers.len() - 1;
        for (l, span) in self.layout.layers.iter().enumerate() {
            let x = acts.last().unwrap();
            let w = &self.params[span.weights..span.bias];
            let b = &self.params[span.bias..span.bias + span.fan_out];
            let out: Vec<f64> = (0..span.fan_out)
                .map(|o| {
                    let row = &w[o * span.fan_in..(o + 1) * span.fan_in];
                    let pre = b[o] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
                    if l == last {
                        pre
                    } else {
                        self.cfg.activation.apply(pre)
                    }
                })
                .collect();
            acts.push(out);
        }
        Ok(Tape { acts })
    }

    /// Adds the parameter gradient for one sample to `grad`, given `d loss / d output`.
    pub(crate) fn backward(&self, tape: &Tape, t: usize, y: usize, grad_out: &[f64], grad: &mut [f64]) {
        let mut delta = grad_out.to_vec();
        let last = self.layout.layers.len() - 1;
        for (l, span) in self.layout.layers.iter().enumerate().rev() {
            if l != last {
                let out = &tape.acts[l + 1];
                delta
                    .iter_mut()
                    .zip(out)
                    .for_each(|(d, y)| *d *= self.cfg.activation.slope(*y));
            }
            let x = &tape.acts[l];
            let w = &self.params[span.weights..span.bias];
            let mut back = vec![0.0; span.fan_in];
            for (o, d) in delta.iter().enumerate() {
                let row = o * span.fan_in;
                grad[span.bias + o] += d;
                let gw = &mut grad[span.weights + row..span.weights + row + span.fan_in];
                for i in 0..span.fan_in {
                    gw[i] += d * x[i];
                    back[i] += d * w[row + i];
                }
            }
            delta = back;
        }
        let d = self.cfg.dim;
        let (te, ce) = (self.cfg.time_embed, self.cfg.class_embed);
        let ts = self.layout.time + (t - 1) * te;
        for k in 0..te {
            grad[ts + k] += delta[d + k];
        }
        let cs = self.layout.class + y * ce;
        for k in 0..ce {
            grad[cs + k] += delta[d + te + k];
        }
    }

    pub fn predict(&self, z: &[f64], t: usize, y: usize) -> Result<Vec<f64>> {
        Ok(self.forward(z, t, y)?.acts.pop().unwrap())
    }

    /// Mean loss over `batch` and, when `grad` is given, its gradient (overwritten).
    pub fn batch_loss(&self, batch: &[GradSample], kind: LossKind, grad: Option<&mut [f64]>) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyInput);
        }
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        match grad {
            Some(g) => {
                g.iter_mut().for_each(|v| *v = 0.0);
                for s in batch {
                    let tape = self.forward(&s.z, s.t, s.y)?;
                    let (l, dl) = loss_and_grad(kind, tape.output(), &s.target)?;
                    total += l;
                    let scaled: Vec<f64> = dl.iter().map(|v| v * scale).collect();
                    self.backward(&tape, s.t, s.y, &scaled, g);
                }
            }
            None => {
                for s in batch {
                    let out = self.predict(&s.z, s.t, s.y)?;
                    total += loss_and_grad(kind, &out, &s.target)?.0;
                }
            }
        }
        Ok(total * scale)
    }

    fn header(&self) -> Header {
        Header {
            version: FORMAT_VERSION,
            config: self.cfg.clone(),
            seed: self.seed,
            num_params: self.params.len(),
        }
    }

    /// `VMFNET01`, a little-endian `u32` header length, a JSON header, then the
    /// parameters as little-endian `f64`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header()).map_err(|e| Error::Format(e.to_string()))?;
        let io = |e: std::io::Error| Error::Format(e.to_string());
        w.write_all(MAGIC).map_err(io)?;
        w.write_all(&(header.len() as u32).to_le_bytes()).map_err(io)?;
        w.write_all(&header).map_err(io)?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes()).map_err(io)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Format(e.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a score network file".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len).map_err(io)?;
        let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut header).map_err(io)?;
        let header: Header = serde_json::from_slice(&header).map_err(|e| Error::Format(e.to_string()))?;
        if header.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {}", header.version)));
        }
        header.config.validate()?;
        let layout = Layout::of(&header.config);
        if layout.total != header.num_params {
            return Err(Error::Format("parameter count does not match the architecture".into()));
        }
        let mut params = Vec::with_capacity(layout.total);
        let mut buf = [0u8; 8];
        for _ in 0..layout.total {
            r.read_exact(&mut buf).map_err(io)?;
            params.push(f64::from_le_bytes(buf));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Format("non-finite parameter".into()));
        }
        Ok(Self {
            cfg: header.config,
            layout,
            params,
            seed: header.seed,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    config: MlpConfig,
    seed: u64,
    num_params: usize,
}

impl ScoreModel for MlpScoreNet {
    fn dim(&self) -> usize {
        self.cfg.dim
    }

    fn score(&self, z: &UnitVector, t: usize, y: usize) -> Result<Vec<f64>> {
        self.predict(z.as_slice(), t, y)
    }
}

/// One regression example: state, 1-based step, class and score target.
#[derive(Debug, Clone, PartialEq)]
pub struct GradSample {
    pub z: Vec<f64>,
    pub t: usize,
    pub y: usize,
    pub target: Vec<f64>,
}

/// Largest relative error between backpropagated and central-difference
/// gradients over `probes` randomly chosen parameters.
pub fn gradient_check<R: Rng + ?Sized>(
    net: &MlpScoreNet,
    samples: &[GradSample],
    kind: LossKind,
    h: f64,
    probes: usize,
    rng: &mut R,
) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::param("h", format!("{h} not in [1e-7, 1e-3]")));
    }
    let mut grad = vec![0.0; net.num_params()];
    net.batch_loss(samples, kind, Some(&mut grad))?;
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for i in sample_indices(rng, net.num_params(), probes.min(net.num_params())) {
        let orig = probe.params[i];
        probe.params[i] = orig + h;
        let up = probe.batch_loss(samples, kind, None)?;
        probe.params[i] = orig - h;
        let down = probe.batch_loss(samples, kind, None)?;
        probe.params[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let scale = grad[i].abs().max(fd.abs()).max(1e-7);
        worst = worst.max((grad[i] - fd).abs() / scale);
    }
    Ok(worst)
}
