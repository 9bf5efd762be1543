//! Minimal feed-forward network substrate: dense MLPs with exact reverse-mode
//! gradients, Adam, soft target blending, and a binary checkpoint format.
//!
//! All math is f64. Shape mismatches inside the hot path are programmer
//! errors and panic via `assert!`; file and format problems surface as
//! [`NeuralError`].

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::rng;

const CHECKPOINT_MAGIC: &[u8; 6] = b"MLPBIN";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint {path}: bad magic (not a checkpoint file)")]
    BadMagic { path: String },
    #[error("checkpoint {path}: format version {found}, expected {expected}")]
    VersionMismatch {
        path: String,
        found: u32,
        expected: u32,
    },
    #[error("checkpoint {path}: truncated ({detail})")]
    Truncated { path: String, detail: String },
    #[error("checkpoint {path}: dimension header mismatch ({detail})")]
    ShapeMismatch { path: String, detail: String },
    #[error("sidecar manifest {path}: {detail}")]
    MalformedManifest { path: String, detail: String },
    #[error("non-finite gradient entry at layer {layer}")]
    NonFiniteGradient { layer: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the post-activation value.
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// One dense layer; weights are row-major `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn out_dim(&self) -> usize {
        self.biases.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.len() / self.biases.len()
    }
}

/// A feed-forward MLP: the trainable parameters plus their wiring.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    /// Scale applied to the final layer's weights at initialization.
    pub output_gain: f64,
    /// Seed the parameters were drawn from; recorded in checkpoints.
    pub creation_seed: u64,
}

impl Mlp {
    /// Build a net with the given layer sizes (`dims[0]` is the input width).
    /// Hidden layers use `hidden` activation, the last layer `output`.
    /// Weights are symmetric-uniform with fan-in scaling; the output layer is
    /// additionally scaled by `output_gain`; biases start at zero.
    pub fn new(
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        output_gain: f64,
        seed: u64,
    ) -> Self {
        assert!(dims.len() >= 2, "need at least input and output dims");
        assert!(dims.iter().all(|&d| d > 0), "zero-width layer");
        let mut gen = rng::stream(seed, 0x6d6c70); // "mlp"
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for l in 0..dims.len() - 1 {
            let (fan_in, fan_out) = (dims[l], dims[l + 1]);
            let last = l == dims.len() - 2;
            let bound = 1.0 / (fan_in as f64).sqrt();
            let scale = if last { output_gain } else { 1.0 };
            let weights = (0..fan_in * fan_out)
                .map(|_| gen.gen_range(-bound..=bound) * scale)
                .collect();
            layers.push(Layer {
                weights,
                biases: vec![0.0; fan_out],
                activation: if last { output } else { hidden },
            });
        }
        Mlp {
            layers,
            output_gain,
            creation_seed: seed,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().expect("at least one layer").in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").out_dim()
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Plain forward pass; allocates the output vector.
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut ws = Workspace::new(self);
        self.forward_trace(input, &mut ws);
        ws.output().to_vec()
    }

    /// Forward pass that leaves per-layer activations in `ws` for backprop.
    pub fn forward_trace<'w>(&self, input: &[f64], ws: &'w mut Workspace) -> &'w [f64] {
        assert_eq!(
            input.len(),
            self.input_dim(),
            "input len {} does not match net input dim {}",
            input.len(),
            self.input_dim()
        );
        ws.ensure_shape(self);
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = ws.acts.split_at_mut(l);
            let out = &mut rest[0];
            let src: &[f64] = if l == 0 { input } else { &done[l - 1] };
            let in_dim = layer.in_dim();
            for (r, o) in out.iter_mut().enumerate() {
                let row = &layer.weights[r * in_dim..(r + 1) * in_dim];
                let z: f64 = row.iter().zip(src).map(|(w, x)| w * x).sum::<f64>() + layer.biases[r];
                *o = layer.activation.apply(z);
            }
        }
        ws.output()
    }

    /// Reverse-mode gradients of the traced forward pass.
    ///
    /// Parameter gradients are *accumulated* into `grads` (zero it between
    /// batches); the returned buffer in `ws.input_grad` is overwritten with
    /// dL/d(input). `upstream` is dL/d(output).
    pub fn backward_trace(
        &self,
        input: &[f64],
        upstream: &[f64],
        ws: &mut Workspace,
        grads: &mut Gradients,
    ) {
        assert_eq!(upstream.len(), self.output_dim(), "upstream grad length");
        assert_eq!(grads.layers.len(), self.layers.len(), "gradient shape");
        let n = self.layers.len();
        ws.delta.clear();
        ws.delta.extend_from_slice(upstream);

        for l in (0..n).rev() {
            let layer = &self.layers[l];
            let in_dim = layer.in_dim();
            let out_dim = layer.out_dim();
            let y = &ws.acts[l];
            // dZ = dY * act'(y), in place.
            for (d, yv) in ws.delta.iter_mut().zip(y) {
                *d *= layer.activation.grad_from_output(*yv);
            }
            let x: &[f64] = if l == 0 { input } else { &ws.acts[l - 1] };

            let (dw, db) = &mut grads.layers[l];
            for r in 0..out_dim {
                let dz = ws.delta[r];
                db[r] += dz;
                let row = &mut dw[r * in_dim..(r + 1) * in_dim];
                for (w, xv) in row.iter_mut().zip(x) {
                    *w += dz * xv;
                }
            }

            // dX = W^T dZ.
            ws.prev_delta.clear();
            ws.prev_delta.resize(in_dim, 0.0);
            for r in 0..out_dim {
                let dz = ws.delta[r];
                if dz == 0.0 {
                    continue;
                }
                let row = &layer.weights[r * in_dim..(r + 1) * in_dim];
                for (g, w) in ws.prev_delta.iter_mut().zip(row) {
                    *g += dz * w;
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.prev_delta);
        }
        ws.input_grad.clear();
        ws.input_grad.extend_from_slice(&ws.delta);
    }

    /// One-call convenience: forward, then backward with `upstream`.
    /// Returns freshly allocated gradients and the input gradient.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> (Gradients, Vec<f64>) {
        let mut ws = Workspace::new(self);
        self.forward_trace(input, &mut ws);
        let mut grads = Gradients::zeros_like(self);
        self.backward_trace(input, upstream, &mut ws, &mut grads);
        (grads, ws.input_grad.clone())
    }
}

/// Reusable forward/backward scratch for one net shape.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    prev_delta: Vec<f64>,
    input_grad: Vec<f64>,
}

impl Workspace {
    pub fn new(mlp: &Mlp) -> Self {
        let mut ws = Workspace::default();
        ws.ensure_shape(mlp);
        ws
    }

    fn ensure_shape(&mut self, mlp: &Mlp) {
        if self.acts.len() != mlp.layers.len()
            || self
                .acts
                .iter()
                .zip(&mlp.layers)
                .any(|(a, l)| a.len() != l.out_dim())
        {
            self.acts = mlp.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect();
        }
    }

    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("at least one layer")
    }

    pub fn input_grad(&self) -> &[f64] {
        &self.input_grad
    }
}

/// Parameter-shaped gradient accumulator: per layer `(d_weights, d_biases)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Gradients {
            layers: mlp
                .layers
                .iter()
                .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for (w, b) in &mut self.layers {
            w.fill(0.0);
            b.fill(0.0);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            for v in w.iter_mut() {
                *v *= s;
            }
            for v in b.iter_mut() {
                *v *= s;
            }
        }
    }

    /// Global L2 norm across all entries.
    pub fn l2_norm(&self) -> f64 {
        let mut sum = 0.0;
        for (w, b) in &self.layers {
            sum += w.iter().map(|v| v * v).sum::<f64>();
            sum += b.iter().map(|v| v * v).sum::<f64>();
        }
        sum.sqrt()
    }

    /// Rescale so the global norm does not exceed `max_norm`; returns the
    /// pre-clip norm.
    pub fn clip_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.l2_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }
}

/// Adam optimizer state, shape-matched to one net.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub first_moment: Gradients,
    pub second_moment: Gradients,
    pub timestep: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(mlp: &Mlp, lr: f64) -> Self {
        AdamState {
            first_moment: Gradients::zeros_like(mlp),
            second_moment: Gradients::zeros_like(mlp),
            timestep: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam step along `-grads`.
pub fn adam_step(params: &mut Mlp, grads: &Gradients, state: &mut AdamState) -> Result<(), NeuralError> {
    assert_eq!(params.layers.len(), grads.layers.len(), "gradient shape");
    for (l, (dw, db)) in grads.layers.iter().enumerate() {
        if dw.iter().chain(db.iter()).any(|v| !v.is_finite()) {
            return Err(NeuralError::NonFiniteGradient { layer: l });
        }
    }
    state.timestep += 1;
    let t = state.timestep as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    for (l, layer) in params.layers.iter_mut().enumerate() {
        let (dw, db) = &grads.layers[l];
        let (mw, mb) = &mut state.first_moment.layers[l];
        let (vw, vb) = &mut state.second_moment.layers[l];
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
                v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
            }
        };
        update(&mut layer.weights, dw, mw, vw);
        update(&mut layer.biases, db, mb, vb);
    }
    Ok(())
}

/// Blend `online` into `target`: `target <- tau*online + (1-tau)*target`.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) {
    assert!((0.0..=1.0).contains(&tau), "tau must be in [0, 1]");
    assert_eq!(target.layers.len(), online.layers.len(), "net shapes differ");
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        assert_eq!(t.weights.len(), o.weights.len(), "net shapes differ");
        for (tv, ov) in t.weights.iter_mut().zip(&o.weights) {
            *tv = tau * ov + (1.0 - tau) * *tv;
        }
        for (tv, ov) in t.biases.iter_mut().zip(&o.biases) {
            *tv = tau * ov + (1.0 - tau) * *tv;
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoint IO: little-endian binary plus a text sidecar manifest.
// ---------------------------------------------------------------------------

fn io_err(context: &str, source: std::io::Error) -> NeuralError {
    NeuralError::Io {
        context: context.to_string(),
        source,
    }
}

impl Mlp {
    /// Write the parameters to `path` (binary) and `path.meta` (text manifest
    /// with shapes, activation names, and the creation seed). Round-trips are
    /// bit-exact.
    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for layer in &self.layers {
            buf.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
            buf.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        }
        for layer in &self.layers {
            for v in layer.weights.iter().chain(layer.biases.iter()) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        write_atomic(path, &buf).map_err(|e| io_err(&format!("write {}", path.display()), e))?;

        let mut meta = String::new();
        meta.push_str(&format!("format_version = {CHECKPOINT_VERSION}\n"));
        meta.push_str(&format!(
            "shapes = {}\n",
            self.layers
                .iter()
                .map(|l| format!("{}x{}", l.out_dim(), l.in_dim()))
                .collect::<Vec<_>>()
                .join(",")
        ));
        meta.push_str(&format!(
            "activations = {}\n",
            self.layers
                .iter()
                .map(|l| l.activation.name())
                .collect::<Vec<_>>()
                .join(",")
        ));
        meta.push_str(&format!("output_gain_bits = {:#018x}\n", self.output_gain.to_bits()));
        meta.push_str(&format!("creation_seed = {}\n", self.creation_seed));
        write_atomic(&meta_path(path), meta.as_bytes())
            .map_err(|e| io_err(&format!("write {}", meta_path(path).display()), e))?;
        Ok(())
    }

    /// Load a checkpoint written by [`Mlp::save`].
    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let display = path.display().to_string();
        let mut file =
            fs::File::open(path).map_err(|e| io_err(&format!("open {display}"), e))?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)
            .map_err(|e| io_err(&format!("read {display}"), e))?;

        let mut cursor = 0usize;
        let mut take = |n: usize, what: &str| -> Result<&[u8], NeuralError> {
            if cursor + n > buf.len() {
                return Err(NeuralError::Truncated {
                    path: display.clone(),
                    detail: format!("expected {n} bytes for {what}"),
                });
            }
            let slice = &buf[cursor..cursor + n];
            cursor += n;
            Ok(slice)
        };

        if take(6, "magic")? != CHECKPOINT_MAGIC {
            return Err(NeuralError::BadMagic { path: display });
        }
        let version = u32::from_le_bytes(take(4, "version")?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(NeuralError::VersionMismatch {
                path: display,
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let n_layers = u32::from_le_bytes(take(4, "layer count")?.try_into().unwrap()) as usize;
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            let rows = u32::from_le_bytes(take(4, "rows")?.try_into().unwrap()) as usize;
            let cols = u32::from_le_bytes(take(4, "cols")?.try_into().unwrap()) as usize;
            if rows == 0 || cols == 0 {
                return Err(NeuralError::ShapeMismatch {
                    path: display,
                    detail: format!("zero dimension {rows}x{cols}"),
                });
            }
            shapes.push((rows, cols));
        }
        for window in shapes.windows(2) {
            if window[0].0 != window[1].1 {
                return Err(NeuralError::ShapeMismatch {
                    path: display,
                    detail: format!(
                        "layer output {} does not chain into next input {}",
                        window[0].0, window[1].1
                    ),
                });
            }
        }

        let meta = read_manifest(&meta_path(path))?;
        if meta.shapes != shapes {
            return Err(NeuralError::ShapeMismatch {
                path: display,
                detail: "sidecar shapes disagree with binary headers".into(),
            });
        }

        let mut layers = Vec::with_capacity(n_layers);
        for (l, &(rows, cols)) in shapes.iter().enumerate() {
            let mut weights = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                weights.push(f64::from_le_bytes(
                    take(8, "weight")?.try_into().unwrap(),
                ));
            }
            let mut biases = Vec::with_capacity(rows);
            for _ in 0..rows {
                biases.push(f64::from_le_bytes(take(8, "bias")?.try_into().unwrap()));
            }
            layers.push(Layer {
                weights,
                biases,
                activation: meta.activations[l],
            });
        }
        Ok(Mlp {
            layers,
            output_gain: meta.output_gain,
            creation_seed: meta.creation_seed,
        })
    }
}

fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".meta");
    std::path::PathBuf::from(p)
}

struct Manifest {
    shapes: Vec<(usize, usize)>,
    activations: Vec<Activation>,
    output_gain: f64,
    creation_seed: u64,
}

fn read_manifest(path: &Path) -> Result<Manifest, NeuralError> {
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| io_err(&format!("open {display}"), e))?;
    let mut shapes = None;
    let mut activations = None;
    let mut output_gain = 0.01_f64;
    let mut creation_seed = 0u64;
    let mut version = None;
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        match key {
            "format_version" => {
                version = Some(value.parse::<u32>().map_err(|e| {
                    NeuralError::MalformedManifest {
                        path: display.clone(),
                        detail: format!("format_version: {e}"),
                    }
                })?)
            }
            "shapes" => {
                let mut out = Vec::new();
                for part in value.split(',').filter(|s| !s.is_empty()) {
                    let (r, c) = part.split_once('x').ok_or_else(|| {
                        NeuralError::MalformedManifest {
                            path: display.clone(),
                            detail: format!("bad shape `{part}`"),
                        }
                    })?;
                    let parse = |s: &str| {
                        s.parse::<usize>().map_err(|e| NeuralError::MalformedManifest {
                            path: display.clone(),
                            detail: format!("bad shape `{part}`: {e}"),
                        })
                    };
                    out.push((parse(r)?, parse(c)?));
                }
                shapes = Some(out);
            }
            "activations" => {
                let mut out = Vec::new();
                for name in value.split(',').filter(|s| !s.is_empty()) {
                    out.push(Activation::from_name(name).ok_or_else(|| {
                        NeuralError::MalformedManifest {
                            path: display.clone(),
                            detail: format!("unknown activation `{name}`"),
                        }
                    })?);
                }
                activations = Some(out);
            }
            "output_gain_bits" => {
                let hex = value.trim_start_matches("0x");
                let bits = u64::from_str_radix(hex, 16).map_err(|e| {
                    NeuralError::MalformedManifest {
                        path: display.clone(),
                        detail: format!("output_gain_bits: {e}"),
                    }
                })?;
                output_gain = f64::from_bits(bits);
            }
            "creation_seed" => {
                creation_seed = value.parse::<u64>().map_err(|e| {
                    NeuralError::MalformedManifest {
                        path: display.clone(),
                        detail: format!("creation_seed: {e}"),
                    }
                })?
            }
            _ => {}
        }
    }
    match version {
        Some(v) if v == CHECKPOINT_VERSION => {}
        Some(v) => {
            return Err(NeuralError::VersionMismatch {
                path: display,
                found: v,
                expected: CHECKPOINT_VERSION,
            })
        }
        None => {
            return Err(NeuralError::MalformedManifest {
                path: display,
                detail: "missing format_version".into(),
            })
        }
    }
    let shapes = shapes.ok_or_else(|| NeuralError::MalformedManifest {
        path: display.clone(),
        detail: "missing shapes".into(),
    })?;
    let activations = activations.ok_or_else(|| NeuralError::MalformedManifest {
        path: display.clone(),
        detail: "missing activations".into(),
    })?;
    if activations.len() != shapes.len() {
        return Err(NeuralError::MalformedManifest {
            path: display,
            detail: "activation count does not match shape count".into(),
        });
    }
    Ok(Manifest {
        shapes,
        activations,
        output_gain,
        creation_seed,
    })
}

/// Write via a temp file in the same directory, then rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".to_string())
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_net(dims: &[usize]) -> Mlp {
        let mut net = Mlp::new(dims, Activation::Relu, Activation::Identity, 1.0, 0);
        for l in &mut net.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
        net
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = zero_net(&[3, 4, 2]);
        assert_eq!(net.forward(&[1.0, -2.0, 0.5]), vec![0.0, 0.0]);
    }

    #[test]
    fn scalar_tanh_net_matches_closed_form() {
        let mut net = zero_net(&[1, 1]);
        net.layers[0].weights[0] = 1.0;
        net.layers[0].activation = Activation::Tanh;
        for x in [-2.0, -0.3, 0.0, 0.7, 1.9] {
            let y = net.forward(&[x])[0];
            assert_eq!(y, x.tanh());
        }
    }

    #[test]
    fn output_length_matches_last_layer() {
        let net = Mlp::new(&[5, 16, 3], Activation::Tanh, Activation::Identity, 0.01, 7);
        assert_eq!(net.forward(&[0.1; 5]).len(), 3);
        assert_eq!(net.input_dim(), 5);
        assert_eq!(net.output_dim(), 3);
    }

    #[test]
    fn linear_net_gradients_by_hand() {
        // f(x) = w*x + b with w=2, b=0: df/dw = x, df/db = 1, df/dx = w.
        let mut net = zero_net(&[1, 1]);
        net.layers[0].weights[0] = 2.0;
        let (grads, input_grad) = net.backward(&[3.0], &[1.0]);
        assert_eq!(grads.layers[0].0[0], 3.0);
        assert_eq!(grads.layers[0].1[0], 1.0);
        assert_eq!(input_grad[0], 2.0);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let net = Mlp::new(&[4, 8, 2], Activation::Tanh, Activation::Identity, 1.0, 3);
        let (grads, input_grad) = net.backward(&[0.3, -0.4, 0.9, 0.0], &[0.0, 0.0]);
        assert!(grads
            .layers
            .iter()
            .all(|(w, b)| w.iter().all(|v| *v == 0.0) && b.iter().all(|v| *v == 0.0)));
        assert!(input_grad.iter().all(|v| *v == 0.0));
    }

    /// Central-difference check of every parameter gradient of a scalar
    /// objective `sum(c * f(x))`.
    fn gradcheck(net: &Mlp, input: &[f64], coeffs: &[f64]) {
        let objective = |net: &Mlp| -> f64 {
            net.forward(input)
                .iter()
                .zip(coeffs)
                .map(|(y, c)| y * c)
                .sum()
        };
        let (grads, _) = net.backward(input, coeffs);
        let h = 1e-5;
        let mut probe = net.clone();
        for l in 0..net.layers.len() {
            for entry in 0..net.layers[l].weights.len() + net.layers[l].biases.len() {
                let read = |n: &Mlp| {
                    let layer = &n.layers[l];
                    if entry < layer.weights.len() {
                        layer.weights[entry]
                    } else {
                        layer.biases[entry - layer.weights.len()]
                    }
                };
                let write = |n: &mut Mlp, v: f64| {
                    let layer = &mut n.layers[l];
                    if entry < layer.weights.len() {
                        layer.weights[entry] = v;
                    } else {
                        let k = entry - layer.weights.len();
                        layer.biases[k] = v;
                    }
                };
                let orig = read(&probe);
                write(&mut probe, orig + h);
                let plus = objective(&probe);
                write(&mut probe, orig - h);
                let minus = objective(&probe);
                write(&mut probe, orig);
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = {
                    let layer = &grads.layers[l];
                    if entry < layer.0.len() {
                        layer.0[entry]
                    } else {
                        layer.1[entry - layer.0.len()]
                    }
                };
                let denom = analytic.abs().max(numeric.abs());
                let ok = if denom < 1e-2 {
                    (analytic - numeric).abs() <= 1e-6
                } else {
                    (analytic - numeric).abs() / denom <= 1e-4
                };
                assert!(
                    ok,
                    "layer {l} entry {entry}: analytic {analytic} vs numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        use rand::Rng;
        let mut gen = crate::rng::stream(99, 0);
        let net = Mlp::new(&[6, 64, 64, 2], Activation::Relu, Activation::Identity, 1.0, 5);
        let input: Vec<f64> = (0..6).map(|_| gen.gen_range(-1.0..1.0)).collect();
        gradcheck(&net, &input, &[0.7, -1.3]);

        let net = Mlp::new(&[4, 16, 16, 3], Activation::Tanh, Activation::Tanh, 0.5, 6);
        let input: Vec<f64> = (0..4).map(|_| gen.gen_range(-1.0..1.0)).collect();
        gradcheck(&net, &input, &[1.0, 0.4, -0.6]);
    }

    #[test]
    fn adam_zero_gradient_leaves_params_unchanged() {
        let mut net = Mlp::new(&[3, 8, 1], Activation::Relu, Activation::Identity, 1.0, 1);
        let before = net.clone();
        let grads = Gradients::zeros_like(&net);
        let mut state = AdamState::new(&net, 0.01);
        adam_step(&mut net, &grads, &mut state).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn adam_first_step_magnitude_is_about_lr() {
        // With constant gradient g, bias correction makes the first step
        // lr * g/|g| (up to epsilon).
        let mut net = zero_net(&[1, 1]);
        let mut grads = Gradients::zeros_like(&net);
        grads.layers[0].0[0] = 0.37;
        let mut state = AdamState::new(&net, 0.01);
        adam_step(&mut net, &grads, &mut state).unwrap();
        assert!((net.layers[0].weights[0] + 0.01).abs() < 1e-6);
        assert_eq!(state.timestep, 1);
    }

    #[test]
    fn adam_rejects_non_finite_gradients() {
        let mut net = zero_net(&[1, 1]);
        let mut grads = Gradients::zeros_like(&net);
        grads.layers[0].0[0] = f64::NAN;
        let mut state = AdamState::new(&net, 0.01);
        assert!(matches!(
            adam_step(&mut net, &grads, &mut state),
            Err(NeuralError::NonFiniteGradient { layer: 0 })
        ));
    }

    #[test]
    fn adam_moments_stay_finite_under_long_runs() {
        let mut net = zero_net(&[1, 1]);
        let mut grads = Gradients::zeros_like(&net);
        let mut state = AdamState::new(&net, 1e-3);
        for k in 0..100_000u64 {
            grads.layers[0].0[0] = ((k % 17) as f64 - 8.0) / 8.0;
            adam_step(&mut net, &grads, &mut state).unwrap();
        }
        assert!(state.first_moment.layers[0].0[0].is_finite());
        assert!(state.second_moment.layers[0].0[0].is_finite());
        assert!(net.layers[0].weights[0].is_finite());
    }

    #[test]
    fn soft_update_endpoints_and_blend() {
        let online = Mlp::new(&[2, 4, 1], Activation::Tanh, Activation::Identity, 1.0, 11);
        let mut target = Mlp::new(&[2, 4, 1], Activation::Tanh, Activation::Identity, 1.0, 12);

        let mut full = target.clone();
        soft_update(&mut full, &online, 1.0);
        assert_eq!(full.layers, online.layers);

        let frozen = target.clone();
        soft_update(&mut target, &online, 0.0);
        assert_eq!(target.layers, frozen.layers);

        // Scalar case: 0 blended toward 1 with tau = 0.01.
        let mut t = zero_net(&[1, 1]);
        let mut o = zero_net(&[1, 1]);
        o.layers[0].weights[0] = 1.0;
        soft_update(&mut t, &o, 0.01);
        assert!((t.layers[0].weights[0] - 0.01).abs() < 1e-15);
    }

    #[test]
    fn soft_update_converges_geometrically() {
        let online = Mlp::new(&[3, 6, 2], Activation::Relu, Activation::Identity, 1.0, 2);
        let mut target = Mlp::new(&[3, 6, 2], Activation::Relu, Activation::Identity, 1.0, 3);
        let tau = 0.25;
        let diff_norm = |a: &Mlp, b: &Mlp| {
            let mut sum = 0.0;
            for (la, lb) in a.layers.iter().zip(&b.layers) {
                for (x, y) in la.weights.iter().zip(&lb.weights) {
                    sum += (x - y) * (x - y);
                }
                for (x, y) in la.biases.iter().zip(&lb.biases) {
                    sum += (x - y) * (x - y);
                }
            }
            sum.sqrt()
        };
        let d0 = diff_norm(&target, &online);
        for k in 1..=10 {
            soft_update(&mut target, &online, tau);
            let expected = (1.0 - tau).powi(k) * d0;
            assert!((diff_norm(&target, &online) - expected).abs() < 1e-9 * (1.0 + expected));
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.mlp");
        let net = Mlp::new(&[7, 64, 64, 2], Activation::Relu, Activation::Tanh, 0.01, 321);
        net.save(&path).unwrap();
        let loaded = Mlp::load(&path).unwrap();
        assert_eq!(net, loaded);
    }

    #[test]
    fn truncated_checkpoint_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.mlp");
        let net = Mlp::new(&[3, 8, 1], Activation::Tanh, Activation::Identity, 1.0, 4);
        net.save(&path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            Mlp::load(&path),
            Err(NeuralError::Truncated { .. })
        ));
    }

    #[test]
    fn version_mismatch_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.mlp");
        let net = Mlp::new(&[3, 8, 1], Activation::Tanh, Activation::Identity, 1.0, 4);
        net.save(&path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[6..10].copy_from_slice(&99u32.to_le_bytes());
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            Mlp::load(&path),
            Err(NeuralError::VersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn bad_magic_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.mlp");
        fs::write(&path, b"NOTANET-whatever").unwrap();
        assert!(matches!(Mlp::load(&path), Err(NeuralError::BadMagic { .. })));
    }

    #[test]
    fn forward_is_deterministic_for_shared_params() {
        let net = Mlp::new(&[5, 32, 2], Activation::Tanh, Activation::Identity, 1.0, 8);
        let input = [0.1, -0.2, 0.3, 0.4, -0.5];
        let a = net.forward(&input);
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let net = net.clone();
                std::thread::spawn(move || net.forward(&[0.1, -0.2, 0.3, 0.4, -0.5]))
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), a);
        }
    }
}
