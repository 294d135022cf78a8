//! Minimal numerical core: the two context heads, the cosine max-margin loss,
//! Adam, parameter checkpoints and finite-difference gradient checks.
//!
//! Everything is generic over [`Scalar`] so the same code runs in `f32` for
//! training and `f64` for gradient checks.

mod adam;
mod gradcheck;
mod layers;
mod loss;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, loss_grad_check, GradCheckReport, LossTarget, REL_ERROR_FLOOR};
pub use layers::{Conv3, Dense};
pub use loss::{cosine, margin_loss};

use std::fmt;
use std::iter::Sum;
use std::path::Path;
use std::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::SLOTS;
use crate::seed::rng_from;
use layers::{relu, relu_backward};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape error: {0}")]
    ShapeError(String),
    #[error("zero-norm vector: cosine similarity is undefined")]
    ZeroVector,
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

/// Floating-point type the networks are evaluated in.
pub trait Scalar: Float + Sum + Send + Sync + fmt::Debug + 'static {
    fn of(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Cnn,
    Ffnn,
}

impl ModelKind {
    pub fn code(self) -> u32 {
        match self {
            ModelKind::Cnn => 0,
            ModelKind::Ffnn => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(ModelKind::Cnn),
            1 => Some(ModelKind::Ffnn),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Ffnn => "ffnn",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(ModelKind::Cnn),
            "ffnn" => Ok(ModelKind::Ffnn),
            other => Err(format!("unknown model `{other}` (expected cnn|ffnn)")),
        }
    }
}

/// Three valid 3×3 convolutions over the 7×dim input (7→5→3→1 rows,
/// dim→dim-2→dim-4→dim-6 columns), each followed by a rectifier, then a
/// dense layer from dim-6 back to dim.
#[derive(Debug, Clone, PartialEq)]
pub struct Cnn<T> {
    pub dim: usize,
    pub convs: [Conv3<T>; 3],
    pub dense: Dense<T>,
}

impl<T: Scalar> Cnn<T> {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        check_dim(ModelKind::Cnn, dim)?;
        let mut rng = rng_from(seed);
        let convs = [Conv3::init(&mut rng), Conv3::init(&mut rng), Conv3::init(&mut rng)];
        let dense = Dense::init(&mut rng, dim - 6, dim);
        Ok(Cnn { dim, convs, dense })
    }

    /// (rows, cols) after each convolution.
    pub fn conv_shapes(&self) -> [(usize, usize); 3] {
        cnn_shapes(self.dim)
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        check_input(x, self.dim)?;
        Ok(self.trace(x).1)
    }

    fn trace(&self, x: &[T]) -> (CnnTrace<T>, Vec<T>) {
        let mut pre = Vec::with_capacity(3);
        let mut post: Vec<Vec<T>> = Vec::with_capacity(3);
        let (mut h, mut w) = (SLOTS, self.dim);
        for conv in &self.convs {
            let input = post.last().map(Vec::as_slice).unwrap_or(x);
            let z = conv.forward(input, h, w);
            post.push(relu(&z));
            pre.push(z);
            h -= 2;
            w -= 2;
        }
        let out = self.dense.forward(post.last().expect("three layers"));
        (CnnTrace { pre, post }, out)
    }

    fn backward(&self, x: &[T], trace: &CnnTrace<T>, d_out: &[T], grads: &mut Cnn<T>) {
        let flat = &trace.post[2];
        let mut d_act = self.dense.backward(flat, d_out, &mut grads.dense, true).expect("input grad");
        let shapes = [(SLOTS, self.dim), (SLOTS - 2, self.dim - 2), (SLOTS - 4, self.dim - 4)];
        for layer in (0..3).rev() {
            let dz = relu_backward(&trace.pre[layer], &d_act);
            let input = if layer == 0 { x } else { &trace.post[layer - 1] };
            let (h, w) = shapes[layer];
            let dx = self.convs[layer].backward(input, h, w, &dz, &mut grads.convs[layer], layer > 0);
            if let Some(dx) = dx {
                d_act = dx;
            }
        }
    }

    fn blobs(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = Vec::with_capacity(8);
        for conv in &self.convs {
            out.push(&conv.kernel);
            out.push(&conv.bias);
        }
        out.push(&self.dense.weight);
        out.push(&self.dense.bias);
        out
    }

    fn blobs_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(8);
        for conv in &mut self.convs {
            out.push(&mut conv.kernel);
            out.push(&mut conv.bias);
        }
        out.push(&mut self.dense.weight);
        out.push(&mut self.dense.bias);
        out
    }

    fn zeros(dim: usize) -> Self {
        Cnn { dim, convs: [Conv3::zeros(), Conv3::zeros(), Conv3::zeros()], dense: Dense::zeros(dim - 6, dim) }
    }
}

fn cnn_shapes(dim: usize) -> [(usize, usize); 3] {
    [(SLOTS - 2, dim - 2), (SLOTS - 4, dim - 4), (SLOTS - 6, dim - 6)]
}

struct CnnTrace<T> {
    pre: Vec<Vec<T>>,
    post: Vec<Vec<T>>,
}

/// Hidden width of the feed-forward head: floor(3.5 · dim).
pub fn ffnn_hidden(dim: usize) -> usize {
    dim * 7 / 2
}

/// Flattened 7·dim input → ⌊3.5·dim⌋ → ⌊3.5·dim⌋ → dim, rectifiers after the
/// first two layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Ffnn<T> {
    pub dim: usize,
    pub layers: [Dense<T>; 3],
}

impl<T: Scalar> Ffnn<T> {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        check_dim(ModelKind::Ffnn, dim)?;
        let mut rng = rng_from(seed);
        let hidden = ffnn_hidden(dim);
        let layers = [
            Dense::init(&mut rng, SLOTS * dim, hidden),
            Dense::init(&mut rng, hidden, hidden),
            Dense::init(&mut rng, hidden, dim),
        ];
        Ok(Ffnn { dim, layers })
    }

    pub fn widths(&self) -> [usize; 4] {
        [self.layers[0].inputs, self.layers[0].outputs, self.layers[1].outputs, self.layers[2].outputs]
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        check_input(x, self.dim)?;
        Ok(self.trace(x).1)
    }

    fn trace(&self, x: &[T]) -> (FfnnTrace<T>, Vec<T>) {
        let z1 = self.layers[0].forward(x);
        let a1 = relu(&z1);
        let z2 = self.layers[1].forward(&a1);
        let a2 = relu(&z2);
        let out = self.layers[2].forward(&a2);
        (FfnnTrace { z1, a1, z2, a2 }, out)
    }

    fn backward(&self, x: &[T], trace: &FfnnTrace<T>, d_out: &[T], grads: &mut Ffnn<T>) {
        let [g0, g1, g2] = &mut grads.layers;
        let da2 = self.layers[2].backward(&trace.a2, d_out, g2, true).expect("input grad");
        let dz2 = relu_backward(&trace.z2, &da2);
        let da1 = self.layers[1].backward(&trace.a1, &dz2, g1, true).expect("input grad");
        let dz1 = relu_backward(&trace.z1, &da1);
        self.layers[0].backward(x, &dz1, g0, false);
    }

    fn blobs(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()]).collect()
    }

    fn blobs_mut(&mut self) -> Vec<&mut [T]> {
        self.layers.iter_mut().flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()]).collect()
    }

    fn zeros(dim: usize) -> Self {
        let hidden = ffnn_hidden(dim);
        Ffnn {
            dim,
            layers: [Dense::zeros(SLOTS * dim, hidden), Dense::zeros(hidden, hidden), Dense::zeros(hidden, dim)],
        }
    }
}

struct FfnnTrace<T> {
    z1: Vec<T>,
    a1: Vec<T>,
    z2: Vec<T>,
    a2: Vec<T>,
}

fn check_dim(kind: ModelKind, dim: usize) -> Result<()> {
    let min = match kind {
        ModelKind::Cnn => 7,
        ModelKind::Ffnn => 1,
    };
    if dim < min {
        return Err(NnError::ShapeError(format!("{kind} needs dim >= {min}, got {dim}")));
    }
    Ok(())
}

fn check_input<T>(x: &[T], dim: usize) -> Result<()> {
    if x.len() != SLOTS * dim {
        return Err(NnError::ShapeError(format!("input has {} values, expected {SLOTS}x{dim}", x.len())));
    }
    Ok(())
}

/// Either head, behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Network<T> {
    Cnn(Cnn<T>),
    Ffnn(Ffnn<T>),
}

/// Intermediate activations kept for the backward pass.
pub struct Trace<T> {
    inner: TraceInner<T>,
    pub output: Vec<T>,
}

enum TraceInner<T> {
    Cnn(CnnTrace<T>),
    Ffnn(FfnnTrace<T>),
}

impl<T: Scalar> Network<T> {
    pub fn new(kind: ModelKind, dim: usize, seed: u64) -> Result<Self> {
        Ok(match kind {
            ModelKind::Cnn => Network::Cnn(Cnn::new(dim, seed)?),
            ModelKind::Ffnn => Network::Ffnn(Ffnn::new(dim, seed)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Network::Cnn(_) => ModelKind::Cnn,
            Network::Ffnn(_) => ModelKind::Ffnn,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Network::Cnn(m) => m.dim,
            Network::Ffnn(m) => m.dim,
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        match self {
            Network::Cnn(m) => m.forward(x),
            Network::Ffnn(m) => m.forward(x),
        }
    }

    pub fn forward_trace(&self, x: &[T]) -> Result<Trace<T>> {
        check_input(x, self.dim())?;
        Ok(match self {
            Network::Cnn(m) => {
                let (t, output) = m.trace(x);
                Trace { inner: TraceInner::Cnn(t), output }
            }
            Network::Ffnn(m) => {
                let (t, output) = m.trace(x);
                Trace { inner: TraceInner::Ffnn(t), output }
            }
        })
    }

    /// Accumulate dL/dθ into `grads` given dL/d(output).
    pub fn backward(&self, x: &[T], trace: &Trace<T>, d_out: &[T], grads: &mut Network<T>) -> Result<()> {
        if d_out.len() != self.dim() {
            return Err(NnError::ShapeError(format!(
                "output gradient has {} values, expected {}",
                d_out.len(),
                self.dim()
            )));
        }
        match (self, &trace.inner, grads) {
            (Network::Cnn(m), TraceInner::Cnn(t), Network::Cnn(g)) => m.backward(x, t, d_out, g),
            (Network::Ffnn(m), TraceInner::Ffnn(t), Network::Ffnn(g)) => m.backward(x, t, d_out, g),
            _ => return Err(NnError::ShapeError("network, trace and gradient kinds differ".into())),
        }
        Ok(())
    }

    /// Same architecture, all parameters zero.
    pub fn zeros_like(&self) -> Network<T> {
        match self {
            Network::Cnn(m) => Network::Cnn(Cnn::zeros(m.dim)),
            Network::Ffnn(m) => Network::Ffnn(Ffnn::zeros(m.dim)),
        }
    }

    /// Parameter buffers in declaration order.
    pub fn blobs(&self) -> Vec<&[T]> {
        match self {
            Network::Cnn(m) => m.blobs(),
            Network::Ffnn(m) => m.blobs(),
        }
    }

    pub fn blobs_mut(&mut self) -> Vec<&mut [T]> {
        match self {
            Network::Cnn(m) => m.blobs_mut(),
            Network::Ffnn(m) => m.blobs_mut(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.blobs().iter().map(|b| b.len()).sum()
    }

    pub fn fill_zero(&mut self) {
        for blob in self.blobs_mut() {
            blob.iter_mut().for_each(|x| *x = T::zero());
        }
    }

    /// Multiply every parameter by `factor`.
    pub fn scale(&mut self, factor: T) {
        for blob in self.blobs_mut() {
            blob.iter_mut().for_each(|x| *x = *x * factor);
        }
    }

    /// Element-wise convert to another precision.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let mut out: Network<U> = match self {
            Network::Cnn(m) => Network::Cnn(Cnn::zeros(m.dim)),
            Network::Ffnn(m) => Network::Ffnn(Ffnn::zeros(m.dim)),
        };
        for (dst, src) in out.blobs_mut().into_iter().zip(self.blobs()) {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = U::of(s.to_f64());
            }
        }
        out
    }
}

/// Checkpoint magic.
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"BLMP";
pub const CHECKPOINT_VERSION: u32 = 1;

impl Network<f32> {
    /// `"BLMP"`, u32 version, u32 model kind, u32 dim, then each parameter
    /// buffer in declaration order as little-endian f32.
    pub fn to_checkpoint(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.param_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.kind().code().to_le_bytes());
        out.extend_from_slice(&(self.dim() as u32).to_le_bytes());
        for blob in self.blobs() {
            for x in blob {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_checkpoint(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| NnError::BadCheckpoint(m.to_string());
        if bytes.len() < 16 {
            return Err(bad("file shorter than header"));
        }
        if &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(bad("bad magic"));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        if word(4) != CHECKPOINT_VERSION {
            return Err(NnError::BadCheckpoint(format!("unsupported version {}", word(4))));
        }
        let kind = ModelKind::from_code(word(8)).ok_or_else(|| bad("unknown model kind"))?;
        let dim = word(12) as usize;
        check_dim(kind, dim)?;
        let mut net = match kind {
            ModelKind::Cnn => Network::Cnn(Cnn::zeros(dim)),
            ModelKind::Ffnn => Network::Ffnn(Ffnn::zeros(dim)),
        };
        let expected = 16 + 4 * net.param_count();
        if bytes.len() != expected {
            return Err(NnError::BadCheckpoint(format!("expected {expected} bytes, found {}", bytes.len())));
        }
        let mut values = bytes[16..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
        for blob in net.blobs_mut() {
            for slot in blob.iter_mut() {
                *slot = values.next().expect("length checked");
            }
        }
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_checkpoint())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_input(dim: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed);
        (0..SLOTS * dim).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn cnn_dimension_chain_at_768() {
        // oracle: each valid 3x3 layer removes two rows and two columns
        let mut expected = vec![];
        let (mut h, mut w) = (7usize, 768usize);
        for _ in 0..3 {
            h -= 2;
            w -= 2;
            expected.push((h, w));
        }
        assert_eq!(expected, vec![(5, 766), (3, 764), (1, 762)]);
        let cnn = Cnn::<f32>::new(768, 1).unwrap();
        assert_eq!(cnn.conv_shapes().to_vec(), expected);
        assert_eq!((cnn.dense.inputs, cnn.dense.outputs), (762, 768));
        let out = cnn.forward(&vec![0.1f32; 7 * 768]).unwrap();
        assert_eq!(out.len(), 768);
    }

    #[test]
    fn cnn_parameter_count_at_768() {
        let net = Network::<f32>::new(ModelKind::Cnn, 768, 0).unwrap();
        assert_eq!(net.param_count(), 3 * (9 + 1) + 762 * 768 + 768);
        assert_eq!(net.param_count(), 586_014);
    }

    #[test]
    fn ffnn_widths_at_768() {
        let m = Ffnn::<f32>::new(768, 0).unwrap();
        assert_eq!(m.widths(), [5376, 2688, 2688, 768]);
        let net = Network::Ffnn(m);
        assert_eq!(net.param_count(), 5376 * 2688 + 2688 + 2688 * 2688 + 2688 + 2688 * 768 + 768);
    }

    #[test]
    fn zero_input_zero_bias_gives_zero_output() {
        for kind in [ModelKind::Cnn, ModelKind::Ffnn] {
            let mut net = Network::<f64>::new(kind, 16, 3).unwrap();
            match &mut net {
                Network::Cnn(m) => {
                    for c in &mut m.convs {
                        c.bias[0] = 0.0;
                    }
                    m.dense.bias.iter_mut().for_each(|b| *b = 0.0);
                }
                Network::Ffnn(m) => {
                    for l in &mut m.layers {
                        l.bias.iter_mut().for_each(|b| *b = 0.0);
                    }
                }
            }
            let out = net.forward(&vec![0.0; 7 * 16]).unwrap();
            assert!(out.iter().all(|&v| v == 0.0), "{kind}");
        }
    }

    #[test]
    fn forward_is_deterministic() {
        for kind in [ModelKind::Cnn, ModelKind::Ffnn] {
            let x = random_input(32, 5);
            let a = Network::<f64>::new(kind, 32, 9).unwrap().forward(&x).unwrap();
            let b = Network::<f64>::new(kind, 32, 9).unwrap().forward(&x).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ffnn_is_not_row_symmetric() {
        let net = Network::<f64>::new(ModelKind::Ffnn, 8, 2).unwrap();
        let x = random_input(8, 3);
        let mut swapped = x.clone();
        // swap rows 0 and 6
        for j in 0..8 {
            swapped.swap(j, 6 * 8 + j);
        }
        let a = net.forward(&x).unwrap();
        let b = net.forward(&swapped).unwrap();
        assert!(a.iter().zip(&b).any(|(p, q)| (p - q).abs() > 1e-9));
    }

    #[test]
    fn shape_errors() {
        let net = Network::<f64>::new(ModelKind::Cnn, 16, 0).unwrap();
        assert!(matches!(net.forward(&[0.0; 10]), Err(NnError::ShapeError(_))));
        assert!(Network::<f64>::new(ModelKind::Cnn, 6, 0).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        for kind in [ModelKind::Cnn, ModelKind::Ffnn] {
            let net = Network::<f32>::new(kind, 12, 4).unwrap();
            let bytes = net.to_checkpoint();
            assert_eq!(&bytes[..4], b"BLMP");
            let back = Network::from_checkpoint(&bytes).unwrap();
            assert_eq!(back, net);
            assert_eq!(back.to_checkpoint(), bytes);
            assert!(Network::from_checkpoint(&bytes[..bytes.len() - 1]).is_err());
        }
    }

    #[test]
    fn cast_round_trip() {
        let net = Network::<f32>::new(ModelKind::Cnn, 10, 1).unwrap();
        assert_eq!(net.cast::<f64>().cast::<f32>(), net);
    }
}
