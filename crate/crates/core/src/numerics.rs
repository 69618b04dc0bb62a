//! One-hidden-layer perceptron with analytic gradients, Adam, and the two
//! training losses (squared Bellman error and logistic cross-entropy).
//!
//! Parameters live in one flat buffer laid out as `w1 | b1 | w2 | b2`, all
//! row-major. [`Gradients`] and the Adam moments share that layout, so the
//! optimizer is a single pass over contiguous slices.

use std::io::{Read, Write};

use rand::Rng;
use thiserror::Error;

/// Probability clamp applied before cross-entropy.
pub const PROB_CLAMP: f64 = 1e-7;

const MAGIC: &[u8; 6] = b"IFMLP1";

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("dimension mismatch: expected {expected} {what}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("shape mismatch between parameters and gradients/optimizer state")]
    Shape,
    #[error("probability {0} outside (0, 1)")]
    Probability(f64),
    #[error("label must be 0 or 1, got {0}")]
    Label(f64),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Output head of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Raw affine output (Q-values).
    Identity,
    /// Logistic output in (0, 1) (fear probability).
    Logistic,
}

impl Head {
    fn tag(self) -> u32 {
        match self {
            Head::Identity => 0,
            Head::Logistic => 1,
        }
    }

    fn from_tag(tag: u32) -> Option<Head> {
        match tag {
            0 => Some(Head::Identity),
            1 => Some(Head::Logistic),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Head::Identity => "identity",
            Head::Logistic => "logistic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl Shape {
    pub fn new(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            input,
            hidden,
            output,
        }
    }

    fn w1_len(&self) -> usize {
        self.hidden * self.input
    }

    fn w2_len(&self) -> usize {
        self.output * self.hidden
    }

    pub fn num_params(&self) -> usize {
        self.w1_len() + self.hidden + self.w2_len() + self.output
    }
}

/// Split a flat parameter-layout buffer into `(w1, b1, w2, b2)`.
fn split<'a>(shape: &Shape, data: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64], &'a [f64]) {
    let (w1, rest) = data.split_at(shape.w1_len());
    let (b1, rest) = rest.split_at(shape.hidden);
    let (w2, b2) = rest.split_at(shape.w2_len());
    (w1, b1, w2, b2)
}

fn split_mut<'a>(shape: &Shape, data: &'a mut [f64]) -> (&'a mut [f64], &'a mut [f64], &'a mut [f64], &'a mut [f64]) {
    let (w1, rest) = data.split_at_mut(shape.w1_len());
    let (b1, rest) = rest.split_at_mut(shape.hidden);
    let (w2, b2) = rest.split_at_mut(shape.w2_len());
    (w1, b1, w2, b2)
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Weights of a dense `input -> hidden (ReLU) -> output` network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    shape: Shape,
    head: Head,
    data: Vec<f64>,
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    /// Output before the head is applied.
    pub logits: Vec<f64>,
    pub output: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(shape: Shape, head: Head) -> Self {
        Self {
            shape,
            head,
            data: vec![0.0; shape.num_params()],
        }
    }

    /// Uniform initialization in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` per layer.
    pub fn init<R: Rng + ?Sized>(shape: Shape, head: Head, rng: &mut R) -> Self {
        let mut p = Self::zeros(shape, head);
        let bound1 = 1.0 / (shape.input.max(1) as f64).sqrt();
        let bound2 = 1.0 / (shape.hidden.max(1) as f64).sqrt();
        let (w1, b1, w2, b2) = split_mut(&shape, &mut p.data);
        for x in w1.iter_mut().chain(b1.iter_mut()) {
            *x = rng.random_range(-bound1..=bound1);
        }
        for x in w2.iter_mut().chain(b2.iter_mut()) {
            *x = rng.random_range(-bound2..=bound2);
        }
        p
    }

    /// Build from explicit layer matrices (row-major).
    pub fn from_parts(
        shape: Shape,
        head: Head,
        w1: &[f64],
        b1: &[f64],
        w2: &[f64],
        b2: &[f64],
    ) -> Result<Self, NumericsError> {
        check_len("w1 entries", shape.w1_len(), w1.len())?;
        check_len("b1 entries", shape.hidden, b1.len())?;
        check_len("w2 entries", shape.w2_len(), w2.len())?;
        check_len("b2 entries", shape.output, b2.len())?;
        let mut data = Vec::with_capacity(shape.num_params());
        data.extend_from_slice(w1);
        data.extend_from_slice(b1);
        data.extend_from_slice(w2);
        data.extend_from_slice(b2);
        Ok(Self { shape, head, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn w1(&self) -> &[f64] {
        split(&self.shape, &self.data).0
    }

    pub fn b1(&self) -> &[f64] {
        split(&self.shape, &self.data).1
    }

    pub fn w2(&self) -> &[f64] {
        split(&self.shape, &self.data).2
    }

    pub fn b2(&self) -> &[f64] {
        split(&self.shape, &self.data).3
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NumericsError> {
        Ok(self.forward_cached(x)?.output)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache, NumericsError> {
        let s = self.shape;
        check_len("inputs", s.input, x.len())?;
        let (w1, b1, w2, b2) = split(&s, &self.data);
        let hidden_pre: Vec<f64> = w1
            .chunks_exact(s.input)
            .zip(b1)
            .map(|(row, b)| b + dot(row, x))
            .collect();
        let hidden: Vec<f64> = hidden_pre.iter().map(|&z| z.max(0.0)).collect();
        let logits: Vec<f64> = w2
            .chunks_exact(s.hidden)
            .zip(b2)
            .map(|(row, b)| b + dot(row, &hidden))
            .collect();
        let output = match self.head {
            Head::Identity => logits.clone(),
            Head::Logistic => logits.iter().map(|&z| sigmoid(z)).collect(),
        };
        Ok(ForwardCache {
            hidden_pre,
            hidden,
            logits,
            output,
        })
    }

    /// Gradient of `upstream . output` with respect to every parameter.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Gradients, NumericsError> {
        check_len("upstream entries", self.shape.output, upstream.len())?;
        let cache = self.forward_cached(x)?;
        let dlogits: Vec<f64> = match self.head {
            Head::Identity => upstream.to_vec(),
            Head::Logistic => upstream
                .iter()
                .zip(&cache.output)
                .map(|(u, p)| u * p * (1.0 - p))
                .collect(),
        };
        let mut grads = Gradients::zeros(self.shape);
        self.accumulate_from_logits(x, &cache, &dlogits, 1.0, &mut grads)?;
        Ok(grads)
    }

    /// Accumulate `scale * d(dlogits . logits)/dparams` into `grads`, given a
    /// cotangent on the pre-head outputs. Used for fused losses.
    pub fn accumulate_from_logits(
        &self,
        x: &[f64],
        cache: &ForwardCache,
        dlogits: &[f64],
        scale: f64,
        grads: &mut Gradients,
    ) -> Result<(), NumericsError> {
        let s = self.shape;
        check_len("inputs", s.input, x.len())?;
        check_len("logit cotangents", s.output, dlogits.len())?;
        if grads.shape != s {
            return Err(NumericsError::Shape);
        }
        let w2 = self.w2();
        let (gw1, gb1, gw2, gb2) = split_mut(&s, &mut grads.data);
        let mut dhidden = vec![0.0; s.hidden];
        for (o, &d) in dlogits.iter().enumerate() {
            let d = d * scale;
            if d == 0.0 {
                continue;
            }
            gb2[o] += d;
            let grow = &mut gw2[o * s.hidden..(o + 1) * s.hidden];
            let wrow = &w2[o * s.hidden..(o + 1) * s.hidden];
            for h in 0..s.hidden {
                grow[h] += d * cache.hidden[h];
                dhidden[h] += d * wrow[h];
            }
        }
        for h in 0..s.hidden {
            if cache.hidden_pre[h] <= 0.0 || dhidden[h] == 0.0 {
                continue;
            }
            let d = dhidden[h];
            gb1[h] += d;
            for (g, xi) in gw1[h * s.input..(h + 1) * s.input].iter_mut().zip(x) {
                *g += d * xi;
            }
        }
        Ok(())
    }

    /// Write the binary snapshot: magic, `input hidden output head` as u32 LE,
    /// then every parameter as f64 LE in `w1 b1 w2 b2` order.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), NumericsError> {
        w.write_all(MAGIC)?;
        for dim in [self.shape.input, self.shape.hidden, self.shape.output] {
            let dim = u32::try_from(dim)
                .map_err(|_| NumericsError::Snapshot(format!("dimension {dim} exceeds u32")))?;
            w.write_all(&dim.to_le_bytes())?;
        }
        w.write_all(&self.head.tag().to_le_bytes())?;
        for x in &self.data {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, NumericsError> {
        let mut magic = [0u8; 6];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(NumericsError::Snapshot("bad magic".into()));
        }
        let mut word = [0u8; 4];
        let mut dims = [0usize; 4];
        for d in dims.iter_mut() {
            r.read_exact(&mut word)?;
            *d = u32::from_le_bytes(word) as usize;
        }
        let head = Head::from_tag(dims[3] as u32)
            .ok_or_else(|| NumericsError::Snapshot(format!("unknown head tag {}", dims[3])))?;
        let shape = Shape::new(dims[0], dims[1], dims[2]);
        let mut data = Vec::with_capacity(shape.num_params());
        let mut buf = [0u8; 8];
        for _ in 0..shape.num_params() {
            r.read_exact(&mut buf)?;
            data.push(f64::from_le_bytes(buf));
        }
        Ok(Self { shape, head, data })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(22 + 8 * self.data.len());
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), NumericsError> {
    if expected == got {
        Ok(())
    } else {
        Err(NumericsError::Dimension {
            what,
            expected,
            got,
        })
    }
}

/// Parameter-shaped gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    shape: Shape,
    data: Vec<f64>,
}

impl Gradients {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.num_params()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn w2(&self) -> &[f64] {
        split(&self.shape, &self.data).2
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|g| *g *= k);
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&g| g == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }
}

/// Adam moment estimates for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(shape: Shape, config: AdamConfig) -> Self {
        Self {
            config,
            m: vec![0.0; shape.num_params()],
            v: vec![0.0; shape.num_params()],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn second_moments(&self) -> &[f64] {
        &self.v
    }

    /// One bias-corrected Adam update of `params` along `grads`.
    pub fn step(&mut self, params: &mut MlpParams, grads: &Gradients) -> Result<(), NumericsError> {
        let n = params.data.len();
        if grads.shape != params.shape || self.m.len() != n {
            return Err(NumericsError::Shape);
        }
        let AdamConfig {
            alpha,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for i in 0..n {
            let g = grads.data[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params.data[i] -= alpha * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// `(pred - target)^2` and its derivative in `pred`.
pub fn squared_error(pred: f64, target: f64) -> (f64, f64) {
    let d = pred - target;
    (d * d, 2.0 * d)
}

/// Binary cross-entropy of a probability against a `{0, 1}` label, with the
/// probability clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub fn bce(pred: f64, label: f64) -> Result<(f64, f64), NumericsError> {
    if !(pred > 0.0 && pred < 1.0) {
        return Err(NumericsError::Probability(pred));
    }
    check_label(label)?;
    let p = pred.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let loss = -(label * p.ln() + (1.0 - label) * (1.0 - p).ln());
    let dpred = -label / p + (1.0 - label) / (1.0 - p);
    Ok((loss, dpred))
}

/// Cross-entropy fused with the logistic head: takes the logit `z` and
/// returns the loss and `d loss / d z = p - label`.
pub fn bce_with_logit(z: f64, label: f64) -> Result<(f64, f64), NumericsError> {
    check_label(label)?;
    let p = sigmoid(z).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let loss = -(label * p.ln() + (1.0 - label) * (1.0 - p).ln());
    Ok((loss, sigmoid(z) - label))
}

fn check_label(label: f64) -> Result<(), NumericsError> {
    if label == 0.0 || label == 1.0 {
        Ok(())
    } else {
        Err(NumericsError::Label(label))
    }
}
