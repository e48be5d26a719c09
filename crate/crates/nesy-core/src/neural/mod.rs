//! Minimal dense-tensor MLP stack with reverse-mode gradients.
//!
//! Layers are restricted to Linear / ReLU / Softmax; perception-side
//! preprocessing (cropping, downscaling) lives in the task code. Everything
//! is generic over the scalar type through [`num_traits::Float`]; the crate
//! root exports `f64` aliases.

mod tensor;

pub use tensor::Tensor;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("backward called without a cached forward pass")]
    NoCachedForward,
    #[error("target class {target} out of range for {len} outputs")]
    BadTarget { target: usize, len: usize },
    #[error("malformed checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Linear { input: usize, output: usize },
    ReLU,
    Softmax,
}

/// Activations recorded by a forward pass: the input to every layer plus the
/// final output. Owned by the caller so one network can serve several
/// forward passes per sample before backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    inputs: Vec<Vec<F>>,
    output: Vec<F>,
}

/// Feedforward network for one neural head. Parameters and gradient buffers
/// are parallel vectors: each Linear layer contributes a weight tensor
/// (output×input, row-major) followed by a bias tensor.
pub struct Network<F> {
    pub head_id: String,
    pub specs: Vec<LayerSpec>,
    pub params: Vec<Tensor<F>>,
    pub grads: Vec<Tensor<F>>,
    last_cache: Option<ForwardCache<F>>,
}

impl<F: Float> Network<F> {
    /// Kaiming-uniform weights (bound √(6/fan_in)), zero biases, seeded.
    pub fn new(head_id: &str, specs: Vec<LayerSpec>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        let mut grads = Vec::new();
        for spec in &specs {
            if let LayerSpec::Linear { input, output } = spec {
                let bound = (6.0 / *input as f64).sqrt();
                let w: Vec<F> = (0..input * output)
                    .map(|_| F::from(rng.gen_range(-bound..bound)).unwrap())
                    .collect();
                params.push(Tensor::from_vec(vec![*output, *input], w).unwrap());
                grads.push(Tensor::zeros(vec![*output, *input]));
                params.push(Tensor::zeros(vec![*output]));
                grads.push(Tensor::zeros(vec![*output]));
            }
        }
        Network { head_id: head_id.to_string(), specs, params, grads, last_cache: None }
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.specs.iter().find_map(|s| match s {
            LayerSpec::Linear { input, .. } => Some(*input),
            _ => None,
        })
    }

    pub fn output_dim(&self) -> Option<usize> {
        self.specs.iter().rev().find_map(|s| match s {
            LayerSpec::Linear { output, .. } => Some(*output),
            _ => None,
        })
    }

    /// Forward pass returning the output and the activation cache.
    pub fn forward_cached(&self, input: &[F]) -> Result<(Vec<F>, ForwardCache<F>), NeuralError> {
        if let Some(dim) = self.input_dim() {
            if input.len() != dim {
                return Err(NeuralError::ShapeMismatch { expected: dim, got: input.len() });
            }
        }
        let mut inputs = Vec::with_capacity(self.specs.len());
        let mut x = input.to_vec();
        let mut pi = 0;
        for spec in &self.specs {
            inputs.push(x.clone());
            x = match spec {
                LayerSpec::Linear { input: ni, output: no } => {
                    if x.len() != *ni {
                        return Err(NeuralError::ShapeMismatch { expected: *ni, got: x.len() });
                    }
                    let w = &self.params[pi];
                    let b = &self.params[pi + 1];
                    pi += 2;
                    (0..*no)
                        .map(|o| {
                            let mut acc = b.data[o];
                            for i in 0..*ni {
                                acc = acc + w.data[o * ni + i] * x[i];
                            }
                            acc
                        })
                        .collect()
                }
                LayerSpec::ReLU => x.iter().map(|&v| if v > F::zero() { v } else { F::zero() }).collect(),
                LayerSpec::Softmax => softmax(&x),
            };
        }
        let cache = ForwardCache { inputs, output: x.clone() };
        Ok((x, cache))
    }

    /// Forward pass that stores the cache on the network for a following
    /// [`Network::backward`].
    pub fn forward(&mut self, input: &[F]) -> Result<Vec<F>, NeuralError> {
        let (out, cache) = self.forward_cached(input)?;
        self.last_cache = Some(cache);
        Ok(out)
    }

    /// Reverse pass through a caller-held cache; accumulates into `grads`
    /// and returns the gradient with respect to the input.
    pub fn backward_cached(&mut self, cache: &ForwardCache<F>, output_grad: &[F]) -> Result<Vec<F>, NeuralError> {
        if output_grad.len() != cache.output.len() {
            return Err(NeuralError::ShapeMismatch { expected: cache.output.len(), got: output_grad.len() });
        }
        let mut gy = output_grad.to_vec();
        // Walk layers backwards, tracking the param index from the end.
        let mut pi = self.params.len();
        let mut outputs_after: Vec<&Vec<F>> = cache.inputs.iter().skip(1).collect();
        outputs_after.push(&cache.output);
        for (li, spec) in self.specs.iter().enumerate().rev() {
            let x = &cache.inputs[li];
            let y = outputs_after[li];
            gy = match spec {
                LayerSpec::Linear { input: ni, output: no } => {
                    pi -= 2;
                    let w = &self.params[pi];
                    let mut gx = vec![F::zero(); *ni];
                    for o in 0..*no {
                        let g = gy[o];
                        self.grads[pi + 1].data[o] = self.grads[pi + 1].data[o] + g;
                        for i in 0..*ni {
                            self.grads[pi].data[o * ni + i] = self.grads[pi].data[o * ni + i] + g * x[i];
                            gx[i] = gx[i] + w.data[o * ni + i] * g;
                        }
                    }
                    gx
                }
                LayerSpec::ReLU => {
                    x.iter().zip(&gy).map(|(&v, &g)| if v > F::zero() { g } else { F::zero() }).collect()
                }
                LayerSpec::Softmax => {
                    let dot = y.iter().zip(&gy).fold(F::zero(), |acc, (&yi, &gi)| acc + yi * gi);
                    y.iter().zip(&gy).map(|(&yi, &gi)| yi * (gi - dot)).collect()
                }
            };
        }
        Ok(gy)
    }

    /// Reverse pass through the cache stored by the last [`Network::forward`].
    pub fn backward(&mut self, output_grad: &[F]) -> Result<Vec<F>, NeuralError> {
        let cache = self.last_cache.take().ok_or(NeuralError::NoCachedForward)?;
        let gx = self.backward_cached(&cache, output_grad)?;
        self.last_cache = Some(cache);
        Ok(gx)
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            for v in &mut g.data {
                *v = F::zero();
            }
        }
    }
}

fn softmax<F: Float>(x: &[F]) -> Vec<F> {
    let max = x.iter().cloned().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum = exps.iter().fold(F::zero(), |a, &b| a + b);
    exps.into_iter().map(|e| e / sum).collect()
}

/// Negative log-likelihood on a normalized probability vector.
/// Returns the loss and its gradient with respect to the probabilities.
pub fn nll_loss<F: Float>(predicted: &[F], target: usize) -> Result<(F, Vec<F>), NeuralError> {
    if target >= predicted.len() {
        return Err(NeuralError::BadTarget { target, len: predicted.len() });
    }
    let floor = F::from(1e-12).unwrap();
    let p = predicted[target].max(floor);
    let mut grad = vec![F::zero(); predicted.len()];
    grad[target] = -F::one() / p;
    Ok((-p.ln(), grad))
}

pub enum OptimizerKind {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

pub struct Optimizer<F> {
    pub kind: OptimizerKind,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    t: u64,
}

impl<F: Float> Optimizer<F> {
    pub fn new(kind: OptimizerKind) -> Self {
        Optimizer { kind, m: Vec::new(), v: Vec::new(), t: 0 }
    }

    pub fn step(&mut self, net: &mut Network<F>) {
        match self.kind {
            OptimizerKind::Sgd { lr } => {
                let lr = F::from(lr).unwrap();
                for (p, g) in net.params.iter_mut().zip(&net.grads) {
                    for (pv, gv) in p.data.iter_mut().zip(&g.data) {
                        *pv = *pv - lr * *gv;
                    }
                }
            }
            OptimizerKind::Adam { lr, beta1, beta2, eps } => {
                if self.m.is_empty() {
                    self.m = net.params.iter().map(|p| vec![F::zero(); p.data.len()]).collect();
                    self.v = net.params.iter().map(|p| vec![F::zero(); p.data.len()]).collect();
                }
                self.t += 1;
                let (b1, b2) = (F::from(beta1).unwrap(), F::from(beta2).unwrap());
                let lr = F::from(lr).unwrap();
                let eps = F::from(eps).unwrap();
                let bc1 = F::one() - F::from(beta1.powi(self.t as i32)).unwrap();
                let bc2 = F::one() - F::from(beta2.powi(self.t as i32)).unwrap();
                for (idx, (p, g)) in net.params.iter_mut().zip(&net.grads).enumerate() {
                    for i in 0..p.data.len() {
                        let gv = g.data[i];
                        self.m[idx][i] = b1 * self.m[idx][i] + (F::one() - b1) * gv;
                        self.v[idx][i] = b2 * self.v[idx][i] + (F::one() - b2) * gv * gv;
                        let mhat = self.m[idx][i] / bc1;
                        let vhat = self.v[idx][i] / bc2;
                        p.data[i] = p.data[i] - lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"NSYN";
const CHECKPOINT_VERSION: u32 = 1;

impl<F: Float> Network<F> {
    /// Serialize: magic, version, head id, layer specs, f64 parameters,
    /// all integers and floats little-endian.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<(), NeuralError> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.head_id.len() as u32).to_le_bytes())?;
        w.write_all(self.head_id.as_bytes())?;
        w.write_all(&(self.specs.len() as u32).to_le_bytes())?;
        let mut pi = 0;
        for spec in &self.specs {
            match spec {
                LayerSpec::Linear { input, output } => {
                    w.write_all(&[0u8])?;
                    w.write_all(&(*input as u32).to_le_bytes())?;
                    w.write_all(&(*output as u32).to_le_bytes())?;
                    for t in [&self.params[pi], &self.params[pi + 1]] {
                        for v in &t.data {
                            w.write_all(&v.to_f64().unwrap().to_le_bytes())?;
                        }
                    }
                    pi += 2;
                }
                LayerSpec::ReLU => w.write_all(&[1u8])?,
                LayerSpec::Softmax => w.write_all(&[2u8])?,
            }
        }
        Ok(())
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self, NeuralError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(NeuralError::BadCheckpoint("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(NeuralError::BadCheckpoint(format!("unsupported version {version}")));
        }
        let name_len = read_u32(r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let head_id =
            String::from_utf8(name).map_err(|_| NeuralError::BadCheckpoint("head id not utf-8".into()))?;
        let layer_count = read_u32(r)? as usize;
        let mut specs = Vec::with_capacity(layer_count);
        let mut params = Vec::new();
        let mut grads = Vec::new();
        for _ in 0..layer_count {
            let mut tag = [0u8; 1];
            r.read_exact(&mut tag)?;
            match tag[0] {
                0 => {
                    let input = read_u32(r)? as usize;
                    let output = read_u32(r)? as usize;
                    let mut read_tensor = |shape: Vec<usize>| -> Result<Tensor<F>, NeuralError> {
                        let n: usize = shape.iter().product();
                        let mut data = Vec::with_capacity(n);
                        for _ in 0..n {
                            let mut buf = [0u8; 8];
                            r.read_exact(&mut buf)?;
                            data.push(F::from(f64::from_le_bytes(buf)).unwrap());
                        }
                        Ok(Tensor::from_vec(shape, data).unwrap())
                    };
                    let w = read_tensor(vec![output, input])?;
                    let b = read_tensor(vec![output])?;
                    grads.push(Tensor::zeros(vec![output, input]));
                    grads.push(Tensor::zeros(vec![output]));
                    params.push(w);
                    params.push(b);
                    specs.push(LayerSpec::Linear { input, output });
                }
                1 => specs.push(LayerSpec::ReLU),
                2 => specs.push(LayerSpec::Softmax),
                t => return Err(NeuralError::BadCheckpoint(format!("unknown layer tag {t}"))),
            }
        }
        Ok(Network { head_id, specs, params, grads, last_cache: None })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NeuralError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}
