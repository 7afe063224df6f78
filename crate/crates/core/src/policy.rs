//! Tanh-squashed diagonal Gaussian policy on top of a small MLP.
//!
//! The network maps a normalized observation to a per-ticker Gaussian mean;
//! a free `log_std` vector sets the spread. Actions are `tanh(u)` with
//! `u ~ N(mean, std^2)`, so the log-density of an action `a` carries the
//! change-of-variables term `-ln(1 - a^2)`.
//!
//! All parameters live in one flat vector (see [`PolicyParams`]) so that
//! gradients, SGD steps and finite-difference checks are plain slice maths.
//! Gradients are computed by an explicit backward pass over the fixed graph:
//! affine → tanh → … → affine → Gaussian log-density.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::ActionVector;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Sampled actions are clipped to `|a| <= ACTION_LIMIT` so their density is finite.
pub const ACTION_LIMIT: f64 = 1.0 - 1e-6;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
const OBS_CLIP: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("action component {0} lies on the boundary of [-1, 1]")]
    ActionOnBoundary(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub action_dim: usize,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden: &[usize], action_dim: usize) -> Self {
        Self {
            input_dim,
            hidden: hidden.to_vec(),
            action_dim,
        }
    }

    /// `(fan_in, fan_out)` of every affine layer, output layer last.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden);
        dims.push(self.action_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers().iter().map(|(i, o)| i * o + o).sum::<usize>() + self.action_dim
    }

    fn log_std_offset(&self) -> usize {
        self.n_params() - self.action_dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Scale of the orthogonal hidden-layer initialization.
    pub init_gain: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            init_log_std: -0.5,
            init_gain: std::f64::consts::SQRT_2,
        }
    }
}

/// Flat parameter vector. Layout per layer: weights (`fan_out × fan_in`,
/// row-major) then biases; `log_std` comes last. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    arch: Architecture,
    data: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(arch: Architecture) -> Self {
        let data = vec![0.0; arch.n_params()];
        Self { arch, data }
    }

    pub fn from_vec(arch: Architecture, data: Vec<f64>) -> Result<Self, PolicyError> {
        if data.len() != arch.n_params() {
            return Err(PolicyError::DimensionMismatch {
                expected: arch.n_params(),
                got: data.len(),
            });
        }
        Ok(Self { arch, data })
    }

    /// Orthogonal hidden layers scaled by `init_gain`, zero output layer,
    /// zero biases, constant `log_std`.
    pub fn init(arch: Architecture, cfg: &PolicyConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(arch);
        let layers = p.arch.layers();
        let mut off = 0;
        for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
            if l + 1 < layers.len() {
                let w = orthogonal(fan_out, fan_in, &mut rng);
                for (dst, src) in p.data[off..off + fan_in * fan_out].iter_mut().zip(w) {
                    *dst = cfg.init_gain * src;
                }
            }
            off += fan_in * fan_out + fan_out;
        }
        let ls = p.arch.log_std_offset();
        p.data[ls..].fill(cfg.init_log_std.clamp(LOG_STD_MIN, LOG_STD_MAX));
        p
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.data[self.arch.log_std_offset()..]
    }

    pub fn log_std_mut(&mut self) -> &mut [f64] {
        let off = self.arch.log_std_offset();
        &mut self.data[off..]
    }

    pub fn clamp_log_std(&mut self) {
        for v in self.log_std_mut() {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `(weights, biases)` of affine layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let layers = self.arch.layers();
        let off: usize = layers[..l].iter().map(|(i, o)| i * o + o).sum();
        let (i, o) = layers[l];
        (
            &self.data[off..off + i * o],
            &self.data[off + i * o..off + i * o + o],
        )
    }

    /// Index of weight `(row, col)` of layer `l` in the flat vector.
    pub fn weight_index(&self, l: usize, row: usize, col: usize) -> usize {
        let layers = self.arch.layers();
        let off: usize = layers[..l].iter().map(|(i, o)| i * o + o).sum();
        off + row * layers[l].0 + col
    }
}

/// Rows (or columns, whichever is fewer) orthonormal; modified Gram-Schmidt.
fn orthogonal(rows: usize, cols: usize, rng: &mut impl Rng) -> Vec<f64> {
    let (n, len) = if rows <= cols {
        (rows, cols)
    } else {
        (cols, rows)
    };
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(n);
    while vecs.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for u in &vecs {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            vecs.push(v);
        }
    }
    let mut w = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            w[r * cols + c] = if rows <= cols { vecs[r][c] } else { vecs[c][r] };
        }
    }
    w
}

/// Frozen copy of the parameters that generated a batch of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySnapshot(PolicyParams);

impl PolicySnapshot {
    pub fn of(params: &PolicyParams) -> Self {
        Self(params.clone())
    }

    pub fn params(&self) -> &PolicyParams {
        &self.0
    }
}

/// Activations kept for the backward pass.
struct Trace {
    /// Inputs to each affine layer (observation first).
    inputs: Vec<Vec<f64>>,
    mean: Vec<f64>,
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(r, bias)| {
            bias + w[r * x.len()..(r + 1) * x.len()]
                .iter()
                .zip(x)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        })
        .collect()
}

fn trace(params: &PolicyParams, obs: &[f64]) -> Result<Trace, PolicyError> {
    if obs.len() != params.arch.input_dim {
        return Err(PolicyError::DimensionMismatch {
            expected: params.arch.input_dim,
            got: obs.len(),
        });
    }
    let n_layers = params.arch.layers().len();
    let mut inputs = Vec::with_capacity(n_layers);
    let mut x = obs.to_vec();
    for l in 0..n_layers {
        let (w, b) = params.layer(l);
        let mut y = affine(w, b, &x);
        if l + 1 < n_layers {
            y.iter_mut().for_each(|v| *v = v.tanh());
        }
        inputs.push(std::mem::replace(&mut x, y));
    }
    Ok(Trace { inputs, mean: x })
}

pub fn std_from_log(log_std: &[f64]) -> Vec<f64> {
    log_std
        .iter()
        .map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX).exp())
        .collect()
}

/// Pre-squash Gaussian mean and standard deviation.
pub fn forward(params: &PolicyParams, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>), PolicyError> {
    let t = trace(params, obs)?;
    Ok((t.mean, std_from_log(params.log_std())))
}

/// The squashed mean, used as the deterministic action.
pub fn mean_action(params: &PolicyParams, obs: &[f64]) -> Result<ActionVector, PolicyError> {
    let (mean, _) = forward(params, obs)?;
    Ok(squash(mean))
}

fn squash(u: Vec<f64>) -> ActionVector {
    ActionVector::new(
        u.into_iter()
            .map(|v| v.tanh().clamp(-ACTION_LIMIT, ACTION_LIMIT))
            .collect(),
    )
    .expect("tanh output lies in [-1, 1]")
}

/// Draw `n` independent actions.
pub fn sample_group(
    params: &PolicyParams,
    obs: &[f64],
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<ActionVector>, PolicyError> {
    let (mean, std) = forward(params, obs)?;
    Ok((0..n)
        .map(|_| {
            let u = mean
                .iter()
                .zip(&std)
                .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
                .collect();
            squash(u)
        })
        .collect())
}

fn unsquash(action: &[f64]) -> Result<Vec<f64>, PolicyError> {
    action
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            if !a.is_finite() {
                Err(PolicyError::NonFinite("action"))
            } else if a.abs() >= 1.0 {
                Err(PolicyError::ActionOnBoundary(j))
            } else {
                Ok(a.atanh())
            }
        })
        .collect()
}

fn check_action_len(params: &PolicyParams, action: &[f64]) -> Result<(), PolicyError> {
    if action.len() != params.arch.action_dim {
        return Err(PolicyError::DimensionMismatch {
            expected: params.arch.action_dim,
            got: action.len(),
        });
    }
    Ok(())
}

fn log_density(mean: &[f64], log_std: &[f64], action: &[f64], u: &[f64]) -> f64 {
    (0..mean.len())
        .map(|j| {
            let ls = log_std[j].clamp(LOG_STD_MIN, LOG_STD_MAX);
            let z = (u[j] - mean[j]) / ls.exp();
            -0.5 * z * z - ls - HALF_LN_2PI - ((1.0 - action[j]) * (1.0 + action[j])).ln()
        })
        .sum()
}

pub fn log_prob(params: &PolicyParams, obs: &[f64], action: &[f64]) -> Result<f64, PolicyError> {
    check_action_len(params, action)?;
    let u = unsquash(action)?;
    let t = trace(params, obs)?;
    Ok(log_density(&t.mean, params.log_std(), action, &u))
}

/// Adds `coeff * ∇ log π(action | obs)` into `grad` and returns the log-density.
pub fn accumulate_grad_log_prob(
    params: &PolicyParams,
    obs: &[f64],
    action: &[f64],
    coeff: f64,
    grad: &mut [f64],
) -> Result<f64, PolicyError> {
    accumulate_grad_with(params, obs, action, grad, |_| Ok(coeff)).map(|(lp, _)| lp)
}

/// Like [`accumulate_grad_log_prob`], with the coefficient computed from the
/// log-density. Returns `(log_prob, coeff)`.
pub fn accumulate_grad_with<E: From<PolicyError>>(
    params: &PolicyParams,
    obs: &[f64],
    action: &[f64],
    grad: &mut [f64],
    coeff: impl FnOnce(f64) -> Result<f64, E>,
) -> Result<(f64, f64), E> {
    check_action_len(params, action)?;
    if grad.len() != params.len() {
        return Err(PolicyError::DimensionMismatch {
            expected: params.len(),
            got: grad.len(),
        }
        .into());
    }
    let u = unsquash(action)?;
    let t = trace(params, obs)?;
    let log_std = params.log_std();
    let lp = log_density(&t.mean, log_std, action, &u);
    let coeff = coeff(lp)?;
    if coeff == 0.0 {
        return Ok((lp, coeff));
    }

    // d logp / d mean_j = z_j / sigma_j ; d logp / d log_std_j = z_j^2 - 1
    let ls_off = params.arch.log_std_offset();
    let mut delta: Vec<f64> = Vec::with_capacity(t.mean.len());
    for j in 0..t.mean.len() {
        let raw = log_std[j];
        let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
        let sigma = ls.exp();
        let z = (u[j] - t.mean[j]) / sigma;
        delta.push(coeff * z / sigma);
        if raw == ls {
            grad[ls_off + j] += coeff * (z * z - 1.0);
        }
    }

    let layers = params.arch.layers();
    let mut off_end = ls_off;
    for l in (0..layers.len()).rev() {
        let (fan_in, fan_out) = layers[l];
        let off = off_end - (fan_in * fan_out + fan_out);
        let (w, _) = params.layer(l);
        let x = &t.inputs[l];
        for r in 0..fan_out {
            let d = delta[r];
            if d == 0.0 {
                continue;
            }
            let row = &mut grad[off + r * fan_in..off + (r + 1) * fan_in];
            row.iter_mut().zip(x).for_each(|(g, xi)| *g += d * xi);
            grad[off + fan_in * fan_out + r] += d;
        }
        if l > 0 {
            // back through W then through the tanh that produced x
            let mut next = vec![0.0; fan_in];
            for r in 0..fan_out {
                let d = delta[r];
                if d != 0.0 {
                    next.iter_mut()
                        .zip(&w[r * fan_in..(r + 1) * fan_in])
                        .for_each(|(n, wi)| *n += d * wi);
                }
            }
            next.iter_mut().zip(x).for_each(|(n, h)| *n *= 1.0 - h * h);
            delta = next;
        }
        off_end = off;
    }
    Ok((lp, coeff))
}

/// Log-density and its exact gradient with respect to every parameter.
pub fn grad_log_prob(
    params: &PolicyParams,
    obs: &[f64],
    action: &[f64],
) -> Result<(f64, PolicyParams), PolicyError> {
    let mut g = PolicyParams::zeros(params.arch.clone());
    let lp = accumulate_grad_log_prob(params, obs, action, 1.0, &mut g.data)?;
    Ok((lp, g))
}

/// Running per-feature mean and variance (Welford).
#[derive(Debug, Clone, PartialEq)]
pub struct RunningNorm {
    pub count: f64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn update(&mut self, x: &[f64]) {
        self.count += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let d = v - *m;
            *m += d / self.count;
            *s += d * (v - *m);
        }
    }

    pub fn variance(&self) -> Vec<f64> {
        if self.count < 2.0 {
            return vec![1.0; self.dim()];
        }
        self.m2.iter().map(|s| s / self.count).collect()
    }

    /// Standardize and clip to ±10.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        let var = self.variance();
        x.iter()
            .zip(&self.mean)
            .zip(var)
            .map(|((v, m), s2)| {
                let z = if self.count < 2.0 {
                    *v - m
                } else {
                    (v - m) / (s2 + 1e-8).sqrt()
                };
                z.clamp(-OBS_CLIP, OBS_CLIP)
            })
            .collect()
    }
}

/// Parameters plus the observation normalizer they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub params: PolicyParams,
    pub normalizer: RunningNorm,
}

impl Policy {
    pub fn new(input_dim: usize, action_dim: usize, cfg: &PolicyConfig, seed: u64) -> Self {
        let arch = Architecture::new(input_dim, &cfg.hidden, action_dim);
        Self {
            params: PolicyParams::init(arch, cfg, seed),
            normalizer: RunningNorm::new(input_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.params.arch.input_dim
    }

    pub fn action_dim(&self) -> usize {
        self.params.arch.action_dim
    }
}
