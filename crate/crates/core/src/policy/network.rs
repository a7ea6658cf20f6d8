//! FiLM-conditioned MLP mapping observation features and an instruction
//! embedding to a bounded velocity-command sequence.
//!
//! ```text
//! h1 = relu(W1 x + b1)
//! [gamma, beta] = Wf e + bf
//! m  = gamma * h1 + beta
//! h2 = relu(W2 m + b2)
//! o  = W3 h2 + b3                      (interleaved v, omega pre-activations)
//! v  = v_min + (v_max - v_min) * sigmoid(o_v),  omega = omega_max * tanh(o_w)
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{InstructionEmbedding, DEFAULT_EMBED_DIM};
use super::features::{ObservationFeature, DEFAULT_SLOTS};
use crate::error::{Error, Result};
use crate::geom::{CommandSequence, Twist, TwistBounds, DEFAULT_DT, DEFAULT_HORIZON};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub slots: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub horizon: usize,
    pub dt: f64,
    pub bounds: TwistBounds,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            slots: DEFAULT_SLOTS,
            embed_dim: DEFAULT_EMBED_DIM,
            hidden: 128,
            horizon: DEFAULT_HORIZON,
            dt: DEFAULT_DT,
            bounds: TwistBounds::default(),
        }
    }
}

impl PolicyConfig {
    /// Current plus one previous block, three values per slot.
    pub fn input_dim(&self) -> usize {
        self.slots * 3 * 2
    }

    pub fn output_dim(&self) -> usize {
        2 * self.horizon
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 || self.embed_dim == 0 || self.hidden == 0 || self.horizon == 0 {
            return Err(Error::config("policy dimensions must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::config("policy dt must be positive"));
        }
        self.bounds.validate()
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub w1: usize,
    pub b1: usize,
    pub wf: usize,
    pub bf: usize,
    pub w2: usize,
    pub b2: usize,
    pub w3: usize,
    pub b3: usize,
    pub total: usize,
}

impl Layout {
    fn new(c: &PolicyConfig) -> Self {
        let (i, h, d, o) = (c.input_dim(), c.hidden, c.embed_dim, c.output_dim());
        let w1 = 0;
        let b1 = w1 + h * i;
        let wf = b1 + h;
        let bf = wf + 2 * h * d;
        let w2 = bf + 2 * h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let b3 = w3 + o * h;
        let total = b3 + o;
        Self {
            w1,
            b1,
            wf,
            bf,
            w2,
            b2,
            w3,
            b3,
            total,
        }
    }

    /// Range of FiLM generator weights and biases producing gamma.
    pub fn gamma_generator(&self, c: &PolicyConfig) -> Vec<usize> {
        let (h, d) = (c.hidden, c.embed_dim);
        (self.wf..self.wf + h * d)
            .chain(self.bf..self.bf + h)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub config: PolicyConfig,
    pub weights: Vec<f64>,
    pub adam: AdamState,
}

impl PolicyParams {
    pub fn zeros(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        let n = config.layout().total;
        Ok(Self {
            config,
            weights: vec![0.0; n],
            adam: AdamState {
                m: vec![0.0; n],
                v: vec![0.0; n],
                step: 0,
            },
        })
    }

    /// He-uniform hidden layers, identity FiLM (gamma = 1, beta = 0) plus a
    /// small random generator, and a small output layer so initial commands
    /// sit near mid-range.
    pub fn init(config: PolicyConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let l = config.layout();
        let (i, h, d, o) = (
            config.input_dim(),
            config.hidden,
            config.embed_dim,
            config.output_dim(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut [f64], bound: f64| {
            for x in w {
                *x = rng.random_range(-bound..bound);
            }
        };
        fill(&mut p.weights[l.w1..l.w1 + h * i], (6.0 / i as f64).sqrt());
        fill(&mut p.weights[l.wf..l.wf + 2 * h * d], 0.1 / (d as f64).sqrt());
        fill(&mut p.weights[l.w2..l.w2 + h * h], (6.0 / h as f64).sqrt());
        fill(&mut p.weights[l.w3..l.w3 + o * h], 0.1 * (6.0 / h as f64).sqrt());
        p.weights[l.bf..l.bf + h].iter_mut().for_each(|x| *x = 1.0);
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let n = self.config.layout().total;
        if self.weights.len() != n || self.adam.m.len() != n || self.adam.v.len() != n {
            return Err(Error::Shape(format!(
                "parameter vectors do not match layout size {n}"
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Diverged("non-finite policy weight".into()));
        }
        Ok(())
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    x: Vec<f64>,
    e: Vec<f64>,
    z1: Vec<f64>,
    h1: Vec<f64>,
    g: Vec<f64>,
    m: Vec<f64>,
    z2: Vec<f64>,
    h2: Vec<f64>,
    o: Vec<f64>,
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut Vec<f64>) {
    let cols = x.len();
    out.clear();
    out.extend(b.iter().enumerate().map(|(r, bias)| {
        let row = &w[r * cols..(r + 1) * cols];
        bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }));
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn check_inputs(params: &PolicyParams, x: &[f64], e: &[f64]) -> Result<()> {
    let c = &params.config;
    if x.len() != c.input_dim() {
        return Err(Error::Shape(format!(
            "observation input has {} values, policy expects {}",
            x.len(),
            c.input_dim()
        )));
    }
    if e.len() != c.embed_dim {
        return Err(Error::Shape(format!(
            "instruction embedding has dim {}, policy expects {}",
            e.len(),
            c.embed_dim
        )));
    }
    if params.weights.len() != c.layout().total {
        return Err(Error::Shape("weights do not match layout".into()));
    }
    Ok(())
}

/// Forward pass on raw input vectors.
pub fn forward_raw(params: &PolicyParams, x: &[f64], e: &[f64]) -> Result<(CommandSequence, ForwardCache)> {
    check_inputs(params, x, e)?;
    let c = &params.config;
    let l = c.layout();
    let (i, h, d, o) = (c.input_dim(), c.hidden, c.embed_dim, c.output_dim());
    let w = &params.weights;

    let mut z1 = Vec::with_capacity(h);
    affine(&w[l.w1..l.w1 + h * i], &w[l.b1..l.b1 + h], x, &mut z1);
    let h1: Vec<f64> = z1.iter().map(|z| z.max(0.0)).collect();
    let mut g = Vec::with_capacity(2 * h);
    affine(&w[l.wf..l.wf + 2 * h * d], &w[l.bf..l.bf + 2 * h], e, &mut g);
    let m: Vec<f64> = (0..h).map(|k| g[k] * h1[k] + g[h + k]).collect();
    let mut z2 = Vec::with_capacity(h);
    affine(&w[l.w2..l.w2 + h * h], &w[l.b2..l.b2 + h], &m, &mut z2);
    let h2: Vec<f64> = z2.iter().map(|z| z.max(0.0)).collect();
    let mut out = Vec::with_capacity(o);
    affine(&w[l.w3..l.w3 + o * h], &w[l.b3..l.b3 + o], &h2, &mut out);

    let b = &c.bounds;
    let commands = out
        .chunks_exact(2)
        .map(|p| {
            Twist::new(
                b.v_min + (b.v_max - b.v_min) * sigmoid(p[0]),
                b.omega_max * p[1].tanh(),
            )
        })
        .collect();
    let seq = CommandSequence::new(commands, c.dt)?;
    Ok((
        seq,
        ForwardCache {
            x: x.to_vec(),
            e: e.to_vec(),
            z1,
            h1,
            g,
            m,
            z2,
            h2,
            o: out,
        },
    ))
}

pub fn policy_forward(
    params: &PolicyParams,
    obs: &ObservationFeature,
    instr: &InstructionEmbedding,
) -> Result<CommandSequence> {
    check_slots(params, obs)?;
    Ok(forward_raw(params, &obs.to_input(), instr.as_slice())?.0)
}

fn check_slots(params: &PolicyParams, obs: &ObservationFeature) -> Result<()> {
    if obs.current.slots.len() != params.config.slots || obs.previous.slots.len() != params.config.slots {
        return Err(Error::Shape(format!(
            "observation has {}/{} slots, policy expects {}",
            obs.current.slots.len(),
            obs.previous.slots.len(),
            params.config.slots
        )));
    }
    Ok(())
}

/// Accumulates d(loss)/d(weights) into `grad` given d(loss)/d(v_k, omega_k).
pub fn backward_raw(
    params: &PolicyParams,
    cache: &ForwardCache,
    upstream: &[[f64; 2]],
    grad: &mut [f64],
) -> Result<()> {
    let c = &params.config;
    let l = c.layout();
    let (i, h, d, o) = (c.input_dim(), c.hidden, c.embed_dim, c.output_dim());
    if upstream.len() != c.horizon {
        return Err(Error::LengthMismatch {
            what: "upstream gradient",
            expected: c.horizon,
            got: upstream.len(),
        });
    }
    if grad.len() != l.total {
        return Err(Error::Shape("gradient buffer does not match layout".into()));
    }
    let w = &params.weights;
    let b = &c.bounds;

    let mut d_o = vec![0.0; o];
    for (k, up) in upstream.iter().enumerate() {
        let s = sigmoid(cache.o[2 * k]);
        let t = cache.o[2 * k + 1].tanh();
        d_o[2 * k] = up[0] * (b.v_max - b.v_min) * s * (1.0 - s);
        d_o[2 * k + 1] = up[1] * b.omega_max * (1.0 - t * t);
    }

    // output layer
    let mut d_h2 = vec![0.0; h];
    for (r, g_r) in d_o.iter().enumerate() {
        if *g_r == 0.0 {
            continue;
        }
        grad[l.b3 + r] += g_r;
        let row = l.w3 + r * h;
        for k in 0..h {
            grad[row + k] += g_r * cache.h2[k];
            d_h2[k] += g_r * w[row + k];
        }
    }

    // hidden layer
    let mut d_m = vec![0.0; h];
    for r in 0..h {
        let g_r = if cache.z2[r] > 0.0 { d_h2[r] } else { 0.0 };
        if g_r == 0.0 {
            continue;
        }
        grad[l.b2 + r] += g_r;
        let row = l.w2 + r * h;
        for k in 0..h {
            grad[row + k] += g_r * cache.m[k];
            d_m[k] += g_r * w[row + k];
        }
    }

    // FiLM: m = gamma * h1 + beta
    let mut d_h1 = vec![0.0; h];
    for k in 0..h {
        let d_gamma = d_m[k] * cache.h1[k];
        let d_beta = d_m[k];
        d_h1[k] = d_m[k] * cache.g[k];
        for (r, dg) in [(k, d_gamma), (h + k, d_beta)] {
            if dg == 0.0 {
                continue;
            }
            grad[l.bf + r] += dg;
            let row = l.wf + r * d;
            for (q, e) in cache.e.iter().enumerate() {
                grad[row + q] += dg * e;
            }
        }
    }

    // input layer
    for r in 0..h {
        let g_r = if cache.z1[r] > 0.0 { d_h1[r] } else { 0.0 };
        if g_r == 0.0 {
            continue;
        }
        grad[l.b1 + r] += g_r;
        let row = l.w1 + r * i;
        for (q, x) in cache.x.iter().enumerate() {
            grad[row + q] += g_r * x;
        }
    }
    Ok(())
}

/// Exact gradient of a loss w.r.t. all weights given its gradient w.r.t. commands.
pub fn policy_backward(
    params: &PolicyParams,
    obs: &ObservationFeature,
    instr: &InstructionEmbedding,
    upstream: &[[f64; 2]],
) -> Result<Vec<f64>> {
    check_slots(params, obs)?;
    let (_, cache) = forward_raw(params, &obs.to_input(), instr.as_slice())?;
    let mut grad = vec![0.0; params.len()];
    backward_raw(params, &cache, upstream, &mut grad)?;
    Ok(grad)
}
