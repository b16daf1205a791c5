//! The feedforward surrogate-gradient baseline: a 225-1000-10 spiking MLP
//! with leaky membranes, manual backpropagation through time with an
//! arctangent surrogate at the spike nonlinearity, Adam, spike-count
//! decoding, and a sleep phase of noise-driven dynamics plus weight decay.
//!
//! The forward trace stores the spike values and reset gates that were
//! actually applied, and the backward differentiates exactly with respect to
//! the trace contents (gates and stored inputs treated as constants, the
//! surrogate derivative substituted at each spike nonlinearity). Production
//! traces hold hard 0/1 spikes; test oracles can feed smoothed traces and
//! compare against finite differences of the matching smooth forward.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::sleep::{
    decay_step, sleep_budget, wake_condition, SleepPhaseRecord, SleepSchedule, WakeReason,
};

/// What feeds the per-step softmax cross-entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LogitSource {
    /// Output-layer membrane potentials. The output reset zeroes a
    /// membrane right after its class spikes, which fights a per-step
    /// cross-entropy on membranes; kept as an ablation variant.
    Membrane,
    /// Output-layer spike values, with the surrogate carrying the gradient
    /// through the output nonlinearity.
    #[default]
    Spikes,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SgConfig {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    /// Simulation steps per stimulus.
    pub t_steps: usize,
    /// Membrane decay per step.
    pub beta_mem: f64,
    /// Firing threshold.
    pub u_thr: f64,
    /// Surrogate slope constant.
    pub alpha_surr: f64,
    pub logits: LogitSource,
    /// Multiplier on the fan-in uniform init bound.
    pub w_init_scale: f64,
}

impl Default for SgConfig {
    fn default() -> Self {
        SgConfig {
            n_in: 225,
            n_hidden: 1000,
            n_out: 10,
            t_steps: 100,
            beta_mem: 0.95,
            u_thr: 1.0,
            alpha_surr: 2.0,
            logits: LogitSource::default(),
            w_init_scale: 1.0,
        }
    }
}

impl SgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_in == 0 || self.n_hidden == 0 || self.n_out == 0 || self.t_steps == 0 {
            return Err(Error::InvalidInput("sg dimensions must be nonzero".into()));
        }
        if !(self.beta_mem > 0.0 && self.beta_mem < 1.0) {
            return Err(Error::InvalidInput("beta_mem must lie in (0, 1)".into()));
        }
        if !(self.alpha_surr > 0.0) {
            return Err(Error::InvalidInput("alpha_surr must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 5e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Dense weights plus Adam moment estimates.
#[derive(Debug, Clone)]
pub struct SgParams {
    pub w1: Mat,
    pub w2: Mat,
    pub m1: Mat,
    pub v1: Mat,
    pub m2: Mat,
    pub v2: Mat,
    pub adam_steps: u64,
}

impl SgParams {
    /// Fan-in uniform init, bound `w_init_scale / sqrt(fan_in)`.
    pub fn init<R: Rng>(cfg: &SgConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut w1 = Mat::zeros(cfg.n_hidden, cfg.n_in);
        let b1 = cfg.w_init_scale / (cfg.n_in as f64).sqrt();
        for w in &mut w1.data {
            *w = rng.random_range(-b1..b1);
        }
        let mut w2 = Mat::zeros(cfg.n_out, cfg.n_hidden);
        let b2 = cfg.w_init_scale / (cfg.n_hidden as f64).sqrt();
        for w in &mut w2.data {
            *w = rng.random_range(-b2..b2);
        }
        Ok(SgParams {
            m1: Mat::zeros(cfg.n_hidden, cfg.n_in),
            v1: Mat::zeros(cfg.n_hidden, cfg.n_in),
            m2: Mat::zeros(cfg.n_out, cfg.n_hidden),
            v2: Mat::zeros(cfg.n_out, cfg.n_hidden),
            w1,
            w2,
            adam_steps: 0,
        })
    }

    pub fn weight_sum_abs(&self) -> f64 {
        self.w1.data.iter().map(|w| w.abs()).sum::<f64>()
            + self.w2.data.iter().map(|w| w.abs()).sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.w1
            .data
            .iter()
            .chain(&self.w2.data)
            .fold(0.0f64, |m, w| m.max(w.abs()))
    }
}

/// Per-step membranes, spike values and reset gates for both layers.
/// `gate*[t]` is the factor that multiplied `u(t-1)` when computing `u(t)`.
#[derive(Debug, Clone)]
pub struct SgForwardTrace {
    pub t_steps: usize,
    pub x: Vec<f64>,
    pub u1: Vec<Vec<f64>>,
    pub s1: Vec<Vec<f64>>,
    pub gate1: Vec<Vec<f64>>,
    pub u2: Vec<Vec<f64>>,
    pub s2: Vec<Vec<f64>>,
    pub gate2: Vec<Vec<f64>>,
}

/// Forward pass over `t_steps` with the static pixel vector injected as a
/// constant current. Returns class-wise spike counts and the full trace.
pub fn sg_forward(x: &[f64], params: &SgParams, cfg: &SgConfig) -> Result<(Vec<u32>, SgForwardTrace)> {
    if x.len() != cfg.n_in {
        return Err(Error::Shape(format!(
            "input of {} pixels for n_in = {}",
            x.len(),
            cfg.n_in
        )));
    }
    let a1 = params.w1.matvec(x)?;
    let mut u1 = vec![0.0; cfg.n_hidden];
    let mut s1_prev = vec![0.0; cfg.n_hidden];
    let mut u2 = vec![0.0; cfg.n_out];
    let mut s2_prev = vec![0.0; cfg.n_out];
    let mut counts = vec![0u32; cfg.n_out];
    let mut trace = SgForwardTrace {
        t_steps: cfg.t_steps,
        x: x.to_vec(),
        u1: Vec::with_capacity(cfg.t_steps),
        s1: Vec::with_capacity(cfg.t_steps),
        gate1: Vec::with_capacity(cfg.t_steps),
        u2: Vec::with_capacity(cfg.t_steps),
        s2: Vec::with_capacity(cfg.t_steps),
        gate2: Vec::with_capacity(cfg.t_steps),
    };

    for _ in 0..cfg.t_steps {
        let gate1: Vec<f64> = s1_prev.iter().map(|s| 1.0 - s).collect();
        for (u, (g, a)) in u1.iter_mut().zip(gate1.iter().zip(&a1)) {
            *u = cfg.beta_mem * *u * g + a;
        }
        let s1: Vec<f64> = u1.iter().map(|&u| f64::from(u8::from(u >= cfg.u_thr))).collect();

        let a2 = params.w2.matvec(&s1)?;
        let gate2: Vec<f64> = s2_prev.iter().map(|s| 1.0 - s).collect();
        for (u, (g, a)) in u2.iter_mut().zip(gate2.iter().zip(&a2)) {
            *u = cfg.beta_mem * *u * g + a;
        }
        let s2: Vec<f64> = u2.iter().map(|&u| f64::from(u8::from(u >= cfg.u_thr))).collect();
        for (c, &s) in counts.iter_mut().zip(&s2) {
            *c += u32::from(s > 0.5);
        }

        trace.u1.push(u1.clone());
        trace.s1.push(s1.clone());
        trace.gate1.push(gate1);
        trace.u2.push(u2.clone());
        trace.s2.push(s2.clone());
        trace.gate2.push(gate2);
        s1_prev = s1;
        s2_prev = s2;
    }
    Ok((counts, trace))
}

/// Arctangent surrogate: value and derivative at membrane offset `u`.
pub fn surrogate_value_and_grad(u: f64, alpha_surr: f64) -> (f64, f64) {
    let z = std::f64::consts::PI * u * alpha_surr / 2.0;
    let value = z.atan() / std::f64::consts::PI;
    let grad = (alpha_surr / 2.0) / (1.0 + z * z);
    (value, grad)
}

fn step_cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let logsum = logits.iter().map(|s| (s - max).exp()).sum::<f64>().ln() + max;
    logsum - logits[label]
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// Time-summed cross-entropy over the stimulus window.
pub fn sg_loss(trace: &SgForwardTrace, label: usize, cfg: &SgConfig) -> Result<f64> {
    if label >= cfg.n_out {
        return Err(Error::InvalidInput(format!("label {label} for {} classes", cfg.n_out)));
    }
    if trace.t_steps == 0 || trace.u2.len() != trace.t_steps {
        return Err(Error::Contract("trace is missing stored membranes".into()));
    }
    let mut loss = 0.0;
    for t in 0..trace.t_steps {
        let logits = match cfg.logits {
            LogitSource::Membrane => &trace.u2[t],
            LogitSource::Spikes => &trace.s2[t],
        };
        loss += step_cross_entropy(logits, label);
    }
    Ok(loss)
}

#[derive(Debug, Clone)]
pub struct SgGrads {
    pub w1: Mat,
    pub w2: Mat,
}

impl SgGrads {
    pub fn zeros(cfg: &SgConfig) -> Self {
        SgGrads { w1: Mat::zeros(cfg.n_hidden, cfg.n_in), w2: Mat::zeros(cfg.n_out, cfg.n_hidden) }
    }

    pub fn add_scaled(&mut self, other: &SgGrads, scale: f64) {
        for (a, b) in self.w1.data.iter_mut().zip(&other.w1.data) {
            *a += scale * b;
        }
        for (a, b) in self.w2.data.iter_mut().zip(&other.w2.data) {
            *a += scale * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite() && self.w2.is_finite()
    }
}

/// Backpropagation through time over the stored trace. The surrogate
/// derivative stands in for the spike nonlinearity; the reset path carries no
/// gradient (the stored gates are constants).
pub fn sg_backward(
    trace: &SgForwardTrace,
    label: usize,
    params: &SgParams,
    cfg: &SgConfig,
) -> Result<SgGrads> {
    if trace.t_steps == 0
        || trace.u1.len() != trace.t_steps
        || trace.u2.len() != trace.t_steps
        || trace.x.len() != cfg.n_in
    {
        return Err(Error::Contract("trace is missing stored membranes".into()));
    }
    if label >= cfg.n_out {
        return Err(Error::InvalidInput(format!("label {label} for {} classes", cfg.n_out)));
    }
    let mut grads = SgGrads::zeros(cfg);
    let mut delta1_next = vec![0.0; cfg.n_hidden];
    let mut delta2_next = vec![0.0; cfg.n_out];
    let mut delta1_sum = vec![0.0; cfg.n_hidden];

    for t in (0..trace.t_steps).rev() {
        // dL/dU2(t): direct per-step CE term plus the carried recurrence,
        // scaled by the gate that was applied when stepping to t+1.
        let mut delta2 = match cfg.logits {
            LogitSource::Membrane => {
                let mut p = softmax(&trace.u2[t]);
                p[label] -= 1.0;
                p
            }
            LogitSource::Spikes => {
                let mut p = softmax(&trace.s2[t]);
                p[label] -= 1.0;
                for (pi, &u) in p.iter_mut().zip(&trace.u2[t]) {
                    let (_, g) = surrogate_value_and_grad(u - cfg.u_thr, cfg.alpha_surr);
                    *pi *= g;
                }
                p
            }
        };
        if t + 1 < trace.t_steps {
            for ((d, prev), g) in delta2.iter_mut().zip(&delta2_next).zip(&trace.gate2[t + 1]) {
                *d += cfg.beta_mem * g * prev;
            }
        }

        grads.w2.add_outer(&delta2, &trace.s1[t], 1.0);

        // dL/dS1(t) -> dL/dU1(t) through the surrogate, plus the carry.
        let g_s1 = params.w2.t_matvec(&delta2)?;
        let mut delta1 = vec![0.0; cfg.n_hidden];
        for i in 0..cfg.n_hidden {
            let (_, sg) = surrogate_value_and_grad(trace.u1[t][i] - cfg.u_thr, cfg.alpha_surr);
            delta1[i] = g_s1[i] * sg;
        }
        if t + 1 < trace.t_steps {
            for ((d, prev), g) in delta1.iter_mut().zip(&delta1_next).zip(&trace.gate1[t + 1]) {
                *d += cfg.beta_mem * g * prev;
            }
        }
        for (s, d) in delta1_sum.iter_mut().zip(&delta1) {
            *s += d;
        }
        delta1_next = delta1;
        delta2_next = delta2;
    }
    // the input current is the same every step, so dW1 is one outer product
    grads.w1.add_outer(&delta1_sum, &trace.x, 1.0);
    Ok(grads)
}

/// Bias-corrected Adam update on both weight matrices.
pub fn adam_step(params: &mut SgParams, grads: &SgGrads, cfg: &AdamConfig) -> Result<()> {
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradient in adam_step".into()));
    }
    params.adam_steps += 1;
    let t = params.adam_steps as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let update = |w: &mut Mat, m: &mut Mat, v: &mut Mat, g: &Mat| {
        for i in 0..w.data.len() {
            let gi = g.data[i];
            m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
            v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m.data[i] / bc1;
            let v_hat = v.data[i] / bc2;
            w.data[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    };
    let SgParams { w1, w2, m1, v1, m2, v2, .. } = params;
    update(w1, m1, v1, &grads.w1);
    update(w2, m2, v2, &grads.w2);
    Ok(())
}

/// Argmax spike-count decoding; ties go to the lowest class index.
pub fn spike_count_decode(counts: &[u32]) -> usize {
    let mut best = 0usize;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SgSleepConfig {
    pub noise_mean: f64,
    pub noise_std: f64,
}

impl Default for SgSleepConfig {
    fn default() -> Self {
        SgSleepConfig { noise_mean: 0.0, noise_std: 0.5 }
    }
}

/// Sleep for the surrogate-gradient model: task input zeroed, membrane noise
/// drives spontaneous forward dynamics, both weight matrices decay each
/// iteration, and the weight-sum wake condition can end the phase early.
/// No gradient updates run; Adam state is untouched.
pub fn sg_sleep_phase<R: Rng>(
    params: &mut SgParams,
    schedule: &SleepSchedule,
    sleep_cfg: &SgSleepConfig,
    cfg: &SgConfig,
    reference_sum: f64,
    phase_index: u64,
    rng: &mut R,
) -> Result<SleepPhaseRecord> {
    let budget = sleep_budget(schedule);
    let before = params.weight_sum_abs();
    let noise = Normal::new(sleep_cfg.noise_mean, sleep_cfg.noise_std)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut u1 = vec![0.0; cfg.n_hidden];
    let mut s1 = vec![0.0; cfg.n_hidden];
    let mut u2 = vec![0.0; cfg.n_out];
    let mut s2 = vec![0.0; cfg.n_out];
    let mut iterations = 0;
    let mut spontaneous = 0u64;
    let mut reason = WakeReason::BudgetExhausted;

    for _ in 0..budget {
        iterations += 1;
        for (u, s) in u1.iter_mut().zip(&s1) {
            *u = cfg.beta_mem * *u * (1.0 - s) + noise.sample(rng);
        }
        for (s, &u) in s1.iter_mut().zip(u1.iter()) {
            *s = f64::from(u8::from(u >= cfg.u_thr));
            spontaneous += u64::from(*s > 0.5);
        }
        let a2 = params.w2.matvec(&s1)?;
        for ((u, s), a) in u2.iter_mut().zip(&s2).zip(&a2) {
            *u = cfg.beta_mem * *u * (1.0 - s) + a + noise.sample(rng);
        }
        for (s, &u) in s2.iter_mut().zip(u2.iter()) {
            *s = f64::from(u8::from(u >= cfg.u_thr));
            spontaneous += u64::from(*s > 0.5);
        }

        if schedule.lambda < 1.0 {
            for w in params.w1.data.iter_mut().chain(params.w2.data.iter_mut()) {
                *w = decay_step(*w, schedule)?;
            }
        }
        if wake_condition(params.weight_sum_abs(), reference_sum, schedule) {
            reason = WakeReason::Threshold;
            break;
        }
    }
    Ok(SleepPhaseRecord {
        phase_index,
        iterations,
        budget,
        weight_sum_before: before,
        weight_sum_after: params.weight_sum_abs(),
        wake_reason: reason,
        spontaneous_spikes: spontaneous,
    })
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"SGCP0001";

/// Versioned binary dump of the parameters: header (magic, dims, adam step),
/// then the six little-endian f64 arrays.
pub fn save_checkpoint(params: &SgParams, cfg: &SgConfig, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    for dim in [cfg.n_in as u32, cfg.n_hidden as u32, cfg.n_out as u32] {
        buf.extend_from_slice(&dim.to_le_bytes());
    }
    buf.extend_from_slice(&params.adam_steps.to_le_bytes());
    for mat in [&params.w1, &params.w2, &params.m1, &params.v1, &params.m2, &params.v2] {
        for v in &mat.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path, cfg: &SgConfig) -> Result<SgParams> {
    let bytes = fs::read(path)?;
    if bytes.len() < 28 || &bytes[0..8] != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let dim = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let (n_in, n_hidden, n_out) = (dim(8), dim(12), dim(16));
    if (n_in, n_hidden, n_out) != (cfg.n_in, cfg.n_hidden, cfg.n_out) {
        return Err(Error::Data(format!(
            "checkpoint dims {n_in}-{n_hidden}-{n_out} do not match config {}-{}-{}",
            cfg.n_in, cfg.n_hidden, cfg.n_out
        )));
    }
    let adam_steps = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let matrix_len = [n_hidden * n_in, n_out * n_hidden];
    let total: usize = 2 * (matrix_len[0] + matrix_len[1]) + matrix_len[0] + matrix_len[1];
    if bytes.len() != 28 + 8 * total {
        return Err(Error::Data("checkpoint payload truncated".into()));
    }
    let mut offset = 28;
    let mut read_mat = |rows: usize, cols: usize| -> Mat {
        let mut m = Mat::zeros(rows, cols);
        for v in &mut m.data {
            *v = f64::from_le_bytes(bytes[offset..offset + 8].try_into().unwrap());
            offset += 8;
        }
        m
    };
    let w1 = read_mat(n_hidden, n_in);
    let w2 = read_mat(n_out, n_hidden);
    let m1 = read_mat(n_hidden, n_in);
    let v1 = read_mat(n_hidden, n_in);
    let m2 = read_mat(n_out, n_hidden);
    let v2 = read_mat(n_out, n_hidden);
    Ok(SgParams { w1, w2, m1, v1, m2, v2, adam_steps })
}
