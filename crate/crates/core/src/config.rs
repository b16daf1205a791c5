//! Experiment configuration: one struct covering every tunable of both
//! models, a flat `[section]` / `key = value` file format, and defaults
//! matching the reference parameter tables.
//!
//! Unknown keys are rejected so typos fail loudly; missing keys keep their
//! defaults. `somnet.example.conf` at the workspace root documents every key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::SplitPlan;
use crate::encoding::EncoderConfig;
use crate::error::{Error, Result};
use crate::network::ArchitectureConfig;
use crate::neuron::{LifParams, NoisePlacement, ThresholdParams};
use crate::plasticity::StdpParams;
use crate::readout::ReadoutConfig;
use crate::sg::{AdamConfig, LogitSource, SgConfig, SgSleepConfig};
use crate::sleep::{SleepSchedule, WakeReference};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    Stdp,
    Sg,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Stdp => "stdp",
            ModelKind::Sg => "sg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "stdp" => Ok(ModelKind::Stdp),
            "sg" => Ok(ModelKind::Sg),
            other => Err(Error::Config(format!("unknown model '{other}' (stdp|sg)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetKind {
    Geometric,
    Mnist,
    Fmnist,
    Kmnist,
    Notmnist,
}

impl DatasetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetKind::Geometric => "geometric",
            DatasetKind::Mnist => "mnist",
            DatasetKind::Fmnist => "fmnist",
            DatasetKind::Kmnist => "kmnist",
            DatasetKind::Notmnist => "notmnist",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(DatasetKind::Geometric),
            "mnist" => Ok(DatasetKind::Mnist),
            "fmnist" => Ok(DatasetKind::Fmnist),
            "kmnist" => Ok(DatasetKind::Kmnist),
            "notmnist" => Ok(DatasetKind::Notmnist),
            other => Err(Error::Config(format!(
                "unknown dataset '{other}' (geometric|mnist|fmnist|kmnist|notmnist)"
            ))),
        }
    }
}

/// Trace constants accepted for the feedforward model's config block; they
/// parameterize no update path (gradients govern all SG weight changes).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SgAuxStdp {
    pub eta_exc: f64,
    pub eta_inh: f64,
    pub a_plus: f64,
    pub a_minus: f64,
    pub tau_pre: f64,
    pub tau_post: f64,
}

impl Default for SgAuxStdp {
    fn default() -> Self {
        SgAuxStdp {
            eta_exc: 1e-3,
            eta_inh: 1e-3,
            a_plus: 0.01,
            a_minus: 0.012,
            tau_pre: 20.0,
            tau_post: 20.0,
        }
    }
}

/// The canonical 11-point sleep-ratio grid swept in the experiments.
pub const SLEEP_RATIO_GRID: [f64; 11] =
    [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub dataset: DatasetKind,
    pub seed: u64,
    pub sleep_ratio: f64,

    pub arch: ArchitectureConfig,
    pub lif: LifParams,
    /// Intrinsic membrane noise also during wake stepping (sleep phases are
    /// always noise-driven).
    pub wake_noise: bool,
    pub thr: ThresholdParams,
    pub stdp: StdpParams,
    /// Trace accumulation bound; f64::INFINITY disables the cap.
    pub trace_ceiling: f64,

    /// Wake steps between sleep onsets; None derives one phase per stimulus
    /// presentation.
    pub sleep_interval: Option<u64>,
    pub sleep_lambda: f64,
    pub sleep_w_tgt: f64,
    pub alpha_base: f64,
    pub alpha_trig: Option<f64>,
    pub wake_reference: WakeReference,

    pub encoder: EncoderConfig,
    pub split: SplitPlan,
    /// Pixel-noise variance for the synthesized geometric set.
    pub geometric_noise_var: f64,
    pub dataset_root: Option<PathBuf>,

    pub sg: SgConfig,
    pub adam: AdamConfig,
    pub sg_sleep: SgSleepConfig,
    pub sg_sleep_lambda: f64,
    pub sg_sleep_w_tgt: f64,
    /// Samples per Adam update.
    pub sg_minibatch: usize,
    /// Optimizer steps between SG sleep onsets; None derives one onset per
    /// data batch.
    pub sg_sleep_interval: Option<u64>,
    /// Auxiliary trace constants listed for the feedforward model. Plasticity
    /// is gradient-driven there, so these are accepted and validated but feed
    /// no update path.
    pub sg_aux: SgAuxStdp,

    pub readout: ReadoutConfig,

    pub patience_fraction: f64,
    pub min_improvement: f64,

    /// Per-run JSON-lines telemetry lands here when set.
    pub telemetry_dir: Option<PathBuf>,

    /// Run-abort multiplier on each synapse group's initial mean |w|.
    pub weight_ceiling_factor: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelKind::Stdp,
            dataset: DatasetKind::Geometric,
            seed: 1,
            sleep_ratio: 0.1,
            arch: ArchitectureConfig::default(),
            lif: LifParams::default(),
            wake_noise: true,
            thr: ThresholdParams::default(),
            stdp: StdpParams::default(),
            trace_ceiling: crate::plasticity::DEFAULT_TRACE_CEILING,
            sleep_interval: None,
            sleep_lambda: 0.9985,
            sleep_w_tgt: 0.2,
            alpha_base: 1.0,
            alpha_trig: None,
            wake_reference: WakeReference::TrainingStart,
            encoder: EncoderConfig::default(),
            split: SplitPlan::default(),
            geometric_noise_var: 0.02,
            dataset_root: None,
            sg: SgConfig::default(),
            adam: AdamConfig::default(),
            sg_sleep: SgSleepConfig::default(),
            sg_sleep_lambda: 0.999,
            sg_sleep_w_tgt: 0.2,
            sg_minibatch: 40,
            sg_sleep_interval: None,
            sg_aux: SgAuxStdp::default(),
            readout: ReadoutConfig::default(),
            patience_fraction: 0.2,
            min_improvement: 0.001,
            telemetry_dir: None,
            weight_ceiling_factor: crate::network::WEIGHT_CEILING_FACTOR,
        }
    }
}

impl ExperimentConfig {
    /// Steps one stimulus occupies.
    pub fn steps_per_sample(&self) -> u64 {
        self.encoder.steps() as u64
    }

    /// Effective onset interval: configured, or one phase per presentation.
    pub fn effective_sleep_interval(&self) -> u64 {
        self.sleep_interval.unwrap_or(self.steps_per_sample()).max(1)
    }

    /// Sleep schedule for the recurrent STDP model.
    pub fn sleep_schedule(&self) -> SleepSchedule {
        SleepSchedule {
            sleep_ratio: self.sleep_ratio,
            sleep_interval: self.effective_sleep_interval(),
            lambda: self.sleep_lambda,
            w_tgt: self.sleep_w_tgt,
            alpha_base: self.alpha_base,
            alpha_trig: self.alpha_trig,
            wake_reference: self.wake_reference,
        }
    }

    /// Optimizer steps between SG sleep onsets: the feedforward model's
    /// training clock ticks once per Adam update, and the default puts one
    /// onset at every data-batch boundary.
    pub fn effective_sg_sleep_interval(&self) -> u64 {
        self.sg_sleep_interval
            .unwrap_or_else(|| (self.split.batch_size / self.sg_minibatch.max(1)).max(1) as u64)
            .max(1)
    }

    /// Sleep schedule for the surrogate-gradient model: its own decay
    /// constants and onset cadence (in optimizer steps), same wake rule.
    pub fn sg_sleep_schedule(&self) -> SleepSchedule {
        SleepSchedule {
            lambda: self.sg_sleep_lambda,
            w_tgt: self.sg_sleep_w_tgt,
            sleep_interval: self.effective_sg_sleep_interval(),
            ..self.sleep_schedule()
        }
    }

    pub fn on_canonical_grid(&self) -> bool {
        SLEEP_RATIO_GRID.iter().any(|&g| (g - self.sleep_ratio).abs() < 1e-9)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sleep_ratio) {
            return Err(Error::InvalidInput("sleep_ratio must lie in [0, 1]".into()));
        }
        self.arch.validate()?;
        self.lif.validate()?;
        self.thr.validate(&self.lif)?;
        self.stdp.validate()?;
        self.encoder.validate()?;
        self.split.validate()?;
        self.sg.validate()?;
        self.sleep_schedule().validate()?;
        self.sg_sleep_schedule().validate()?;
        if self.encoder.n_in() != self.arch.n_in {
            return Err(Error::InvalidInput(format!(
                "encoder dims {:?} give {} inputs, network expects {}",
                self.encoder.image_dims,
                self.encoder.n_in(),
                self.arch.n_in
            )));
        }
        if self.sg.n_in != self.encoder.n_in() {
            return Err(Error::InvalidInput("sg n_in must match encoder dims".into()));
        }
        if self.sg_minibatch == 0 || self.sg_minibatch > self.split.batch_size {
            return Err(Error::InvalidInput(
                "sg minibatch must lie in [1, batch_size]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.patience_fraction) {
            return Err(Error::InvalidInput("patience_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Overlay `key = value` pairs from config text onto self.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        let mut pairs: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key = value", lineno + 1)));
            };
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            pairs.insert(full, value.trim().to_string());
        }
        for (key, value) in pairs {
            self.apply_key(&key, &value)?;
        }
        // the SG step count is derived from the stimulus window
        self.sg.t_steps = self.encoder.steps();
        Ok(())
    }

    fn apply_key(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse '{v}'")))
        }
        fn dims(key: &str, v: &str) -> Result<(usize, usize)> {
            let (h, w) = v
                .split_once('x')
                .ok_or_else(|| Error::Config(format!("{key}: expected HxW, got '{v}'")))?;
            Ok((num(key, h.trim())?, num(key, w.trim())?))
        }
        match key {
            "run.model" => self.model = ModelKind::parse(value)?,
            "run.dataset" => self.dataset = DatasetKind::parse(value)?,
            "run.seed" => self.seed = num(key, value)?,
            "run.sleep_ratio" => self.sleep_ratio = num(key, value)?,
            "run.telemetry_dir" => self.telemetry_dir = Some(PathBuf::from(value)),

            "network.n_in" => {
                self.arch.n_in = num(key, value)?;
                self.sg.n_in = self.arch.n_in;
            }
            "network.n_exc" => self.arch.n_exc = num(key, value)?,
            "network.n_inh" => self.arch.n_inh = num(key, value)?,
            "network.p_in_exc" => self.arch.p_in_exc = num(key, value)?,
            "network.p_exc_exc" => self.arch.p_exc_exc = num(key, value)?,
            "network.p_exc_inh" => self.arch.p_exc_inh = num(key, value)?,
            "network.p_inh_exc" => self.arch.p_inh_exc = num(key, value)?,
            "network.w_in_exc" => self.arch.w_in_exc = num(key, value)?,
            "network.w_exc_exc" => self.arch.w_exc_exc = num(key, value)?,
            "network.w_exc_inh" => self.arch.w_exc_inh = num(key, value)?,
            "network.w_inh_exc" => self.arch.w_inh_exc = num(key, value)?,
            "network.weight_ceiling" => self.weight_ceiling_factor = num(key, value)?,

            "stdp.eta_exc" => self.stdp.eta_exc = num(key, value)?,
            "stdp.eta_inh" => self.stdp.eta_inh = num(key, value)?,
            "stdp.a_plus" => self.stdp.a_plus = num(key, value)?,
            "stdp.a_minus" => self.stdp.a_minus = num(key, value)?,
            "stdp.tau_plus" => self.stdp.tau_plus = num(key, value)?,
            "stdp.tau_minus" => self.stdp.tau_minus = num(key, value)?,
            "stdp.trace_ceiling" => {
                let v: f64 = num(key, value)?;
                self.trace_ceiling = if v <= 0.0 { f64::INFINITY } else { v };
            }

            "neuro.dt" => {
                self.lif.dt = num(key, value)?;
                self.encoder.dt = self.lif.dt;
            }
            "neuro.tau_m" => self.lif.tau_m = num(key, value)?,
            "neuro.r_m" => self.lif.r_m = num(key, value)?,
            "neuro.u_rest" => self.lif.u_rest = num(key, value)?,
            "neuro.u_reset" => self.lif.u_reset = num(key, value)?,
            "neuro.u_max" => self.lif.u_max = num(key, value)?,
            "neuro.u_min" => self.lif.u_min = num(key, value)?,
            "neuro.noise_mean" => self.lif.noise_mean = num(key, value)?,
            "neuro.noise_std" => self.lif.noise_std = num(key, value)?,
            "neuro.wake_noise" => self.wake_noise = num(key, value)?,
            "neuro.noise_placement" => {
                self.lif.noise_placement = match value {
                    "scaled" => NoisePlacement::ScaledByLeak,
                    "direct" => NoisePlacement::Direct,
                    other => {
                        return Err(Error::Config(format!(
                            "neuro.noise_placement: '{other}' (scaled|direct)"
                        )))
                    }
                }
            }
            "neuro.u_th0" => self.thr.u_th0 = num(key, value)?,
            "neuro.tau_th" => self.thr.tau_th = num(key, value)?,
            "neuro.delta" => self.thr.delta = num(key, value)?,

            "sleep.sleep_interval" => {
                let v: u64 = num(key, value)?;
                self.sleep_interval = if v == 0 { None } else { Some(v) };
            }
            "sleep.lambda" => self.sleep_lambda = num(key, value)?,
            "sleep.w_tgt" => self.sleep_w_tgt = num(key, value)?,
            "sleep.alpha_base" => self.alpha_base = num(key, value)?,
            "sleep.alpha_trig" => self.alpha_trig = Some(num(key, value)?),
            "sleep.wake_reference" => {
                self.wake_reference = match value {
                    "training_start" => WakeReference::TrainingStart,
                    "phase_entry" => WakeReference::PhaseEntry,
                    other => {
                        return Err(Error::Config(format!(
                            "sleep.wake_reference: '{other}' (training_start|phase_entry)"
                        )))
                    }
                }
            }

            "data.n_train" => self.split.n_train = num(key, value)?,
            "data.n_val" => self.split.n_val = num(key, value)?,
            "data.n_test" => self.split.n_test = num(key, value)?,
            "data.batch_size" => self.split.batch_size = num(key, value)?,
            "data.n_batches" => self.split.n_batches = num(key, value)?,
            "data.balance" => self.split.balance = num(key, value)?,
            "data.image_dims" => {
                self.encoder.image_dims = dims(key, value)?;
                self.arch.n_in = self.encoder.n_in();
                self.sg.n_in = self.encoder.n_in();
            }
            "data.f_max" => self.encoder.f_max = num(key, value)?,
            "data.t_image" => self.encoder.t_image = num(key, value)?,
            "data.noise_var" => self.geometric_noise_var = num(key, value)?,
            "data.dataset_root" => self.dataset_root = Some(PathBuf::from(value)),

            "sg.n_hidden" => self.sg.n_hidden = num(key, value)?,
            "sg.n_out" => self.sg.n_out = num(key, value)?,
            "sg.beta_mem" => self.sg.beta_mem = num(key, value)?,
            "sg.u_thr" => self.sg.u_thr = num(key, value)?,
            "sg.alpha_surr" => self.sg.alpha_surr = num(key, value)?,
            "sg.w_init_scale" => self.sg.w_init_scale = num(key, value)?,
            "sg.logits" => {
                self.sg.logits = match value {
                    "membrane" => LogitSource::Membrane,
                    "spikes" => LogitSource::Spikes,
                    other => {
                        return Err(Error::Config(format!("sg.logits: '{other}' (membrane|spikes)")))
                    }
                }
            }
            "sg.minibatch" => self.sg_minibatch = num(key, value)?,
            "sg.sleep_interval" => {
                let v: u64 = num(key, value)?;
                self.sg_sleep_interval = if v == 0 { None } else { Some(v) };
            }
            "sg.aux_eta_exc" => self.sg_aux.eta_exc = num(key, value)?,
            "sg.aux_eta_inh" => self.sg_aux.eta_inh = num(key, value)?,
            "sg.aux_a_plus" => self.sg_aux.a_plus = num(key, value)?,
            "sg.aux_a_minus" => self.sg_aux.a_minus = num(key, value)?,
            "sg.aux_tau_pre" => self.sg_aux.tau_pre = num(key, value)?,
            "sg.aux_tau_post" => self.sg_aux.tau_post = num(key, value)?,
            "sg.noise_mean" => self.sg_sleep.noise_mean = num(key, value)?,
            "sg.noise_std" => self.sg_sleep.noise_std = num(key, value)?,
            "sg.sleep_lambda" => self.sg_sleep_lambda = num(key, value)?,
            "sg.sleep_w_tgt" => self.sg_sleep_w_tgt = num(key, value)?,

            "optim.adam_lr" => self.adam.lr = num(key, value)?,
            "optim.adam_beta1" => self.adam.beta1 = num(key, value)?,
            "optim.adam_beta2" => self.adam.beta2 = num(key, value)?,
            "optim.adam_eps" => self.adam.eps = num(key, value)?,

            "early_stopping.patience_fraction" => self.patience_fraction = num(key, value)?,
            "early_stopping.min_improvement" => self.min_improvement = num(key, value)?,

            "readout.variance_target" => self.readout.variance_target = num(key, value)?,
            "readout.mlr_reg" => self.readout.mlr.reg_strength = num(key, value)?,
            "readout.mlr_max_iters" => self.readout.mlr.max_iters = num(key, value)?,
            "readout.mlr_grad_tol" => self.readout.mlr.grad_tol = num(key, value)?,

            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Render the full configuration in the file format, every key present.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "model = {}", self.model.as_str());
        let _ = writeln!(s, "dataset = {}", self.dataset.as_str());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "sleep_ratio = {}", self.sleep_ratio);
        let _ = writeln!(s, "\n[network]");
        let _ = writeln!(s, "n_in = {}", self.arch.n_in);
        let _ = writeln!(s, "n_exc = {}", self.arch.n_exc);
        let _ = writeln!(s, "n_inh = {}", self.arch.n_inh);
        let _ = writeln!(s, "p_in_exc = {}", self.arch.p_in_exc);
        let _ = writeln!(s, "p_exc_exc = {}", self.arch.p_exc_exc);
        let _ = writeln!(s, "p_exc_inh = {}", self.arch.p_exc_inh);
        let _ = writeln!(s, "p_inh_exc = {}", self.arch.p_inh_exc);
        let _ = writeln!(s, "w_in_exc = {}", self.arch.w_in_exc);
        let _ = writeln!(s, "w_exc_exc = {}", self.arch.w_exc_exc);
        let _ = writeln!(s, "w_exc_inh = {}", self.arch.w_exc_inh);
        let _ = writeln!(s, "w_inh_exc = {}", self.arch.w_inh_exc);
        let _ = writeln!(s, "weight_ceiling = {}", self.weight_ceiling_factor);
        let _ = writeln!(s, "\n[stdp]");
        let _ = writeln!(s, "eta_exc = {}", self.stdp.eta_exc);
        let _ = writeln!(s, "eta_inh = {}", self.stdp.eta_inh);
        let _ = writeln!(s, "a_plus = {}", self.stdp.a_plus);
        let _ = writeln!(s, "a_minus = {}", self.stdp.a_minus);
        let _ = writeln!(s, "tau_plus = {}", self.stdp.tau_plus);
        let _ = writeln!(s, "tau_minus = {}", self.stdp.tau_minus);
        let _ = writeln!(
            s,
            "trace_ceiling = {}",
            if self.trace_ceiling.is_finite() { self.trace_ceiling } else { 0.0 }
        );
        let _ = writeln!(s, "\n[neuro]");
        let _ = writeln!(s, "dt = {}", self.lif.dt);
        let _ = writeln!(s, "tau_m = {}", self.lif.tau_m);
        let _ = writeln!(s, "r_m = {}", self.lif.r_m);
        let _ = writeln!(s, "u_rest = {}", self.lif.u_rest);
        let _ = writeln!(s, "u_reset = {}", self.lif.u_reset);
        let _ = writeln!(s, "u_max = {}", self.lif.u_max);
        let _ = writeln!(s, "u_min = {}", self.lif.u_min);
        let _ = writeln!(s, "noise_mean = {}", self.lif.noise_mean);
        let _ = writeln!(s, "noise_std = {}", self.lif.noise_std);
        let _ = writeln!(s, "wake_noise = {}", self.wake_noise);
        let _ = writeln!(
            s,
            "noise_placement = {}",
            match self.lif.noise_placement {
                NoisePlacement::ScaledByLeak => "scaled",
                NoisePlacement::Direct => "direct",
            }
        );
        let _ = writeln!(s, "u_th0 = {}", self.thr.u_th0);
        let _ = writeln!(s, "tau_th = {}", self.thr.tau_th);
        let _ = writeln!(s, "delta = {}", self.thr.delta);
        let _ = writeln!(s, "\n[sleep]");
        let _ = writeln!(s, "sleep_interval = {}", self.sleep_interval.unwrap_or(0));
        let _ = writeln!(s, "lambda = {}", self.sleep_lambda);
        let _ = writeln!(s, "w_tgt = {}", self.sleep_w_tgt);
        let _ = writeln!(s, "alpha_base = {}", self.alpha_base);
        if let Some(trig) = self.alpha_trig {
            let _ = writeln!(s, "alpha_trig = {trig}");
        }
        let _ = writeln!(
            s,
            "wake_reference = {}",
            match self.wake_reference {
                WakeReference::TrainingStart => "training_start",
                WakeReference::PhaseEntry => "phase_entry",
            }
        );
        let _ = writeln!(s, "\n[data]");
        let _ = writeln!(s, "n_train = {}", self.split.n_train);
        let _ = writeln!(s, "n_val = {}", self.split.n_val);
        let _ = writeln!(s, "n_test = {}", self.split.n_test);
        let _ = writeln!(s, "batch_size = {}", self.split.batch_size);
        let _ = writeln!(s, "n_batches = {}", self.split.n_batches);
        let _ = writeln!(s, "balance = {}", self.split.balance);
        let _ = writeln!(s, "image_dims = {}x{}", self.encoder.image_dims.0, self.encoder.image_dims.1);
        let _ = writeln!(s, "f_max = {}", self.encoder.f_max);
        let _ = writeln!(s, "t_image = {}", self.encoder.t_image);
        let _ = writeln!(s, "noise_var = {}", self.geometric_noise_var);
        if let Some(root) = &self.dataset_root {
            let _ = writeln!(s, "dataset_root = {}", root.display());
        }
        let _ = writeln!(s, "\n[sg]");
        let _ = writeln!(s, "n_hidden = {}", self.sg.n_hidden);
        let _ = writeln!(s, "n_out = {}", self.sg.n_out);
        let _ = writeln!(s, "beta_mem = {}", self.sg.beta_mem);
        let _ = writeln!(s, "u_thr = {}", self.sg.u_thr);
        let _ = writeln!(s, "alpha_surr = {}", self.sg.alpha_surr);
        let _ = writeln!(s, "w_init_scale = {}", self.sg.w_init_scale);
        let _ = writeln!(
            s,
            "logits = {}",
            match self.sg.logits {
                LogitSource::Membrane => "membrane",
                LogitSource::Spikes => "spikes",
            }
        );
        let _ = writeln!(s, "minibatch = {}", self.sg_minibatch);
        let _ = writeln!(s, "sleep_interval = {}", self.sg_sleep_interval.unwrap_or(0));
        let _ = writeln!(s, "aux_eta_exc = {}", self.sg_aux.eta_exc);
        let _ = writeln!(s, "aux_eta_inh = {}", self.sg_aux.eta_inh);
        let _ = writeln!(s, "aux_a_plus = {}", self.sg_aux.a_plus);
        let _ = writeln!(s, "aux_a_minus = {}", self.sg_aux.a_minus);
        let _ = writeln!(s, "aux_tau_pre = {}", self.sg_aux.tau_pre);
        let _ = writeln!(s, "aux_tau_post = {}", self.sg_aux.tau_post);
        let _ = writeln!(s, "noise_mean = {}", self.sg_sleep.noise_mean);
        let _ = writeln!(s, "noise_std = {}", self.sg_sleep.noise_std);
        let _ = writeln!(s, "sleep_lambda = {}", self.sg_sleep_lambda);
        let _ = writeln!(s, "sleep_w_tgt = {}", self.sg_sleep_w_tgt);
        let _ = writeln!(s, "\n[optim]");
        let _ = writeln!(s, "adam_lr = {}", self.adam.lr);
        let _ = writeln!(s, "adam_beta1 = {}", self.adam.beta1);
        let _ = writeln!(s, "adam_beta2 = {}", self.adam.beta2);
        let _ = writeln!(s, "adam_eps = {}", self.adam.eps);
        let _ = writeln!(s, "\n[early_stopping]");
        let _ = writeln!(s, "patience_fraction = {}", self.patience_fraction);
        let _ = writeln!(s, "min_improvement = {}", self.min_improvement);
        let _ = writeln!(s, "\n[readout]");
        let _ = writeln!(s, "variance_target = {}", self.readout.variance_target);
        let _ = writeln!(s, "mlr_reg = {}", self.readout.mlr.reg_strength);
        let _ = writeln!(s, "mlr_max_iters = {}", self.readout.mlr.max_iters);
        let _ = writeln!(s, "mlr_grad_tol = {}", self.readout.mlr.grad_tol);
        s
    }
}
