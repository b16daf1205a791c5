//! Leaky integrate-and-fire membrane dynamics with adaptive thresholds and
//! intrinsic membrane noise, for the recurrent excitatory/inhibitory network.
//!
//! Integration is forward Euler at a fixed step. The spike check runs on the
//! clamped potential, before reset; reset overrides the clamp.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the intrinsic noise term enters the membrane update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NoisePlacement {
    /// Noise is one more term inside the Euler increment, scaled by dt/τ_m
    /// like the leak and the synaptic drive.
    #[default]
    ScaledByLeak,
    /// Noise is added to the potential directly, in mV per step.
    Direct,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LifParams {
    /// Membrane time constant (ms).
    pub tau_m: f64,
    /// Membrane resistance (mV per unit synaptic current).
    pub r_m: f64,
    /// Resting potential (mV).
    pub u_rest: f64,
    /// Post-spike reset potential (mV).
    pub u_reset: f64,
    /// Hard clamp bounds (mV).
    pub u_min: f64,
    pub u_max: f64,
    /// Intrinsic noise (mV).
    pub noise_mean: f64,
    pub noise_std: f64,
    pub noise_placement: NoisePlacement,
    /// Integration step (ms).
    pub dt: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        LifParams {
            tau_m: 30.0,
            r_m: 30.0,
            u_rest: -70.0,
            u_reset: -80.0,
            u_min: -100.0,
            u_max: 40.0,
            noise_mean: 0.0,
            noise_std: 3.0,
            noise_placement: NoisePlacement::default(),
            dt: 1.0,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_m > 0.0) {
            return Err(Error::InvalidInput("tau_m must be > 0".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidInput("dt must be > 0".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidInput("noise_std must be >= 0".into()));
        }
        if !(self.u_min < self.u_reset && self.u_reset <= self.u_rest && self.u_rest < self.u_max) {
            return Err(Error::InvalidInput(
                "potentials must satisfy u_min < u_reset <= u_rest < u_max".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ThresholdParams {
    /// Baseline spike threshold (mV).
    pub u_th0: f64,
    /// Offset decay time constant (ms).
    pub tau_th: f64,
    /// Offset jump per spike (mV).
    pub delta: f64,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        ThresholdParams { u_th0: -55.0, tau_th: 100.0, delta: 3.0 }
    }
}

impl ThresholdParams {
    pub fn validate(&self, lif: &LifParams) -> Result<()> {
        if !(self.tau_th > 0.0) {
            return Err(Error::InvalidInput("tau_th must be > 0".into()));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidInput("delta must be >= 0".into()));
        }
        if !(self.u_th0 > lif.u_rest) {
            return Err(Error::InvalidInput("u_th0 must exceed u_rest".into()));
        }
        Ok(())
    }
}

/// Per-population membrane state: potentials, adaptive-threshold offsets and
/// the spike flags of the most recent step.
#[derive(Debug, Clone)]
pub struct PopulationState {
    pub u: Vec<f64>,
    pub alpha: Vec<f64>,
    pub spikes: Vec<bool>,
}

impl PopulationState {
    pub fn new(n: usize, u_init: f64) -> Self {
        PopulationState { u: vec![u_init; n], alpha: vec![0.0; n], spikes: vec![false; n] }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }
}

/// One forward-Euler step of the whole population.
///
/// `u += (dt/τ_m)(−(u − u_rest) + r_m·i_syn + ξ)`, clamp, spike on
/// `u ≥ u_th0 + α`, reset spiking neurons to `u_reset`, then decay/bump the
/// threshold offsets.
pub fn lif_step<R: Rng>(
    state: &mut PopulationState,
    i_syn: &[f64],
    params: &LifParams,
    thr: &ThresholdParams,
    rng: &mut R,
) -> Result<()> {
    if i_syn.len() != state.len() {
        return Err(Error::Shape(format!(
            "synaptic current length {} for population of {}",
            i_syn.len(),
            state.len()
        )));
    }
    let k = params.dt / params.tau_m;
    let noise = if params.noise_std > 0.0 {
        Some(Normal::new(params.noise_mean, params.noise_std).map_err(|e| {
            Error::InvalidInput(format!("noise distribution: {e}"))
        })?)
    } else {
        None
    };

    for i in 0..state.len() {
        let xi = noise.as_ref().map_or(params.noise_mean, |n| n.sample(rng));
        let mut u = state.u[i];
        u += match params.noise_placement {
            NoisePlacement::ScaledByLeak => k * (-(u - params.u_rest) + params.r_m * i_syn[i] + xi),
            NoisePlacement::Direct => k * (-(u - params.u_rest) + params.r_m * i_syn[i]) + xi,
        };
        u = u.clamp(params.u_min, params.u_max);
        let fired = u >= thr.u_th0 + state.alpha[i];
        if fired {
            u = params.u_reset;
        }
        state.u[i] = u;
        state.spikes[i] = fired;
    }
    threshold_update(&mut state.alpha, &state.spikes, thr, params.dt)
}

/// Adaptive threshold offsets: `α ← α·(1 − dt/τ_th) + S·δ`, floored at zero.
/// The effective threshold is `u_th0 + α`.
pub fn threshold_update(
    alpha: &mut [f64],
    spikes: &[bool],
    thr: &ThresholdParams,
    dt: f64,
) -> Result<()> {
    if alpha.len() != spikes.len() {
        return Err(Error::Shape(format!(
            "alpha length {} vs spikes length {}",
            alpha.len(),
            spikes.len()
        )));
    }
    let decay = 1.0 - dt / thr.tau_th;
    for (a, &s) in alpha.iter_mut().zip(spikes) {
        *a = (*a * decay + if s { thr.delta } else { 0.0 }).max(0.0);
    }
    Ok(())
}
