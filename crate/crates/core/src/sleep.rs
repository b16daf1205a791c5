//! Sleep–wake scheduling and the homeostatic sleep operator: periodic
//! hard-pause phases with suppressed input, power-law weight decay toward a
//! target magnitude, and a weight-sum wake condition.
//!
//! The operator itself lives here as pure primitives (budget, decay, wake
//! test, onset schedule, telemetry). The phase loops that drive a concrete
//! model are in `network` (recurrent STDP model) and `sg` (feedforward
//! surrogate-gradient model).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plasticity::SynapseGroup;

/// Which weight-sum snapshot anchors the wake condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum WakeReference {
    /// Sum captured once when training starts; sleep renormalizes toward the
    /// original operating range.
    #[default]
    TrainingStart,
    /// Sum captured at each sleep-phase entry.
    PhaseEntry,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SleepSchedule {
    /// Fraction of each wake interval spent in virtual sleep iterations.
    pub sleep_ratio: f64,
    /// Wake steps between sleep onsets.
    pub sleep_interval: u64,
    /// Power-law decay exponent in (0, 1]; 1 disables decay.
    pub lambda: f64,
    /// Target weight magnitude the decay converges to.
    pub w_tgt: f64,
    /// Wake threshold as a fraction of the reference weight sum.
    pub alpha_base: f64,
    /// Accepted for config compatibility and validated against alpha_base;
    /// onset is purely periodic, so it plays no scheduling role.
    pub alpha_trig: Option<f64>,
    pub wake_reference: WakeReference,
}

impl Default for SleepSchedule {
    fn default() -> Self {
        SleepSchedule {
            sleep_ratio: 0.1,
            sleep_interval: 100,
            lambda: 0.9985,
            w_tgt: 0.2,
            alpha_base: 1.0,
            alpha_trig: None,
            wake_reference: WakeReference::default(),
        }
    }
}

impl SleepSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.sleep_ratio) {
            return Err(Error::InvalidInput("sleep_ratio must lie in [0, 1]".into()));
        }
        if self.sleep_interval < 1 {
            return Err(Error::InvalidInput("sleep_interval must be >= 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidInput("lambda must lie in (0, 1]".into()));
        }
        if !(self.w_tgt > 0.0) {
            return Err(Error::InvalidInput("w_tgt must be > 0".into()));
        }
        if !(self.alpha_base > 0.0) {
            return Err(Error::InvalidInput("alpha_base must be > 0".into()));
        }
        if let Some(trig) = self.alpha_trig {
            if !(self.alpha_base < trig) {
                return Err(Error::InvalidInput("alpha_base must be < alpha_trig".into()));
            }
        }
        Ok(())
    }
}

/// Iteration budget for one sleep phase: `max(1, round(ratio · interval))`,
/// or zero when sleep is disabled entirely. Rounding is half-away-from-zero.
pub fn sleep_budget(schedule: &SleepSchedule) -> u64 {
    if schedule.sleep_ratio == 0.0 {
        return 0;
    }
    let raw = schedule.sleep_ratio * schedule.sleep_interval as f64;
    (raw.round() as u64).max(1)
}

/// One power-law decay step on a signed weight:
/// `|w|' = w_tgt · (|w| / w_tgt)^λ`, sign preserved, zero stays zero.
pub fn decay_step(w: f64, schedule: &SleepSchedule) -> Result<f64> {
    if !w.is_finite() {
        return Err(Error::Numeric(format!("decay_step on non-finite weight {w}")));
    }
    if w == 0.0 {
        return Ok(0.0);
    }
    let mag = schedule.w_tgt * (w.abs() / schedule.w_tgt).powf(schedule.lambda);
    Ok(mag.copysign(w))
}

/// Apply `decay_step` to every weight of a group, in place.
pub fn decay_group(group: &mut SynapseGroup, schedule: &SleepSchedule) -> Result<()> {
    if schedule.lambda == 1.0 {
        return Ok(());
    }
    for w in group.weights_mut() {
        *w = decay_step(*w, schedule)?;
    }
    Ok(())
}

/// Wake test: true once the current weight sum has fallen to
/// `alpha_base · reference`.
pub fn wake_condition(weight_sum_now: f64, weight_sum_reference: f64, schedule: &SleepSchedule) -> bool {
    weight_sum_now <= schedule.alpha_base * weight_sum_reference
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WakeReason {
    /// The weight-sum condition fired before the budget ran out.
    Threshold,
    /// The full iteration budget was spent.
    BudgetExhausted,
}

/// One sleep phase's telemetry record, streamed as a JSON line per phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SleepPhaseRecord {
    pub phase_index: u64,
    pub iterations: u64,
    pub budget: u64,
    pub weight_sum_before: f64,
    pub weight_sum_after: f64,
    pub wake_reason: WakeReason,
    /// Spontaneous spikes observed during the phase (replay activity).
    pub spontaneous_spikes: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SleepTelemetry {
    pub phases: Vec<SleepPhaseRecord>,
}

impl SleepTelemetry {
    pub fn record(&mut self, record: SleepPhaseRecord) {
        self.phases.push(record);
    }

    pub fn count_by_reason(&self, reason: WakeReason) -> u64 {
        self.phases.iter().filter(|p| p.wake_reason == reason).count() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseDecision {
    Wake,
    SleepOnset,
}

/// Periodic onset rule: sleep begins exactly at positive multiples of the
/// interval. Step zero is wake (no sleep before any learning).
pub fn wake_sleep_scheduler(step_index: u64, schedule: &SleepSchedule) -> PhaseDecision {
    if schedule.sleep_ratio > 0.0 && step_index > 0 && step_index.is_multiple_of(schedule.sleep_interval) {
        PhaseDecision::SleepOnset
    } else {
        PhaseDecision::Wake
    }
}
