//! The assembled three-population network for the recurrent STDP model:
//! Poisson input layer feeding a recurrent excitatory population with lateral
//! inhibition. Owns the membrane states, the four sparse synapse groups and
//! the wake/sleep stepping logic.
//!
//! Recurrent and inhibitory currents use the spikes of the previous step;
//! feedforward input uses the current raster column. Traces update before the
//! plasticity rules each step.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::SpikeRaster;
use crate::error::{Error, Result};
use crate::neuron::{lif_step, LifParams, PopulationState, ThresholdParams};
use crate::plasticity::{Polarity, StdpParams, SynapseGroup};
use crate::sleep::{
    decay_group, sleep_budget, wake_condition, SleepPhaseRecord, SleepSchedule, WakeReason,
    WakeReference,
};

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ArchitectureConfig {
    pub n_in: usize,
    pub n_exc: usize,
    pub n_inh: usize,
    pub p_in_exc: f64,
    pub p_exc_exc: f64,
    pub p_exc_inh: f64,
    pub p_inh_exc: f64,
    pub w_in_exc: f64,
    pub w_exc_exc: f64,
    pub w_exc_inh: f64,
    pub w_inh_exc: f64,
}

impl Default for ArchitectureConfig {
    fn default() -> Self {
        ArchitectureConfig {
            n_in: 225,
            n_exc: 200,
            n_inh: 50,
            p_in_exc: 0.10,
            p_exc_exc: 0.15,
            p_exc_inh: 0.20,
            p_inh_exc: 0.25,
            w_in_exc: 0.10,
            w_exc_exc: 0.15,
            w_exc_inh: 0.30,
            w_inh_exc: -0.30,
        }
    }
}

impl ArchitectureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_in == 0 || self.n_exc == 0 || self.n_inh == 0 {
            return Err(Error::InvalidInput("population sizes must be nonzero".into()));
        }
        for (name, p) in [
            ("p_in_exc", self.p_in_exc),
            ("p_exc_exc", self.p_exc_exc),
            ("p_exc_inh", self.p_exc_inh),
            ("p_inh_exc", self.p_inh_exc),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidInput(format!("{name} = {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Multiplier on the initial per-group mean weight magnitude above which a
/// run aborts rather than risking non-finite values.
pub const WEIGHT_CEILING_FACTOR: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct StdpNetwork {
    pub lif: LifParams,
    pub thr: ThresholdParams,
    pub stdp: StdpParams,
    pub exc: PopulationState,
    pub inh: PopulationState,
    pub in_exc: SynapseGroup,
    pub exc_exc: SynapseGroup,
    pub exc_inh: SynapseGroup,
    pub inh_exc: SynapseGroup,
    /// Abort multiplier on each group's initial mean |w|.
    pub ceiling_factor: f64,
    initial_weight_sum: f64,
    initial_mean_abs: [f64; 4],
    global_step: u64,
    // scratch buffers reused across steps
    i_exc: Vec<f64>,
    i_inh: Vec<f64>,
    input_buf: Vec<bool>,
}

impl StdpNetwork {
    pub fn new(
        arch: &ArchitectureConfig,
        lif: LifParams,
        thr: ThresholdParams,
        stdp: StdpParams,
        seed: u64,
    ) -> Result<Self> {
        arch.validate()?;
        lif.validate()?;
        thr.validate(&lif)?;
        stdp.validate()?;
        let mut rng = crate::rng::stream(seed, "connectivity");
        let in_exc =
            SynapseGroup::random("in_exc", arch.n_in, arch.n_exc, arch.p_in_exc, arch.w_in_exc, true, &mut rng)?;
        let exc_exc = SynapseGroup::random(
            "exc_exc",
            arch.n_exc,
            arch.n_exc,
            arch.p_exc_exc,
            arch.w_exc_exc,
            false,
            &mut rng,
        )?;
        let exc_inh = SynapseGroup::random(
            "exc_inh",
            arch.n_exc,
            arch.n_inh,
            arch.p_exc_inh,
            arch.w_exc_inh,
            true,
            &mut rng,
        )?;
        let inh_exc = SynapseGroup::random(
            "inh_exc",
            arch.n_inh,
            arch.n_exc,
            arch.p_inh_exc,
            arch.w_inh_exc,
            true,
            &mut rng,
        )?;
        let initial_mean_abs =
            [in_exc.mean_abs(), exc_exc.mean_abs(), exc_inh.mean_abs(), inh_exc.mean_abs()];
        let initial_weight_sum =
            in_exc.sum_abs() + exc_exc.sum_abs() + exc_inh.sum_abs() + inh_exc.sum_abs();
        Ok(StdpNetwork {
            lif,
            thr,
            stdp,
            exc: PopulationState::new(arch.n_exc, lif.u_rest),
            inh: PopulationState::new(arch.n_inh, lif.u_rest),
            in_exc,
            exc_exc,
            exc_inh,
            inh_exc,
            ceiling_factor: WEIGHT_CEILING_FACTOR,
            initial_weight_sum,
            initial_mean_abs,
            global_step: 0,
            i_exc: vec![0.0; arch.n_exc],
            i_inh: vec![0.0; arch.n_inh],
            input_buf: vec![false; arch.n_in],
        })
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn initial_weight_sum(&self) -> f64 {
        self.initial_weight_sum
    }

    pub fn groups(&self) -> [&SynapseGroup; 4] {
        [&self.in_exc, &self.exc_exc, &self.exc_inh, &self.inh_exc]
    }

    pub fn set_trace_ceiling(&mut self, ceiling: f64) {
        for group in [&mut self.in_exc, &mut self.exc_exc, &mut self.exc_inh, &mut self.inh_exc] {
            group.trace_ceiling = ceiling;
        }
    }

    /// Sum of absolute weights over all plastic groups.
    pub fn plastic_weight_sum(&self) -> f64 {
        self.groups().iter().filter(|g| g.plastic).map(|g| g.sum_abs()).sum()
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.groups().iter().fold(0.0f64, |m, g| m.max(g.max_abs()))
    }

    /// Mean of the per-group initial mean magnitudes.
    pub fn initial_mean_abs_weight(&self) -> f64 {
        self.initial_mean_abs.iter().sum::<f64>() / 4.0
    }

    /// Abort check: the network-wide mean |w| exceeding the ceiling multiple
    /// of its initial value fails the run before weights can reach
    /// non-finite territory. Returns the current global max |w|.
    pub fn check_weight_ceiling(&self) -> Result<f64> {
        let global_max = self.max_abs_weight();
        let synapses: usize = self.groups().iter().map(|g| g.synapse_count()).sum();
        let mean0 = self.initial_weight_sum / synapses.max(1) as f64;
        let mean = self.plastic_weight_sum() / synapses.max(1) as f64;
        if mean0 > 0.0 && mean > self.ceiling_factor * mean0 {
            return Err(Error::RunFailed(format!(
                "weight ceiling: mean |w| = {mean:.4}, {:.1}x its initial value {mean0:.4}",
                mean / mean0,
            )));
        }
        Ok(global_max)
    }

    /// One membrane-and-plasticity step. Does not advance the wall clock;
    /// wake stepping and sleep iterations both land here.
    fn step_core<R: Rng>(&mut self, input_spikes: &[bool], plastic: bool, rng: &mut R) -> Result<()> {
        // currents from current input column and previous-step recurrent spikes
        self.i_exc.iter_mut().for_each(|v| *v = 0.0);
        self.i_inh.iter_mut().for_each(|v| *v = 0.0);
        self.in_exc.accumulate_current(input_spikes, &mut self.i_exc)?;
        self.exc_exc.accumulate_current(&self.exc.spikes, &mut self.i_exc)?;
        self.inh_exc.accumulate_current(&self.inh.spikes, &mut self.i_exc)?;
        self.exc_inh.accumulate_current(&self.exc.spikes, &mut self.i_inh)?;

        lif_step(&mut self.exc, &self.i_exc, &self.lif, &self.thr, rng)?;
        lif_step(&mut self.inh, &self.i_inh, &self.lif, &self.thr, rng)?;

        // traces first, then plasticity (simultaneous pairs potentiate)
        self.in_exc.trace_decay_and_bump(input_spikes, &self.exc.spikes, &self.stdp, self.lif.dt)?;
        self.exc_exc.trace_decay_and_bump(&self.exc.spikes, &self.exc.spikes, &self.stdp, self.lif.dt)?;
        self.exc_inh.trace_decay_and_bump(&self.exc.spikes, &self.inh.spikes, &self.stdp, self.lif.dt)?;
        self.inh_exc.trace_decay_and_bump(&self.inh.spikes, &self.exc.spikes, &self.stdp, self.lif.dt)?;

        if plastic {
            let stdp = self.stdp;
            for (group, (s_pre, s_post)) in [
                (&mut self.in_exc, (input_spikes, self.exc.spikes.as_slice())),
                (&mut self.exc_exc, (self.exc.spikes.as_slice(), self.exc.spikes.as_slice())),
                (&mut self.exc_inh, (self.exc.spikes.as_slice(), self.inh.spikes.as_slice())),
                (&mut self.inh_exc, (self.inh.spikes.as_slice(), self.exc.spikes.as_slice())),
            ] {
                if !group.plastic {
                    continue;
                }
                match group.polarity {
                    Polarity::Excitatory => group.stdp_apply(s_pre, s_post, &stdp)?,
                    Polarity::Inhibitory => group.istdp_apply(s_pre, s_post, &stdp)?,
                }
            }
        }
        Ok(())
    }

    /// Present one encoded stimulus for its full duration with plasticity on
    /// or off. Advances the wall clock by one step per raster column and
    /// returns per-neuron excitatory spike counts.
    pub fn present_sample<R: Rng>(
        &mut self,
        raster: &SpikeRaster,
        plastic: bool,
        rng: &mut R,
    ) -> Result<Vec<u32>> {
        if raster.neurons() != self.input_buf.len() {
            return Err(Error::Shape(format!(
                "raster for {} input neurons, network has {}",
                raster.neurons(),
                self.input_buf.len()
            )));
        }
        let mut counts = vec![0u32; self.exc.len()];
        let mut input = std::mem::take(&mut self.input_buf);
        for t in 0..raster.steps() {
            raster.column(t, &mut input);
            self.step_core(&input, plastic, rng)?;
            for (c, &s) in counts.iter_mut().zip(&self.exc.spikes) {
                *c += u32::from(s);
            }
            self.global_step += 1;
        }
        self.input_buf = input;
        Ok(counts)
    }

    /// Hard-pause sleep phase: input suppressed, membranes driven by
    /// intrinsic noise, plasticity optionally live on spontaneous spikes,
    /// every plastic group decayed each iteration, early wake on the
    /// weight-sum condition. The wall clock does not advance.
    pub fn sleep_phase<R: Rng>(
        &mut self,
        schedule: &SleepSchedule,
        stdp_enabled: bool,
        phase_index: u64,
        rng: &mut R,
    ) -> Result<SleepPhaseRecord> {
        let budget = sleep_budget(schedule);
        let reference = match schedule.wake_reference {
            WakeReference::TrainingStart => self.initial_weight_sum,
            WakeReference::PhaseEntry => self.plastic_weight_sum(),
        };
        let before = self.plastic_weight_sum();
        let clock_before = self.global_step;
        let silent_input = vec![false; self.input_buf.len()];
        let mut iterations = 0u64;
        let mut spontaneous = 0u64;
        let mut reason = WakeReason::BudgetExhausted;

        for _ in 0..budget {
            iterations += 1;
            self.step_core(&silent_input, stdp_enabled, rng)?;
            spontaneous += self.exc.spikes.iter().filter(|&&s| s).count() as u64;
            spontaneous += self.inh.spikes.iter().filter(|&&s| s).count() as u64;
            for group in [&mut self.in_exc, &mut self.exc_exc, &mut self.exc_inh, &mut self.inh_exc]
            {
                if group.plastic {
                    decay_group(group, schedule)?;
                }
            }
            if wake_condition(self.plastic_weight_sum(), reference, schedule) {
                reason = WakeReason::Threshold;
                break;
            }
        }
        debug_assert_eq!(self.global_step, clock_before);
        Ok(SleepPhaseRecord {
            phase_index,
            iterations,
            budget,
            weight_sum_before: before,
            weight_sum_after: self.plastic_weight_sum(),
            wake_reason: reason,
            spontaneous_spikes: spontaneous,
        })
    }

    /// Frozen evaluation: clone the network, disable plasticity, present each
    /// image and collect rate rows. The live network is untouched.
    pub fn evaluate_rates<'a, R: Rng>(
        &self,
        images: impl Iterator<Item = &'a Vec<f64>>,
        encoder: &crate::encoding::EncoderConfig,
        rng: &mut R,
    ) -> Result<crate::linalg::Mat> {
        let mut net = self.clone();
        let mut rows = Vec::new();
        for image in images {
            let raster = crate::encoding::poisson_encode(image, encoder, rng)?;
            let counts = net.present_sample(&raster, false, rng)?;
            rows.push(crate::readout::aggregate_rates(&counts, encoder.t_image));
        }
        crate::linalg::Mat::from_rows(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{poisson_encode, EncoderConfig};
    use crate::rng::stream;

    fn small_arch() -> ArchitectureConfig {
        ArchitectureConfig {
            n_in: 25,
            n_exc: 20,
            n_inh: 5,
            ..ArchitectureConfig::default()
        }
    }

    fn build(seed: u64) -> StdpNetwork {
        StdpNetwork::new(
            &small_arch(),
            LifParams::default(),
            ThresholdParams::default(),
            StdpParams::default(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn construction_respects_polarities_and_self_connection_rule() {
        let net = build(1);
        assert_eq!(net.in_exc.polarity, Polarity::Excitatory);
        assert_eq!(net.exc_exc.polarity, Polarity::Excitatory);
        assert_eq!(net.exc_inh.polarity, Polarity::Excitatory);
        assert_eq!(net.inh_exc.polarity, Polarity::Inhibitory);
        assert!(net.exc_exc.edges().all(|(p, q, _)| p != q));
        assert!(net.inh_exc.weights().iter().all(|&w| w <= 0.0));
    }

    #[test]
    fn presentation_advances_clock_and_is_deterministic() {
        let cfg = EncoderConfig { image_dims: (5, 5), t_image: 50.0, ..EncoderConfig::default() };
        let image: Vec<f64> = (0..25).map(|i| f64::from(u8::from(i % 3 == 0))).collect();

        let run = |seed: u64| {
            let mut net = build(seed);
            let mut enc = stream(seed, "enc");
            let mut sim = stream(seed, "sim");
            let mut all_counts = Vec::new();
            for _ in 0..4 {
                let raster = poisson_encode(&image, &cfg, &mut enc).unwrap();
                all_counts.push(net.present_sample(&raster, true, &mut sim).unwrap());
            }
            (net.global_step(), all_counts, net.plastic_weight_sum())
        };
        let (steps_a, counts_a, sum_a) = run(7);
        let (steps_b, counts_b, sum_b) = run(7);
        assert_eq!(steps_a, 200);
        assert_eq!(counts_a, counts_b);
        assert_eq!(sum_a, sum_b);
        assert_eq!(steps_a, steps_b);
    }

    #[test]
    fn sleep_phase_with_lambda_one_is_pure_replay() {
        let mut net = build(3);
        let mut schedule = SleepSchedule::default();
        schedule.lambda = 1.0;
        schedule.sleep_ratio = 0.01;
        schedule.sleep_interval = 1000;
        schedule.alpha_base = 1e-12; // wake condition cannot trigger
        let before = net.plastic_weight_sum();
        let clock = net.global_step();
        // plasticity off: weights must be exactly unchanged
        let rec = net.sleep_phase(&schedule, false, 0, &mut stream(4, "sleep")).unwrap();
        assert_eq!(net.plastic_weight_sum(), before);
        assert_eq!(net.global_step(), clock);
        assert_eq!(rec.iterations, 10);
        assert_eq!(rec.wake_reason, WakeReason::BudgetExhausted);
    }

    #[test]
    fn sleep_phase_iteration_count_matches_scalar_decay_oracle() {
        // silent network (noise off), uniform |w| = 0.4, wake threshold at
        // 85% of the initial sum: every weight follows the same scalar
        // trajectory, so the wake iteration is predictable per weight.
        let mut lif = LifParams::default();
        lif.noise_std = 0.0;
        let arch = ArchitectureConfig {
            n_in: 10,
            n_exc: 10,
            n_inh: 4,
            p_in_exc: 1.0,
            p_exc_exc: 1.0,
            p_exc_inh: 1.0,
            p_inh_exc: 1.0,
            w_in_exc: 0.4,
            w_exc_exc: 0.4,
            w_exc_inh: 0.4,
            w_inh_exc: -0.4,
        };
        let mut net = StdpNetwork::new(
            &arch,
            lif,
            ThresholdParams::default(),
            StdpParams::default(),
            11,
        )
        .unwrap();
        let schedule = SleepSchedule {
            sleep_ratio: 1.0,
            sleep_interval: 100_000,
            lambda: 0.9997,
            w_tgt: 0.2,
            alpha_base: 0.85,
            ..SleepSchedule::default()
        };

        // scalar oracle: |w|_n = w_tgt * (|w0|/w_tgt)^(lambda^n), uniform
        // across synapses, so the sum crosses when the magnitude does.
        let mut oracle_n = 0u64;
        let mut mag: f64 = 0.4;
        while mag > 0.85 * 0.4 {
            mag = 0.2 * (mag / 0.2f64).powf(0.9997);
            oracle_n += 1;
        }

        let rec = net.sleep_phase(&schedule, true, 0, &mut stream(5, "sleep")).unwrap();
        assert_eq!(rec.wake_reason, WakeReason::Threshold);
        assert_eq!(rec.iterations, oracle_n, "oracle {oracle_n} vs {}", rec.iterations);
        assert!(rec.weight_sum_after <= 0.85 * rec.weight_sum_before + 1e-9);
        assert_eq!(rec.spontaneous_spikes, 0);
    }

    #[test]
    fn weight_ceiling_aborts_runaway_training() {
        let mut net = build(9);
        // inflate every weight magnitude past 10x the initial network mean
        let mean0 = net.plastic_weight_sum()
            / net.groups().iter().map(|g| g.synapse_count()).sum::<usize>() as f64;
        for group in [&mut net.in_exc, &mut net.exc_exc, &mut net.exc_inh, &mut net.inh_exc] {
            for w in group.weights_mut() {
                *w = 11.0 * mean0 * w.signum();
            }
        }
        let err = net.check_weight_ceiling().unwrap_err();
        assert!(matches!(err, Error::RunFailed(_)));
        assert!(err.to_string().contains("weight ceiling"), "{err}");

        // a single hot synapse does not abort on its own
        let mut net = build(9);
        net.exc_exc.weights_mut()[0] = 2.0;
        let max = net.check_weight_ceiling().unwrap();
        assert_eq!(max, 2.0);
    }

    #[test]
    fn frozen_evaluation_leaves_training_state_untouched() {
        let cfg = EncoderConfig { image_dims: (5, 5), t_image: 30.0, ..EncoderConfig::default() };
        let net = build(13);
        let images: Vec<Vec<f64>> = (0..3)
            .map(|k| (0..25).map(|i| f64::from(u8::from((i + k) % 4 == 0))).collect())
            .collect();
        let before_sum = net.plastic_weight_sum();
        let before_step = net.global_step();
        let rates = net
            .evaluate_rates(images.iter(), &cfg, &mut stream(14, "eval"))
            .unwrap();
        assert_eq!(rates.rows, 3);
        assert_eq!(rates.cols, 20);
        assert_eq!(net.plastic_weight_sum(), before_sum);
        assert_eq!(net.global_step(), before_step);
    }
}
