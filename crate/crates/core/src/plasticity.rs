//! Trace-based pairwise STDP for excitatory synapses, inverted STDP for
//! inhibitory synapses, and polarity sign-clamping.
//!
//! Connectivity is drawn once per run and never changes; only weights on the
//! fixed edge set are plastic. Pairing is all-to-all through exponentially
//! decaying traces, which reproduces the two-branch exponential window for
//! isolated spike pairs.
//!
//! Call order within a simulation step matters for simultaneous spikes: decay
//! and bump the traces first, then apply the plasticity rule. The depression
//! branch internally discounts the current step's postsynaptic bump so that a
//! pre/post pair in the same step lands entirely in the potentiation branch.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Traces accumulate without bound by default; a finite ceiling is an
/// optional brake on pairing mass under sustained high-rate input.
pub const DEFAULT_TRACE_CEILING: f64 = f64::INFINITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    Excitatory,
    Inhibitory,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StdpParams {
    /// Excitatory learning rate.
    pub eta_exc: f64,
    /// Inhibitory (un-)learning rate.
    pub eta_inh: f64,
    /// Potentiation amplitude.
    pub a_plus: f64,
    /// Depression amplitude.
    pub a_minus: f64,
    /// Potentiation trace time constant (ms).
    pub tau_plus: f64,
    /// Depression trace time constant (ms).
    pub tau_minus: f64,
}

impl Default for StdpParams {
    fn default() -> Self {
        StdpParams {
            eta_exc: 5e-4,
            eta_inh: 5e-4,
            a_plus: 0.5,
            a_minus: 0.3,
            tau_plus: 10.0,
            tau_minus: 7.5,
        }
    }
}

impl StdpParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("eta_exc", self.eta_exc),
            ("eta_inh", self.eta_inh),
            ("a_plus", self.a_plus),
            ("a_minus", self.a_minus),
            ("tau_plus", self.tau_plus),
            ("tau_minus", self.tau_minus),
        ];
        for (name, v) in fields {
            if !(v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }
}

/// A sparse synapse population with fixed connectivity, one polarity, and
/// per-neuron pre/post spike traces.
#[derive(Debug, Clone)]
pub struct SynapseGroup {
    pub name: &'static str,
    pub polarity: Polarity,
    pub plastic: bool,
    /// Upper bound on the accumulated traces. Spike bursts longer than
    /// ~tau stack traces linearly with rate; under the saturated encoder
    /// (1 kHz inputs) unbounded stacking multiplies the effective pairing
    /// rate by an order of magnitude, so the ceiling caps how many pairs a
    /// single spike can form. Isolated pairs and short bursts never reach
    /// it. `f64::INFINITY` restores pure accumulation.
    pub trace_ceiling: f64,
    pre_count: usize,
    post_count: usize,
    pre_idx: Vec<u32>,
    post_idx: Vec<u32>,
    weights: Vec<f64>,
    /// Synapse ids grouped by presynaptic neuron.
    by_pre: Vec<Vec<u32>>,
    /// Synapse ids grouped by postsynaptic neuron.
    by_post: Vec<Vec<u32>>,
    x_pre: Vec<f64>,
    x_post: Vec<f64>,
}

impl SynapseGroup {
    /// Build a group from an explicit edge list. The edge set is the
    /// connectivity mask; weights are sign-clamped to the polarity.
    pub fn from_edges(
        name: &'static str,
        pre_count: usize,
        post_count: usize,
        polarity: Polarity,
        edges: &[(u32, u32, f64)],
    ) -> Result<Self> {
        let mut group = SynapseGroup {
            name,
            polarity,
            plastic: true,
            trace_ceiling: DEFAULT_TRACE_CEILING,
            pre_count,
            post_count,
            pre_idx: Vec::with_capacity(edges.len()),
            post_idx: Vec::with_capacity(edges.len()),
            weights: Vec::with_capacity(edges.len()),
            by_pre: vec![Vec::new(); pre_count],
            by_post: vec![Vec::new(); post_count],
            x_pre: vec![0.0; pre_count],
            x_post: vec![0.0; post_count],
        };
        for &(pre, post, w) in edges {
            if pre as usize >= pre_count || post as usize >= post_count {
                return Err(Error::Shape(format!(
                    "{name}: edge ({pre},{post}) outside {pre_count}x{post_count}"
                )));
            }
            let id = group.weights.len() as u32;
            group.pre_idx.push(pre);
            group.post_idx.push(post);
            group.weights.push(w);
            group.by_pre[pre as usize].push(id);
            group.by_post[post as usize].push(id);
        }
        group.sign_clamp();
        Ok(group)
    }

    /// Draw Bernoulli(p) connectivity with a uniform initial weight.
    /// `allow_self` should be false for recurrent groups.
    pub fn random<R: Rng>(
        name: &'static str,
        pre_count: usize,
        post_count: usize,
        p: f64,
        weight: f64,
        allow_self: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("{name}: wiring probability {p}")));
        }
        let polarity = if weight < 0.0 { Polarity::Inhibitory } else { Polarity::Excitatory };
        let mut edges = Vec::new();
        for pre in 0..pre_count {
            for post in 0..post_count {
                if !allow_self && pre == post {
                    continue;
                }
                if rng.random::<f64>() < p {
                    edges.push((pre as u32, post as u32, weight));
                }
            }
        }
        Self::from_edges(name, pre_count, post_count, polarity, &edges)
    }

    pub fn pre_count(&self) -> usize {
        self.pre_count
    }

    pub fn post_count(&self) -> usize {
        self.post_count
    }

    pub fn synapse_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn traces(&self) -> (&[f64], &[f64]) {
        (&self.x_pre, &self.x_post)
    }

    /// (pre, post, weight) triplets in synapse-id order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.weights.len()).map(|s| (self.pre_idx[s], self.post_idx[s], self.weights[s]))
    }

    pub fn contains_edge(&self, pre: u32, post: u32) -> bool {
        self.by_pre
            .get(pre as usize)
            .is_some_and(|ids| ids.iter().any(|&s| self.post_idx[s as usize] == post))
    }

    /// Postsynaptic current `W·S_pre` for one step, accumulated into `out`.
    /// Event-driven: only spiking presynaptic neurons are visited.
    pub fn accumulate_current(&self, s_pre: &[bool], out: &mut [f64]) -> Result<()> {
        if s_pre.len() != self.pre_count {
            return Err(Error::Shape(format!(
                "{}: {} presynaptic spikes for {} neurons",
                self.name,
                s_pre.len(),
                self.pre_count
            )));
        }
        if out.len() != self.post_count {
            return Err(Error::Shape(format!(
                "{}: current buffer {} for {} postsynaptic neurons",
                self.name,
                out.len(),
                self.post_count
            )));
        }
        for (pre, fired) in s_pre.iter().enumerate() {
            if *fired {
                for &s in &self.by_pre[pre] {
                    out[self.post_idx[s as usize] as usize] += self.weights[s as usize];
                }
            }
        }
        Ok(())
    }

    /// Convenience wrapper returning a fresh current vector.
    pub fn synaptic_current(&self, s_pre: &[bool]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.post_count];
        self.accumulate_current(s_pre, &mut out)?;
        Ok(out)
    }

    /// Decay both trace vectors by one step and bump them with this step's
    /// spikes: `x ← x·exp(−dt/τ) + S`.
    pub fn trace_decay_and_bump(
        &mut self,
        s_pre: &[bool],
        s_post: &[bool],
        params: &StdpParams,
        dt: f64,
    ) -> Result<()> {
        if s_pre.len() != self.pre_count || s_post.len() != self.post_count {
            return Err(Error::Shape(format!("{}: trace spike vectors", self.name)));
        }
        let d_plus = (-dt / params.tau_plus).exp();
        let d_minus = (-dt / params.tau_minus).exp();
        for (x, &s) in self.x_pre.iter_mut().zip(s_pre) {
            *x = (*x * d_plus + if s { 1.0 } else { 0.0 }).min(self.trace_ceiling);
        }
        for (x, &s) in self.x_post.iter_mut().zip(s_post) {
            *x = (*x * d_minus + if s { 1.0 } else { 0.0 }).min(self.trace_ceiling);
        }
        Ok(())
    }

    /// Pairwise STDP on an excitatory group. Expects traces already updated
    /// for this step.
    pub fn stdp_apply(&mut self, s_pre: &[bool], s_post: &[bool], params: &StdpParams) -> Result<()> {
        if self.polarity != Polarity::Excitatory {
            return Err(Error::Contract(format!(
                "{}: stdp_apply requires an excitatory group",
                self.name
            )));
        }
        self.pair_update(s_pre, s_post, params.eta_exc * params.a_plus, params.eta_exc * params.a_minus)
    }

    /// Inverted STDP on an inhibitory group: causal pairs push the signed
    /// weight down (stronger inhibition), anti-causal pairs push it up.
    pub fn istdp_apply(
        &mut self,
        s_pre: &[bool],
        s_post: &[bool],
        params: &StdpParams,
    ) -> Result<()> {
        if self.polarity != Polarity::Inhibitory {
            return Err(Error::Contract(format!(
                "{}: istdp_apply requires an inhibitory group",
                self.name
            )));
        }
        self.pair_update(s_pre, s_post, -params.eta_inh * params.a_plus, -params.eta_inh * params.a_minus)
    }

    /// Shared two-branch update. `gain_plus` applies on postsynaptic spikes
    /// against the pre trace (causal pairs, Δt ≥ 0), `gain_minus` on
    /// presynaptic spikes against the post trace (anti-causal, Δt < 0).
    /// Subtracting the same-step post bump keeps Δt = 0 pairs out of the
    /// depression branch.
    fn pair_update(
        &mut self,
        s_pre: &[bool],
        s_post: &[bool],
        gain_plus: f64,
        gain_minus: f64,
    ) -> Result<()> {
        if s_pre.len() != self.pre_count || s_post.len() != self.post_count {
            return Err(Error::Shape(format!("{}: plasticity spike vectors", self.name)));
        }
        for (post, fired) in s_post.iter().enumerate() {
            if *fired {
                for &s in &self.by_post[post] {
                    let s = s as usize;
                    self.weights[s] += gain_plus * self.x_pre[self.pre_idx[s] as usize];
                }
            }
        }
        for (pre, fired) in s_pre.iter().enumerate() {
            if *fired {
                for &s in &self.by_pre[pre] {
                    let s = s as usize;
                    let post = self.post_idx[s] as usize;
                    let trace = self.x_post[post] - if s_post[post] { 1.0 } else { 0.0 };
                    self.weights[s] -= gain_minus * trace;
                }
            }
        }
        self.sign_clamp();
        Ok(())
    }

    /// Polarity enforcement: excitatory weights floored at zero, inhibitory
    /// capped at zero. The edge set is untouched.
    pub fn sign_clamp(&mut self) {
        match self.polarity {
            Polarity::Excitatory => {
                for w in &mut self.weights {
                    if *w < 0.0 {
                        *w = 0.0;
                    }
                }
            }
            Polarity::Inhibitory => {
                for w in &mut self.weights {
                    if *w > 0.0 {
                        *w = 0.0;
                    }
                }
            }
        }
    }

    pub fn sum_abs(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.weights.iter().fold(0.0, |m, w| m.max(w.abs()))
    }

    pub fn mean_abs(&self) -> f64 {
        if self.weights.is_empty() {
            0.0
        } else {
            self.sum_abs() / self.weights.len() as f64
        }
    }

    /// CSV triplet snapshot: `pre_index,post_index,weight`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "pre_index,post_index,weight")?;
        for (pre, post, w) in self.edges() {
            writeln!(out, "{pre},{post},{w}")?;
        }
        Ok(())
    }

    /// Flat binary snapshot: header (magic, pre/post/synapse counts), then
    /// little-endian (u32 pre, u32 post, f64 weight) records.
    pub fn write_binary<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(b"SYNW0001")?;
        out.write_all(&(self.pre_count as u32).to_le_bytes())?;
        out.write_all(&(self.post_count as u32).to_le_bytes())?;
        out.write_all(&(self.weights.len() as u32).to_le_bytes())?;
        for (pre, post, w) in self.edges() {
            out.write_all(&pre.to_le_bytes())?;
            out.write_all(&post.to_le_bytes())?;
            out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn single_synapse(polarity: Polarity, w: f64) -> SynapseGroup {
        SynapseGroup::from_edges("test", 1, 1, polarity, &[(0, 0, w)]).unwrap()
    }

    /// Drive an isolated pre/post spike pair separated by `delta_t` steps
    /// (positive = pre first) through the trace machinery and return the
    /// weight change.
    fn isolated_pair(
        polarity: Polarity,
        w0: f64,
        delta_t: i32,
        params: &StdpParams,
        dt: f64,
    ) -> f64 {
        let mut g = single_synapse(polarity, w0);
        let steps = delta_t.unsigned_abs() as usize;
        let apply = |g: &mut SynapseGroup, s_pre: bool, s_post: bool| {
            g.trace_decay_and_bump(&[s_pre], &[s_post], params, dt).unwrap();
            match polarity {
                Polarity::Excitatory => g.stdp_apply(&[s_pre], &[s_post], params).unwrap(),
                Polarity::Inhibitory => g.istdp_apply(&[s_pre], &[s_post], params).unwrap(),
            }
        };
        if delta_t == 0 {
            apply(&mut g, true, true);
        } else if delta_t > 0 {
            apply(&mut g, true, false);
            for _ in 1..steps {
                apply(&mut g, false, false);
            }
            apply(&mut g, false, true);
        } else {
            apply(&mut g, false, true);
            for _ in 1..steps {
                apply(&mut g, false, false);
            }
            apply(&mut g, true, false);
        }
        g.weights()[0] - w0
    }

    /// Closed-form two-branch window for excitatory STDP.
    fn window_closed_form(delta_t_ms: f64, params: &StdpParams) -> f64 {
        if delta_t_ms >= 0.0 {
            params.eta_exc * params.a_plus * (-delta_t_ms / params.tau_plus).exp()
        } else {
            -params.eta_exc * params.a_minus * (delta_t_ms / params.tau_minus).exp()
        }
    }

    #[test]
    fn trace_decay_closed_forms() {
        let params = StdpParams::default();
        let mut g = single_synapse(Polarity::Excitatory, 0.1);

        // bump from zero
        g.trace_decay_and_bump(&[true], &[false], &params, 1.0).unwrap();
        assert_eq!(g.traces().0[0], 1.0);

        // one tau of decay: tau_plus = 10, dt = 10
        let mut g = single_synapse(Polarity::Excitatory, 0.1);
        g.trace_decay_and_bump(&[true], &[false], &params, 1.0).unwrap();
        g.trace_decay_and_bump(&[false], &[false], &params, 10.0).unwrap();
        assert!((g.traces().0[0] - (-1.0f64).exp()).abs() < 1e-12);

        // superposition: two spikes one step apart, dt = 1, tau = 10
        let mut g = single_synapse(Polarity::Excitatory, 0.1);
        g.trace_decay_and_bump(&[true], &[false], &params, 1.0).unwrap();
        g.trace_decay_and_bump(&[true], &[false], &params, 1.0).unwrap();
        assert!((g.traces().0[0] - (1.0 + (-0.1f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn stdp_simultaneous_pair_is_pure_potentiation() {
        let params = StdpParams::default();
        let dw = isolated_pair(Polarity::Excitatory, 0.1, 0, &params, 1.0);
        assert!((dw - 2.5e-4).abs() < 1e-15, "dw = {dw}");
    }

    #[test]
    fn stdp_causal_pair_at_one_tau() {
        let params = StdpParams::default();
        let dw = isolated_pair(Polarity::Excitatory, 0.1, 10, &params, 1.0);
        let expected = 2.5e-4 * (-1.0f64).exp();
        assert!((dw - expected).abs() < 1e-12, "dw = {dw} vs {expected}");
        assert!((expected - 9.197e-5).abs() < 1e-8);
    }

    #[test]
    fn stdp_anticausal_pair_at_one_tau() {
        // tau_minus = 7.5 ms: run at dt = 0.5 so -7.5 ms is 15 steps.
        let params = StdpParams::default();
        let dw = isolated_pair(Polarity::Excitatory, 0.1, -15, &params, 0.5);
        let expected = -5e-4 * 0.3 * (-1.0f64).exp();
        assert!((dw - expected).abs() < 1e-12, "dw = {dw} vs {expected}");
        assert!((expected + 5.518e-5).abs() < 1e-8);
    }

    #[test]
    fn istdp_signs_are_inverted() {
        let params = StdpParams::default();
        let dw = isolated_pair(Polarity::Inhibitory, -0.3, 0, &params, 1.0);
        assert!((dw + 2.5e-4).abs() < 1e-15, "dw = {dw}");

        let dw = isolated_pair(Polarity::Inhibitory, -0.3, -15, &params, 0.5);
        let expected = 5e-4 * 0.3 * (-1.0f64).exp();
        assert!((dw - expected).abs() < 1e-12, "dw = {dw} vs {expected}");
    }

    #[test]
    fn istdp_without_spikes_is_identity() {
        let params = StdpParams::default();
        let mut g = single_synapse(Polarity::Inhibitory, -0.3);
        for _ in 0..10 {
            g.trace_decay_and_bump(&[false], &[false], &params, 1.0).unwrap();
            g.istdp_apply(&[false], &[false], &params).unwrap();
        }
        assert_eq!(g.weights()[0], -0.3);
    }

    #[test]
    fn window_matches_closed_form_over_full_range() {
        // Trace realization vs the two-branch exponential for isolated pairs,
        // Δt in -50..=50 ms at dt = 1 ms, relative tolerance 1e-6.
        let params = StdpParams::default();
        for delta_t in -50..=50 {
            let dw = isolated_pair(Polarity::Excitatory, 0.1, delta_t, &params, 1.0);
            let expected = window_closed_form(delta_t as f64, &params);
            let rel = (dw - expected).abs() / expected.abs();
            assert!(rel < 1e-6, "dt={delta_t}: dw={dw}, closed={expected}, rel={rel}");
            if delta_t >= 0 {
                assert!(dw > 0.0);
            } else {
                assert!(dw < 0.0);
            }
            // inhibitory branch is the mirror image
            let dwi = isolated_pair(Polarity::Inhibitory, -0.3, delta_t, &params, 1.0);
            let reli = (dwi + expected).abs() / expected.abs();
            assert!(reli < 1e-6, "inh dt={delta_t}: dw={dwi}, rel={reli}");
        }
    }

    #[test]
    fn trace_ceiling_caps_sustained_bursts_only() {
        let params = StdpParams::default();
        // default: unbounded accumulation approaches 1/(1-e^-0.1) ~ 10.5
        // under a spike every step
        let mut g = single_synapse(Polarity::Excitatory, 0.1);
        for _ in 0..2000 {
            g.trace_decay_and_bump(&[true], &[false], &params, 1.0).unwrap();
        }
        let expect = 1.0 / (1.0 - (-0.1f64).exp());
        assert!((g.traces().0[0] - expect).abs() < 1e-9);

        // with a finite ceiling the same burst saturates at the cap
        let mut g = single_synapse(Polarity::Excitatory, 0.1);
        g.trace_ceiling = 5.0;
        for _ in 0..200 {
            g.trace_decay_and_bump(&[true], &[false], &params, 1.0).unwrap();
        }
        assert_eq!(g.traces().0[0], 5.0);
    }

    #[test]
    fn wrong_polarity_is_a_contract_violation() {
        let params = StdpParams::default();
        let mut exc = single_synapse(Polarity::Excitatory, 0.1);
        assert!(matches!(exc.istdp_apply(&[false], &[false], &params), Err(Error::Contract(_))));
        let mut inh = single_synapse(Polarity::Inhibitory, -0.1);
        assert!(matches!(inh.stdp_apply(&[false], &[false], &params), Err(Error::Contract(_))));
    }

    #[test]
    fn sign_clamp_examples() {
        let mut g = single_synapse(Polarity::Excitatory, 0.1);
        g.weights_mut()[0] = -0.01;
        g.sign_clamp();
        assert_eq!(g.weights()[0], 0.0);

        let mut g = single_synapse(Polarity::Inhibitory, -0.1);
        g.weights_mut()[0] = 0.02;
        g.sign_clamp();
        assert_eq!(g.weights()[0], 0.0);

        let mut g = single_synapse(Polarity::Excitatory, 0.1);
        g.sign_clamp();
        assert_eq!(g.weights()[0], 0.1);
    }

    #[test]
    fn sparse_current_matches_dense_product() {
        let mut rng = stream(11, "sparse");
        for _ in 0..20 {
            let pre = 17;
            let post = 13;
            let g = SynapseGroup::random("t", pre, post, 0.3, 0.2, true, &mut rng).unwrap();
            let mut dense = vec![vec![0.0; pre]; post];
            for (p, q, w) in g.edges() {
                dense[q as usize][p as usize] = w;
            }
            let s_pre: Vec<bool> = (0..pre).map(|_| rng.random::<bool>()).collect();
            let sparse = g.synaptic_current(&s_pre).unwrap();
            for (j, row) in dense.iter().enumerate() {
                let want: f64 = row
                    .iter()
                    .zip(&s_pre)
                    .map(|(w, &s)| if s { *w } else { 0.0 })
                    .sum();
                assert_eq!(sparse[j], want);
            }
        }
    }

    #[test]
    fn silent_input_yields_zero_current_and_inhibitory_weights_negative_current() {
        let g = SynapseGroup::from_edges("t", 2, 1, Polarity::Inhibitory, &[(0, 0, -0.3)]).unwrap();
        assert_eq!(g.synaptic_current(&[false, false]).unwrap(), vec![0.0]);
        assert_eq!(g.synaptic_current(&[true, false]).unwrap(), vec![-0.3]);

        let g = SynapseGroup::from_edges("t", 1, 1, Polarity::Excitatory, &[(0, 0, 0.1)]).unwrap();
        assert_eq!(g.synaptic_current(&[true]).unwrap(), vec![0.1]);
    }

    #[test]
    fn mask_is_immutable_under_training() {
        let mut rng = stream(3, "mask");
        let mut g = SynapseGroup::random("t", 10, 10, 0.25, 0.1, false, &mut rng).unwrap();
        let edges_before: Vec<(u32, u32)> = g.edges().map(|(p, q, _)| (p, q)).collect();
        let params = StdpParams::default();
        for _ in 0..200 {
            let s_pre: Vec<bool> = (0..10).map(|_| rng.random::<f64>() < 0.3).collect();
            let s_post: Vec<bool> = (0..10).map(|_| rng.random::<f64>() < 0.3).collect();
            g.trace_decay_and_bump(&s_pre, &s_post, &params, 1.0).unwrap();
            g.stdp_apply(&s_pre, &s_post, &params).unwrap();
        }
        let edges_after: Vec<(u32, u32)> = g.edges().map(|(p, q, _)| (p, q)).collect();
        assert_eq!(edges_before, edges_after);
        // polarity invariant held throughout (spot check at end)
        assert!(g.weights().iter().all(|&w| w >= 0.0));
        // no self connections were drawn
        assert!(edges_after.iter().all(|&(p, q)| p != q));
    }

    #[test]
    fn snapshot_formats_roundtrip_header() {
        let g = single_synapse(Polarity::Excitatory, 0.125);
        let mut csv = Vec::new();
        g.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("pre_index,post_index,weight\n0,0,0.125\n"));

        let mut bin = Vec::new();
        g.write_binary(&mut bin).unwrap();
        assert_eq!(&bin[0..8], b"SYNW0001");
        assert_eq!(bin.len(), 8 + 12 + 16);
    }
}
