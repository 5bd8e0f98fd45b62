//! Leaky integrate-and-fire dynamics and their surrogate-gradient backward.
//!
//! A neuron layer keeps a membrane potential `u` per neuron, a scalar firing
//! threshold `v_t` and a scalar leak `l_k`. With normalized potential
//! `z = u / v_t - 1` and spike `O = [z > 0]`, one step is
//!
//! ```text
//! u' = l_k * u + I - v_t * O(u)
//! ```
//!
//! Inside a network the spike a layer emits at step `t` is decided on the
//! freshly integrated potential, `s_t = O(u_t)`, so a spike travels through
//! every layer within the same step. The recurrence for `u` is unchanged:
//! `u_t = l_k * u_{t-1} + I_t - v_t * s_{t-1}`.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorops::Tensor;

/// Smallest threshold kept after a parameter update.
pub const MIN_THRESHOLD: f64 = 0.01;
/// Smallest leak kept after a parameter update; the largest is 1.
pub const MIN_LEAK: f64 = 1e-3;

/// Spike nonlinearity used in the forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SpikeFn {
    /// Binary spikes `[z > 0]`.
    #[default]
    Heaviside,
    /// `gamma * integral(max(0, 1 - |z|))`: the smooth function whose exact
    /// derivative is the surrogate. Used to check gradients by finite
    /// differences.
    Smoothed,
}

impl SpikeFn {
    #[inline]
    pub fn eval(self, z: f64, gamma: f64) -> f64 {
        match self {
            SpikeFn::Heaviside => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeFn::Smoothed => {
                let ramp = if z <= -1.0 {
                    0.0
                } else if z <= 0.0 {
                    0.5 * (1.0 + z) * (1.0 + z)
                } else if z < 1.0 {
                    1.0 - 0.5 * (1.0 - z) * (1.0 - z)
                } else {
                    1.0
                };
                gamma * ramp
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuronState {
    pub u: Tensor,
    pub threshold: f64,
    pub leak: f64,
    /// Index of the next step.
    pub t: usize,
}

impl NeuronState {
    pub fn resting(shape: &[usize], threshold: f64, leak: f64) -> Self {
        Self { u: Tensor::zeros(shape), threshold, leak, t: 0 }
    }

    fn check(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::State(alloc::format!("threshold must be positive, got {}", self.threshold)));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn normalized(u: f64, threshold: f64) -> f64 {
    u / threshold - 1.0
}

/// One LIF step: spikes decided on the incoming potential, then leak,
/// integrate and soft reset.
pub fn lif_step(state: &NeuronState, weighted_input: &Tensor) -> Result<(Tensor, NeuronState)> {
    lif_step_with(state, weighted_input, SpikeFn::Heaviside, 0.0)
}

pub(crate) fn lif_step_with(
    state: &NeuronState,
    weighted_input: &Tensor,
    spike_fn: SpikeFn,
    gamma: f64,
) -> Result<(Tensor, NeuronState)> {
    state.check()?;
    state.u.check_same_shape(weighted_input)?;
    let (v, lk) = (state.threshold, state.leak);
    let spikes = state.u.map(|u| spike_fn.eval(normalized(u, v), gamma));
    let mut u = state.u.clone();
    for ((u, &i), &o) in u.data_mut().iter_mut().zip(weighted_input.data()).zip(spikes.data()) {
        *u = lk * *u + i - v * o;
    }
    Ok((spikes, NeuronState { u, threshold: v, leak: lk, t: state.t + 1 }))
}

/// Element-wise `gamma * max(0, 1 - |z|)`.
pub fn surrogate_grad(z: &Tensor, gamma: f64) -> Tensor {
    z.map(|z| surrogate(z, gamma))
}

#[inline]
pub(crate) fn surrogate(z: f64, gamma: f64) -> f64 {
    gamma * f64::max(0.0, 1.0 - libm::fabs(z))
}

/// Per-step record of one neuron layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrace {
    /// Potential before the first recorded step.
    pub initial_potential: Tensor,
    /// Spike state matching `initial_potential`.
    pub initial_spikes: Tensor,
    /// `u_t` after each step's integration.
    pub potentials: Vec<Tensor>,
    /// `s_t` emitted at each step.
    pub spikes: Vec<Tensor>,
}

impl SpikeTrace {
    pub fn len(&self) -> usize {
        self.spikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spikes.is_empty()
    }

    pub fn total_spikes(&self) -> f64 {
        self.spikes.iter().map(Tensor::sum).sum()
    }

    /// Per-neuron spike counts over the recorded steps.
    pub fn counts(&self) -> Tensor {
        let mut acc = Tensor::zeros(self.initial_potential.shape());
        for s in &self.spikes {
            acc.add_assign(s).expect("trace shapes are uniform");
        }
        acc
    }
}

/// Neuron-layer parameters seen by the backward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronParams {
    pub threshold: f64,
    pub leak: f64,
    pub gamma: f64,
    /// Treat the reset term's spike as a constant when backpropagating.
    pub detach_reset: bool,
}

/// A neuron layer being driven step by step.
#[derive(Debug, Clone)]
pub struct LifRun {
    state: NeuronState,
    last_spikes: Tensor,
    spike_fn: SpikeFn,
    gamma: f64,
    trace: Option<SpikeTrace>,
}

impl LifRun {
    pub fn new(state: NeuronState, spike_fn: SpikeFn, gamma: f64, record: bool) -> Result<Self> {
        state.check()?;
        let v = state.threshold;
        let last_spikes = state.u.map(|u| spike_fn.eval(normalized(u, v), gamma));
        let trace = record.then(|| SpikeTrace {
            initial_potential: state.u.clone(),
            initial_spikes: last_spikes.clone(),
            potentials: Vec::new(),
            spikes: Vec::new(),
        });
        Ok(Self { state, last_spikes, spike_fn, gamma, trace })
    }

    /// Integrates one step of input and returns the spikes emitted.
    pub fn step(&mut self, weighted_input: &Tensor) -> Result<Tensor> {
        let (_, next) = lif_step_with(&self.state, weighted_input, self.spike_fn, self.gamma)?;
        let v = next.threshold;
        let spikes = next.u.map(|u| self.spike_fn.eval(normalized(u, v), self.gamma));
        if let Some(trace) = self.trace.as_mut() {
            trace.potentials.push(next.u.clone());
            trace.spikes.push(spikes.clone());
        }
        self.state = next;
        self.last_spikes = spikes.clone();
        Ok(spikes)
    }

    pub fn state(&self) -> &NeuronState {
        &self.state
    }

    pub fn into_parts(self) -> (NeuronState, Option<SpikeTrace>) {
        (self.state, self.trace)
    }
}

/// Gradients of one neuron layer over a recorded window.
#[derive(Debug, Clone, PartialEq)]
pub struct BpttGrads {
    pub threshold: f64,
    pub leak: f64,
    /// Gradient w.r.t. the weighted input of every step.
    pub input: Vec<Tensor>,
}

/// Reverse-time pass through `u_t = l_k u_{t-1} + I_t - v_t s_{t-1}`,
/// `s_t = O(u_t / v_t - 1)` with `dO/dz` replaced by the surrogate.
///
/// `upstream[t]` is `dL/ds_t` arriving from the layers above.
pub fn bptt_backward(trace: &SpikeTrace, upstream: &[Tensor], params: &NeuronParams) -> Result<BpttGrads> {
    if trace.len() != upstream.len() {
        return Err(Error::Contract(alloc::format!(
            "trace has {} steps but {} upstream gradients were given",
            trace.len(),
            upstream.len()
        )));
    }
    let NeuronParams { threshold: v, leak: lk, gamma, detach_reset } = *params;
    if !(v > 0.0) {
        return Err(Error::State(alloc::format!("threshold must be positive, got {}", v)));
    }
    let steps = trace.len();
    let n = trace.initial_potential.len();
    let mut grad_v = 0.0;
    let mut grad_lk = 0.0;
    let mut input = alloc::vec![Tensor::zeros(trace.initial_potential.shape()); steps];
    // dL/du_{t+1}, carried backwards
    let mut du_next = alloc::vec![0.0; n];
    let inv_v = 1.0 / v;
    let inv_v2 = inv_v * inv_v;
    for t in (0..steps).rev() {
        upstream[t].check_same_shape(&trace.potentials[t])?;
        let u = trace.potentials[t].data();
        let (u_prev, s_prev) = if t == 0 {
            (trace.initial_potential.data(), trace.initial_spikes.data())
        } else {
            (trace.potentials[t - 1].data(), trace.spikes[t - 1].data())
        };
        let g_up = upstream[t].data();
        let g_in = input[t].data_mut();
        for i in 0..n {
            let mut ds = g_up[i];
            if !detach_reset {
                ds -= v * du_next[i];
            }
            let sg = surrogate(u[i] * inv_v - 1.0, gamma);
            let du = ds * sg * inv_v + lk * du_next[i];
            grad_v -= ds * sg * u[i] * inv_v2;
            grad_v -= du * s_prev[i];
            grad_lk += du * u_prev[i];
            g_in[i] = du;
            du_next[i] = du;
        }
    }
    Ok(BpttGrads { threshold: grad_v, leak: grad_lk, input })
}

/// `acc + weighted_input`; logits are the accumulated sum divided by the
/// number of steps.
pub fn output_accumulate(weighted_input: &Tensor, acc: &Tensor) -> Result<Tensor> {
    acc.zip_map(weighted_input, |a, b| a + b)
}
