//! State-space models: the model contract, particle filtering for likelihood
//! estimation, particle Gibbs with ancestor sampling, a linear-Gaussian
//! reference model with Kalman oracles, and the cascaded water-tank class.

mod lgss;
mod pf;
mod pgas;
mod watertank;

pub use lgss::{kalman_filter, kalman_loglik, kalman_smoother_means, KalmanOutput, LgssModel};
pub use pf::{bootstrap_pf, bootstrap_pf_params, multinomial_resample, sample_categorical, PfOutput};
pub use pgas::{
    joint_logdensity, pg_parameter_chain, pgas_update, pgas_update_params, sample_state_trajectory, ChainConfig,
    ChainOutput, PgasPosteriorSampler, Prior,
};
pub use watertank::{
    default_input_signal, watertank_simulate, watertank_surprisal, TankSimulation, TankVariant, WaterTankModel,
    WaterTankParams, NOMINAL_THETA, PARAM_NAMES,
};

use rand::Rng;

use crate::error::Result;
use crate::model::{GenerativeModel, ParamVector, Trajectory};
use crate::stats::RngStream;

/// A state-space model with scalar observations.
///
/// States are indexed `0..T`; the transition from `x_t` to `x_{t+1}` is
/// driven by input `u_t`, and `y_t` is observed from `x_t`. Densities are
/// with respect to the same dominating measure used by the samplers, so a
/// model with clamped states reports point masses as log-probabilities.
pub trait StateSpaceModel: Sync {
    type State: Clone + Send + Sync + std::fmt::Debug;
    /// Decoded, validated parameters.
    type Params: Send + Sync;

    fn param_dim(&self) -> usize;

    /// Decode and validate `theta`; fails outside the parameter space.
    fn params(&self, theta: &ParamVector) -> Result<Self::Params>;

    fn sample_initial_state<R: Rng + ?Sized>(&self, p: &Self::Params, rng: &mut R) -> Self::State;

    fn initial_logdensity(&self, p: &Self::Params, state: &Self::State) -> f64;

    fn sample_transition<R: Rng + ?Sized>(
        &self,
        p: &Self::Params,
        state: &Self::State,
        input: f64,
        t: usize,
        rng: &mut R,
    ) -> Self::State;

    /// Exact log-density of [`sample_transition`](Self::sample_transition).
    fn transition_logdensity(
        &self,
        p: &Self::Params,
        next: &Self::State,
        state: &Self::State,
        input: f64,
        t: usize,
    ) -> f64;

    fn sample_observation<R: Rng + ?Sized>(&self, p: &Self::Params, state: &Self::State, t: usize, rng: &mut R) -> f64;

    fn observation_logdensity(&self, p: &Self::Params, obs: f64, state: &Self::State, t: usize) -> f64;
}

/// Models whose process noise can be read back from consecutive states.
pub trait ProcessNoise: StateSpaceModel {
    /// Push the standardised noise components implied by `state -> next`.
    /// Components that cannot be recovered (e.g. hidden by clamping) are skipped.
    fn standardized_noise(
        &self,
        p: &Self::Params,
        next: &Self::State,
        state: &Self::State,
        input: f64,
        t: usize,
        out: &mut Vec<f64>,
    );
}

/// Simulate latent states and observations. Missing inputs are treated as zero.
pub fn simulate_ssm<M: StateSpaceModel, R: Rng + ?Sized>(
    model: &M,
    p: &M::Params,
    inputs: Option<&[f64]>,
    len: usize,
    rng: &mut R,
) -> (Vec<M::State>, Vec<f64>) {
    let mut states = Vec::with_capacity(len);
    let mut obs = Vec::with_capacity(len);
    let mut x = model.sample_initial_state(p, rng);
    for t in 0..len {
        if t > 0 {
            let u = inputs.map_or(0.0, |u| u[t - 1]);
            x = model.sample_transition(p, &x, u, t - 1, rng);
        }
        obs.push(model.sample_observation(p, &x, t, rng));
        states.push(x.clone());
    }
    (states, obs)
}

/// Adapts a state-space model to the generative-model contract, with the
/// surprisal estimated by a bootstrap particle filter.
#[derive(Debug, Clone)]
pub struct SsmGenerative<M> {
    pub model: M,
    pub num_particles: usize,
}

impl<M: StateSpaceModel> SsmGenerative<M> {
    pub fn new(model: M, num_particles: usize) -> Self {
        Self { model, num_particles }
    }
}

impl<M: StateSpaceModel> GenerativeModel for SsmGenerative<M> {
    fn param_dim(&self) -> usize {
        self.model.param_dim()
    }

    fn simulate(&self, theta: &ParamVector, inputs: Option<&[f64]>, len: usize, rng: &RngStream) -> Result<Trajectory> {
        let p = self.model.params(theta)?;
        let (_, obs) = simulate_ssm(&self.model, &p, inputs, len, &mut rng.rng());
        Ok(Trajectory { observations: obs, inputs: inputs.map(<[f64]>::to_vec) })
    }

    fn surprisal(&self, theta: &ParamVector, y: &Trajectory, rng: &RngStream) -> Result<f64> {
        let out = bootstrap_pf(&self.model, theta, y, self.num_particles, &mut rng.rng())?;
        Ok(-out.loglik)
    }

    fn surprisal_is_estimated(&self) -> bool {
        true
    }
}

/// Wraps a model and replaces its observation density by a constant, so
/// observations carry no information. Useful for prior-limit checks.
#[derive(Debug, Clone)]
pub struct FlatObservation<M>(pub M);

impl<M: StateSpaceModel> StateSpaceModel for FlatObservation<M> {
    type State = M::State;
    type Params = M::Params;

    fn param_dim(&self) -> usize {
        self.0.param_dim()
    }

    fn params(&self, theta: &ParamVector) -> Result<Self::Params> {
        self.0.params(theta)
    }

    fn sample_initial_state<R: Rng + ?Sized>(&self, p: &Self::Params, rng: &mut R) -> Self::State {
        self.0.sample_initial_state(p, rng)
    }

    fn initial_logdensity(&self, p: &Self::Params, state: &Self::State) -> f64 {
        self.0.initial_logdensity(p, state)
    }

    fn sample_transition<R: Rng + ?Sized>(
        &self,
        p: &Self::Params,
        state: &Self::State,
        input: f64,
        t: usize,
        rng: &mut R,
    ) -> Self::State {
        self.0.sample_transition(p, state, input, t, rng)
    }

    fn transition_logdensity(
        &self,
        p: &Self::Params,
        next: &Self::State,
        state: &Self::State,
        input: f64,
        t: usize,
    ) -> f64 {
        self.0.transition_logdensity(p, next, state, input, t)
    }

    fn sample_observation<R: Rng + ?Sized>(&self, p: &Self::Params, state: &Self::State, t: usize, rng: &mut R) -> f64 {
        self.0.sample_observation(p, state, t, rng)
    }

    fn observation_logdensity(&self, _p: &Self::Params, _obs: f64, _state: &Self::State, _t: usize) -> f64 {
        0.0
    }
}
