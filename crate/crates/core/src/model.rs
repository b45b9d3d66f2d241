//! Data containers and the two contracts the checker is written against:
//! a generative model class and a sampler for its parameter weights.

use crate::error::{invalid, Error, Result};
use crate::stats::RngStream;

/// An observed or simulated sequence, optionally paired with an exogenous input.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub observations: Vec<f64>,
    pub inputs: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn new(observations: Vec<f64>) -> Self {
        Self { observations, inputs: None }
    }

    pub fn with_inputs(observations: Vec<f64>, inputs: Vec<f64>) -> Self {
        Self { observations, inputs: Some(inputs) }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Input at time `t`, or 0 when the trajectory carries no inputs.
    #[inline]
    pub fn input(&self, t: usize) -> f64 {
        self.inputs.as_ref().map_or(0.0, |u| u[t])
    }

    /// The first `len` samples (observations and inputs).
    pub fn prefix(&self, len: usize) -> Trajectory {
        Trajectory {
            observations: self.observations[..len].to_vec(),
            inputs: self.inputs.as_ref().map(|u| u[..len].to_vec()),
        }
    }
}

/// Check that a trajectory is nonempty, finite and length-consistent.
pub fn validate_trajectory(t: Trajectory) -> Result<Trajectory> {
    if t.observations.is_empty() {
        return Err(Error::InvalidData("trajectory has no observations".into()));
    }
    if let Some(i) = t.observations.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidData(format!("observation {i} is not finite")));
    }
    if let Some(u) = &t.inputs {
        if u.len() != t.observations.len() {
            return Err(Error::InvalidData(format!("{} inputs for {} observations", u.len(), t.observations.len())));
        }
        if let Some(i) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("input {i} is not finite")));
        }
    }
    Ok(t)
}

/// A point in a model's parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("parameter vector must have at least one entry"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("parameter vector has non-finite entries: {values:?}")));
        }
        Ok(Self(values))
    }

    pub fn scalar(v: f64) -> Result<Self> {
        Self::new(vec![v])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl std::ops::Index<usize> for ParamVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A parametric model class seen as a data generator.
///
/// Implementations must be deterministic given the stream descriptor and hold
/// no mutable state, since the checker calls them from many threads.
pub trait GenerativeModel: Sync {
    fn param_dim(&self) -> usize;

    /// Simulate `len` observations at `theta`. When `inputs` is given its
    /// length is `len` and the simulation is driven by it.
    fn simulate(&self, theta: &ParamVector, inputs: Option<&[f64]>, len: usize, rng: &RngStream) -> Result<Trajectory>;

    /// Exact or estimated surprisal `-ln p(y | theta)`. Exact models ignore `rng`.
    fn surprisal(&self, theta: &ParamVector, y: &Trajectory, rng: &RngStream) -> Result<f64>;

    /// Whether [`surprisal`](Self::surprisal) is a Monte Carlo estimate.
    fn surprisal_is_estimated(&self) -> bool {
        false
    }
}

/// Weighted draws approximating the parameter weight function.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    draws: Vec<ParamVector>,
    weights: Vec<f64>,
}

impl PosteriorDraws {
    /// Equally weighted draws.
    pub fn equal(draws: Vec<ParamVector>) -> Result<Self> {
        if draws.is_empty() {
            return Err(invalid("posterior needs at least one draw"));
        }
        let w = 1.0 / draws.len() as f64;
        let weights = vec![w; draws.len()];
        Ok(Self { draws, weights })
    }

    /// Weighted draws; weights are normalised here.
    pub fn weighted(draws: Vec<ParamVector>, weights: Vec<f64>) -> Result<Self> {
        if draws.is_empty() || draws.len() != weights.len() {
            return Err(invalid(format!("{} draws with {} weights", draws.len(), weights.len())));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(invalid("weights sum to zero"));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { draws, weights })
    }

    pub fn draws(&self) -> &[ParamVector] {
        &self.draws
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// Draws parameters from the normalised product of initial weights and likelihood.
pub trait PosteriorSampler: Sync {
    fn draw(&self, n: usize, rng: &RngStream) -> Result<PosteriorDraws>;
}

/// A sampler that replays a fixed set of draws (e.g. the output of an MCMC run).
///
/// Asking for `n` draws returns `n` entries spread evenly over the stored set.
#[derive(Debug, Clone)]
pub struct FixedDraws(pub PosteriorDraws);

impl PosteriorSampler for FixedDraws {
    fn draw(&self, n: usize, _rng: &RngStream) -> Result<PosteriorDraws> {
        if n == 0 {
            return Err(invalid("requested zero draws"));
        }
        let stored = &self.0;
        if n == stored.len() {
            return Ok(stored.clone());
        }
        let idx: Vec<usize> = (0..n).map(|i| i * stored.len() / n).collect();
        PosteriorDraws::weighted(
            idx.iter().map(|&i| stored.draws[i].clone()).collect(),
            idx.iter().map(|&i| stored.weights[i]).collect(),
        )
    }
}
