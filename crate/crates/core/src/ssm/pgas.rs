use rand::Rng;

use super::pf::{check_inputs, multinomial_resample, normalized_weights, sample_categorical};
use super::StateSpaceModel;
use crate::error::{invalid, Error, Result};
use crate::model::{ParamVector, PosteriorDraws, PosteriorSampler, Trajectory};
use crate::stats::{normal_logpdf, std_normal, RngStream};

/// Prior on a single parameter component. Bounds are inclusive; the density
/// is not renormalised for truncation since the chain only needs ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    /// Held at the given value and never updated.
    Fixed(f64),
    Normal {
        mean: f64,
        sd: f64,
        lower: f64,
        upper: f64,
    },
    /// `ln x ~ N(log_mean, log_sd²)`; sampled on the log scale.
    LogNormal {
        log_mean: f64,
        log_sd: f64,
        lower: f64,
        upper: f64,
    },
}

impl Prior {
    pub fn normal(mean: f64, sd: f64) -> Self {
        Prior::Normal { mean, sd, lower: f64::NEG_INFINITY, upper: f64::INFINITY }
    }

    pub fn log_normal(median: f64, log_sd: f64) -> Self {
        Prior::LogNormal { log_mean: median.ln(), log_sd, lower: 0.0, upper: f64::INFINITY }
    }

    /// Restrict the support to `[lower, upper]`.
    pub fn truncated(self, lo: f64, hi: f64) -> Self {
        match self {
            Prior::Fixed(v) => Prior::Fixed(v),
            Prior::Normal { mean, sd, .. } => Prior::Normal { mean, sd, lower: lo, upper: hi },
            Prior::LogNormal { log_mean, log_sd, .. } => Prior::LogNormal { log_mean, log_sd, lower: lo, upper: hi },
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, Prior::Fixed(_))
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            Prior::Fixed(v) => (v, v),
            Prior::Normal { lower, upper, .. } | Prior::LogNormal { lower, upper, .. } => (lower, upper),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.bounds();
        x >= lo && x <= hi
    }

    /// Log-density in the natural parameterisation, up to a constant.
    pub fn logpdf(&self, x: f64) -> f64 {
        if !self.contains(x) {
            return f64::NEG_INFINITY;
        }
        match *self {
            Prior::Fixed(_) => 0.0,
            Prior::Normal { mean, sd, .. } => normal_logpdf(x, mean, sd * sd),
            Prior::LogNormal { log_mean, log_sd, .. } => normal_logpdf(x.ln(), log_mean, log_sd * log_sd) - x.ln(),
        }
    }

    fn unconstrain(&self, x: f64) -> f64 {
        match self {
            Prior::LogNormal { .. } => x.ln(),
            _ => x,
        }
    }

    fn constrain(&self, u: f64) -> f64 {
        match self {
            Prior::LogNormal { .. } => u.exp(),
            _ => u,
        }
    }

    /// Log-density of the unconstrained coordinate, Jacobian included.
    fn logpdf_unconstrained(&self, u: f64) -> f64 {
        let x = self.constrain(u);
        if !self.contains(x) {
            return f64::NEG_INFINITY;
        }
        match *self {
            Prior::LogNormal { log_mean, log_sd, .. } => normal_logpdf(u, log_mean, log_sd * log_sd),
            _ => self.logpdf(x),
        }
    }

    /// Spread on the unconstrained scale, used to size proposals.
    fn scale(&self) -> f64 {
        match *self {
            Prior::Fixed(_) => 0.0,
            Prior::Normal { sd, .. } => sd,
            Prior::LogNormal { log_sd, .. } => log_sd,
        }
    }

    /// Prior median pulled into the bounds; the default chain start.
    pub fn center(&self) -> f64 {
        let (lo, hi) = self.bounds();
        let c = match *self {
            Prior::Fixed(v) => v,
            Prior::Normal { mean, .. } => mean,
            Prior::LogNormal { log_mean, .. } => log_mean.exp(),
        };
        c.clamp(lo, hi)
    }

    /// Draw from the (truncated) prior by rejection; falls back to the centre
    /// if the bounds hold almost no mass.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        for _ in 0..10_000 {
            let x = match *self {
                Prior::Fixed(v) => return v,
                Prior::Normal { mean, sd, .. } => mean + sd * std_normal(rng),
                Prior::LogNormal { log_mean, log_sd, .. } => (log_mean + log_sd * std_normal(rng)).exp(),
            };
            if self.contains(x) {
                return x;
            }
        }
        self.center()
    }
}

/// Log of p(x_{0:T-1}, y_{0:T-1} | θ); the prior is not included.
pub fn joint_logdensity<M: StateSpaceModel>(model: &M, p: &M::Params, y: &Trajectory, states: &[M::State]) -> f64 {
    let mut total = model.initial_logdensity(p, &states[0]);
    for t in 1..states.len() {
        total += model.transition_logdensity(p, &states[t], &states[t - 1], y.input(t - 1), t - 1);
    }
    for (t, (&obs, x)) in y.observations.iter().zip(states).enumerate() {
        total += model.observation_logdensity(p, obs, x, t);
    }
    if total.is_nan() {
        f64::NEG_INFINITY
    } else {
        total
    }
}

fn observation_weights<M: StateSpaceModel>(model: &M, p: &M::Params, obs: f64, xs: &[M::State], t: usize) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let l = model.observation_logdensity(p, obs, x, t);
            if l.is_nan() {
                f64::NEG_INFINITY
            } else {
                l
            }
        })
        .collect()
}

/// Particle filter with full ancestry, optionally conditioned on a reference
/// trajectory held as the last particle. Returns one trajectory drawn from
/// the final particle system.
fn conditional_smc<M: StateSpaceModel, R: Rng + ?Sized>(
    model: &M,
    p: &M::Params,
    y: &Trajectory,
    reference: Option<&[M::State]>,
    num_particles: usize,
    rng: &mut R,
) -> Result<Vec<M::State>> {
    check_inputs(y, num_particles)?;
    let len = y.len();
    if let Some(r) = reference {
        if r.len() != len {
            return Err(invalid(format!("reference has length {}, data has {len}", r.len())));
        }
        if !(model.initial_logdensity(p, &r[0]) > f64::NEG_INFINITY) {
            return Err(Error::Degeneracy { time: 0, detail: "reference has zero initial density".into() });
        }
    }
    let free = if reference.is_some() { num_particles - 1 } else { num_particles };

    let mut x0: Vec<M::State> = (0..free).map(|_| model.sample_initial_state(p, rng)).collect();
    if let Some(r) = reference {
        x0.push(r[0].clone());
    }
    let mut log_w = observation_weights(model, p, y.observations[0], &x0, 0);
    let mut particles = Vec::with_capacity(len);
    let mut ancestry: Vec<Vec<usize>> = Vec::with_capacity(len);
    particles.push(x0);
    ancestry.push(Vec::new());

    let mut w = Vec::with_capacity(num_particles);
    let mut anc_w = Vec::with_capacity(num_particles);
    let mut log_anc = Vec::with_capacity(num_particles);
    for t in 1..len {
        normalized_weights(&log_w, &mut w)
            .ok_or_else(|| Error::Degeneracy { time: t - 1, detail: "all particle weights are zero".into() })?;
        let mut a = Vec::with_capacity(num_particles);
        multinomial_resample(&w, free, rng, &mut a);
        let u = y.input(t - 1);
        let prev = &particles[t - 1];
        let mut xt: Vec<M::State> = a.iter().map(|&k| model.sample_transition(p, &prev[k], u, t - 1, rng)).collect();
        if let Some(r) = reference {
            log_anc.clear();
            log_anc.extend(log_w.iter().zip(prev).map(|(lw, x)| {
                let l = lw + model.transition_logdensity(p, &r[t], x, u, t - 1);
                if l.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    l
                }
            }));
            normalized_weights(&log_anc, &mut anc_w).ok_or_else(|| Error::Degeneracy {
                time: t,
                detail: "reference state unreachable from every particle".into(),
            })?;
            a.push(sample_categorical(&anc_w, rng));
            xt.push(r[t].clone());
        }
        log_w = observation_weights(model, p, y.observations[t], &xt, t);
        particles.push(xt);
        ancestry.push(a);
    }

    normalized_weights(&log_w, &mut w)
        .ok_or_else(|| Error::Degeneracy { time: len - 1, detail: "all particle weights are zero".into() })?;
    let mut k = sample_categorical(&w, rng);
    let mut path = Vec::with_capacity(len);
    for t in (0..len).rev() {
        path.push(particles[t][k].clone());
        if t > 0 {
            k = ancestry[t][k];
        }
    }
    path.reverse();
    Ok(path)
}

/// One particle-Gibbs-with-ancestor-sampling sweep. The returned trajectory
/// is a draw from a Markov kernel that leaves p(x | θ, y) invariant.
pub fn pgas_update<M: StateSpaceModel, R: Rng + ?Sized>(
    model: &M,
    theta: &ParamVector,
    y: &Trajectory,
    reference: &[M::State],
    num_particles: usize,
    rng: &mut R,
) -> Result<Vec<M::State>> {
    let p = model.params(theta)?;
    pgas_update_params(model, &p, y, reference, num_particles, rng)
}

/// [`pgas_update`] with already decoded parameters.
pub fn pgas_update_params<M: StateSpaceModel, R: Rng + ?Sized>(
    model: &M,
    p: &M::Params,
    y: &Trajectory,
    reference: &[M::State],
    num_particles: usize,
    rng: &mut R,
) -> Result<Vec<M::State>> {
    conditional_smc(model, p, y, Some(reference), num_particles, rng)
}

/// Draw a state trajectory from an unconditional particle filter, e.g. to
/// initialise a PGAS chain.
pub fn sample_state_trajectory<M: StateSpaceModel, R: Rng + ?Sized>(
    model: &M,
    p: &M::Params,
    y: &Trajectory,
    num_particles: usize,
    rng: &mut R,
) -> Result<Vec<M::State>> {
    conditional_smc(model, p, y, None, num_particles, rng)
}

/// Settings for [`pg_parameter_chain`].
#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    /// Total iterations, burn-in included.
    pub num_iters: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in iterate.
    pub thin: usize,
    pub num_particles: usize,
    /// Starting point; defaults to the prior centres.
    pub init: Option<ParamVector>,
    /// Initial proposal scale relative to each prior's spread.
    pub initial_step: f64,
    /// Tune proposal scales during burn-in.
    pub adapt: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { num_iters: 1000, burn_in: 200, thin: 1, num_particles: 100, init: None, initial_step: 0.1, adapt: true }
    }
}

#[derive(Debug, Clone)]
pub struct ChainOutput<S> {
    /// Post-burn-in, thinned, equally weighted θ draws.
    pub draws: PosteriorDraws,
    /// Metropolis acceptance rate over post-burn-in component updates.
    pub acceptance_rate: f64,
    /// Proposal scales (unconstrained coordinates) after adaptation.
    pub step_sizes: Vec<f64>,
    /// State trajectory at the last iteration.
    pub final_states: Vec<S>,
}

const ADAPT_BATCH: usize = 50;
const TARGET_ACCEPT: f64 = 0.44;

/// Metropolis-within-particle-Gibbs: alternate a PGAS sweep of the states
/// with component-wise random-walk Metropolis on θ given the states.
///
/// Positive (log-normal) components move on the log scale. Proposals that
/// leave the prior support or that the model rejects are refused.
pub fn pg_parameter_chain<M: StateSpaceModel, R: Rng + ?Sized>(
    model: &M,
    y: &Trajectory,
    priors: &[Prior],
    config: &ChainConfig,
    rng: &mut R,
) -> Result<ChainOutput<M::State>> {
    if priors.len() != model.param_dim() {
        return Err(invalid(format!("{} priors for {} parameters", priors.len(), model.param_dim())));
    }
    if config.num_iters == 0 || config.num_iters <= config.burn_in {
        return Err(invalid(format!("num_iters = {} must exceed burn_in = {}", config.num_iters, config.burn_in)));
    }
    if config.thin == 0 || !(config.initial_step > 0.0) {
        return Err(invalid("thin and initial_step must be positive"));
    }
    check_inputs(y, config.num_particles)?;

    let theta0: Vec<f64> = match &config.init {
        Some(t) if t.dim() == priors.len() => t.values().to_vec(),
        Some(t) => return Err(invalid(format!("initial θ has {} entries, expected {}", t.dim(), priors.len()))),
        None => priors.iter().map(Prior::center).collect(),
    };
    let mut theta = ParamVector::new(theta0)?;
    let mut p = model.params(&theta)?;
    let mut u: Vec<f64> = priors.iter().zip(theta.values()).map(|(pr, &x)| pr.unconstrain(x)).collect();
    let mut log_prior: Vec<f64> = priors.iter().zip(&u).map(|(pr, &v)| pr.logpdf_unconstrained(v)).collect();

    let mut states = sample_state_trajectory(model, &p, y, config.num_particles, rng)?;
    let mut log_joint = joint_logdensity(model, &p, y, &states);
    if !log_joint.is_finite() || log_prior.iter().any(|l| !l.is_finite()) {
        return Err(invalid(format!("joint density is not finite at the initial θ = {:?}", theta.values())));
    }

    let mut steps: Vec<f64> = priors.iter().map(|pr| config.initial_step * pr.scale()).collect();
    let mut batch_accepts = vec![0usize; priors.len()];
    let mut batch = 0usize;
    let (mut accepted, mut proposed) = (0usize, 0usize);
    let mut draws = Vec::new();

    for iter in 0..config.num_iters {
        states = pgas_update_params(model, &p, y, &states, config.num_particles, rng)?;
        log_joint = joint_logdensity(model, &p, y, &states);

        for k in 0..priors.len() {
            if priors[k].is_fixed() {
                continue;
            }
            let u_new = u[k] + steps[k] * std_normal(rng);
            let lp_new = priors[k].logpdf_unconstrained(u_new);
            let mut accept = false;
            if lp_new > f64::NEG_INFINITY {
                let mut values = theta.values().to_vec();
                values[k] = priors[k].constrain(u_new);
                if let Ok(cand) = ParamVector::new(values) {
                    if let Ok(p_new) = model.params(&cand) {
                        let lj_new = joint_logdensity(model, &p_new, y, &states);
                        let log_ratio = lj_new + lp_new - log_joint - log_prior[k];
                        if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
                            theta = cand;
                            p = p_new;
                            u[k] = u_new;
                            log_prior[k] = lp_new;
                            log_joint = lj_new;
                            accept = true;
                        }
                    }
                }
            }
            if iter < config.burn_in {
                batch_accepts[k] += usize::from(accept);
            } else {
                proposed += 1;
                accepted += usize::from(accept);
            }
        }

        if config.adapt && iter < config.burn_in && (iter + 1) % ADAPT_BATCH == 0 {
            batch += 1;
            let delta = (1.0 / (batch as f64).sqrt()).min(1.0);
            for (s, acc) in steps.iter_mut().zip(batch_accepts.iter_mut()) {
                let rate = *acc as f64 / ADAPT_BATCH as f64;
                *s *= if rate > TARGET_ACCEPT { delta.exp() } else { (-delta).exp() };
                *acc = 0;
            }
        }

        if iter >= config.burn_in && (iter - config.burn_in).is_multiple_of(config.thin) {
            draws.push(theta.clone());
        }
    }

    let acceptance_rate = if proposed == 0 { 0.0 } else { accepted as f64 / proposed as f64 };
    Ok(ChainOutput { draws: PosteriorDraws::equal(draws)?, acceptance_rate, step_sizes: steps, final_states: states })
}

/// Posterior sampler backed by a fresh particle-Gibbs chain per request.
#[derive(Debug, Clone)]
pub struct PgasPosteriorSampler<M> {
    pub model: M,
    pub data: Trajectory,
    pub priors: Vec<Prior>,
    pub config: ChainConfig,
}

impl<M: StateSpaceModel> PgasPosteriorSampler<M> {
    /// Run the chain and return its full output.
    pub fn run(&self, rng: &RngStream) -> Result<ChainOutput<M::State>> {
        pg_parameter_chain(&self.model, &self.data, &self.priors, &self.config, &mut rng.rng())
    }
}

impl<M: StateSpaceModel> PosteriorSampler for PgasPosteriorSampler<M> {
    /// `n` draws spread evenly over the chain's retained iterates.
    fn draw(&self, n: usize, rng: &RngStream) -> Result<PosteriorDraws> {
        if n == 0 {
            return Err(invalid("requested zero draws"));
        }
        let out = self.run(rng)?;
        let all = out.draws.draws();
        PosteriorDraws::equal((0..n).map(|i| all[i * all.len() / n].clone()).collect())
    }
}
