//! Scalar linear-Gaussian state-space model and exact Kalman recursions,
//! used as the reference oracle for the particle methods.
//!
//! ```text
//! x_0 ~ N(m0, p0),  x_{t+1} = a x_t + N(0, q),  y_t = c x_t + N(0, r)
//! ```

use rand::Rng;

use super::{ProcessNoise, StateSpaceModel};
use crate::error::{invalid, Error, Result};
use crate::model::{ParamVector, Trajectory};
use crate::stats::{normal_logpdf, std_normal};

/// θ = (a, c, q, r); the initial distribution is fixed by the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgssModel {
    pub a: f64,
    pub c: f64,
    pub q: f64,
    pub r: f64,
    pub m0: f64,
    pub p0: f64,
}

impl LgssModel {
    pub fn theta(&self) -> ParamVector {
        ParamVector::new(vec![self.a, self.c, self.q, self.r]).expect("finite LGSS parameters")
    }

    fn validate(&self) -> Result<()> {
        let finite = [self.a, self.c, self.q, self.r, self.m0, self.p0].iter().all(|v| v.is_finite());
        if !finite || !(self.q > 0.0) || !(self.r > 0.0) || !(self.p0 >= 0.0) {
            return Err(invalid(format!("invalid LGSS parameters {self:?}")));
        }
        Ok(())
    }
}

impl StateSpaceModel for LgssModel {
    type State = f64;
    type Params = LgssModel;

    fn param_dim(&self) -> usize {
        4
    }

    fn params(&self, theta: &ParamVector) -> Result<LgssModel> {
        let [a, c, q, r] = theta.values() else {
            return Err(invalid(format!("LGSS expects 4 parameters, got {}", theta.dim())));
        };
        let p = LgssModel { a: *a, c: *c, q: *q, r: *r, ..*self };
        p.validate()?;
        Ok(p)
    }

    fn sample_initial_state<R: Rng + ?Sized>(&self, p: &LgssModel, rng: &mut R) -> f64 {
        p.m0 + p.p0.sqrt() * std_normal(rng)
    }

    fn initial_logdensity(&self, p: &LgssModel, x: &f64) -> f64 {
        normal_logpdf(*x, p.m0, p.p0)
    }

    fn sample_transition<R: Rng + ?Sized>(&self, p: &LgssModel, x: &f64, _u: f64, _t: usize, rng: &mut R) -> f64 {
        p.a * x + p.q.sqrt() * std_normal(rng)
    }

    fn transition_logdensity(&self, p: &LgssModel, next: &f64, x: &f64, _u: f64, _t: usize) -> f64 {
        normal_logpdf(*next, p.a * x, p.q)
    }

    fn sample_observation<R: Rng + ?Sized>(&self, p: &LgssModel, x: &f64, _t: usize, rng: &mut R) -> f64 {
        p.c * x + p.r.sqrt() * std_normal(rng)
    }

    fn observation_logdensity(&self, p: &LgssModel, obs: f64, x: &f64, _t: usize) -> f64 {
        normal_logpdf(obs, p.c * x, p.r)
    }
}

impl ProcessNoise for LgssModel {
    fn standardized_noise(&self, p: &LgssModel, next: &f64, x: &f64, _u: f64, _t: usize, out: &mut Vec<f64>) {
        out.push((next - p.a * x) / p.q.sqrt());
    }
}

/// Kalman filter pass: predictive and filtered moments plus the exact log-likelihood.
#[derive(Debug, Clone)]
pub struct KalmanOutput {
    pub loglik: f64,
    pub predicted_means: Vec<f64>,
    pub predicted_vars: Vec<f64>,
    pub filtered_means: Vec<f64>,
    pub filtered_vars: Vec<f64>,
}

pub fn kalman_filter(model: &LgssModel, y: &Trajectory) -> Result<KalmanOutput> {
    model.validate()?;
    let n = y.len();
    let mut out = KalmanOutput {
        loglik: 0.0,
        predicted_means: Vec::with_capacity(n),
        predicted_vars: Vec::with_capacity(n),
        filtered_means: Vec::with_capacity(n),
        filtered_vars: Vec::with_capacity(n),
    };
    let (mut m, mut p) = (model.m0, model.p0);
    for (t, &obs) in y.observations.iter().enumerate() {
        out.predicted_means.push(m);
        out.predicted_vars.push(p);
        let s = model.c * model.c * p + model.r;
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::Numerical(format!("innovation variance {s} at t = {t}")));
        }
        out.loglik += normal_logpdf(obs, model.c * m, s);
        let k = p * model.c / s;
        m += k * (obs - model.c * m);
        p *= 1.0 - k * model.c;
        out.filtered_means.push(m);
        out.filtered_vars.push(p);
        m *= model.a;
        p = model.a * model.a * p + model.q;
    }
    Ok(out)
}

/// Exact log-likelihood by prediction-error decomposition.
pub fn kalman_loglik(model: &LgssModel, y: &Trajectory) -> Result<f64> {
    Ok(kalman_filter(model, y)?.loglik)
}

/// Rauch-Tung-Striebel smoothed means `E[x_t | y_{0:T-1}]`.
pub fn kalman_smoother_means(model: &LgssModel, y: &Trajectory) -> Result<Vec<f64>> {
    let kf = kalman_filter(model, y)?;
    let n = y.len();
    let mut smoothed = kf.filtered_means.clone();
    for t in (0..n.saturating_sub(1)).rev() {
        let pred_var = kf.predicted_vars[t + 1];
        let gain = if pred_var > 0.0 { kf.filtered_vars[t] * model.a / pred_var } else { 0.0 };
        smoothed[t] = kf.filtered_means[t] + gain * (smoothed[t + 1] - kf.predicted_means[t + 1]);
    }
    Ok(smoothed)
}
