use rand::Rng;

use super::StateSpaceModel;
use crate::error::{invalid, Error, Result};
use crate::model::{ParamVector, Trajectory};
use crate::stats::log_mean_exp;

/// Result of a bootstrap particle filter pass.
#[derive(Debug, Clone)]
pub struct PfOutput<S> {
    /// Log of the unbiased likelihood estimate.
    pub loglik: f64,
    /// Particles at the final time step.
    pub particles: Vec<S>,
    /// Unnormalised log-weights of the final particles.
    pub log_weights: Vec<f64>,
}

/// Draw `n` ancestor indices with probabilities proportional to `weights`.
///
/// Uses sorted uniforms built from exponential spacings, so the cost is
/// linear in `n + weights.len()`. Indices come out in increasing order.
pub fn multinomial_resample<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R, out: &mut Vec<usize>) {
    out.clear();
    if n == 0 {
        return;
    }
    let total: f64 = weights.iter().sum();
    // cumulative exponential spacings normalised by their total are sorted U(0,1)
    let mut spacings: Vec<f64> = (0..=n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let mut acc = 0.0;
    for s in spacings.iter_mut() {
        acc += *s;
        *s = acc;
    }
    let scale = total / acc;
    let mut cum = weights[0];
    let mut j = 0;
    for &s in &spacings[..n] {
        let u = s * scale;
        while u >= cum && j + 1 < weights.len() {
            j += 1;
            cum += weights[j];
        }
        out.push(j);
    }
}

/// Single draw from a categorical distribution with unnormalised `weights`.
pub fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return i;
        }
    }
    // rounding at the upper end: fall back to the last positive weight
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(weights.len() - 1)
}

/// Exponentiate log-weights after shifting by their maximum. Returns `None` when all are -inf.
pub(crate) fn normalized_weights(log_w: &[f64], out: &mut Vec<f64>) -> Option<f64> {
    let max = log_w.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return None;
    }
    out.clear();
    out.extend(log_w.iter().map(|l| if l.is_nan() { 0.0 } else { (l - max).exp() }));
    Some(max)
}

pub(crate) fn check_inputs(y: &Trajectory, num_particles: usize) -> Result<()> {
    if num_particles < 2 {
        return Err(invalid(format!("need at least 2 particles, got {num_particles}")));
    }
    if y.is_empty() {
        return Err(invalid("cannot filter an empty trajectory"));
    }
    if let Some(u) = &y.inputs {
        if u.len() != y.len() {
            return Err(Error::InvalidData("input and observation lengths differ".into()));
        }
    }
    Ok(())
}

fn sanitize(v: &mut [f64]) {
    for l in v.iter_mut() {
        if l.is_nan() {
            *l = f64::NEG_INFINITY;
        }
    }
}

/// Bootstrap particle filter with multinomial resampling at every step.
pub fn bootstrap_pf<M: StateSpaceModel, R: Rng + ?Sized>(
    model: &M,
    theta: &ParamVector,
    y: &Trajectory,
    num_particles: usize,
    rng: &mut R,
) -> Result<PfOutput<M::State>> {
    let p = model.params(theta)?;
    bootstrap_pf_params(model, &p, y, num_particles, rng)
}

/// [`bootstrap_pf`] with already decoded parameters.
pub fn bootstrap_pf_params<M: StateSpaceModel, R: Rng + ?Sized>(
    model: &M,
    p: &M::Params,
    y: &Trajectory,
    num_particles: usize,
    rng: &mut R,
) -> Result<PfOutput<M::State>> {
    check_inputs(y, num_particles)?;
    let n = num_particles;
    let mut particles: Vec<M::State> = (0..n).map(|_| model.sample_initial_state(p, rng)).collect();
    let mut next = Vec::with_capacity(n);
    let mut log_w = vec![0.0; n];
    let mut w = Vec::with_capacity(n);
    let mut ancestors = Vec::with_capacity(n);
    let mut loglik = 0.0;

    for (t, &obs) in y.observations.iter().enumerate() {
        if t > 0 {
            normalized_weights(&log_w, &mut w).expect("weights checked at previous step");
            multinomial_resample(&w, n, rng, &mut ancestors);
            let u = y.input(t - 1);
            next.clear();
            next.extend(ancestors.iter().map(|&a| model.sample_transition(p, &particles[a], u, t - 1, rng)));
            std::mem::swap(&mut particles, &mut next);
        }
        for (lw, x) in log_w.iter_mut().zip(&particles) {
            *lw = model.observation_logdensity(p, obs, x, t);
        }
        sanitize(&mut log_w);
        let step = log_mean_exp(&log_w);
        if step == f64::NEG_INFINITY {
            return Err(Error::Degeneracy { time: t, detail: "all particle weights are zero".into() });
        }
        loglik += step;
    }
    Ok(PfOutput { loglik, particles, log_weights: log_w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm::{kalman_loglik, simulate_ssm, FlatObservation, LgssModel};
    use crate::stats::RngStream;

    #[test]
    fn resampling_frequencies() {
        let w = [0.1, 0.0, 0.6, 0.3];
        let mut rng = RngStream::new(1, 0).rng();
        let mut counts = [0usize; 4];
        let mut out = Vec::new();
        for _ in 0..2000 {
            multinomial_resample(&w, 50, &mut rng, &mut out);
            assert!(out.windows(2).all(|p| p[0] <= p[1]));
            for &i in &out {
                counts[i] += 1;
            }
        }
        assert_eq!(counts[1], 0);
        let total = 100_000.0;
        for (c, p) in counts.iter().zip(w) {
            assert!((*c as f64 / total - p).abs() < 0.01);
        }
        let mut c2 = [0usize; 4];
        for _ in 0..20_000 {
            c2[sample_categorical(&w, &mut rng)] += 1;
        }
        assert_eq!(c2[1], 0);
        assert!((c2[2] as f64 / 20_000.0 - 0.6).abs() < 0.02);
    }

    fn lgss() -> LgssModel {
        LgssModel { a: 0.8, c: 1.0, q: 1.0, r: 1.0, m0: 0.0, p0: 1.0 }
    }

    #[test]
    fn flat_observation_density_gives_zero_loglik() {
        let m = FlatObservation(lgss());
        let y = Trajectory::new(vec![0.3, -1.0, 2.0, 0.5]);
        let out = bootstrap_pf(&m, &lgss().theta(), &y, 17, &mut RngStream::new(0, 0).rng()).unwrap();
        assert_eq!(out.loglik, 0.0);
    }

    #[test]
    fn loglik_close_to_kalman() {
        let model = lgss();
        let theta = model.theta();
        let (_, obs) = simulate_ssm(&model, &model, None, 100, &mut RngStream::new(3, 0).rng());
        let y = Trajectory::new(obs);
        let exact = kalman_loglik(&model, &y).unwrap();
        let runs = 100;
        let close = (0..runs)
            .filter(|&i| {
                let est = bootstrap_pf(&model, &theta, &y, 2000, &mut RngStream::new(3, 1 + i).rng()).unwrap();
                (est.loglik - exact).abs() <= 1.0
            })
            .count();
        assert!(close >= 95, "{close} of {runs} within 1 nat");
    }

    #[test]
    fn fewer_particles_more_variance() {
        let model = lgss();
        let theta = model.theta();
        let (_, obs) = simulate_ssm(&model, &model, None, 100, &mut RngStream::new(4, 0).rng());
        let y = Trajectory::new(obs);
        let var_of = |n: usize, tag: u64| {
            let v: Vec<f64> = (0..200)
                .map(|i| bootstrap_pf(&model, &theta, &y, n, &mut RngStream::new(tag, i).rng()).unwrap().loglik)
                .collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        assert!(var_of(2, 10) > var_of(2000, 11));
    }

    #[test]
    fn degeneracy_reports_time() {
        // an observation no particle can explain
        let model = lgss();
        let y = Trajectory::new(vec![0.0, f64::INFINITY]);
        let err = bootstrap_pf(&model, &model.theta(), &y, 10, &mut RngStream::new(0, 0).rng()).unwrap_err();
        assert!(matches!(err, Error::Degeneracy { time: 1, .. }), "{err}");
    }

    #[test]
    fn rejects_bad_arguments() {
        let model = lgss();
        let y = Trajectory::new(vec![0.0]);
        assert!(bootstrap_pf(&model, &model.theta(), &y, 1, &mut RngStream::new(0, 0).rng()).is_err());
        let empty = Trajectory::new(vec![]);
        assert!(bootstrap_pf(&model, &model.theta(), &empty, 10, &mut RngStream::new(0, 0).rng()).is_err());
    }
}
