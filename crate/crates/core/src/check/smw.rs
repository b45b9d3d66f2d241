use rand::Rng;

use crate::error::{invalid, Result};
use crate::model::{ParamVector, Trajectory};
use crate::ssm::{pg_parameter_chain, pgas_update_params, sample_state_trajectory, ChainConfig, Prior, ProcessNoise};
use crate::stats::{ln_normal_cdf, RngStream};

/// PGAS sweeps run at the selected θ before the state draw is taken.
pub const SMW_SWEEPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SmwResult {
    pub z: f64,
    pub p_value: f64,
    /// The single parameter draw the test was conditioned on.
    pub theta: ParamVector,
    /// Number of recovered noise components entering the test.
    pub num_noise: usize,
}

/// Two-sided z-test of zero mean for standardised noise:
/// `z = Σ ε / √n`, `p = 2 (1 - Φ(|z|))`.
pub fn z_test_zero_mean(noise: &[f64]) -> Result<(f64, f64)> {
    if noise.is_empty() {
        return Err(invalid("z-test needs at least one noise value"));
    }
    let z = noise.iter().sum::<f64>() / (noise.len() as f64).sqrt();
    if !z.is_finite() {
        return Err(invalid("noise sequence is not finite"));
    }
    let p = (2.0 * ln_normal_cdf(-z.abs()).exp()).min(1.0);
    Ok((z, p))
}

/// Residual test on a single smoothed state trajectory: run the parameter
/// chain, pick one θ′ from it, draw x ~ p(x | θ′, y) by PGAS, read back the
/// implied process noise and z-test its mean.
pub fn smw_check<M: ProcessNoise>(
    model: &M,
    y: &Trajectory,
    priors: &[Prior],
    config: &ChainConfig,
    rng: &RngStream,
) -> Result<SmwResult> {
    let chain = pg_parameter_chain(model, y, priors, config, &mut rng.substream(0).rng())?;
    let mut r = rng.substream(1).rng();
    let draws = chain.draws.draws();
    let theta = draws[r.random_range(0..draws.len())].clone();
    let p = model.params(&theta)?;

    let mut states = sample_state_trajectory(model, &p, y, config.num_particles, &mut r)?;
    for _ in 0..SMW_SWEEPS {
        states = pgas_update_params(model, &p, y, &states, config.num_particles, &mut r)?;
    }
    let mut noise = Vec::with_capacity(2 * y.len());
    for t in 1..states.len() {
        model.standardized_noise(&p, &states[t], &states[t - 1], y.input(t - 1), t - 1, &mut noise);
    }
    let (z, p_value) = z_test_zero_mean(&noise)?;
    Ok(SmwResult { z, p_value, theta, num_noise: noise.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm::{simulate_ssm, LgssModel, StateSpaceModel};

    #[test]
    fn zero_noise_gives_p_one() {
        assert_eq!(z_test_zero_mean(&[0.0; 10]).unwrap(), (0.0, 1.0));
        assert!(z_test_zero_mean(&[]).is_err());
    }

    #[test]
    fn z_statistic_closed_form() {
        let (z, p) = z_test_zero_mean(&[1.0, 2.0, 3.0, -2.0]).unwrap();
        assert!((z - 2.0).abs() < 1e-15);
        // 2 (1 - Φ(2))
        assert!((p - 0.045_500_263_896_358_42).abs() < 1e-12);
    }

    #[test]
    fn exactly_recovered_noise_is_rarely_extreme() {
        let m = LgssModel { a: 0.8, c: 1.0, q: 1.0, r: 1.0, m0: 0.0, p0: 1.0 };
        let mut extreme = 0;
        for rep in 0..100 {
            let (xs, _) = simulate_ssm(&m, &m, None, 10_000, &mut RngStream::new(17, rep).rng());
            let mut noise = Vec::new();
            for t in 1..xs.len() {
                m.standardized_noise(&m, &xs[t], &xs[t - 1], 0.0, t - 1, &mut noise);
            }
            let (_, p) = z_test_zero_mean(&noise).unwrap();
            extreme += usize::from(p < 0.05);
        }
        assert!(extreme <= 10, "{extreme} extreme p-values");
    }

    #[test]
    fn repeated_invocations_spread_out() {
        let m = LgssModel { a: 0.8, c: 1.0, q: 1.0, r: 1.0, m0: 0.0, p0: 1.0 };
        let (_, obs) = simulate_ssm(&m, &m, None, 100, &mut RngStream::new(5, 0).rng());
        let y = Trajectory::new(obs);
        let priors =
            [Prior::normal(0.5, 0.5).truncated(-0.99, 0.99), Prior::Fixed(1.0), Prior::Fixed(1.0), Prior::Fixed(1.0)];
        let cfg = ChainConfig { num_iters: 150, burn_in: 50, num_particles: 20, ..Default::default() };
        let ps: Vec<f64> =
            (0..20).map(|i| smw_check(&m, &y, &priors, &cfg, &RngStream::new(6, i)).unwrap().p_value).collect();
        let mean = ps.iter().sum::<f64>() / 20.0;
        let sd = (ps.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / 19.0).sqrt();
        assert!(sd > 0.05, "p-values {ps:?}");
        assert_eq!(m.param_dim(), 4);
    }
}
