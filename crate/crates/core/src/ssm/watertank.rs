//! Two cascaded tanks with a pump-driven upper tank, gravity outflow into the
//! lower tank, and the lower-tank level observed in noise.
//!
//! Euler step of length `dt` with process noise scaled by `√dt`:
//!
//! ```text
//! r1  = x1 + dt (-k1 √x1 - k4 x1 + k2 u) + √dt w1
//! x1' = clamp(r1, 0, c1),  spill = max(r1 - c1, 0)
//! r2  = x2 + dt (k1 √x1 + k4 x1 - k3 √x2 - k5 x2) + spill + √dt w2
//! x2' = clamp(r2, 0, c2),  y = x2 + v
//! ```
//!
//! Clamping puts point masses at 0 and at capacity. Transition densities are
//! taken with respect to Lebesgue measure plus those atoms, which is the
//! measure the samplers actually produce.

use std::f64::consts::PI;

use rand::Rng;

use super::{bootstrap_pf, simulate_ssm, Prior, ProcessNoise, StateSpaceModel};
use crate::error::{invalid, Result};
use crate::model::{ParamVector, Trajectory};
use crate::stats::{ln_normal_cdf, ln_normal_sf, normal_logpdf, std_normal};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// θ layout: `(k1, k2, k3, k4, k5, σ²_w1, σ²_w2, σ²_obs)`.
pub const PARAM_NAMES: [&str; 8] = ["k1", "k2", "k3", "k4", "k5", "var_w1", "var_w2", "var_obs"];

/// Physically plausible centre of the parameter space for a 10 cm tank pair
/// driven around 3.5 V.
pub const NOMINAL_THETA: [f64; 8] = [0.05, 0.035, 0.05, 0.005, 0.005, 0.01, 0.01, 0.01];

/// Half-width, in log units, of the admissible box around [`NOMINAL_THETA`].
const RATE_LOG_HALF_WIDTH: f64 = 0.5;
const VAR_LOG_HALF_WIDTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TankVariant {
    /// Square-root outflows only; `k4 = k5 = 0`.
    Original,
    /// Adds linear leakage terms `k4 x1` and `k5 x2`.
    Extended,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterTankParams {
    pub k: [f64; 5],
    pub var_w: [f64; 2],
    pub var_obs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterTankModel {
    /// Sampling interval in seconds.
    pub dt: f64,
    pub capacity: [f64; 2],
    pub variant: TankVariant,
    /// Each initial level is `clamp(N(init_mean[i], init_var), 0, capacity[i])`.
    pub init_mean: [f64; 2],
    pub init_var: f64,
}

impl Default for WaterTankModel {
    fn default() -> Self {
        Self { dt: 4.0, capacity: [10.0, 10.0], variant: TankVariant::Extended, init_mean: [4.0, 4.0], init_var: 1.0 }
    }
}

/// Simulated data together with the latent levels that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TankSimulation {
    pub trajectory: Trajectory,
    pub states: Vec<[f64; 2]>,
}

impl WaterTankModel {
    pub fn with_variant(variant: TankVariant) -> Self {
        Self { variant, ..Self::default() }
    }

    fn check_geometry(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid(format!("sampling interval must be positive, got {}", self.dt)));
        }
        if self.capacity.iter().any(|c| !(*c > 0.0) || !c.is_finite()) || !(self.init_var >= 0.0) {
            return Err(invalid(format!("invalid tank geometry {self:?}")));
        }
        Ok(())
    }

    /// Nominal θ for this variant.
    pub fn nominal_theta(&self) -> ParamVector {
        let mut v = NOMINAL_THETA;
        if self.variant == TankVariant::Original {
            v[3] = 0.0;
            v[4] = 0.0;
        }
        ParamVector::new(v.to_vec()).expect("finite nominal values")
    }

    /// Log-normal priors with unit log-sd around the nominal values, truncated
    /// to the admissible box. The original variant pins `k4 = k5 = 0`.
    pub fn default_priors(&self) -> Vec<Prior> {
        NOMINAL_THETA
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                if self.variant == TankVariant::Original && (i == 3 || i == 4) {
                    return Prior::Fixed(0.0);
                }
                let half = if i < 5 { RATE_LOG_HALF_WIDTH } else { VAR_LOG_HALF_WIDTH };
                Prior::log_normal(c, 1.0).truncated(c * (-half).exp(), c * half.exp())
            })
            .collect()
    }

    /// Simulate with decoded parameters. Unlike [`StateSpaceModel::params`]
    /// this accepts zero noise variances, for deterministic runs.
    pub fn simulate_params<R: Rng + ?Sized>(
        &self,
        p: &WaterTankParams,
        inputs: &[f64],
        rng: &mut R,
    ) -> Result<TankSimulation> {
        self.check_geometry()?;
        if inputs.is_empty() {
            return Err(invalid("input sequence is empty"));
        }
        let (states, obs) = simulate_ssm(self, p, Some(inputs), inputs.len(), rng);
        Ok(TankSimulation { trajectory: Trajectory::with_inputs(obs, inputs.to_vec()), states })
    }

    #[inline]
    fn drift(&self, p: &WaterTankParams, x: &[f64; 2], u: f64) -> (f64, f64) {
        let [k1, k2, k3, k4, k5] = p.k;
        let out1 = k1 * x[0].max(0.0).sqrt() + k4 * x[0];
        let out2 = k3 * x[1].max(0.0).sqrt() + k5 * x[1];
        (x[0] + self.dt * (k2 * u - out1), x[1] + self.dt * (out1 - out2))
    }
}

/// Log-mass of `clamp(N(mean, var), 0, cap)` at `v`: a density inside the
/// interval, a probability at either end.
fn clamped_normal_logdensity(v: f64, mean: f64, var: f64, cap: f64) -> f64 {
    let sd = var.sqrt();
    if v == 0.0 {
        ln_normal_cdf(-mean / sd)
    } else if v == cap {
        ln_normal_sf((cap - mean) / sd)
    } else if v > 0.0 && v < cap {
        normal_logpdf(v, mean, var)
    } else {
        f64::NEG_INFINITY
    }
}

fn ln_inverse_mills(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI - ln_normal_cdf(z)
}

/// `ln ∫_{ξ0}^∞ φ(ξ) Φ(α + βξ) dξ`.
///
/// The log-integrand is concave with curvature at most -1, so a window of
/// ±10 around its constrained maximum holds all but e^{-50} of the mass.
fn ln_gauss_cdf_integral(xi0: f64, alpha: f64, beta: f64) -> f64 {
    let log_f = |xi: f64| -0.5 * xi * xi - LN_SQRT_2PI + ln_normal_cdf(alpha + beta * xi);
    let slope = |xi: f64| -xi + beta * ln_inverse_mills(alpha + beta * xi).exp();

    let start = xi0.max(-60.0);
    let peak = if slope(start) <= 0.0 {
        start
    } else {
        let mut hi = start.max(0.0) + 1.0;
        while slope(hi) > 0.0 {
            hi = 2.0 * hi + 1.0;
        }
        let mut lo = start;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if slope(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    const INTERVALS: usize = 400;
    let a = start.max(peak - 10.0);
    let b = peak + 10.0;
    let h = (b - a) / INTERVALS as f64;
    let peak_val = log_f(peak);
    let mut sum = 0.0;
    for i in 0..=INTERVALS {
        let w = if i == 0 || i == INTERVALS {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        sum += w * (log_f(a + h * i as f64) - peak_val).exp();
    }
    peak_val + (sum * h / 3.0).ln()
}

impl StateSpaceModel for WaterTankModel {
    type State = [f64; 2];
    type Params = WaterTankParams;

    fn param_dim(&self) -> usize {
        8
    }

    fn params(&self, theta: &ParamVector) -> Result<WaterTankParams> {
        self.check_geometry()?;
        let v = theta.values();
        if v.len() != 8 {
            return Err(invalid(format!("water-tank model expects 8 parameters, got {}", v.len())));
        }
        let positive = [0, 1, 2, 5, 6, 7];
        if let Some(&i) = positive.iter().find(|&&i| !(v[i] > 0.0)) {
            return Err(invalid(format!("{} must be positive, got {}", PARAM_NAMES[i], v[i])));
        }
        match self.variant {
            TankVariant::Extended if !(v[3] > 0.0 && v[4] > 0.0) => {
                return Err(invalid("extended variant needs k4, k5 > 0"));
            }
            TankVariant::Original if v[3] != 0.0 || v[4] != 0.0 => {
                return Err(invalid("original variant needs k4 = k5 = 0"));
            }
            _ => {}
        }
        Ok(WaterTankParams { k: [v[0], v[1], v[2], v[3], v[4]], var_w: [v[5], v[6]], var_obs: v[7] })
    }

    fn sample_initial_state<R: Rng + ?Sized>(&self, _p: &WaterTankParams, rng: &mut R) -> [f64; 2] {
        let sd = self.init_var.sqrt();
        [0, 1].map(|i| (self.init_mean[i] + sd * std_normal(rng)).clamp(0.0, self.capacity[i]))
    }

    fn initial_logdensity(&self, _p: &WaterTankParams, x: &[f64; 2]) -> f64 {
        (0..2).map(|i| clamped_normal_logdensity(x[i], self.init_mean[i], self.init_var, self.capacity[i])).sum()
    }

    fn sample_transition<R: Rng + ?Sized>(
        &self,
        p: &WaterTankParams,
        x: &[f64; 2],
        u: f64,
        _t: usize,
        rng: &mut R,
    ) -> [f64; 2] {
        let (m1, m2) = self.drift(p, x, u);
        let [c1, c2] = self.capacity;
        let raw1 = m1 + (self.dt * p.var_w[0]).sqrt() * std_normal(rng);
        let spill = (raw1 - c1).max(0.0);
        let raw2 = m2 + spill + (self.dt * p.var_w[1]).sqrt() * std_normal(rng);
        [raw1.clamp(0.0, c1), raw2.clamp(0.0, c2)]
    }

    fn transition_logdensity(&self, p: &WaterTankParams, next: &[f64; 2], x: &[f64; 2], u: f64, _t: usize) -> f64 {
        let (m1, m2) = self.drift(p, x, u);
        let [c1, c2] = self.capacity;
        let (v1, v2) = (self.dt * p.var_w[0], self.dt * p.var_w[1]);
        let [a, b] = *next;
        if a < c1 {
            return clamped_normal_logdensity(a, m1, v1, c1) + clamped_normal_logdensity(b, m2, v2, c2);
        }
        if a > c1 {
            return f64::NEG_INFINITY;
        }
        // Upper tank full: the spill s = r1 - c1 > 0 is hidden and feeds the lower tank.
        let m = m1 - c1;
        let (sd1, sd2) = (v1.sqrt(), v2.sqrt());
        if b > 0.0 && b < c2 {
            let d = b - m2;
            let v = v1 + v2;
            let post_mean = (m * v2 + d * v1) / v;
            let post_var = v1 * v2 / v;
            normal_logpdf(d, m, v) + ln_normal_cdf(post_mean / post_var.sqrt())
        } else if b == 0.0 {
            ln_gauss_cdf_integral(-m / sd1, (-m2 - m) / sd2, -sd1 / sd2)
        } else if b == c2 {
            ln_gauss_cdf_integral(-m / sd1, (m2 + m - c2) / sd2, sd1 / sd2)
        } else {
            f64::NEG_INFINITY
        }
    }

    fn sample_observation<R: Rng + ?Sized>(&self, p: &WaterTankParams, x: &[f64; 2], _t: usize, rng: &mut R) -> f64 {
        x[1] + p.var_obs.sqrt() * std_normal(rng)
    }

    fn observation_logdensity(&self, p: &WaterTankParams, obs: f64, x: &[f64; 2], _t: usize) -> f64 {
        normal_logpdf(obs, x[1], p.var_obs)
    }
}

impl ProcessNoise for WaterTankModel {
    /// Noise is recoverable only where a level is strictly inside its tank;
    /// the lower-tank component is also hidden whenever the upper tank spilled.
    fn standardized_noise(
        &self,
        p: &WaterTankParams,
        next: &[f64; 2],
        x: &[f64; 2],
        u: f64,
        _t: usize,
        out: &mut Vec<f64>,
    ) {
        let (m1, m2) = self.drift(p, x, u);
        let [c1, c2] = self.capacity;
        let inside1 = next[0] > 0.0 && next[0] < c1;
        if inside1 {
            out.push((next[0] - m1) / (self.dt * p.var_w[0]).sqrt());
        }
        if next[0] < c1 && next[1] > 0.0 && next[1] < c2 {
            out.push((next[1] - m2) / (self.dt * p.var_w[1]).sqrt());
        }
    }
}

/// Simulate the tanks at `theta` driven by `inputs`; one sample per input.
pub fn watertank_simulate<R: Rng + ?Sized>(
    model: &WaterTankModel,
    theta: &ParamVector,
    inputs: &[f64],
    rng: &mut R,
) -> Result<TankSimulation> {
    let p = model.params(theta)?;
    model.simulate_params(&p, inputs, rng)
}

/// Particle-filter estimate of `-ln p(y | θ)`.
pub fn watertank_surprisal<R: Rng + ?Sized>(
    model: &WaterTankModel,
    theta: &ParamVector,
    y: &Trajectory,
    num_particles: usize,
    rng: &mut R,
) -> Result<f64> {
    Ok(-bootstrap_pf(model, theta, y, num_particles, rng)?.loglik)
}

/// Deterministic pump voltage: a sum of three sines around 3.5 V, ±1.5 V peak.
pub fn default_input_signal(len: usize) -> Vec<f64> {
    (0..len)
        .map(|t| {
            let t = t as f64;
            let s = 0.5 * (2.0 * PI * t / 97.0).sin()
                + 0.3 * (2.0 * PI * t / 41.0 + 1.0).sin()
                + 0.2 * (2.0 * PI * t / 13.0 + 2.0).sin();
            3.5 + 1.5 * s
        })
        .collect()
}
