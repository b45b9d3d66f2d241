//! Autoregressive model classes with known noise variance, the synthetic
//! data-generating processes used to exercise the checks, and the exact
//! Gaussian posterior of an AR(1) coefficient.
//!
//! All simulation and likelihood code uses the same convention: pre-sample
//! values `y_0, y_{-1}, ...` are fixed at zero.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::model::{GenerativeModel, ParamVector, PosteriorDraws, PosteriorSampler, Trajectory};
use crate::stats::{std_normal, RngStream};

const HALF_LN_TAU: f64 = 0.918_938_533_204_672_8;

#[inline]
fn ar_prediction(coeffs: &[f64], y: &[f64], t: usize) -> f64 {
    coeffs.iter().enumerate().take(t).map(|(k, c)| c * y[t - 1 - k]).sum()
}

/// Simulate `y_t = sum_k coeffs[k] y_{t-1-k} + e_t`, `e_t ~ N(0, sigma2)`, from a zero history.
pub fn ar_simulate<R: Rng + ?Sized>(coeffs: &[f64], sigma2: f64, len: usize, rng: &mut R) -> Result<Trajectory> {
    if len == 0 {
        return Err(invalid("trajectory length must be positive"));
    }
    if !(sigma2 >= 0.0) {
        return Err(invalid(format!("noise variance must be nonnegative, got {sigma2}")));
    }
    let sd = sigma2.sqrt();
    let mut y = Vec::with_capacity(len);
    for t in 0..len {
        let pred = ar_prediction(coeffs, &y, t);
        y.push(pred + sd * std_normal(rng));
    }
    Ok(Trajectory::new(y))
}

/// Exact `-ln p(y | coeffs, sigma2)` under the zero-history convention.
pub fn ar_surprisal(coeffs: &[f64], sigma2: f64, y: &[f64]) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(invalid(format!("noise variance must be positive, got {sigma2}")));
    }
    if y.is_empty() {
        return Err(invalid("surprisal of an empty trajectory"));
    }
    let ss: f64 = if let [c] = coeffs {
        let mut prev = 0.0;
        y.iter()
            .map(|&v| {
                let r = v - c * prev;
                prev = v;
                r * r
            })
            .sum()
    } else {
        (0..y.len())
            .map(|t| {
                let r = y[t] - ar_prediction(coeffs, y, t);
                r * r
            })
            .sum()
    };
    Ok(y.len() as f64 * (HALF_LN_TAU + 0.5 * sigma2.ln()) + 0.5 * ss / sigma2)
}

/// One-step prediction errors `e_t = y_t - sum_k coeffs[k] y_{t-1-k}`.
pub fn prediction_errors(y: &[f64], coeffs: &[f64]) -> Vec<f64> {
    (0..y.len()).map(|t| y[t] - ar_prediction(coeffs, y, t)).collect()
}

/// Conditional least-squares (equivalently conditional ML with known noise
/// variance) estimate of the AR coefficients.
pub fn ml_estimate_ar(y: &[f64], order: usize) -> Result<ParamVector> {
    if order == 0 {
        return Err(invalid("AR order must be positive"));
    }
    if y.len() <= order {
        return Err(invalid(format!("need more than {order} samples, got {}", y.len())));
    }
    let lagged = |t: usize, k: usize| if t > k { y[t - 1 - k] } else { 0.0 };
    let mut gram = DMatrix::<f64>::zeros(order, order);
    let mut rhs = DVector::<f64>::zeros(order);
    for (t, &yt) in y.iter().enumerate() {
        for i in 0..order {
            let xi = lagged(t, i);
            rhs[i] += xi * yt;
            for j in 0..order {
                gram[(i, j)] += xi * lagged(t, j);
            }
        }
    }
    let scale = gram.diagonal().max();
    if !(scale > 0.0) {
        return Err(Error::DegenerateInput("regressors are identically zero".into()));
    }
    let chol =
        gram.clone().cholesky().ok_or_else(|| Error::DegenerateInput("regressor matrix is rank deficient".into()))?;
    // Cholesky succeeds on numerically singular matrices too; check the pivots.
    let min_pivot = chol.l_dirty().diagonal().iter().map(|d| d * d).fold(f64::INFINITY, f64::min);
    if min_pivot < 1e-12 * scale {
        return Err(Error::DegenerateInput("regressor matrix is rank deficient".into()));
    }
    ParamVector::new(chol.solve(&rhs).iter().copied().collect())
}

/// Gaussian posterior of a scalar parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPosterior {
    pub mean: f64,
    pub var: f64,
}

/// Exact posterior of the AR(1) coefficient under a Gaussian prior and known noise variance.
///
/// A flat initial weight is approximated by a very large `prior_var`.
pub fn ar1_posterior(y: &[f64], prior_mean: f64, prior_var: f64, sigma2: f64) -> Result<GaussianPosterior> {
    if y.is_empty() {
        return Err(invalid("posterior from an empty trajectory"));
    }
    if !(prior_var > 0.0) || !(sigma2 > 0.0) {
        return Err(invalid("prior and noise variances must be positive"));
    }
    let (mut s1, mut s2, mut prev) = (0.0, 0.0, 0.0);
    for &v in y {
        s1 += v * prev;
        s2 += prev * prev;
        prev = v;
    }
    let var = 1.0 / (1.0 / prior_var + s2 / sigma2);
    Ok(GaussianPosterior { mean: var * (prior_mean / prior_var + s1 / sigma2), var })
}

/// i.i.d. sampler for the exact AR(1) coefficient posterior.
#[derive(Debug, Clone, Copy)]
pub struct Ar1PosteriorSampler {
    pub posterior: GaussianPosterior,
}

impl Ar1PosteriorSampler {
    pub fn new(y: &[f64], prior_mean: f64, prior_var: f64, sigma2: f64) -> Result<Self> {
        Ok(Self { posterior: ar1_posterior(y, prior_mean, prior_var, sigma2)? })
    }
}

impl PosteriorSampler for Ar1PosteriorSampler {
    fn draw(&self, n: usize, rng: &RngStream) -> Result<PosteriorDraws> {
        let mut g = rng.rng();
        let sd = self.posterior.var.sqrt();
        let draws = (0..n)
            .map(|_| ParamVector::scalar(self.posterior.mean + sd * std_normal(&mut g)))
            .collect::<Result<Vec<_>>>()?;
        PosteriorDraws::equal(draws)
    }
}

/// AR(p) model class with a known noise variance; θ holds the p coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArModelClass {
    pub order: usize,
    pub sigma2: f64,
}

impl ArModelClass {
    pub fn new(order: usize, sigma2: f64) -> Result<Self> {
        if order == 0 {
            return Err(invalid("AR order must be positive"));
        }
        if !(sigma2 > 0.0) {
            return Err(invalid(format!("noise variance must be positive, got {sigma2}")));
        }
        Ok(Self { order, sigma2 })
    }

    fn check_dim(&self, theta: &ParamVector) -> Result<()> {
        if theta.dim() != self.order {
            return Err(invalid(format!(
                "AR({}) expects {} coefficients, got {}",
                self.order,
                self.order,
                theta.dim()
            )));
        }
        Ok(())
    }
}

impl GenerativeModel for ArModelClass {
    fn param_dim(&self) -> usize {
        self.order
    }

    fn simulate(
        &self,
        theta: &ParamVector,
        _inputs: Option<&[f64]>,
        len: usize,
        rng: &RngStream,
    ) -> Result<Trajectory> {
        self.check_dim(theta)?;
        ar_simulate(theta.values(), self.sigma2, len, &mut rng.rng())
    }

    fn surprisal(&self, theta: &ParamVector, y: &Trajectory, _rng: &RngStream) -> Result<f64> {
        self.check_dim(theta)?;
        ar_surprisal(theta.values(), self.sigma2, &y.observations)
    }
}

/// The synthetic data-generating processes.
#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticCase {
    /// AR(1), coefficient 0.7, unit noise variance.
    I,
    /// AR(1) with coefficient 0.7 floored at -0.3 after the noise is added.
    II,
    /// AR(2) with coefficients (-0.3, 0.5), unit noise variance.
    III,
    /// AR(1), coefficient 0.7, noise variance 0.1 (the model class assumes 1).
    IV,
    /// AR(1), coefficient 0.7, unit noise variance (the model class assumes 0.1).
    V,
    Custom {
        coeffs: Vec<f64>,
        sigma2: f64,
        floor: Option<f64>,
        model_sigma2: f64,
    },
}

impl SyntheticCase {
    /// Noise variance assumed by the AR(1) model class checked against this case.
    pub fn model_sigma2(&self) -> f64 {
        match self {
            SyntheticCase::V => 0.1,
            SyntheticCase::Custom { model_sigma2, .. } => *model_sigma2,
            _ => 1.0,
        }
    }

    fn process(&self) -> (Vec<f64>, f64, Option<f64>) {
        match self {
            SyntheticCase::I | SyntheticCase::V => (vec![0.7], 1.0, None),
            SyntheticCase::II => (vec![0.7], 1.0, Some(-0.3)),
            SyntheticCase::III => (vec![-0.3, 0.5], 1.0, None),
            SyntheticCase::IV => (vec![0.7], 0.1, None),
            SyntheticCase::Custom { coeffs, sigma2, floor, .. } => (coeffs.clone(), *sigma2, *floor),
        }
    }
}

impl fmt::Display for SyntheticCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SyntheticCase::I => "case-i",
            SyntheticCase::II => "case-ii",
            SyntheticCase::III => "case-iii",
            SyntheticCase::IV => "case-iv",
            SyntheticCase::V => "case-v",
            SyntheticCase::Custom { .. } => "custom",
        };
        f.write_str(s)
    }
}

impl FromStr for SyntheticCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().trim_start_matches("case-") {
            "i" | "1" => Ok(SyntheticCase::I),
            "ii" | "2" => Ok(SyntheticCase::II),
            "iii" | "3" => Ok(SyntheticCase::III),
            "iv" | "4" => Ok(SyntheticCase::IV),
            "v" | "5" => Ok(SyntheticCase::V),
            other => Err(invalid(format!("unknown synthetic case '{other}'"))),
        }
    }
}

/// Generate `len` samples from a synthetic case, starting from a zero history.
pub fn generate_case<R: Rng + ?Sized>(case: &SyntheticCase, len: usize, rng: &mut R) -> Result<Trajectory> {
    let (coeffs, sigma2, floor) = case.process();
    if floor.is_none() {
        return ar_simulate(&coeffs, sigma2, len, rng);
    }
    if len == 0 {
        return Err(invalid("trajectory length must be positive"));
    }
    if !(sigma2 >= 0.0) {
        return Err(invalid(format!("noise variance must be nonnegative, got {sigma2}")));
    }
    let floor = floor.unwrap_or(f64::NEG_INFINITY);
    let sd = sigma2.sqrt();
    let mut y = Vec::with_capacity(len);
    for t in 0..len {
        let v = ar_prediction(&coeffs, &y, t) + sd * std_normal(rng);
        y.push(v.max(floor));
    }
    Ok(Trajectory::new(y))
}
