use crate::armodels::{ml_estimate_ar, prediction_errors};
use crate::error::{invalid, Result};
use crate::model::{validate_trajectory, Trajectory};
use crate::stats::{autocorrelations, chi_square_sf};

#[derive(Debug, Clone, PartialEq)]
pub struct LjungBoxResult {
    pub q: f64,
    pub h: usize,
    /// Number of estimated parameters subtracted from the degrees of freedom.
    pub d: usize,
    pub p_value: f64,
    /// `r̂_1 ..= r̂_h`.
    pub autocorrelations: Vec<f64>,
}

/// Portmanteau test of whiteness: `Q = T (T + 2) Σ_{k=1}^{h} r̂_k² / (T - k)`
/// compared against χ² with `h - d` degrees of freedom.
pub fn ljung_box(residuals: &[f64], h: usize, d: usize) -> Result<LjungBoxResult> {
    if h <= d {
        return Err(invalid(format!("lag count h = {h} must exceed d = {d}")));
    }
    let n = residuals.len();
    if n <= h {
        return Err(invalid(format!("need more than h = {h} residuals, got {n}")));
    }
    let r = autocorrelations(residuals, h)?;
    let r = r[1..].to_vec();
    let nf = n as f64;
    let q = nf * (nf + 2.0) * r.iter().enumerate().map(|(i, rk)| rk * rk / (nf - (i + 1) as f64)).sum::<f64>();
    let p_value = chi_square_sf(q, h - d)?;
    Ok(LjungBoxResult { q, h, d, p_value, autocorrelations: r })
}

/// How the lag count is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagRule {
    /// `max(d + 1, round(ln T))`.
    LogLength,
    Fixed(usize),
}

pub fn lag_rule(len: usize, d: usize) -> usize {
    ((len as f64).ln().round() as usize).max(d + 1)
}

/// Fit AR(`order`) coefficients by conditional least squares and test the
/// prediction errors for whiteness with `d = order`.
pub fn ljung_box_for_ar(y: &Trajectory, order: usize, rule: LagRule) -> Result<LjungBoxResult> {
    let y = validate_trajectory(y.clone())?;
    let coeffs = ml_estimate_ar(&y.observations, order)?;
    let residuals = prediction_errors(&y.observations, coeffs.values());
    let h = match rule {
        LagRule::LogLength => lag_rule(y.len(), order),
        LagRule::Fixed(h) => h,
    };
    ljung_box(&residuals, h, order)
}
