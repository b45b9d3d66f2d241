//! The averaged p-value on a discrete model small enough to enumerate.
//!
//! Four outcomes per step, five steps, and probabilities with denominator 8,
//! so every sequence probability is an integer multiple of 8⁻⁵. With
//! `M = 8⁵` stratified replicates, each sequence is hit exactly as often as
//! its probability demands and the Monte Carlo p-value must equal the exact
//! one bit for bit.

use modelcheck::{itmc_run, FixedDraws, GenerativeModel, ParamVector, PosteriorDraws, Result, RngStream, Trajectory};
use rand::Rng;

const LEN: usize = 5;
const STRATA: usize = 32_768;

/// Numerators over 8 for θ = 0 and θ = 1.
const PROBS: [[u64; 4]; 2] = [[4, 2, 1, 1], [1, 3, 2, 2]];

struct Toy {
    /// Replicates are quantiles `(j + ½) / M` of the sequence distribution.
    stratified: Option<usize>,
}

fn numerators(theta: &ParamVector) -> &'static [u64; 4] {
    &PROBS[theta[0] as usize]
}

/// Sequence `k` in lexicographic order, most significant step first.
fn decode(mut k: usize) -> Vec<f64> {
    let mut y = vec![0.0; LEN];
    for t in (0..LEN).rev() {
        y[t] = (k % 4) as f64;
        k /= 4;
    }
    y
}

/// Probability of a sequence as an integer count out of 8⁵.
fn weight(p: &[u64; 4], y: &[f64]) -> u64 {
    y.iter().map(|&v| p[v as usize]).product()
}

impl GenerativeModel for Toy {
    fn param_dim(&self) -> usize {
        1
    }

    fn simulate(&self, theta: &ParamVector, _: Option<&[f64]>, len: usize, rng: &RngStream) -> Result<Trajectory> {
        assert_eq!(len, LEN);
        let p = numerators(theta);
        let obs = match self.stratified {
            Some(m) => {
                let j = (rng.stream_id() % (m as u64 + 1)) as usize;
                // the j-th stratum covers counts [j, j + 1) out of 8⁵
                let target = j as u64;
                let mut cum = 0u64;
                let k = (0..4usize.pow(LEN as u32))
                    .find(|&k| {
                        cum += weight(p, &decode(k));
                        cum > target
                    })
                    .unwrap();
                decode(k)
            }
            None => {
                let mut r = rng.rng();
                (0..LEN)
                    .map(|_| {
                        let u = r.random_range(0..8u64);
                        let mut cum = 0;
                        p.iter()
                            .position(|&w| {
                                cum += w;
                                u < cum
                            })
                            .unwrap() as f64
                    })
                    .collect()
            }
        };
        Ok(Trajectory::new(obs))
    }

    fn surprisal(&self, theta: &ParamVector, y: &Trajectory, _: &RngStream) -> Result<f64> {
        let count = weight(numerators(theta), &y.observations);
        Ok(-((count as f64) / STRATA as f64).ln())
    }
}

/// Exact two-sided p-value by summing integer sequence weights.
fn exact_rho(theta: usize, y: &[f64]) -> f64 {
    let p = &PROBS[theta];
    let obs = weight(p, y);
    let (mut ge, mut le) = (0u64, 0u64);
    for k in 0..4usize.pow(LEN as u32) {
        let w = weight(p, &decode(k));
        // surprisal ≥ observed ⇔ probability ≤ observed
        if w <= obs {
            ge += w;
        }
        if w >= obs {
            le += w;
        }
    }
    (2.0 * (ge.min(le) as f64 / STRATA as f64)).min(1.0)
}

fn sampler() -> FixedDraws {
    FixedDraws(
        PosteriorDraws::equal(vec![ParamVector::scalar(0.0).unwrap(), ParamVector::scalar(1.0).unwrap()]).unwrap(),
    )
}

#[test]
fn stratified_replicates_reproduce_enumeration_exactly() {
    for y in [[0.0, 1.0, 2.0, 3.0, 0.0], [3.0, 3.0, 2.0, 3.0, 2.0], [0.0, 0.0, 0.0, 0.0, 1.0]] {
        let obs = Trajectory::new(y.to_vec());
        let r =
            itmc_run(&Toy { stratified: Some(STRATA) }, &sampler(), &obs, 2, STRATA, &RngStream::new(1, 0)).unwrap();
        for (i, rho) in r.per_draw_rho.iter().enumerate() {
            assert_eq!(*rho, exact_rho(i, &y), "draw {i}, y = {y:?}");
        }
    }
}

#[test]
fn sampled_replicates_agree_within_monte_carlo_error() {
    let y = [0.0, 1.0, 2.0, 3.0, 0.0];
    let m = 10_000;
    let obs = Trajectory::new(y.to_vec());
    let r = itmc_run(&Toy { stratified: None }, &sampler(), &obs, 2, m, &RngStream::new(2, 0)).unwrap();
    for (i, rho) in r.per_draw_rho.iter().enumerate() {
        let exact = exact_rho(i, &y);
        // away from 1, ρ̂ is twice a binomial fraction with mean ρ/2, so Var ρ̂ ≈ ρ (2 - ρ) / M
        let tol = 3.0 * (exact * (2.0 - exact) / m as f64).sqrt();
        assert!((rho - exact).abs() <= tol, "draw {i}: {rho} vs {exact} (tol {tol})");
    }
}
