use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::model::{validate_trajectory, GenerativeModel, PosteriorSampler, Trajectory};
use crate::stats::{empirical_tail_fractions, RngStream};

/// Smallest accepted replicate count. With continuous surprisals a handful
/// of replicates biases the per-draw p-value towards zero.
pub const MIN_REPLICATES: usize = 20;

/// Substream reserved for the parameter sampler.
const SAMPLER_STREAM: u64 = u64::MAX;

/// `min(1, 2 min(P[D ≥ obs], P[D ≤ obs]))` over the simulated surprisals.
/// Ties count on both sides.
pub fn two_sided_pvalue(simulated: &[f64], observed: f64) -> Result<f64> {
    if observed.is_nan() || simulated.iter().any(|d| d.is_nan()) {
        return Err(Error::Numerical("surprisal is NaN".into()));
    }
    let (ge, le) = empirical_tail_fractions(simulated, observed)?;
    Ok((2.0 * ge.min(le)).min(1.0))
}

/// Output of one check of a model class against one data set.
#[derive(Debug, Clone, PartialEq)]
pub struct ItmcResult {
    /// Weighted average of the per-draw p-values.
    pub rho_star: f64,
    /// Weighted RMS deviation of the per-draw p-values around `rho_star`.
    pub dispersion: f64,
    pub per_draw_rho: Vec<f64>,
    /// Surprisal of the observed data under each draw.
    pub surprisal_obs: Vec<f64>,
    pub weights: Vec<f64>,
    pub num_draws: usize,
    pub num_replicates: usize,
    pub rng: RngStream,
    pub surprisal_estimated: bool,
}

/// Run the check with `n` parameter draws and `m` replicates per draw.
///
/// Replicate `j` of draw `i` simulates on substream `i (m + 1) + j` and
/// evaluates its surprisal on that stream's substream 1; the observed
/// surprisal for draw `i` uses substream `i (m + 1) + m`. The grid runs in
/// parallel and is reduced in a fixed order, so the result is independent
/// of the thread count.
pub fn itmc_run<G: GenerativeModel, S: PosteriorSampler + ?Sized>(
    model: &G,
    sampler: &S,
    y: &Trajectory,
    n: usize,
    m: usize,
    rng: &RngStream,
) -> Result<ItmcResult> {
    if n == 0 {
        return Err(invalid("need at least one parameter draw"));
    }
    if m < MIN_REPLICATES {
        return Err(invalid(format!("need at least {MIN_REPLICATES} replicates per draw, got {m}")));
    }
    let y = validate_trajectory(y.clone())?;
    let posterior = sampler.draw(n, &rng.substream(SAMPLER_STREAM))?;
    let draws = posterior.draws();
    if let Some(bad) = draws.iter().find(|d| d.dim() != model.param_dim()) {
        return Err(invalid(format!("draw has {} entries, model expects {}", bad.dim(), model.param_dim())));
    }
    let len = y.len();
    let inputs = y.inputs.as_deref();
    let stride = m + 1;

    let surprisals: Vec<Result<f64>> = (0..draws.len() * stride)
        .into_par_iter()
        .map(|cell| {
            let (i, j) = (cell / stride, cell % stride);
            let stream = rng.substream(cell as u64);
            let theta = &draws[i];
            if j == m {
                model.surprisal(theta, &y, &stream)
            } else {
                let sim = model.simulate(theta, inputs, len, &stream)?;
                model.surprisal(theta, &sim, &stream.substream(1))
            }
        })
        .collect();

    let mut per_draw_rho = Vec::with_capacity(draws.len());
    let mut surprisal_obs = Vec::with_capacity(draws.len());
    let mut sim = Vec::with_capacity(m);
    for (i, row) in surprisals.chunks(stride).enumerate() {
        let annotate = |e: &Error| Error::Draw { index: i, source: Box::new(clone_error(e)) };
        sim.clear();
        for r in &row[..m] {
            sim.push(*r.as_ref().map_err(annotate)?);
        }
        let observed = *row[m].as_ref().map_err(annotate)?;
        per_draw_rho.push(two_sided_pvalue(&sim, observed).map_err(|e| annotate(&e))?);
        surprisal_obs.push(observed);
    }

    let weights = posterior.weights().to_vec();
    let rho_star: f64 = weights.iter().zip(&per_draw_rho).map(|(w, r)| w * r).sum();
    let dispersion = weights.iter().zip(&per_draw_rho).map(|(w, r)| w * (r - rho_star).powi(2)).sum::<f64>().sqrt();
    Ok(ItmcResult {
        rho_star,
        dispersion,
        per_draw_rho,
        surprisal_obs,
        weights,
        num_draws: draws.len(),
        num_replicates: m,
        rng: *rng,
        surprisal_estimated: model.surprisal_is_estimated(),
    })
}

fn clone_error(e: &Error) -> Error {
    match e {
        Error::InvalidArgument(s) => Error::InvalidArgument(s.clone()),
        Error::DegenerateInput(s) => Error::DegenerateInput(s.clone()),
        Error::InvalidData(s) => Error::InvalidData(s.clone()),
        Error::Degeneracy { time, detail } => Error::Degeneracy { time: *time, detail: detail.clone() },
        Error::Numerical(s) => Error::Numerical(s.clone()),
        Error::Draw { index, source } => Error::Draw { index: *index, source: Box::new(clone_error(source)) },
    }
}

/// Run the check on the prefixes of length `stride, 2 stride, ...` up to
/// `y.len()`, rebuilding the sampler from each prefix. Every prefix uses the
/// same random stream, so a single prefix of full length reproduces
/// [`itmc_run`].
pub fn itmc_cumulative<G, S, F>(
    model: &G,
    sampler_factory: F,
    y: &Trajectory,
    n: usize,
    m: usize,
    stride: usize,
    rng: &RngStream,
) -> Result<Vec<(usize, ItmcResult)>>
where
    G: GenerativeModel,
    S: PosteriorSampler,
    F: Fn(&Trajectory) -> Result<S>,
{
    if stride == 0 {
        return Err(invalid("stride must be positive"));
    }
    (1..=y.len() / stride)
        .map(|k| {
            let t = k * stride;
            let prefix = y.prefix(t);
            let sampler = sampler_factory(&prefix)?;
            Ok((t, itmc_run(model, &sampler, &prefix, n, m, rng)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::armodels::{Ar1PosteriorSampler, ArModelClass};
    use crate::model::{FixedDraws, ParamVector, PosteriorDraws};

    #[test]
    fn pvalue_examples() {
        assert_eq!(two_sided_pvalue(&[1.0, 2.0, 3.0, 4.0], 10.0).unwrap(), 0.0);
        assert_eq!(two_sided_pvalue(&[1.0, 2.0, 3.0, 4.0], 2.0).unwrap(), 1.0);
        assert_eq!(two_sided_pvalue(&[5.0; 4], 5.0).unwrap(), 1.0);
        assert_eq!(two_sided_pvalue(&[1.0, 2.0, 3.0, 4.0], 4.0).unwrap(), 0.5);
        assert!(two_sided_pvalue(&[], 1.0).is_err());
        assert!(two_sided_pvalue(&[1.0], f64::NAN).is_err());
    }

    /// Every trajectory has the same surprisal.
    struct Constant;

    impl GenerativeModel for Constant {
        fn param_dim(&self) -> usize {
            1
        }
        fn simulate(&self, _: &ParamVector, _: Option<&[f64]>, len: usize, _: &RngStream) -> Result<Trajectory> {
            Ok(Trajectory::new(vec![0.0; len]))
        }
        fn surprisal(&self, _: &ParamVector, _: &Trajectory, _: &RngStream) -> Result<f64> {
            Ok(3.5)
        }
    }

    fn one_draw() -> FixedDraws {
        FixedDraws(PosteriorDraws::equal(vec![ParamVector::scalar(0.0).unwrap()]).unwrap())
    }

    #[test]
    fn constant_surprisal_gives_one() {
        let y = Trajectory::new(vec![1.0, 2.0]);
        let r = itmc_run(&Constant, &one_draw(), &y, 5, 20, &RngStream::new(0, 0)).unwrap();
        assert_eq!(r.rho_star, 1.0);
        assert_eq!(r.dispersion, 0.0);
        assert_eq!(r.per_draw_rho, vec![1.0; 5]);
    }

    #[test]
    fn argument_checks() {
        let y = Trajectory::new(vec![1.0, 2.0]);
        let rng = RngStream::new(0, 0);
        assert!(itmc_run(&Constant, &one_draw(), &y, 0, 20, &rng).is_err());
        assert!(itmc_run(&Constant, &one_draw(), &y, 1, 19, &rng).is_err());
        assert!(itmc_run(&Constant, &one_draw(), &Trajectory::new(vec![]), 1, 20, &rng).is_err());
        let two_dim = FixedDraws(PosteriorDraws::equal(vec![ParamVector::new(vec![0.0, 1.0]).unwrap()]).unwrap());
        assert!(itmc_run(&Constant, &two_dim, &y, 1, 20, &rng).is_err());
    }

    struct FailsOnDraw(usize);

    impl GenerativeModel for FailsOnDraw {
        fn param_dim(&self) -> usize {
            1
        }
        fn simulate(&self, _: &ParamVector, _: Option<&[f64]>, len: usize, _: &RngStream) -> Result<Trajectory> {
            Ok(Trajectory::new(vec![0.0; len]))
        }
        fn surprisal(&self, theta: &ParamVector, _: &Trajectory, _: &RngStream) -> Result<f64> {
            if theta[0] as usize == self.0 {
                Err(Error::Numerical("boom".into()))
            } else {
                Ok(1.0)
            }
        }
    }

    #[test]
    fn failures_carry_the_draw_index() {
        let d: Vec<_> = (0..4).map(|i| ParamVector::scalar(i as f64).unwrap()).collect();
        let s = FixedDraws(PosteriorDraws::equal(d).unwrap());
        let y = Trajectory::new(vec![0.0]);
        let err = itmc_run(&FailsOnDraw(2), &s, &y, 4, 20, &RngStream::new(0, 0)).unwrap_err();
        assert!(matches!(err, Error::Draw { index: 2, .. }), "{err}");
    }

    #[test]
    fn weighted_reduction() {
        let y = Trajectory::new(vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.2, 0.0, 0.6]);
        let model = ArModelClass::new(1, 1.0).unwrap();
        let sampler = Ar1PosteriorSampler::new(&y.observations, 0.0, 1.0, 1.0).unwrap();
        let r = itmc_run(&model, &sampler, &y, 30, 20, &RngStream::new(8, 0)).unwrap();
        let n = r.per_draw_rho.len() as f64;
        let mean = r.per_draw_rho.iter().sum::<f64>() / n;
        let sd = (r.per_draw_rho.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((r.rho_star - mean).abs() < 1e-12);
        assert!((r.dispersion - sd).abs() < 1e-12);
        assert!(r.per_draw_rho.iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(!r.surprisal_estimated);
    }

    #[test]
    fn cumulative_with_full_stride_equals_single_run() {
        let y = Trajectory::new(vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.2, 0.0, 0.6, 0.9, 0.1]);
        let model = ArModelClass::new(1, 1.0).unwrap();
        let rng = RngStream::new(4, 2);
        let factory = |t: &Trajectory| Ar1PosteriorSampler::new(&t.observations, 0.0, 1.0, 1.0);
        let trace = itmc_cumulative(&model, factory, &y, 10, 20, y.len(), &rng).unwrap();
        let single = itmc_run(&model, &factory(&y).unwrap(), &y, 10, 20, &rng).unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0], (y.len(), single));
        let trace = itmc_cumulative(&model, factory, &y, 10, 20, 3, &rng).unwrap();
        assert_eq!(trace.iter().map(|(t, _)| *t).collect::<Vec<_>>(), vec![3, 6, 9]);
        assert!(itmc_cumulative(&model, factory, &y, 10, 20, 0, &rng).is_err());
    }
}
