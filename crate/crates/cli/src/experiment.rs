//! Replication sweeps over the AR cases and the cumulative trace.

use std::path::PathBuf;
use std::time::Instant;

use modelcheck::armodels::{generate_case, Ar1PosteriorSampler, ArModelClass, SyntheticCase};
use modelcheck::check::{ljung_box_for_ar, LagRule};
use modelcheck::{itmc_cumulative, itmc_run, ItmcResult, RngStream, Trajectory};
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig, Method};
use crate::error::{config, io, Result};
use crate::output::{write_result_set, ResultFiles, ResultRecord};
use crate::watertank::run_watertank;

/// Substream of a replication's stream used by each method, fixed per method
/// so that adding a method leaves the others' results unchanged. Data use the
/// replication stream itself.
pub(crate) fn method_stream(rep: &RngStream, m: Method) -> RngStream {
    rep.substream(match m {
        Method::Itmc => 1,
        Method::LjungBox => 2,
        Method::Smw => 3,
    })
}

/// Weighted mean of the observed surprisals, the statistic column of an ITMC record.
pub(crate) fn itmc_record(experiment: &str, rep: usize, seed: u64, r: &ItmcResult) -> ResultRecord {
    let s = r.surprisal_obs.iter().zip(&r.weights).map(|(s, w)| s * w).sum();
    ResultRecord {
        statistic: Some(s),
        p_value: Some(r.rho_star),
        dispersion: Some(r.dispersion),
        ..ResultRecord::new(experiment, rep, Method::Itmc, seed)
    }
}

/// Run `f`, filling `wall_time` if requested and turning an error into an error record.
pub(crate) fn timed(
    cfg: &ExperimentConfig,
    experiment: &str,
    rep: usize,
    m: Method,
    f: impl FnOnce() -> Result<ResultRecord>,
) -> ResultRecord {
    let start = Instant::now();
    match f() {
        Ok(mut r) => {
            if cfg.timing {
                r.wall_time = Some(start.elapsed().as_secs_f64());
            }
            r
        }
        Err(e) => ResultRecord::failed(experiment, rep, m, cfg.seed, e),
    }
}

fn ar_itmc(cfg: &ExperimentConfig, case: &SyntheticCase, y: &Trajectory, rng: &RngStream) -> Result<ItmcResult> {
    let sigma2 = case.model_sigma2();
    let model = ArModelClass::new(1, sigma2)?;
    let sampler = Ar1PosteriorSampler::new(&y.observations, cfg.prior_mean, cfg.prior_var, sigma2)?;
    Ok(itmc_run(&model, &sampler, y, cfg.draws, cfg.replicates, rng)?)
}

fn lag_rule(cfg: &ExperimentConfig) -> LagRule {
    cfg.lag.map_or(LagRule::LogLength, LagRule::Fixed)
}

fn ar_replication(cfg: &ExperimentConfig, case: &SyntheticCase, r: usize) -> Vec<ResultRecord> {
    let name = case.to_string();
    let rep = RngStream::new(cfg.seed, r as u64);
    let y = match generate_case(case, cfg.len, &mut rep.rng()) {
        Ok(y) => y,
        Err(e) => return cfg.methods.iter().map(|&m| ResultRecord::failed(&name, r, m, cfg.seed, &e)).collect(),
    };
    cfg.methods
        .iter()
        .map(|&m| {
            timed(cfg, &name, r, m, || match m {
                Method::Itmc => Ok(itmc_record(&name, r, cfg.seed, &ar_itmc(cfg, case, &y, &method_stream(&rep, m))?)),
                Method::LjungBox => {
                    let lb = ljung_box_for_ar(&y, 1, lag_rule(cfg))?;
                    Ok(ResultRecord {
                        statistic: Some(lb.q),
                        p_value: Some(lb.p_value),
                        ..ResultRecord::new(&name, r, m, cfg.seed)
                    })
                }
                Method::Smw => Err(config("smw is not defined for AR experiments")),
            })
        })
        .collect()
}

/// Records of every replication in replication order, without writing files.
pub fn experiment_records(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    match &cfg.experiment {
        Experiment::Ar(case) => {
            let per_rep: Vec<Vec<ResultRecord>> =
                (0..cfg.replications).into_par_iter().map(|r| ar_replication(cfg, case, r)).collect();
            Ok(per_rep.into_iter().flatten().collect())
        }
        _ => crate::watertank::watertank_records(cfg),
    }
}

/// Run every replication and write `results.csv`, the histograms and `summary.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultFiles> {
    if cfg.experiment.is_watertank() {
        return run_watertank(cfg);
    }
    let records = experiment_records(cfg)?;
    write_result_set(&cfg.output, &records)
}

/// One row of the cumulative trace.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub rho: f64,
    pub lo: f64,
    pub hi: f64,
    pub y: f64,
}

/// ρ★ ± 2 d★ on growing prefixes of a single data set (replication 0).
pub fn cumulative_trace(cfg: &ExperimentConfig) -> Result<Vec<TraceRow>> {
    let Experiment::Ar(case) = &cfg.experiment else {
        return Err(config("cumulative traces are available for the AR experiments only"));
    };
    let rep = RngStream::new(cfg.seed, 0);
    let y = generate_case(case, cfg.len, &mut rep.rng())?;
    let sigma2 = case.model_sigma2();
    let model = ArModelClass::new(1, sigma2)?;
    let factory = |t: &Trajectory| Ar1PosteriorSampler::new(&t.observations, cfg.prior_mean, cfg.prior_var, sigma2);
    let trace = itmc_cumulative(
        &model,
        factory,
        &y,
        cfg.draws,
        cfg.replicates,
        cfg.stride,
        &method_stream(&rep, Method::Itmc),
    )?;
    Ok(trace
        .into_iter()
        .map(|(t, r)| TraceRow {
            t,
            rho: r.rho_star,
            lo: r.rho_star - 2.0 * r.dispersion,
            hi: r.rho_star + 2.0 * r.dispersion,
            y: y.observations[t - 1],
        })
        .collect())
}

/// Write `trace.csv` with columns `t, rho, lo, hi, y`.
pub fn run_cumulative(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let rows = cumulative_trace(cfg)?;
    std::fs::create_dir_all(&cfg.output).map_err(io(&cfg.output))?;
    let path = cfg.output.join("trace.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io(&path))?;
    Ok(path)
}
