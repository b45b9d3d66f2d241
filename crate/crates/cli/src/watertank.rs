//! The check on the cascaded water-tank model class.

use modelcheck::check::smw_check;
use modelcheck::ssm::{
    default_input_signal, watertank_simulate, ChainConfig, PgasPosteriorSampler, Prior, SsmGenerative, WaterTankModel,
    PARAM_NAMES,
};
use modelcheck::{itmc_run, ParamVector, RngStream, Trajectory};
use rayon::prelude::*;

use crate::config::{Experiment, ExperimentConfig, Method};
use crate::csvio::load_timeseries_csv;
use crate::error::{io, CliError, Result};
use crate::experiment::{itmc_record, method_stream, timed};
use crate::output::{write_result_set, ResultFiles, ResultRecord};

/// Where a data set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    /// Generated at θ drawn from the priors, so inside the model class.
    Synthetic,
    /// Generated at the nominal rates with inflated noise variances.
    Corrupted,
    Measured,
}

impl SetKind {
    pub fn experiment_id(self) -> &'static str {
        match self {
            SetKind::Synthetic => "watertank-synthetic",
            SetKind::Corrupted => "watertank-corrupted",
            SetKind::Measured => "watertank-data",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DataSet {
    pub index: usize,
    pub kind: SetKind,
    /// Generating parameters; `None` for measured data.
    pub theta: Option<ParamVector>,
    pub data: Trajectory,
}

pub fn tank_model(cfg: &ExperimentConfig) -> WaterTankModel {
    WaterTankModel { dt: cfg.dt, ..WaterTankModel::with_variant(cfg.variant) }
}

pub fn chain_config(cfg: &ExperimentConfig) -> ChainConfig {
    ChainConfig {
        num_iters: cfg.chain_iterations,
        burn_in: cfg.burn_in,
        num_particles: cfg.particles,
        ..ChainConfig::default()
    }
}

fn corrupted_theta(model: &WaterTankModel, factor: f64) -> Result<ParamVector> {
    let mut v = model.nominal_theta().values().to_vec();
    for x in &mut v[5..] {
        *x *= factor;
    }
    Ok(ParamVector::new(v)?)
}

/// The data sets a config asks for: synthetic sets followed by corrupted
/// ones, or the single measured series. Set `s` draws from stream `(seed, s)`.
pub fn build_data_sets(cfg: &ExperimentConfig) -> Result<Vec<DataSet>> {
    let model = tank_model(cfg);
    match cfg.experiment {
        Experiment::WatertankData => {
            let path = cfg.data.as_ref().ok_or_else(|| CliError::Config("watertank-data needs a CSV path".into()))?;
            let data = load_timeseries_csv(path, Some(&cfg.input_column), &cfg.output_column)?;
            Ok(vec![DataSet { index: 0, kind: SetKind::Measured, theta: None, data }])
        }
        Experiment::WatertankSynthetic => {
            let priors = model.default_priors();
            let inputs = default_input_signal(cfg.len);
            let total = cfg.synthetic_sets + cfg.corrupted_sets;
            (0..total)
                .map(|s| {
                    let mut rng = RngStream::new(cfg.seed, s as u64).rng();
                    let (kind, theta) = if s < cfg.synthetic_sets {
                        let v = priors.iter().map(|p| p.sample(&mut rng)).collect();
                        (SetKind::Synthetic, ParamVector::new(v)?)
                    } else {
                        (SetKind::Corrupted, corrupted_theta(&model, cfg.corruption_factor)?)
                    };
                    let sim = watertank_simulate(&model, &theta, &inputs, &mut rng)?;
                    Ok(DataSet { index: s, kind, theta: Some(theta), data: sim.trajectory })
                })
                .collect()
        }
        Experiment::Ar(_) => Err(CliError::Config("not a water-tank experiment".into())),
    }
}

fn check_set(cfg: &ExperimentConfig, model: &WaterTankModel, priors: &[Prior], set: &DataSet) -> Vec<ResultRecord> {
    let name = set.kind.experiment_id();
    let rep = RngStream::new(cfg.seed, set.index as u64);
    cfg.methods
        .iter()
        .map(|&m| {
            let rng = method_stream(&rep, m);
            timed(cfg, name, set.index, m, || match m {
                Method::Itmc => {
                    let sampler = PgasPosteriorSampler {
                        model: model.clone(),
                        data: set.data.clone(),
                        priors: priors.to_vec(),
                        config: chain_config(cfg),
                    };
                    let gm = SsmGenerative::new(model.clone(), cfg.particles);
                    let r = itmc_run(&gm, &sampler, &set.data, cfg.draws, cfg.replicates, &rng)?;
                    Ok(itmc_record(name, set.index, cfg.seed, &r))
                }
                Method::Smw => {
                    let r = smw_check(model, &set.data, priors, &chain_config(cfg), &rng)?;
                    Ok(ResultRecord {
                        statistic: Some(r.z),
                        p_value: Some(r.p_value),
                        ..ResultRecord::new(name, set.index, m, cfg.seed)
                    })
                }
                Method::LjungBox => Err(CliError::Config("ljung-box is not defined for the water-tank class".into())),
            })
        })
        .collect()
}

/// Records for every data set, in set order. A failing set yields error
/// records and the remaining sets still run.
pub fn watertank_records(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    let sets = build_data_sets(cfg)?;
    Ok(records_for_sets(cfg, &sets))
}

pub fn records_for_sets(cfg: &ExperimentConfig, sets: &[DataSet]) -> Vec<ResultRecord> {
    let model = tank_model(cfg);
    let priors = model.default_priors();
    let per_set: Vec<Vec<ResultRecord>> = sets.par_iter().map(|s| check_set(cfg, &model, &priors, s)).collect();
    per_set.into_iter().flatten().collect()
}

fn write_sets(cfg: &ExperimentConfig, sets: &[DataSet]) -> Result<()> {
    let path = cfg.output.join("datasets.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["set".to_string(), "kind".into(), "len".into()];
    header.extend(PARAM_NAMES.iter().map(|s| s.to_string()));
    w.write_record(&header)?;
    for s in sets {
        let mut row = vec![s.index.to_string(), s.kind.experiment_id().to_string(), s.data.len().to_string()];
        match &s.theta {
            Some(t) => row.extend(t.values().iter().map(f64::to_string)),
            None => row.extend(PARAM_NAMES.iter().map(|_| String::new())),
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(io(&path))?;
    Ok(())
}

/// Check every data set and write the result files plus `datasets.csv`, which
/// lists the generating parameters.
pub fn run_watertank(cfg: &ExperimentConfig) -> Result<ResultFiles> {
    if !cfg.experiment.is_watertank() {
        return Err(CliError::Config(format!("{} is not a water-tank experiment", cfg.experiment)));
    }
    let sets = build_data_sets(cfg)?;
    let records = records_for_sets(cfg, &sets);
    let files = write_result_set(&cfg.output, &records)?;
    write_sets(cfg, &sets)?;
    Ok(files)
}
