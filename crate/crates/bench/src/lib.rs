//! Fixed inputs shared by the benchmarks, so every run measures the same work.

use modelcheck::armodels::{generate_case, SyntheticCase};
use modelcheck::ssm::{
    default_input_signal, simulate_ssm, watertank_simulate, LgssModel, WaterTankModel, NOMINAL_THETA,
};
use modelcheck::{ParamVector, RngStream, Trajectory};

pub const SEED: u64 = 7;

pub fn lgss() -> LgssModel {
    LgssModel { a: 0.8, c: 1.0, q: 1.0, r: 1.0, m0: 0.0, p0: 1.0 }
}

pub fn lgss_data(len: usize) -> Trajectory {
    let m = lgss();
    let (_, obs) = simulate_ssm(&m, &m, None, len, &mut RngStream::new(SEED, 0).rng());
    Trajectory::new(obs)
}

pub fn case_i(len: usize) -> Trajectory {
    generate_case(&SyntheticCase::I, len, &mut RngStream::new(SEED, 1).rng()).expect("positive length")
}

pub fn nominal_tank() -> ParamVector {
    ParamVector::new(NOMINAL_THETA.to_vec()).expect("finite nominal values")
}

pub fn tank_data(len: usize) -> Trajectory {
    let model = WaterTankModel::default();
    watertank_simulate(&model, &nominal_tank(), &default_input_signal(len), &mut RngStream::new(SEED, 2).rng())
        .expect("nominal parameters are valid")
        .trajectory
}
