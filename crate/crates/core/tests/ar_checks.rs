//! Distributional behaviour of the baselines and the AR(1) check on the synthetic cases.

use modelcheck::armodels::{generate_case, Ar1PosteriorSampler, ArModelClass, SyntheticCase};
use modelcheck::check::{ljung_box, ljung_box_for_ar, LagRule};
use modelcheck::stats::ks_distance_uniform;
use modelcheck::{itmc_cumulative, RngStream, Trajectory};
use rand::Rng;
use rand_distr::StandardNormal;

/// 1% critical value of the one-sample KS statistic for n = 100.
const KS_CRIT_100: f64 = 0.163;

fn lb_pvalues(case: SyntheticCase, len: usize, seed: u64) -> Vec<f64> {
    (0..100)
        .map(|r| {
            let y = generate_case(&case, len, &mut RngStream::new(seed, r).rng()).unwrap();
            ljung_box_for_ar(&y, 1, LagRule::LogLength).unwrap().p_value
        })
        .collect()
}

#[test]
fn white_noise_pvalues_are_uniform() {
    let p: Vec<f64> = (0..500)
        .map(|r| {
            let mut rng = RngStream::new(70, r).rng();
            let e: Vec<f64> = (0..1000).map(|_| rng.sample(StandardNormal)).collect();
            ljung_box(&e, 7, 0).unwrap().p_value
        })
        .collect();
    assert!(ks_distance_uniform(&p).unwrap() < 0.1);
}

#[test]
fn ljung_box_is_near_uniform_on_well_specified_data() {
    let ks = ks_distance_uniform(&lb_pvalues(SyntheticCase::I, 1000, 71)).unwrap();
    assert!(ks < KS_CRIT_100, "{ks}");
}

#[test]
fn ljung_box_misses_variance_misspecification() {
    let ks = ks_distance_uniform(&lb_pvalues(SyntheticCase::IV, 100, 72)).unwrap();
    assert!(ks < KS_CRIT_100, "{ks}");
}

#[test]
fn cumulative_traces() {
    let model = ArModelClass::new(1, 1.0).unwrap();
    let factory = |t: &Trajectory| Ar1PosteriorSampler::new(&t.observations, 0.0, 1.0, 1.0);
    let rng = RngStream::new(73, 1);

    let y = generate_case(&SyntheticCase::I, 500, &mut RngStream::new(73, 0).rng()).unwrap();
    let trace = itmc_cumulative(&model, factory, &y, 20, 50, 10, &rng).unwrap();
    assert_eq!(trace.len(), 50);
    assert!(trace.iter().filter(|(t, _)| *t >= 50).all(|(_, r)| r.rho_star >= 0.01));

    let y = generate_case(&SyntheticCase::II, 500, &mut RngStream::new(74, 0).rng()).unwrap();
    let trace = itmc_cumulative(&model, factory, &y, 20, 50, 100, &rng).unwrap();
    assert!(trace.last().unwrap().1.rho_star < 0.05);
}
