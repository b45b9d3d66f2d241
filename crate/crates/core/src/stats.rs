//! Numerical primitives shared by the checks: reproducible random streams,
//! Gaussian draws, autocorrelation, the chi-square tail and a few empirical
//! distribution utilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};

/// The generator instantiated from an [`RngStream`].
pub type StreamRng = ChaCha8Rng;

/// An immutable descriptor of a random stream.
///
/// Streams are ChaCha8 keyed by `seed` with the 64-bit stream word set to
/// `stream`, so two descriptors with the same pair always yield the same
/// sequence, and different stream ids give non-overlapping sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    seed: u64,
    stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Derive a child stream. The child key mixes this stream's (seed, stream)
    /// pair, so children of distinct parents never collide, and the child's
    /// stream word is `id` verbatim.
    pub fn substream(&self, id: u64) -> Self {
        let key = splitmix64(splitmix64(self.seed) ^ self.stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
        Self { seed: key, stream: id }
    }

    /// Instantiate a fresh generator positioned at the start of the stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw from N(mean, variance). A zero variance returns `mean` exactly.
pub fn gaussian_sample<R: Rng + ?Sized>(mean: f64, variance: f64, rng: &mut R) -> Result<f64> {
    if !(variance >= 0.0) {
        return Err(invalid(format!("variance must be nonnegative, got {variance}")));
    }
    if variance == 0.0 {
        return Ok(mean);
    }
    Ok(mean + variance.sqrt() * std_normal(rng))
}

#[inline]
pub(crate) fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Log-density of N(mean, variance) at `x`.
#[inline]
pub fn normal_logpdf(x: f64, mean: f64, variance: f64) -> f64 {
    let r = x - mean;
    -0.5 * (std::f64::consts::TAU * variance).ln() - 0.5 * r * r / variance
}

/// Mean-centred sample autocorrelation at lag `k`, normalised by the total
/// sum of squares so that the result lies in [-1, 1]. Lag 0 returns 1.
pub fn sample_autocorrelation(x: &[f64], k: usize) -> Result<f64> {
    Ok(autocorrelations(x, k)?[k])
}

/// Autocorrelations at lags `0..=max_lag`.
pub fn autocorrelations(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if max_lag >= n {
        return Err(invalid(format!("lag {max_lag} must be smaller than the sequence length {n}")));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let total: f64 = centred.iter().map(|v| v * v).sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::DegenerateInput("sequence has zero variance".into()));
    }
    Ok((0..=max_lag)
        .map(|k| {
            if k == 0 {
                return 1.0;
            }
            let s: f64 = centred[k..].iter().zip(&centred[..n - k]).map(|(a, b)| a * b).sum();
            s / total
        })
        .collect())
}

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * std::f64::consts::TAU.ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

/// Series for the regularized lower incomplete gamma P(a, x), valid for x < a + 1.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma(a)).exp()
}

/// Log of Q(a, x) by Lentz's continued fraction, valid for x >= a + 1.
fn ln_gamma_q_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    -x + a * x.ln() - ln_gamma(a) + h.ln()
}

/// Natural log of the regularized upper incomplete gamma function Q(a, x).
pub fn ln_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        (-gamma_p_series(a, x)).ln_1p()
    } else {
        ln_gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma function Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        ln_gamma_q_cf(a, x).exp()
    }
}

/// Upper-tail probability P(X >= q) for X ~ chi-square with `dof` degrees of freedom.
pub fn chi_square_sf(q: f64, dof: usize) -> Result<f64> {
    if dof == 0 {
        return Err(invalid("chi-square degrees of freedom must be positive"));
    }
    if !(q >= 0.0) {
        return Err(invalid(format!("chi-square statistic must be nonnegative, got {q}")));
    }
    Ok(gamma_q(0.5 * dof as f64, 0.5 * q))
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    ln_normal_cdf(z).exp()
}

/// log Φ(z), accurate deep into the lower tail.
pub fn ln_normal_cdf(z: f64) -> f64 {
    // Φ(z) = ½ Q(½, z²/2) for z <= 0
    if z.is_nan() {
        return f64::NAN;
    }
    if z <= 0.0 {
        -std::f64::consts::LN_2 + ln_gamma_q(0.5, 0.5 * z * z)
    } else {
        (-0.5 * gamma_q(0.5, 0.5 * z * z)).ln_1p()
    }
}

/// log(1 - Φ(z)).
#[inline]
pub fn ln_normal_sf(z: f64) -> f64 {
    ln_normal_cdf(-z)
}

/// Raw tail counts of `samples` relative to `reference`: (#>=, #<=, #==).
pub(crate) fn tail_counts(samples: &[f64], reference: f64) -> (usize, usize, usize) {
    samples.iter().fold((0, 0, 0), |(ge, le, eq), &s| {
        (ge + (s >= reference) as usize, le + (s <= reference) as usize, eq + (s == reference) as usize)
    })
}

/// Fractions of `samples` that are >= and <= `reference`. Ties count on both sides.
pub fn empirical_tail_fractions(samples: &[f64], reference: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(invalid("empirical tail fractions need at least one sample"));
    }
    let (ge, le, _) = tail_counts(samples, reference);
    let m = samples.len() as f64;
    Ok((ge as f64 / m, le as f64 / m))
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `samples` and U(0, 1).
pub fn ks_distance_uniform(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("KS distance needs at least one sample"));
    }
    if let Some(bad) = samples.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(format!("sample {bad} lies outside [0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted.iter().enumerate().map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n)).fold(0.0, f64::max))
}

/// `ln(mean(exp(v)))`, stable for large magnitudes. Returns -inf if every entry is -inf.
pub fn log_mean_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    let s: f64 = v.iter().map(|x| (x - max).exp()).sum();
    max + (s / v.len() as f64).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_variance_returns_mean() {
        let mut rng = RngStream::new(3, 0).rng();
        assert_eq!(gaussian_sample(0.0, 0.0, &mut rng).unwrap(), 0.0);
        assert_eq!(gaussian_sample(5.0, 0.0, &mut rng).unwrap(), 5.0);
        assert!(matches!(gaussian_sample(0.0, -1.0, &mut rng), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = RngStream::new(11, 7).rng();
        let n = 100_000;
        let (mean, var) = (2.0, 3.0);
        let xs: Vec<f64> = (0..n).map(|_| gaussian_sample(mean, var, &mut rng).unwrap()).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((m - mean).abs() < 4.0 * var.sqrt() / (n as f64).sqrt());
        assert!((v - var).abs() < 0.05 * var);

        let mut rng = RngStream::new(0, 0).rng();
        let m = (0..n).map(|_| gaussian_sample(0.0, 1.0, &mut rng).unwrap()).sum::<f64>() / n as f64;
        assert!(m.abs() < 0.02);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let words = |s: RngStream| -> Vec<u64> {
            let mut r = s.rng();
            (0..8).map(|_| rand::RngCore::next_u64(&mut r)).collect()
        };
        let (a, b, c) = (words(RngStream::new(5, 1)), words(RngStream::new(5, 1)), words(RngStream::new(5, 2)));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(RngStream::new(5, 1).substream(0), RngStream::new(5, 2).substream(0));
        assert_eq!(RngStream::new(5, 1).substream(9).stream_id(), 9);
    }

    /// Direct transcription of the autocorrelation definition.
    fn acf_oracle(x: &[f64], k: usize) -> f64 {
        let n = x.len();
        let mean = x.iter().sum::<f64>() / n as f64;
        let mut num = 0.0;
        for t in k..n {
            num += (x[t] - mean) * (x[t - k] - mean);
        }
        let mut den = 0.0;
        for v in x {
            den += (v - mean) * (v - mean);
        }
        num / den
    }

    #[test]
    fn autocorrelation_examples() {
        let x = [1.0, -1.0, 1.0, -1.0, 1.0, -1.0];
        let r1 = sample_autocorrelation(&x, 1).unwrap();
        assert!((r1 - acf_oracle(&x, 1)).abs() < 1e-15);
        assert!((r1 + 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(sample_autocorrelation(&x, 0).unwrap(), 1.0);
        assert!(matches!(sample_autocorrelation(&[0.0; 4], 1), Err(Error::DegenerateInput(_))));
        assert!(matches!(sample_autocorrelation(&x, 6), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn white_noise_autocorrelations_are_small() {
        let mut rng = RngStream::new(42, 0).rng();
        let t = 10_000;
        let x: Vec<f64> = (0..t).map(|_| std_normal(&mut rng)).collect();
        let r = autocorrelations(&x, 10).unwrap();
        for rk in &r[1..] {
            assert!(rk.abs() < 5.0 / (t as f64).sqrt());
        }
    }

    /// Simpson quadrature of the chi-square density on [0, q].
    fn chi2_sf_oracle(q: f64, k: usize) -> f64 {
        let k = k as f64;
        let lnc = -(0.5 * k) * 2f64.ln() - ln_gamma(0.5 * k);
        let pdf = |x: f64| {
            if x <= 0.0 {
                if k == 2.0 {
                    0.5
                } else {
                    0.0
                }
            } else {
                (lnc + (0.5 * k - 1.0) * x.ln() - 0.5 * x).exp()
            }
        };
        let n = 200_000;
        let h = q / n as f64;
        let mut s = pdf(0.0) + pdf(q);
        for i in 1..n {
            s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        1.0 - s * h / 3.0
    }

    #[test]
    fn chi_square_examples() {
        assert_eq!(chi_square_sf(0.0, 3).unwrap(), 1.0);
        assert!((chi_square_sf(2.0 * 2f64.ln(), 2).unwrap() - 0.5).abs() < 1e-14);
        let oracle = chi2_sf_oracle(10.0, 4);
        let got = chi_square_sf(10.0, 4).unwrap();
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
        assert!((got - 0.040_427_681_994_512_8).abs() < 1e-12);
        assert!(chi_square_sf(1.0, 0).is_err());
    }

    #[test]
    fn chi_square_closed_forms_over_range() {
        // even dof: Q(m, x) = e^{-x} sum_{j<m} x^j / j!
        for dof in (2..=100).step_by(2) {
            for &q in &[0.1, 1.0, 5.0, 20.0, 60.0, 99.0, 150.0, 300.0, 500.0] {
                let x: f64 = 0.5 * q;
                let mut term = (-x).exp();
                let mut sum = term;
                for j in 1..dof / 2 {
                    term *= x / j as f64;
                    sum += term;
                }
                let got = chi_square_sf(q, dof).unwrap();
                assert!((got - sum).abs() < 1e-10, "dof {dof} q {q}: {got} vs {sum}");
            }
        }
        // dof 1: P(|Z| >= sqrt(q)) compared through the erfc route
        for &q in &[0.01, 1.0, 3.84, 10.0] {
            let got = chi_square_sf(q, 1).unwrap();
            let want = 2.0 * (1.0 - normal_cdf(q.sqrt()));
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_square_monotone() {
        for dof in [1, 3, 10, 50] {
            let mut prev = 1.0;
            for i in 0..500 {
                let v = chi_square_sf(i as f64, dof).unwrap();
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }

    #[test]
    fn normal_cdf_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-13);
        // deep tail log: ln Φ(-40) ≈ -804.608
        let l = ln_normal_cdf(-40.0);
        assert!((l + 804.608_442_013_754).abs() < 1e-6, "{l}");
    }

    #[test]
    fn tail_fraction_examples() {
        assert_eq!(empirical_tail_fractions(&[1.0, 2.0, 3.0, 4.0], 10.0).unwrap(), (0.0, 1.0));
        assert_eq!(empirical_tail_fractions(&[1.0, 2.0, 3.0, 4.0], 2.0).unwrap(), (0.75, 0.5));
        assert_eq!(empirical_tail_fractions(&[5.0, 5.0, 5.0], 5.0).unwrap(), (1.0, 1.0));
        assert!(empirical_tail_fractions(&[], 1.0).is_err());
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance_uniform(&[0.5]).unwrap(), 0.5);
        // brute force: sup over a fine grid of |F_n(x) - x| including both one-sided limits
        let s = [0.25, 0.5, 0.75];
        let mut sup: f64 = 0.0;
        for &x in &s {
            let below = s.iter().filter(|v| **v < x).count() as f64 / 3.0;
            let at = s.iter().filter(|v| **v <= x).count() as f64 / 3.0;
            sup = sup.max((below - x).abs()).max((at - x).abs());
        }
        assert!((ks_distance_uniform(&s).unwrap() - sup).abs() < 1e-15);
        let grid: Vec<f64> = (1..=99).map(|k| k as f64 / 100.0).collect();
        assert!(ks_distance_uniform(&grid).unwrap() <= 0.02);
        assert!(ks_distance_uniform(&[1.5]).is_err());
    }

    proptest! {
        #[test]
        fn tail_fractions_account_for_ties(xs in prop::collection::vec(-3i32..3, 1..40), r in -3i32..3) {
            let xs: Vec<f64> = xs.into_iter().map(f64::from).collect();
            let r = f64::from(r);
            let (ge, le) = empirical_tail_fractions(&xs, r).unwrap();
            let ties = xs.iter().filter(|v| **v == r).count();
            let m = xs.len();
            // compare in counts to avoid rounding
            prop_assert_eq!((ge * m as f64).round() as usize + (le * m as f64).round() as usize - ties, m);
        }

        #[test]
        fn autocorrelation_bounded(xs in prop::collection::vec(-10.0f64..10.0, 3..60), k in 1usize..3) {
            if let Ok(r) = sample_autocorrelation(&xs, k) {
                prop_assert!(r.abs() <= 1.0 + 1e-12);
            }
        }
    }
}
