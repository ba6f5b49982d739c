use rand_distr::{Binomial, Distribution, Gamma, Poisson};

use super::{CountPair, RandomStream};
use crate::error::{check_nonneg, check_unit, Error, Result};

/// Counts below this use exact CDF inversion; larger counts use BTPE.
pub const BINOMIAL_INVERSION_LIMIT: u64 = 30;

/// Multimode thermal draws loop over modes below this count and switch to the
/// Gamma–Poisson mixture at or above it.
pub const THERMAL_MODE_LOOP_LIMIT: u64 = 10_000;

/// Poisson draw; `mean = 0` is the point mass at zero.
pub fn sample_poisson(mean: f64, rng: &mut RandomStream) -> Result<u64> {
    check_nonneg("mean", mean)?;
    Ok(poisson_unchecked(mean, rng))
}

pub(crate) fn poisson_unchecked(mean: f64, rng: &mut RandomStream) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("validated Poisson mean");
    dist.sample(rng) as u64
}

/// Bose–Einstein (single-mode thermal) draw, `P(n) = μⁿ / (1+μ)ⁿ⁺¹`.
///
/// Inverse CDF: `P(N ≥ n) = qⁿ` with `q = μ/(1+μ)`, so `n = ⌊ln U / ln q⌋`.
pub fn sample_geometric(mean: f64, rng: &mut RandomStream) -> Result<u64> {
    check_nonneg("mean", mean)?;
    Ok(geometric_unchecked(mean, rng))
}

pub(crate) fn geometric_unchecked(mean: f64, rng: &mut RandomStream) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let ln_q = (mean / (1.0 + mean)).ln();
    let u = rng.uniform_open0();
    (u.ln() / ln_q).floor() as u64
}

/// Negative binomial through its Gamma–Poisson mixture.
///
/// The rate is `λ ~ Gamma(shape, scale)`; the result is `Poisson(λ)`. The
/// mean is `shape·scale` and the variance `shape·scale·(1 + scale)`. Real
/// `shape` is allowed, which is what super-Poissonian classical beams need.
pub fn sample_gamma_poisson(shape: f64, scale: f64, rng: &mut RandomStream) -> Result<u64> {
    if !(shape.is_finite() && shape > 0.0) {
        return Err(Error::InvalidArgument(format!("shape = {shape} must be finite and positive")));
    }
    check_nonneg("scale", scale)?;
    Ok(gamma_poisson_unchecked(shape, scale, rng))
}

pub(crate) fn gamma_poisson_unchecked(shape: f64, scale: f64, rng: &mut RandomStream) -> u64 {
    if scale <= 0.0 {
        return 0;
    }
    let rate = Gamma::new(shape, scale).expect("validated gamma parameters").sample(rng);
    poisson_unchecked(rate, rng)
}

/// Sum of `modes` independent thermal modes of mean `mean_per_mode` each.
pub fn sample_thermal(mean_per_mode: f64, modes: u64, rng: &mut RandomStream) -> Result<u64> {
    check_nonneg("mean_per_mode", mean_per_mode)?;
    if modes == 0 {
        return Err(Error::InvalidArgument("modes must be at least 1".into()));
    }
    Ok(thermal_unchecked(mean_per_mode, modes, rng))
}

pub(crate) fn thermal_unchecked(mean_per_mode: f64, modes: u64, rng: &mut RandomStream) -> u64 {
    if mean_per_mode <= 0.0 {
        0
    } else if modes < THERMAL_MODE_LOOP_LIMIT {
        thermal_by_modes(mean_per_mode, modes, rng)
    } else {
        thermal_by_mixture(mean_per_mode, modes, rng)
    }
}

pub fn thermal_by_modes(mean_per_mode: f64, modes: u64, rng: &mut RandomStream) -> u64 {
    (0..modes).map(|_| geometric_unchecked(mean_per_mode, rng)).sum()
}

pub fn thermal_by_mixture(mean_per_mode: f64, modes: u64, rng: &mut RandomStream) -> u64 {
    gamma_poisson_unchecked(modes as f64, mean_per_mode, rng)
}

/// Multimode twin-beam pair before any loss: every mode contributes the same
/// photon number to both arms, so the arms are equal.
pub fn sample_twb_pair(mean_per_mode: f64, modes: u64, rng: &mut RandomStream) -> Result<CountPair> {
    let n = sample_thermal(mean_per_mode, modes, rng)?;
    Ok(CountPair::new(n, n))
}

pub fn sample_fock_pair(n: u64) -> CountPair {
    CountPair::new(n, n)
}

/// Binomial draw: each of `count` items survives with probability `p`.
pub fn sample_binomial(count: u64, p: f64, rng: &mut RandomStream) -> Result<u64> {
    check_unit("survival probability", p)?;
    Ok(binomial_unchecked(count, p, rng))
}

pub(crate) fn binomial_unchecked(count: u64, p: f64, rng: &mut RandomStream) -> u64 {
    if count == 0 || p <= 0.0 {
        0
    } else if p >= 1.0 {
        count
    } else if count < BINOMIAL_INVERSION_LIMIT {
        binomial_by_inversion(count, p, rng)
    } else {
        binomial_large_count(count, p, rng)
    }
}

/// Sequential-search inversion of the binomial CDF.
pub fn binomial_by_inversion(count: u64, p: f64, rng: &mut RandomStream) -> u64 {
    if p > 0.5 {
        return count - binomial_by_inversion(count, 1.0 - p, rng);
    }
    let odds = p / (1.0 - p);
    let mut pmf = (1.0 - p).powi(count as i32);
    let mut cdf = pmf;
    let u = 1.0 - rng.uniform_open0();
    let mut k = 0;
    while u >= cdf && k < count {
        pmf *= odds * (count - k) as f64 / (k + 1) as f64;
        cdf += pmf;
        k += 1;
    }
    k
}

pub fn binomial_large_count(count: u64, p: f64, rng: &mut RandomStream) -> u64 {
    Binomial::new(count, p).expect("validated binomial parameters").sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[u64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
        let v = xs.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn poisson_zero_mean_is_zero() {
        let mut rng = RandomStream::from_seed(1);
        for _ in 0..100 {
            assert_eq!(sample_poisson(0.0, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn poisson_rejects_bad_mean() {
        let mut rng = RandomStream::from_seed(1);
        assert!(sample_poisson(-1.0, &mut rng).is_err());
        assert!(sample_poisson(f64::NAN, &mut rng).is_err());
        assert!(sample_poisson(f64::INFINITY, &mut rng).is_err());
    }

    #[test]
    fn poisson_fano_near_one() {
        let mut rng = RandomStream::from_seed(2);
        let xs: Vec<u64> = (0..1_000_000).map(|_| sample_poisson(100.0, &mut rng).unwrap()).collect();
        let (m, v) = mean_var(&xs);
        assert!((v / m - 1.0).abs() < 0.01, "fano {}", v / m);
    }

    #[test]
    fn poisson_large_mean_unbiased() {
        // Sample mean of 10^4 draws at 1e5 has standard error ~3.2, far
        // inside 0.5% (= 500).
        let mut rng = RandomStream::from_seed(3);
        let xs: Vec<u64> = (0..10_000).map(|_| sample_poisson(1e5, &mut rng).unwrap()).collect();
        let (m, _) = mean_var(&xs);
        assert!((m / 1e5 - 1.0).abs() < 0.005);
    }

    #[test]
    fn thermal_zero_and_errors() {
        let mut rng = RandomStream::from_seed(4);
        assert_eq!(sample_thermal(0.0, 5, &mut rng).unwrap(), 0);
        assert!(sample_thermal(0.5, 0, &mut rng).is_err());
        assert!(sample_thermal(-0.5, 3, &mut rng).is_err());
    }

    #[test]
    fn single_mode_thermal_fano() {
        let mut rng = RandomStream::from_seed(5);
        let xs: Vec<u64> = (0..1_000_000).map(|_| sample_thermal(0.5, 1, &mut rng).unwrap()).collect();
        let (m, v) = mean_var(&xs);
        assert!((m - 0.5).abs() < 0.005, "mean {m}");
        assert!((v / m - 1.5).abs() < 0.02, "fano {}", v / m);
    }

    #[test]
    fn experimental_regime_is_poissonian() {
        let mut rng = RandomStream::from_seed(6);
        let xs: Vec<u64> =
            (0..100_000).map(|_| sample_thermal(2e-9, 250_000_000_000_000, &mut rng).unwrap()).collect();
        let (m, v) = mean_var(&xs);
        assert!((m / 5e5 - 1.0).abs() < 1e-3, "mean {m}");
        assert!((v / m - 1.0).abs() < 0.01, "fano {}", v / m);
    }

    #[test]
    fn mode_loop_and_mixture_agree_at_switch() {
        // Same distribution either side of the switch; compare the first two
        // moments at M = 10^4, μ = 0.05 (mean 500, variance 525).
        let mut a = RandomStream::from_seed(7);
        let mut b = RandomStream::from_seed(8);
        let n = 20_000;
        let xs: Vec<u64> = (0..n).map(|_| thermal_by_modes(0.05, THERMAL_MODE_LOOP_LIMIT, &mut a)).collect();
        let ys: Vec<u64> =
            (0..n).map(|_| thermal_by_mixture(0.05, THERMAL_MODE_LOOP_LIMIT, &mut b)).collect();
        let (mx, vx) = mean_var(&xs);
        let (my, vy) = mean_var(&ys);
        let mean_target = 0.05 * 1e4;
        let var_target = mean_target * 1.05;
        let se_mean = (var_target / n as f64).sqrt();
        let se_var = var_target * (2.0 / n as f64).sqrt();
        assert!((mx - my).abs() < 5.0 * se_mean * 2f64.sqrt());
        assert!((vx - vy).abs() < 5.0 * se_var * 2f64.sqrt());
        assert!((mx - mean_target).abs() < 5.0 * se_mean);
        assert!((vy - var_target).abs() < 5.0 * se_var);
    }

    #[test]
    fn twb_arms_identical() {
        let mut rng = RandomStream::from_seed(9);
        for _ in 0..1000 {
            let pair = sample_twb_pair(0.1, 10, &mut rng).unwrap();
            assert_eq!(pair.n_p, pair.n_r);
        }
    }

    #[test]
    fn fock_pair_is_fixed() {
        assert_eq!(sample_fock_pair(5), CountPair::new(5, 5));
        assert_eq!(sample_fock_pair(1), CountPair::new(1, 1));
    }

    #[test]
    fn binomial_edges() {
        let mut rng = RandomStream::from_seed(10);
        assert_eq!(sample_binomial(17, 1.0, &mut rng).unwrap(), 17);
        assert_eq!(sample_binomial(17, 0.0, &mut rng).unwrap(), 0);
        assert_eq!(sample_binomial(0, 0.3, &mut rng).unwrap(), 0);
        assert!(sample_binomial(10, 1.5, &mut rng).is_err());
        assert!(sample_binomial(10, -0.1, &mut rng).is_err());
    }

    #[test]
    fn binomial_methods_agree_at_boundary() {
        // Chi-square comparison of both samplers against the exact pmf at
        // the switch count.
        let count = BINOMIAL_INVERSION_LIMIT;
        let p: f64 = 0.37;
        let draws = 200_000;
        let mut pmf = vec![0.0; count as usize + 1];
        pmf[0] = (1.0 - p).powi(count as i32);
        for k in 0..count as usize {
            pmf[k + 1] = pmf[k] * p / (1.0 - p) * (count as usize - k) as f64 / (k + 1) as f64;
        }
        let mut rng = RandomStream::from_seed(11);
        for method in [binomial_by_inversion, binomial_large_count] {
            let mut hist = vec![0u64; count as usize + 1];
            for _ in 0..draws {
                hist[method(count, p, &mut rng) as usize] += 1;
            }
            // Pool sparse tails into bins with expectation >= 5.
            let mut chi2 = 0.0;
            let mut dof = 0;
            let (mut obs, mut exp) = (0.0, 0.0);
            for k in 0..=count as usize {
                obs += hist[k] as f64;
                exp += pmf[k] * draws as f64;
                if exp >= 5.0 {
                    chi2 += (obs - exp).powi(2) / exp;
                    dof += 1;
                    obs = 0.0;
                    exp = 0.0;
                }
            }
            // dof ~ 20; the 1e-4 upper quantile of chi2(20) is ~52.
            assert!(chi2 < 55.0, "chi2 = {chi2} over {dof} bins");
        }
    }
}
