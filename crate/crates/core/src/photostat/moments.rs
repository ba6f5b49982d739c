use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Detected photon numbers in the probe and reference regions for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct CountPair {
    pub n_p: u64,
    pub n_r: u64,
}

impl CountPair {
    pub const fn new(n_p: u64, n_r: u64) -> Self {
        Self { n_p, n_r }
    }
}

/// Mean, unbiased variance and Fano factor of one arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamStats {
    pub mean: f64,
    pub variance: f64,
    /// `variance / mean`; `None` when the mean is zero.
    pub fano: Option<f64>,
}

impl BeamStats {
    pub fn new(mean: f64, variance: f64) -> Self {
        let fano = (mean > 0.0).then(|| variance / mean);
        Self { mean, variance, fano }
    }

    /// Fano factor, or `NaN` when undefined. Prefer the `fano` field where
    /// the distinction matters.
    pub fn fano_or_nan(&self) -> f64 {
        self.fano.unwrap_or(f64::NAN)
    }
}

/// First and second moments of a count pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMoments {
    pub mean_p: f64,
    pub mean_r: f64,
    pub var_p: f64,
    pub var_r: f64,
    pub cov: f64,
}

impl PairMoments {
    /// Moments after independent binomial thinning of the probe with
    /// survival `p` and the reference with survival `r`.
    ///
    /// For each arm `⟨N'⟩ = s⟨N⟩` and `⟨Δ²N'⟩ = s²⟨Δ²N⟩ + s(1−s)⟨N⟩`, i.e.
    /// `F' = s·F + 1 − s`; the covariance scales by `p·r`.
    pub fn thinned(&self, p: f64, r: f64) -> Self {
        Self {
            mean_p: p * self.mean_p,
            mean_r: r * self.mean_r,
            var_p: p * p * self.var_p + p * (1.0 - p) * self.mean_p,
            var_r: r * r * self.var_r + r * (1.0 - r) * self.mean_r,
            cov: p * r * self.cov,
        }
    }
}

/// Sample statistics of a sequence of count pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointStats {
    pub probe: BeamStats,
    pub reference: BeamStats,
    pub covariance: f64,
    /// `⟨N_R⟩ / ⟨N_P⟩` unless overridden.
    pub gamma: f64,
    /// Noise reduction factor at weight `gamma`:
    /// `(Var N_R + γ² Var N_P − 2γ Cov) / (⟨N_R⟩ + γ⟨N_P⟩)`.
    pub nrf_gamma: f64,
    pub samples: u64,
}

impl JointStats {
    pub fn from_moments(m: &PairMoments, samples: u64, gamma_override: Option<f64>) -> Result<Self> {
        if m.mean_p.is_nan() || m.mean_p <= 0.0 {
            return Err(Error::DegenerateInput(format!("probe mean must be positive, got {}", m.mean_p)));
        }
        let gamma = gamma_override.unwrap_or(m.mean_r / m.mean_p);
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::DegenerateInput(format!("gamma must be positive and finite, got {gamma}")));
        }
        Ok(Self {
            probe: BeamStats::new(m.mean_p, m.var_p),
            reference: BeamStats::new(m.mean_r, m.var_r),
            covariance: m.cov,
            gamma,
            nrf_gamma: weighted_nrf(m, gamma),
            samples,
        })
    }

    pub fn moments(&self) -> PairMoments {
        PairMoments {
            mean_p: self.probe.mean,
            mean_r: self.reference.mean,
            var_p: self.probe.variance,
            var_r: self.reference.variance,
            cov: self.covariance,
        }
    }

    /// Noise reduction factor at unit weight, `σ = σ_{γ=1}`.
    pub fn nrf(&self) -> f64 {
        weighted_nrf(&self.moments(), 1.0)
    }

    /// `σ_γ` rebuilt from `σ` and the two Fano factors:
    /// `((γ+1)/2)·σ + ((1−γ)/2)·(F_R − F_P)`.
    ///
    /// Exact whenever `γ = ⟨N_R⟩/⟨N_P⟩`.
    pub fn nrf_decomposed(&self) -> f64 {
        let g = self.gamma;
        (g + 1.0) / 2.0 * self.nrf()
            + (1.0 - g) / 2.0 * (self.reference.fano_or_nan() - self.probe.fano_or_nan())
    }

    /// The commonly quoted variant `((γ+1)/2)·σ + ((γ−1)/2)·(F_R − γF_P)`.
    ///
    /// It agrees with [`JointStats::nrf_decomposed`] only at `γ = 1`; kept for
    /// comparison against published values.
    pub fn nrf_decomposed_symmetric(&self) -> f64 {
        let g = self.gamma;
        (g + 1.0) / 2.0 * self.nrf()
            + (g - 1.0) / 2.0 * (self.reference.fano_or_nan() - g * self.probe.fano_or_nan())
    }
}

fn weighted_nrf(m: &PairMoments, gamma: f64) -> f64 {
    let num = m.var_r + gamma * gamma * m.var_p - 2.0 * gamma * m.cov;
    num / (m.mean_r + gamma * m.mean_p)
}

/// Single-pass (Welford) accumulator for means, variances and covariance of
/// paired observations. Mergeable with Chan's pairwise update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct JointAccumulator {
    n: u64,
    mean_p: f64,
    mean_r: f64,
    m2_p: f64,
    m2_r: f64,
    c_pr: f64,
}

impl JointAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, p: f64, r: f64) {
        self.n += 1;
        let n = self.n as f64;
        let dp = p - self.mean_p;
        let dr = r - self.mean_r;
        self.mean_p += dp / n;
        self.mean_r += dr / n;
        self.m2_p += dp * (p - self.mean_p);
        self.m2_r += dr * (r - self.mean_r);
        self.c_pr += dp * (r - self.mean_r);
    }

    pub fn push_pair(&mut self, pair: CountPair) {
        self.push(pair.n_p as f64, pair.n_r as f64);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let dp = other.mean_p - self.mean_p;
        let dr = other.mean_r - self.mean_r;
        let w = na * nb / n;
        self.mean_p += dp * nb / n;
        self.mean_r += dr * nb / n;
        self.m2_p += other.m2_p + dp * dp * w;
        self.m2_r += other.m2_r + dr * dr * w;
        self.c_pr += other.c_pr + dp * dr * w;
        self.n += other.n;
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn moments(&self) -> Result<PairMoments> {
        if self.n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: self.n as usize });
        }
        let d = (self.n - 1) as f64;
        Ok(PairMoments {
            mean_p: self.mean_p,
            mean_r: self.mean_r,
            var_p: self.m2_p / d,
            var_r: self.m2_r / d,
            cov: self.c_pr / d,
        })
    }

    pub fn finish(&self, gamma_override: Option<f64>) -> Result<JointStats> {
        JointStats::from_moments(&self.moments()?, self.n, gamma_override)
    }
}

impl From<&JointStats> for JointAccumulator {
    /// Rebuild the accumulator behind finished statistics so that they can
    /// be merged again.
    fn from(s: &JointStats) -> Self {
        let d = s.samples.saturating_sub(1) as f64;
        Self {
            n: s.samples,
            mean_p: s.probe.mean,
            mean_r: s.reference.mean,
            m2_p: s.probe.variance * d,
            m2_r: s.reference.variance * d,
            c_pr: s.covariance * d,
        }
    }
}

impl Extend<CountPair> for JointAccumulator {
    fn extend<I: IntoIterator<Item = CountPair>>(&mut self, iter: I) {
        for pair in iter {
            self.push_pair(pair);
        }
    }
}

/// Means, unbiased variances and covariance of `pairs`, with `γ` taken from
/// the data unless overridden.
pub fn reduce_stats(pairs: &[CountPair], gamma_override: Option<f64>) -> Result<JointStats> {
    let mut acc = JointAccumulator::new();
    acc.extend(pairs.iter().copied());
    acc.finish(gamma_override)
}

/// Welford mean and variance of a scalar stream.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn len(&self) -> u64 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero with fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn std_err(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.std_dev() / (self.n as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Batch-means standard error of `statistic` evaluated on `data`.
///
/// The data are cut into `batches` contiguous blocks; the spread of the
/// per-block statistic, divided by `√batches`, estimates the standard error
/// of the statistic on the full sample.
pub fn batch_standard_error<T, F>(data: &[T], batches: usize, statistic: F) -> f64
where
    F: Fn(&[T]) -> f64,
{
    assert!(batches >= 2 && data.len() >= 2 * batches, "too few samples for batching");
    let size = data.len() / batches;
    let per_batch: RunningStats = data.chunks_exact(size).take(batches).map(&statistic).collect();
    per_batch.std_dev() / (batches as f64).sqrt()
}
