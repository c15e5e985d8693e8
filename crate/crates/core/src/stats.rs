//! Point estimates, confidence intervals and the few tests the experiments
//! need. All reductions run sequentially in index order so that results do
//! not depend on thread scheduling.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::rng::{Stream, StreamTag};
use crate::{Error, Result};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithCI {
    pub estimate: f64,
    pub stderr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicas: usize,
    pub seed: u64,
}

impl EstimateWithCI {
    /// Sample mean with a normal-theory interval.
    pub fn mean_of(samples: &[f64], seed: u64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Degenerate(format!("need at least two samples, got {}", samples.len())));
        }
        let m = mean(samples);
        let se = (variance(samples) / samples.len() as f64).sqrt();
        Ok(EstimateWithCI {
            estimate: m,
            stderr: se,
            ci_low: m - Z95 * se,
            ci_high: m + Z95 * se,
            replicas: samples.len(),
            seed,
        })
    }

    /// Wilson score interval for a success frequency.
    pub fn proportion(successes: usize, trials: usize, seed: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::Degenerate("proportion over zero trials".into()));
        }
        let n = trials as f64;
        let ph = successes as f64 / n;
        let z2 = Z95 * Z95;
        let centre = (ph + z2 / (2.0 * n)) / (1.0 + z2 / n);
        let half = Z95 / (1.0 + z2 / n) * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt();
        Ok(EstimateWithCI {
            estimate: ph,
            stderr: (ph * (1.0 - ph) / n).sqrt(),
            ci_low: (centre - half).clamp(0.0, ph),
            ci_high: (centre + half).clamp(ph, 1.0),
            replicas: trials,
            seed,
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    /// The two intervals are disjoint and `self` lies strictly above.
    pub fn separated_above(&self, other: &EstimateWithCI) -> bool {
        self.ci_low > other.ci_high
    }
}

/// Compensated (Neumaier) sum.
pub fn sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

pub fn mean(xs: &[f64]) -> f64 {
    sum(xs.iter().copied()) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    sum(xs.iter().map(|x| (x - m) * (x - m))) / (xs.len() as f64 - 1.0)
}

pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let mx = mean(xs);
    let my = mean(ys);
    sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my))) / (xs.len() as f64 - 1.0)
}

/// Pearson correlation; `None` when either sample has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len(), "paired samples must have equal length");
    if xs == ys {
        return (variance(xs) > 0.0).then_some(1.0);
    }
    let vx = variance(xs);
    let vy = variance(ys);
    if !(vx > 0.0 && vy > 0.0) {
        return None;
    }
    Some((covariance(xs, ys) / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation with a Fisher-z interval, `atanh r ± z/√(N−3)`.
pub fn correlation_ci(xs: &[f64], ys: &[f64], seed: u64) -> Result<EstimateWithCI> {
    let n = xs.len();
    if n < 4 {
        return Err(Error::Degenerate(format!("correlation needs at least four pairs, got {n}")));
    }
    let r = pearson(xs, ys).ok_or_else(|| Error::Degenerate("zero-variance sample in correlation".into()))?;
    let s = 1.0 / ((n - 3) as f64).sqrt();
    let (lo, hi) = if r >= 1.0 {
        (1.0, 1.0)
    } else if r <= -1.0 {
        (-1.0, -1.0)
    } else {
        let z = r.atanh();
        ((z - Z95 * s).tanh().min(r), (z + Z95 * s).tanh().max(r))
    };
    Ok(EstimateWithCI { estimate: r, stderr: (1.0 - r * r) * s, ci_low: lo, ci_high: hi, replicas: n, seed })
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Least-squares line `y = a + b x`, returned as `(b, a)`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let mx = mean(xs);
    let my = mean(ys);
    let sxy = sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let b = sxy / sxx;
    (b, my - b * mx)
}

/// Fit of `log stat` against `log scale`, with a bootstrap interval for the slope.
#[derive(Debug, Clone, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_ci: (f64, f64),
    pub residuals: Vec<f64>,
    pub resamples: usize,
}

impl LogLogFit {
    pub fn ci_contains(&self, x: f64) -> bool {
        self.slope_ci.0 <= x && x <= self.slope_ci.1
    }

    pub fn ci_half_width(&self) -> f64 {
        0.5 * (self.slope_ci.1 - self.slope_ci.0)
    }
}

/// Log-log slope of `stat(samples[k])` against `scales[k]`. Each bootstrap
/// resample redraws every scale's replicas with replacement; indices come
/// from the keyed generic stream so the interval is reproducible.
pub fn bootstrap_loglog(
    scales: &[f64],
    samples: &[Vec<f64>],
    stat: impl Fn(&[f64]) -> f64,
    resamples: usize,
    seed: u64,
) -> Result<LogLogFit> {
    if scales.len() != samples.len() || scales.len() < 2 {
        return Err(Error::Degenerate("log-log fit needs matching scales and at least two of them".into()));
    }
    let lx: Vec<f64> = scales.iter().map(|s| s.ln()).collect();
    let point: Vec<f64> = samples.iter().map(|s| stat(s).ln()).collect();
    if point.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("statistic must be positive at every scale".into()));
    }
    let (slope, intercept) = ols(&lx, &point);
    let residuals = lx.iter().zip(&point).map(|(x, y)| y - (intercept + slope * x)).collect();

    let stream = Stream::new(seed, StreamTag::Generic);
    let mut counter = 0u64;
    let mut slopes = Vec::with_capacity(resamples);
    let mut buf = Vec::new();
    for _ in 0..resamples {
        let mut ly = Vec::with_capacity(scales.len());
        for s in samples {
            buf.clear();
            for _ in 0..s.len() {
                let k = (stream.uniform_global(counter) * s.len() as f64) as usize;
                counter += 1;
                buf.push(s[k.min(s.len() - 1)]);
            }
            ly.push(stat(&buf).ln());
        }
        let b = ols(&lx, &ly).0;
        if b.is_finite() {
            slopes.push(b);
        }
    }
    if slopes.is_empty() {
        return Err(Error::Degenerate("every bootstrap resample was degenerate".into()));
    }
    Ok(LogLogFit {
        slope,
        intercept,
        slope_ci: (quantile(&slopes, 0.025), quantile(&slopes, 0.975)),
        residuals,
        resamples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub p_value: f64,
    pub passed: bool,
}

/// Goodness of fit of non-negative integer samples against Geometric(p) on
/// {0, 1, ...}. Cells `0..K` keep expected count ≥ 5 and the last cell
/// collects the tail `{≥ K}`.
pub fn chi_square_geometric(samples: &[u64], p: f64, alpha: f64) -> Result<ChiSquareResult> {
    crate::error::check_prob("p", p)?;
    let n = samples.len() as f64;
    let mut probs = Vec::new();
    let mut mass = 1.0;
    loop {
        let pk = p * (1.0 - p).powi(probs.len() as i32);
        // Stop once both this cell and the remaining tail would be too small.
        if n * pk < 5.0 || n * (mass - pk) < 5.0 {
            break;
        }
        probs.push(pk);
        mass -= pk;
    }
    let k = probs.len();
    probs.push(mass);
    if k < 1 {
        return Err(Error::Degenerate("too few samples for a chi-square test".into()));
    }
    let mut counts = vec![0u64; k + 1];
    for &s in samples {
        counts[(s as usize).min(k)] += 1;
    }
    let statistic = sum(counts.iter().zip(&probs).map(|(&o, &q)| {
        let e = n * q;
        (o as f64 - e).powi(2) / e
    }));
    let dof = k;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Degenerate(e.to_string()))?;
    let critical = dist.inverse_cdf(1.0 - alpha);
    Ok(ChiSquareResult { statistic, dof, critical, p_value: 1.0 - dist.cdf(statistic), passed: statistic <= critical })
}

/// Decimal rendering with 12 significant digits, falling back to scientific
/// notation for very large or very small magnitudes.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-6..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{:.11e}", x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_sum_is_compensated() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(sum(xs), 2.0);
    }

    #[test]
    fn identical_samples_correlate_exactly() {
        let x: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let e = correlation_ci(&x, &x, 0).unwrap();
        assert_eq!(e.estimate, 1.0);
        assert_eq!((e.ci_low, e.ci_high), (1.0, 1.0));
    }

    #[test]
    fn constant_sample_is_degenerate() {
        let x = vec![1.0; 10];
        let y: Vec<f64> = (0..10).map(f64::from).collect();
        assert!(matches!(correlation_ci(&x, &y, 0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn ols_recovers_a_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 + 2.0 * x).collect();
        let (b, a) = ols(&xs, &ys);
        assert!((b - 2.0).abs() < 1e-12 && (a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let xs = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&xs), 2.5);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
    }

    #[test]
    fn wilson_contains_estimate() {
        for (s, n) in [(0, 10), (10, 10), (3, 17), (500, 1000)] {
            let e = EstimateWithCI::proportion(s, n, 0).unwrap();
            assert!(e.ci_low <= e.estimate && e.estimate <= e.ci_high);
        }
    }

    #[test]
    fn chi_square_accepts_exact_frequencies() {
        // counts proportional to the pmf
        let mut xs = Vec::new();
        for k in 0..12u64 {
            let c = (10_000.0 * 0.5f64.powi(k as i32 + 1)).round() as usize;
            xs.extend(std::iter::repeat_n(k, c));
        }
        let r = chi_square_geometric(&xs, 0.5, 1e-3).unwrap();
        assert!(r.passed, "{r:?}");
        let r = chi_square_geometric(&xs, 0.3, 1e-3).unwrap();
        assert!(!r.passed);
    }

    #[test]
    fn sig_formatting() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1.00000000000");
        assert_eq!(fmt_sig(-0.25), "-0.250000000000");
        assert_eq!(fmt_sig(123456.0), "123456.000000");
        assert_eq!(fmt_sig(1e-9), "1.00000000000e-9");
    }
}
