use serde::Serialize;

use crate::lattice::{Point, Rect, WeightConfig};
use crate::lpp::{grid_travel_time, TravelTable};
use crate::stationary::shape_function;
use crate::stats::{bootstrap_loglog, median, variance, EstimateWithCI, LogLogFit};
use crate::{Error, Result};

use super::{check_replicas, replicate, sub_seed, BOOTSTRAP_RESAMPLES};

/// Log-log slope of a per-scale statistic, with the data behind it.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentFit {
    pub scales: Vec<i64>,
    pub statistic: Vec<f64>,
    pub fit: LogLogFit,
    /// `samples[k]` holds one value per replica at `scales[k]`.
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

impl ExponentFit {
    pub fn slope(&self) -> f64 {
        self.fit.slope
    }

    pub fn slope_ci(&self) -> (f64, f64) {
        self.fit.slope_ci
    }
}

fn check_scales(ns: &[i64]) -> Result<()> {
    if ns.len() < 3 {
        return Err(Error::parameter("n_list", format!("need at least three scales, got {}", ns.len())));
    }
    if ns[0] < 2 || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::parameter("n_list", "scales must be increasing and at least 2"));
    }
    Ok(())
}

fn per_scale<T: Send>(
    ns: &[i64],
    replicas: usize,
    seed: u64,
    f: impl Fn(i64, u64) -> Result<T> + Sync + Send,
) -> Result<Vec<Vec<T>>> {
    ns.iter().map(|&n| replicate(replicas, sub_seed(seed, n as u64), |_, rs| f(n, rs))).collect()
}

/// Fluctuation exponent fit plus the first-order check `E T_n / n → ψ(e+)`.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceScaling {
    pub exponent: ExponentFit,
    /// `T_n / n` per scale.
    pub mean_ratio: Vec<EstimateWithCI>,
    pub psi: f64,
}

/// Sample variance of `T_n` across scales, fitted as `log Var ~ slope · log n`.
pub fn variance_scaling(p: f64, ns: &[i64], replicas: usize, seed: u64) -> Result<VarianceScaling> {
    check_replicas(replicas, 2)?;
    check_scales(ns)?;
    let samples: Vec<Vec<f64>> = per_scale(ns, replicas, seed, |n, rs| {
        let rect = Rect::square(n);
        let g = crate::lattice::materialize(&WeightConfig::new(p, rs, rect)?, rect)?;
        Ok(grid_travel_time(&g) as f64)
    })?;
    let scales: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let fit = bootstrap_loglog(&scales, &samples, variance, BOOTSTRAP_RESAMPLES, seed)?;
    let mean_ratio = ns
        .iter()
        .zip(&samples)
        .map(|(&n, s)| {
            let r: Vec<f64> = s.iter().map(|t| t / n as f64).collect();
            EstimateWithCI::mean_of(&r, seed)
        })
        .collect::<Result<_>>()?;
    Ok(VarianceScaling {
        exponent: ExponentFit { scales: ns.to_vec(), statistic: samples.iter().map(|s| variance(s)).collect(), fit, samples },
        mean_ratio,
        psi: shape_function(p, (1.0, 1.0))?,
    })
}

/// Largest `|x − h|` over the points of `path` on the row `y = h`, `h = ⌊n/2⌋`.
pub fn mid_height_deviation(path: &[Point], n: i64) -> i64 {
    let h = n / 2;
    path.iter().filter(|q| q.y == h).map(|q| (q.x - h).abs()).max().unwrap_or(0)
}

/// Median mid-height deviation of the upmost geodesic of `R_{0, n e+}`,
/// fitted as `log median ~ slope · log n`.
pub fn transversal_exponent(p: f64, ns: &[i64], replicas: usize, seed: u64) -> Result<ExponentFit> {
    check_replicas(replicas, 2)?;
    check_scales(ns)?;
    let samples: Vec<Vec<f64>> = per_scale(ns, replicas, seed, |n, rs| {
        let rect = Rect::square(n);
        let t = TravelTable::new(&WeightConfig::new(p, rs, rect)?, rect.lo, rect.hi)?;
        Ok(mid_height_deviation(&t.upmost(), n) as f64)
    })?;
    let scales: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let fit = bootstrap_loglog(&scales, &samples, median, BOOTSTRAP_RESAMPLES, seed)?;
    Ok(ExponentFit { scales: ns.to_vec(), statistic: samples.iter().map(|s| median(s)).collect(), fit, samples })
}

/// The vertical segment `I(α,k,n) = k e+ + [−m e2, m e2]`, `m = ⌊min{k, n−k}^α⌋`.
pub fn envelope_i(alpha: f64, k: i64, n: i64) -> (Point, Point) {
    let m = (k.min(n - k).max(0) as f64).powf(alpha).floor() as i64;
    let c = Point::new(k, k);
    (c - m * Point::E2, c + m * Point::E2)
}

/// Membership in `B(α,ℓ,n)`: `|v2 − v1| ≤ min{|v|₁, |n e+ − v|₁}^α + ℓ` within the square.
pub fn envelope_b_contains(v: Point, alpha: f64, ell: f64, n: i64) -> bool {
    if !Rect::square(n).contains(v) {
        return false;
    }
    let d = v.l1().min((Point::new(n, n) - v).l1()) as f64;
    ((v.y - v.x).abs() as f64) <= d.powf(alpha) + ell
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeEstimate {
    pub alpha: f64,
    pub ell: f64,
    pub n: i64,
    /// Frequency of `π_n ⊆ B(α,ℓ,n)`.
    pub probability: EstimateWithCI,
}

/// `P(π_n ⊆ B(α,ℓ,n))` for each `ℓ`, all on the same replicas.
pub fn envelope_probability(
    p: f64,
    n: i64,
    alpha: f64,
    ells: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<EnvelopeEstimate>> {
    check_replicas(replicas, 2)?;
    super::check_n(n, 1)?;
    let rect = Rect::square(n);
    let inside: Vec<Vec<bool>> = replicate(replicas, seed, |_, rs| {
        let r = TravelTable::new(&WeightConfig::new(p, rs, rect)?, rect.lo, rect.hi)?.report();
        Ok(ells.iter().map(|&l| r.members().all(|v| envelope_b_contains(v, alpha, l, n))).collect())
    })?;
    ells.iter()
        .enumerate()
        .map(|(k, &ell)| {
            let hits = inside.iter().filter(|row| row[k]).count();
            Ok(EnvelopeEstimate { alpha, ell, n, probability: EstimateWithCI::proportion(hits, replicas, seed)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deviation_is_nonnegative_and_reads_mid_row() {
        let path = [Point::new(0, 0), Point::new(0, 1), Point::new(0, 2), Point::new(1, 2), Point::new(2, 2), Point::new(2, 3), Point::new(4, 4)];
        assert_eq!(mid_height_deviation(&path, 4), 2);
        assert_eq!(mid_height_deviation(&[], 4), 0);
    }

    #[test]
    fn envelopes() {
        assert_eq!(envelope_i(0.5, 16, 100), (Point::new(16, 12), Point::new(16, 20)));
        assert!(envelope_b_contains(Point::new(50, 50), 0.75, 0.0, 100));
        assert!(!envelope_b_contains(Point::new(0, 2), 0.75, 0.0, 100));
        assert!(envelope_b_contains(Point::new(0, 2), 0.75, 1.0, 100));
        assert!(!envelope_b_contains(Point::new(101, 0), 0.75, 100.0, 100));
    }

    #[test]
    fn scales_validated() {
        assert!(variance_scaling(0.5, &[8, 16], 10, 0).is_err());
        assert!(variance_scaling(0.5, &[8, 16, 16], 10, 0).is_err());
        assert!(variance_scaling(0.5, &[8, 16, 32], 0, 0).is_err());
        assert!(transversal_exponent(0.5, &[8, 16, 32], 20, 1).unwrap().samples.iter().flatten().all(|&d| d >= 0.0));
    }
}
