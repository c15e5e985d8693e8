use serde::Serialize;

use crate::lattice::{coupled_cap, NoiseKind, Rect, WeightConfig};
use crate::lpp::grid_travel_time;
use crate::stats::{correlation_ci, covariance, variance, EstimateWithCI, Z95};
use crate::{Error, Result};

use super::{check_n, check_replicas, noisy_grids, replicate};

#[derive(Debug, Clone, Serialize)]
pub struct CorrPoint {
    pub t: f64,
    /// `None` when one of the samples had zero variance.
    pub estimate: Option<EstimateWithCI>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrDecay {
    pub p: f64,
    pub n: i64,
    pub kind: NoiseKind,
    pub points: Vec<CorrPoint>,
    /// Per replica: `T_n(ω)` followed by `T_n(ω^t)` for each `t`.
    pub travel_times: Vec<Vec<i64>>,
}

impl CorrDecay {
    /// Estimates are strictly decreasing in `t` with pairwise disjoint intervals.
    pub fn strictly_separated(&self) -> bool {
        self.points.windows(2).all(|w| match (&w[0].estimate, &w[1].estimate) {
            (Some(a), Some(b)) => a.separated_above(b),
            _ => false,
        })
    }
}

/// `Corr(T_n(ω), T_n(ω^t))` for each `t`, with common random numbers across
/// clocks: every replica draws one base field and reads all of its noisy
/// versions from the same keyed clocks.
pub fn corr_decay(p: f64, n: i64, ts: &[f64], kind: NoiseKind, replicas: usize, seed: u64) -> Result<CorrDecay> {
    check_replicas(replicas, 30)?;
    check_n(n, 1)?;
    if let Some(t) = ts.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::parameter("t", format!("noise clocks must be non-negative, got {t}")));
    }
    let rect = Rect::square(n);
    let travel_times = replicate(replicas, seed, |_, rs| {
        let cfg = WeightConfig::new(p, rs, rect)?;
        Ok(noisy_grids(&cfg, kind, ts, rect)?.iter().map(grid_travel_time).collect::<Vec<_>>())
    })?;
    let base: Vec<f64> = travel_times.iter().map(|r| r[0] as f64).collect();
    let points = ts
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let noisy: Vec<f64> = travel_times.iter().map(|r| r[k + 1] as f64).collect();
            CorrPoint { t, estimate: correlation_ci(&base, &noisy, seed).ok() }
        })
        .collect();
    Ok(CorrDecay { p, n, kind, points, travel_times })
}

#[derive(Debug, Clone, Serialize)]
pub struct NoiseComparison {
    pub p: f64,
    pub n: i64,
    pub t: f64,
    /// `M = coupled_cap(n, p)`.
    pub cap: u32,
    pub corr_bit_t: EstimateWithCI,
    pub corr_site_mt: EstimateWithCI,
    /// `corr_site_Mt − corr_bit_t`; the two stderrs are combined as if
    /// independent, which is conservative under the positive pairing.
    pub difference: EstimateWithCI,
    pub var_tn: f64,
    pub cov_bit: f64,
    pub cov_bit_capped: f64,
    pub cov_site: f64,
    pub cov_site_capped: f64,
    /// Per replica: `T(ω), T(ω^t), T(ω̃^{Mt}), T(ω∧M), T(ω^t∧M), T(ω̃^{Mt}∧M)`.
    pub travel_times: Vec<[i64; 6]>,
}

impl NoiseComparison {
    /// Largest capped-vs-uncapped covariance change relative to `Var(T_n)`.
    pub fn capping_effect(&self) -> f64 {
        let d = (self.cov_bit - self.cov_bit_capped).abs().max((self.cov_site - self.cov_site_capped).abs());
        d / self.var_tn
    }
}

/// Bit noise at clock `t` against the coupled site noise at clock `M t`, both
/// on the same base field, with and without capping weights at `M`.
pub fn noise_comparison(p: f64, n: i64, t: f64, replicas: usize, seed: u64) -> Result<NoiseComparison> {
    check_replicas(replicas, 30)?;
    check_n(n, 2)?;
    if !(t >= 0.0 && t <= 1.0 / (n as f64).ln()) {
        return Err(Error::parameter("t", format!("need 0 ≤ t ≤ 1/ln n = {:.6}, got {t}", 1.0 / (n as f64).ln())));
    }
    let cap = coupled_cap(n as u64, p)?;
    let m = cap as i64;
    let rect = Rect::square(n);
    let travel_times = replicate(replicas, seed, |_, rs| {
        let cfg = WeightConfig::new(p, rs, rect)?;
        let bit = noisy_grids(&cfg, NoiseKind::Bit, &[t], rect)?;
        let site = noisy_grids(&cfg, NoiseKind::Coupled { cap }, &[cap as f64 * t], rect)?;
        let capped = |g: &crate::lattice::Grid<i64>| {
            crate::lattice::Grid::from_vec(rect, g.values().iter().map(|&w| w.min(m)).collect())
        };
        Ok([
            grid_travel_time(&bit[0]),
            grid_travel_time(&bit[1]),
            grid_travel_time(&site[1]),
            grid_travel_time(&capped(&bit[0])?),
            grid_travel_time(&capped(&bit[1])?),
            grid_travel_time(&capped(&site[1])?),
        ])
    })?;
    let col = |k: usize| travel_times.iter().map(|r| r[k] as f64).collect::<Vec<_>>();
    let (base, bit, site, base_c, bit_c, site_c) = (col(0), col(1), col(2), col(3), col(4), col(5));
    let corr_bit_t = correlation_ci(&base, &bit, seed)?;
    let corr_site_mt = correlation_ci(&base, &site, seed)?;
    let d = corr_site_mt.estimate - corr_bit_t.estimate;
    let se = corr_bit_t.stderr.hypot(corr_site_mt.stderr);
    let difference = EstimateWithCI {
        estimate: d,
        stderr: se,
        ci_low: d - Z95 * se,
        ci_high: d + Z95 * se,
        replicas,
        seed,
    };
    Ok(NoiseComparison {
        p,
        n,
        t,
        cap,
        corr_bit_t,
        corr_site_mt,
        difference,
        var_tn: variance(&base),
        cov_bit: covariance(&base, &bit),
        cov_bit_capped: covariance(&base_c, &bit_c),
        cov_site: covariance(&base, &site),
        cov_site_capped: covariance(&base_c, &site_c),
        travel_times,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_clock_correlates_exactly() {
        let r = corr_decay(0.5, 12, &[0.0, 0.5], NoiseKind::Bit, 40, 3).unwrap();
        let e = r.points[0].estimate.unwrap();
        assert_eq!(e.estimate, 1.0);
        assert!(r.points[1].estimate.unwrap().estimate < 1.0);
        let c = noise_comparison(0.5, 12, 0.0, 40, 3).unwrap();
        assert_eq!(c.corr_bit_t.estimate, 1.0);
        assert_eq!(c.corr_site_mt.estimate, 1.0);
    }

    #[test]
    fn preconditions() {
        assert!(corr_decay(0.5, 10, &[1.0], NoiseKind::Site, 29, 0).is_err());
        assert!(corr_decay(0.5, 10, &[-1.0], NoiseKind::Site, 30, 0).is_err());
        assert!(noise_comparison(0.5, 100, 0.5, 30, 0).is_err());
    }

    #[test]
    fn thread_count_does_not_matter() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| corr_decay(0.4, 8, &[0.3, 2.0], NoiseKind::Site, 50, 11).unwrap().travel_times)
        };
        assert_eq!(run(1), run(3));
    }
}
