use serde::{Deserialize, Serialize};

use crate::rng::{Draws, StreamTag};
use crate::stats::EstimateWithCI;
use crate::{Error, Result};

use super::{check_replicas, replicate};

/// Largest horizon for which the exact value is attached.
pub const EXACT_MAX_N: usize = 24;

/// Finitely supported integer step distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistSpec {
    pub values: Vec<i64>,
    pub probs: Vec<f64>,
}

impl DistSpec {
    pub fn new(values: Vec<i64>, probs: Vec<f64>) -> Result<Self> {
        let d = DistSpec { values, probs };
        d.validate()?;
        Ok(d)
    }

    /// The ±1 walk with `P(X = +1) = p_plus`.
    pub fn plus_minus(p_plus: f64) -> Result<Self> {
        Self::new(vec![-1, 1], vec![1.0 - p_plus, p_plus])
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.values.len() != self.probs.len() {
            return Err(Error::parameter("dist", "values and probs must be non-empty and of equal length"));
        }
        if self.probs.iter().any(|q| !(*q >= 0.0)) || (self.probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::parameter("dist", "probs must be non-negative and sum to 1"));
        }
        if self.delta() == 0.0 {
            return Err(Error::domain("δ = P(X ≥ 1) is zero"));
        }
        if self.mean() < 0.0 {
            return Err(Error::parameter("dist", format!("mean must be ≥ 0, got {}", self.mean())));
        }
        if !(self.sigma() > 0.0) {
            return Err(Error::parameter("dist", "variance must be positive"));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(&v, &q)| v as f64 * q).sum()
    }

    pub fn sigma(&self) -> f64 {
        let m = self.mean();
        self.values.iter().zip(&self.probs).map(|(&v, &q)| q * (v as f64 - m).powi(2)).sum::<f64>().sqrt()
    }

    /// `δ = P(X ≥ 1)`.
    pub fn delta(&self) -> f64 {
        self.values.iter().zip(&self.probs).filter(|(&v, _)| v >= 1).map(|(_, &q)| q).sum()
    }

    /// `4σ/(δ√N) + μ/δ`.
    pub fn bound(&self, n: usize) -> f64 {
        4.0 * self.sigma() / (self.delta() * (n as f64).sqrt()) + self.mean() / self.delta()
    }

    fn is_plus_minus(&self) -> bool {
        self.values.iter().all(|v| v.abs() == 1)
    }

    fn sample(&self, draws: &mut Draws) -> i64 {
        let u = draws.uniform();
        let mut acc = 0.0;
        for (&v, &q) in self.values.iter().zip(&self.probs) {
            acc += q;
            if u < acc {
                return v;
            }
        }
        *self.values.last().expect("non-empty support")
    }
}

/// `q_N = P(S_k ≥ 0 for 1 ≤ k ≤ N)` by dynamic programming over the law of
/// the walk killed on entering the negative half-line.
pub fn exact_nonneg_probability(dist: &DistSpec, n: usize) -> Result<f64> {
    dist.validate()?;
    let max_step = dist.values.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0);
    let mut mass = vec![0.0f64; n * max_step + 1];
    mass[0] = 1.0;
    let mut next = mass.clone();
    for _ in 0..n {
        next.iter_mut().for_each(|m| *m = 0.0);
        for (pos, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (&v, &q) in dist.values.iter().zip(&dist.probs) {
                let to = pos as i64 + v;
                if to >= 0 {
                    next[to as usize] += m * q;
                }
            }
        }
        std::mem::swap(&mut mass, &mut next);
    }
    Ok(mass.iter().sum())
}

#[derive(Debug, Clone, Serialize)]
pub struct RwBoundRecord {
    pub steps: usize,
    pub mu: f64,
    pub sigma: f64,
    pub delta: f64,
    pub q_hat: EstimateWithCI,
    pub bound: f64,
    /// Attached for ±1 steps and `N ≤ 24`.
    pub exact: Option<f64>,
}

impl RwBoundRecord {
    pub fn holds(&self) -> bool {
        self.q_hat.estimate <= self.bound
    }
}

/// Simulated `q̂_N` against `4σ/(δ√N) + μ/δ`.
pub fn rw_nonneg_bound(dist: &DistSpec, steps: usize, replicas: usize, seed: u64) -> Result<RwBoundRecord> {
    dist.validate()?;
    check_replicas(replicas, 1)?;
    if steps == 0 {
        return Err(Error::parameter("N", "horizon must be positive"));
    }
    let survived = replicate(replicas, seed, |_, rs| {
        let mut draws = Draws::new(rs, StreamTag::Generic);
        let mut s = 0i64;
        for _ in 0..steps {
            s += dist.sample(&mut draws);
            if s < 0 {
                return Ok(false);
            }
        }
        Ok(true)
    })?;
    let hits = survived.iter().filter(|&&b| b).count();
    let exact = (dist.is_plus_minus() && steps <= EXACT_MAX_N).then(|| exact_nonneg_probability(dist, steps)).transpose()?;
    Ok(RwBoundRecord {
        steps,
        mu: dist.mean(),
        sigma: dist.sigma(),
        delta: dist.delta(),
        q_hat: EstimateWithCI::proportion(hits, replicas, seed)?,
        bound: dist.bound(steps),
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_small_horizons() {
        let d = DistSpec::plus_minus(0.5).unwrap();
        assert_eq!(exact_nonneg_probability(&d, 1).unwrap(), 0.5);
        assert_eq!(exact_nonneg_probability(&d, 2).unwrap(), 0.5);
        assert_eq!(exact_nonneg_probability(&d, 4).unwrap(), 0.375);
        assert_eq!(d.bound(100), 0.8);
    }

    #[test]
    fn validation() {
        assert!(matches!(DistSpec::new(vec![-1, 0], vec![0.5, 0.5]), Err(Error::Domain(_))));
        assert!(DistSpec::plus_minus(0.4).is_err());
        assert!(DistSpec::new(vec![-1, 1], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn exact_value_attached_only_when_small() {
        let d = DistSpec::plus_minus(0.5).unwrap();
        let r = rw_nonneg_bound(&d, 4, 2000, 5).unwrap();
        assert_eq!(r.exact, Some(0.375));
        assert!(r.q_hat.contains(0.375));
        assert!(rw_nonneg_bound(&d, 25, 10, 5).unwrap().exact.is_none());
    }
}
