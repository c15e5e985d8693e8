use serde::{Deserialize, Serialize};

use crate::rng::{Draws, StreamTag};
use crate::{Error, Result};

use super::replicate;

pub const MAX_COORDS: usize = 4;
pub const MAX_SUPPORT: usize = 3;

/// A function of `|I|` i.i.d. coordinates with finite support, and a pair of
/// resampling sets. Probabilities are integer weights over their sum `W`, so
/// all moments can be computed exactly in integer arithmetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovMonoSpec {
    pub coords: usize,
    /// `P(Y_i = k) = weights[k] / W`.
    pub weights: Vec<u32>,
    /// `f` at `y`, indexed by `Σ_i y_i · support^i`.
    pub f: Vec<i64>,
    /// Bit `i` set means coordinate `i` is resampled.
    pub s: u32,
    pub s_tilde: u32,
}

impl CovMonoSpec {
    fn support(&self) -> usize {
        self.weights.len()
    }

    fn validate(&self) -> Result<()> {
        if self.coords == 0 || self.coords > MAX_COORDS {
            return Err(Error::parameter("coords", format!("need 1 ≤ |I| ≤ {MAX_COORDS}, got {}", self.coords)));
        }
        if self.weights.is_empty() || self.weights.len() > MAX_SUPPORT || self.weights.contains(&0) {
            return Err(Error::parameter("weights", format!("need 1 to {MAX_SUPPORT} positive weights")));
        }
        if self.f.len() != self.support().pow(self.coords as u32) {
            return Err(Error::parameter("f", "table length must be support^|I|"));
        }
        let full = (1u32 << self.coords) - 1;
        if self.s & !full != 0 || self.s_tilde & !full != 0 {
            return Err(Error::parameter("s", "resampling sets must be subsets of I"));
        }
        if self.s & !self.s_tilde != 0 {
            return Err(Error::domain("resampling sets are not nested: S ⊄ S̃"));
        }
        Ok(())
    }

    fn digits(&self, mut y: usize) -> [usize; MAX_COORDS] {
        let mut d = [0; MAX_COORDS];
        for slot in d.iter_mut().take(self.coords) {
            *slot = y % self.support();
            y /= self.support();
        }
        d
    }

    fn index(&self, d: &[usize; MAX_COORDS]) -> usize {
        d[..self.coords].iter().rev().fold(0, |acc, &k| acc * self.support() + k)
    }

    /// `W^{|I|} P(Y = y)`.
    fn weight_of(&self, y: usize) -> i128 {
        self.digits(y)[..self.coords].iter().map(|&k| self.weights[k] as i128).product()
    }
}

/// `W^{2|I|} · Cov(f(Y), f(Y^S))`, exactly.
pub fn scaled_noisy_moment(spec: &CovMonoSpec, mask: u32) -> Result<i128> {
    spec.validate()?;
    let w: i128 = spec.weights.iter().map(|&x| x as i128).sum();
    let n = spec.f.len();
    let resampled: Vec<usize> = (0..spec.coords).filter(|i| mask >> i & 1 == 1).collect();
    let m = spec.support().pow(resampled.len() as u32);
    let mut moment: i128 = 0;
    let mut first: i128 = 0;
    for y in 0..n {
        let py = spec.weight_of(y);
        let fy = spec.f[y] as i128;
        first += py * fy;
        let base = spec.digits(y);
        let mut inner: i128 = 0;
        for z in 0..m {
            let mut d = base;
            let mut pz: i128 = 1;
            let mut rest = z;
            for &i in &resampled {
                let k = rest % spec.support();
                rest /= spec.support();
                d[i] = k;
                pz *= spec.weights[k] as i128;
            }
            inner += pz * spec.f[spec.index(&d)] as i128;
        }
        moment += py * fy * inner;
    }
    let pad = w.pow((spec.coords - resampled.len()) as u32);
    Ok(moment * pad - first * first)
}

/// `Cov(f(Y), f(Y^S)) ≥ Cov(f(Y), f(Y^S̃))` by exhaustive enumeration.
pub fn covariance_monotonicity_bruteforce(spec: &CovMonoSpec) -> Result<bool> {
    Ok(scaled_noisy_moment(spec, spec.s)? >= scaled_noisy_moment(spec, spec.s_tilde)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct CovMonoSweep {
    pub functions: usize,
    pub coords: usize,
    pub support: usize,
    pub pairs_checked: usize,
    pub violations: usize,
    /// Smallest scaled gap `W^{2|I|}(Cov_S − Cov_S̃)` over strict inclusions.
    pub min_strict_gap: i128,
}

/// All nested pairs `S ⊆ S̃ ⊆ I` for random integer-valued `f` and random weights.
pub fn covariance_monotonicity_sweep(functions: usize, coords: usize, support: usize, seed: u64) -> Result<CovMonoSweep> {
    if support == 0 || support > MAX_SUPPORT {
        return Err(Error::parameter("support", format!("need 1 ≤ support ≤ {MAX_SUPPORT}")));
    }
    let full = (1u32 << coords) - 1;
    let results = replicate(functions, seed, |_, rs| {
        let mut draws = Draws::new(rs, StreamTag::Generic);
        let weights: Vec<u32> = (0..support).map(|_| 1 + draws.below(5) as u32).collect();
        let f = (0..support.pow(coords as u32)).map(|_| draws.below(21) as i64 - 10).collect();
        let spec = CovMonoSpec { coords, weights, f, s: 0, s_tilde: 0 };
        let covs: Vec<i128> = (0..=full).map(|m| scaled_noisy_moment(&spec, m)).collect::<Result<_>>()?;
        let mut pairs = 0;
        let mut bad = 0;
        let mut gap = i128::MAX;
        for s in 0..=full {
            for t in 0..=full {
                if s & !t != 0 {
                    continue;
                }
                pairs += 1;
                let d = covs[s as usize] - covs[t as usize];
                if d < 0 {
                    bad += 1;
                }
                if s != t {
                    gap = gap.min(d);
                }
            }
        }
        Ok((pairs, bad, gap))
    })?;
    Ok(CovMonoSweep {
        functions,
        coords,
        support,
        pairs_checked: results.iter().map(|r| r.0).sum(),
        violations: results.iter().map(|r| r.1).sum(),
        min_strict_gap: results.iter().map(|r| r.2).min().unwrap_or(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(s: u32, s_tilde: u32) -> CovMonoSpec {
        CovMonoSpec { coords: 2, weights: vec![1, 2, 1], f: vec![3, -1, 0, 2, 5, -4, 1, 1, 0], s, s_tilde }
    }

    #[test]
    fn empty_set_gives_variance_and_full_set_gives_zero() {
        let sp = spec(0, 3);
        let var = scaled_noisy_moment(&sp, 0).unwrap();
        assert!(var > 0);
        assert_eq!(scaled_noisy_moment(&sp, 3).unwrap(), 0);
        assert!(covariance_monotonicity_bruteforce(&sp).unwrap());
        assert!(covariance_monotonicity_bruteforce(&spec(1, 1)).unwrap());
    }

    #[test]
    fn non_nested_is_a_domain_error() {
        assert!(matches!(covariance_monotonicity_bruteforce(&spec(1, 2)), Err(Error::Domain(_))));
    }

    #[test]
    fn variance_by_hand() {
        // One fair coordinate, f = identity on {0,1}: Var = 1/4, W^2 = 4.
        let sp = CovMonoSpec { coords: 1, weights: vec![1, 1], f: vec![0, 1], s: 0, s_tilde: 1 };
        assert_eq!(scaled_noisy_moment(&sp, 0).unwrap(), 1);
        assert_eq!(scaled_noisy_moment(&sp, 1).unwrap(), 0);
    }
}
