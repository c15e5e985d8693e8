//! Exact analysis of real functions on `{0,1}^m` under the product
//! Bernoulli(p) measure: the bit-resampling semigroup `P_t`, the difference
//! operators `∇_i`, influences and the covariance bounds built on them.
//!
//! Bit `i` of a table index is coordinate `x_i`. Every operator is exact and
//! costs `O(m 2^m)`.

use serde::Serialize;

use crate::error::check_prob;
use rayon::prelude::*;

use crate::rng::{replica_seed, Draws, StreamTag};
use crate::stats::sum;
use crate::{Error, Result};

pub const MAX_DIM: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct CubeFunction {
    m: usize,
    p: f64,
    values: Vec<f64>,
}

impl CubeFunction {
    pub fn new(m: usize, p: f64, values: Vec<f64>) -> Result<Self> {
        check_prob("p", p)?;
        if m > MAX_DIM {
            return Err(Error::parameter("m", format!("dimension at most {MAX_DIM}, got {m}")));
        }
        if values.len() != 1 << m {
            return Err(Error::parameter("values", format!("expected {} entries, got {}", 1usize << m, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::parameter("values", "must be finite"));
        }
        Ok(CubeFunction { m, p, values })
    }

    pub fn from_fn(m: usize, p: f64, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new(m, p, (0..1usize << m.min(MAX_DIM + 1)).map(f).collect())
    }

    pub fn constant(m: usize, p: f64, c: f64) -> Result<Self> {
        Self::from_fn(m, p, |_| c)
    }

    /// `x ↦ x_i`.
    pub fn dictator(m: usize, p: f64, i: usize) -> Result<Self> {
        check_index(m, i)?;
        Self::from_fn(m, p, |x| ((x >> i) & 1) as f64)
    }

    /// `x ↦ ⊕_{i∈S} x_i ∈ {0,1}` for the coordinates in the bit mask `s`.
    pub fn parity(m: usize, p: f64, s: usize) -> Result<Self> {
        Self::from_fn(m, p, |x| ((x & s).count_ones() % 2) as f64)
    }

    /// I.i.d. standard normal values.
    pub fn random_gaussian(m: usize, p: f64, draws: &mut Draws) -> Result<Self> {
        let v = (0..1usize << m).map(|_| draws.normal()).collect();
        Self::new(m, p, v)
    }

    /// Nonnegative combination of threshold indicators `1[Σ w_i x_i ≥ τ_j]`
    /// with nonnegative weights, hence monotone.
    pub fn random_monotone(m: usize, p: f64, draws: &mut Draws) -> Result<Self> {
        let w: Vec<f64> = (0..m).map(|_| draws.uniform()).collect();
        let total: f64 = w.iter().sum();
        let mut thresholds: Vec<f64> = (0..4).map(|_| draws.uniform() * total).collect();
        thresholds.sort_by(f64::total_cmp);
        let c: Vec<f64> = (0..4).map(|_| draws.uniform()).collect();
        Self::from_fn(m, p, |x| {
            let s: f64 = (0..m).filter(|&i| (x >> i) & 1 == 1).map(|i| w[i]).sum();
            thresholds.iter().zip(&c).filter(|(t, _)| s >= **t).map(|(_, c)| c).sum()
        })
    }

    /// Gaussian values depending only on `k` randomly chosen coordinates.
    pub fn random_junta(m: usize, p: f64, k: usize, draws: &mut Draws) -> Result<Self> {
        let k = k.min(m);
        let mut coords: Vec<usize> = (0..m).collect();
        for j in 0..k {
            let r = j + draws.below((m - j) as u64) as usize;
            coords.swap(j, r);
        }
        Self::junta_on(m, p, &coords[..k], draws)
    }

    /// Gaussian values depending only on the listed coordinates.
    pub fn junta_on(m: usize, p: f64, coords: &[usize], draws: &mut Draws) -> Result<Self> {
        for &c in coords {
            check_index(m, c)?;
        }
        let table: Vec<f64> = (0..1usize << coords.len()).map(|_| draws.normal()).collect();
        Self::from_fn(m, p, |x| {
            let key = coords.iter().enumerate().fold(0usize, |acc, (j, &c)| acc | (((x >> c) & 1) << j));
            table[key]
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, x: usize) -> f64 {
        self.values[x]
    }

    /// Product measure `Π p^{x_i} (1−p)^{1−x_i}` of every pattern.
    pub fn measure(&self) -> Vec<f64> {
        measure(self.m, self.p)
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        CubeFunction { m: self.m, p: self.p, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.compatible(other)?;
        Ok(self.with_values(self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect()))
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.m != other.m || self.p != other.p {
            return Err(Error::domain(format!(
                "functions differ in dimension or bias: (m={}, p={}) vs (m={}, p={})",
                self.m, self.p, other.m, other.p
            )));
        }
        Ok(())
    }

    pub fn expectation(&self) -> f64 {
        let mu = self.measure();
        sum(mu.iter().zip(&self.values).map(|(w, v)| w * v))
    }

    /// `E[f g]`.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.compatible(other)?;
        let mu = self.measure();
        Ok(sum(mu.iter().zip(self.values.iter().zip(&other.values)).map(|(w, (a, b))| w * a * b)))
    }

    pub fn variance(&self) -> f64 {
        let e = self.expectation();
        self.map(|v| (v - e) * (v - e)).expectation()
    }

    /// `E|f|^r`.
    pub fn abs_moment(&self, r: f64) -> f64 {
        self.map(|v| v.abs().powf(r)).expectation()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn check_index(m: usize, i: usize) -> Result<()> {
    if i < m {
        Ok(())
    } else {
        Err(Error::parameter("i", format!("coordinate {i} out of range for m = {m}")))
    }
}

fn measure(m: usize, p: f64) -> Vec<f64> {
    let mut w = vec![1.0];
    for _ in 0..m {
        let lo: Vec<f64> = w.iter().map(|x| x * (1.0 - p)).collect();
        let hi: Vec<f64> = w.iter().map(|x| x * p).collect();
        // the new coordinate is the highest bit
        w = lo.into_iter().chain(hi).collect();
    }
    w
}

/// `P_t f(x) = E_x[f(X^t)]`: each axis contracted with the kernel
/// `e^{−t} Id + (1 − e^{−t}) Π_p`.
pub fn semigroup_apply(f: &CubeFunction, t: f64) -> Result<CubeFunction> {
    if !(t >= 0.0) {
        return Err(Error::parameter("t", format!("must be non-negative, got {t}")));
    }
    let keep = (-t).exp();
    let mix = -(-t).exp_m1();
    let p = f.p;
    let mut v = f.values.clone();
    for i in 0..f.m {
        let bit = 1usize << i;
        for x in 0..v.len() {
            if x & bit == 0 {
                let (a, b) = (v[x], v[x | bit]);
                let mean = (1.0 - p) * a + p * b;
                v[x] = keep * a + mix * mean;
                v[x | bit] = keep * b + mix * mean;
            }
        }
    }
    Ok(f.with_values(v))
}

/// `∇_i f(x) = (p − x_i)(f∘σ¹_i − f∘σ⁰_i)(x)`.
pub fn difference_op(f: &CubeFunction, i: usize) -> Result<CubeFunction> {
    check_index(f.m, i)?;
    let bit = 1usize << i;
    let p = f.p;
    Ok(f.with_values(
        (0..f.values.len())
            .map(|x| {
                let d = f.values[x | bit] - f.values[x & !bit];
                let xi = if x & bit != 0 { 1.0 } else { 0.0 };
                (p - xi) * d
            })
            .collect(),
    ))
}

/// `I_i(f) = E|∇_i f|`.
pub fn influence(f: &CubeFunction, i: usize) -> Result<f64> {
    Ok(difference_op(f, i)?.abs_moment(1.0))
}

/// `2p(1−p) E|f∘σ¹_i − f∘σ⁰_i|`, the second expression for the influence.
pub fn influence_via_flip(f: &CubeFunction, i: usize) -> Result<f64> {
    check_index(f.m, i)?;
    let bit = 1usize << i;
    let d = f.with_values((0..f.values.len()).map(|x| (f.values[x | bit] - f.values[x & !bit]).abs()).collect());
    Ok(2.0 * f.p * (1.0 - f.p) * d.expectation())
}

pub fn influences(f: &CubeFunction) -> Result<Vec<f64>> {
    (0..f.m).map(|i| influence(f, i)).collect()
}

/// `Cov(f(X), g(X^t)) = E[f P_t g] − E f E g`.
pub fn noisy_covariance(f: &CubeFunction, g: &CubeFunction, t: f64) -> Result<f64> {
    f.compatible(g)?;
    let ptg = semigroup_apply(g, t)?;
    Ok(f.inner(&ptg)? - f.expectation() * g.expectation())
}

/// Hypercontractivity constant `ρ(p)`.
pub fn rho(p: f64) -> f64 {
    if p == 0.5 {
        1.0
    } else {
        2.0 * (2.0 * p - 1.0) / (p.ln() - (1.0 - p).ln())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BksParams {
    pub p: f64,
    pub t: f64,
    pub rho: f64,
    /// `θ = tanh(ρ t / 2)`.
    pub theta: f64,
}

impl BksParams {
    pub fn new(p: f64, t: f64) -> Result<Self> {
        check_prob("p", p)?;
        if !(t >= 0.0) {
            return Err(Error::parameter("t", format!("must be non-negative, got {t}")));
        }
        let r = rho(p);
        Ok(BksParams { p, t, rho: r, theta: (r * t / 2.0).tanh() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BksRecord {
    pub lhs: f64,
    pub rhs_stated: f64,
    pub rhs_proof: f64,
    pub stated_holds: bool,
    pub proof_holds: bool,
}

impl BksRecord {
    pub fn margin_stated(&self) -> f64 {
        self.rhs_stated - self.lhs
    }

    pub fn margin_proof(&self) -> f64 {
        self.rhs_proof - self.lhs
    }
}

/// Relative slack allowed for round-off in the BKS comparison.
const BKS_SLACK: f64 = 1e-12;

/// Compares `Cov(f(X), g(X^t))` with `√(Var f Var g)^{1−θ} (c Σ I_i(f) I_i(g))^θ`
/// for `c = 1` (stated) and `c = 4` (proof).
pub fn verify_bks(f: &CubeFunction, g: &CubeFunction, t: f64) -> Result<BksRecord> {
    f.compatible(g)?;
    let params = BksParams::new(f.p, t)?;
    let (vf, vg) = (f.variance(), g.variance());
    if !(vf > 0.0 && vg > 0.0) {
        return Err(Error::domain("BKS comparison needs Var f > 0 and Var g > 0"));
    }
    let lhs = noisy_covariance(f, g, t)?;
    let s: f64 = influences(f)?.iter().zip(influences(g)?).map(|(a, b)| a * b).sum();
    let th = params.theta;
    let base = (vf * vg).sqrt().powf(1.0 - th);
    let rhs_stated = base * s.powf(th);
    let rhs_proof = base * (4.0 * s).powf(th);
    let tol = BKS_SLACK * (vf * vg).sqrt();
    Ok(BksRecord {
        lhs,
        rhs_stated,
        rhs_proof,
        stated_holds: lhs <= rhs_stated + tol,
        proof_holds: lhs <= rhs_proof + tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    /// `|lhs − rhs| ≤ tol`.
    Identity,
    /// `rhs − lhs ≥ −tol`.
    Inequality,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub kind: CheckKind,
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
    pub passed: bool,
}

impl Check {
    fn identity(name: &'static str, lhs: f64, rhs: f64, tol: f64) -> Self {
        Check { name, kind: CheckKind::Identity, lhs, rhs, tol, passed: (lhs - rhs).abs() <= tol }
    }

    /// Identity between two tables, reported as their max deviation.
    fn identity_max(name: &'static str, dev: f64, tol: f64) -> Self {
        Self::identity(name, dev, 0.0, tol)
    }

    fn inequality(name: &'static str, lhs: f64, rhs: f64, tol: f64) -> Self {
        Check { name, kind: CheckKind::Inequality, lhs, rhs, tol, passed: rhs - lhs >= -tol }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub checks: Vec<Check>,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub const IDENTITY_TOL: f64 = 1e-10;
pub const HEAT_STEP: f64 = 1e-4;
pub const HEAT_TOL: f64 = 1e-6;
pub const INTEGRAL_RTOL: f64 = 1e-6;

/// All semigroup identities and inequalities for one `(f, g, t, i)`.
pub fn verify_lemma_suite(f: &CubeFunction, g: &CubeFunction, t: f64, i: usize) -> Result<LemmaReport> {
    f.compatible(g)?;
    check_index(f.m, i)?;
    let p = f.p;
    let tol = IDENTITY_TOL;
    let mut checks = Vec::new();

    let ptf = semigroup_apply(f, t)?;
    let ptg = semigroup_apply(g, t)?;
    let dif = difference_op(f, i)?;
    let dig = difference_op(g, i)?;

    // Commutativity
    let lhs = difference_op(&ptf, i)?;
    let rhs = semigroup_apply(&dif, t)?;
    checks.push(Check::identity_max("commutativity", lhs.max_abs_diff(&rhs), tol));

    // Heat equation, five-point central difference in t
    if t >= 2.0 * HEAT_STEP {
        let h = HEAT_STEP;
        let at = |s: f64| semigroup_apply(f, s);
        let (a, b, c, d) = (at(t + 2.0 * h)?, at(t + h)?, at(t - h)?, at(t - 2.0 * h)?);
        let mut gen = vec![0.0; ptf.values.len()];
        for j in 0..f.m {
            let dj = difference_op(&ptf, j)?;
            for (acc, v) in gen.iter_mut().zip(&dj.values) {
                *acc += v;
            }
        }
        let dev = (0..gen.len())
            .map(|x| {
                let fd = (-a.values[x] + 8.0 * b.values[x] - 8.0 * c.values[x] + d.values[x]) / (12.0 * h);
                (fd - gen[x]).abs()
            })
            .fold(0.0, f64::max);
        checks.push(Check::identity_max("heat_equation", dev, HEAT_TOL));
    }

    // Integration by parts
    checks.push(Check::identity("integration_by_parts", f.inner(&dig)?, -dif.inner(&dig)?, tol));

    // Time-decorrelation: the identity and the influence bound
    let pr = f.with_values((0..f.values.len()).map(|x| p - ((x >> i) & 1) as f64).collect());
    let ratio = dif.zip(&pr, |a, b| a / b)?;
    let rhs = semigroup_apply(&ratio, t)?.zip(&pr, |a, b| (-t).exp() * b * a)?;
    checks.push(Check::identity_max("time_decorrelation_identity", rhs.max_abs_diff(&semigroup_apply(&dif, t)?), tol));
    let ii = influence(f, i)?;
    checks.push(Check::inequality(
        "time_decorrelation_bound",
        influence(&ptf, i)?,
        2.0 * (-t).exp() * p.max(1.0 - p) * ii,
        tol,
    ));

    // Influence formulas agree
    checks.push(Check::identity("influence_forms", ii, influence_via_flip(f, i)?, tol));

    // Hypercontractivity and its corollary
    let r = rho(p);
    let e2 = ptf.map(|v| v * v).expectation();
    let qexp = 1.0 + (-2.0 * r * t).exp();
    checks.push(Check::inequality("hypercontractivity", e2, f.abs_moment(qexp).powf(2.0 / qexp), tol));
    let th = (r * t).tanh();
    checks.push(Check::inequality(
        "hypercontractivity_corollary",
        e2,
        f.abs_moment(2.0).powf(1.0 - th) * f.abs_moment(1.0).powf(2.0 * th),
        tol,
    ));

    // Symmetry of P_t
    checks.push(Check::identity("semigroup_symmetry", f.inner(&ptg)?, ptf.inner(g)?, tol));

    // Covariance identity Cov(f(X), g(X^{2t})) = Cov(P_t f, P_t g)
    checks.push(Check::identity(
        "covariance_identity",
        noisy_covariance(f, g, 2.0 * t)?,
        ptf.inner(&ptg)? - ptf.expectation() * ptg.expectation(),
        tol,
    ));

    // Semigroup law
    let s = 0.37;
    let lhs = semigroup_apply(&semigroup_apply(f, s)?, t)?;
    checks.push(Check::identity_max("semigroup_law", lhs.max_abs_diff(&semigroup_apply(f, s + t)?), tol));

    // Variance decay
    checks.push(Check::inequality("variance_decay", ptf.variance(), f.variance(), tol));

    // Integral formula
    let (quad, var) = integral_formula(f)?;
    checks.push(Check::identity("integral_formula", quad, var, INTEGRAL_RTOL * var.abs().max(1e-300)));

    Ok(LemmaReport { checks })
}

/// `Σ_i E[(P_s ∇_i f)²]`.
pub fn energy_at(f: &CubeFunction, s: f64) -> Result<f64> {
    let psf = semigroup_apply(f, s)?;
    let mut acc = 0.0;
    for i in 0..f.m {
        acc += difference_op(&psf, i)?.map(|v| v * v).expectation();
    }
    Ok(acc)
}

/// `(2 ∫₀^∞ Σ_i E[(P_s ∇_i f)²] ds, Var f)`, the integral by adaptive Simpson
/// on `[0, 40]`; the integrand decays at least like `e^{−2s}`.
pub fn integral_formula(f: &CubeFunction) -> Result<(f64, f64)> {
    let var = f.variance();
    let mut err = None;
    let mut integrand = |s: f64| match energy_at(f, s) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let q = adaptive_simpson(&mut integrand, 0.0, 40.0, 1e-9 * var.max(1e-300), 50);
    if let Some(e) = err {
        return Err(e);
    }
    Ok((2.0 * q, var))
}

fn adaptive_simpson(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_rec(f, a, b, fa, fb, fc, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    fc: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let c = 0.5 * (a + b);
    let (d, e) = (0.5 * (a + c), 0.5 * (c + b));
    let (fd, fe) = (f(d), f(e));
    let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, c, fa, fc, fd, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, c, b, fc, fb, fe, right, 0.5 * tol, depth - 1)
}

/// Entropy, variance and their ratio for `f_u(k) = ((1−u)/(1−p))^{k/2}`
/// under Geometric(p), from the closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LsiTerms {
    pub entropy: f64,
    pub variance: f64,
    pub ratio: f64,
}

pub fn geometric_lsi_terms(p: f64, u: f64) -> Result<LsiTerms> {
    check_prob("p", p)?;
    if !(u > 0.0 && u < p) {
        return Err(Error::domain(format!("need 0 < u < p, got u = {u}, p = {p}")));
    }
    let entropy = p * ((1.0 - u) / (1.0 - p)).ln() * (1.0 - u) / (u * u) - (p / u) * (p / u).ln();
    let denom = 1.0 - ((1.0 - p) * (1.0 - u)).sqrt();
    let variance = p / u - p * p / (denom * denom);
    Ok(LsiTerms { entropy, variance, ratio: entropy / variance })
}

/// `Ent(f_u²) / Var(f_u)`; diverges like `ln(1/(1−p)) / u` as `u → 0`.
pub fn geometric_lsi_ratio(p: f64, u: f64) -> Result<f64> {
    Ok(geometric_lsi_terms(p, u)?.ratio)
}

/// Lemma suite results for one random pair at one `(p, t)`.
#[derive(Debug, Clone, Serialize)]
pub struct LemmaSweepRow {
    pub function: usize,
    pub p: f64,
    pub t: f64,
    pub coordinate: usize,
    pub report: LemmaReport,
}

/// [`verify_lemma_suite`] on `functions` random Gaussian pairs at every `(p, t)`
/// of the grid. Pair `k` is drawn from replica `k` of `seed` and probes
/// coordinate `k mod m`.
pub fn lemma_sweep(m: usize, functions: usize, grid: &[(f64, f64)], seed: u64) -> Result<Vec<LemmaSweepRow>> {
    let per_fn: Vec<Vec<LemmaSweepRow>> = (0..functions)
        .into_par_iter()
        .map(|k| {
            grid.iter()
                .map(|&(p, t)| {
                    let mut draws = Draws::new(replica_seed(seed, k as u64), StreamTag::Generic);
                    let f = CubeFunction::random_gaussian(m, p, &mut draws)?;
                    let g = CubeFunction::random_gaussian(m, p, &mut draws)?;
                    let i = k % m;
                    Ok(LemmaSweepRow { function: k, p, t, coordinate: i, report: verify_lemma_suite(&f, &g, t, i)? })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_fn.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct BksTrial {
    pub trial: usize,
    pub m: usize,
    pub p: f64,
    pub t: f64,
    pub family: &'static str,
    pub record: BksRecord,
}

fn random_member(m: usize, p: f64, family: usize, draws: &mut Draws) -> Result<CubeFunction> {
    match family {
        0 => CubeFunction::random_gaussian(m, p, draws),
        1 => CubeFunction::random_monotone(m, p, draws),
        _ => {
            let k = 1 + draws.below(m as u64) as usize;
            CubeFunction::random_junta(m, p, k, draws)
        }
    }
}

const FAMILIES: [&str; 3] = ["gaussian", "monotone", "junta"];

/// Random `(f, g, p, t)` with `2 ≤ m ≤ max_m`, `p ∈ [0.02, 0.98]`,
/// `log10 t ∈ [−2, 1]`, and `f, g` from one of the random families.
/// Constant draws are redrawn.
pub fn bks_sweep(trials: usize, max_m: usize, seed: u64) -> Result<Vec<BksTrial>> {
    if !(2..=MAX_DIM).contains(&max_m) {
        return Err(Error::parameter("max_m", format!("need 2 ≤ max_m ≤ {MAX_DIM}, got {max_m}")));
    }
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut draws = Draws::new(replica_seed(seed, trial as u64), StreamTag::Generic);
            let m = 2 + draws.below(max_m as u64 - 1) as usize;
            let p = 0.02 + 0.96 * draws.uniform();
            let t = 10f64.powf(-2.0 + 3.0 * draws.uniform());
            let family = draws.below(FAMILIES.len() as u64) as usize;
            loop {
                let f = random_member(m, p, family, &mut draws)?;
                let g = random_member(m, p, family, &mut draws)?;
                if f.variance() > 0.0 && g.variance() > 0.0 {
                    let record = verify_bks(&f, &g, t)?;
                    return Ok(BksTrial { trial, m, p, t, family: FAMILIES[family], record });
                }
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamTag;

    fn gauss(m: usize, p: f64, seed: u64) -> CubeFunction {
        CubeFunction::random_gaussian(m, p, &mut Draws::new(seed, StreamTag::Generic)).unwrap()
    }

    #[test]
    fn measure_sums_to_one() {
        for p in [0.1, 0.5, 0.93] {
            let s = sum(measure(20, p));
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_cap() {
        assert!(CubeFunction::new(21, 0.5, vec![]).is_err());
        assert!(CubeFunction::new(2, 0.5, vec![0.0; 3]).is_err());
        assert!(CubeFunction::new(1, 0.5, vec![0.0, f64::NAN]).is_err());
    }

    #[test]
    fn semigroup_at_zero_is_identity() {
        let f = gauss(6, 0.3, 1);
        assert_eq!(semigroup_apply(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn dictator_under_the_semigroup() {
        let (p, t) = (0.3, 0.8);
        let f = CubeFunction::dictator(5, p, 2).unwrap();
        let g = semigroup_apply(&f, t).unwrap();
        for x in 0..32 {
            let xi = ((x >> 2) & 1) as f64;
            assert!((g.at(x) - (p + (-t).exp() * (xi - p))).abs() < 1e-15);
        }
    }

    #[test]
    fn semigroup_law() {
        let f = gauss(8, 0.4, 2);
        let a = semigroup_apply(&semigroup_apply(&f, 0.3).unwrap(), 1.1).unwrap();
        let b = semigroup_apply(&f, 1.4).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn influence_examples() {
        let c = CubeFunction::constant(3, 0.3, 2.5).unwrap();
        assert_eq!(influence(&c, 1).unwrap(), 0.0);
        let d = CubeFunction::dictator(3, 0.3, 0).unwrap();
        assert!((influence(&d, 0).unwrap() - 0.42).abs() < 1e-15);
        let par = CubeFunction::parity(2, 0.5, 0b11).unwrap();
        assert!((influence(&par, 0).unwrap() - 0.5).abs() < 1e-15);
        assert!((influence(&par, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!(influence(&par, 2).is_err());
    }

    #[test]
    fn dictator_covariance() {
        let d = CubeFunction::dictator(4, 0.5, 1).unwrap();
        for t in [0.0, 0.5, 2.0] {
            let c = noisy_covariance(&d, &d, t).unwrap();
            assert!((c - 0.25 * (-t).exp()).abs() < 1e-15);
            let r = verify_bks(&d, &d, t.max(1e-3)).unwrap();
            assert!(r.lhs <= 0.25 + 1e-15 && (r.rhs_stated - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_juntas_are_uncorrelated() {
        let mut dr = Draws::new(4, StreamTag::Generic);
        let f = CubeFunction::junta_on(6, 0.35, &[0, 1, 2], &mut dr).unwrap();
        let g = CubeFunction::junta_on(6, 0.35, &[3, 4, 5], &mut dr).unwrap();
        let r = verify_bks(&f, &g, 0.7).unwrap();
        assert!(r.lhs.abs() < 1e-14);
        assert!(r.proof_holds && r.stated_holds);
    }

    #[test]
    fn zero_variance_is_rejected() {
        let c = CubeFunction::constant(3, 0.5, 1.0).unwrap();
        assert!(matches!(verify_bks(&c, &c, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn suite_passes_on_a_random_function() {
        let f = gauss(6, 0.3, 9);
        let g = gauss(6, 0.3, 10);
        let rep = verify_lemma_suite(&f, &g, 1.0, 2).unwrap();
        assert!(rep.all_passed(), "{:?}", rep.failures().collect::<Vec<_>>());
    }

    #[test]
    fn integration_by_parts_with_constant() {
        let c = CubeFunction::constant(4, 0.6, 3.0).unwrap();
        let g = gauss(4, 0.6, 5);
        let dg = difference_op(&g, 1).unwrap();
        let dc = difference_op(&c, 1).unwrap();
        assert!(c.inner(&dg).unwrap().abs() < 1e-15);
        assert_eq!(dc.inner(&dg).unwrap(), 0.0);
    }

    #[test]
    fn variance_vanishes_at_large_times() {
        let f = gauss(10, 0.7, 3);
        assert!(semigroup_apply(&f, 50.0).unwrap().variance() <= 1e-15 * f.variance());
    }

    #[test]
    fn rho_values() {
        assert_eq!(rho(0.5), 1.0);
        for p in [0.01, 0.3, 0.49, 0.51, 0.7, 0.99] {
            assert!(rho(p) > 0.0 && rho(p) < 1.0);
            assert!((rho(p) - rho(1.0 - p)).abs() < 1e-12);
        }
        assert!((rho(0.5 + 1e-9) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lsi_ordering() {
        assert!(geometric_lsi_ratio(0.5, 0.5).is_err());
        let a = geometric_lsi_ratio(0.5, 0.1).unwrap();
        let b = geometric_lsi_ratio(0.5, 0.01).unwrap();
        let c = geometric_lsi_ratio(0.5, 0.001).unwrap();
        assert!(a < b && b < c);
    }
}
