use serde::{Deserialize, Serialize};

use crate::lattice::{materialize, Point, Rect, WeightConfig};
use crate::lpp::increment_profile;
use crate::stationary::{lambda_params, Reflected, StationaryField};
use crate::stats::{mean, EstimateWithCI};
use crate::{Error, Result};

use super::{check_replicas, replicate, sub_seed};

/// The constants in `λ± = 1/2 ± a s |v|₁^{-1/3}`, `k = ⌊b s |v|₁^{2/3}⌋ + 1`
/// and the admissibility bound `s ≤ c |v|₁^{1/3}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SandwichConstants {
    pub lambda_coef: f64,
    pub k_coef: f64,
    pub s_cap_coef: f64,
}

impl Default for SandwichConstants {
    fn default() -> Self {
        SandwichConstants { lambda_coef: 8.0, k_coef: 2.0, s_cap_coef: 1.0 / 18.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub p: f64,
    pub v: Point,
    pub n: i64,
    pub s: f64,
    pub k: i64,
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    pub hat_minus: f64,
    pub hat_plus: f64,
    /// Both sandwiches hold for every `|j| ≤ k`.
    pub frequency: EstimateWithCI,
    pub left_frequency: EstimateWithCI,
    pub right_frequency: EstimateWithCI,
    /// Per-replica average of `Y_j`, `1 ≤ j ≤ k`.
    pub y_mean: EstimateWithCI,
    /// Per-replica average of `Z_j`, `−k < j ≤ 0`.
    pub z_mean: EstimateWithCI,
    pub y_expected: f64,
    pub z_expected: f64,
    /// Per replica: left holds, right holds, mean Y, mean Z.
    #[serde(skip)]
    pub rows: Vec<(bool, bool, f64, f64)>,
}

/// Frequency with which the plain increments around `v` are sandwiched between
/// stationary increments at `λ±` (left of the split) and the reflected
/// `λ̂±` (right of it), for `|j| ≤ k`.
///
/// Coordinates are those of the plain field on `R_{0, n e+}`; the split vertex
/// `v` plays the role of the origin and `w = n e+ − v`. The stationary fields
/// share the plain bulk weights and are based one row below the rectangle, so
/// that every compared site lies in the interior.
pub fn sandwich_experiment(
    p: f64,
    v: Point,
    n: i64,
    s: f64,
    replicas: usize,
    seed: u64,
    consts: SandwichConstants,
) -> Result<SandwichReport> {
    check_replicas(replicas, 2)?;
    let w = Point::new(n - v.x, n - v.y);
    if v.x < 1 || v.y < 1 || w.x < 2 || w.y < 1 {
        return Err(Error::domain(format!("sandwich needs v ≥ e+ and w ≥ (2,1), got v = ({}, {}), n = {n}", v.x, v.y)));
    }
    let l1 = v.l1() as f64;
    if !(s > 0.0) || s > consts.s_cap_coef * l1.cbrt() {
        return Err(Error::domain(format!("need 0 < s ≤ {:.6}, got {s}", consts.s_cap_coef * l1.cbrt())));
    }
    if ((v.y - v.x).abs() as f64) > s * l1.powf(2.0 / 3.0) {
        return Err(Error::domain("v is too far from the diagonal for this s"));
    }
    let k = (consts.k_coef * s * l1.powf(2.0 / 3.0)).floor() as i64 + 1;
    if k > v.y - 1 || k > w.y {
        return Err(Error::domain(format!("window k = {k} does not fit inside the rectangle")));
    }
    let spread = consts.lambda_coef * s * l1.powf(-1.0 / 3.0);
    let hat_spread = consts.lambda_coef * s * ((w - Point::E1).l1() as f64).powf(-1.0 / 3.0);
    let (lm, lp, hm, hp) = (0.5 - spread, 0.5 + spread, 0.5 - hat_spread, 0.5 + hat_spread);
    let params = |l: f64| {
        if l > 0.0 && l < 1.0 {
            lambda_params(p, l)
        } else {
            Err(Error::domain(format!("λ = {l} leaves (0,1); s is too large for this v")))
        }
    };
    let (pm, pp, qm, qp) = (params(lm)?, params(lp)?, params(hm)?, params(hp)?);

    let rect = Rect::square(n);
    let left_extent = Rect::new(Point::new(0, -1), Point::new(v.x, v.y + k))?;
    let center = 2 * v + Point::E1;
    let right_extent = Rect::new(Point::new(v.x - w.x + 1, v.y - w.y - 1), Point::new(v.x, v.y + k + 1))?;

    let rows = replicate(replicas, seed, |_, rs| {
        let plain = materialize(&WeightConfig::new(p, rs, rect)?, rect)?;
        let prof = increment_profile(&plain, v, n)?;
        let mirror = Reflected { inner: &plain, center };
        let (bl, br) = (sub_seed(rs, 1), sub_seed(rs, 2));
        let lo = StationaryField::with_bulk(pm, left_extent, &plain, bl)?;
        let hi = StationaryField::with_bulk(pp, left_extent, &plain, bl)?;
        let hat_lo = StationaryField::with_bulk(qm, right_extent, &mirror, br)?;
        let hat_hi = StationaryField::with_bulk(qp, right_extent, &mirror, br)?;
        // ω^V_{j e2} on the left; ω̂^V_{e1 + (j−1) e2} reads the mirrored field at v + (1−j) e2.
        let om = |f: &StationaryField, j: i64| f.omega_v(v + j * Point::E2).expect("inside left extent");
        let hat = |f: &StationaryField, j: i64| f.omega_v(v + (1 - j) * Point::E2).expect("inside right extent");
        let mut left_ok = true;
        let mut right_ok = true;
        for j in -k..=k {
            let d = prof.delta_at(j);
            left_ok &= om(&lo, j) <= d && d <= om(&hi, j);
            let dp = prof.delta_prime_at(j);
            right_ok &= hat(&hat_lo, j) <= dp && dp <= hat(&hat_hi, j);
        }
        let ys: Vec<f64> = (1..=k).map(|j| (hat(&hat_hi, j) - om(&lo, j)) as f64).collect();
        let zs: Vec<f64> = (-k + 1..=0).map(|j| (om(&hi, j) - hat(&hat_lo, j)) as f64).collect();
        Ok((left_ok, right_ok, mean(&ys), mean(&zs)))
    })?;
    let count = |f: &dyn Fn(&(bool, bool, f64, f64)) -> bool| rows.iter().filter(|r| f(r)).count();
    Ok(SandwichReport {
        p,
        v,
        n,
        s,
        k,
        lambda_minus: lm,
        lambda_plus: lp,
        hat_minus: hm,
        hat_plus: hp,
        frequency: EstimateWithCI::proportion(count(&|r| r.0 && r.1), replicas, seed)?,
        left_frequency: EstimateWithCI::proportion(count(&|r| r.0), replicas, seed)?,
        right_frequency: EstimateWithCI::proportion(count(&|r| r.1), replicas, seed)?,
        y_mean: EstimateWithCI::mean_of(&rows.iter().map(|r| r.2).collect::<Vec<_>>(), seed)?,
        z_mean: EstimateWithCI::mean_of(&rows.iter().map(|r| r.3).collect::<Vec<_>>(), seed)?,
        y_expected: 1.0 / qp.p_v - 1.0 / pm.p_v,
        z_expected: 1.0 / pp.p_v - 1.0 / qm.p_v,
        rows,
    })
}
