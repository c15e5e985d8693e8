use serde::Serialize;

use crate::lattice::{materialize, Grid, Point, Rect, WeightConfig};
use crate::lpp::{grid_travel_time, TravelTable};
use crate::stats::{mean, EstimateWithCI};
use crate::{Error, Result};

use super::{check_replicas, replicate};

/// Largest `n` for which influences are estimated.
pub const INFLUENCE_MAX_N: i64 = 64;

/// Exponent gap used in the visit-probability comparison.
pub const INFLUENCE_DELTA: f64 = 0.5;

fn check_influence_n(n: i64) -> Result<()> {
    if !(1..=INFLUENCE_MAX_N).contains(&n) {
        return Err(Error::parameter("n", format!("influence estimation needs 1 ≤ n ≤ {INFLUENCE_MAX_N}, got {n}")));
    }
    Ok(())
}

/// `∇_{v,i} T_n = E^ξ[T_n ∘ σ^ξ_{v,i}] − T_n = p T_n∘σ¹ + (1−p) T_n∘σ⁰ − T_n`,
/// evaluated exactly. `grid` holds the base weights and is restored on return.
fn gradient(cfg: &WeightConfig, grid: &mut Grid<i64>, t: i64, v: Point, i: u64) -> Result<f64> {
    let w = grid.at(v) as u64;
    let p = cfg.p();
    if i > w {
        return Ok(0.0);
    }
    // For i < ω the bit is 0, so σ⁰ is the identity; for i = ω, σ¹ is.
    let (value, coef) = if i < w { (true, p) } else { (false, 1.0 - p) };
    let forced = cfg.weight_with_bit(v, i, value)? as i64;
    grid.set(v, forced);
    let t_forced = grid_travel_time(grid);
    grid.set(v, w as i64);
    Ok(coef * (t_forced - t) as f64)
}

/// `I_{v,i}(T_n) = E|∇_{v,i} T_n|`. Sites outside `R_{0, n e+}` have influence 0.
pub fn bit_influence_on_tn(p: f64, n: i64, v: Point, i: u64, replicas: usize, seed: u64) -> Result<EstimateWithCI> {
    check_replicas(replicas, 2)?;
    check_influence_n(n)?;
    let rect = Rect::square(n);
    let samples = replicate(replicas, seed, |_, rs| {
        if !rect.contains(v) {
            return Ok(0.0);
        }
        let cfg = WeightConfig::new(p, rs, rect)?;
        let mut grid = materialize(&cfg, rect)?;
        let t = grid_travel_time(&grid);
        Ok(gradient(&cfg, &mut grid, t, v, i)?.abs())
    })?;
    EstimateWithCI::mean_of(&samples, seed)
}

#[derive(Debug, Clone, Serialize)]
pub struct InfluenceRow {
    pub v: Point,
    pub visit: EstimateWithCI,
    /// `Î_{v,i}` for `i = 0..=i_max`.
    pub influences: Vec<f64>,
    pub sum_sq: f64,
    /// `P̂(v ∈ π_n)^{2−δ}`.
    pub visit_power: f64,
}

impl InfluenceRow {
    pub fn ratio(&self) -> f64 {
        self.sum_sq / self.visit_power
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VisitInfluence {
    pub p: f64,
    pub n: i64,
    pub delta: f64,
    pub i_max: u64,
    pub replicas: usize,
    pub rows: Vec<InfluenceRow>,
    /// Smallest `C` with `Σ_i Î² ≤ C P̂^{2−δ}` over the sampled sites.
    pub constant_fit: f64,
}

/// Sampled sites: the diagonal and the lines `v2 − v1 = d` for `d ∈ {2, n/4, n/2}`.
pub fn influence_sites(n: i64) -> Vec<Point> {
    let mut offsets = vec![0, 2, n / 4, n / 2];
    offsets.sort_unstable();
    offsets.dedup();
    let rect = Rect::square(n);
    offsets
        .into_iter()
        .flat_map(|d| (0..=n).map(move |k| Point::new(k, k + d)))
        .filter(|v| rect.contains(*v))
        .collect()
}

/// Pairs `Σ_{i ≤ i_max} Î²_{v,i}` with `P̂(v ∈ π_n)^{2−δ}` over [`influence_sites`],
/// all estimated from one set of replicas.
pub fn visit_vs_influence(p: f64, n: i64, i_max: u64, replicas: usize, seed: u64) -> Result<VisitInfluence> {
    check_replicas(replicas, 2)?;
    check_influence_n(n)?;
    let rect = Rect::square(n);
    let sites = influence_sites(n);
    let per_rep = replicate(replicas, seed, |_, rs| {
        let cfg = WeightConfig::new(p, rs, rect)?;
        let mut grid = materialize(&cfg, rect)?;
        let table = TravelTable::from_grid(grid.clone());
        let t = table.value();
        let mut visits = Vec::with_capacity(sites.len());
        let mut grads = Vec::with_capacity(sites.len() * (i_max as usize + 1));
        for &v in &sites {
            visits.push(table.on_geodesic(v));
            for i in 0..=i_max {
                grads.push(gradient(&cfg, &mut grid, t, v, i)?.abs());
            }
        }
        Ok((visits, grads))
    })?;
    let width = i_max as usize + 1;
    let rows = sites
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let hits = per_rep.iter().filter(|(vis, _)| vis[k]).count();
            let visit = EstimateWithCI::proportion(hits, replicas, seed)?;
            let influences: Vec<f64> = (0..width)
                .map(|i| mean(&per_rep.iter().map(|(_, g)| g[k * width + i]).collect::<Vec<_>>()))
                .collect();
            let sum_sq = influences.iter().map(|x| x * x).sum();
            Ok(InfluenceRow { v, visit, influences, sum_sq, visit_power: visit.estimate.powf(2.0 - INFLUENCE_DELTA) })
        })
        .collect::<Result<Vec<_>>>()?;
    let constant_fit = rows.iter().filter(|r| r.visit_power > 0.0).map(InfluenceRow::ratio).fold(0.0, f64::max);
    Ok(VisitInfluence { p, n, delta: INFLUENCE_DELTA, i_max, replicas, rows, constant_fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outside_site_has_no_influence() {
        let e = bit_influence_on_tn(0.5, 6, Point::new(7, 0), 0, 10, 1).unwrap();
        assert_eq!(e.estimate, 0.0);
        assert_eq!(e.stderr, 0.0);
        assert!(bit_influence_on_tn(0.5, 65, Point::ORIGIN, 0, 10, 1).is_err());
    }

    #[test]
    fn gradient_matches_direct_expectation() {
        let rect = Rect::square(5);
        let cfg = WeightConfig::new(0.4, 77, rect).unwrap();
        let mut grid = materialize(&cfg, rect).unwrap();
        let t = grid_travel_time(&grid);
        for v in rect.points() {
            for i in 0..4 {
                let direct = |value| {
                    let mut g = grid.clone();
                    g.set(v, cfg.weight_with_bit(v, i, value).unwrap() as i64);
                    grid_travel_time(&g) as f64
                };
                let want = 0.4 * direct(true) + 0.6 * direct(false) - t as f64;
                let got = gradient(&cfg, &mut grid, t, v, i).unwrap();
                assert!((got - want).abs() < 1e-12);
            }
        }
        assert_eq!(grid, materialize(&cfg, rect).unwrap());
    }

    #[test]
    fn sites_lie_in_square() {
        let s = influence_sites(16);
        assert!(s.iter().all(|v| Rect::square(16).contains(*v)));
        assert!(s.contains(&Point::new(8, 8)) && s.contains(&Point::new(0, 8)));
    }
}
