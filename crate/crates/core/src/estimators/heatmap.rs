use rayon::prelude::*;
use serde::Serialize;

use crate::lattice::{Grid, Point, Rect, WeightConfig};
use crate::lpp::TravelTable;
use crate::rng::replica_seed;
use crate::stats::{ols, EstimateWithCI};
use crate::{Error, Result};

use super::check_replicas;

/// Largest side for which full forward/backward tables are kept.
pub const HEATMAP_MAX_N: i64 = 2000;

#[derive(Debug, Clone, Serialize)]
pub struct OffDiagonalBin {
    pub s_low: f64,
    pub s_high: f64,
    pub sites: usize,
    pub mean_log_frequency: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HeatmapResult {
    pub n: i64,
    pub p: f64,
    pub replicas: usize,
    /// Number of replicas in which each site lies on some geodesic.
    #[serde(skip)]
    pub visit_count: Grid<u32>,
    pub midpoint: EstimateWithCI,
    pub corner: EstimateWithCI,
    /// Midpoint frequency times `(|v|₁ / ln |v|₁)^{2/3}` at `|v|₁ = n`.
    pub scaled_diagonal: f64,
    /// Mean log-frequency along the anti-diagonal `|v|₁ = n`, binned by
    /// `s = |v2 − v1| / n^{2/3}`.
    pub off_diagonal: Vec<OffDiagonalBin>,
    /// Least-squares slope of the binned log-frequency against `s`.
    pub off_diagonal_slope: f64,
}

impl HeatmapResult {
    pub fn frequency(&self, v: Point) -> f64 {
        self.visit_count.try_get(v).map_or(0.0, |&c| c as f64 / self.replicas as f64)
    }
}

/// Visit frequencies `P(v ∈ π_n)` over `R_{0, n e+}`.
pub fn geodesic_heatmap(p: f64, n: i64, replicas: usize, seed: u64) -> Result<HeatmapResult> {
    check_replicas(replicas, 1)?;
    if !(2..=HEATMAP_MAX_N).contains(&n) {
        return Err(Error::parameter("n", format!("heatmap needs 2 ≤ n ≤ {HEATMAP_MAX_N}, got {n}")));
    }
    let rect = Rect::square(n);
    // Integer counts commute, so the parallel reduction is order-independent.
    let counts = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let cfg = WeightConfig::new(p, replica_seed(seed, r as u64), rect)?;
            Ok(TravelTable::new(&cfg, rect.lo, rect.hi)?.member_mask())
        })
        .try_fold(
            || vec![0u32; rect.area()],
            |mut acc, mask: Result<Grid<bool>>| {
                for (a, &m) in acc.iter_mut().zip(mask?.values()) {
                    *a += m as u32;
                }
                Ok::<_, Error>(acc)
            },
        )
        .try_reduce(
            || vec![0u32; rect.area()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    let visit_count = Grid::from_vec(rect, counts)?;

    let h = n / 2;
    let mid = Point::new(h, n - h);
    let midpoint = EstimateWithCI::proportion(visit_count.at(mid) as usize, replicas, seed)?;
    let corner = EstimateWithCI::proportion(visit_count.at(Point::new(n, 0)) as usize, replicas, seed)?;
    let nf = n as f64;
    let scaled_diagonal = midpoint.estimate * (nf / nf.ln()).powf(2.0 / 3.0);

    let scale = nf.powf(2.0 / 3.0);
    let width = 0.25;
    let mut bins: Vec<(usize, f64)> = Vec::new();
    for x in 0..=n {
        let v = Point::new(x, n - x);
        let c = visit_count.at(v);
        if c == 0 {
            continue;
        }
        let s = (v.y - v.x).abs() as f64 / scale;
        let b = (s / width) as usize;
        if bins.len() <= b {
            bins.resize(b + 1, (0, 0.0));
        }
        bins[b].0 += 1;
        bins[b].1 += (c as f64 / replicas as f64).ln();
    }
    let off_diagonal: Vec<OffDiagonalBin> = bins
        .iter()
        .enumerate()
        .filter(|(_, b)| b.0 > 0)
        .map(|(k, &(sites, total))| OffDiagonalBin {
            s_low: k as f64 * width,
            s_high: (k + 1) as f64 * width,
            sites,
            mean_log_frequency: total / sites as f64,
        })
        .collect();
    let off_diagonal_slope = if off_diagonal.len() >= 2 {
        let xs: Vec<f64> = off_diagonal.iter().map(|b| 0.5 * (b.s_low + b.s_high)).collect();
        let ys: Vec<f64> = off_diagonal.iter().map(|b| b.mean_log_frequency).collect();
        ols(&xs, &ys).0
    } else {
        f64::NAN
    };
    Ok(HeatmapResult {
        n,
        p,
        replicas,
        visit_count,
        midpoint,
        corner,
        scaled_diagonal,
        off_diagonal,
        off_diagonal_slope,
    })
}
