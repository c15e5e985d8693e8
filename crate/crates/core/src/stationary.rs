//! Stationary last-passage percolation with boundary weights.
//!
//! The field lives on a quarter plane `base + Z²_{≥0}`: the south row carries
//! i.i.d. Geometric(p_H(λ)) weights, the west column i.i.d. Geometric(p_V(λ))
//! weights, the corner has weight 0 and the interior is bulk Geometric(p).
//! `G` is the last-passage time from `base`; its increments are the boundary
//! weights `ω^H`, `ω^V` of the stationary model.

use serde::Serialize;

use crate::error::check_prob;
use crate::lattice::{materialize, Grid, Point, Rect, WeightConfig, WeightSource};
use crate::lpp::{GeodesicReport, TravelTable};
use crate::rng::{Stream, StreamTag};
use crate::stats;
use crate::{Error, Result};

/// Default clamp applied to λ before evaluating the parameter maps.
pub const LAMBDA_CLAMP: f64 = 1e-9;

/// `q(λ)` for bulk parameter `p`.
pub fn q_of(p: f64, lambda: f64) -> f64 {
    let r = ((1.0 - p) * lambda * (1.0 - lambda)).sqrt();
    (p * lambda + p * r) / (1.0 - p + p * lambda + 2.0 * r)
}

/// `q'(λ) = p(1−p) / (2√((1−p)λ(1−λ)) (√λ + √((1−p)(1−λ)))²)`.
pub fn q_prime_of(p: f64, lambda: f64) -> f64 {
    let r = ((1.0 - p) * lambda * (1.0 - lambda)).sqrt();
    let d = lambda.sqrt() + ((1.0 - p) * (1.0 - lambda)).sqrt();
    p * (1.0 - p) / (2.0 * r * d * d)
}

/// `p_V = 1 − (1−p)/(1−q)`, written to avoid cancellation.
fn p_v_of(p: f64, q: f64) -> f64 {
    (p - q) / (1.0 - q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaParams {
    pub p: f64,
    pub lambda: f64,
    pub q: f64,
    pub p_h: f64,
    pub p_v: f64,
    pub q_prime: f64,
    /// `u_λ = λ e1 + (1−λ) e2`.
    pub direction: (f64, f64),
}

impl LambdaParams {
    /// `E[ω^H] = (1−q)/q`.
    pub fn mean_h(&self) -> f64 {
        (1.0 - self.q) / self.q
    }

    /// `E[ω^V] = (1−p)/(p−q)`.
    pub fn mean_v(&self) -> f64 {
        (1.0 - self.p) / (self.p - self.q)
    }
}

pub fn lambda_params(p: f64, lambda: f64) -> Result<LambdaParams> {
    lambda_params_clamped(p, lambda, LAMBDA_CLAMP)
}

/// Parameter maps with λ clamped to `[clamp, 1 − clamp]`.
pub fn lambda_params_clamped(p: f64, lambda: f64, clamp: f64) -> Result<LambdaParams> {
    check_prob("p", p)?;
    check_prob("lambda", lambda)?;
    if !(clamp > 0.0 && clamp < 0.5) {
        return Err(Error::parameter("lambda_clamp", format!("must lie in (0, 1/2), got {clamp}")));
    }
    let lambda = lambda.clamp(clamp, 1.0 - clamp);
    let q = q_of(p, lambda);
    Ok(LambdaParams {
        p,
        lambda,
        q,
        p_h: q,
        p_v: p_v_of(p, q),
        q_prime: q_prime_of(p, lambda),
        direction: (lambda, 1.0 - lambda),
    })
}

/// `ψ(x) = [(1−p)(x1+x2) + 2√((1−p) x1 x2)] / p`, the limit of `T(0, n x)/n`.
pub fn shape_function(p: f64, x: (f64, f64)) -> Result<f64> {
    check_prob("p", p)?;
    if !(x.0 >= 0.0 && x.1 >= 0.0) {
        return Err(Error::domain(format!("shape function needs x ≥ 0, got ({}, {})", x.0, x.1)));
    }
    Ok(((1.0 - p) * (x.0 + x.1) + 2.0 * ((1.0 - p) * x.0 * x.1).sqrt()) / p)
}

/// Reads another weight source through the point reflection `x ↦ c − x`.
#[derive(Debug, Clone, Copy)]
pub struct Reflected<W> {
    pub inner: W,
    pub center: Point,
}

impl<W: WeightSource> WeightSource for Reflected<W> {
    fn weight(&self, v: Point) -> Result<i64> {
        self.inner.weight(v.reflect(self.center))
    }
}

#[derive(Debug, Clone)]
pub struct StationaryField {
    params: LambdaParams,
    extent: Rect,
    /// Weights as read by the DP: bulk in the interior, boundary weights on
    /// the south row and west column, 0 at the corner.
    weights: Grid<i64>,
    g: Grid<i64>,
}

/// Quarter-plane stationary field on `extent`, based at `extent.lo`, with
/// fresh bulk and boundary randomness derived from `seed`.
pub fn build_stationary(p: f64, lambda: f64, extent: Rect, seed: u64) -> Result<StationaryField> {
    let params = lambda_params(p, lambda)?;
    let bulk = WeightConfig::new(p, seed, extent)?;
    StationaryField::with_bulk(params, extent, &bulk, seed)
}

impl StationaryField {
    /// Keyed boundary weights on top of a given bulk field. The bulk source is
    /// read only at interior sites.
    pub fn with_bulk(params: LambdaParams, extent: Rect, bulk: &impl WeightSource, seed: u64) -> Result<Self> {
        let stream = Stream::new(seed, StreamTag::BoundaryV);
        let base = extent.lo;
        let south = (1..extent.width() as i64)
            .map(|i| {
                let v = base + i * Point::E1;
                stream.geometric(v, 0, params.p_h) as i64
            })
            .collect();
        let west = (1..extent.height() as i64)
            .map(|j| {
                let v = base + j * Point::E2;
                stream.geometric(v, 0, params.p_v) as i64
            })
            .collect();
        Self::from_boundary(params, extent, bulk, south, west)
    }

    /// Explicit boundary: `south[i−1] = ω^H_{base+i e1}` and
    /// `west[j−1] = ω^V_{base+j e2}`.
    pub fn from_boundary(
        params: LambdaParams,
        extent: Rect,
        bulk: &impl WeightSource,
        south: Vec<i64>,
        west: Vec<i64>,
    ) -> Result<Self> {
        let base = extent.lo;
        if south.len() + 1 != extent.width() || west.len() + 1 != extent.height() {
            return Err(Error::domain("boundary lengths must match the extent"));
        }
        let weights = Grid::try_from_fn(extent, |x| {
            let d = x - base;
            Ok::<i64, Error>(match (d.x, d.y) {
                (0, 0) => 0,
                (i, 0) => south[i as usize - 1],
                (0, j) => west[j as usize - 1],
                _ => bulk.weight(x)?,
            })
        })?;
        let g = TravelTable::from_grid(weights.clone());
        let g = Grid::from_fn(extent, |x| g.forward(x));
        Ok(StationaryField { params, extent, weights, g })
    }

    pub fn params(&self) -> &LambdaParams {
        &self.params
    }

    pub fn base(&self) -> Point {
        self.extent.lo
    }

    pub fn extent(&self) -> Rect {
        self.extent
    }

    fn check(&self, x: Point) -> Result<()> {
        if self.extent.contains(x) {
            Ok(())
        } else {
            Err(Error::domain(format!("({}, {}) outside stationary extent", x.x, x.y)))
        }
    }

    /// `G(x) = T(λ; base, x)`.
    pub fn g(&self, x: Point) -> i64 {
        self.g.at(x)
    }

    pub fn g_table(&self) -> &Grid<i64> {
        &self.g
    }

    /// Weight read by the DP at `x` (bulk, boundary or 0 at the corner).
    pub fn site_weight(&self, x: Point) -> i64 {
        self.weights.at(x)
    }

    /// Bulk weight at an interior site.
    pub fn bulk(&self, x: Point) -> Option<i64> {
        let b = self.base();
        (self.extent.contains(x) && x.x > b.x && x.y > b.y).then(|| self.weights.at(x))
    }

    /// `ω^H_x = G(x) − G(x − e1)`, defined for `x1 > base1`.
    pub fn omega_h(&self, x: Point) -> Option<i64> {
        (self.extent.contains(x) && x.x > self.base().x).then(|| self.g(x) - self.g(x - Point::E1))
    }

    /// `ω^V_x = G(x) − G(x − e2)`, defined for `x2 > base2`.
    pub fn omega_v(&self, x: Point) -> Option<i64> {
        (self.extent.contains(x) && x.y > self.base().y).then(|| self.g(x) - self.g(x - Point::E2))
    }

    /// `T(λ; x, y) = G(y) − G(x)`.
    pub fn travel_time(&self, x: Point, y: Point) -> Result<i64> {
        self.check(x)?;
        self.check(y)?;
        if !x.le(y) {
            return Err(Error::domain("stationary travel time needs x ≤ y"));
        }
        Ok(self.g(y) - self.g(x))
    }

    /// Path weights over `R_{x,y}` whose plain last-passage time is `T(λ; x, y)`:
    /// 0 at `x`, `ω^H` along the row of `x`, `ω^V` along its column, bulk elsewhere.
    pub fn boundary_weights(&self, x: Point, y: Point) -> Result<Grid<i64>> {
        self.check(x)?;
        self.check(y)?;
        let rect = Rect::new(x, y)?;
        Ok(Grid::from_fn(rect, |z| {
            if z == x {
                0
            } else if z.y == x.y {
                self.omega_h(z).expect("row sites right of x")
            } else if z.x == x.x {
                self.omega_v(z).expect("column sites above x")
            } else {
                self.weights.at(z)
            }
        }))
    }

    pub fn lambda_table(&self, x: Point, y: Point) -> Result<TravelTable> {
        Ok(TravelTable::from_grid(self.boundary_weights(x, y)?))
    }

    pub fn lambda_geodesic_report(&self, x: Point, y: Point) -> Result<GeodesicReport> {
        Ok(self.lambda_table(x, y)?.report())
    }

    /// Interior sites where `ω_x ≠ min(ω^H_x, ω^V_x)`.
    pub fn domination_violations(&self) -> usize {
        let b = self.base();
        self.extent
            .points()
            .filter(|x| x.x > b.x && x.y > b.y)
            .filter(|&x| {
                let (h, v) = (self.omega_h(x).expect("interior"), self.omega_v(x).expect("interior"));
                self.weights.at(x) != h.min(v)
            })
            .count()
    }

    /// `T(λ;x,z) = T(λ;x,y) + T(λ;y,z)` for `x ≤ y ≤ z`, with each side
    /// computed by DP over the boundary weights seen from its own corner.
    pub fn additivity_holds(&self, x: Point, y: Point, z: Point) -> Result<bool> {
        let t = |a, b| -> Result<i64> { Ok(crate::lpp::grid_travel_time(&self.boundary_weights(a, b)?)) };
        Ok(t(x, z)? == t(x, y)? + t(y, z)?)
    }

    /// `(Z_H, Z_V)`: the last index `j` with `x + j e1` on the downmost
    /// λ-geodesic and the last with `x + j e2` on the upmost one.
    pub fn exit_times(&self, x: Point, y: Point) -> Result<(i64, i64)> {
        let t = self.lambda_table(x, y)?;
        Ok(exit_times_of(&t))
    }
}

pub fn exit_times_of(t: &TravelTable) -> (i64, i64) {
    let x = t.start();
    let zh = t.downmost().iter().filter(|z| z.y == x.y).map(|z| z.x - x.x).max().unwrap_or(0);
    let zv = t.upmost().iter().filter(|z| z.x == x.x).map(|z| z.y - x.y).max().unwrap_or(0);
    (zh, zv)
}

/// `E_→`: the downmost λ-geodesic first steps right.
pub fn right_first(t: &TravelTable) -> bool {
    let d = t.downmost();
    d.len() > 1 && d[1] - d[0] == Point::E1
}

/// `E_↑`: the upmost λ-geodesic first steps up.
pub fn up_first(t: &TravelTable) -> bool {
    let u = t.upmost();
    u.len() > 1 && u[1] - u[0] == Point::E2
}

/// Departure times of a single-server queue started empty:
/// `d_j = max(d_{j−1}, a_j) + s_j` with arrival times `a_j` the partial sums
/// of the inter-arrival times.
pub fn lindley(inter_arrivals: &[u64], services: &[u64]) -> Vec<u64> {
    assert_eq!(inter_arrivals.len(), services.len(), "one service per customer");
    let mut a = 0u64;
    let mut d = 0u64;
    inter_arrivals
        .iter()
        .zip(services)
        .map(|(&x, &s)| {
            a += x;
            d = d.max(a) + s;
            d
        })
        .collect()
}

/// Inter-departure times `d_j − d_{j−1}` with `d_0 = 0`.
pub fn inter_departures(departures: &[u64]) -> Vec<u64> {
    let mut last = 0;
    departures
        .iter()
        .map(|&d| {
            let x = d - last;
            last = d;
            x
        })
        .collect()
}

/// Two columns of vertical boundary weights at `λ < λ'` coupled through a queue.
#[derive(Debug, Clone, Serialize)]
pub struct CoupledColumns {
    pub lambda: f64,
    pub lambda_prime: f64,
    /// `ω^V(λ)`, Geometric(p_V(λ)).
    pub service: Vec<u64>,
    /// Geometric(p_V(λ')) inter-arrival times.
    pub arrivals: Vec<u64>,
    /// Inter-departure times, playing the role of `ω^V(λ')`.
    pub departures: Vec<u64>,
    pub burn_in: usize,
    pub diagnostic: StationarityDiagnostic,
}

impl CoupledColumns {
    /// Departures after burn-in.
    pub fn stationary_departures(&self) -> &[u64] {
        &self.departures[self.burn_in.min(self.departures.len())..]
    }

    pub fn monotone(&self) -> bool {
        self.service.iter().zip(&self.departures).all(|(s, d)| s <= d)
    }
}

/// First-half vs second-half mean comparison of the post burn-in departures.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StationarityDiagnostic {
    pub first_half_mean: f64,
    pub second_half_mean: f64,
    pub z: f64,
    pub warn: bool,
}

pub const DEFAULT_BURN_IN: usize = 10_000;

pub fn couple_columns(
    p: f64,
    lambda: f64,
    lambda_prime: f64,
    length: usize,
    burn_in: usize,
    seed: u64,
) -> Result<CoupledColumns> {
    if !(lambda < lambda_prime) {
        return Err(Error::domain(format!("coupling needs λ < λ', got {lambda} and {lambda_prime}")));
    }
    if length < 1 {
        return Err(Error::parameter("length", "must be at least 1"));
    }
    let a = lambda_params(p, lambda)?;
    let b = lambda_params(p, lambda_prime)?;
    let total = length + burn_in;
    let svc = Stream::new(seed, StreamTag::BoundaryV);
    let arr = Stream::new(seed, StreamTag::BoundaryArrival);
    let service: Vec<u64> = (0..total as u64).map(|j| svc.geometric_global(j, a.p_v)).collect();
    let arrivals: Vec<u64> = (0..total as u64).map(|j| arr.geometric_global(j, b.p_v)).collect();
    let departures = inter_departures(&lindley(&arrivals, &service));
    let diagnostic = half_diagnostic(&departures[burn_in..]);
    Ok(CoupledColumns { lambda: a.lambda, lambda_prime: b.lambda, service, arrivals, departures, burn_in, diagnostic })
}

fn half_diagnostic(xs: &[u64]) -> StationarityDiagnostic {
    let h = xs.len() / 2;
    if h < 2 {
        return StationarityDiagnostic { first_half_mean: f64::NAN, second_half_mean: f64::NAN, z: 0.0, warn: false };
    }
    let a: Vec<f64> = xs[..h].iter().map(|&x| x as f64).collect();
    let b: Vec<f64> = xs[h..].iter().map(|&x| x as f64).collect();
    let (ma, mb) = (stats::mean(&a), stats::mean(&b));
    let se = (stats::variance(&a) / a.len() as f64 + stats::variance(&b) / b.len() as f64).sqrt();
    let z = if se > 0.0 { (ma - mb) / se } else { 0.0 };
    StationarityDiagnostic { first_half_mean: ma, second_half_mean: mb, z, warn: z.abs() > 3.0 }
}

/// Materialized field for CSV dumps: `(x, ω, ω^H, ω^V, G)` per site.
pub fn dump_rows(sf: &StationaryField) -> Vec<(Point, i64, Option<i64>, Option<i64>, i64)> {
    sf.extent().points().map(|x| (x, sf.site_weight(x), sf.omega_h(x), sf.omega_v(x), sf.g(x))).collect()
}

/// Bulk weights of a plain field over a rectangle, for sharing with a stationary build.
pub fn bulk_grid(p: f64, seed: u64, rect: Rect) -> Result<Grid<i64>> {
    materialize(&WeightConfig::new(p, seed, rect)?, rect)
}
