//! Last-passage times by max-plus dynamic programming.
//!
//! `T(u,v)` is the maximal weight of an up/right path from `u` to `v`,
//! counting both endpoints. Geodesic membership uses the bidirectional trick:
//! `x` lies on some geodesic iff `F(x) + B(x) - ω_x = T(u,v)` with
//! `F = T(u,·)` and `B = T(·,v)`.

use crate::lattice::{materialize, Grid, Point, Rect, WeightSource};
use crate::{Error, Result};

const NEG_INF: i64 = i64::MIN / 4;

fn check_order(u: Point, v: Point) -> Result<Rect> {
    Rect::new(u, v).map_err(|_| {
        Error::domain(format!("travel time needs u ≤ v, got ({}, {}) and ({}, {})", u.x, u.y, v.x, v.y))
    })
}

/// `T(u,v)` with O(width) memory.
pub fn travel_time(src: &impl WeightSource, u: Point, v: Point) -> Result<i64> {
    let rect = check_order(u, v)?;
    let w = rect.width();
    let mut row = vec![NEG_INF; w];
    for y in u.y..=v.y {
        let mut left = NEG_INF;
        for (k, x) in (u.x..=v.x).enumerate() {
            let p = Point::new(x, y);
            let best = if p == u { 0 } else { left.max(row[k]) };
            let val = best + src.weight(p)?;
            row[k] = val;
            left = val;
        }
    }
    Ok(row[w - 1])
}

/// `T` between the corners of a materialized grid, on raw rows.
pub fn grid_travel_time(weights: &Grid<i64>) -> i64 {
    let w = weights.rect().width();
    let vals = weights.values();
    let mut row = vec![NEG_INF; w];
    row[0] = 0;
    for line in vals.chunks_exact(w) {
        let mut left = NEG_INF;
        for (r, &om) in row.iter_mut().zip(line) {
            let val = left.max(*r) + om;
            *r = val;
            left = val;
        }
    }
    row[w - 1]
}

/// Forward and backward DP tables over `R_{u,v}`.
#[derive(Debug, Clone)]
pub struct TravelTable {
    rect: Rect,
    weights: Grid<i64>,
    forward: Grid<i64>,
    backward: Grid<i64>,
}

impl TravelTable {
    pub fn new(src: &impl WeightSource, u: Point, v: Point) -> Result<Self> {
        let rect = check_order(u, v)?;
        Ok(Self::from_grid(materialize(src, rect)?))
    }

    /// Tables over the full extent of a weight grid.
    pub fn from_grid(weights: Grid<i64>) -> Self {
        let rect = weights.rect();
        let (u, v) = (rect.lo, rect.hi);
        let mut forward = Grid::filled(rect, NEG_INF);
        for y in u.y..=v.y {
            for x in u.x..=v.x {
                let p = Point::new(x, y);
                let mut best = if p == u { 0 } else { NEG_INF };
                if x > u.x {
                    best = best.max(forward.at(Point::new(x - 1, y)));
                }
                if y > u.y {
                    best = best.max(forward.at(Point::new(x, y - 1)));
                }
                forward.set(p, best + weights.at(p));
            }
        }
        let mut backward = Grid::filled(rect, NEG_INF);
        for y in (u.y..=v.y).rev() {
            for x in (u.x..=v.x).rev() {
                let p = Point::new(x, y);
                let mut best = if p == v { 0 } else { NEG_INF };
                if x < v.x {
                    best = best.max(backward.at(Point::new(x + 1, y)));
                }
                if y < v.y {
                    best = best.max(backward.at(Point::new(x, y + 1)));
                }
                backward.set(p, best + weights.at(p));
            }
        }
        TravelTable { rect, weights, forward, backward }
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn start(&self) -> Point {
        self.rect.lo
    }

    pub fn end(&self) -> Point {
        self.rect.hi
    }

    /// `T(u, v)`.
    pub fn value(&self) -> i64 {
        self.forward.at(self.rect.hi)
    }

    /// `F(x) = T(u, x)`.
    pub fn forward(&self, x: Point) -> i64 {
        self.forward.at(x)
    }

    /// `B(x) = T(x, v)`.
    pub fn backward(&self, x: Point) -> i64 {
        self.backward.at(x)
    }

    pub fn weight(&self, x: Point) -> i64 {
        self.weights.at(x)
    }

    pub fn weights(&self) -> &Grid<i64> {
        &self.weights
    }

    /// Best weight of a path from `u` to `v` forced through `x`.
    pub fn through(&self, x: Point) -> i64 {
        self.forward(x) + self.backward(x) - self.weight(x)
    }

    pub fn on_geodesic(&self, x: Point) -> bool {
        self.rect.contains(x) && self.through(x) == self.value()
    }

    /// Whether some geodesic uses the edge `x → y`.
    pub fn edge_on_geodesic(&self, x: Point, y: Point) -> bool {
        self.rect.contains(x) && self.rect.contains(y) && self.forward(x) + self.backward(y) == self.value()
    }

    fn greedy(&self, prefer_up: bool) -> Vec<Point> {
        let (u, v) = (self.rect.lo, self.rect.hi);
        let mut path = Vec::with_capacity(self.rect.width() + self.rect.height() - 1);
        let mut x = u;
        path.push(x);
        while x != v {
            let up = x + Point::E2;
            let right = x + Point::E1;
            let order = if prefer_up { [up, right] } else { [right, up] };
            x = order
                .into_iter()
                .find(|&y| self.edge_on_geodesic(x, y))
                .expect("every geodesic vertex has a geodesic successor");
            path.push(x);
        }
        path
    }

    /// Geodesic lying above all others.
    pub fn upmost(&self) -> Vec<Point> {
        self.greedy(true)
    }

    /// Geodesic lying below all others.
    pub fn downmost(&self) -> Vec<Point> {
        self.greedy(false)
    }

    pub fn member_mask(&self) -> Grid<bool> {
        let t = self.value();
        Grid::from_fn(self.rect, |x| self.through(x) == t)
    }

    pub fn report(&self) -> GeodesicReport {
        GeodesicReport {
            value: self.value(),
            member_mask: self.member_mask(),
            upmost: self.upmost(),
            downmost: self.downmost(),
        }
    }
}

/// Travel time together with the geodesic set and its two extremal geodesics.
#[derive(Debug, Clone)]
pub struct GeodesicReport {
    pub value: i64,
    /// `π(u,v)`: sites on at least one geodesic.
    pub member_mask: Grid<bool>,
    pub upmost: Vec<Point>,
    pub downmost: Vec<Point>,
}

impl GeodesicReport {
    pub fn members(&self) -> impl Iterator<Item = Point> + '_ {
        self.member_mask.iter().filter(|(_, &m)| m).map(|(p, _)| p)
    }
}

pub fn geodesic_report(src: &impl WeightSource, u: Point, v: Point) -> Result<GeodesicReport> {
    Ok(TravelTable::new(src, u, v)?.report())
}

/// Whether the points form an up/right nearest-neighbour path.
pub fn is_directed_path(path: &[Point]) -> bool {
    !path.is_empty()
        && path.windows(2).all(|w| {
            let d = w[1] - w[0];
            d == Point::E1 || d == Point::E2
        })
}

/// `γ` is above `γ'`: on every vertical line meeting both, the lowest point
/// of `γ` is at least the lowest point of `γ'`.
pub fn path_above(gamma: &[Point], gamma_prime: &[Point]) -> bool {
    let low = |path: &[Point]| {
        let mut m = std::collections::BTreeMap::new();
        for p in path {
            m.entry(p.x).and_modify(|y: &mut i64| *y = (*y).min(p.y)).or_insert(p.y);
        }
        m
    };
    let a = low(gamma);
    let b = low(gamma_prime);
    a.iter().all(|(x, ya)| b.get(x).is_none_or(|yb| ya >= yb))
}

/// Dual form of [`path_above`]: on every horizontal line meeting both, the
/// rightmost point of `γ` is at most the rightmost point of `γ'`.
pub fn path_above_horizontal(gamma: &[Point], gamma_prime: &[Point]) -> bool {
    let high = |path: &[Point]| {
        let mut m = std::collections::BTreeMap::new();
        for p in path {
            m.entry(p.y).and_modify(|x: &mut i64| *x = (*x).max(p.x)).or_insert(p.x);
        }
        m
    };
    let a = high(gamma);
    let b = high(gamma_prime);
    a.iter().all(|(y, xa)| b.get(y).is_none_or(|xb| xa <= xb))
}

/// Increments of the split decomposition of `T(-v, w)` across the vertical
/// axis, in coordinates shifted so that `v` sits at the origin and
/// `w = n e_+ - v`.
#[derive(Debug, Clone)]
pub struct IncrementProfile {
    pub v: Point,
    pub n: i64,
    /// `T(-v, i e2)` for `i ∈ [-v2, w2]`.
    pub left: Vec<i64>,
    /// `T(e1 + i e2, w)` for `i ∈ [-v2, w2]`.
    pub right: Vec<i64>,
    /// `Δ_j` for `j ∈ [-v2+1, w2]`.
    pub delta: Vec<i64>,
    /// `Δ'_j` for `j ∈ [-v2+1, w2]`.
    pub delta_prime: Vec<i64>,
    /// `D_i` assembled from the increments, `i ∈ [-v2, w2]`.
    pub d: Vec<i64>,
}

impl IncrementProfile {
    pub fn i_min(&self) -> i64 {
        -self.v.y
    }

    pub fn i_max(&self) -> i64 {
        self.n - self.v.y
    }

    fn slot(&self, i: i64) -> usize {
        (i - self.i_min()) as usize
    }

    pub fn d_at(&self, i: i64) -> i64 {
        self.d[self.slot(i)]
    }

    pub fn delta_at(&self, j: i64) -> i64 {
        self.delta[self.slot(j) - 1]
    }

    pub fn delta_prime_at(&self, j: i64) -> i64 {
        self.delta_prime[self.slot(j) - 1]
    }

    /// `D_i` straight from the four travel times.
    pub fn d_direct(&self, i: i64) -> i64 {
        let z = self.slot(0);
        let s = self.slot(i);
        (self.left[z] + self.right[z]) - (self.left[s] + self.right[s])
    }

    /// `T(-v, w) = max_i [T(-v, i e2) + T(e1 + i e2, w)]`.
    pub fn total(&self) -> i64 {
        self.left.iter().zip(&self.right).map(|(a, b)| a + b).max().expect("non-empty profile")
    }

    /// `D_i ≥ 0` for every `i`.
    pub fn origin_split_is_optimal(&self) -> bool {
        self.d.iter().all(|&d| d >= 0)
    }
}

/// Increment profile of the field on `R_{0, n e_+}` around the vertex `v`.
pub fn increment_profile(src: &impl WeightSource, v: Point, n: i64) -> Result<IncrementProfile> {
    if n < 1 || v.x < 0 || v.y < 0 || v.y > n || v.x >= n {
        return Err(Error::domain(format!(
            "increment profile needs 0 ≤ v1 < n and 0 ≤ v2 ≤ n, got v = ({}, {}), n = {n}",
            v.x, v.y
        )));
    }
    // Original coordinates: the shifted point x is original x + v.
    let left_rect = Rect::new(Point::ORIGIN, Point::new(v.x, n))?;
    let right_rect = Rect::new(Point::new(v.x + 1, 0), Point::new(n, n))?;
    let left_tab = TravelTable::new(src, left_rect.lo, left_rect.hi)?;
    let right_tab = TravelTable::new(src, right_rect.lo, right_rect.hi)?;

    let left: Vec<i64> = (0..=n).map(|y| left_tab.forward(Point::new(v.x, y))).collect();
    let right: Vec<i64> = (0..=n).map(|y| right_tab.backward(Point::new(v.x + 1, y))).collect();

    // Index k in these vectors is shifted height i = k - v2.
    let delta: Vec<i64> = (1..=n as usize).map(|k| left[k] - left[k - 1]).collect();
    let delta_prime: Vec<i64> = (1..=n as usize).map(|k| right[k - 1] - right[k]).collect();

    let zero = v.y as usize;
    let mut d = vec![0i64; n as usize + 1];
    let mut acc = 0i64;
    for k in zero + 1..=n as usize {
        acc += -delta[k - 1] + delta_prime[k - 1];
        d[k] = acc;
    }
    acc = 0;
    for k in (0..zero).rev() {
        acc += delta[k] - delta_prime[k];
        d[k] = acc;
    }
    Ok(IncrementProfile { v, n, left, right, delta, delta_prime, d })
}
