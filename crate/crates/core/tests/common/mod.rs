//! Brute-force oracles shared by the integration tests. Each one recomputes a
//! quantity from its definition, with no code shared with the library.
#![allow(dead_code)]

use lpp_noise::lattice::{Grid, Rect, WeightConfig};
use lpp_noise::Point;

/// Every up-right path from `u` to `v`, as site lists.
pub fn all_paths(u: Point, v: Point) -> Vec<Vec<Point>> {
    fn go(cur: Point, v: Point, acc: &mut Vec<Point>, out: &mut Vec<Vec<Point>>) {
        acc.push(cur);
        if cur == v {
            out.push(acc.clone());
        } else {
            if cur.y < v.y {
                go(Point::new(cur.x, cur.y + 1), v, acc, out);
            }
            if cur.x < v.x {
                go(Point::new(cur.x + 1, cur.y), v, acc, out);
            }
        }
        acc.pop();
    }
    let mut out = Vec::new();
    go(u, v, &mut Vec::new(), &mut out);
    out
}

pub fn path_weight(w: &Grid<i64>, path: &[Point]) -> i64 {
    path.iter().map(|&x| w.at(x)).sum()
}

/// Maximum weight and all maximising paths. Paths come out with up-moves
/// explored first, so the first geodesic is the upmost one and the last is
/// the downmost one.
pub fn geodesics(w: &Grid<i64>, u: Point, v: Point) -> (i64, Vec<Vec<Point>>) {
    let paths = all_paths(u, v);
    let best = paths.iter().map(|p| path_weight(w, p)).max().unwrap();
    let geo = paths.into_iter().filter(|p| path_weight(w, p) == best).collect();
    (best, geo)
}

pub fn random_grid(p: f64, seed: u64, rect: Rect) -> Grid<i64> {
    let cfg = WeightConfig::new(p, seed, rect).unwrap();
    Grid::from_fn(rect, |x| cfg.weight_at(x).unwrap() as i64)
}

/// `Ent(f²)` and `Var(f)` for `f(k) = ((1−u)/(1−p))^{k/2}` under
/// `P(k) = p(1−p)^k`, summed term by term until the terms are negligible.
pub fn lsi_series(p: f64, u: f64) -> (f64, f64) {
    let r = (1.0 - u) / (1.0 - p);
    let (mut e_f, mut e_f2, mut e_f2_log) = (0.0f64, 0.0f64, 0.0f64);
    let mut k = 0u64;
    loop {
        let log_pk = p.ln() + k as f64 * (-p).ln_1p();
        let t0 = (log_pk + 0.5 * k as f64 * r.ln()).exp();
        let t1 = (log_pk + k as f64 * r.ln()).exp();
        let t2 = t1 * (k as f64) * r.ln();
        e_f += t0;
        e_f2 += t1;
        e_f2_log += t2;
        if k > 100 && t1 < 1e-18 * e_f2 && t2.abs() < 1e-18 * e_f2_log.abs() {
            break;
        }
        k += 1;
    }
    (e_f2_log - e_f2 * e_f2.ln(), e_f2 - e_f * e_f)
}

/// `W^{2|I|} Cov(f(Y), f(Y^S))` by summing over every joint outcome of the
/// sample `Y` and the independent copy `Y'`.
pub fn covariance_by_joint_enumeration(coords: usize, weights: &[u32], f: &[i64], s: u32) -> i128 {
    let k = weights.len();
    let n = k.pow(coords as u32);
    let digit = |y: usize, i: usize| (y / k.pow(i as u32)) % k;
    let prob = |y: usize| (0..coords).map(|i| weights[digit(y, i)] as i128).product::<i128>();
    let mut joint = 0i128;
    let mut mean = 0i128;
    for y in 0..n {
        mean += prob(y) * f[y] as i128;
        for y2 in 0..n {
            let mixed: usize = (0..coords)
                .map(|i| if s >> i & 1 == 1 { digit(y2, i) } else { digit(y, i) } * k.pow(i as u32))
                .sum();
            joint += prob(y) * prob(y2) * f[y] as i128 * f[mixed] as i128;
        }
    }
    joint - mean * mean
}

/// Whether some maximal path from the origin to `n e_+` uses the edge
/// `v → v + e1`.
pub fn some_geodesic_uses_edge(w: &Grid<i64>, n: i64, v: Point) -> bool {
    let (_, geo) = geodesics(w, Point::ORIGIN, Point::new(n, n));
    let e = Point::new(v.x + 1, v.y);
    geo.iter().any(|g| g.windows(2).any(|s| s[0] == v && s[1] == e))
}

/// Exact `P(S_k ≥ 0 for all k ≤ N)` for the symmetric ±1 walk, by listing
/// all `2^N` step sequences.
pub fn symmetric_walk_nonneg(n: u32) -> f64 {
    let good = (0u32..1 << n)
        .filter(|bits| {
            let mut s = 0i32;
            (0..n).all(|k| {
                s += if bits >> k & 1 == 1 { 1 } else { -1 };
                s >= 0
            })
        })
        .count();
    good as f64 / (1u64 << n) as f64
}
