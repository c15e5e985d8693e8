//! Geometric weight fields and their noise dynamics.
//!
//! A weight `ω_v` is the index of the first success in a lazily generated
//! Bernoulli(p) bit stream `X_{v,0}, X_{v,1}, ...`, so it is Geometric(p)
//! with `P(ω = k) = p (1-p)^k`. Nothing is stored: bits, replacement bits
//! and noise clocks are all re-derived from keyed hashes on demand, which
//! makes a field and all of its perturbations at every clock value exactly
//! coupled.

use serde::{Deserialize, Serialize};

use crate::error::check_prob;
use crate::rng::{Stream, StreamTag};
use crate::{Error, Result};

/// Bit scans longer than this signal a broken random source.
pub const BIT_SCAN_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub x: i64,
    pub y: i64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0, y: 0 };
    pub const E1: Point = Point { x: 1, y: 0 };
    pub const E2: Point = Point { x: 0, y: 1 };

    pub const fn new(x: i64, y: i64) -> Self {
        Point { x, y }
    }

    /// Componentwise order `self ≤ other`.
    pub fn le(self, other: Point) -> bool {
        self.x <= other.x && self.y <= other.y
    }

    pub fn l1(self) -> i64 {
        self.x.abs() + self.y.abs()
    }

    /// Point reflection `x ↦ c - x`.
    pub fn reflect(self, c: Point) -> Point {
        Point::new(c.x - self.x, c.y - self.y)
    }

    pub fn transpose(self) -> Point {
        Point::new(self.y, self.x)
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<Point> for i64 {
    type Output = Point;
    fn mul(self, p: Point) -> Point {
        Point::new(self * p.x, self * p.y)
    }
}

/// Closed lattice rectangle `R_{lo,hi} = {x : lo ≤ x ≤ hi}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: Point,
    pub hi: Point,
}

impl Rect {
    pub fn new(lo: Point, hi: Point) -> Result<Self> {
        if !lo.le(hi) {
            return Err(Error::domain(format!(
                "rectangle corners out of order: ({}, {}) is not ≤ ({}, {})",
                lo.x, lo.y, hi.x, hi.y
            )));
        }
        Ok(Rect { lo, hi })
    }

    /// The square `R_{0, n e_+}`.
    pub fn square(n: i64) -> Self {
        Rect { lo: Point::ORIGIN, hi: Point::new(n, n) }
    }

    pub fn width(&self) -> usize {
        (self.hi.x - self.lo.x + 1) as usize
    }

    pub fn height(&self) -> usize {
        (self.hi.y - self.lo.y + 1) as usize
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, v: Point) -> bool {
        self.lo.le(v) && v.le(self.hi)
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.lo) && self.contains(other.hi)
    }

    /// Sites in row-major order (y outer, x inner).
    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (self.lo.y..=self.hi.y).flat_map(move |y| (self.lo.x..=self.hi.x).map(move |x| Point::new(x, y)))
    }
}

/// Dense table over a rectangle, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    rect: Rect,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(rect: Rect, value: T) -> Self {
        Grid { rect, data: vec![value; rect.area()] }
    }
}

impl<T> Grid<T> {
    pub fn from_fn(rect: Rect, mut f: impl FnMut(Point) -> T) -> Self {
        let data = rect.points().map(&mut f).collect();
        Grid { rect, data }
    }

    /// Wrap row-major data; the length must equal the rectangle's area.
    pub fn from_vec(rect: Rect, data: Vec<T>) -> Result<Self> {
        if data.len() != rect.area() {
            return Err(Error::domain(format!("grid data has {} entries for area {}", data.len(), rect.area())));
        }
        Ok(Grid { rect, data })
    }

    pub fn try_from_fn<E>(rect: Rect, mut f: impl FnMut(Point) -> Result<T, E>) -> Result<Self, E> {
        let data = rect.points().map(&mut f).collect::<Result<Vec<_>, E>>()?;
        Ok(Grid { rect, data })
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    #[inline]
    fn offset(&self, v: Point) -> usize {
        debug_assert!(self.rect.contains(v), "({}, {}) outside grid", v.x, v.y);
        (v.y - self.rect.lo.y) as usize * self.rect.width() + (v.x - self.rect.lo.x) as usize
    }

    #[inline]
    pub fn get(&self, v: Point) -> &T {
        &self.data[self.offset(v)]
    }

    #[inline]
    pub fn get_mut(&mut self, v: Point) -> &mut T {
        let o = self.offset(v);
        &mut self.data[o]
    }

    pub fn try_get(&self, v: Point) -> Option<&T> {
        self.rect.contains(v).then(|| self.get(v))
    }

    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = (Point, &T)> {
        self.rect.points().zip(self.data.iter())
    }
}

impl<T: Copy> Grid<T> {
    #[inline]
    pub fn at(&self, v: Point) -> T {
        *self.get(v)
    }

    #[inline]
    pub fn set(&mut self, v: Point, value: T) {
        *self.get_mut(v) = value;
    }

    /// Transpose about the main diagonal.
    pub fn transposed(&self) -> Grid<T> {
        let r = Rect { lo: self.rect.lo.transpose(), hi: self.rect.hi.transpose() };
        Grid::from_fn(r, |v| self.at(v.transpose()))
    }
}

/// Anything that assigns an integer weight to lattice sites.
pub trait WeightSource {
    fn weight(&self, v: Point) -> Result<i64>;
}

impl WeightSource for Grid<i64> {
    fn weight(&self, v: Point) -> Result<i64> {
        self.try_get(v)
            .copied()
            .ok_or_else(|| Error::domain(format!("site ({}, {}) outside weight grid", v.x, v.y)))
    }
}

impl<W: WeightSource + ?Sized> WeightSource for &W {
    fn weight(&self, v: Point) -> Result<i64> {
        (**self).weight(v)
    }
}

/// Weights capped at `cap`: `(ω ∧ M)_v = min(ω_v, M)`.
#[derive(Debug, Clone, Copy)]
pub struct Capped<W> {
    pub inner: W,
    pub cap: i64,
}

impl<W: WeightSource> WeightSource for Capped<W> {
    fn weight(&self, v: Point) -> Result<i64> {
        Ok(self.inner.weight(v)?.min(self.cap))
    }
}

/// Materialize any weight source over a rectangle.
pub fn materialize(src: &impl WeightSource, rect: Rect) -> Result<Grid<i64>> {
    Grid::try_from_fn(rect, |v| src.weight(v))
}

/// Geometric(p) field encoded by Bernoulli bit streams.
#[derive(Debug, Clone, Copy)]
pub struct WeightConfig {
    p: f64,
    seed: u64,
    region: Rect,
    bits: Stream,
    bits_prime: Stream,
    clocks: Stream,
    site_clocks: Stream,
}

impl WeightConfig {
    pub fn new(p: f64, seed: u64, region: Rect) -> Result<Self> {
        check_prob("p", p)?;
        Ok(WeightConfig {
            p,
            seed,
            region,
            bits: Stream::new(seed, StreamTag::BitX),
            bits_prime: Stream::new(seed, StreamTag::BitXPrime),
            clocks: Stream::new(seed, StreamTag::ClockU),
            site_clocks: Stream::new(seed, StreamTag::SiteClock),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn region(&self) -> Rect {
        self.region
    }

    fn check_site(&self, v: Point) -> Result<()> {
        if self.region.contains(v) {
            Ok(())
        } else {
            Err(Error::domain(format!("site ({}, {}) outside field region", v.x, v.y)))
        }
    }

    /// Encoding bit `X_{v,i}`.
    #[inline]
    pub fn bit(&self, v: Point, i: u64) -> bool {
        self.bits.uniform(v, i) < self.p
    }

    /// Replacement bit `X'_{v,i}`.
    #[inline]
    pub fn bit_prime(&self, v: Point, i: u64) -> bool {
        self.bits_prime.uniform(v, i) < self.p
    }

    /// Noise clock `U_{v,i}` ~ Exp(1).
    #[inline]
    pub fn clock(&self, v: Point, i: u64) -> f64 {
        self.clocks.exponential(v, i)
    }

    /// Site clock `U_v` for site resampling.
    #[inline]
    pub fn site_clock(&self, v: Point) -> f64 {
        self.site_clocks.exponential(v, 0)
    }

    /// Bit `X^t_{v,i}` after running the bit-resampling noise for time `t`.
    #[inline]
    pub fn noisy_bit(&self, v: Point, i: u64, t: f64) -> bool {
        if t < self.clock(v, i) {
            self.bit(v, i)
        } else {
            self.bit_prime(v, i)
        }
    }

    /// `ω_v = min{i ≥ 0 : X_{v,i} = 1}`.
    pub fn weight_at(&self, v: Point) -> Result<u64> {
        self.check_site(v)?;
        let pre = self.bits.site_prefix(v);
        first_set(v, |i| Stream::uniform_from_prefix(pre, i) < self.p)
    }

    /// The weight at `v` seen at each clock in `ts` under noise `kind`,
    /// written to `out`. Equivalent to calling [`NoisyPair::noisy_weight_at`]
    /// once per clock, but the bit streams are scanned only once.
    pub fn noisy_weights(&self, v: Point, kind: NoiseKind, ts: &[f64], out: &mut [u64]) -> Result<()> {
        debug_assert_eq!(ts.len(), out.len());
        self.check_site(v)?;
        let bp = self.bits.site_prefix(v);
        let bq = self.bits_prime.site_prefix(v);
        let site_switch = |clock: f64, out: &mut [u64]| -> Result<()> {
            let (mut w, mut w2) = (None, None);
            for (o, &t) in out.iter_mut().zip(ts) {
                *o = if t == 0.0 || t < clock {
                    *w.get_or_insert(first_set(v, |i| Stream::uniform_from_prefix(bp, i) < self.p)?)
                } else {
                    *w2.get_or_insert(first_set(v, |i| Stream::uniform_from_prefix(bq, i) < self.p)?)
                };
            }
            Ok(())
        };
        match kind {
            NoiseKind::Site => site_switch(self.site_clock(v), out),
            NoiseKind::Coupled { cap } => {
                let cp = self.clocks.site_prefix(v);
                let m = (0..cap as u64)
                    .map(|i| -(-Stream::uniform_from_prefix(cp, i)).ln_1p())
                    .fold(f64::INFINITY, f64::min);
                site_switch(cap as f64 * m, out)
            }
            NoiseKind::Bit => {
                let cp = self.clocks.site_prefix(v);
                let mut open = ts.len();
                let mut done = vec![false; ts.len()];
                for i in 0..BIT_SCAN_CAP {
                    let x = Stream::uniform_from_prefix(bp, i) < self.p;
                    let mut clock = None;
                    let mut x2 = None;
                    for k in 0..ts.len() {
                        if done[k] {
                            continue;
                        }
                        let t = ts[k];
                        let b = if t == 0.0 {
                            x
                        } else {
                            let u = *clock.get_or_insert_with(|| -(-Stream::uniform_from_prefix(cp, i)).ln_1p());
                            if t < u {
                                x
                            } else {
                                *x2.get_or_insert_with(|| Stream::uniform_from_prefix(bq, i) < self.p)
                            }
                        };
                        if b {
                            out[k] = i;
                            done[k] = true;
                            open -= 1;
                        }
                    }
                    if open == 0 {
                        return Ok(());
                    }
                }
                Err(Error::RngIntegrity { x: v.x, y: v.y, cap: BIT_SCAN_CAP })
            }
        }
    }

    /// `ω'_v = min{i ≥ 0 : X'_{v,i} = 1}`, the independent replacement weight.
    pub fn replacement_weight_at(&self, v: Point) -> Result<u64> {
        self.check_site(v)?;
        first_set(v, |i| self.bit_prime(v, i))
    }

    /// Weight obtained by forcing bit `i` of site `v` to `value` (`σ^value_{v,i}`).
    pub fn weight_with_bit(&self, v: Point, i: u64, value: bool) -> Result<u64> {
        self.check_site(v)?;
        first_set(v, |j| if j == i { value } else { self.bit(v, j) })
    }
}

impl WeightSource for WeightConfig {
    #[inline]
    fn weight(&self, v: Point) -> Result<i64> {
        self.weight_at(v).map(|w| w as i64)
    }
}

#[inline]
fn first_set(v: Point, mut bit: impl FnMut(u64) -> bool) -> Result<u64> {
    for i in 0..BIT_SCAN_CAP {
        if bit(i) {
            return Ok(i);
        }
    }
    Err(Error::RngIntegrity { x: v.x, y: v.y, cap: BIT_SCAN_CAP })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Each encoding bit resampled at rate one.
    Bit,
    /// Each site weight resampled as a whole at rate one.
    Site,
    /// Site resampling driven by `Ũ_v = M · min_{i<M} U_{v,i}`, coupled to
    /// the bit noise so that every resampled low bit implies a resampled site
    /// at clock `M t`.
    Coupled { cap: u32 },
}

/// A base field together with its perturbation at noise clock `t`.
#[derive(Debug, Clone, Copy)]
pub struct NoisyPair {
    pub base: WeightConfig,
    pub t: f64,
    pub kind: NoiseKind,
}

impl NoisyPair {
    pub fn new(base: WeightConfig, t: f64, kind: NoiseKind) -> Result<Self> {
        if !(t >= 0.0) {
            return Err(Error::parameter("t", format!("noise clock must be non-negative, got {t}")));
        }
        if let NoiseKind::Coupled { cap } = kind {
            if cap == 0 {
                return Err(Error::parameter("cap", "coupled cap must be positive"));
            }
        }
        Ok(NoisyPair { base, t, kind })
    }

    /// `ω^t_v` (bit), `ω̃^t_v` (site) or the coupled site weight at clock `t`.
    pub fn noisy_weight_at(&self, v: Point) -> Result<u64> {
        if self.t == 0.0 {
            return self.base.weight_at(v);
        }
        match self.kind {
            NoiseKind::Bit => {
                self.base.check_site(v)?;
                first_set(v, |i| self.base.noisy_bit(v, i, self.t))
            }
            NoiseKind::Site => {
                if self.t < self.base.site_clock(v) {
                    self.base.weight_at(v)
                } else {
                    self.base.replacement_weight_at(v)
                }
            }
            NoiseKind::Coupled { cap } => {
                if self.t < self.coupled_site_clock(v, cap) {
                    self.base.weight_at(v)
                } else {
                    self.base.replacement_weight_at(v)
                }
            }
        }
    }

    /// `Ũ_v = M · min_{0 ≤ i < M} U_{v,i}`.
    pub fn coupled_site_clock(&self, v: Point, cap: u32) -> f64 {
        let m = (0..cap as u64).map(|i| self.base.clock(v, i)).fold(f64::INFINITY, f64::min);
        cap as f64 * m
    }

    /// Whether bit `(v, i)` has been resampled by clock `t`.
    pub fn bit_resampled(&self, v: Point, i: u64) -> bool {
        self.t >= self.base.clock(v, i)
    }

    /// Whether site `v` has been resampled by clock `t` in the coupled site noise.
    pub fn coupled_site_resampled(&self, v: Point, cap: u32) -> bool {
        self.t >= self.coupled_site_clock(v, cap)
    }
}

impl WeightSource for NoisyPair {
    #[inline]
    fn weight(&self, v: Point) -> Result<i64> {
        self.noisy_weight_at(v).map(|w| w as i64)
    }
}

/// Cap `M = ⌈5 ln n / ln(1/(1-p))⌉`, so that `n² (1-p)^M ≤ n^{-3}`.
pub fn coupled_cap(n: u64, p: f64) -> Result<u32> {
    check_prob("p", p)?;
    if n < 2 {
        return Err(Error::parameter("n", format!("coupled cap needs n ≥ 2, got {n}")));
    }
    let m = (5.0 * (n as f64).ln() / -(-p).ln_1p()).ceil();
    Ok(m.max(1.0) as u32)
}
