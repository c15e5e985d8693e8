//! Counter-based keyed randomness.
//!
//! Every random quantity in the crate is a pure function of a master seed and
//! a structured key. There is no generator state: a key is hashed through a
//! chain of 64-bit mixing rounds and the result is mapped to the unit
//! interval. Sibling keys (different site, index or stream) therefore give
//! independent-looking outputs regardless of evaluation order or threading.

use crate::lattice::Point;

/// Which family of random variables a draw belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamTag {
    /// Encoding bits `X_{v,i}` of the base field.
    BitX,
    /// Replacement bits `X'_{v,i}`.
    BitXPrime,
    /// Per-bit noise clocks `U_{v,i}`.
    ClockU,
    /// Per-site noise clocks for site resampling.
    SiteClock,
    /// Boundary weights of the stationary model.
    BoundaryV,
    /// Arrival process of the coupled queue.
    BoundaryArrival,
    /// Per-replica seed derivation.
    Replica,
    Generic,
}

impl StreamTag {
    const fn code(self) -> u64 {
        match self {
            StreamTag::BitX => 0x6a09_e667_f3bc_c908,
            StreamTag::BitXPrime => 0xbb67_ae85_84ca_a73b,
            StreamTag::ClockU => 0x3c6e_f372_fe94_f82b,
            StreamTag::SiteClock => 0xa54f_f53a_5f1d_36f1,
            StreamTag::BoundaryV => 0x510e_527f_ade6_82d1,
            StreamTag::BoundaryArrival => 0x9b05_688c_2b3e_6c1f,
            StreamTag::Replica => 0x1f83_d9ab_fb41_bd6b,
            StreamTag::Generic => 0x5be0_cd19_137e_2179,
        }
    }
}

/// Structured key addressing a single draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngKey {
    pub master_seed: u64,
    pub site: Option<Point>,
    pub index: u64,
    pub stream_tag: StreamTag,
}

impl RngKey {
    pub fn new(master_seed: u64, site: Option<Point>, index: u64, stream_tag: StreamTag) -> Self {
        RngKey { master_seed, site, index, stream_tag }
    }

    pub fn at_site(master_seed: u64, site: Point, index: u64, stream_tag: StreamTag) -> Self {
        Self::new(master_seed, Some(site), index, stream_tag)
    }

    pub fn global(master_seed: u64, index: u64, stream_tag: StreamTag) -> Self {
        Self::new(master_seed, None, index, stream_tag)
    }

    /// Raw 64-bit hash of the key.
    pub fn hash(&self) -> u64 {
        let stream = Stream::new(self.master_seed, self.stream_tag);
        match self.site {
            Some(v) => stream.site_hash(v, self.index),
            None => stream.global_hash(self.index),
        }
    }
}

const SEED_SALT: u64 = 0x243f_6a88_85a3_08d3;
const SITE_MARK: u64 = 0x1319_8a2e_0370_7344;
const NO_SITE_MARK: u64 = 0xa409_3822_299f_31d0;

/// Stafford "mix13" finalizer over a golden-ratio increment.
#[inline(always)]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline(always)]
fn to_unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A (seed, stream) pair with the prefix of the hash chain precomputed.
///
/// Hot loops use this instead of building [`RngKey`] values; the outputs are
/// identical to the corresponding key-based calls.
#[derive(Debug, Clone, Copy)]
pub struct Stream {
    prefix: u64,
}

impl Stream {
    pub fn new(master_seed: u64, tag: StreamTag) -> Self {
        let h = mix64(master_seed ^ SEED_SALT);
        Stream { prefix: mix64(h ^ tag.code()) }
    }

    #[inline(always)]
    pub fn site_hash(&self, v: Point, index: u64) -> u64 {
        mix64(self.site_prefix(v) ^ index)
    }

    /// The part of [`Stream::site_hash`] that depends on the site only.
    #[inline(always)]
    pub fn site_prefix(&self, v: Point) -> u64 {
        let mut h = mix64(self.prefix ^ SITE_MARK);
        h = mix64(h ^ v.x as u64);
        mix64(h ^ v.y as u64)
    }

    /// Uniform draw from a precomputed site prefix.
    #[inline(always)]
    pub fn uniform_from_prefix(prefix: u64, index: u64) -> f64 {
        to_unit(mix64(prefix ^ index))
    }

    #[inline(always)]
    pub fn global_hash(&self, index: u64) -> u64 {
        let h = mix64(self.prefix ^ NO_SITE_MARK);
        mix64(h ^ index)
    }

    #[inline(always)]
    pub fn uniform(&self, v: Point, index: u64) -> f64 {
        to_unit(self.site_hash(v, index))
    }

    #[inline(always)]
    pub fn uniform_global(&self, index: u64) -> f64 {
        to_unit(self.global_hash(index))
    }

    #[inline(always)]
    pub fn exponential(&self, v: Point, index: u64) -> f64 {
        -(-self.uniform(v, index)).ln_1p()
    }

    /// Geometric(p) on {0, 1, ...} by inversion.
    #[inline]
    pub fn geometric(&self, v: Point, index: u64, p: f64) -> u64 {
        geometric_from_uniform(self.uniform(v, index), p)
    }

    #[inline]
    pub fn geometric_global(&self, index: u64, p: f64) -> u64 {
        geometric_from_uniform(self.uniform_global(index), p)
    }
}

/// Sequential reader over one keyed stream: the n-th call consumes global
/// index `start + n`. Convenient where draws are naturally ordered, e.g. the
/// steps of one random walk or the values of one random test function.
#[derive(Debug, Clone)]
pub struct Draws {
    stream: Stream,
    next: u64,
}

impl Draws {
    pub fn new(master_seed: u64, tag: StreamTag) -> Self {
        Draws { stream: Stream::new(master_seed, tag), next: 0 }
    }

    pub fn uniform(&mut self) -> f64 {
        let u = self.stream.uniform_global(self.next);
        self.next += 1;
        u
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.uniform() * n as f64) as u64).min(n - 1)
    }

    /// Standard normal by Box–Muller (one output per two uniforms).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Inverse-CDF map from a uniform draw to Geometric(p) with P(k) = p(1-p)^k.
#[inline]
pub fn geometric_from_uniform(u: f64, p: f64) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    // P(G >= k) = (1-p)^k, so G = floor(ln(1-u) / ln(1-p)).
    let g = ((-u).ln_1p() / (-p).ln_1p()).floor();
    if g.is_finite() && g >= 0.0 {
        g as u64
    } else {
        0
    }
}

/// Uniform draw in [0, 1) with 53-bit resolution.
pub fn uniform01(key: &RngKey) -> f64 {
    to_unit(key.hash())
}

/// Returns true (bit 1) iff `uniform01(key) < p`.
pub fn bernoulli(key: &RngKey, p: f64) -> crate::Result<bool> {
    if !(p > 0.0 && p < 1.0) {
        return Err(crate::Error::parameter("p", format!("Bernoulli parameter must lie in (0,1), got {p}")));
    }
    Ok(uniform01(key) < p)
}

/// Rate-one exponential, `-ln(1 - uniform01(key))`.
pub fn exponential1(key: &RngKey) -> f64 {
    -(-uniform01(key)).ln_1p()
}

/// Seed of replica `r` under a master seed.
pub fn replica_seed(master_seed: u64, r: u64) -> u64 {
    RngKey::global(master_seed, r, StreamTag::Replica).hash()
}
