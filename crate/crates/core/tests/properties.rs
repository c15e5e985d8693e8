mod common;

use common::*;
use lpp_noise::cube::{difference_op, semigroup_apply, CubeFunction};
use lpp_noise::lattice::{Grid, NoiseKind, NoisyPair, Rect, WeightConfig};
use lpp_noise::lpp::{geodesic_report, travel_time};
use lpp_noise::rng::{replica_seed, uniform01, Draws, RngKey, StreamTag};
use lpp_noise::stationary::{build_stationary, couple_columns, lambda_params};
use lpp_noise::Point;
use proptest::prelude::*;

fn cube_fn(m: usize, p: f64, seed: u64) -> CubeFunction {
    CubeFunction::random_gaussian(m, p, &mut Draws::new(seed, StreamTag::Generic)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampler_is_pure(seed in any::<u64>(), x in -1000i64..1000, y in -1000i64..1000, i in 0u64..64) {
        let k = RngKey::at_site(seed, Point::new(x, y), i, StreamTag::BitX);
        prop_assert_eq!(uniform01(&k), uniform01(&k));
        prop_assert_eq!(replica_seed(seed, i), replica_seed(seed, i));
    }

    #[test]
    fn single_site_bump_is_monotone_and_lipschitz(seed in any::<u64>(), w in 1i64..8, h in 1i64..8, d in 0i64..6, pick in any::<u64>()) {
        let rect = Rect::new(Point::ORIGIN, Point::new(w - 1, h - 1)).unwrap();
        let grid = random_grid(0.5, seed, rect);
        let x = Point::new((pick % w as u64) as i64, (pick / 7 % h as u64) as i64);
        let mut bumped = grid.clone();
        bumped.set(x, grid.at(x) + d);
        let t0 = travel_time(&grid, rect.lo, rect.hi).unwrap();
        let t1 = travel_time(&bumped, rect.lo, rect.hi).unwrap();
        prop_assert!(t0 <= t1 && t1 <= t0 + d);
    }

    #[test]
    fn transpose_symmetry(seed in any::<u64>(), w in 1i64..10, h in 1i64..10) {
        let rect = Rect::new(Point::ORIGIN, Point::new(w - 1, h - 1)).unwrap();
        let grid = random_grid(0.3, seed, rect);
        let t = grid.transposed();
        let tr = t.rect();
        prop_assert_eq!(travel_time(&grid, rect.lo, rect.hi).unwrap(), travel_time(&t, tr.lo, tr.hi).unwrap());
    }

    #[test]
    fn members_are_exactly_the_tight_sites(seed in any::<u64>(), n in 1i64..12) {
        let rect = Rect::square(n);
        let grid = random_grid(0.5, seed, rect);
        let rep = geodesic_report(&grid, rect.lo, rect.hi).unwrap();
        for x in rect.points() {
            let through = travel_time(&grid, rect.lo, x).unwrap() + travel_time(&grid, x, rect.hi).unwrap() - grid.at(x);
            prop_assert_eq!(*rep.member_mask.get(x), through == rep.value);
        }
        prop_assert!(rep.upmost.iter().chain(&rep.downmost).all(|&x| *rep.member_mask.get(x)));
    }

    #[test]
    fn zero_clock_changes_nothing(seed in any::<u64>(), x in 0i64..20, y in 0i64..20) {
        let cfg = WeightConfig::new(0.4, seed, Rect::square(20)).unwrap();
        for kind in [NoiseKind::Bit, NoiseKind::Site, NoiseKind::Coupled { cap: 9 }] {
            let pair = NoisyPair::new(cfg, 0.0, kind).unwrap();
            prop_assert_eq!(pair.noisy_weight_at(Point::new(x, y)).unwrap(), cfg.weight_at(Point::new(x, y)).unwrap());
        }
    }

    #[test]
    fn coupled_noise_dominates_low_bits(seed in any::<u64>(), x in 0i64..50, y in 0i64..50, t in 0.0f64..2.0, cap in 1u32..30) {
        let cfg = WeightConfig::new(0.5, seed, Rect::square(50)).unwrap();
        let v = Point::new(x, y);
        let bit = NoisyPair::new(cfg, t, NoiseKind::Bit).unwrap();
        let site = NoisyPair::new(cfg, cap as f64 * t, NoiseKind::Coupled { cap }).unwrap();
        for i in 0..cap as u64 {
            prop_assert!(!bit.bit_resampled(v, i) || site.coupled_site_resampled(v, cap));
        }
    }

    #[test]
    fn stationary_identities(seed in any::<u64>(), p in 0.1f64..0.9, lambda in 0.05f64..0.95, n in 2i64..25) {
        let sf = build_stationary(p, lambda, Rect::square(n), seed).unwrap();
        prop_assert_eq!(sf.domination_violations(), 0);
        let x = Point::new(0, 0);
        let z = Point::new(n, n);
        let y = Point::new((seed % (n as u64 + 1)) as i64, (seed / 3 % (n as u64 + 1)) as i64);
        prop_assert!(sf.additivity_holds(x, y, z).unwrap());
        for v in sf.extent().points().filter(|v| v.x > 0 && v.y > 0) {
            prop_assert!(sf.omega_h(v).unwrap() >= 0 && sf.omega_v(v).unwrap() >= 0);
            prop_assert_eq!(sf.g(v) - sf.g(Point::new(v.x - 1, v.y)), sf.omega_h(v).unwrap());
        }
    }

    #[test]
    fn coupled_columns_are_ordered(seed in any::<u64>(), p in 0.2f64..0.8, a in 0.1f64..0.5, b in 0.5f64..0.9) {
        let cc = couple_columns(p, a, b, 2000, 200, seed).unwrap();
        prop_assert!(cc.monotone());
        prop_assert!(lambda_params(p, a).unwrap().p_v >= lambda_params(p, b).unwrap().p_v);
    }

    #[test]
    fn semigroup_law_and_symmetry(seed in any::<u64>(), m in 1usize..7, p in 0.05f64..0.95, s in 0.0f64..2.0, t in 0.0f64..2.0) {
        let f = cube_fn(m, p, seed);
        let g = cube_fn(m, p, seed ^ 1);
        let a = semigroup_apply(&semigroup_apply(&f, s).unwrap(), t).unwrap();
        let b = semigroup_apply(&f, s + t).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-10);
        let lhs = semigroup_apply(&f, t).unwrap().inner(&g).unwrap();
        let rhs = f.inner(&semigroup_apply(&g, t).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
        prop_assert!(semigroup_apply(&f, t).unwrap().variance() <= f.variance() + 1e-12);
    }

    #[test]
    fn semigroup_commutes_with_differences(seed in any::<u64>(), m in 1usize..7, p in 0.05f64..0.95, t in 0.0f64..3.0) {
        let f = cube_fn(m, p, seed);
        let i = (seed % m as u64) as usize;
        let a = difference_op(&semigroup_apply(&f, t).unwrap(), i).unwrap();
        let b = semigroup_apply(&difference_op(&f, i).unwrap(), t).unwrap();
        prop_assert!(a.max_abs_diff(&b) < 1e-10);
    }
}

#[test]
fn variance_dies_out() {
    for m in [1, 5, 10] {
        let f = cube_fn(m, 0.3, m as u64);
        assert!(semigroup_apply(&f, 50.0).unwrap().variance() <= 1e-15 * f.variance());
    }
}

#[test]
fn grid_points_are_row_major() {
    let g = Grid::from_fn(Rect::square(2), |x| x.x + 10 * x.y);
    assert_eq!(g.values(), &[0, 1, 2, 10, 11, 12, 20, 21, 22]);
}
