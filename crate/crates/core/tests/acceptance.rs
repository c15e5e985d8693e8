//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. All randomness is drawn from seed 1.

mod common;

use std::time::{Duration, Instant};

use common::*;
use lpp_noise::cli::{run_config, Config};
use lpp_noise::cube::{bks_sweep, geometric_lsi_ratio, geometric_lsi_terms, lemma_sweep};
use lpp_noise::estimators::{corr_decay, covariance_monotonicity_sweep, exact_nonneg_probability, rw_nonneg_bound, transversal_exponent, variance_scaling, DistSpec};
use lpp_noise::lattice::{Grid, NoiseKind, Rect};
use lpp_noise::lpp::{geodesic_report, increment_profile, travel_time};
use lpp_noise::rng::{replica_seed, Draws, StreamTag};
use lpp_noise::stationary::{build_stationary, couple_columns, lambda_params, DEFAULT_BURN_IN};
use lpp_noise::stats::chi_square_geometric;
use lpp_noise::Point;

const SEED: u64 = 1;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict { passed, detail: detail.into() }
}

fn within(elapsed: Duration, limit: Duration) -> String {
    format!("{:.1} s of {} s", elapsed.as_secs_f64(), limit.as_secs())
}

fn exact_dp() -> Verdict {
    let start = Instant::now();
    let mut bad = 0;
    for k in 0..100u64 {
        let (w, h) = (1 + (k % 6) as i64, 1 + (k / 6 % 6) as i64);
        let rect = Rect::new(Point::ORIGIN, Point::new(w - 1, h - 1)).unwrap();
        let p = [0.2, 0.5, 0.8][(k % 3) as usize];
        let grid = random_grid(p, replica_seed(SEED, k), rect);
        let (best, geo) = geodesics(&grid, rect.lo, rect.hi);
        let rep = geodesic_report(&grid, rect.lo, rect.hi).unwrap();
        let union = Grid::from_fn(rect, |x| geo.iter().any(|g| g.contains(&x)));
        let ok = travel_time(&grid, rect.lo, rect.hi).unwrap() == best
            && rep.value == best
            && rep.member_mask == union
            && &rep.upmost == geo.first().unwrap()
            && &rep.downmost == geo.last().unwrap();
        bad += usize::from(!ok);
    }
    let t = start.elapsed();
    verdict(bad == 0 && t < Duration::from_secs(10), format!("{bad} of 100 fields disagree; {}", within(t, Duration::from_secs(10))))
}

const PS: [f64; 3] = [0.3, 0.5, 0.7];
const LAMBDAS: [f64; 3] = [0.25, 0.5, 0.75];

fn stationary_identities() -> Verdict {
    let start = Instant::now();
    let n = 200;
    let (mut dom, mut add, mut triples) = (0, 0, 0);
    for (a, &p) in PS.iter().enumerate() {
        for (b, &lambda) in LAMBDAS.iter().enumerate() {
            let seed = replica_seed(SEED, (3 * a + b) as u64);
            let sf = build_stationary(p, lambda, Rect::square(n), seed).unwrap();
            dom += sf.domination_violations();
            let corner = (Point::ORIGIN, Point::new(n, n));
            for y in (0..=n).step_by(10).flat_map(|x| (0..=n).step_by(10).map(move |y| Point::new(x, y))) {
                add += usize::from(!sf.additivity_holds(corner.0, y, corner.1).unwrap());
                triples += 1;
            }
            let mut d = Draws::new(seed, StreamTag::Generic);
            let mut pick = |lo: i64| lo + d.below((n - lo + 1) as u64) as i64;
            for _ in 0..100 {
                let x = Point::new(pick(0), pick(0));
                let y = Point::new(pick(x.x), pick(x.y));
                let z = Point::new(pick(y.x), pick(y.y));
                add += usize::from(!sf.additivity_holds(x, y, z).unwrap());
                triples += 1;
            }
        }
    }
    let t = start.elapsed();
    verdict(
        dom == 0 && add == 0 && t < Duration::from_secs(30),
        format!("{dom} domination and {add} additivity violations over 9 fields, {triples} triples; {}", within(t, Duration::from_secs(30))),
    )
}

fn burke_marginals() -> Verdict {
    let samples = 100_000;
    let n = 200i64;
    let mut failed = Vec::new();
    for (a, &p) in PS.iter().enumerate() {
        for (b, &lambda) in LAMBDAS.iter().enumerate() {
            let lp = lambda_params(p, lambda).unwrap();
            let (mut hs, mut vs) = (Vec::new(), Vec::new());
            let mut r = 0;
            while hs.len() < samples {
                let seed = replica_seed(replica_seed(SEED, (3 * a + b) as u64), r);
                let sf = build_stationary(p, lambda, Rect::square(n), seed).unwrap();
                hs.extend((1..=n).map(|x| sf.omega_h(Point::new(x, n)).unwrap() as u64));
                vs.extend((1..=n).map(|y| sf.omega_v(Point::new(n, y)).unwrap() as u64));
                r += 1;
            }
            hs.truncate(samples);
            vs.truncate(samples);
            if !chi_square_geometric(&hs, lp.p_h, 1e-3).unwrap().passed {
                failed.push(format!("H({p},{lambda})"));
            }
            if !chi_square_geometric(&vs, lp.p_v, 1e-3).unwrap().passed {
                failed.push(format!("V({p},{lambda})"));
            }
        }
        for (k, w) in LAMBDAS.windows(2).enumerate() {
            let cc = couple_columns(p, w[0], w[1], samples, DEFAULT_BURN_IN, replica_seed(SEED, 100 + (2 * a + k) as u64)).unwrap();
            if !cc.monotone() {
                failed.push(format!("coupling({p},{},{})", w[0], w[1]));
            }
        }
    }
    verdict(failed.is_empty(), format!("18 chi-square tests and 6 couplings; failed: {failed:?}"))
}

fn lemma_suite() -> Verdict {
    let start = Instant::now();
    let grid: Vec<(f64, f64)> = PS.iter().flat_map(|&p| [0.1, 1.0, 3.0].map(|t| (p, t))).collect();
    let rows = lemma_sweep(8, 200, &grid, SEED).unwrap();
    let failures: usize = rows.iter().map(|r| r.report.failures().count()).sum();
    let t = start.elapsed();
    verdict(
        failures == 0 && t < Duration::from_secs(60),
        format!("{failures} failed checks over {} suites; {}", rows.len(), within(t, Duration::from_secs(60))),
    )
}

fn bks() -> Verdict {
    let start = Instant::now();
    let trials = bks_sweep(10_000, 10, SEED).unwrap();
    let proof = trials.iter().filter(|t| !t.record.proof_holds).count();
    let stated = trials.iter().filter(|t| !t.record.stated_holds).count();
    let t = start.elapsed();
    verdict(
        proof == 0 && t < Duration::from_secs(300),
        format!("proof form violated in {proof}, stated form violated in {stated} of 10000 trials; {}", within(t, Duration::from_secs(300))),
    )
}

fn lsi() -> Verdict {
    let u = 1e-3;
    let ratio = geometric_lsi_ratio(0.5, u).unwrap() / geometric_lsi_ratio(0.5, 10.0 * u).unwrap();
    let mut worst = 0.0f64;
    for (p, u) in [(0.5, 1e-3), (0.5, 1e-2), (0.5, 0.1), (0.3, 0.2), (0.7, 0.05)] {
        let closed = geometric_lsi_terms(p, u).unwrap();
        let (ent, var) = lsi_series(p, u);
        worst = worst.max(((closed.entropy - ent) / ent).abs()).max(((closed.variance - var) / var).abs());
    }
    verdict(ratio >= 8.0 && worst <= 1e-6, format!("R(u)/R(10u) = {ratio:.3}; worst series error {worst:.1e}"))
}

fn corr_trend() -> Verdict {
    let start = Instant::now();
    let r = corr_decay(0.5, 200, &[0.0, 0.25, 1.0, 4.0], NoiseKind::Bit, 2000, SEED).unwrap();
    let t = start.elapsed();
    let exact = r.points[0].estimate.is_some_and(|e| e.estimate == 1.0);
    let shown: Vec<String> = r.points[1..]
        .iter()
        .map(|p| match p.estimate {
            Some(e) => format!("t={}: {:.3} [{:.3}, {:.3}]", p.t, e.estimate, e.ci_low, e.ci_high),
            None => format!("t={}: degenerate", p.t),
        })
        .collect();
    let separated = r.points[1..].windows(2).all(|w| match (&w[0].estimate, &w[1].estimate) {
        (Some(a), Some(b)) => a.separated_above(b),
        _ => false,
    });
    verdict(
        exact && separated && t < Duration::from_secs(600),
        format!("t=0 exact: {exact}; {}; {}", shown.join(", "), within(t, Duration::from_secs(600))),
    )
}

fn kpz() -> Verdict {
    let start = Instant::now();
    let ns = [64, 128, 256, 512];
    let var = variance_scaling(0.5, &ns, 2000, SEED).unwrap();
    let tr = transversal_exponent(0.5, &ns, 1000, replica_seed(SEED, 1)).unwrap();
    let t = start.elapsed();
    let v = &var.exponent.fit;
    let h = &tr.fit;
    let ok = v.ci_contains(2.0 / 3.0) && v.ci_half_width() <= 0.15 && h.ci_contains(2.0 / 3.0) && h.ci_half_width() <= 0.15;
    verdict(
        ok && t < Duration::from_secs(1200),
        format!(
            "variance slope {:.3} ({:.3}, {:.3}); transversal slope {:.3} ({:.3}, {:.3}); {}",
            v.slope,
            v.slope_ci.0,
            v.slope_ci.1,
            h.slope,
            h.slope_ci.0,
            h.slope_ci.1,
            within(t, Duration::from_secs(1200))
        ),
    )
}

fn split_decomposition() -> Verdict {
    let n = 7;
    let mut d = Draws::new(SEED, StreamTag::Generic);
    let mut bad = 0;
    let mut optimal = 0;
    let mut vertex_only = 0;
    for k in 0..500u64 {
        let grid = random_grid(0.5, replica_seed(SEED, k), Rect::square(n));
        let v = Point::new(d.below(n as u64) as i64, d.below(n as u64 + 1) as i64);
        let prof = increment_profile(&grid, v, n).unwrap();
        let oracle = some_geodesic_uses_edge(&grid, n, v);
        bad += usize::from(prof.origin_split_is_optimal() != oracle);
        optimal += usize::from(oracle);
        let mask = geodesic_report(&grid, Point::ORIGIN, Point::new(n, n)).unwrap().member_mask;
        vertex_only += usize::from(!oracle && *mask.get(v) && *mask.get(Point::new(v.x + 1, v.y)));
    }
    verdict(
        bad == 0,
        format!("{bad} mismatches on 500 instances ({optimal} with the split optimal, {vertex_only} with both sites on distinct geodesics only)"),
    )
}

fn random_walk() -> Verdict {
    let sym = DistSpec::plus_minus(0.5).unwrap();
    let q2 = exact_nonneg_probability(&sym, 2).unwrap();
    let q4 = exact_nonneg_probability(&sym, 4).unwrap();
    let exact = q2 == 0.5 && q4 == 0.375 && symmetric_walk_nonneg(2) == 0.5 && symmetric_walk_nonneg(4) == 0.375;
    let dists = [
        sym,
        DistSpec::plus_minus(0.525).unwrap(),
        DistSpec::new(vec![-1, 0, 2], vec![0.5, 0.25, 0.25]).unwrap(),
    ];
    let mut bad = Vec::new();
    for (k, dist) in dists.iter().enumerate() {
        for (j, n) in [100, 1000, 10_000].into_iter().enumerate() {
            let r = rw_nonneg_bound(dist, n, 20_000, replica_seed(SEED, (3 * k + j) as u64)).unwrap();
            if !r.holds() {
                bad.push(format!("dist {k}, N = {n}: {:.4} > {:.4}", r.q_hat.estimate, r.bound));
            }
        }
    }
    verdict(exact && bad.is_empty(), format!("q2 = {q2}, q4 = {q4}; bound violations: {bad:?}"))
}

fn covariance_monotonicity() -> Verdict {
    let sweep = covariance_monotonicity_sweep(200, 3, 3, SEED).unwrap();
    let mut d = Draws::new(SEED, StreamTag::Generic);
    let mut oracle_bad = 0;
    let mut pairs = 0;
    for _ in 0..200 {
        let weights: Vec<u32> = (0..3).map(|_| 1 + d.below(5) as u32).collect();
        let f: Vec<i64> = (0..27).map(|_| d.below(21) as i64 - 10).collect();
        let cov: Vec<i128> = (0..8).map(|s| covariance_by_joint_enumeration(3, &weights, &f, s)).collect();
        for s in 0..8u32 {
            for st in (0..8u32).filter(|st| s & !st == 0) {
                pairs += 1;
                oracle_bad += usize::from(cov[s as usize] < cov[st as usize]);
            }
        }
    }
    verdict(
        sweep.violations == 0 && oracle_bad == 0,
        format!(
            "library: {} violations over {} nested pairs; oracle: {oracle_bad} over {pairs}",
            sweep.violations, sweep.pairs_checked
        ),
    )
}

fn reproducibility() -> Verdict {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/small.json")).unwrap();
    let runs: Vec<_> = [(1, "a"), (3, "b"), (1, "c")]
        .into_iter()
        .map(|(threads, tag)| {
            let dir = tempfile::tempdir().unwrap();
            let mut cfg = Config::from_json(&text).unwrap();
            cfg.seed = SEED;
            cfg.output_dir = dir.path().join(tag);
            run_config(&cfg, threads).unwrap();
            let mut files = Vec::new();
            for e in std::fs::read_dir(&cfg.output_dir).unwrap() {
                let sub = e.unwrap().path();
                if sub.is_dir() {
                    for f in std::fs::read_dir(&sub).unwrap() {
                        let f = f.unwrap().path();
                        if f.extension().is_some_and(|x| x == "csv") {
                            files.push((f.strip_prefix(&cfg.output_dir).unwrap().to_path_buf(), std::fs::read(&f).unwrap()));
                        }
                    }
                }
            }
            files.sort();
            (dir, files)
        })
        .collect();
    let same = runs.windows(2).all(|w| w[0].1 == w[1].1);
    verdict(same && !runs[0].1.is_empty(), format!("{} CSVs compared across 1, 3 and 1 threads", runs[0].1.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 12] = [
        ("exact DP and geodesics vs path enumeration", exact_dp),
        ("exact stationary identities", stationary_identities),
        ("boundary marginals and coupled columns", burke_marginals),
        ("semigroup lemma suite", lemma_suite),
        ("generalized BKS inequality", bks),
        ("log-Sobolev counterexample and series oracle", lsi),
        ("noise-sensitivity trend", corr_trend),
        ("fluctuation and transversal exponents", kpz),
        ("origin-split decomposition vs enumeration", split_decomposition),
        ("random-walk non-negativity bound", random_walk),
        ("covariance monotonicity under nested resampling", covariance_monotonicity),
        ("byte-identical reruns across thread counts", reproducibility),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        let tag = if v.passed { "PASS" } else { "FAIL" };
        println!("{tag} [{:>2}] {name}: {}", k + 1, v.detail);
        failed += usize::from(!v.passed);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
