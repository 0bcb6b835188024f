//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use slepian_core::boundary::{approximate, ApproxMode, PiecewiseAffineBoundary};
use slepian_core::bridge::{hitting_density_double, noncross_affine, noncross_constant, BridgeSpec};
use slepian_core::engine::{bcp_montecarlo, bcp_nested, bcp_quadrature, Partition};
use slepian_core::numerics::{integrate_adaptive, GaussLegendre};
use slepian_core::oracle::{empirical_bcp_multigrid, empirical_covariance, SimConfig};
use slepian_core::process::{conditional_density, fdd_density, pair_density, GaussianVectorSpec, ProcessParams};

const TOL_A0_REDUCTION: f64 = 1e-8;
const TOL_HITTING_IDENTITY: f64 = 1e-6;
const TOL_BROWNIAN_BRIDGE: f64 = 1e-12;
const TOL_PARTITION_QUAD: f64 = 5e-4;
const SE_MULTIPLIER: f64 = 3.0;
const TOL_PATH_ORACLE: f64 = 0.01;
const TOL_PAIR_MASS: f64 = 1e-6;
const TOL_DENSITY_REL: f64 = 1e-10;
const SHRINK_FACTOR: f64 = 2.0;

const QUAD_TOL: f64 = 1e-6;
const MC_SAMPLES: usize = 1_000_000;

struct Rng(ChaCha8Rng);

impl Rng {
    fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }
}

fn unit() -> ProcessParams<f64> {
    ProcessParams::new(1.0, 2.0).unwrap()
}

struct BridgeCase {
    spec: BridgeSpec<f64>,
    b: f64,
    a: f64,
}

/// Random pinned bridge with both pins strictly below the affine boundary.
fn bridge_case(rng: &mut Rng, q: Option<f64>, affine: bool) -> BridgeCase {
    let q = q.unwrap_or_else(|| rng.uniform(0.3, 3.0));
    let d = q * rng.uniform(1.05, 2.0);
    let h = (d - q) * rng.uniform(0.02, 1.0);
    let t0 = q + (d - q - h) * rng.uniform(0.0, 1.0);
    let t1 = (t0 + h).min(d);
    let b = rng.uniform(-1.5, 2.5);
    let a = if affine { rng.uniform(-2.0, 2.0) } else { 0.0 };
    let xi = b - rng.uniform(0.02, 3.0);
    let xj = b + a * (t1 - t0) - rng.uniform(0.02, 3.0);
    let params = ProcessParams::new(q, d).unwrap();
    BridgeCase {
        spec: BridgeSpec::new(params, t0, t1, xi, xj).unwrap(),
        b,
        a,
    }
}

fn criterion_1() -> (bool, String) {
    let mut rng = Rng::new(101);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let c = bridge_case(&mut rng, None, false);
        let dev = (noncross_affine(&c.spec, c.b, 0.0).unwrap() - noncross_constant(&c.spec, c.b).unwrap()).abs();
        worst = worst.max(dev);
    }
    (worst <= TOL_A0_REDUCTION, format!("max |affine(a=0) - constant| = {worst:.3e} over 1000 inputs"))
}

/// Hitting-time mass on `(t_i, t_i1)` by composite Gauss-Legendre in
/// `θ` with `t = t_i + h sin²θ`, which tames both endpoints.
fn hitting_mass(c: &BridgeCase) -> f64 {
    let h = c.spec.h();
    let t0 = c.spec.t_start();
    let rule = GaussLegendre::<f64>::new(16).composite(0.0, std::f64::consts::FRAC_PI_2, 256);
    rule.integrate(|theta| {
        let (s, co) = theta.sin_cos();
        let t = t0 + h * s * s;
        if t <= t0 || t >= c.spec.t_end() {
            return 0.0;
        }
        hitting_density_double(&c.spec, c.b, c.a, t).unwrap() * 2.0 * h * s * co
    })
}

fn criterion_2() -> (bool, String) {
    let mut rng = Rng::new(202);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let c = bridge_case(&mut rng, None, true);
        let dev = (noncross_affine(&c.spec, c.b, c.a).unwrap() + hitting_mass(&c) - 1.0).abs();
        worst = worst.max(dev);
    }
    (worst <= TOL_HITTING_IDENTITY, format!("max |noncross + hitting mass - 1| = {worst:.3e} over 200 inputs"))
}

fn criterion_3() -> (bool, String) {
    let mut rng = Rng::new(303);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let c = bridge_case(&mut rng, Some(2.0), false);
        let (q, h) = (c.spec.params().q(), c.spec.h());
        let (x, y) = (c.spec.x_start(), c.spec.x_end());
        let reference = 1.0 - (-2.0 * (c.b - x) * (c.b - y) / (2.0 * h / q)).exp();
        worst = worst.max((noncross_constant(&c.spec, c.b).unwrap() - reference).abs());
    }
    (worst <= TOL_BROWNIAN_BRIDGE, format!("max deviation from Brownian bridge = {worst:.3e} over 100 inputs"))
}

fn criterion_4() -> (bool, String) {
    let g = PiecewiseAffineBoundary::constant(unit(), 1.0).unwrap();
    let p1 = Partition::equidistant(unit(), 1).unwrap();
    let p3 = Partition::equidistant(unit(), 3).unwrap();
    let q1 = bcp_quadrature(&g, &p1, QUAD_TOL).unwrap();
    let q3 = bcp_quadrature(&g, &p3, QUAD_TOL).unwrap();
    let quad_dev = (q1.value - q3.value).abs();
    let m2 = bcp_montecarlo(&g, &Partition::equidistant(unit(), 2).unwrap(), MC_SAMPLES, 41).unwrap();
    let m8 = bcp_montecarlo(&g, &Partition::equidistant(unit(), 8).unwrap(), MC_SAMPLES, 42).unwrap();
    let se = m2.error.hypot(m8.error);
    let mc_dev = (m2.value - m8.value).abs();
    (
        quad_dev <= TOL_PARTITION_QUAD && mc_dev <= SE_MULTIPLIER * se,
        format!(
            "quad n=1 {:.10} vs n=3 {:.10} (|d| {quad_dev:.2e}); mc n=2 {:.6} vs n=8 {:.6} (|d| {mc_dev:.2e}, 3se {:.2e})",
            q1.value,
            q3.value,
            m2.value,
            m8.value,
            SE_MULTIPLIER * se
        ),
    )
}

fn criterion_5() -> (bool, String) {
    let boundaries = [
        ("constant", PiecewiseAffineBoundary::constant(unit(), 1.0).unwrap()),
        ("affine", PiecewiseAffineBoundary::affine(unit(), 0.5, 1.0).unwrap()),
        (
            "two-piece",
            PiecewiseAffineBoundary::from_knots(unit(), &[1.0, 1.5, 2.0], &[1.0, 0.6, 1.2]).unwrap(),
        ),
    ];
    let mut ok = true;
    let mut report = Vec::new();
    for (k, (name, g)) in boundaries.iter().enumerate() {
        let part = Partition::from_boundary(g);
        let quad = bcp_quadrature(g, &part, QUAD_TOL).unwrap();
        let mc = bcp_montecarlo(g, &part, MC_SAMPLES, 500 + k as u64).unwrap();
        let dev = (quad.value - mc.value).abs();
        ok &= dev <= SE_MULTIPLIER * mc.error;
        report.push(format!("{name}: {:.6} vs {:.6} ({:.1} se)", quad.value, mc.value, dev / mc.error));
    }
    (ok, report.join("; "))
}

fn criterion_6() -> (bool, String) {
    let g = PiecewiseAffineBoundary::constant(unit(), 1.0).unwrap();
    let exact = bcp_quadrature(&g, &Partition::from_boundary(&g), 1e-9).unwrap().value;
    // One set of paths on the 5e-4 grid; every second node is the 1e-3 grid.
    let cfg = SimConfig::new(unit(), 5e-4, 100_000, 606).unwrap();
    let est = empirical_bcp_multigrid(&cfg, &g, &[2, 1]).unwrap();
    let (coarse, fine) = (est[0].value, est[1].value);
    let dev = (coarse - exact).abs();
    let improves = (fine - exact).abs() < dev;
    (
        dev <= TOL_PATH_ORACLE && improves,
        format!(
            "analytic {exact:.6}; grid 1e-3 {coarse:.5} (|d| {dev:.4}, se {:.1e}); grid 5e-4 {fine:.5} (|d| {:.4})",
            est[0].error,
            (fine - exact).abs()
        ),
    )
}

/// Multivariate normal density via a Cholesky solve with one step of
/// iterative refinement; the plain inverse loses digits on close times.
fn mvn_oracle(params: &ProcessParams<f64>, times: &[f64], x: &[f64]) -> f64 {
    let m = times.len();
    let sigma = DMatrix::from_fn(m, m, |i, j| params.covariance(times[i], times[j]).unwrap());
    let chol = sigma.clone().cholesky().unwrap();
    let xv = DVector::from_row_slice(x);
    let mut y = chol.solve(&xv);
    let residual = &xv - &sigma * &y;
    y += chol.solve(&residual);
    let quad = xv.dot(&y);
    let ln_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    (-0.5 * quad - 0.5 * (m as f64 * (2.0 * std::f64::consts::PI).ln() + ln_det)).exp()
}

fn criterion_7() -> (bool, String) {
    let mut rng = Rng::new(707);
    let u = ProcessParams::new(1.0, 1.8).unwrap();
    let rule = GaussLegendre::<f64>::new(32).composite(-8.0, 8.0, 16);
    let mut mass_dev = 0.0f64;
    for ti in [1.05, 1.3, 1.8] {
        let mass = rule.integrate(|x0| rule.integrate(|xi| pair_density(&u, 1.0, ti, x0, xi).unwrap()));
        mass_dev = mass_dev.max((mass - 1.0).abs());
    }
    let mut fdd_rel = 0.0f64;
    for m in 2..=4 {
        for _ in 0..25 {
            let q = rng.uniform(0.5, 2.0);
            let p = ProcessParams::new(q, q * rng.uniform(1.1, 2.0)).unwrap();
            let mut times: Vec<f64> = (0..m).map(|_| rng.uniform(p.q(), p.d())).collect();
            times.sort_by(f64::total_cmp);
            let x: Vec<f64> = (0..m).map(|_| rng.uniform(-2.0, 2.0)).collect();
            let got = fdd_density(&GaussianVectorSpec::new(p, times.clone()).unwrap(), &x).unwrap();
            let want = mvn_oracle(&p, &times, &x);
            fdd_rel = fdd_rel.max((got - want).abs() / want);
        }
    }
    let mut cond_rel = 0.0f64;
    for _ in 0..100 {
        let q = rng.uniform(0.5, 2.0);
        let p = ProcessParams::new(q, q * rng.uniform(1.1, 2.0)).unwrap();
        let ti1 = rng.uniform(q + 0.05 * (p.d() - q), p.d());
        let ti = rng.uniform(q + 0.02 * (ti1 - q), ti1 - 0.02 * (ti1 - q));
        let (x0, xi, xi1) = (rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
        let product = conditional_density(&p, q, ti, ti1, x0, xi, xi1).unwrap() * pair_density(&p, q, ti1, x0, xi1).unwrap();
        let joint = fdd_density(&GaussianVectorSpec::new(p, vec![q, ti, ti1]).unwrap(), &[x0, xi, xi1]).unwrap();
        cond_rel = cond_rel.max((product - joint).abs() / joint);
    }
    (
        mass_dev <= TOL_PAIR_MASS && fdd_rel <= TOL_DENSITY_REL && cond_rel <= TOL_DENSITY_REL,
        format!("pair mass |d| {mass_dev:.2e}; fdd rel {fdd_rel:.2e}; conditional x pair rel {cond_rel:.2e}"),
    )
}

fn criterion_8() -> (bool, String) {
    let cfg = SimConfig::new(unit(), 0.01, 100_000, 808).unwrap();
    let lags: Vec<f64> = (1..=20).map(|k| 0.05 * k as f64).collect();
    let samples = empirical_covariance(&cfg, &lags).unwrap();
    let worst = samples
        .iter()
        .map(|s| (s.value - (1.0 - s.lag).max(0.0)).abs() / s.std_error)
        .fold(0.0f64, f64::max);
    (worst <= SE_MULTIPLIER, format!("worst deviation {worst:.2} se over 20 lags"))
}

fn criterion_9() -> (bool, String) {
    let mut rng = Rng::new(909);
    let knots = [1.0, 1.5, 2.0];
    let mut quad_ok = 0;
    let mut mc_ok = 0;
    for k in 0..50 {
        let low: Vec<f64> = (0..3).map(|_| rng.uniform(0.0, 1.8)).collect();
        let high: Vec<f64> = low.iter().map(|v| v + rng.uniform(0.05, 0.8)).collect();
        let g1 = PiecewiseAffineBoundary::from_knots(unit(), &knots, &low).unwrap();
        let g2 = PiecewiseAffineBoundary::from_knots(unit(), &knots, &high).unwrap();
        let part = Partition::from_boundary(&g1);
        if bcp_quadrature(&g1, &part, QUAD_TOL).unwrap().value >= bcp_quadrature(&g2, &part, QUAD_TOL).unwrap().value {
            quad_ok += 1;
        }
        let seed = 9000 + k;
        if bcp_montecarlo(&g1, &part, 20_000, seed).unwrap().value >= bcp_montecarlo(&g2, &part, 20_000, seed).unwrap().value {
            mc_ok += 1;
        }
    }
    (
        quad_ok == 50 && mc_ok == 50,
        format!("ordered pairs: quadrature {quad_ok}/50, paired-seed mc {mc_ok}/50"),
    )
}

fn criterion_10() -> (bool, String) {
    let counts = [2usize, 4, 8, 16, 32];
    let probs: Vec<f64> = counts
        .iter()
        .map(|&n| {
            let g = approximate(unit(), |t: f64| t * t, n, ApproxMode::Interpolate).unwrap();
            bcp_nested(&g, &Partition::from_boundary(&g), 1e-8).unwrap().value
        })
        .collect();
    let diffs: Vec<f64> = probs.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    // Differences start at (2,4); "from 8 pieces onward" compares |P16-P8| to
    // |P8-P4| and |P32-P16| to |P16-P8|.
    let ok = diffs[2] * SHRINK_FACTOR <= diffs[1] && diffs[3] * SHRINK_FACTOR <= diffs[2];
    let shown: Vec<String> = probs.iter().map(|p| format!("{p:.9}")).collect();
    let ratios: Vec<String> = diffs.windows(2).map(|w| format!("{:.2}", w[0] / w[1])).collect();
    (ok, format!("P = [{}]; shrink ratios [{}]", shown.join(", "), ratios.join(", ")))
}

/// Independent check the adaptive integrator agrees with the fixed rule used
/// in criterion 2 on one representative case.
fn hitting_mass_cross_check() -> f64 {
    let mut rng = Rng::new(2020);
    let c = bridge_case(&mut rng, None, true);
    let (t0, h) = (c.spec.t_start(), c.spec.h());
    let adaptive = integrate_adaptive(
        |theta: f64| {
            let (s, co) = theta.sin_cos();
            let t = t0 + h * s * s;
            if t <= t0 || t >= c.spec.t_end() {
                0.0
            } else {
                hitting_density_double(&c.spec, c.b, c.a, t).unwrap() * 2.0 * h * s * co
            }
        },
        0.0,
        std::f64::consts::FRAC_PI_2,
        1e-11,
    )
    .unwrap()
    .value;
    (adaptive - hitting_mass(&c)).abs()
}

type Criterion = fn() -> (bool, String);

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("a=0 reduction", criterion_1),
        ("hitting density identity", criterion_2),
        ("Brownian bridge coincidence", criterion_3),
        ("partition invariance", criterion_4),
        ("cross-method agreement", criterion_5),
        ("path-simulation oracle", criterion_6),
        ("density suite", criterion_7),
        ("empirical covariance", criterion_8),
        ("monotonicity", criterion_9),
        ("approximation convergence", criterion_10),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != k + 1) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(r) => r,
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<28} {}  {}  [{:.1}s]",
            k + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            detail,
            start.elapsed().as_secs_f64()
        );
    }
    if only.is_none() || only == Some(2) {
        let gap = hitting_mass_cross_check();
        println!("   hitting-mass rule cross-check |fixed - adaptive| = {gap:.2e}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
