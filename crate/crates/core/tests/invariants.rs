//! Statistical and analytic invariants that span several modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use brownian_lt::exec::Execution;
use brownian_lt::experiments::ks::ks_test;
use brownian_lt::functionals::{hermite_coeffs, make_monomial, parse_function_spec, TestFunction};
use brownian_lt::gaussian_theory::{
    c_const, cond_variance, ibp_residual, rho, v_squared, w_coeff, TheoryEngine, VMethod,
};
use brownian_lt::local_time::{
    default_kernel_eps, estimate_kernel, estimate_pl, occupation, support, SpatialGrid,
};
use brownian_lt::numeric::median;
use brownian_lt::path_engine::{path_range, simulate_batch, simulate_path, SeedId};
use brownian_lt::statistics::v_stat;

const CATALOG: [&str; 7] = ["mono:2", "mono:3", "mono:4", "poly:0,1,1", "poly:-2,0.5", "sin", "sinpoly:1,1"];

fn catalog() -> Vec<TestFunction> {
    CATALOG.iter().map(|s| parse_function_spec(s).unwrap()).collect()
}

#[test]
fn scaled_increments_are_standard_normal() {
    let n = 1 << 16;
    let path = simulate_path(n, SeedId::new(2024, 0)).unwrap();
    let scale = (n as f64).sqrt();
    let z: Vec<f64> = path.values().windows(2).map(|w| (w[1] - w[0]) * scale).collect();
    let ks = ks_test(&z).unwrap();
    assert!(ks.p_value >= 0.001, "KS p = {}", ks.p_value);
}

#[test]
fn path_variance_grows_linearly() {
    let n = 256;
    let paths = simulate_batch(n, 10_000, 77, Execution::default()).unwrap();
    for t in [0.25, 0.5, 1.0] {
        let k = (t * n as f64) as usize;
        let var = paths.iter().map(|p| p.at_step(k).powi(2)).sum::<f64>() / paths.len() as f64;
        assert!((var / t - 1.0).abs() <= 0.05, "Var W_{t} = {var}");
    }
}

#[test]
fn derivatives_match_finite_differences() {
    let step = 1e-5;
    for f in catalog() {
        for i in 0..100 {
            let x = -5.0 + 10.0 * i as f64 / 99.0;
            for order in 1..=3u8 {
                let lower = |y: f64| if order == 1 { f.eval(y) } else { f.derivative(order - 1, y).unwrap() };
                let fd = (lower(x + step) - lower(x - step)) / (2.0 * step);
                let exact = f.derivative(order, x).unwrap();
                let err = (fd - exact).abs();
                assert!(err <= 1e-6 * exact.abs().max(1.0), "{} d{order} at {x}: {fd} vs {exact}", f.name());
            }
        }
    }
}

#[test]
fn hermite_coefficients_satisfy_bessel() {
    for f in catalog() {
        for u in [0.5, 1.0, 2.0] {
            let b = hermite_coeffs(&f, u, 30).unwrap();
            let second_moment = TheoryEngine::shared().gaussian_expectation(|x| f.eval(x).powi(2), u);
            let mut fact = 1.0;
            let mut partial = 0.0;
            for k in 1..=30 {
                fact *= k as f64;
                partial += b.get(k).powi(2) / fact;
            }
            assert!(partial <= second_moment * (1.0 + 1e-10), "{} u={u}: {partial} > {second_moment}", f.name());
        }
    }
}

#[test]
fn monomial_v_squared_is_homogeneous() {
    for q in 2..=5 {
        let f = make_monomial(q).unwrap();
        for x in [0.3, 1.0, 1.7] {
            let base = v_squared(&f, x, VMethod::Series).unwrap().value;
            for lambda in [0.5, 2.0] {
                let scaled = v_squared(&f, lambda * x, VMethod::Series).unwrap().value;
                let expected = lambda.powi(2 * q as i32) * base;
                assert!((scaled - expected).abs() <= 1e-10 * expected.abs(), "q={q} x={x} λ={lambda}");
            }
        }
    }
}

#[test]
fn series_and_direct_routes_agree() {
    for f in catalog() {
        for x in [0.25, 0.8, 1.5, 2.5] {
            let s = v_squared(&f, x, VMethod::Series).unwrap();
            let d = v_squared(&f, x, VMethod::Direct).unwrap();
            assert!(s.accurate);
            assert!(
                (s.value - d.value).abs() <= 1e-6 * (1.0 + s.value.abs()),
                "{} x={x}: series {} direct {}",
                f.name(),
                s.value,
                d.value
            );
        }
    }
}

#[test]
fn monomial_conditional_variance_at_unit_local_time() {
    // sigma = 2 sqrt(L) with L = 1.
    for q in [2, 3] {
        let f = make_monomial(q).unwrap();
        let c = c_const(q).unwrap();
        let cv = cond_variance(&f, 2.0).unwrap();
        assert!((cv - c * c).abs() <= 1e-10 * c * c, "q={q}: {cv} vs {}", c * c);
    }
}

#[test]
fn conditional_variance_is_nonnegative() {
    for f in catalog() {
        for i in 1..=40 {
            let sigma = 0.1 * i as f64;
            let v2 = v_squared(&f, sigma, VMethod::Series).unwrap().value;
            let w = w_coeff(&f, sigma).unwrap();
            let cv = cond_variance(&f, sigma).unwrap();
            assert!(cv >= -1e-10 * v2.max(1.0), "{} sigma={sigma}: v2 - w2 = {cv}", f.name());
            assert!(v2 >= 0.0 && w.is_finite());
        }
    }
}

#[test]
fn gaussian_integration_by_parts() {
    for f in catalog() {
        for u in [0.3, 1.0, 2.0] {
            let scale = 1.0 + rho(&f, u).abs() + TheoryEngine::shared().gaussian_expectation(|x| f.eval(x).abs(), u);
            let r = ibp_residual(&f, u).unwrap();
            assert!(r <= 1e-9 * scale, "{} u={u}: residual {r}", f.name());
        }
    }
}

fn estimator_gaps(n: usize, paths: usize) -> (f64, f64) {
    let dx = 1.0 / 1024.0;
    let h = 1.0 / 16.0;
    let f = make_monomial(2).unwrap();
    let mut sup = Vec::with_capacity(paths);
    let mut stat = Vec::with_capacity(paths);
    for path in simulate_batch(n, paths, 31, Execution::default()).unwrap() {
        let (lo, hi) = path_range(&path);
        let grid = SpatialGrid::covering(lo, hi, dx, 2.0 * h).unwrap();
        let pl = estimate_pl(&path, &grid).unwrap();
        let kernel = estimate_kernel(&path, &grid, default_kernel_eps(n, dx)).unwrap();
        sup.push(pl.values().iter().zip(kernel.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        stat.push((v_stat(&pl, &f, h).unwrap() - v_stat(&kernel, &f, h).unwrap()).abs());
    }
    (median(&sup), median(&stat))
}

#[test]
fn estimators_converge_to_each_other() {
    let gaps: Vec<(f64, f64)> = [1 << 16, 1 << 18, 1 << 20].iter().map(|&n| estimator_gaps(n, 50)).collect();
    for pair in gaps.windows(2) {
        assert!(pair[1].0 < pair[0].0, "sup-norm gap not decreasing: {gaps:?}");
        assert!(pair[1].1 < pair[0].1, "statistic gap not decreasing: {gaps:?}");
    }
}

#[test]
fn ks_rejection_rate_is_calibrated() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let trials = 1000;
    let rejected = (0..trials)
        .filter(|_| {
            let sample: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
            ks_test(&sample).unwrap().p_value < 0.05
        })
        .count();
    let rate = rejected as f64 / trials as f64;
    assert!((rate - 0.05).abs() <= 0.02, "rejection rate {rate}");
}

#[test]
fn fields_are_nonnegative_and_supported_on_the_range() {
    let n = 1 << 14;
    let dx = 1.0 / 512.0;
    for path in simulate_batch(n, 20, 9, Execution::Sequential).unwrap() {
        let (lo, hi) = path_range(&path);
        let grid = SpatialGrid::covering(lo, hi, dx, 0.25).unwrap();
        let eps = default_kernel_eps(n, dx);
        // The kernel counts cell centres inside the window, so its mass is
        // exact only up to one cell per window.
        for (field, slack, mass_tol) in [
            (estimate_pl(&path, &grid).unwrap(), dx, 1e-9),
            (estimate_kernel(&path, &grid, eps).unwrap(), dx + eps, 0.5 * dx / eps),
        ] {
            assert!(field.values().iter().all(|v| *v >= 0.0));
            assert!((occupation(&field) - 1.0).abs() <= mass_tol, "{}", occupation(&field));
            let s = support(&field, 0.0);
            assert!(s.lower >= lo - slack && s.upper <= hi + slack, "{s:?} vs [{lo}, {hi}]");
        }
    }
}
