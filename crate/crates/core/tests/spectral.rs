use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use weyllab_core::discretize::{
    assemble_form, flat_profile, separate_mode, Grading, Mesh, MeshPolicy, ModeProblem,
};
use weyllab_core::eig::{eigenvalues_in, inertia_count};
use weyllab_core::models::{build_model, EdgeCondition, FiberMode, Model, ModelSpec};
use weyllab_core::weyl::{
    bracketing_check, buser_check, counting_function, hardy_rayleigh, heat_trace, mode_cutoff, strip_count,
    strip_gap, BuserBounds, HardyVariant,
};

fn ars(m: u32) -> Model {
    build_model(ModelSpec::ArsCylinder { m, fiber_length: 2.0 * PI, outer: EdgeCondition::Dirichlet, x_max: 1.0 })
        .unwrap()
}

fn interval(length: f64, left: EdgeCondition, right: EdgeCondition) -> Model {
    build_model(ModelSpec::Interval { length, left, right }).unwrap()
}

fn mode(k: u64) -> FiberMode {
    FiberMode { index: k, mu: (k * k) as f64, multiplicity: 1 }
}

fn lowest(form: &weyllab_core::discretize::TridiagonalForm) -> f64 {
    eigenvalues_in(form, 0.0, 1e6, 1e-12).unwrap()[0].value
}

/// Lowest Dirichlet eigenvalue of the ARS(m) mode-k problem on `(x_lo, 1)` from a dense
/// finite-difference solve in `s = ln x`, where the form reads
/// `∫ (e^{−(m+1)s} u_s² + k² e^{(m+1)s} u²) ds` against `∫ e^{(1−m)s} u² ds`.
fn log_coordinate_oracle(m: u32, k: f64, x_lo: f64, n: usize) -> f64 {
    let (s0, ds) = (x_lo.ln(), -x_lo.ln() / (n + 1) as f64);
    let s = |i: f64| s0 + i * ds;
    let p = (m + 1) as f64;
    let stiff = |i: usize| (-p * s(i as f64 + 1.5)).exp() / ds;
    let mut c = DMatrix::zeros(n, n);
    let mass: Vec<f64> = (0..n).map(|i| ((1.0 - m as f64) * s(i as f64 + 1.0)).exp() * ds).collect();
    for i in 0..n {
        let left = (-p * s(i as f64 + 0.5)).exp() / ds;
        let pot = k * k * (p * s(i as f64 + 1.0)).exp() * ds;
        c[(i, i)] = (left + stiff(i) + pot) / mass[i];
        if i + 1 < n {
            let v = -stiff(i) / (mass[i] * mass[i + 1]).sqrt();
            c[(i, i + 1)] = v;
            c[(i + 1, i)] = v;
        }
    }
    SymmetricEigen::new(c).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

fn ars_mode_form(model: &Model, k: u64, policy: &MeshPolicy) -> weyllab_core::discretize::TridiagonalForm {
    let prob = separate_mode(model, mode(k), policy.x_min).unwrap();
    let mesh = Mesh::for_problem(&prob, policy, true, &[]).unwrap();
    assemble_form(&prob, &mesh).unwrap()
}

#[test]
fn ars_zero_mode_matches_dense_oracle_and_bessel_zero() {
    let model = ars(1);
    let policy = MeshPolicy::for_lambda_max(100.0);
    let value = lowest(&ars_mode_form(&model, 0, &policy));
    // u = x J₁(√λ x) vanishes like x², so truncating the oracle at 10⁻³ is harmless
    let dense = log_coordinate_oracle(1, 0.0, 1e-3, 1500);
    assert!((value / dense - 1.0).abs() < 0.02, "{value} vs {dense}");
    let j11: f64 = 3.831_705_970_207_512;
    assert!((value / (j11 * j11) - 1.0).abs() < 0.005, "{value} vs {}", j11 * j11);
}

#[test]
fn ars_first_mode_matches_dense_oracle() {
    let model = ars(1);
    let policy = MeshPolicy::for_lambda_max(100.0);
    let value = lowest(&ars_mode_form(&model, 1, &policy));
    let dense = log_coordinate_oracle(1, 1.0, 1e-3, 1500);
    assert!((value / dense - 1.0).abs() < 0.005, "{value} vs {dense}");
}

#[test]
fn discrete_spectra_are_nonnegative() {
    let policy = MeshPolicy::for_lambda_max(1e3);
    for m in [1, 2] {
        let model = ars(m);
        for k in [0, 3, 40] {
            assert_eq!(inertia_count(&ars_mode_form(&model, k, &policy), -1e-9), 0);
        }
    }
}

#[test]
fn dirichlet_laplacian_converges_at_second_order() {
    let flat = flat_profile();
    let prob = ModeProblem {
        coefficients: &flat,
        x_lo: 0.0,
        x_hi: 1.0,
        left: EdgeCondition::Dirichlet,
        right: EdgeCondition::Dirichlet,
        mode: mode(0),
    };
    let errors: Vec<Vec<f64>> = [1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0]
        .iter()
        .map(|h| {
            let mesh = Mesh::new(0.0, 1.0, Grading::Uniform, *h, &[]).unwrap();
            let e = eigenvalues_in(&assemble_form(&prob, &mesh).unwrap(), 0.0, 100.0, 1e-12).unwrap();
            (1..=3).map(|j| (e[j - 1].value - (j as f64 * PI).powi(2)).abs()).collect()
        })
        .collect();
    for j in 0..3 {
        for w in errors.windows(2) {
            let order = (w[0][j] / w[1][j]).log2();
            assert!(order >= 1.9, "eigenvalue {}: order {order}", j + 1);
        }
    }
}

#[test]
fn mode_cutoff_for_order_two() {
    let model = ars(2);
    let lambda = 100.0;
    let k_max = mode_cutoff(&model, lambda).unwrap();
    // golden-section minimum of the barrier 2/x² + k²x⁴
    let barrier = |k: f64| {
        let g = |x: f64| 2.0 / (x * x) + k * k * x.powi(4);
        let (mut a, mut b) = (1e-4, 10.0);
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let (c, d) = (b - r * (b - a), a + r * (b - a));
            if g(c) < g(d) {
                b = d;
            } else {
                a = c;
            }
        }
        g(0.5 * (a + b))
    };
    assert!(barrier(k_max as f64 - 1.0) <= lambda);
    assert!(barrier(k_max as f64) > lambda);
    let policy = MeshPolicy::for_lambda_max(lambda);
    let form = ars_mode_form(&model, k_max + 1, &policy);
    assert_eq!(inertia_count(&form, lambda), 0);
    // the barrier 2/x² exceeds 2·10⁴ below x = 10⁻², so the dense solve may start there
    let dense = log_coordinate_oracle(2, (k_max + 1) as f64, 1e-2, 1200);
    assert!(dense > lambda, "dense lowest {dense}");
    assert!((lowest(&form) / dense - 1.0).abs() < 0.005);
}

#[test]
fn deeper_truncation_keeps_counts() {
    let model = ars(1);
    let lambdas = [100.0, 500.0];
    let policy = MeshPolicy::for_lambda_max(500.0);
    let a = counting_function(&model, &lambdas, &policy, false).unwrap();
    let b = counting_function(&model, &lambdas, &policy.with_x_min(policy.x_min * policy.x_min), false).unwrap();
    assert_eq!(a.spectrum.total, b.spectrum.total);
}

#[test]
fn hardy_and_strip_bounds_on_ars() {
    let policy = MeshPolicy::for_lambda_max(1e3);
    for m in [1, 2] {
        let model = ars(m);
        for eps in [0.2, 0.1, 0.05, 0.02] {
            let c = hardy_rayleigh(&model, eps, HardyVariant::CompactSupport, &policy).unwrap();
            let h = hardy_rayleigh(&model, eps, HardyVariant::H1, &policy).unwrap();
            let g = strip_gap(&model, eps, &policy).unwrap();
            assert!(c.value >= 0.25, "m = {m}, eps = {eps}: {}", c.value);
            assert!(h.value >= 0.125, "m = {m}, eps = {eps}: {}", h.value);
            assert!(g.value >= 1.0 / (8.0 * eps * eps), "m = {m}, eps = {eps}: {}", g.value);
        }
    }
    assert!(hardy_rayleigh(&ars(1), 0.3, HardyVariant::H1, &policy).is_err());
}

#[test]
fn flat_hardy_quotient_tends_to_a_quarter() {
    // on (a, 1) the minimizer is √x sin(π ln x / ln a), with value 1/4 + (π / ln a)²
    let model = interval(1.0, EdgeCondition::Dirichlet, EdgeCondition::Dirichlet);
    let mut last = f64::INFINITY;
    for a in [1e-10, 1e-20, 1e-40, 1e-80] {
        let policy = MeshPolicy::for_lambda_max(1e3).with_x_min(a);
        let v = hardy_rayleigh(&model, 1.0, HardyVariant::CompactSupport, &policy).unwrap().value;
        let exact = 0.25 + (PI / a.ln()).powi(2);
        assert!((v - exact).abs() < 1e-3 * exact, "a = {a}: {v} vs {exact}");
        assert!(v > 0.25 && v < last);
        last = v;
    }
    assert!((last / 0.25 - 1.0) < 0.02);
    assert_eq!(strip_gap(&model, 0.5, &MeshPolicy::for_lambda_max(1e3)).unwrap().value, 0.0);
}

#[test]
fn strip_counts_against_frozen_metric() {
    let model = ars(1);
    let policy = MeshPolicy::for_lambda_max(500.0);
    let c = strip_count(&model, 0.05, 0.1, 500.0, &policy).unwrap();
    assert!(c.neumann <= c.frozen, "{c:?}");
    assert!(c.dirichlet <= c.neumann);
    let thin = strip_count(&model, 0.05, 0.0501, 500.0, &policy).unwrap();
    assert_eq!(thin.dirichlet, 0);
}

/// `Σ_{j≥1} e^{−j²t} = ½(√(π/t) Σ_k e^{−π²k²/t} − 1)`.
fn theta_trace(t: f64) -> f64 {
    let s: f64 = (-20i32..=20).map(|k| (-(PI * k as f64).powi(2) / t).exp()).sum();
    0.5 * ((PI / t).sqrt() * s - 1.0)
}

#[test]
fn interval_heat_trace_against_theta_function() {
    let eigs: Vec<f64> = (1..2000).map(|j| (j * j) as f64).collect();
    let t_grid: Vec<f64> = (0..=20).map(|i| 1e-3 * 10f64.powf(i as f64 / 10.0)).collect();
    let (rows, fit) = heat_trace(&eigs, 1e6, &t_grid, PI, 1, (1e-3, 1e-1)).unwrap();
    for r in rows.iter().filter(|r| r.admissible) {
        let z = theta_trace(r.t);
        assert!((r.z / z - 1.0).abs() < 1e-9, "t = {}: {} vs {z}", r.t, r.z);
        // the remainder of ½√(π/t) − ½ is −√(t/π)
        assert!((r.scaled_remainder + (r.t / PI).sqrt()).abs() < 1e-9);
    }
    assert!((fit.slope - 0.5).abs() < 0.02, "{fit:?}");
    assert!((fit.intercept - (-0.5 * PI.ln())).abs() < 0.05 * 0.5 * PI.ln());
}

#[test]
fn buser_constants_are_finite() {
    let model = ars(1);
    let policy = MeshPolicy::for_lambda_max(1e3);
    let bounds = |e: f64| BuserBounds { inj: f64::INFINITY, inj_boundary: e / 2.0, k: 2.0 / (e * e), h: 1.0 / e };
    let rows = buser_check(&model, &[100.0, 300.0, 1000.0], &[0.2, 0.1], bounds, &policy).unwrap();
    for r in rows {
        assert!(r.constant.is_finite() && r.constant > 0.0, "{r:?}");
    }
}

#[test]
fn counts_do_not_depend_on_thread_count() {
    let model = ars(1);
    let lambdas = [200.0, 800.0];
    let policy = MeshPolicy::for_lambda_max(800.0);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| counting_function(&model, &lambdas, &policy, false).unwrap().spectrum)
    };
    assert_eq!(run(1), run(4));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sandwich_on_ars(c1 in 0.05f64..0.45, gap in 0.05f64..0.45, l in 50.0f64..800.0) {
        let cuts = [c1, (c1 + gap).min(0.95)];
        let policy = MeshPolicy::for_lambda_max(800.0);
        let r = bracketing_check(&ars(1), &cuts, &[l, 2.0 * l], &policy).unwrap();
        prop_assert!(r.violations.is_empty(), "{:?}", r.violations);
        for row in &r.rows {
            prop_assert!(row.lower <= row.n && row.n <= row.upper);
        }
    }

    #[test]
    fn sandwich_on_intervals(len in 0.5f64..4.0, cut in 0.05f64..0.95, l in 1.0f64..400.0) {
        let model = interval(len, EdgeCondition::Dirichlet, EdgeCondition::Neumann);
        let policy = MeshPolicy::for_lambda_max(400.0);
        let r = bracketing_check(&model, &[cut * len], &[l], &policy).unwrap();
        let row = r.rows[0];
        prop_assert!(row.lower <= row.n && row.n <= row.upper);
        // mixed interval eigenvalues ((j − ½)π / L)²
        let exact = (1..).take_while(|j| ((*j as f64 - 0.5) * PI / len).powi(2) < l).count() as u64;
        let close = (1..200).any(|j| ((((j as f64 - 0.5) * PI / len).powi(2)) / l - 1.0).abs() < 1e-3);
        prop_assume!(!close);
        prop_assert_eq!(row.n, exact);
    }
}
