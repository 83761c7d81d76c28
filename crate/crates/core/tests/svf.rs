use proptest::prelude::*;
use weyllab_core::svf::{dehaan_ratio, eval_svf, slow_variation_defect, Family, SlowVaryingSpec, Term};

fn non_constant() -> Vec<SlowVaryingSpec> {
    SlowVaryingSpec::catalog().into_iter().filter(|s| !s.terms().is_empty()).collect()
}

#[test]
fn defect_decreases_along_decades() {
    for spec in non_constant() {
        for a in [0.5, 2.0, 10.0] {
            let d: Vec<f64> = (3..=12).map(|j| slow_variation_defect(&spec, a, 10f64.powi(j)).unwrap().0).collect();
            if !spec.terms().iter().any(|t| matches!(t, Term::SinLog { .. })) {
                assert!(d.windows(2).all(|w| w[1] < w[0]), "{spec}, a = {a}: {d:?}");
            } else {
                // the sin(log λ) term makes the defect oscillate; only its envelope decays
                let early = d[..4].iter().copied().fold(0.0, f64::max);
                let late = d[6..].iter().copied().fold(0.0, f64::max);
                assert!(late < early, "{spec}, a = {a}: {d:?}");
            }
        }
    }
}

#[test]
fn lamperti_index_decays() {
    for spec in non_constant() {
        let at = |l: f64| slow_variation_defect(&spec, 2.0, l).unwrap().1.abs();
        assert!(at(1e12) < at(1e6), "{spec}");
        assert!(at(1e12) < 0.1, "{spec}: {}", at(1e12));
    }
}

#[test]
fn log_defect_is_exact() {
    let spec = SlowVaryingSpec::log();
    for (a, l) in [(2.0f64, 1e12f64), (10.0, 1e6), (0.5, 1e9)] {
        let (d, index) = slow_variation_defect(&spec, a, l).unwrap();
        assert!((d - (a.ln() / l.ln()).abs()).abs() < 1e-14);
        assert!((index - 1.0 / l.ln()).abs() < 1e-14);
    }
}

#[test]
fn dehaan_ratios_for_log_type() {
    for spec in non_constant().into_iter().filter(|s| s.family() != Family::ExpOfLogPowers) {
        if spec.terms().iter().any(|t| matches!(t, Term::SinLog { .. })) {
            continue;
        }
        let r1 = dehaan_ratio(&spec, 1e12, 1).unwrap();
        let r2 = dehaan_ratio(&spec, 1e12, 2).unwrap();
        assert!((r1 + 1.0).abs() < 0.1, "{spec}: {r1}");
        assert!((r2 - 2.0).abs() < 0.2, "{spec}: {r2}");
    }
}

proptest! {
    #[test]
    fn derivatives_match_central_differences(idx in 0usize..8, e in 2.0f64..11.0) {
        let spec = &SlowVaryingSpec::catalog()[idx];
        let l = 10f64.powf(e).max(spec.lambda_min() * 2.0);
        let h = 1e-4 * l;
        let v = eval_svf(spec, l).unwrap();
        let (p, m) = (eval_svf(spec, l + h).unwrap(), eval_svf(spec, l - h).unwrap());
        let fd1 = (p.value - m.value) / (2.0 * h);
        let fd2 = (p.d1 - m.d1) / (2.0 * h);
        let fd3 = (p.d2 - m.d2) / (2.0 * h);
        prop_assert!((fd1 / v.d1 - 1.0).abs() < 1e-6, "{}: {} vs {}", spec, fd1, v.d1);
        prop_assert!((fd2 / v.d2 - 1.0).abs() < 1e-6, "{}: {} vs {}", spec, fd2, v.d2);
        prop_assert!((fd3 / v.d3 - 1.0).abs() < 1e-6, "{}: {} vs {}", spec, fd3, v.d3);
    }

    #[test]
    fn text_form_round_trips(idx in 0usize..8, l in 1e3f64..1e9) {
        let spec = &SlowVaryingSpec::catalog()[idx];
        let again: SlowVaryingSpec = spec.to_string().parse().unwrap();
        prop_assert_eq!(eval_svf(spec, l).unwrap(), eval_svf(&again, l).unwrap());
    }
}
