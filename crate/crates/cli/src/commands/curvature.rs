use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weyllab_core::geometry::{riemann_components, warped_sectional, CurvatureReport, FrameField, WarpedGeometry};
use weyllab_core::models::ModelSpec;

use super::{config_err, load_model, CurvatureArgs, Report};
use crate::summary::{Check, Outcome};
use crate::Context;

/// Closed-form curvature values `(label, expected, computed)` where the model has them.
fn closed_forms(spec: &ModelSpec, r: &CurvatureReport) -> Option<Vec<(&'static str, f64, f64)>> {
    let x = r.x;
    match spec {
        ModelSpec::WorstCase { k } => {
            let (kf, x2k) = (*k as f64, x.powi(2 * *k as i32));
            Some(vec![
                ("sec_01", -3.0 / (4.0 * x2k), r.sec_0i[0]),
                ("sec_02", 1.0 / (4.0 * x2k) - kf * (kf + 1.0) / (x * x), r.sec_0i[1]),
            ])
        }
        ModelSpec::NonRegularExample => {
            let s2 = (r.z[0] / 2.0).sin().powi(2);
            let d = x * x + s2;
            Some(vec![
                ("sec_01", -2.0 / (x * x) - (10.0 * x * x + 2.0 * s2) / (d * d), r.sec_0i[0]),
                ("hess_11", -1.0 / x.abs() - 2.0 * x.abs() / d, r.hess_delta[0][0]),
            ])
        }
        ModelSpec::ArsCylinder { m, .. } => {
            let mf = *m as f64;
            Some(vec![("sec_01", -mf * (mf + 1.0) / (x * x), r.sec_0i[0]), ("hess_11", -mf / x, r.hess_delta[0][0])])
        }
        ModelSpec::GrushinSphere => Some(vec![("sec_01", -2.0 / (x * x), r.sec_0i[0]), ("hess_11", -1.0 / x, r.hess_delta[0][0])]),
        _ => None,
    }
}

/// Largest relative deviation between the frame engine and the warped-product formulas.
fn cross_validate(g: &WarpedGeometry, r: &CurvatureReport) -> anyhow::Result<f64> {
    let w = warped_sectional(g, r.x)?;
    let d = r.sec_0i.len();
    let rel = |a: f64, b: f64, floor: f64| (a - b).abs() / b.abs().max(floor);
    let mut worst: f64 = 0.0;
    for i in 0..d {
        worst = worse(worse(worst, rel(r.sec_0i[i], w.k_xu, 0.0)), rel(r.hess_delta[i][i], w.hess, 0.0));
        for j in 0..d {
            if i != j {
                let scale = w.hess * w.hess;
                worst = worse(worst, rel(r.sec_ij[i][j], w.k_uv.unwrap_or(f64::NAN), scale));
                worst = worse(worst, r.hess_delta[i][j].abs() / w.hess.abs());
            }
        }
    }
    Ok(worst)
}

/// `f64::max` drops NaN; a NaN deviation must count as a failure.
fn worse(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::INFINITY
    } else {
        a.max(b)
    }
}

fn centre(frame: &dyn FrameField) -> Vec<f64> {
    frame.fiber_domain().iter().map(|r| 0.5 * (r.lo + r.hi)).collect()
}

pub fn run(a: &CurvatureArgs, ctx: &Context) -> anyhow::Result<Outcome> {
    let (spec, model) = load_model(&a.model, "worst:k=2")?;
    let frame = model.frame().ok_or_else(|| config_err(format!("{} has no frame description", model.name())))?;
    let tol = a.tol.unwrap_or(1e-8);
    let mut rep = Report::new("curvature", a);
    rep.model(&spec);

    if let Some(x) = a.x {
        let z = a.z.clone().unwrap_or_else(|| centre(frame.as_ref()));
        let r = riemann_components(frame.as_ref(), x, &z)?;
        rep.stdout = Some(serde_json::to_string_pretty(&r)?);
        rep.file("curvature.json", serde_json::to_string_pretty(&r)? + "\n");
        if let Some(vals) = closed_forms(&spec, &r) {
            let worst = vals.iter().map(|(_, e, c)| ((c - e) / e).abs()).fold(0.0, worse);
            rep.check(
                Check::at_most(format!("closed_form@{x}"), "frame engine reproduces the closed-form curvature", worst, tol)
                    .with_note(format!("{vals:?}")),
            );
        }
        rep.result("report", &r);
    }

    let points = a.points.unwrap_or(100);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let (mut golden, mut cross): (Option<f64>, Option<f64>) = (None, None);
    let domain = frame.fiber_domain();
    for _ in 0..points {
        let x = model.x_max() * 10f64.powf(rng.gen_range(-4.0..0.0));
        let z: Vec<f64> = domain.iter().map(|r| rng.gen_range(r.lo..r.hi)).collect();
        let r = riemann_components(frame.as_ref(), x, &z)?;
        if let Some(vals) = closed_forms(&spec, &r) {
            let w = vals.iter().map(|(_, e, c)| ((c - e) / e).abs()).fold(0.0, worse);
            golden = Some(worse(golden.unwrap_or(0.0), w));
        }
        if let Some(g) = model.warped() {
            let w = cross_validate(g, &r)?;
            cross = Some(worse(cross.unwrap_or(0.0), w));
        }
    }
    if let Some(w) = golden {
        rep.check(Check::at_most("closed_form_random", "closed-form curvature on random points", w, tol));
    }
    if let Some(w) = cross {
        rep.check(Check::at_most("oneill_cross_validation", "frame engine agrees with the warped-product formulas", w, tol));
    }
    rep.result("points", points);
    Ok(rep.finish(ctx))
}
