use weyllab_core::discretize::MeshPolicy;
use weyllab_core::weyl::{hardy_rayleigh, strip_gap, HardyVariant};

use super::{check_increasing, load_model, HardyArgs, Report};
use crate::summary::{csv_table, fmt, Check, Outcome};
use crate::Context;

struct Row {
    eps: f64,
    variant: &'static str,
    value: f64,
    bound: f64,
    x_min: f64,
}

/// Mesh used for all strip problems; the geometric grading resolves every ε.
fn policy() -> MeshPolicy {
    MeshPolicy::for_lambda_max(1e3)
}

pub fn run(a: &HardyArgs, ctx: &Context) -> anyhow::Result<Outcome> {
    let (spec, model) = load_model(&a.model, "ars:m=1")?;
    let mut rep = Report::new("hardy", a);
    rep.model(&spec);
    let mut rows = Vec::new();
    if model.is_singular() {
        let eps = a.eps.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05, 0.02]);
        if eps.is_empty() {
            return Err(super::config_err("eps list is empty"));
        }
        rep.grid("eps", &eps);
        let p = policy();
        let mut skipped = Vec::new();
        for &e in &eps {
            if e > model.eps0() / 2.0 {
                skipped.push(e);
                continue;
            }
            for v in [HardyVariant::CompactSupport, HardyVariant::H1] {
                let r = hardy_rayleigh(&model, e, v, &p)?;
                rep.check(
                    Check::at_least(
                        format!("hardy_{}@{e}", v.label()),
                        match v {
                            HardyVariant::CompactSupport => "Hardy inequality with constant 1/4 for compactly supported functions",
                            HardyVariant::H1 => "Hardy inequality with constant 1/8 on H^1 of the collar",
                        },
                        r.value,
                        v.bound(),
                    )
                    .with_note(format!("refined {}", r.refined)),
                );
                rows.push(Row { eps: e, variant: v.label(), value: r.value, bound: v.bound(), x_min: p.x_min });
            }
            let g = strip_gap(&model, e, &p)?;
            let bound = 1.0 / (8.0 * e * e);
            rep.check(
                Check::at_least(format!("strip_gap@{e}"), "no Neumann eigenvalue of the (0, eps) collar below 1/(8 eps^2)", g.value, bound)
                    .with_note(format!("refined {}", g.refined)),
            );
            rows.push(Row { eps: e, variant: "strip-gap", value: g.value, bound, x_min: p.x_min });
        }
        if rows.is_empty() {
            return Err(super::config_err(format!("every eps exceeds eps0/2 = {}", model.eps0() / 2.0)));
        }
        rep.result("skipped_eps", &skipped);
        rep.mesh = Some(super::mesh_info(0, (model.eps0() / p.x_min).log2(), &p));
    } else {
        // flat control: the half-line constant 1/4 is approached as the truncation x_min → 0
        let x_mins = a.x_min.clone().unwrap_or_else(|| vec![1e-10, 1e-20, 1e-40, 1e-80]);
        let rev: Vec<f64> = x_mins.iter().rev().copied().collect();
        check_increasing("x_min", &rev)?;
        rep.grid("x_min", &x_mins);
        let e = a.eps.as_ref().and_then(|v| v.first().copied()).unwrap_or(1.0).min(model.x_max());
        let mut values = Vec::new();
        for &xm in &x_mins {
            let p = policy().with_x_min(xm);
            let r = hardy_rayleigh(&model, e, HardyVariant::CompactSupport, &p)?;
            values.push(r.value);
            rows.push(Row { eps: e, variant: "compact-support", value: r.value, bound: 0.25, x_min: xm });
        }
        let last = values[values.len() - 1];
        rep.check(Check::relative(
            "control_limit",
            "sharp half-line Hardy constant 1/4",
            last,
            0.25,
            a.control_tol.unwrap_or(0.02),
        ));
        let bad = values.windows(2).filter(|w| !(w[1] <= w[0])).count();
        rep.check(Check::at_most("control_monotone", "the control decreases toward 1/4 under refinement", bad as f64, 0.0));
        let lowest = values.iter().copied().fold(f64::INFINITY, f64::min);
        rep.check(Check::at_least("control_above", "the control approaches 1/4 from above", lowest, 0.25));
        rep.result("control", &values);
    }
    rep.file(
        "hardy.csv",
        csv_table(
            &["eps", "variant", "rayleigh_min", "bound", "x_min"],
            rows.iter().map(|r| vec![fmt(r.eps), r.variant.to_string(), fmt(r.value), fmt(r.bound), fmt(r.x_min)]),
        )?,
    );
    Ok(rep.finish(ctx))
}
