use std::f64::consts::PI;

use weyllab_core::discretize::MeshPolicy;
use weyllab_core::models::{EdgeCondition, Model, ModelSpec};
use weyllab_core::weyl::{eigenvalues_below, heat_trace, log_grid};

use super::{config_err, load_model, HeatTraceArgs, Report};
use crate::summary::{csv_table, fmt, Check, Outcome};
use crate::Context;

/// Eigenvalues below the cut, expanded by multiplicity.
pub(crate) fn expanded_spectrum(model: &Model, lcut: f64) -> anyhow::Result<Vec<f64>> {
    let tagged = eigenvalues_below(model, lcut, &MeshPolicy::for_lambda_max(lcut))?;
    let mut out = Vec::new();
    for t in tagged {
        out.extend(std::iter::repeat_n(t.value, t.multiplicity as usize));
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

pub(crate) fn model_volume(spec: &ModelSpec, model: &Model) -> anyhow::Result<f64> {
    Ok(match spec {
        ModelSpec::Interval { length, .. } => *length,
        _ => model.truncated_volume(MeshPolicy::for_lambda_max(1.0).x_min)?,
    })
}

pub fn run(a: &HeatTraceArgs, ctx: &Context) -> anyhow::Result<Outcome> {
    let (spec, model) = load_model(&a.model, "interval:L=1")?;
    let lcut = a.lcut.unwrap_or(1e5);
    let (tmin, tmax) = (a.tmin.unwrap_or(1e-3), a.tmax.unwrap_or(1e-2));
    if !(lcut > 0.0 && tmin > 0.0 && tmin < tmax) {
        return Err(config_err(format!("need lcut > 0 and 0 < tmin < tmax, got {lcut}, {tmin}, {tmax}")));
    }
    let eigs = expanded_spectrum(&model, lcut)?;
    let vol = model_volume(&spec, &model)?;
    let n = model.dim();
    // the table extends one decade beyond the fit window on both sides
    let t_grid = log_grid(tmin / 10.0, tmax * 10.0, a.per_decade.unwrap_or(40));
    let (rows, fit) = heat_trace(&eigs, lcut, &t_grid, vol, n, (tmin, tmax))?;

    let mut rep = Report::new("heattrace", a);
    rep.model(&spec);
    rep.grid("t", &t_grid);
    rep.file(
        "heattrace.csv",
        csv_table(&["t", "Z", "scaled_remainder"], rows.iter().map(|r| vec![fmt(r.t), fmt(r.z), fmt(r.scaled_remainder)]))?,
    );
    rep.result("fit", fit);
    rep.result("eigenvalues", eigs.len());
    rep.result("volume", vol);
    rep.result("admissible_t", rows.iter().filter(|r| r.admissible).map(|r| r.t).collect::<Vec<_>>());
    rep.check(Check::at_least("window", "tail-admissible fit window has at least 3 points", fit.points as f64, 3.0));
    if let ModelSpec::Interval { length, left, right } = spec {
        if left == right {
            let slope_tol = a.slope_tol.unwrap_or(0.02);
            rep.check(Check::at_most(
                "remainder_slope",
                "heat-trace remainder is of order t^{1/2}",
                (fit.slope - 0.5).abs(),
                slope_tol,
            )
            .with_note(format!("slope {}", fit.slope)));
            let target = ((4.0 * PI).sqrt() / (2.0 * length)).ln();
            rep.check(Check::relative(
                "remainder_intercept",
                "boundary term sqrt(4 pi t) / (2L) of the interval heat trace",
                fit.intercept,
                target,
                a.intercept_tol.unwrap_or(0.05),
            ));
            let sign = if left == EdgeCondition::Dirichlet { -1.0 } else { 1.0 };
            let wrong = rows.iter().filter(|r| r.admissible && r.scaled_remainder * sign <= 0.0).count();
            rep.check(Check::at_most("remainder_sign", "the boundary term has the sign of the boundary condition", wrong as f64, 0.0));
        }
    }
    Ok(rep.finish(ctx))
}
