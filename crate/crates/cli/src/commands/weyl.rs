use weyllab_core::discretize::MeshPolicy;
use weyllab_core::geometry::WarpProfile;
use weyllab_core::models::{Model, ModelSpec};
use weyllab_core::weyl::{counting_function, fitted_exponent, weyl_ratio};

use super::{config_err, lambda_grid, load_model, mesh_info, weyl_constant, Report, WeylArgs};
use crate::summary::{csv_table, fmt, Check, Outcome};
use crate::Context;

/// Volume growth of the model: slowly varying, or regularly varying with a predicted counting exponent.
pub(crate) enum Growth {
    Slow,
    Regular { exponent: f64 },
}

pub(crate) fn growth(spec: &ModelSpec, model: &Model, grid: &[f64]) -> anyhow::Result<Growth> {
    let n = model.dim() as f64;
    Ok(match spec {
        ModelSpec::ArsCylinder { m: 1, .. } | ModelSpec::GrushinSphere => Growth::Slow,
        ModelSpec::ArsCylinder { m, .. } => Growth::Regular { exponent: (n - 1.0) * (*m as f64 + 1.0) / 2.0 },
        ModelSpec::PrescribedWeyl { .. } | ModelSpec::Interval { .. } => Growth::Slow,
        ModelSpec::Warped { profile: WarpProfile::Prescribed { .. }, .. } => Growth::Slow,
        ModelSpec::Warped { profile: WarpProfile::Power { exponent, .. }, .. } if exponent * (n - 1.0) <= 1.0 => {
            Growth::Slow
        }
        _ => {
            let (a, b) = (grid[0], grid[grid.len() - 1]);
            let beta = (model.chart_upsilon(b)? / model.chart_upsilon(a)?).ln() / (b / a).ln();
            Growth::Regular { exponent: n / 2.0 + beta }
        }
    })
}

fn parse_bands(bands: &Option<Vec<String>>) -> anyhow::Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for b in bands.iter().flatten() {
        let parsed = b.split_once('=').and_then(|(l, t)| Some((l.trim().parse().ok()?, t.trim().parse().ok()?)));
        out.push(parsed.ok_or_else(|| config_err(format!("band `{b}` is not of the form lambda=tol")))?);
    }
    Ok(out)
}

pub fn run(a: &WeylArgs, ctx: &Context) -> anyhow::Result<Outcome> {
    let (spec, model) = load_model(&a.model, "ars:m=1")?;
    let grid = lambda_grid(&a.lambdas, a.lmin, a.lmax, a.per_decade, 2000.0)?;
    let lmax = grid[grid.len() - 1];
    let mut policy = MeshPolicy::for_lambda_max(lmax);
    if let Some(x) = a.x_min {
        policy = policy.with_x_min(x);
    }
    let r = counting_function(&model, &grid, &policy, a.refine.unwrap_or(true))?;
    let ratio = weyl_ratio(&r.spectrum, &model)?;
    let upsilon: Vec<f64> = grid.iter().map(|l| model.chart_upsilon(*l)).collect::<Result<_, _>>()?;
    let n = model.dim();

    let mut rep = Report::new("weyl", a);
    rep.model(&spec);
    rep.grid("lambda", &grid);
    rep.mesh = Some(mesh_info(r.mesh_nodes, r.mesh_depth, &policy));
    rep.file(
        "counting.csv",
        csv_table(
            &["lambda", "N", "upsilon", "ratio"],
            (0..grid.len()).map(|j| vec![fmt(grid[j]), r.spectrum.total[j].to_string(), fmt(upsilon[j]), fmt(ratio[j])]),
        )?,
    );
    rep.result("N", &r.spectrum.total);
    rep.result("ratio", &ratio);
    rep.result("modes", r.spectrum.modes.len());
    rep.result("refinement", r.refinement);

    let monotone = r.spectrum.total.windows(2).all(|w| w[0] <= w[1]);
    rep.check(Check::holds("counting_monotone", "N is non-decreasing in lambda", monotone));
    if let Some(f) = r.refinement {
        rep.check(Check::at_most("refinement_stable", "one mesh refinement changes N(lambda_max) by < 0.5%", f.relative_change, 0.005));
    }
    match growth(&spec, &model, &grid)? {
        Growth::Slow => {
            let limit = weyl_constant(n);
            rep.result("limit", limit);
            let mut bands = parse_bands(&a.band)?;
            if !bands.iter().any(|(l, _)| *l == lmax) {
                bands.push((lmax, a.tol.unwrap_or(0.2)));
            }
            for (l, tol) in bands {
                let j = grid
                    .iter()
                    .position(|g| *g == l)
                    .ok_or_else(|| config_err(format!("band lambda {l} is not on the lambda grid")))?;
                rep.check(Check::relative(
                    format!("weyl_ratio@{l}"),
                    "N(lambda) / (lambda^{n/2} upsilon(lambda)) tends to omega_n / (2 pi)^n",
                    ratio[j],
                    limit,
                    tol,
                ));
            }
            if grid.len() > 1 {
                let dist: Vec<f64> = ratio.iter().map(|r| (r - limit).abs()).collect();
                let bad = dist.windows(2).filter(|w| !(w[1] < w[0])).count();
                rep.check(
                    Check::at_most("ratio_trend", "the Weyl ratio approaches its limit monotonically", bad as f64, 0.0)
                        .with_note(format!("distances {dist:?}")),
                );
            }
        }
        Growth::Regular { exponent } => {
            let fit = fitted_exponent(&grid, &r.spectrum.total);
            rep.result("exponent", fit);
            rep.result("expected_exponent", exponent);
            let tol = a.exponent_tol.unwrap_or(0.1);
            rep.check(
                Check::at_most("fitted_exponent", "N grows like lambda^{(n-1)(m+1)/2}", (fit - exponent).abs(), tol)
                    .with_note(format!("fitted {fit}, expected {exponent}")),
            );
            let lo = ratio.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = ratio.iter().copied().fold(0.0, f64::max);
            rep.check(Check::at_most(
                "ratio_band",
                "N / (lambda^{n/2} upsilon) stays in a bounded band",
                hi / lo,
                a.band_factor.unwrap_or(4.0),
            ));
        }
    }
    Ok(rep.finish(ctx))
}
