use std::f64::consts::PI;

use weyllab_core::discretize::MeshPolicy;
use weyllab_core::models::{build_model, verify_assumption_a, EdgeCondition, ModelSpec};
use weyllab_core::svf::SlowVaryingSpec;
use weyllab_core::weyl::{counting_function, log_grid, weyl_ratio};

use super::{check_increasing, config_err, mesh_info, weyl_constant, PrescribeArgs, Report};
use crate::summary::{csv_table, fmt, Check, Outcome};
use crate::Context;

pub fn run(a: &PrescribeArgs, ctx: &Context) -> anyhow::Result<Outcome> {
    let upsilon: SlowVaryingSpec =
        a.upsilon.as_deref().unwrap_or("log^2").parse().map_err(|e| config_err(format!("upsilon: {e}")))?;
    let n = a.n.unwrap_or(2);
    if n < 2 {
        return Err(config_err("n must be at least 2"));
    }
    let vol_z = a.vol_z.unwrap_or((2.0 * PI).powi(n as i32 - 1));
    let spec = ModelSpec::PrescribedWeyl { upsilon, n, vol_z, outer: EdgeCondition::Dirichlet };
    let model = build_model(spec.clone())?;
    let warp = model.warped().expect("prescribed models are warped products");
    let mut rep = Report::new("prescribe", a);
    rep.model(&spec);

    // a warp f ~ x^{-1/(n-1)} up to slowly varying factors
    let p = 1.0 / (n as f64 - 1.0);
    let x = a.x.unwrap_or(1e-4);
    let [f, df, d2f] = warp.warp(x)?;
    let (first, second) = (x * df / f, x * x * d2f / f);
    let tol = a.asymptotic_tol.unwrap_or(0.05);
    rep.check(Check::relative(format!("log_derivative@{x}"), "x f'/f -> -1/(n-1)", first, -p, tol));
    rep.check(Check::relative(format!("second_derivative@{x}"), "x^2 f''/f -> (1/(n-1))(1/(n-1)+1)", second, p * (p + 1.0), tol));
    let xs = log_grid(1e-8, model.x_max(), 10);
    rep.file(
        "profile.csv",
        csv_table(
            &["x", "f", "x_df_over_f", "x2_d2f_over_f"],
            xs.iter().map(|x| {
                let [f, df, d2f] = warp.warp_jet(*x);
                vec![fmt(*x), fmt(f), fmt(x * df / f), fmt(x * x * d2f / f)]
            }),
        )?,
    );

    let eps = a.eps.clone().unwrap_or_else(|| log_grid(1e-6, model.eps0(), 4));
    check_increasing("eps", &eps)?;
    let report = verify_assumption_a(&model, &eps)?;
    rep.check(
        Check::at_most("convex", "the collar is convex: Hess(delta) <= 0", report.max_hess_eigenvalue, 1e-10)
            .with_note(format!("convex flag {}", report.convex)),
    );
    rep.check(Check::holds(
        "curvature_bounded",
        "|Sec| delta^2 is bounded near the singularity",
        report.curvature_constant.is_finite(),
    )
    .with_note(format!("sup |Sec| delta^2 = {}", report.curvature_constant)));
    rep.result("assumption_report", &report);

    let grid = a.lambdas.clone().unwrap_or_else(|| vec![1e3, 1e4, 1e5]);
    check_increasing("lambda", &grid)?;
    let policy = MeshPolicy::for_lambda_max(grid[grid.len() - 1]);
    let r = counting_function(&model, &grid, &policy, true)?;
    let ratio = weyl_ratio(&r.spectrum, &model)?;
    let limit = weyl_constant(n);
    let dist: Vec<f64> = ratio.iter().map(|r| (r - limit).abs()).collect();
    let bad = dist.windows(2).filter(|w| !(w[1] < w[0])).count();
    rep.check(
        Check::at_most("ratio_trend", "N / (lambda^{n/2} upsilon) approaches omega_n / (2 pi)^n", bad as f64, 0.0)
            .with_note(format!("distances {dist:?}")),
    );
    if let Some(f) = r.refinement {
        rep.check(Check::at_most("refinement_stable", "one mesh refinement changes N(lambda_max) by < 0.5%", f.relative_change, 0.005));
    }
    let upsilon: Vec<f64> = grid.iter().map(|l| model.chart_upsilon(*l)).collect::<Result<_, _>>()?;
    rep.file(
        "counting.csv",
        csv_table(
            &["lambda", "N", "upsilon", "ratio"],
            (0..grid.len()).map(|j| vec![fmt(grid[j]), r.spectrum.total[j].to_string(), fmt(upsilon[j]), fmt(ratio[j])]),
        )?,
    );
    rep.grid("lambda", &grid);
    rep.grid("eps", &eps);
    rep.mesh = Some(mesh_info(r.mesh_nodes, r.mesh_depth, &policy));
    rep.result("ratio", &ratio);
    rep.result("limit", limit);
    rep.result("asymptotics", [first, second]);
    Ok(rep.finish(ctx))
}
