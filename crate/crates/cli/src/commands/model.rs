use weyllab_core::models::verify_assumption_a;
use weyllab_core::weyl::log_grid;

use super::{check_increasing, load_model, ModelArgs, Report};
use crate::summary::{Check, Outcome};
use crate::Context;

pub fn run(a: &ModelArgs, ctx: &Context) -> anyhow::Result<Outcome> {
    let (spec, model) = load_model(&a.model, "ars:m=1")?;
    let eps = a.eps.clone().unwrap_or_else(|| log_grid(1e-4 * model.eps0(), model.eps0(), 2));
    check_increasing("eps", &eps)?;
    let report = verify_assumption_a(&model, &eps)?;
    let mut rep = Report::new("model", a);
    rep.model(&spec);
    rep.grid("eps", &eps);
    rep.check(Check::holds("report_finite", "curvature bounds are finite on the grid", report.curvature_constant.is_finite()));
    rep.file("model.json", serde_json::to_string_pretty(&report)? + "\n");
    rep.result("report", &report);
    rep.result("singular", model.is_singular());
    rep.result("dimension", model.dim());
    Ok(rep.finish(ctx))
}
