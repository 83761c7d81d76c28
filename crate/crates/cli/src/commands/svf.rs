use weyllab_core::svf::{dehaan_ratio, eval_svf, slow_variation_defect, SlowVaryingSpec};
use weyllab_core::weyl::log_grid;

use super::{check_increasing, config_err, Report, SvfArgs};
use crate::summary::{csv_table, fmt, Check, Outcome};
use crate::Context;

pub fn run(a: &SvfArgs, ctx: &Context) -> anyhow::Result<Outcome> {
    let specs: Vec<SlowVaryingSpec> = match &a.upsilon {
        Some(list) => list
            .iter()
            .map(|s| s.parse().map_err(|e| config_err(format!("upsilon `{s}`: {e}"))))
            .collect::<anyhow::Result<_>>()?,
        None => SlowVaryingSpec::catalog(),
    };
    let grid = a.lambdas.clone().unwrap_or_else(|| log_grid(1e1, 1e12, 1));
    check_increasing("lambda", &grid)?;
    let ratio = a.a.unwrap_or(2.0);
    let mut rep = Report::new("svf", a);
    rep.grid("lambda", &grid);
    let mut rows = Vec::new();
    for spec in &specs {
        let mut defects = Vec::new();
        for &l in grid.iter().filter(|l| **l >= spec.lambda_min()) {
            let v = eval_svf(spec, l)?;
            let (defect, index) = slow_variation_defect(spec, ratio, l)?;
            let dh = dehaan_ratio(spec, l, 1)?;
            rows.push(vec![spec.to_string(), fmt(l), fmt(v.value), fmt(defect), fmt(index), fmt(dh)]);
            defects.push(defect);
        }
        if defects.len() >= 2 {
            rep.check(
                Check::at_most(
                    format!("defect_decreases:{spec}"),
                    "slow variation: |u(a lambda)/u(lambda) - 1| shrinks",
                    defects[defects.len() - 1] / defects[0],
                    1.0,
                )
                .with_note(format!("non-decreasing profile: {}", spec.is_non_decreasing())),
            );
        }
    }
    rep.file("svf.csv", csv_table(&["upsilon", "lambda", "value", "defect", "index", "dehaan"], rows)?);
    rep.result("functions", specs.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    Ok(rep.finish(ctx))
}
