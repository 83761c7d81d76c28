use std::f64::consts::PI;

use weyllab_core::discretize::MeshPolicy;
use weyllab_core::models::{EdgeCondition, ModelSpec};
use weyllab_core::weyl::bracketing_check;

use super::{lambda_grid, load_model, BracketingArgs, Report};
use crate::summary::{csv_table, fmt, Check, Outcome};
use crate::Context;

/// `#{j : (jπ/ℓ)² < λ}` with `j ≥ 1` (Dirichlet) or `j ≥ 0` (Neumann at both ends); mixed ends use `j − 1/2`.
fn interval_count(len: f64, left: EdgeCondition, right: EdgeCondition, lambda: f64) -> (u64, f64) {
    let s = lambda.sqrt() * len / PI;
    let (offset, first) = match (left, right) {
        (EdgeCondition::Dirichlet, EdgeCondition::Dirichlet) => (0.0, 1.0),
        (EdgeCondition::Neumann, EdgeCondition::Neumann) => (0.0, 0.0),
        _ => (0.5, 0.0),
    };
    // eigenvalues ((j + offset)π/ℓ)² for j ≥ first
    let top = (s - offset).ceil() - 1.0;
    let count = if top < first { 0.0 } else { top - first + 1.0 };
    // distance of √λ·ℓ/π to the nearest level, relative
    let near = ((s - offset) - (s - offset).round()).abs() / s.max(1.0);
    (count as u64, near)
}

pub fn run(a: &BracketingArgs, ctx: &Context) -> anyhow::Result<Outcome> {
    let (spec, model) = load_model(&a.model, "interval:L=1")?;
    let grid = lambda_grid(&a.lambdas, a.lmin, a.lmax, a.per_decade, 200.0)?;
    let lmax = grid[grid.len() - 1];
    let mut cuts = a.cuts.clone().unwrap_or_default();
    if a.singular_cut.unwrap_or(false) {
        cuts.push(1.0 / (10.0 * lmax.sqrt()));
    }
    cuts.sort_by(f64::total_cmp);
    let policy = MeshPolicy::for_lambda_max(lmax);
    let r = bracketing_check(&model, &cuts, &grid, &policy)?;

    let mut rep = Report::new("bracketing", a);
    rep.model(&spec);
    rep.grid("lambda", &grid);
    rep.grid("cuts", &cuts);
    rep.file(
        "bracketing.csv",
        csv_table(
            &["lambda", "lower", "N", "upper"],
            r.rows.iter().map(|b| vec![fmt(b.lambda), b.lower.to_string(), b.n.to_string(), b.upper.to_string()]),
        )?,
    );
    let margin = r.rows.iter().map(|b| (b.n as f64 - b.lower as f64).min(b.upper as f64 - b.n as f64)).fold(f64::INFINITY, f64::min);
    rep.check(
        Check::at_most("sandwich", "sum of Dirichlet piece counts <= N <= sum of Neumann piece counts", r.violations.len() as f64, 0.0)
            .with_note(format!("smallest integer slack {margin}")),
    );
    if let ModelSpec::Interval { length, left, right } = spec {
        let mut bounds = vec![0.0];
        bounds.extend(&cuts);
        bounds.push(length);
        let mut mismatches = Vec::new();
        let mut skipped = 0;
        for row in &r.rows {
            let (n, near) = interval_count(length, left, right, row.lambda);
            let mut ambiguous = near < 1e-3;
            let (mut lower, mut upper) = (0, 0);
            for w in bounds.windows(2) {
                let (d, nd) = interval_count(w[1] - w[0], EdgeCondition::Dirichlet, EdgeCondition::Dirichlet, row.lambda);
                let (u, nu) = interval_count(w[1] - w[0], EdgeCondition::Neumann, EdgeCondition::Neumann, row.lambda);
                ambiguous |= nd < 1e-3 || nu < 1e-3;
                lower += d;
                upper += u;
            }
            if ambiguous {
                skipped += 1;
            } else if (lower, n, upper) != (row.lower, row.n, row.upper) {
                mismatches.push(format!("lambda {}: exact ({lower}, {n}, {upper}) vs ({}, {}, {})", row.lambda, row.lower, row.n, row.upper));
            }
        }
        rep.check(
            Check::at_most("closed_form", "interval counts agree with the closed-form spectra", mismatches.len() as f64, 0.0)
                .with_note(format!("{skipped} lambda values within 0.1% of an exact eigenvalue skipped; {mismatches:?}")),
        );
    }
    rep.result("rows", &r.rows);
    rep.result("piece_lower", &r.piece_lower);
    rep.result("piece_upper", &r.piece_upper);
    rep.result("violations", &r.violations);
    Ok(rep.finish(ctx))
}
