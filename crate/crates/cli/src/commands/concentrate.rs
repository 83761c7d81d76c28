use weyllab_core::concentration::{density_one_subset, mass_table};

use super::{config_err, load_model, ConcentrateArgs, Report};
use crate::summary::{csv_table, fmt, Check, Outcome};
use crate::Context;

pub fn run(a: &ConcentrateArgs, ctx: &Context) -> anyhow::Result<Outcome> {
    let (spec, model) = load_model(&a.model, "ars:m=1")?;
    let count = a.count.unwrap_or(400);
    let eps = a.eps.clone().unwrap_or_else(|| vec![0.5, 0.3, 0.2]);
    let eta = a.eta.clone().unwrap_or_else(|| (0..eps.len()).map(|m| if m == 0 { 0.6 } else { 1.0 - 10f64.powi(-(m as i32)) }).collect());
    let prefixes = a.prefixes.clone().unwrap_or_else(|| vec![100, 400]);
    if prefixes.len() != 2 || prefixes[0] == 0 || prefixes[0] >= prefixes[1] || prefixes[1] > count {
        return Err(config_err(format!("prefixes must be two increasing lengths <= count, got {prefixes:?}")));
    }
    let table = mass_table(&model, count, &eps, ctx.seed)?;
    let subset = density_one_subset(&table, &eta)?;

    let mut rep = Report::new("concentrate", a);
    rep.model(&spec);
    rep.grid("eps", &eps);
    rep.grid("eta", &eta);
    let mut header = vec!["i".to_string(), "lambda".to_string()];
    header.extend(eps.iter().map(|e| format!("mass_eps={e}")));
    header.push("in_S".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    rep.file(
        "concentration.csv",
        csv_table(
            &header,
            table.rows.iter().enumerate().map(|(i, r)| {
                let mut row = vec![(i + 1).to_string(), fmt(r.lambda)];
                row.extend(r.masses.iter().map(|m| fmt(*m)));
                row.push(u8::from(subset.members[i]).to_string());
                row
            }),
        )?,
    );

    let in_range = table.rows.iter().all(|r| r.masses.iter().all(|m| (-1e-12..=1.0 + 1e-8).contains(m)));
    let nested = table.rows.iter().all(|r| r.masses.windows(2).all(|w| w[0] <= w[1] + 1e-12));
    rep.check(Check::holds("mass_range", "0 <= a_i(U) <= 1 for normalized eigenfunctions", in_range));
    rep.check(Check::holds("mass_nested", "a_i(U_m) grows along the exhaustion", nested));
    let (p0, p1) = (prefixes[0], prefixes[1]);
    let decay = a.decay.unwrap_or(0.25);
    let mut cesaro = Vec::new();
    for (level, e) in eps.iter().enumerate() {
        let c = table.cesaro(level);
        let drop = 1.0 - c[p1 - 1] / c[p0 - 1];
        rep.check(
            Check::at_least(
                format!("cesaro_decay@{e}"),
                "Cesaro means of the mass away from the singularity decay",
                drop,
                decay,
            )
            .with_note(format!("mean over {p0}: {}, over {p1}: {}", c[p0 - 1], c[p1 - 1])),
        );
        cesaro.push(c);
    }
    let mut worst: f64 = f64::INFINITY;
    for (m, &i_m) in subset.thresholds.iter().enumerate() {
        let target = 1.0 - 1.0 / (m + 1) as f64;
        for d in &subset.prefix_density[i_m.min(subset.prefix_density.len())..] {
            worst = worst.min(d - target);
        }
    }
    rep.check(Check::at_least(
        "density_one",
        "prefix densities of S are at least 1 - 1/m beyond i_m",
        if worst.is_finite() { worst } else { 0.0 },
        0.0,
    ));
    rep.result("lambda_cut", table.lambda_cut);
    rep.result("thresholds", &subset.thresholds);
    rep.result("partial", subset.partial);
    rep.result("members", subset.members.iter().filter(|m| **m).count());
    rep.result("final_density", subset.prefix_density.last());
    rep.result("restricted_mass", [subset.restricted_mass[p0 - 1], subset.restricted_mass[p1 - 1]]);
    rep.result("cesaro", cesaro.iter().map(|c| [c[p0 - 1], c[p1 - 1]]).collect::<Vec<_>>());
    Ok(rep.finish(ctx))
}
