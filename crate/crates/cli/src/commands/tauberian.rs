use weyllab_core::geometry::volume::gamma_half;
use weyllab_core::models::ModelSpec;
use weyllab_core::weyl::{chi_profile, freud_constants, freud_remainders, log_grid};

use super::heattrace::{expanded_spectrum, model_volume};
use super::{config_err, load_model, Report, TauberianArgs};
use crate::summary::{Check, Outcome};
use crate::Context;

pub fn run(a: &TauberianArgs, ctx: &Context) -> anyhow::Result<Outcome> {
    let (spec, model) = load_model(&a.model, "interval:L=1")?;
    let n = model.dim();
    // geometric bounds: flat interval has K = H = 0, no interior cut locus and boundary injectivity radius L/2
    let (k, h, inj, inj_b) = match &spec {
        ModelSpec::Interval { length, .. } => (
            a.k.unwrap_or(0.0),
            a.h.unwrap_or(0.0),
            a.inj.unwrap_or(f64::INFINITY),
            a.inj_boundary.unwrap_or(length / 2.0),
        ),
        _ => match (a.k, a.h, a.inj, a.inj_boundary) {
            (Some(k), Some(h), Some(i), Some(b)) => (k, h, i, b),
            _ => return Err(config_err("non-interval models need --k, --h, --inj and --inj-boundary")),
        },
    };
    let chi = chi_profile(k, h, inj, inj_b, n)?;
    let lmax = a.lmax.unwrap_or(1e5);
    let lmin = a.lmin.unwrap_or(10.0);
    if !(lmin > 0.0 && lmin < lmax) {
        return Err(config_err(format!("need 0 < lmin < lmax, got {lmin}, {lmax}")));
    }
    let lcut = 2.0 * lmax;
    let eigs = expanded_spectrum(&model, lcut * 1.01)?;
    let vol = model_volume(&spec, &model)?;
    let t_grid = log_grid(1e-7, 10.0, 40);
    let lambda_grid = log_grid(lmin, lcut, 40);
    let at = |cut: f64| {
        let ls: Vec<f64> = lambda_grid.iter().copied().filter(|l| *l <= cut).collect();
        freud_constants(&eigs, cut * 1.0000001, vol, n, &chi, &t_grid, &ls)
    };
    let base = at(lmax)?;
    let doubled = at(lcut)?;

    let mut rep = Report::new("tauberian", a);
    rep.model(&spec);
    rep.grid("t", &t_grid);
    rep.grid("lambda", &lambda_grid);
    rep.result("chi", chi);
    rep.result("constants", base);
    rep.result("constants_doubled", doubled);
    rep.check(Check::holds(
        "freud_finite",
        "finite heat-trace remainder constant gives a finite counting remainder constant",
        base.c_emp.is_finite() && base.big_c_emp.is_finite(),
    ));
    rep.check(
        Check::at_most(
            "freud_stable",
            "the counting remainder constant is stable when lambda_max doubles",
            (doubled.big_c_emp / base.big_c_emp - 1.0).abs(),
            a.stability_tol.unwrap_or(0.2),
        )
        .with_note(format!("C_emp {} at lambda_max, {} at 2 lambda_max", base.big_c_emp, doubled.big_c_emp)),
    );
    rep.check(Check::relative(
        "karamata",
        "Karamata: Gamma(n/2+1) mu(lambda) / lambda^{n/2} -> 1",
        base.karamata_ratio,
        1.0,
        a.karamata_tol.unwrap_or(0.02),
    ));
    // exact power law μ(λ) = λ^{n/2}/Γ(n/2+1), μ̂(t) = t^{−n/2}
    let g = gamma_half(n as u32 + 2);
    let half_n = n as f64 / 2.0;
    let exact = freud_remainders(|l| l.powf(half_n) / g, |t| t.powf(-half_n), n, &chi, &t_grid, &lambda_grid);
    rep.result("power_law_control", exact);
    rep.check(Check::at_most(
        "power_law_zero",
        "an exact power law has vanishing remainders",
        exact.c_emp.max(exact.big_c_emp),
        1e-12,
    ));
    Ok(rep.finish(ctx))
}
