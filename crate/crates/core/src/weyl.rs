//! Counting functions summed over fiber modes, and the checks built on them.

use std::f64::consts::PI;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{assemble_split, Coefficients, Grading, Mesh, MeshPolicy, Profile, TridiagonalForm};
use crate::eig::{eigenvalues_in, inertia_count, CountingSpectrum, ModeCounts, TaggedEigenvalue};
use crate::error::{Error, Result};
use crate::geometry::volume::{gamma_half, integrate};
use crate::models::{EdgeCondition, FiberMode, FiberSpectrum, Model, ModelSpec, Separation};

/// Logarithmic grid from a to b (inclusive) with the given density.
pub fn log_grid(a: f64, b: f64, per_decade: usize) -> Vec<f64> {
    let n = ((b / a).log10() * per_decade as f64).round().max(1.0) as usize;
    (0..=n).map(|j| a * (b / a).powf(j as f64 / n as f64)).collect()
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !(*v > 0.0 && v.is_finite())) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config(format!("{name} grid must be positive and strictly increasing")));
    }
    Ok(())
}

/// A one-dimensional chart `[lo, hi]` with its edge conditions.
#[derive(Clone, Copy, Debug)]
struct Chart {
    lo: f64,
    hi: f64,
    left: EdgeCondition,
    right: EdgeCondition,
    graded: bool,
}

impl Chart {
    fn of(sep: &Separation, policy: &MeshPolicy) -> Chart {
        Chart {
            lo: if sep.singular { policy.x_min } else { sep.x_lo },
            hi: sep.x_hi,
            left: sep.inner,
            right: sep.outer,
            graded: sep.singular,
        }
    }

    fn mesh(&self, policy: &MeshPolicy, breaks: &[f64]) -> Result<Mesh> {
        let grading = if self.graded { Grading::Geometric { rho: policy.rho } } else { Grading::Uniform };
        Mesh::new(self.lo, self.hi, grading, policy.h_max, breaks)
    }
}

/// Mode-independent form plus the lumped potential shape.
struct ModeStack {
    base: TridiagonalForm,
    shape: Vec<f64>,
}

impl ModeStack {
    fn new(coefficients: &dyn Coefficients, mesh: &Mesh, left: EdgeCondition, right: EdgeCondition) -> Result<Self> {
        let (base, shape) = assemble_split(coefficients, mesh, left, right)?;
        Ok(ModeStack { base, shape })
    }

    fn form(&self, mu: f64) -> TridiagonalForm {
        self.base.shifted(mu, &self.shape)
    }

    fn counts(&self, mu: f64, lambdas: &[f64]) -> Vec<u64> {
        let f = self.form(mu);
        lambdas.iter().map(|l| inertia_count(&f, *l) as u64).collect()
    }
}

const CHUNK: usize = 32;

/// Evaluates `eval` on fiber levels in increasing order until a level whose
/// `key` is zero; since `A + μD` grows with μ, every later level is zero as well.
fn sweep_levels<T: Send>(
    fiber: &FiberSpectrum,
    eval: impl Fn(FiberMode) -> Result<T> + Sync,
    key: impl Fn(&T) -> u64,
) -> Result<Vec<(FiberMode, T)>> {
    let mut out = Vec::new();
    let mut levels = fiber.levels();
    loop {
        let chunk: Vec<FiberMode> = levels.by_ref().take(CHUNK).collect();
        if chunk.is_empty() {
            return Ok(out);
        }
        let results: Vec<Result<T>> = chunk.par_iter().map(|m| eval(*m)).collect();
        for (m, r) in chunk.into_iter().zip(results) {
            let r = r?;
            if key(&r) == 0 {
                return Ok(out);
            }
            out.push((m, r));
        }
    }
}

fn count_modes(
    fiber: &FiberSpectrum,
    sheets: u64,
    stack: &ModeStack,
    lambdas: &[f64],
) -> Result<Vec<ModeCounts>> {
    let swept = sweep_levels(fiber, |m| Ok(stack.counts(m.mu, lambdas)), |c: &Vec<u64>| *c.last().unwrap_or(&0))?;
    Ok(swept
        .into_iter()
        .map(|(m, counts)| ModeCounts { mode: m.index, mu: m.mu, multiplicity: m.multiplicity * sheets, counts })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Refinement {
    pub coarse: u64,
    pub fine: u64,
    pub relative_change: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CountingResult {
    pub spectrum: CountingSpectrum,
    pub refinement: Option<Refinement>,
    pub mesh_nodes: usize,
    pub mesh_depth: f64,
    pub policy: MeshPolicy,
}

const STABLE: f64 = 0.005;
const UNSTABLE: f64 = 0.02;

fn spectrum_at(model: &Model, lambdas: &[f64], policy: &MeshPolicy) -> Result<(CountingSpectrum, Mesh)> {
    let sep = model.separation()?;
    let chart = Chart::of(&sep, policy);
    let mesh = chart.mesh(policy, &[])?;
    let stack = ModeStack::new(model, &mesh, chart.left, chart.right)?;
    let modes = count_modes(&sep.fiber, sep.sheets, &stack, lambdas)?;
    Ok((CountingSpectrum::from_modes(lambdas.to_vec(), modes), mesh))
}

/// `N(λ) = Σ_levels multiplicity · #{discrete eigenvalues < λ}`, optionally checked against one refinement.
pub fn counting_function(
    model: &Model,
    lambdas: &[f64],
    policy: &MeshPolicy,
    refinement_check: bool,
) -> Result<CountingResult> {
    check_grid("lambda", lambdas)?;
    let (spectrum, mesh) = spectrum_at(model, lambdas, policy)?;
    let refinement = if refinement_check {
        let (fine, _) = spectrum_at(model, &lambdas[lambdas.len() - 1..], &policy.refined())?;
        let coarse = *spectrum.total.last().unwrap();
        let fine = fine.total[0];
        let relative_change = (fine as f64 - coarse as f64).abs() / (fine.max(1) as f64);
        if relative_change > UNSTABLE {
            return Err(Error::Resolution(format!(
                "N({}) moved from {coarse} to {fine} ({:.2}%) under refinement of {}",
                lambdas[lambdas.len() - 1],
                100.0 * relative_change,
                model.name()
            )));
        }
        if relative_change > STABLE {
            warn!("refinement changes N by {:.2}% for {}", 100.0 * relative_change, model.name());
        }
        Some(Refinement { coarse, fine, relative_change })
    } else {
        None
    };
    Ok(CountingResult { spectrum, refinement, mesh_nodes: mesh.len(), mesh_depth: mesh.depth(), policy: *policy })
}

/// Forms of each fiber level with at least one eigenvalue below `lambda_cut`, with those eigenvalues.
pub(crate) fn level_forms(
    model: &Model,
    lambda_cut: f64,
    policy: &MeshPolicy,
) -> Result<(Separation, Vec<(FiberMode, TridiagonalForm, Vec<f64>)>)> {
    let sep = model.separation()?;
    let chart = Chart::of(&sep, policy);
    let mesh = chart.mesh(policy, &[])?;
    let stack = ModeStack::new(model, &mesh, chart.left, chart.right)?;
    let tol = 1e-12 * lambda_cut;
    let swept = sweep_levels(
        &sep.fiber,
        |m| {
            let form = stack.form(m.mu);
            let vals: Vec<f64> = eigenvalues_in(&form, -1.0, lambda_cut, tol)?.into_iter().map(|v| v.value).collect();
            Ok((form, vals))
        },
        |r: &(TridiagonalForm, Vec<f64>)| r.1.len() as u64,
    )?;
    Ok((sep, swept.into_iter().map(|(m, (f, v))| (m, f, v)).collect()))
}

/// All eigenvalues below `lambda_cut` with fiber tags.
pub fn eigenvalues_below(model: &Model, lambda_cut: f64, policy: &MeshPolicy) -> Result<Vec<TaggedEigenvalue>> {
    let (sep, levels) = level_forms(model, lambda_cut, policy)?;
    let mut out = Vec::new();
    for (m, _, vals) in levels {
        for value in vals {
            out.push(TaggedEigenvalue { value, mode: m.index, multiplicity: m.multiplicity * sep.sheets });
        }
    }
    out.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.mode.cmp(&b.mode)));
    Ok(out)
}

/// Largest circle-mode index that can contribute an eigenvalue below λ, from the
/// barrier `min_x [(√w)″/√w + μ_k q]`.
pub fn mode_cutoff(model: &Model, lambda: f64) -> Result<u64> {
    let sep = model.separation()?;
    let FiberSpectrum::Circle { length } = sep.fiber else {
        return Err(Error::Unsupported(format!("mode cutoff needs a circle fiber, {} has none", model.name())));
    };
    let omega = 2.0 * PI / length;
    let m = match model.spec() {
        ModelSpec::ArsCylinder { m, .. } => Some(*m as f64),
        ModelSpec::GrushinSphere => Some(1.0),
        _ => None,
    };
    if let Some(m) = m {
        // min of a/x² + ξ² x^{2m} is (1 + 1/m) a (m ξ²/a)^{1/(m+1)}
        let a = m * (m + 2.0) / 4.0;
        let xi = ((a / m) * (lambda / ((1.0 + 1.0 / m) * a)).powf(m + 1.0)).sqrt();
        return Ok((xi / omega).ceil() as u64);
    }
    let grid = log_grid(1e-8_f64.min(sep.x_hi / 10.0), sep.x_hi, 200);
    let barrier = |k: u64| {
        let mu = (omega * k as f64).powi(2);
        grid.iter().map(|x| model.substituted_potential(*x) + mu * model.mode_coefficient(*x)).fold(f64::INFINITY, f64::min)
    };
    let (mut lo, mut hi) = (0u64, 1u64);
    while barrier(hi) <= lambda {
        lo = hi;
        hi *= 2;
        if hi > 1 << 40 {
            return Err(Error::Unsupported(format!("no mode barrier for {} at lambda = {lambda}", model.name())));
        }
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if barrier(mid) <= lambda {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + 1)
}

/// `N(λ) / (λ^{n/2} υ(λ))` with υ the volume of the discretized chart.
pub fn weyl_ratio(cs: &CountingSpectrum, model: &Model) -> Result<Vec<f64>> {
    let half_n = model.dim() as f64 / 2.0;
    cs.lambdas
        .iter()
        .zip(&cs.total)
        .map(|(l, n)| Ok(*n as f64 / (l.powf(half_n) * model.chart_upsilon(*l)?)))
        .collect()
}

/// Least-squares slope of `log N` against `log λ`.
pub fn fitted_exponent(lambdas: &[f64], counts: &[u64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        lambdas.iter().zip(counts).filter(|(_, c)| **c > 0).map(|(l, c)| (l.ln(), (*c as f64).ln())).collect();
    line_fit(&pts).0
}

/// `(slope, intercept, rms residual)`.
fn line_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    (slope, intercept, rms)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BracketRow {
    pub lambda: f64,
    pub lower: u64,
    pub n: u64,
    pub upper: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BracketingReport {
    pub cuts: Vec<f64>,
    pub rows: Vec<BracketRow>,
    /// Dirichlet counts per piece, indexed `[piece][λ]`.
    pub piece_lower: Vec<Vec<u64>>,
    /// Neumann counts per piece.
    pub piece_upper: Vec<Vec<u64>>,
    pub violations: Vec<String>,
}

struct LevelBrackets {
    n: Vec<u64>,
    lower: Vec<Vec<u64>>,
    upper: Vec<Vec<u64>>,
}

/// Dirichlet–Neumann bracketing with pieces split at `cuts`. The pieces share the global mesh,
/// so lower pieces span a subspace and upper pieces a superspace of the global discrete space.
pub fn bracketing_check(model: &Model, cuts: &[f64], lambdas: &[f64], policy: &MeshPolicy) -> Result<BracketingReport> {
    check_grid("lambda", lambdas)?;
    let sep = model.separation()?;
    let chart = Chart::of(&sep, policy);
    if cuts.iter().any(|c| !(*c > chart.lo && *c < chart.hi)) || cuts.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Config(format!("cuts must be increasing and inside ({}, {})", chart.lo, chart.hi)));
    }
    let mesh = chart.mesh(policy, cuts)?;
    let global = ModeStack::new(model, &mesh, chart.left, chart.right)?;
    let mut bounds = vec![0];
    for c in cuts {
        bounds.push(mesh.node_index(*c).expect("cuts are mesh nodes"));
    }
    bounds.push(mesh.len() - 1);
    let mut lower_stacks = Vec::new();
    let mut upper_stacks = Vec::new();
    for (p, w) in bounds.windows(2).enumerate() {
        let sub = mesh.slice(w[0], w[1]);
        lower_stacks.push(ModeStack::new(model, &sub, EdgeCondition::Dirichlet, EdgeCondition::Dirichlet)?);
        // the singular truncation keeps its Dirichlet condition; every other piece end is free
        let left = if p == 0 && sep.singular { EdgeCondition::Dirichlet } else { EdgeCondition::Neumann };
        upper_stacks.push(ModeStack::new(model, &sub, left, EdgeCondition::Neumann)?);
    }
    let swept = sweep_levels(
        &sep.fiber,
        |m| {
            Ok(LevelBrackets {
                n: global.counts(m.mu, lambdas),
                lower: lower_stacks.iter().map(|s| s.counts(m.mu, lambdas)).collect(),
                upper: upper_stacks.iter().map(|s| s.counts(m.mu, lambdas)).collect(),
            })
        },
        |b: &LevelBrackets| b.upper.iter().map(|c| *c.last().unwrap()).sum(),
    )?;
    let pieces = bounds.len() - 1;
    let nl = lambdas.len();
    let mut piece_lower = vec![vec![0u64; nl]; pieces];
    let mut piece_upper = vec![vec![0u64; nl]; pieces];
    let mut n = vec![0u64; nl];
    for (m, b) in &swept {
        let mult = m.multiplicity * sep.sheets;
        for j in 0..nl {
            n[j] += mult * b.n[j];
            for p in 0..pieces {
                piece_lower[p][j] += mult * b.lower[p][j];
                piece_upper[p][j] += mult * b.upper[p][j];
            }
        }
    }
    let mut rows = Vec::with_capacity(nl);
    let mut violations = Vec::new();
    for j in 0..nl {
        let lower = piece_lower.iter().map(|p| p[j]).sum();
        let upper = piece_upper.iter().map(|p| p[j]).sum();
        if !(lower <= n[j] && n[j] <= upper) {
            violations.push(format!("lambda = {}: {lower} <= {} <= {upper} fails", lambdas[j], n[j]));
        }
        rows.push(BracketRow { lambda: lambdas[j], lower, n: n[j], upper });
    }
    Ok(BracketingReport { cuts: cuts.to_vec(), rows, piece_lower, piece_upper, violations })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HardyVariant {
    /// Dirichlet at both ends of `(x_min, ε)`; the C_c^∞ inequality.
    CompactSupport,
    /// Free at ε.
    H1,
}

impl HardyVariant {
    pub fn bound(&self) -> f64 {
        match self {
            HardyVariant::CompactSupport => 0.25,
            HardyVariant::H1 => 0.125,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            HardyVariant::CompactSupport => "compact-support",
            HardyVariant::H1 => "h1",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StripValue {
    pub value: f64,
    pub refined: f64,
    pub relative_change: f64,
}

fn smallest_eigenvalue(form: &TridiagonalForm) -> Result<f64> {
    let mut hi = 1.0;
    while inertia_count(form, hi) == 0 {
        hi *= 4.0;
        if !hi.is_finite() {
            return Err(Error::Resolution("no eigenvalue found below overflow".into()));
        }
    }
    let e = eigenvalues_in(form, -1e-300, hi, 1e-12 * hi)?;
    Ok(e[0].value)
}

fn strip_problem<F>(model: &Model, eps: f64, policy: &MeshPolicy, build: F) -> Result<StripValue>
where
    F: Fn(&Mesh) -> Result<TridiagonalForm>,
{
    let value_at = |p: &MeshPolicy| -> Result<f64> {
        let mesh = Mesh::new(p.x_min, eps, Grading::Geometric { rho: p.rho }, p.h_max, &[])?;
        smallest_eigenvalue(&build(&mesh)?)
    };
    let value = value_at(policy)?;
    let refined = value_at(&policy.refined())?;
    let relative_change = (value - refined).abs() / refined.abs().max(f64::MIN_POSITIVE);
    if relative_change > UNSTABLE {
        return Err(Error::Resolution(format!(
            "strip value on (x_min, {eps}) of {} moved by {:.2}% under refinement",
            model.name(),
            100.0 * relative_change
        )));
    }
    Ok(StripValue { value, refined, relative_change })
}

fn check_strip_eps(model: &Model, eps: f64, policy: &MeshPolicy) -> Result<()> {
    if !(eps > policy.x_min) {
        return Err(Error::Domain(format!("eps = {eps} is below the truncation {}", policy.x_min)));
    }
    if model.is_singular() && eps > model.eps0() / 2.0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("eps = {eps} exceeds eps0/2 = {} for {}", model.eps0() / 2.0, model.name())));
    }
    if eps > model.x_max() {
        return Err(Error::Domain(format!("eps = {eps} outside the chart of {}", model.name())));
    }
    Ok(())
}

/// Minimum of `∫|u′|² dμ / ∫ u²/δ² dμ` over the zero fiber mode on `(x_min, ε)`;
/// higher modes only add a non-negative potential.
pub fn hardy_rayleigh(model: &Model, eps: f64, variant: HardyVariant, policy: &MeshPolicy) -> Result<StripValue> {
    check_strip_eps(model, eps, policy)?;
    let right = match variant {
        HardyVariant::CompactSupport => EdgeCondition::Dirichlet,
        HardyVariant::H1 => EdgeCondition::Neumann,
    };
    strip_problem(model, eps, policy, |mesh| {
        let (mut form, _) = assemble_split(model, mesh, EdgeCondition::Dirichlet, right)?;
        for (m, x) in form.mass.iter_mut().zip(&form.nodes) {
            *m /= x * x;
        }
        Ok(form)
    })
}

/// Smallest eigenvalue of the strip `(0, ε)` with a free edge at ε.
/// Singular charts are truncated at `x_min`; regular ones keep a free edge at 0.
pub fn strip_gap(model: &Model, eps: f64, policy: &MeshPolicy) -> Result<StripValue> {
    check_strip_eps(model, eps, policy)?;
    if !model.is_singular() {
        // constants are admissible on a regular Neumann strip
        return Ok(StripValue { value: 0.0, refined: 0.0, relative_change: 0.0 });
    }
    strip_problem(model, eps, policy, |mesh| {
        Ok(assemble_split(model, mesh, EdgeCondition::Dirichlet, EdgeCondition::Neumann)?.0)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StripCount {
    pub neumann: u64,
    pub dirichlet: u64,
    /// Neumann count of the frozen metric at `λ / κ`.
    pub frozen: u64,
    /// `κ` with `Q_g / ‖·‖²_g ≥ κ Q_frozen / ‖·‖²_frozen` on the strip.
    pub comparison_factor: f64,
}

/// Eigenvalue counts on `[ε₁, ε₂]` against the metric frozen at ε₁.
pub fn strip_count(model: &Model, e1: f64, e2: f64, lambda: f64, policy: &MeshPolicy) -> Result<StripCount> {
    let sep = model.separation()?;
    if !(e1 > 0.0 && e1 < e2 && e2 <= sep.x_hi) {
        return Err(Error::Domain(format!("need 0 < eps1 < eps2 <= {}, got ({e1}, {e2})", sep.x_hi)));
    }
    if model.is_singular() && e2 > model.eps0() / 2.0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("eps2 = {e2} exceeds eps0/2 = {}", model.eps0() / 2.0)));
    }
    // thin strips still get a few interior nodes
    let h = policy.h_max.min((e2 - e1) / 8.0);
    let mesh = Mesh::new(e1, e2, Grading::Geometric { rho: policy.rho }, h, &[])?;
    let (w0, q0) = (model.weight(e1), model.mode_coefficient(e1));
    let frozen_coeffs = Profile { weight: move |_| w0, coefficient: move |_| q0 };
    let probes: Vec<f64> = mesh.nodes.iter().copied().chain(mesh.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1]))).collect();
    let rho_w: Vec<f64> = probes.iter().map(|x| model.weight(*x) / w0).collect();
    let min_w = rho_w.iter().copied().fold(f64::INFINITY, f64::min);
    let max_w = rho_w.iter().copied().fold(0.0, f64::max);
    let min_qw = if q0 > 0.0 {
        probes.iter().zip(&rho_w).map(|(x, r)| r * model.mode_coefficient(*x) / q0).fold(f64::INFINITY, f64::min)
    } else {
        f64::INFINITY
    };
    let kappa = min_w.min(min_qw) / max_w;
    let neumann = ModeStack::new(model, &mesh, EdgeCondition::Neumann, EdgeCondition::Neumann)?;
    let dirichlet = ModeStack::new(model, &mesh, EdgeCondition::Dirichlet, EdgeCondition::Dirichlet)?;
    let frozen = ModeStack::new(&frozen_coeffs, &mesh, EdgeCondition::Neumann, EdgeCondition::Neumann)?;
    let swept = sweep_levels(
        &sep.fiber,
        |m| {
            Ok([
                neumann.counts(m.mu, &[lambda])[0],
                dirichlet.counts(m.mu, &[lambda])[0],
                frozen.counts(m.mu, &[lambda / kappa])[0],
            ])
        },
        |c: &[u64; 3]| c[2].max(c[0]),
    )?;
    let mut out = StripCount { neumann: 0, dirichlet: 0, frozen: 0, comparison_factor: kappa };
    for (m, c) in swept {
        let mult = m.multiplicity * sep.sheets;
        out.neumann += mult * c[0];
        out.dirichlet += mult * c[1];
        out.frozen += mult * c[2];
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeatTraceRow {
    pub t: f64,
    pub z: f64,
    /// `(4πt)^{n/2} Z(t) / vol − 1`
    pub scaled_remainder: f64,
    /// Estimated contribution of eigenvalues above the cut, relative to Z.
    pub tail: f64,
    pub admissible: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RemainderFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub window: (f64, f64),
    pub points: usize,
    /// The remainder is below round-off over the window, so no power law is fitted.
    pub rejected: bool,
}

/// Weyl growth `N ≈ C λ^α` fitted on the upper part of a complete eigenvalue list.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailModel {
    pub c: f64,
    pub alpha: f64,
    pub lambda_cut: f64,
}

impl TailModel {
    pub fn fit(eigs: &[f64], lambda_cut: f64) -> Result<TailModel> {
        let below: Vec<f64> = eigs.iter().copied().filter(|l| *l < lambda_cut).collect();
        if below.len() < 8 {
            return Err(Error::InsufficientSpectrum(format!("only {} eigenvalues below {lambda_cut}", below.len())));
        }
        let count = |l: f64| below.partition_point(|v| *v <= l) as f64;
        let pts: Vec<(f64, f64)> = log_grid(lambda_cut / 4.0, lambda_cut, 20)
            .into_iter()
            .filter(|l| count(*l) > 0.0)
            .map(|l| (l.ln(), count(l).ln()))
            .collect();
        let (alpha, intercept, _) = line_fit(&pts);
        Ok(TailModel { c: intercept.exp(), alpha, lambda_cut })
    }

    /// `∫_{λ_cut}^∞ e^{−λt} dN` for the fitted growth.
    pub fn tail(&self, t: f64) -> f64 {
        let (c, a, l0) = (self.c, self.alpha, self.lambda_cut);
        let q = integrate(&|l: f64| c * a * l.powf(a - 1.0) * (-(l - l0) * t).exp(), l0, l0 + 60.0 / t, 1e-10);
        q.value * (-l0 * t).exp()
    }
}

pub const TAIL_TOLERANCE: f64 = 1e-6;

fn sorted_sum_exp(eigs: &[f64], t: f64) -> f64 {
    // descending order adds small terms first
    eigs.iter().rev().map(|l| (-l * t).exp()).sum()
}

/// `Z(t)` over `t_grid` and a log–log fit of the scaled remainder inside `window`.
pub fn heat_trace(
    eigs: &[f64],
    lambda_cut: f64,
    t_grid: &[f64],
    vol: f64,
    n: usize,
    window: (f64, f64),
) -> Result<(Vec<HeatTraceRow>, RemainderFit)> {
    check_grid("t", t_grid)?;
    let tail = TailModel::fit(eigs, lambda_cut)?;
    let below: Vec<f64> = eigs.iter().copied().filter(|l| *l < lambda_cut).collect();
    let half_n = n as f64 / 2.0;
    let rows: Vec<HeatTraceRow> = t_grid
        .iter()
        .map(|&t| {
            let z = sorted_sum_exp(&below, t);
            let tail = tail.tail(t) / z;
            HeatTraceRow {
                t,
                z,
                scaled_remainder: (4.0 * PI * t).powf(half_n) * z / vol - 1.0,
                tail,
                admissible: tail < TAIL_TOLERANCE && t >= window.0 && t <= window.1,
            }
        })
        .collect();
    let used: Vec<&HeatTraceRow> = rows.iter().filter(|r| r.admissible).collect();
    if used.len() < 3 {
        return Err(Error::InsufficientSpectrum(format!(
            "{} admissible t values in [{}, {}] after tail filtering",
            used.len(),
            window.0,
            window.1
        )));
    }
    let w = (used[0].t, used[used.len() - 1].t);
    let rejected = used.iter().all(|r| r.scaled_remainder.abs() < 1e-9);
    let fit = if rejected {
        RemainderFit { slope: f64::NAN, intercept: f64::NAN, residual: f64::NAN, window: w, points: used.len(), rejected }
    } else {
        let pts: Vec<(f64, f64)> = used.iter().map(|r| (r.t.ln(), r.scaled_remainder.abs().ln())).collect();
        let (slope, intercept, residual) = line_fit(&pts);
        RemainderFit { slope, intercept, residual, window: w, points: used.len(), rejected }
    };
    Ok((rows, fit))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChiProfile {
    pub lambda0: f64,
    pub sqrt_t0: f64,
    pub n: usize,
}

impl ChiProfile {
    pub fn chi(&self, lambda: f64) -> f64 {
        let r = lambda / self.lambda0;
        if lambda >= self.lambda0 {
            r.sqrt()
        } else {
            r.powf(self.n as f64 / 2.0)
        }
    }
}

/// `√t₀ = min{inj, inj_∂/2, π/√K, 1/H}` with `1/0 = ∞`, and `λ₀ = 1/t₀`.
pub fn chi_profile(k: f64, h: f64, inj: f64, inj_boundary: f64, n: usize) -> Result<ChiProfile> {
    if !(k >= 0.0 && h >= 0.0 && inj > 0.0 && inj_boundary > 0.0) {
        return Err(Error::Config(format!("need K, H >= 0 and positive radii (K={k}, H={h}, inj={inj}, inj_b={inj_boundary})")));
    }
    let recip = |v: f64| if v == 0.0 { f64::INFINITY } else { 1.0 / v };
    let sqrt_t0 = inj.min(inj_boundary / 2.0).min(PI * recip(k.sqrt())).min(recip(h));
    if !sqrt_t0.is_finite() {
        return Err(Error::DegenerateProfile("every geometric bound is infinite, so lambda0 = 0".into()));
    }
    Ok(ChiProfile { lambda0: 1.0 / (sqrt_t0 * sqrt_t0), sqrt_t0, n })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FreudConstants {
    /// `sup_t χ(1/t) |t^{n/2} μ̂(t) − 1|`
    pub c_emp: f64,
    pub c_at: f64,
    /// `sup_λ log(χ(λ) + 1) |Γ(n/2+1) μ(λ)/λ^{n/2} − 1|`
    pub big_c_emp: f64,
    pub big_c_at: f64,
    /// `Γ(n/2+1) μ(λ)/λ^{n/2}` at the top of the λ grid.
    pub karamata_ratio: f64,
}

/// Empirical Freud constants for a measure μ with Laplace transform μ̂.
pub fn freud_remainders(
    mu: impl Fn(f64) -> f64,
    mu_hat: impl Fn(f64) -> f64,
    n: usize,
    chi: &ChiProfile,
    t_grid: &[f64],
    lambda_grid: &[f64],
) -> FreudConstants {
    let half_n = n as f64 / 2.0;
    let g = gamma_half(n as u32 + 2);
    let (mut c_emp, mut c_at) = (0.0, f64::NAN);
    for &t in t_grid {
        let v = chi.chi(1.0 / t) * (t.powf(half_n) * mu_hat(t) - 1.0).abs();
        if v > c_emp || c_at.is_nan() {
            c_emp = v;
            c_at = t;
        }
    }
    let (mut big, mut big_at) = (0.0, f64::NAN);
    for &l in lambda_grid {
        let v = (chi.chi(l) + 1.0).ln() * (g * mu(l) / l.powf(half_n) - 1.0).abs();
        if v > big || big_at.is_nan() {
            big = v;
            big_at = l;
        }
    }
    let top = lambda_grid.last().copied().unwrap_or(f64::NAN);
    FreudConstants { c_emp, c_at, big_c_emp: big, big_c_at: big_at, karamata_ratio: g * mu(top) / top.powf(half_n) }
}

/// Freud constants of `μ = (4π)^{n/2} N / vol` built from a complete eigenvalue list.
/// The t grid is restricted to the tail-admissible window and the λ grid to `λ < λ_cut`.
pub fn freud_constants(
    eigs: &[f64],
    lambda_cut: f64,
    vol: f64,
    n: usize,
    chi: &ChiProfile,
    t_grid: &[f64],
    lambda_grid: &[f64],
) -> Result<FreudConstants> {
    let tail = TailModel::fit(eigs, lambda_cut)?;
    let mut below: Vec<f64> = eigs.iter().copied().filter(|l| *l < lambda_cut).collect();
    below.sort_by(f64::total_cmp);
    let scale = (4.0 * PI).powf(n as f64 / 2.0) / vol;
    let ts: Vec<f64> =
        t_grid.iter().copied().filter(|t| tail.tail(*t) < TAIL_TOLERANCE * sorted_sum_exp(&below, *t)).collect();
    let ls: Vec<f64> = lambda_grid.iter().copied().filter(|l| *l < lambda_cut).collect();
    if ts.is_empty() || ls.is_empty() {
        return Err(Error::InsufficientSpectrum("no admissible t or lambda points".into()));
    }
    let mu = |l: f64| scale * below.partition_point(|v| *v <= l) as f64;
    let mu_hat = |t: f64| scale * sorted_sum_exp(&below, t);
    Ok(freud_remainders(mu, mu_hat, n, chi, &ts, &ls))
}

/// Analytic bounds of a truncated model `M_ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BuserBounds {
    pub inj: f64,
    pub inj_boundary: f64,
    pub k: f64,
    pub h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BuserRow {
    pub eps: f64,
    pub volume: f64,
    pub constant: f64,
    pub at_lambda: f64,
}

/// Smallest C with `N(λ) ≤ C vol (λ^{n/2} + inj⁻ⁿ + inj_∂⁻ⁿ + K^{n/2} + Hⁿ)` on the grid,
/// for the model truncated at each ε with a Dirichlet edge there.
pub fn buser_check(
    model: &Model,
    lambdas: &[f64],
    eps: &[f64],
    bounds: impl Fn(f64) -> BuserBounds,
    policy: &MeshPolicy,
) -> Result<Vec<BuserRow>> {
    check_grid("lambda", lambdas)?;
    let sep = model.separation()?;
    let n = model.dim() as f64;
    let mut rows = Vec::new();
    for &e in eps {
        let chart = Chart { lo: e, hi: sep.x_hi, left: EdgeCondition::Dirichlet, right: sep.outer, graded: sep.singular };
        let mesh = chart.mesh(policy, &[])?;
        let stack = ModeStack::new(model, &mesh, chart.left, chart.right)?;
        let cs = CountingSpectrum::from_modes(lambdas.to_vec(), count_modes(&sep.fiber, sep.sheets, &stack, lambdas)?);
        let volume = model.truncated_volume(e)?;
        let b = bounds(e);
        let inv = |r: f64| if r.is_infinite() { 0.0 } else { r.powf(-n) };
        let geometric = inv(b.inj) + inv(b.inj_boundary) + b.k.powf(n / 2.0) + b.h.powf(n);
        let (mut constant, mut at_lambda) = (0.0, lambdas[0]);
        for (l, c) in lambdas.iter().zip(&cs.total) {
            let v = *c as f64 / (volume * (l.powf(n / 2.0) + geometric));
            if v > constant {
                constant = v;
                at_lambda = *l;
            }
        }
        rows.push(BuserRow { eps: e, volume, constant, at_lambda });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Fiber, WarpProfile};
    use crate::models::build_model;

    fn interval(length: f64, bc: EdgeCondition) -> Model {
        build_model(ModelSpec::Interval { length, left: bc, right: bc }).unwrap()
    }

    fn ars(m: u32) -> Model {
        build_model(ModelSpec::ArsCylinder { m, fiber_length: 2.0 * PI, outer: EdgeCondition::Dirichlet, x_max: 1.0 })
            .unwrap()
    }

    #[test]
    fn interval_counts() {
        let m = interval(PI, EdgeCondition::Dirichlet);
        let r = counting_function(&m, &[10.0], &MeshPolicy::for_lambda_max(10.0), true).unwrap();
        assert_eq!(r.spectrum.total, vec![3]);
        assert!(r.refinement.unwrap().relative_change == 0.0);
    }

    #[test]
    fn flat_cylinder_lattice() {
        let m = build_model(ModelSpec::Warped {
            profile: WarpProfile::Power { coeff: 1.0, exponent: 0.0 },
            fiber: Fiber::Circle { length: 2.0 * PI },
            x_max: PI,
            outer: EdgeCondition::Dirichlet,
            inner: EdgeCondition::Dirichlet,
        })
        .unwrap();
        let grid = [7.5, 10.5, 30.5];
        let r = counting_function(&m, &grid, &MeshPolicy::for_lambda_max(100.0), false).unwrap();
        for (l, n) in grid.iter().zip(&r.spectrum.total) {
            let mut exact = 0;
            for j in 1..20i64 {
                for k in -20i64..=20 {
                    if ((j * j + k * k) as f64) < *l {
                        exact += 1;
                    }
                }
            }
            assert_eq!(*n, exact, "lambda = {l}");
        }
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(mode_cutoff(&ars(1), 100.0).unwrap(), 58);
        let m2 = mode_cutoff(&ars(2), 100.0).unwrap();
        // min_x 2/x² + k² x⁴ at k = m2 lies just above 100 after rounding up
        let barrier = |k: f64| {
            let x = (1.0 / (k * k)).powf(1.0 / 6.0);
            2.0 / (x * x) + k * k * x.powi(4)
        };
        assert!(barrier(m2 as f64) > 100.0 && barrier(m2 as f64 - 1.0) <= 100.0);
    }

    #[test]
    fn counts_vanish_beyond_cutoff() {
        let m = ars(1);
        let lambda = 100.0;
        let r = counting_function(&m, &[lambda], &MeshPolicy::for_lambda_max(lambda), false).unwrap();
        let kmax = mode_cutoff(&m, lambda).unwrap();
        assert!(r.spectrum.modes.iter().all(|c| c.mode <= kmax));
    }

    #[test]
    fn bracketing_interval_example() {
        let m = interval(1.0, EdgeCondition::Dirichlet);
        let r = bracketing_check(&m, &[0.5], &[50.0], &MeshPolicy::for_lambda_max(400.0)).unwrap();
        assert_eq!(r.rows[0], BracketRow { lambda: 50.0, lower: 2, n: 2, upper: 4 });
        assert!(r.violations.is_empty());
    }

    #[test]
    fn chi_examples() {
        let c = chi_profile(4.0, 1.0, f64::INFINITY, f64::INFINITY, 2).unwrap();
        assert_eq!(c.lambda0, 1.0);
        assert!((c.chi(4.0) - 2.0).abs() < 1e-15);
        assert_eq!(chi_profile(0.0, 0.0, 1.0, f64::INFINITY, 3).unwrap().lambda0, 1.0);
        assert!(matches!(chi_profile(0.0, 0.0, f64::INFINITY, f64::INFINITY, 2), Err(Error::DegenerateProfile(_))));
        let c = chi_profile(0.3, 2.0, 0.7, 1.1, 3).unwrap();
        assert!((c.chi(c.lambda0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_power_law_has_no_remainder() {
        let n = 3usize;
        let g = gamma_half(n as u32 + 2);
        let chi = chi_profile(1.0, 0.0, f64::INFINITY, f64::INFINITY, n).unwrap();
        let r = freud_remainders(
            |l| l.powf(1.5) / g,
            |t| t.powf(-1.5),
            n,
            &chi,
            &log_grid(1e-3, 1.0, 40),
            &log_grid(1.0, 1e4, 40),
        );
        assert!(r.c_emp < 1e-13 && r.big_c_emp < 1e-13, "{r:?}");
    }

    #[test]
    fn single_eigenvalue_trace() {
        let eigs: Vec<f64> = (1..=40).map(|j| j as f64).collect();
        let t = [0.5, 1.0, 2.0];
        let (rows, _) = heat_trace(&eigs, 40.5, &t, 1.0, 1, (0.5, 2.0)).unwrap();
        let z: f64 = (1..=40).map(|j| (-(j as f64)).exp()).sum();
        assert!((rows[1].z - z).abs() < 1e-15);
    }

    #[test]
    fn grid_validation() {
        let m = interval(1.0, EdgeCondition::Dirichlet);
        let p = MeshPolicy::for_lambda_max(10.0);
        assert!(matches!(counting_function(&m, &[], &p, false), Err(Error::Config(_))));
        assert!(matches!(counting_function(&m, &[3.0, 2.0], &p, false), Err(Error::Config(_))));
    }

    #[test]
    fn strip_gap_of_regular_strip_is_zero() {
        let m = build_model(ModelSpec::Warped {
            profile: WarpProfile::Power { coeff: 1.0, exponent: 0.0 },
            fiber: Fiber::Circle { length: 2.0 * PI },
            x_max: 1.0,
            outer: EdgeCondition::Dirichlet,
            inner: EdgeCondition::Dirichlet,
        })
        .unwrap();
        assert_eq!(strip_gap(&m, 0.1, &MeshPolicy::for_lambda_max(100.0)).unwrap().value, 0.0);
    }
}
