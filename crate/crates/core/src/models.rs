//! Catalog of singular models, the prescribed-Weyl-law warp and checks of the collar conditions near the singularity.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::catalog::{ArsCylinderFrame, NonRegularFrame, WarpedFrame, WorstCaseFrame};
use crate::geometry::{
    riemann_components, upsilon_volume, warped_sectional, CoordRange, Fiber, FrameField, VolumeDensity, WarpProfile,
    WarpedGeometry,
};
use crate::svf::{eval_svf, Family, SlowVaryingSpec};

const TAU: f64 = 2.0 * PI;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCondition {
    #[default]
    Dirichlet,
    Neumann,
}

fn tau() -> f64 {
    TAU
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Quadratic form `∫ |∂_z u|² + z²|∂_θ u|²` against `dθ dz / |z|` on `z ∈ (−1, 1) \ {0}`.
    GrushinSphere,
    /// `dx² + x^{−2m} dθ²` on `(0, x_max) × S¹_L`.
    ArsCylinder {
        m: u32,
        #[serde(default = "tau")]
        fiber_length: f64,
        #[serde(default)]
        outer: EdgeCondition,
        #[serde(default = "one")]
        x_max: f64,
    },
    Warped {
        profile: WarpProfile,
        fiber: Fiber,
        #[serde(default = "one")]
        x_max: f64,
        #[serde(default)]
        outer: EdgeCondition,
        /// Only used when the warp is regular at x = 0.
        #[serde(default)]
        inner: EdgeCondition,
    },
    PrescribedWeyl {
        upsilon: SlowVaryingSpec,
        n: usize,
        vol_z: f64,
        #[serde(default)]
        outer: EdgeCondition,
    },
    WorstCase {
        k: u32,
    },
    NonRegularExample,
    /// The interval `(0, length)`; a one-dimensional control.
    Interval {
        length: f64,
        #[serde(default)]
        left: EdgeCondition,
        #[serde(default)]
        right: EdgeCondition,
    },
}

/// Eigenvalues of the fiber Laplacian, grouped by value.
#[derive(Clone, Debug, PartialEq)]
pub enum FiberSpectrum {
    /// No fiber (one-dimensional model).
    Point,
    Circle { length: f64 },
    Torus { lengths: Vec<f64> },
    Sphere2,
}

/// One eigenvalue level of the fiber with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberMode {
    pub index: u64,
    pub mu: f64,
    pub multiplicity: u64,
}

impl FiberSpectrum {
    /// All levels with `μ ≤ mu_max`, sorted by μ.
    pub fn levels_below(&self, mu_max: f64) -> Vec<FiberMode> {
        match self {
            FiberSpectrum::Point => vec![FiberMode { index: 0, mu: 0.0, multiplicity: 1 }],
            FiberSpectrum::Circle { length } => {
                let w = TAU / length;
                let kmax = (mu_max.max(0.0).sqrt() / w).floor() as u64;
                (0..=kmax)
                    .map(|k| FiberMode { index: k, mu: (w * k as f64).powi(2), multiplicity: if k == 0 { 1 } else { 2 } })
                    .collect()
            }
            FiberSpectrum::Sphere2 => {
                let mut out = Vec::new();
                let mut l = 0u64;
                while (l * (l + 1)) as f64 <= mu_max {
                    out.push(FiberMode { index: l, mu: (l * (l + 1)) as f64, multiplicity: 2 * l + 1 });
                    l += 1;
                }
                out
            }
            FiberSpectrum::Torus { lengths } => torus_levels(lengths, mu_max),
        }
    }

    /// Levels in increasing order, generated by widening the search window.
    pub fn levels(&self) -> FiberLevels<'_> {
        FiberLevels { spectrum: self, cache: Vec::new(), next: 0, window: 64.0 }
    }
}

fn torus_levels(lengths: &[f64], mu_max: f64) -> Vec<FiberMode> {
    let w: Vec<f64> = lengths.iter().map(|l| TAU / l).collect();
    let mut pts: Vec<f64> = vec![0.0];
    for wi in &w {
        let kmax = (mu_max.max(0.0).sqrt() / wi).floor() as i64;
        let mut next = Vec::new();
        for base in &pts {
            for k in -kmax..=kmax {
                let v = base + (wi * k as f64).powi(2);
                if v <= mu_max {
                    next.push(v);
                }
            }
        }
        pts = next;
    }
    pts.sort_by(f64::total_cmp);
    let mut out: Vec<FiberMode> = Vec::new();
    for v in pts {
        match out.last_mut() {
            // lattice norms are sums of exact squares; merge values equal up to rounding
            Some(last) if (v - last.mu).abs() <= 1e-12 * v.max(1.0) => last.multiplicity += 1,
            _ => out.push(FiberMode { index: out.len() as u64, mu: v, multiplicity: 1 }),
        }
    }
    out
}

/// Iterator over fiber levels in increasing order without an a-priori cap.
pub struct FiberLevels<'a> {
    spectrum: &'a FiberSpectrum,
    cache: Vec<FiberMode>,
    next: usize,
    window: f64,
}

impl Iterator for FiberLevels<'_> {
    type Item = FiberMode;

    fn next(&mut self) -> Option<FiberMode> {
        if matches!(self.spectrum, FiberSpectrum::Point) {
            self.next += 1;
            return (self.next == 1).then_some(FiberMode { index: 0, mu: 0.0, multiplicity: 1 });
        }
        while self.next >= self.cache.len() {
            self.window *= 4.0;
            self.cache = self.spectrum.levels_below(self.window);
        }
        self.next += 1;
        Some(self.cache[self.next - 1])
    }
}

/// Data of the separated one-dimensional problems.
#[derive(Clone, Debug)]
pub struct Separation {
    pub x_lo: f64,
    pub x_hi: f64,
    /// Whether `x_lo` is the metric singularity (then it is truncated with a Dirichlet condition).
    pub singular: bool,
    pub inner: EdgeCondition,
    pub outer: EdgeCondition,
    pub fiber: FiberSpectrum,
    /// Copies of the chart making up the model (two for the Grushin sphere).
    pub sheets: u64,
}

#[derive(Clone, Debug)]
enum Geometry {
    Warped(WarpedGeometry),
    Frame,
    Interval,
}

#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    geometry: Geometry,
    x_max: f64,
    sheets: u64,
    core_volume: f64,
}

fn power_warp(m: u32, fiber: Fiber, x_max: f64) -> Result<WarpedGeometry> {
    WarpedGeometry::new(WarpProfile::Power { coeff: 1.0, exponent: m as f64 }, fiber, x_max)
}

fn check_x_max(x_max: f64) -> Result<()> {
    if !(x_max > 0.0 && x_max <= 1.0) {
        return Err(Error::Config(format!("chart edge x_max must lie in (0, 1], got {x_max}")));
    }
    Ok(())
}

pub fn build_model(spec: ModelSpec) -> Result<Model> {
    let (geometry, x_max, sheets, core_volume) = match &spec {
        ModelSpec::GrushinSphere => (Geometry::Warped(power_warp(1, Fiber::Circle { length: TAU }, 1.0)?), 1.0, 2, 0.0),
        ModelSpec::ArsCylinder { m, fiber_length, x_max, .. } => {
            if *m == 0 {
                return Err(Error::Config("ARS order m must be >= 1".into()));
            }
            check_x_max(*x_max)?;
            let g = power_warp(*m, Fiber::Circle { length: *fiber_length }, *x_max)?;
            (Geometry::Warped(g), *x_max, 1, 0.0)
        }
        ModelSpec::Warped { profile, fiber, x_max, .. } => {
            let g = WarpedGeometry::new(profile.clone(), fiber.clone(), *x_max)?;
            // regular warps may describe any bounded interval, e.g. the flat cylinder over (0, π)
            if g.is_singular() {
                check_x_max(*x_max)?;
            }
            (Geometry::Warped(g), *x_max, 1, 0.0)
        }
        ModelSpec::PrescribedWeyl { upsilon, n, vol_z, .. } => {
            if upsilon.family() == Family::Constant {
                return Err(Error::Config(format!("prescribed Weyl law needs a non-constant profile, got {upsilon}")));
            }
            let g = prescribe_metric(upsilon, *n, *vol_z)?;
            let core = eval_svf(upsilon, upsilon.lambda_min())?.value;
            let x = g.x_max;
            (Geometry::Warped(g), x, 1, core)
        }
        ModelSpec::WorstCase { k } => {
            if *k == 0 {
                return Err(Error::Config("worst-case exponent k must be >= 1".into()));
            }
            (Geometry::Frame, 1.0, 1, 0.0)
        }
        ModelSpec::NonRegularExample => (Geometry::Frame, 1.0, 1, 0.0),
        ModelSpec::Interval { length, .. } => {
            if !(*length > 0.0 && length.is_finite()) {
                return Err(Error::Config(format!("interval length must be positive, got {length}")));
            }
            (Geometry::Interval, *length, 1, 0.0)
        }
    };
    Ok(Model { spec, geometry, x_max, sheets, core_volume })
}

impl Model {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn name(&self) -> String {
        match &self.spec {
            ModelSpec::GrushinSphere => "grushin".into(),
            ModelSpec::ArsCylinder { m, .. } => format!("ars:m={m}"),
            ModelSpec::Warped { .. } => self.warped().map(|w| format!("warped:{}", w.describe())).unwrap_or_default(),
            ModelSpec::PrescribedWeyl { upsilon, n, .. } => format!("prescribed:{upsilon},n={n}"),
            ModelSpec::WorstCase { k } => format!("worst:k={k}"),
            ModelSpec::NonRegularExample => "nonregular".into(),
            ModelSpec::Interval { length, .. } => format!("interval:L={length}"),
        }
    }

    pub fn dim(&self) -> usize {
        match (&self.geometry, &self.spec) {
            (Geometry::Warped(g), _) => g.dim(),
            (_, ModelSpec::WorstCase { .. }) => 3,
            (_, ModelSpec::NonRegularExample) => 2,
            _ => 1,
        }
    }

    /// Outer edge of the chart `(0, x_max)`.
    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn eps0(&self) -> f64 {
        self.x_max / 2.0
    }

    pub fn is_singular(&self) -> bool {
        match &self.geometry {
            Geometry::Warped(g) => g.is_singular(),
            Geometry::Frame => true,
            Geometry::Interval => false,
        }
    }

    pub fn warped(&self) -> Option<&WarpedGeometry> {
        match &self.geometry {
            Geometry::Warped(g) => Some(g),
            _ => None,
        }
    }

    pub fn frame(&self) -> Option<Box<dyn FrameField>> {
        match &self.spec {
            ModelSpec::GrushinSphere => Some(Box::new(ArsCylinderFrame { m: 1, fiber_length: TAU })),
            ModelSpec::ArsCylinder { m, fiber_length, .. } => {
                Some(Box::new(ArsCylinderFrame { m: *m, fiber_length: *fiber_length }))
            }
            ModelSpec::WorstCase { k } => Some(Box::new(WorstCaseFrame { k: *k })),
            ModelSpec::NonRegularExample => Some(Box::new(NonRegularFrame)),
            ModelSpec::Warped { .. } | ModelSpec::PrescribedWeyl { .. } => {
                self.warped().map(|g| Box::new(WarpedFrame { geometry: g.clone() }) as Box<dyn FrameField>)
            }
            ModelSpec::Interval { .. } => None,
        }
    }

    /// `υ(λ) = vol{δ ≥ 1/√λ}`.
    pub fn upsilon(&self, lambda: f64) -> Result<f64> {
        upsilon_volume(self, lambda)
    }

    /// Volume of `{δ ≥ 1/√λ}` inside the chart, i.e. of the part that is discretized.
    pub fn chart_upsilon(&self, lambda: f64) -> Result<f64> {
        Ok(upsilon_volume(self, lambda)? - self.core_volume)
    }

    /// Total volume of the chart `{δ ≥ eps}`.
    pub fn truncated_volume(&self, eps: f64) -> Result<f64> {
        crate::geometry::chart_volume(self, eps)
    }

    pub fn separation(&self) -> Result<Separation> {
        let unsupported = || Error::Unsupported(format!("{} does not separate into fiber modes", self.name()));
        let g = match &self.geometry {
            Geometry::Interval => {
                let ModelSpec::Interval { length, left, right } = &self.spec else { unreachable!() };
                return Ok(Separation {
                    x_lo: 0.0,
                    x_hi: *length,
                    singular: false,
                    inner: *left,
                    outer: *right,
                    fiber: FiberSpectrum::Point,
                    sheets: 1,
                });
            }
            Geometry::Frame => return Err(unsupported()),
            Geometry::Warped(g) => g,
        };
        let fiber = match &g.fiber {
            Fiber::Circle { length } => FiberSpectrum::Circle { length: *length },
            Fiber::Torus { lengths } => FiberSpectrum::Torus { lengths: lengths.clone() },
            Fiber::Sphere2 => FiberSpectrum::Sphere2,
        };
        let (outer, inner) = match &self.spec {
            ModelSpec::GrushinSphere => (EdgeCondition::Neumann, EdgeCondition::Dirichlet),
            ModelSpec::ArsCylinder { outer, .. } | ModelSpec::PrescribedWeyl { outer, .. } => {
                (*outer, EdgeCondition::Dirichlet)
            }
            ModelSpec::Warped { outer, inner, .. } => (*outer, *inner),
            _ => return Err(unsupported()),
        };
        let singular = g.is_singular();
        Ok(Separation {
            x_lo: 0.0,
            x_hi: self.x_max,
            singular,
            inner: if singular { EdgeCondition::Dirichlet } else { inner },
            outer,
            fiber,
            sheets: self.sheets,
        })
    }

    /// Weight `w(x)` of the separated form `∫ (|u′|² + V u²) w dx`.
    pub fn weight(&self, x: f64) -> f64 {
        match &self.geometry {
            Geometry::Warped(g) => g.density(x),
            _ => 1.0,
        }
    }

    /// `q(x)` with mode potential `V_μ = μ q(x)`.
    pub fn mode_coefficient(&self, x: f64) -> f64 {
        match &self.geometry {
            Geometry::Warped(g) => g.warp_jet(x)[0].powi(-2),
            _ => 0.0,
        }
    }

    /// The potential `(√w)″/√w` produced by the ground-state substitution `u = φ/√w`.
    pub fn substituted_potential(&self, x: f64) -> f64 {
        match &self.geometry {
            Geometry::Warped(g) => {
                let [f, d1, d2] = g.warp_jet(x);
                let h = g.fiber.dim() as f64 / 2.0;
                h * (h - 1.0) * (d1 / f).powi(2) + h * d2 / f
            }
            _ => 0.0,
        }
    }

    /// Analytic injectivity-radius annotation, where one is known.
    pub fn injectivity_annotation(&self) -> Option<f64> {
        match &self.spec {
            // non-positively curved with no closed geodesics in the chart
            ModelSpec::ArsCylinder { .. } | ModelSpec::GrushinSphere => Some(f64::INFINITY),
            ModelSpec::Interval { .. } => Some(f64::INFINITY),
            ModelSpec::Warped { fiber: Fiber::Sphere2, .. } => Some(PI),
            _ => None,
        }
    }
}

impl VolumeDensity for Model {
    fn fiber_density(&self, x: f64) -> f64 {
        let s = self.sheets as f64;
        match (&self.geometry, &self.spec) {
            (Geometry::Warped(g), _) => s * g.fiber.volume() * g.density(x),
            // ∫_{−π}^{π} dθ / (x (x² + sin²(θ/2))) in closed form
            (_, ModelSpec::NonRegularExample) => TAU / (x * x * (x * x + 1.0).sqrt()),
            // |det a|⁻¹ = x^{−k} over the box (−1, 1)²
            (_, ModelSpec::WorstCase { k }) => 4.0 * x.powi(-(*k as i32)),
            _ => 1.0,
        }
    }

    fn chart_edge(&self) -> f64 {
        self.x_max
    }

    fn core_volume(&self) -> f64 {
        self.core_volume
    }
}

/// Builds the warp with `f^{n−1} = (2/vol_z) υ′(1/x²)/x³` on `(0, min(1, λ_min^{−1/2})]`.
pub fn prescribe_metric(upsilon: &SlowVaryingSpec, n: usize, vol_z: f64) -> Result<WarpedGeometry> {
    if n < 2 {
        return Err(Error::Config(format!("prescribed Weyl law needs n >= 2, got {n}")));
    }
    if !(vol_z > 0.0 && vol_z.is_finite()) {
        return Err(Error::Config(format!("fiber volume must be positive, got {vol_z}")));
    }
    // υ′ > 0 on λ ≥ λ_min, i.e. on the whole induced x-range
    let t0 = upsilon.lambda_min().ln();
    for j in 0..=4000 {
        let lambda = (t0 + (700.0 - t0) * j as f64 / 4000.0).exp();
        let d1 = eval_svf(upsilon, lambda)?.d1;
        if !(d1 > 0.0) {
            return Err(Error::Monotonicity(format!("υ′({lambda:e}) = {d1:e} for {upsilon}; υ must increase strictly")));
        }
    }
    let fiber = if n == 2 {
        Fiber::Circle { length: vol_z }
    } else {
        Fiber::Torus { lengths: vec![vol_z.powf(1.0 / (n as f64 - 1.0)); n - 1] }
    };
    let x_max = upsilon.lambda_min().sqrt().recip().min(1.0);
    WarpedGeometry::new(WarpProfile::Prescribed { upsilon: upsilon.clone(), n, vol_z }, fiber, x_max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnalyticConstant {
    pub value: Option<f64>,
    pub analytic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub model: String,
    /// `sup |Sec| δ²` over frame planes and the grid.
    pub curvature_constant: f64,
    /// Range of `Sec · δ²` over the grid.
    pub scaled_sectional_min: f64,
    pub scaled_sectional_max: f64,
    pub convex: bool,
    pub max_hess_eigenvalue: f64,
    /// `sup |Hess(δ)| δ`.
    pub hessian_constant: f64,
    /// Extremes of the eigenvalues of `Hess(δ)·δ`.
    pub scaled_hess_min: f64,
    pub scaled_hess_max: f64,
    pub injectivity: AnalyticConstant,
    pub eps0: f64,
    pub grid: Vec<f64>,
    pub samples: usize,
}

const CONVEXITY_TOL: f64 = 1e-10;

fn fiber_samples(domain: &[CoordRange], per_axis: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![Vec::new()];
    for r in domain {
        let step = (r.hi - r.lo) / per_axis as f64;
        let offset = if r.periodic { 0.0 } else { 0.5 };
        let mut next = Vec::new();
        for p in &pts {
            for j in 0..per_axis {
                let mut q = p.clone();
                q.push(r.lo + (j as f64 + offset) * step);
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

/// Samples the curvature and convexity conditions near the singularity on `eps_grid`;
/// violations are reported, not raised.
pub fn verify_assumption_a(model: &Model, eps_grid: &[f64]) -> Result<AssumptionReport> {
    if let Some(e) = eps_grid.iter().find(|e| !(**e > 0.0 && **e < model.x_max())) {
        return Err(Error::Domain(format!("grid point {e} outside (0, {})", model.x_max())));
    }
    let mut sec = (f64::INFINITY, f64::NEG_INFINITY);
    let mut hess = (f64::INFINITY, f64::NEG_INFINITY);
    let mut max_eig = f64::NEG_INFINITY;
    let mut samples = 0;
    if let Some(w) = model.warped() {
        for &x in eps_grid {
            let c = warped_sectional(w, x)?;
            for s in [Some(c.k_xu), c.k_uv, (w.dim() > 2).then_some(c.k_xy)].into_iter().flatten() {
                sec = (sec.0.min(s * x * x), sec.1.max(s * x * x));
            }
            hess = (hess.0.min(c.hess * x), hess.1.max(c.hess * x));
            max_eig = max_eig.max(c.hess);
            samples += 1;
        }
    } else if let Some(frame) = model.frame() {
        let zs = fiber_samples(&frame.fiber_domain(), 16);
        for &x in eps_grid {
            for z in &zs {
                let r = riemann_components(frame.as_ref(), x, z)?;
                let d = r.sec_0i.len();
                for (i, s) in r.sec_0i.iter().enumerate() {
                    sec = (sec.0.min(s * x * x), sec.1.max(s * x * x));
                    for j in 0..d {
                        if j != i {
                            let s = r.sec_ij[i][j];
                            sec = (sec.0.min(s * x * x), sec.1.max(s * x * x));
                        }
                    }
                }
                let e = r.hess_eigenvalues();
                hess = (hess.0.min(e[0] * x), hess.1.max(e[e.len() - 1] * x));
                max_eig = max_eig.max(e[e.len() - 1]);
                samples += 1;
            }
        }
    } else {
        return Err(Error::Unsupported(format!("{} has no curvature view", model.name())));
    }
    Ok(AssumptionReport {
        model: model.name(),
        curvature_constant: sec.0.abs().max(sec.1.abs()),
        scaled_sectional_min: sec.0,
        scaled_sectional_max: sec.1,
        convex: max_eig <= CONVEXITY_TOL,
        max_hess_eigenvalue: max_eig,
        hessian_constant: hess.0.abs().max(hess.1.abs()),
        scaled_hess_min: hess.0,
        scaled_hess_max: hess.1,
        injectivity: AnalyticConstant { value: model.injectivity_annotation(), analytic: true },
        eps0: model.eps0(),
        grid: eps_grid.to_vec(),
        samples,
    })
}

/// `V_eff = (Δδ/2)² + (Δδ/2)′` with `Δδ = (n−1) f′/f`, and whether
/// `V_eff ≥ 3/(4δ²) (1 − 1/log δ⁻¹)` holds at x.
pub fn effective_potential(model: &Model, x: f64) -> Result<(f64, bool)> {
    let w = model
        .warped()
        .ok_or_else(|| Error::Unsupported(format!("{} has no warped-product view", model.name())))?;
    let edge = model.x_max().min((-1.0f64).exp());
    if !(x > 0.0 && x < edge) {
        return Err(Error::Domain(format!("x = {x} outside (0, {edge})")));
    }
    let [f, d1, d2] = w.warp(x)?;
    let k = w.fiber.dim() as f64;
    let half = 0.5 * k * d1 / f;
    let half_prime = 0.5 * k * (d2 / f - (d1 / f).powi(2));
    let v = half * half + half_prime;
    let bound = 3.0 / (4.0 * x * x) * (1.0 - 1.0 / (1.0 / x).ln());
    Ok((v, v >= bound))
}
