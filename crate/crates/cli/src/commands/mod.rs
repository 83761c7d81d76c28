use std::collections::BTreeMap;
use std::f64::consts::PI;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use weyllab_core::discretize::MeshPolicy;
use weyllab_core::geometry::volume::unit_ball_volume;
use weyllab_core::models::{build_model, Model, ModelSpec};
use weyllab_core::weyl::log_grid;

use crate::summary::{version, Check, MeshInfo, Outcome, Summary};
use crate::{Context, ConfigError};

pub mod bracketing;
pub mod concentrate;
pub mod curvature;
pub mod hardy;
pub mod heattrace;
pub mod model;
pub mod prescribe;
pub mod svf;
pub mod tauberian;
pub mod weyl;

fn model_value(s: &str) -> Result<Value, String> {
    Ok(Value::String(s.to_string()))
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CurvatureArgs {
    /// Model shorthand (e.g. worst:k=2), inline JSON or a .json file.
    #[arg(long, value_parser = model_value)]
    pub model: Option<Value>,
    /// Evaluate and print the report at this distance from the singularity.
    #[arg(long)]
    pub x: Option<f64>,
    /// Fiber coordinates for --x (default: centre of the fiber box).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z: Option<Vec<f64>>,
    /// Random points for the closed-form and cross-validation checks.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ModelArgs {
    #[arg(long, value_parser = model_value)]
    pub model: Option<Value>,
    /// Distances at which the bounds are sampled.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default, deny_unknown_fields)]
pub struct WeylArgs {
    #[arg(long, value_parser = model_value)]
    pub model: Option<Value>,
    /// Explicit λ grid; otherwise a log grid from --lmin to --lmax.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub lmin: Option<f64>,
    #[arg(long)]
    pub lmax: Option<f64>,
    #[arg(long)]
    pub per_decade: Option<usize>,
    /// Relative tolerance of the Weyl ratio at λ_max.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Extra tolerance bands `λ=tol`.
    #[arg(long, value_delimiter = ',')]
    pub band: Option<Vec<String>>,
    /// Allowed deviation of the fitted exponent (regularly varying volumes).
    #[arg(long)]
    pub exponent_tol: Option<f64>,
    /// Allowed max/min spread of the normalized ratio (regularly varying volumes).
    #[arg(long)]
    pub band_factor: Option<f64>,
    /// Compare against one mesh refinement.
    #[arg(long)]
    pub refine: Option<bool>,
    #[arg(long)]
    pub x_min: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default, deny_unknown_fields)]
pub struct BracketingArgs {
    #[arg(long, value_parser = model_value)]
    pub model: Option<Value>,
    /// Interior cut points.
    #[arg(long, value_delimiter = ',')]
    pub cuts: Option<Vec<f64>>,
    /// Add the cut 1/(10√λ_max) next to the singularity.
    #[arg(long)]
    pub singular_cut: Option<bool>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    pub lmin: Option<f64>,
    #[arg(long)]
    pub lmax: Option<f64>,
    #[arg(long)]
    pub per_decade: Option<usize>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default, deny_unknown_fields)]
pub struct HardyArgs {
    #[arg(long, value_parser = model_value)]
    pub model: Option<Value>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Truncation sequence of the flat control.
    #[arg(long, value_delimiter = ',')]
    pub x_min: Option<Vec<f64>>,
    /// Relative distance to 1/4 allowed at the last truncation of the flat control.
    #[arg(long)]
    pub control_tol: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default, deny_unknown_fields)]
pub struct HeatTraceArgs {
    #[arg(long, value_parser = model_value)]
    pub model: Option<Value>,
    /// Eigenvalues are computed below this cut.
    #[arg(long)]
    pub lcut: Option<f64>,
    #[arg(long)]
    pub tmin: Option<f64>,
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub per_decade: Option<usize>,
    #[arg(long)]
    pub slope_tol: Option<f64>,
    #[arg(long)]
    pub intercept_tol: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default, deny_unknown_fields)]
pub struct TauberianArgs {
    #[arg(long, value_parser = model_value)]
    pub model: Option<Value>,
    /// Top of the λ grid; the constants are recomputed at twice this value.
    #[arg(long)]
    pub lmax: Option<f64>,
    #[arg(long)]
    pub lmin: Option<f64>,
    /// Sectional curvature bound.
    #[arg(long)]
    pub k: Option<f64>,
    /// Mean curvature bound of the boundary.
    #[arg(long)]
    pub h: Option<f64>,
    /// Injectivity radius (inf allowed).
    #[arg(long)]
    pub inj: Option<f64>,
    /// Boundary injectivity radius (inf allowed).
    #[arg(long)]
    pub inj_boundary: Option<f64>,
    #[arg(long)]
    pub stability_tol: Option<f64>,
    #[arg(long)]
    pub karamata_tol: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PrescribeArgs {
    /// Slowly varying target, e.g. log^2.
    #[arg(long)]
    pub upsilon: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub vol_z: Option<f64>,
    /// Point at which the warp asymptotics are checked.
    #[arg(long)]
    pub x: Option<f64>,
    #[arg(long)]
    pub asymptotic_tol: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrateArgs {
    #[arg(long, value_parser = model_value)]
    pub model: Option<Value>,
    /// Number of eigenfunctions (with multiplicity).
    #[arg(long)]
    pub count: Option<usize>,
    /// Exhaustion levels U_m = {x ≥ ε_m}, strictly decreasing.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Mass thresholds η_m of the density-one construction.
    #[arg(long, value_delimiter = ',')]
    pub eta: Option<Vec<f64>>,
    /// Prefix lengths compared by the Cesàro check.
    #[arg(long, value_delimiter = ',')]
    pub prefixes: Option<Vec<usize>>,
    /// Required relative decrease of the Cesàro mean.
    #[arg(long)]
    pub decay: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SvfArgs {
    /// Functions to evaluate (default: the built-in catalog).
    #[arg(long, value_delimiter = ';')]
    pub upsilon: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Ratio a in υ(aλ)/υ(λ).
    #[arg(long)]
    pub a: Option<f64>,
}

pub(crate) fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub(crate) fn load_model(v: &Option<Value>, default: &str) -> anyhow::Result<(ModelSpec, Model)> {
    let v = v.clone().unwrap_or_else(|| Value::String(default.into()));
    let spec = crate::spec::resolve_model(&v)?;
    let model = build_model(spec.clone())?;
    Ok((spec, model))
}

pub(crate) fn check_increasing(name: &str, grid: &[f64]) -> anyhow::Result<()> {
    if grid.is_empty() {
        return Err(config_err(format!("{name} grid is empty")));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(config_err(format!("{name} grid must be positive and strictly increasing")));
    }
    Ok(())
}

/// Explicit grid, or a log grid with the given defaults.
pub(crate) fn lambda_grid(
    explicit: &Option<Vec<f64>>,
    lmin: Option<f64>,
    lmax: Option<f64>,
    per_decade: Option<usize>,
    default_max: f64,
) -> anyhow::Result<Vec<f64>> {
    let grid = match explicit {
        Some(g) => g.clone(),
        None => {
            let hi = lmax.unwrap_or(default_max);
            let lo = lmin.unwrap_or(hi / 10.0);
            if !(lo > 0.0 && lo < hi) {
                return Err(config_err(format!("need 0 < lmin < lmax, got {lo}, {hi}")));
            }
            log_grid(lo, hi, per_decade.unwrap_or(10))
        }
    };
    check_increasing("lambda", &grid)?;
    Ok(grid)
}

/// `ω_n / (2π)^n`.
pub(crate) fn weyl_constant(n: usize) -> f64 {
    unit_ball_volume(n as u32) / (2.0 * PI).powi(n as i32)
}

pub(crate) fn mesh_info(nodes: usize, depth: f64, policy: &MeshPolicy) -> MeshInfo {
    MeshInfo { nodes, depth, x_min: policy.x_min, rho: policy.rho, h_max: policy.h_max }
}

/// Collects the pieces of a summary.
pub(crate) struct Report {
    command: &'static str,
    config: Value,
    model: Option<Value>,
    pub grids: BTreeMap<String, Vec<f64>>,
    pub mesh: Option<MeshInfo>,
    pub checks: Vec<Check>,
    pub results: Map<String, Value>,
    pub files: Vec<(String, String)>,
    pub stdout: Option<String>,
}

impl Report {
    pub fn new(command: &'static str, config: &impl Serialize) -> Report {
        Report {
            command,
            config: serde_json::to_value(config).unwrap_or(Value::Null),
            model: None,
            grids: BTreeMap::new(),
            mesh: None,
            checks: Vec::new(),
            results: Map::new(),
            files: Vec::new(),
            stdout: None,
        }
    }

    pub fn model(&mut self, spec: &ModelSpec) {
        self.model = serde_json::to_value(spec).ok();
    }

    pub fn grid(&mut self, name: &str, g: &[f64]) {
        self.grids.insert(name.into(), g.to_vec());
    }

    pub fn result(&mut self, key: &str, v: impl Serialize) {
        self.results.insert(key.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn file(&mut self, name: &str, content: String) {
        self.files.push((name.into(), content));
    }

    pub fn finish(self, ctx: &Context) -> Outcome {
        let passed = self.checks.iter().all(|c| c.passed);
        Outcome {
            summary: Summary {
                command: self.command.into(),
                version: version(),
                tag: ctx.tag.clone(),
                config: self.config,
                model: self.model,
                grids: self.grids,
                mesh: self.mesh,
                checks: self.checks,
                results: Value::Object(self.results),
                passed,
            },
            files: self.files,
            stdout: self.stdout,
        }
    }
}
