//! Warped products `dx² + f(x)² ĝ` over a fixed fiber.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::frame::CoordRange;
use super::jet::Jet;
use crate::error::{Error, Result};
use crate::svf::{eval_svf, SlowVaryingSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fiber {
    /// Circle parametrized by arclength.
    Circle { length: f64 },
    /// Flat torus with the given side lengths.
    Torus { lengths: Vec<f64> },
    /// Unit round 2-sphere in coordinates (φ, θ).
    Sphere2,
}

impl Fiber {
    pub fn dim(&self) -> usize {
        match self {
            Fiber::Circle { .. } => 1,
            Fiber::Torus { lengths } => lengths.len(),
            Fiber::Sphere2 => 2,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Fiber::Circle { length } => *length,
            Fiber::Torus { lengths } => lengths.iter().product(),
            Fiber::Sphere2 => 4.0 * PI,
        }
    }

    /// Sectional curvature of the fiber metric, `None` when the fiber has no 2-planes.
    pub fn curvature(&self) -> Option<f64> {
        match self {
            Fiber::Circle { .. } => None,
            Fiber::Torus { lengths } if lengths.len() < 2 => None,
            Fiber::Torus { .. } => Some(0.0),
            Fiber::Sphere2 => Some(1.0),
        }
    }

    /// Orthonormal fiber frame in the frame-matrix convention of [`super::frame::FrameField`].
    pub fn frame(&self, z: &[Jet]) -> Vec<Jet> {
        let d = self.dim();
        match self {
            Fiber::Circle { .. } | Fiber::Torus { .. } => {
                (0..d * d).map(|e| Jet::constant(if e / d == e % d { 1.0 } else { 0.0 })).collect()
            }
            Fiber::Sphere2 => vec![Jet::constant(1.0), Jet::constant(0.0), Jet::constant(0.0), z[0].sin().recip()],
        }
    }

    pub fn domain(&self) -> Vec<CoordRange> {
        match self {
            Fiber::Circle { length } => vec![CoordRange::periodic(0.0, *length)],
            Fiber::Torus { lengths } => lengths.iter().map(|l| CoordRange::periodic(0.0, *l)).collect(),
            Fiber::Sphere2 => vec![CoordRange::open(0.2, PI - 0.2), CoordRange::periodic(0.0, 2.0 * PI)],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Fiber::Circle { length } if !(*length > 0.0 && length.is_finite()) => {
                Err(Error::Config(format!("fiber length must be positive, got {length}")))
            }
            Fiber::Torus { lengths } if lengths.is_empty() || lengths.iter().any(|l| !(*l > 0.0)) => {
                Err(Error::Config("torus side lengths must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WarpProfile {
    /// `f = coeff · x^{−exponent}`
    Power { coeff: f64, exponent: f64 },
    /// `f^{n−1} = (2/vol_z) υ′(1/x²) / x³`
    Prescribed { upsilon: SlowVaryingSpec, n: usize, vol_z: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarpedGeometry {
    pub profile: WarpProfile,
    pub fiber: Fiber,
    pub x_max: f64,
}

/// Sectional curvatures of a warped product at one x.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WarpedCurvature {
    /// Fiber planes; absent for one-dimensional fibers.
    pub k_uv: Option<f64>,
    /// Mixed planes spanned by ∂_x and a fiber direction.
    pub k_xu: f64,
    /// Base planes; always zero for a one-dimensional base.
    pub k_xy: f64,
    /// `Hess(δ)(U, U)` for a unit fiber vector U.
    pub hess: f64,
}

impl WarpedGeometry {
    pub fn new(profile: WarpProfile, fiber: Fiber, x_max: f64) -> Result<Self> {
        fiber.validate()?;
        if !(x_max > 0.0 && x_max.is_finite()) {
            return Err(Error::Config(format!("x_max must be positive, got {x_max}")));
        }
        match &profile {
            WarpProfile::Power { coeff, exponent } => {
                if !(*coeff > 0.0) || !exponent.is_finite() {
                    return Err(Error::Config("power warp needs a positive coefficient".into()));
                }
            }
            WarpProfile::Prescribed { n, vol_z, .. } => {
                if *n != fiber.dim() + 1 || !(*vol_z > 0.0) {
                    return Err(Error::Config("prescribed warp is inconsistent with its fiber".into()));
                }
            }
        }
        let g = WarpedGeometry { profile, fiber, x_max };
        let f = g.warp_jet(x_max)[0];
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::Config(format!("warp is not positive at x_max (f = {f})")));
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.fiber.dim() + 1
    }

    pub fn describe(&self) -> String {
        match &self.profile {
            WarpProfile::Power { coeff, exponent } => format!("f={coeff}*x^-{exponent}"),
            WarpProfile::Prescribed { upsilon, n, .. } => format!("prescribed({upsilon},n={n})"),
        }
    }

    /// True when f blows up at x = 0.
    pub fn is_singular(&self) -> bool {
        match &self.profile {
            WarpProfile::Power { exponent, .. } => *exponent > 0.0,
            WarpProfile::Prescribed { .. } => true,
        }
    }

    /// `(f, f′, f″)` without a domain check.
    pub fn warp_jet(&self, x: f64) -> [f64; 3] {
        match &self.profile {
            WarpProfile::Power { coeff, exponent } => {
                let p = *exponent;
                let f = coeff * x.powf(-p);
                [f, -p * f / x, p * (p + 1.0) * f / (x * x)]
            }
            WarpProfile::Prescribed { upsilon, n, vol_z } => {
                let xj = Jet::variable(x, 0);
                let u = xj.powi(-2);
                let v = match eval_svf(upsilon, u.v) {
                    Ok(v) => v,
                    Err(_) => return [f64::NAN; 3],
                };
                let dv = u.compose([v.d1, v.d2, v.d3]);
                let g = dv * xj.powi(-3) * (2.0 / vol_z);
                let f = if *n == 2 { g } else { g.powf(1.0 / (*n as f64 - 1.0)) };
                [f.v, f.g[0], f.h[0][0]]
            }
        }
    }

    pub fn warp(&self, x: f64) -> Result<[f64; 3]> {
        if !(x > 0.0 && x <= self.x_max) {
            return Err(Error::Domain(format!("x = {x} outside the warp interval (0, {}]", self.x_max)));
        }
        Ok(self.warp_jet(x))
    }

    /// Riemannian density `f^{n−1}` per unit fiber volume.
    pub fn density(&self, x: f64) -> f64 {
        self.warp_jet(x)[0].powi(self.fiber.dim() as i32)
    }
}

pub fn warped_sectional(w: &WarpedGeometry, x: f64) -> Result<WarpedCurvature> {
    let [f, df, ddf] = w.warp(x)?;
    let log_d = df / f;
    Ok(WarpedCurvature {
        k_uv: w.fiber.curvature().map(|k| k / (f * f) - log_d * log_d),
        k_xu: -ddf / f,
        k_xy: 0.0,
        hess: log_d,
    })
}
