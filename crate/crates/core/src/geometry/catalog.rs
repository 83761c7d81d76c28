//! Concrete frame fields.

use std::f64::consts::PI;

use super::frame::{CoordRange, FrameField};
use super::jet::Jet;
use super::warped::WarpedGeometry;

const TAU: f64 = 2.0 * PI;

/// Flat space with the coordinate frame.
#[derive(Clone, Debug)]
pub struct Euclidean {
    pub n: usize,
}

impl FrameField for Euclidean {
    fn dim(&self) -> usize {
        self.n
    }

    fn matrix(&self, _x: Jet, _z: &[Jet]) -> Vec<Jet> {
        let d = self.n - 1;
        (0..d * d).map(|e| Jet::constant(if e / d == e % d { 1.0 } else { 0.0 })).collect()
    }

    fn name(&self) -> String {
        format!("euclidean:n={}", self.n)
    }

    fn fiber_domain(&self) -> Vec<CoordRange> {
        vec![CoordRange::open(-1.0, 1.0); self.n - 1]
    }

    fn order(&self) -> Option<u32> {
        None
    }
}

/// `X_1 = ∂_{z₁} + x ∂_{z₂}`, `X_2 = x^k ∂_{z₂}` in dimension 3.
#[derive(Clone, Debug)]
pub struct WorstCaseFrame {
    pub k: u32,
}

impl FrameField for WorstCaseFrame {
    fn dim(&self) -> usize {
        3
    }

    fn matrix(&self, x: Jet, _z: &[Jet]) -> Vec<Jet> {
        vec![Jet::constant(1.0), Jet::constant(0.0), x, x.powi(self.k as i32)]
    }

    fn name(&self) -> String {
        format!("worst:k={}", self.k)
    }

    fn fiber_domain(&self) -> Vec<CoordRange> {
        vec![CoordRange::open(-1.0, 1.0); 2]
    }
}

/// `X_1 = x^m ∂_θ` on a circle of length `fiber_length`.
#[derive(Clone, Debug)]
pub struct ArsCylinderFrame {
    pub m: u32,
    pub fiber_length: f64,
}

impl FrameField for ArsCylinderFrame {
    fn dim(&self) -> usize {
        2
    }

    fn matrix(&self, x: Jet, _z: &[Jet]) -> Vec<Jet> {
        vec![x.powi(self.m as i32)]
    }

    fn name(&self) -> String {
        format!("ars:m={}", self.m)
    }

    fn fiber_domain(&self) -> Vec<CoordRange> {
        vec![CoordRange::periodic(0.0, self.fiber_length)]
    }

    fn order(&self) -> Option<u32> {
        Some(self.m)
    }

    fn regularized(&self, _x: f64, _z: &[f64]) -> Option<Vec<f64>> {
        Some(vec![1.0])
    }
}

/// `X_1 = x (x² + sin²(θ/2)) ∂_θ`: singular set with a degenerate point at θ = 0.
#[derive(Clone, Debug)]
pub struct NonRegularFrame;

impl FrameField for NonRegularFrame {
    fn dim(&self) -> usize {
        2
    }

    fn matrix(&self, x: Jet, z: &[Jet]) -> Vec<Jet> {
        let s = (z[0] * 0.5).sin();
        vec![x * (x * x + s * s)]
    }

    fn name(&self) -> String {
        "nonregular".into()
    }

    fn fiber_domain(&self) -> Vec<CoordRange> {
        vec![CoordRange::periodic(-PI, PI)]
    }
}

/// A strongly regular frame of order m in dimension 3 with z-dependent `â`.
#[derive(Clone, Debug)]
pub struct StronglyRegularSample {
    pub m: u32,
}

impl StronglyRegularSample {
    fn hat(x: Jet, z: &[Jet]) -> Vec<Jet> {
        vec![
            1.0 + x * z[1].cos(),
            0.3 * z[0].sin(),
            x * z[0].sin(),
            1.0 + 0.5 * z[0].cos(),
        ]
    }
}

impl FrameField for StronglyRegularSample {
    fn dim(&self) -> usize {
        3
    }

    fn matrix(&self, x: Jet, z: &[Jet]) -> Vec<Jet> {
        let xm = x.powi(self.m as i32);
        Self::hat(x, z).into_iter().map(|e| xm * e).collect()
    }

    fn name(&self) -> String {
        format!("strongly-regular-sample:m={}", self.m)
    }

    fn fiber_domain(&self) -> Vec<CoordRange> {
        vec![CoordRange::periodic(0.0, TAU); 2]
    }

    fn order(&self) -> Option<u32> {
        Some(self.m)
    }

    fn regularized(&self, x: f64, z: &[f64]) -> Option<Vec<f64>> {
        let zj: Vec<Jet> = z.iter().map(|v| Jet::constant(*v)).collect();
        Some(Self::hat(Jet::constant(x), &zj).into_iter().map(|j| j.v).collect())
    }
}

/// A warped product `dx² + f(x)² ĝ` written as the frame `f⁻¹ · E(z)`,
/// with `E` an orthonormal frame of the fiber metric.
#[derive(Clone, Debug)]
pub struct WarpedFrame {
    pub geometry: WarpedGeometry,
}

impl FrameField for WarpedFrame {
    fn dim(&self) -> usize {
        self.geometry.fiber.dim() + 1
    }

    fn matrix(&self, x: Jet, z: &[Jet]) -> Vec<Jet> {
        let inv_f = x.compose(self.geometry.warp_jet(x.v)).recip();
        self.geometry.fiber.frame(z).into_iter().map(|e| inv_f * e).collect()
    }

    fn name(&self) -> String {
        format!("warped:{}", self.geometry.describe())
    }

    fn fiber_domain(&self) -> Vec<CoordRange> {
        self.geometry.fiber.domain()
    }
}

pub fn catalog() -> Vec<Box<dyn FrameField>> {
    use super::warped::{Fiber, WarpProfile};
    vec![
        Box::new(Euclidean { n: 3 }),
        Box::new(WorstCaseFrame { k: 2 }),
        Box::new(WorstCaseFrame { k: 3 }),
        Box::new(ArsCylinderFrame { m: 1, fiber_length: TAU }),
        Box::new(ArsCylinderFrame { m: 2, fiber_length: TAU }),
        Box::new(NonRegularFrame),
        Box::new(StronglyRegularSample { m: 1 }),
        Box::new(StronglyRegularSample { m: 2 }),
        Box::new(WarpedFrame {
            geometry: WarpedGeometry::new(WarpProfile::Power { coeff: 1.0, exponent: 1.0 }, Fiber::Circle { length: TAU }, 1.0)
                .expect("valid warp"),
        }),
        Box::new(WarpedFrame {
            geometry: WarpedGeometry::new(WarpProfile::Power { coeff: 1.0, exponent: 1.0 }, Fiber::Sphere2, 1.0)
                .expect("valid warp"),
        }),
    ]
}
