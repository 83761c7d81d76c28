//! Curvature of singular frame metrics and warped products, plus volume utilities.

pub mod catalog;
pub mod frame;
pub mod jet;
pub mod volume;
pub mod warped;

pub use frame::{
    connection_coefficients, riemann_components, structural_functions, ConnectionCoefficients, CoordRange,
    CurvatureReport, FrameField, FramePartials, StructuralFunctions, Tensor3,
};
pub use volume::{
    chart_volume, spaceform_ball_volume, upsilon_volume, volume_ratio_exponent, VolumeDensity,
};
pub use warped::{warped_sectional, Fiber, WarpProfile, WarpedCurvature, WarpedGeometry};
