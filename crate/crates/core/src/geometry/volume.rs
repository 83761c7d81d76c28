//! Volume profiles, adaptive quadrature and constant-curvature balls.

use std::f64::consts::PI;

use crate::error::{Error, Result};

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

#[derive(Clone, Copy, Debug)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
}

/// Adaptive Gauss–Kronrod on `[a, b]` to relative tolerance `rel_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, rel_tol: f64) -> Quadrature {
    let mut stack = vec![(a, b, 0u32)];
    let (whole, _) = gk15(f, a, b);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    let mut value = 0.0;
    let mut error = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(f, lo, hi);
        let width_share = (hi - lo) / (b - a);
        if e <= rel_tol * scale * width_share.max(1e-3) || depth >= 40 {
            value += v;
            error += e;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Quadrature { value, error }
}

/// Integrates over `[eps, x_max]` on the dyadic partition `eps·2^j`, refining toward `eps`.
pub fn integrate_graded<F: Fn(f64) -> f64>(f: &F, eps: f64, x_max: f64, rel_tol: f64) -> Quadrature {
    let mut breaks = vec![eps];
    let mut x = eps;
    while 2.0 * x < x_max {
        x *= 2.0;
        breaks.push(x);
    }
    breaks.push(x_max);
    let mut q = Quadrature { value: 0.0, error: 0.0 };
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let piece = integrate(f, w[0], w[1], rel_tol * 0.1);
            q.value += piece.value;
            q.error += piece.error;
        }
    }
    q
}

/// Chart data needed to measure `vol{δ ≥ ε}`.
pub trait VolumeDensity {
    /// Riemannian density integrated over the fiber at distance x.
    fn fiber_density(&self, x: f64) -> f64;
    /// Outer edge of the singular chart.
    fn chart_edge(&self) -> f64;
    /// Volume carried by the part of the manifold beyond the chart.
    fn core_volume(&self) -> f64 {
        0.0
    }
}

/// `υ(λ) = vol{δ ≥ 1/√λ}`.
pub fn upsilon_volume(model: &dyn VolumeDensity, lambda: f64) -> Result<f64> {
    let eps = 1.0 / lambda.sqrt();
    if !(eps < model.chart_edge()) {
        return Err(Error::Domain(format!(
            "1/sqrt(lambda) = {eps} is not inside the chart (0, {})",
            model.chart_edge()
        )));
    }
    let q = integrate_graded(&|x| model.fiber_density(x), eps, model.chart_edge(), 1e-10);
    if !q.value.is_finite() {
        return Err(Error::Config("density is not integrable over the chart".into()));
    }
    Ok(q.value + model.core_volume())
}

/// Volume of `{δ ≥ ε}` inside the chart only.
pub fn chart_volume(model: &dyn VolumeDensity, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < model.chart_edge()) {
        return Err(Error::Domain(format!("eps = {eps} outside the chart")));
    }
    let q = integrate_graded(&|x| model.fiber_density(x), eps, model.chart_edge(), 1e-10);
    if !q.value.is_finite() {
        return Err(Error::Config("density is not integrable over the chart".into()));
    }
    Ok(q.value)
}

/// `log(vol M_b / vol M_a) / log(a / b)`; zero when `a == b`.
pub fn volume_ratio_exponent(model: &dyn VolumeDensity, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && a <= b) {
        return Err(Error::Domain(format!("need 0 < a <= b, got a = {a}, b = {b}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let va = chart_volume(model, a)? + model.core_volume();
    let vb = chart_volume(model, b)? + model.core_volume();
    Ok((vb / va).ln() / (a / b).ln())
}

/// `Γ(n/2)` for positive integer n.
pub fn gamma_half(n: u32) -> f64 {
    match n {
        0 => f64::INFINITY,
        1 => PI.sqrt(),
        2 => 1.0,
        _ => {
            let k = n as f64 / 2.0 - 1.0;
            k * gamma_half(n - 2)
        }
    }
}

/// Volume of the Euclidean unit ball in ℝⁿ.
pub fn unit_ball_volume(n: u32) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma_half(n + 2)
}

/// Area of the unit sphere `S^{n−1}`.
pub fn unit_sphere_area(n: u32) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// Geodesic ball of radius r in the n-dimensional space form of curvature K ≥ 0.
pub fn spaceform_ball_volume(k: f64, r: f64, n: u32) -> Result<f64> {
    if !(k >= 0.0) || n == 0 || !(r > 0.0) {
        return Err(Error::Domain(format!("need K >= 0, r > 0, n >= 1 (K = {k}, r = {r}, n = {n})")));
    }
    if k == 0.0 {
        return Ok(unit_ball_volume(n) * r.powi(n as i32));
    }
    let sk = k.sqrt();
    if r > PI / sk * (1.0 + 1e-15) {
        return Err(Error::Domain(format!("r = {r} exceeds the conjugate radius {}", PI / sk)));
    }
    let q = integrate(&|s: f64| ((sk * s).sin() / sk).powi(n as i32 - 1), 0.0, r, 1e-13);
    Ok(unit_sphere_area(n) * q.value)
}

/// `vol(B_1(π)) / πⁿ`, the lower constant of `vol B_K(r) ≥ C rⁿ`.
pub fn ball_lower_constant(n: u32) -> f64 {
    spaceform_ball_volume(1.0, PI, n).expect("r = pi is admissible for K = 1") / PI.powi(n as i32)
}

/// Euclidean heat kernel `(4πt)^{−n/2} e^{−r²/4t}`.
pub fn flat_heat_kernel(t: f64, r: f64, n: u32) -> f64 {
    (-r * r / (4.0 * t)).exp() / (4.0 * PI * t).powf(n as f64 / 2.0)
}
