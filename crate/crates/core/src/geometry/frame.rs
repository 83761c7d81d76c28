//! Orthonormal-frame curvature engine.
//!
//! A frame metric on `(x, z) ∈ ℝ × ℝ^{n−1}` is given by `X_0 = ∂_x` and
//! `X_i = Σ_s a_{si} ∂_{z_s}`: column `i` of the matrix `a` holds the
//! coordinate coefficients of `X_i`. Latin indices run over `0..n−1`
//! (the fiber frame), the distance direction is kept separate.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::jet::{Jet, MAX_VARS};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoordRange {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl CoordRange {
    pub const fn periodic(lo: f64, hi: f64) -> Self {
        CoordRange { lo, hi, periodic: true }
    }

    pub const fn open(lo: f64, hi: f64) -> Self {
        CoordRange { lo, hi, periodic: false }
    }
}

pub trait FrameField: Send + Sync + std::fmt::Debug {
    /// Manifold dimension n; the frame matrix is (n−1)×(n−1).
    fn dim(&self) -> usize;

    /// Row-major frame matrix with entry `(s, i)` the `∂_{z_s}` coefficient of `X_i`.
    fn matrix(&self, x: Jet, z: &[Jet]) -> Vec<Jet>;

    fn name(&self) -> String;

    /// Sampling box for each fiber coordinate.
    fn fiber_domain(&self) -> Vec<CoordRange>;

    /// Order m when `a = x^m â` with `â` smooth and invertible up to x = 0.
    fn order(&self) -> Option<u32> {
        None
    }

    /// `â(x, z)`, defined including x = 0, for strongly regular frames.
    fn regularized(&self, _x: f64, _z: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Frame matrix with its first and second coordinate partials.
/// Coordinate 0 is x, coordinate `1 + r` is `z_r`.
#[derive(Clone, Debug)]
pub struct FramePartials {
    pub a: DMatrix<f64>,
    pub da: Vec<DMatrix<f64>>,
    pub dda: Vec<Vec<DMatrix<f64>>>,
}

impl FramePartials {
    pub fn evaluate(frame: &dyn FrameField, x: f64, z: &[f64]) -> Result<Self> {
        let n = frame.dim();
        let d = n - 1;
        if !(2..=MAX_VARS).contains(&n) {
            return Err(Error::Config(format!("frame dimension {n} outside 2..={MAX_VARS}")));
        }
        if z.len() != d {
            return Err(Error::Config(format!("expected {d} fiber coordinates, got {}", z.len())));
        }
        let xj = Jet::variable(x, 0);
        let zj: Vec<Jet> = z.iter().enumerate().map(|(r, &v)| Jet::variable(v, r + 1)).collect();
        let m = frame.matrix(xj, &zj);
        assert_eq!(m.len(), d * d, "frame {} returned a malformed matrix", frame.name());
        let a = DMatrix::from_fn(d, d, |s, i| m[s * d + i].v);
        let da = (0..n).map(|mu| DMatrix::from_fn(d, d, |s, i| m[s * d + i].g[mu])).collect();
        let dda = (0..n)
            .map(|mu| (0..n).map(|nu| DMatrix::from_fn(d, d, |s, i| m[s * d + i].h[mu][nu])).collect())
            .collect();
        Ok(FramePartials { a, da, dda })
    }
}

/// Dense `d×d×d` array indexed `(i, j, l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    d: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(d: usize) -> Self {
        Tensor3 { d, data: vec![0.0; d * d * d] }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.data[(i * self.d + j) * self.d + l]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, l: usize, v: f64) {
        self.data[(i * self.d + j) * self.d + l] = v;
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.d)
            .map(|i| (0..self.d).map(|j| (0..self.d).map(|l| self.get(i, j, l)).collect()).collect())
            .collect()
    }
}

/// `C_{iℓ} = c_{0i}^ℓ` and the bracket coefficients `c_{ij}^ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuralFunctions {
    pub c: DMatrix<f64>,
    pub bracket: Tensor3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionCoefficients {
    pub beta: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    /// `Γ_{ij}^ℓ = g(∇_{X_i} X_j, X_ℓ)`
    pub christoffel: Tensor3,
}

impl ConnectionCoefficients {
    pub fn is_zero(&self) -> bool {
        self.beta.iter().chain(self.gamma.iter()).chain(self.christoffel.data.iter()).all(|v| *v == 0.0)
    }
}

pub fn connection_coefficients(s: &StructuralFunctions) -> ConnectionCoefficients {
    let d = s.c.nrows();
    let beta = DMatrix::from_fn(d, d, |i, l| 0.5 * (s.c[(i, l)] - s.c[(l, i)]));
    let gamma = DMatrix::from_fn(d, d, |i, l| 0.5 * (s.c[(l, i)] + s.c[(i, l)]));
    let mut christoffel = Tensor3::zeros(d);
    let b = &s.bracket;
    for i in 0..d {
        for j in 0..d {
            for l in 0..d {
                christoffel.set(i, j, l, 0.5 * (b.get(i, j, l) + b.get(l, j, i) + b.get(l, i, j)));
            }
        }
    }
    ConnectionCoefficients { beta, gamma, christoffel }
}

fn invert(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let det = a.determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::SingularMatrix { det: det.abs() });
    }
    a.clone().try_inverse().ok_or(Error::SingularMatrix { det: det.abs() })
}

/// Structural functions together with their coordinate partials.
struct StructuralJet {
    a: DMatrix<f64>,
    value: StructuralFunctions,
    partial: Vec<StructuralFunctions>,
}

fn bracket_raw(p: &FramePartials, a_inv: &DMatrix<f64>) -> Tensor3 {
    // c_{ij}^ℓ = (a⁻¹)_{ℓs} Σ_r (a_{ri} ∂_r a_{sj} − a_{rj} ∂_r a_{si})
    let d = p.a.nrows();
    let mut raw = Tensor3::zeros(d);
    for s in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for r in 0..d {
                    acc += p.a[(r, i)] * p.da[1 + r][(s, j)] - p.a[(r, j)] * p.da[1 + r][(s, i)];
                }
                raw.set(s, i, j, acc);
            }
        }
    }
    let mut out = Tensor3::zeros(d);
    for i in 0..d {
        for j in 0..d {
            for l in 0..d {
                let v: f64 = (0..d).map(|s| a_inv[(l, s)] * raw.get(s, i, j)).sum();
                out.set(i, j, l, v);
            }
        }
    }
    out
}

fn structural_jet(frame: &dyn FrameField, x: f64, z: &[f64]) -> Result<StructuralJet> {
    let p = FramePartials::evaluate(frame, x, z)?;
    let n = frame.dim();
    let d = n - 1;
    let a_inv = invert(&p.a)?;
    let c = (&a_inv * &p.da[0]).transpose();
    let bracket = bracket_raw(&p, &a_inv);

    let mut partial = Vec::with_capacity(n);
    for mu in 0..n {
        let da_inv = -(&a_inv * &p.da[mu] * &a_inv);
        let dc = (&da_inv * &p.da[0] + &a_inv * &p.dda[mu][0]).transpose();

        // ∂_μ of the raw bracket sum, then both product-rule pieces.
        let mut draw = Tensor3::zeros(d);
        let mut raw = Tensor3::zeros(d);
        for s in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut acc = 0.0;
                    let mut acc0 = 0.0;
                    for r in 0..d {
                        acc += p.da[mu][(r, i)] * p.da[1 + r][(s, j)] + p.a[(r, i)] * p.dda[mu][1 + r][(s, j)]
                            - p.da[mu][(r, j)] * p.da[1 + r][(s, i)]
                            - p.a[(r, j)] * p.dda[mu][1 + r][(s, i)];
                        acc0 += p.a[(r, i)] * p.da[1 + r][(s, j)] - p.a[(r, j)] * p.da[1 + r][(s, i)];
                    }
                    draw.set(s, i, j, acc);
                    raw.set(s, i, j, acc0);
                }
            }
        }
        let mut db = Tensor3::zeros(d);
        for i in 0..d {
            for j in 0..d {
                for l in 0..d {
                    let v: f64 = (0..d)
                        .map(|s| da_inv[(l, s)] * raw.get(s, i, j) + a_inv[(l, s)] * draw.get(s, i, j))
                        .sum();
                    db.set(i, j, l, v);
                }
            }
        }
        partial.push(StructuralFunctions { c: dc, bracket: db });
    }
    Ok(StructuralJet { a: p.a, value: StructuralFunctions { c, bracket }, partial })
}

pub fn structural_functions(frame: &dyn FrameField, x: f64, z: &[f64]) -> Result<StructuralFunctions> {
    if x == 0.0 {
        return Err(Error::Domain("structural functions are undefined on the singular set x = 0".into()));
    }
    let p = FramePartials::evaluate(frame, x, z)?;
    let a_inv = invert(&p.a)?;
    Ok(StructuralFunctions { c: (&a_inv * &p.da[0]).transpose(), bracket: bracket_raw(&p, &a_inv) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub x: f64,
    pub z: Vec<f64>,
    /// `R(X_i, X_j, X_k, X_ℓ)` indexed `[i][j][k][l]`
    pub riemann_ijkl: Vec<Vec<Vec<Vec<f64>>>>,
    /// `R(X_i, X_j, X_k, X_0)` indexed `[i][j][k]`
    pub riemann_ijk0: Vec<Vec<Vec<f64>>>,
    /// `R(X_0, X_i, X_j, X_0)` indexed `[i][j]`
    pub riemann_0ij0: Vec<Vec<f64>>,
    /// `Sec(X_0 ∧ X_i)`
    pub sec_0i: Vec<f64>,
    /// `Sec(X_i ∧ X_j)`, zero on the diagonal
    pub sec_ij: Vec<Vec<f64>>,
    pub hess_delta: Vec<Vec<f64>>,
}

impl CurvatureReport {
    /// Eigenvalues of Hess(δ) on the fiber frame, ascending.
    pub fn hess_eigenvalues(&self) -> Vec<f64> {
        let d = self.hess_delta.len();
        let m = DMatrix::from_fn(d, d, |i, j| self.hess_delta[i][j]);
        let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Largest eigenvalue of Hess(δ) restricted to the fiber frame.
    pub fn max_hess_eigenvalue(&self) -> f64 {
        let d = self.hess_delta.len();
        let m = DMatrix::from_fn(d, d, |i, j| self.hess_delta[i][j]);
        SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Spectral norm of Hess(δ).
    pub fn hess_norm(&self) -> f64 {
        let d = self.hess_delta.len();
        let m = DMatrix::from_fn(d, d, |i, j| self.hess_delta[i][j]);
        SymmetricEigen::new(m).eigenvalues.iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
    }

    /// Largest |Sec| over frame planes.
    pub fn max_abs_sectional(&self) -> f64 {
        let a = self.sec_0i.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.sec_ij.iter().flatten().fold(a, |m, v| m.max(v.abs()))
    }

    pub fn max_sectional(&self) -> f64 {
        let a = self.sec_0i.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let d = self.sec_ij.len();
        let mut m = a;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    m = m.max(self.sec_ij[i][j]);
                }
            }
        }
        m
    }
}

pub fn riemann_components(frame: &dyn FrameField, x: f64, z: &[f64]) -> Result<CurvatureReport> {
    if x == 0.0 {
        return Err(Error::Domain("curvature is undefined on the singular set x = 0".into()));
    }
    let n = frame.dim();
    let d = n - 1;
    let sj = structural_jet(frame, x, z)?;
    let a = &sj.a;

    let conn = connection_coefficients(&sj.value);
    let dconn: Vec<ConnectionCoefficients> = sj.partial.iter().map(connection_coefficients).collect();
    let (gm, bt, ch, br) = (&conn.gamma, &conn.beta, &conn.christoffel, &sj.value.bracket);

    // X_i(F) = Σ_r a_{ri} ∂_{z_r} F
    let xd_christoffel = |i: usize, j: usize, k: usize, l: usize| -> f64 {
        (0..d).map(|r| a[(r, i)] * dconn[1 + r].christoffel.get(j, k, l)).sum()
    };
    let xd_gamma = |i: usize, j: usize, k: usize| -> f64 { (0..d).map(|r| a[(r, i)] * dconn[1 + r].gamma[(j, k)]).sum() };

    let mut r4 = vec![vec![vec![vec![0.0; d]; d]; d]; d];
    let mut r3 = vec![vec![vec![0.0; d]; d]; d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let mut v = xd_christoffel(i, j, k, l) - xd_christoffel(j, i, k, l);
                    v += -gm[(j, k)] * gm[(i, l)] + gm[(i, k)] * gm[(j, l)];
                    for s in 0..d {
                        v += ch.get(j, k, s) * ch.get(i, s, l) - ch.get(i, k, s) * ch.get(j, s, l)
                            - br.get(i, j, s) * ch.get(s, k, l);
                    }
                    r4[i][j][k][l] = v;
                }
                let mut v = xd_gamma(i, j, k) - xd_gamma(j, i, k);
                for l in 0..d {
                    v += ch.get(j, k, l) * gm[(i, l)] - ch.get(i, k, l) * gm[(j, l)] - br.get(i, j, l) * gm[(l, k)];
                }
                r3[i][j][k] = v;
            }
        }
    }
    let mut r2 = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            let mut v = dconn[0].gamma[(i, j)];
            for l in 0..d {
                v += gm[(i, l)] * bt[(l, j)] + gm[(j, l)] * bt[(l, i)] - gm[(i, l)] * gm[(l, j)];
            }
            r2[i][j] = v;
        }
    }
    let sec_0i = (0..d).map(|i| r2[i][i]).collect();
    let sec_ij = (0..d).map(|i| (0..d).map(|j| if i == j { 0.0 } else { r4[i][j][j][i] }).collect()).collect();
    let sgn = x.signum();
    let hess_delta = (0..d).map(|i| (0..d).map(|j| -sgn * gm[(i, j)]).collect()).collect();
    Ok(CurvatureReport {
        x,
        z: z.to_vec(),
        riemann_ijkl: r4,
        riemann_ijk0: r3,
        riemann_0ij0: r2,
        sec_0i,
        sec_ij,
        hess_delta,
    })
}
