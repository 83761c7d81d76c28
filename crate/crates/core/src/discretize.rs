//! Separation into fiber modes and P1 assembly of the one-dimensional forms.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{EdgeCondition, FiberMode, Model};

/// Coefficients of `∫ (|u′|² + μ q u²) w dx`; the gradient weight p is 1 for every catalog model.
pub trait Coefficients: Sync {
    fn weight(&self, x: f64) -> f64;
    fn mode_coefficient(&self, x: f64) -> f64;
}

impl Coefficients for Model {
    fn weight(&self, x: f64) -> f64 {
        Model::weight(self, x)
    }

    fn mode_coefficient(&self, x: f64) -> f64 {
        Model::mode_coefficient(self, x)
    }
}

/// Coefficients given by closures, for controls and tests.
pub struct Profile<W, Q> {
    pub weight: W,
    pub coefficient: Q,
}

impl<W: Fn(f64) -> f64 + Sync, Q: Fn(f64) -> f64 + Sync> Coefficients for Profile<W, Q> {
    fn weight(&self, x: f64) -> f64 {
        (self.weight)(x)
    }

    fn mode_coefficient(&self, x: f64) -> f64 {
        (self.coefficient)(x)
    }
}

/// `w ≡ 1`, `q ≡ 1`.
pub fn flat_profile() -> Profile<fn(f64) -> f64, fn(f64) -> f64> {
    Profile { weight: |_| 1.0, coefficient: |_| 1.0 }
}

pub struct ModeProblem<'a> {
    pub coefficients: &'a dyn Coefficients,
    pub x_lo: f64,
    pub x_hi: f64,
    pub left: EdgeCondition,
    pub right: EdgeCondition,
    pub mode: FiberMode,
}

impl ModeProblem<'_> {
    /// `V(x) = μ q(x)`.
    pub fn potential(&self, x: f64) -> f64 {
        if self.mode.mu == 0.0 {
            0.0
        } else {
            self.mode.mu * self.coefficients.mode_coefficient(x)
        }
    }

    pub fn weight(&self, x: f64) -> f64 {
        self.coefficients.weight(x)
    }
}

/// Mode problem of `model` for fiber level `mode`; the inner edge of a singular chart
/// is the truncation point `x_floor` and carries a Dirichlet condition.
pub fn separate_mode<'a>(model: &'a Model, mode: FiberMode, x_floor: f64) -> Result<ModeProblem<'a>> {
    let sep = model.separation()?;
    let x_lo = if sep.singular { x_floor } else { sep.x_lo };
    if !(x_lo < sep.x_hi) {
        return Err(Error::Config(format!("truncation {x_lo} is not inside the chart (0, {})", sep.x_hi)));
    }
    Ok(ModeProblem { coefficients: model, x_lo, x_hi: sep.x_hi, left: sep.inner, right: sep.outer, mode })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeshPolicy {
    /// Local relative spacing `h/x` near the singular end.
    pub rho: f64,
    /// Largest element size.
    pub h_max: f64,
    /// Truncation point of singular charts.
    pub x_min: f64,
}

impl MeshPolicy {
    /// Resolution used for counting below `lambda_max`.
    pub fn for_lambda_max(lambda_max: f64) -> Self {
        let s = lambda_max.max(1.0).sqrt().recip();
        MeshPolicy { rho: 0.05, h_max: (0.15 * s).min(0.004), x_min: (s / 50.0).min(1e-6) }
    }

    /// Halves both spacings; the truncation point is kept.
    pub fn refined(&self) -> Self {
        MeshPolicy { rho: self.rho / 2.0, h_max: self.h_max / 2.0, x_min: self.x_min }
    }

    pub fn with_x_min(mut self, x_min: f64) -> Self {
        self.x_min = x_min;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Grading {
    Uniform,
    /// `h = min(h_max, ρ x)`, geometric toward x = 0.
    Geometric { rho: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mesh {
    pub nodes: Vec<f64>,
    pub grading: Grading,
    pub h_max: f64,
}

/// Grid coordinate `s(x) = ∫ dx / h(x)` and its inverse.
struct GridMap {
    grading: Grading,
    h_max: f64,
}

impl GridMap {
    fn knee(&self, rho: f64) -> f64 {
        self.h_max / rho
    }

    fn s(&self, x: f64) -> f64 {
        match self.grading {
            Grading::Uniform => x / self.h_max,
            Grading::Geometric { rho } => {
                let k = self.knee(rho);
                if x <= k {
                    x.ln() / rho
                } else {
                    k.ln() / rho + (x - k) / self.h_max
                }
            }
        }
    }

    fn x(&self, s: f64) -> f64 {
        match self.grading {
            Grading::Uniform => s * self.h_max,
            Grading::Geometric { rho } => {
                let k = self.knee(rho);
                let sk = k.ln() / rho;
                if s <= sk {
                    (s * rho).exp()
                } else {
                    k + (s - sk) * self.h_max
                }
            }
        }
    }
}

impl Mesh {
    /// Nodes on `[lo, hi]` containing every breakpoint in `(lo, hi)`.
    pub fn new(lo: f64, hi: f64, grading: Grading, h_max: f64, breakpoints: &[f64]) -> Result<Mesh> {
        if !(lo < hi && h_max > 0.0) || (matches!(grading, Grading::Geometric { .. }) && !(lo > 0.0)) {
            return Err(Error::Config(format!("cannot mesh [{lo}, {hi}] with h_max = {h_max}")));
        }
        if let Grading::Geometric { rho } = grading {
            if !(rho > 0.0 && rho < 1.0) {
                return Err(Error::Config(format!("grading ratio must lie in (0, 1), got {rho}")));
            }
        }
        let map = GridMap { grading, h_max };
        let mut stops: Vec<f64> = breakpoints.iter().copied().filter(|b| *b > lo && *b < hi).collect();
        stops.sort_by(f64::total_cmp);
        stops.dedup();
        stops.insert(0, lo);
        stops.push(hi);
        let mut nodes = vec![lo];
        for w in stops.windows(2) {
            let (sa, sb) = (map.s(w[0]), map.s(w[1]));
            let n = ((sb - sa).ceil() as usize).max(1);
            for j in 1..n {
                nodes.push(map.x(sa + (sb - sa) * j as f64 / n as f64));
            }
            nodes.push(w[1]);
        }
        let mesh = Mesh { nodes, grading, h_max };
        mesh.check()?;
        Ok(mesh)
    }

    /// Mesh adapted to a mode problem under `policy`.
    pub fn for_problem(prob: &ModeProblem<'_>, policy: &MeshPolicy, graded: bool, breakpoints: &[f64]) -> Result<Mesh> {
        let grading = if graded { Grading::Geometric { rho: policy.rho } } else { Grading::Uniform };
        Mesh::new(prob.x_lo, prob.x_hi, grading, policy.h_max, breakpoints)
    }

    fn check(&self) -> Result<()> {
        for w in self.nodes.windows(2) {
            // spacing is bounded below relative to position, so that graded meshes may reach far down
            if !(w[1] - w[0] > 1e-14 * w[1].abs().min(1.0)) {
                return Err(Error::Config(format!("degenerate element [{}, {}]", w[0], w[1])));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node equal to `x`.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        self.nodes.iter().position(|v| *v == x)
    }

    /// Sub-mesh on nodes `a..=b`.
    pub fn slice(&self, a: usize, b: usize) -> Mesh {
        Mesh { nodes: self.nodes[a..=b].to_vec(), grading: self.grading, h_max: self.h_max }
    }

    /// Number of dyadic levels between the floor and the top of the mesh.
    pub fn depth(&self) -> f64 {
        (self.nodes[self.nodes.len() - 1] / self.nodes[0]).log2()
    }
}

/// Symmetric tridiagonal stiffness `A` with lumped mass `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct TridiagonalForm {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    pub mass: Vec<f64>,
    /// Positions of the retained nodes.
    pub nodes: Vec<f64>,
    /// Mesh index of each retained node.
    pub index_map: Vec<usize>,
    /// First node of the underlying mesh.
    pub floor: f64,
}

impl TridiagonalForm {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `A + μ D` with diagonal `D`.
    pub fn shifted(&self, mu: f64, d: &[f64]) -> TridiagonalForm {
        let mut f = self.clone();
        if mu != 0.0 {
            for (a, s) in f.diag.iter_mut().zip(d) {
                *a += mu * s;
            }
        }
        f
    }

    /// `A` written as rows of `i j value`, then the mass diagonal.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for i in 0..self.len() {
            s.push_str(&format!("{i} {i} {:.17e}\n", self.diag[i]));
            if i + 1 < self.len() {
                s.push_str(&format!("{i} {} {:.17e}\n", i + 1, self.off[i]));
            }
        }
        for (i, m) in self.mass.iter().enumerate() {
            s.push_str(&format!("M {i} {m:.17e}\n"));
        }
        s
    }
}

/// Assembles the mode-independent part of the form and the lumped potential shape `M_ii q(x_i)`.
pub fn assemble_split(
    coefficients: &dyn Coefficients,
    mesh: &Mesh,
    left: EdgeCondition,
    right: EdgeCondition,
) -> Result<(TridiagonalForm, Vec<f64>)> {
    let x = &mesh.nodes;
    let n = x.len();
    if n < 2 {
        return Err(Error::Config("mesh needs at least one element".into()));
    }
    let mut kel = Vec::with_capacity(n - 1);
    for e in 0..n - 1 {
        let h = x[e + 1] - x[e];
        let mid = 0.5 * (x[e] + x[e + 1]);
        let w = coefficients.weight(mid);
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::Assembly { node: e, x: mid, msg: format!("weight w = {w} at element midpoint") });
        }
        kel.push(w / h);
    }
    let first = usize::from(left == EdgeCondition::Dirichlet);
    let last = if right == EdgeCondition::Dirichlet { n - 2 } else { n - 1 };
    if first > last {
        return Err(Error::Config("no free nodes after eliminating Dirichlet ends".into()));
    }
    let mut diag = Vec::with_capacity(last - first + 1);
    let mut mass = Vec::with_capacity(last - first + 1);
    let mut shape = Vec::with_capacity(last - first + 1);
    for i in first..=last {
        let kl = if i > 0 { kel[i - 1] } else { 0.0 };
        let kr = if i + 1 < n { kel[i] } else { 0.0 };
        let hl = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
        let hr = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
        let w = coefficients.weight(x[i]);
        let q = coefficients.mode_coefficient(x[i]);
        if !(w > 0.0 && w.is_finite()) || !(q >= 0.0 && q.is_finite()) {
            return Err(Error::Assembly { node: i, x: x[i], msg: format!("coefficients w = {w}, q = {q}") });
        }
        let m = 0.5 * w * (hl + hr);
        diag.push(kl + kr);
        mass.push(m);
        shape.push(m * q);
    }
    let off = (first..last).map(|i| -kel[i]).collect();
    let form = TridiagonalForm {
        diag,
        off,
        mass,
        nodes: x[first..=last].to_vec(),
        index_map: (first..=last).collect(),
        floor: x[0],
    };
    Ok((form, shape))
}

pub fn assemble_form(prob: &ModeProblem<'_>, mesh: &Mesh) -> Result<TridiagonalForm> {
    let (lo, hi) = (mesh.nodes[0], mesh.nodes[mesh.len() - 1]);
    if lo < prob.x_lo * (1.0 - 1e-15) || hi > prob.x_hi * (1.0 + 1e-15) {
        return Err(Error::Config(format!("mesh [{lo}, {hi}] leaves the interval [{}, {}]", prob.x_lo, prob.x_hi)));
    }
    let (form, shape) = assemble_split(prob.coefficients, mesh, prob.left, prob.right)?;
    Ok(form.shifted(prob.mode.mu, &shape))
}
