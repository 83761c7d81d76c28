//! Generalized eigenproblems `A v = λ M v` for symmetric tridiagonal A and diagonal M > 0.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretize::TridiagonalForm;
use crate::error::{Error, Result};

const TINY_PIVOT: f64 = 1e-300;
const RETRY_SHIFT: f64 = 1e-12;
pub const MAX_BISECTIONS: u32 = 60;

/// Negative pivots of the LDLᵀ factorization of `A − λM`, and whether a pivot vanished.
fn sturm(form: &TridiagonalForm, lambda: f64, force: bool) -> (usize, bool) {
    let mut count = 0;
    let mut hit = false;
    let mut q = 0.0;
    for i in 0..form.len() {
        let d = form.diag[i] - lambda * form.mass[i];
        q = if i == 0 { d } else { d - form.off[i - 1] * form.off[i - 1] / q };
        if q.abs() < TINY_PIVOT || q.is_nan() {
            hit = true;
            if !force {
                return (count, true);
            }
            q = -TINY_PIVOT;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    (count, hit)
}

/// Number of generalized eigenvalues strictly below λ.
///
/// A vanishing pivot means λ sits on an eigenvalue to working precision; the count is
/// retried at `λ(1 − 10⁻¹²)`, and if that also degenerates the pivot is counted as negative.
pub fn inertia_count(form: &TridiagonalForm, lambda: f64) -> usize {
    let (c, hit) = sturm(form, lambda, false);
    if !hit {
        return c;
    }
    let shifted = lambda - RETRY_SHIFT * lambda.abs().max(f64::MIN_POSITIVE);
    debug!("zero pivot at lambda = {lambda:e}; retrying at {shifted:e}");
    let (c, hit) = sturm(form, shifted, false);
    if !hit {
        return c;
    }
    warn!("pivot below {TINY_PIVOT:e} at lambda = {shifted:e}; replaced by -{TINY_PIVOT:e}");
    sturm(form, shifted, true).0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Located {
    pub value: f64,
    /// Half the final bracket width.
    pub half_width: f64,
    /// True when bisection stopped (cap or floating-point exhaustion) before `tol` was met.
    pub capped: bool,
}

/// Every eigenvalue in `[lo, hi)` by bisection on the inertia count.
pub fn eigenvalues_in(form: &TridiagonalForm, lo: f64, hi: f64, tol: f64) -> Result<Vec<Located>> {
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::Config(format!("bisection needs lo < hi and tol > 0 (lo = {lo}, hi = {hi}, tol = {tol})")));
    }
    let n_lo = inertia_count(form, lo);
    let n_hi = inertia_count(form, hi);
    let mut out = Vec::with_capacity(n_hi.saturating_sub(n_lo));
    let mut a_floor = lo;
    for j in n_lo..n_hi {
        // looking for the smallest λ with count(λ) > j
        let (mut a, mut b) = (a_floor, hi);
        let mut steps = 0;
        while b - a > 2.0 * tol && steps < MAX_BISECTIONS {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if inertia_count(form, mid) > j {
                b = mid;
            } else {
                a = mid;
            }
            steps += 1;
        }
        // the cap, or running out of representable midpoints, both leave tol unmet
        let capped = b - a > 2.0 * tol;
        if capped {
            warn!("eigenvalue {j} bracketed only to [{a:e}, {b:e}] after {steps} bisections");
        }
        out.push(Located { value: 0.5 * (a + b), half_width: 0.5 * (b - a), capped });
        a_floor = a;
    }
    Ok(out)
}

/// M-normalized eigenvector on the retained nodes of its form.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigenvector {
    pub lambda: f64,
    pub values: Vec<f64>,
    pub residual: f64,
    /// Another eigenvalue lies within `10·tol`.
    pub clustered: bool,
}

/// `T y = r` for tridiagonal `T = A − λM`, LU with partial pivoting.
fn solve_shifted(form: &TridiagonalForm, lambda: f64, rhs: &[f64]) -> Vec<f64> {
    let n = form.len();
    let mut dl: Vec<f64> = form.off.clone();
    let mut d: Vec<f64> = (0..n).map(|i| form.diag[i] - lambda * form.mass[i]).collect();
    let mut du: Vec<f64> = form.off.clone();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swap = vec![false; n];
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    for i in 0..n.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            if d[i] == 0.0 {
                d[i] = f64::EPSILON * scale;
            }
            let f = dl[i] / d[i];
            dl[i] = f;
            d[i + 1] -= f * du[i];
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = f;
            let t = du[i];
            du[i] = d[i + 1];
            d[i + 1] = t - f * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -f;
            }
            swap[i] = true;
        }
    }
    if n > 0 && d[n - 1] == 0.0 {
        d[n - 1] = f64::EPSILON * scale;
    }
    let mut y = rhs.to_vec();
    for i in 0..n.saturating_sub(1) {
        if swap[i] {
            y.swap(i, i + 1);
            let t = y[i];
            y[i + 1] -= dl[i] * t;
        } else {
            y[i + 1] -= dl[i] * y[i];
        }
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        if i + 1 < n {
            s -= du[i] * y[i + 1];
        }
        if i + 2 < n {
            s -= du2[i] * y[i + 2];
        }
        y[i] = s / d[i];
    }
    y
}

fn m_normalize(form: &TridiagonalForm, v: &mut [f64]) {
    let norm = v.iter().zip(&form.mass).map(|(x, m)| m * x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
}

fn apply(form: &TridiagonalForm, v: &[f64], lambda: f64) -> Vec<f64> {
    let n = form.len();
    (0..n)
        .map(|i| {
            let mut s = (form.diag[i] - lambda * form.mass[i]) * v[i];
            if i > 0 {
                s += form.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += form.off[i] * v[i + 1];
            }
            s
        })
        .collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Two inverse-iteration steps at `lambda` from a start vector drawn from `seed`.
pub fn eigenvector(form: &TridiagonalForm, lambda: f64, tol: f64, seed: u64) -> Result<Eigenvector> {
    let n = form.len();
    if n == 0 {
        return Err(Error::Config("empty form".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..2 {
        let rhs: Vec<f64> = v.iter().zip(&form.mass).map(|(x, m)| x * m).collect();
        v = solve_shifted(form, lambda, &rhs);
        m_normalize(form, &mut v);
    }
    // fix the sign so reruns and refinements compare directly
    if let Some(big) = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())) {
        if big < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let residual = norm2(&apply(form, &v, lambda)) / norm2(&apply(form, &v, 0.0));
    if !(residual < 1e-6) {
        return Err(Error::Residual { lambda, residual });
    }
    let window = 10.0 * tol;
    let clustered = inertia_count(form, lambda + window) - inertia_count(form, lambda - window) > 1;
    if clustered {
        warn!("eigenvalue near {lambda:e} has a neighbour within {window:e}; vector is ill-conditioned");
    }
    Ok(Eigenvector { lambda, values: v, residual, clustered })
}

/// `⟨u, M v⟩`.
pub fn m_inner(form: &TridiagonalForm, u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).zip(&form.mass).map(|((a, b), m)| a * b * m).sum()
}

/// Counts of one fiber level across the λ grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeCounts {
    pub mode: u64,
    pub mu: f64,
    /// Copies of this level: fiber multiplicity times chart sheets.
    pub multiplicity: u64,
    pub counts: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TaggedEigenvalue {
    pub value: f64,
    pub mode: u64,
    pub multiplicity: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountingSpectrum {
    pub lambdas: Vec<f64>,
    pub modes: Vec<ModeCounts>,
    /// `N(λ)` with multiplicities.
    pub total: Vec<u64>,
    pub eigenvalues: Option<Vec<TaggedEigenvalue>>,
}

impl CountingSpectrum {
    pub fn from_modes(lambdas: Vec<f64>, modes: Vec<ModeCounts>) -> Self {
        let mut total = vec![0u64; lambdas.len()];
        for m in &modes {
            for (t, c) in total.iter_mut().zip(&m.counts) {
                *t += m.multiplicity * c;
            }
        }
        CountingSpectrum { lambdas, modes, total, eigenvalues: None }
    }

    /// Eigenvalues expanded by multiplicity, ascending.
    pub fn expanded_eigenvalues(&self) -> Option<Vec<f64>> {
        let e = self.eigenvalues.as_ref()?;
        let mut out = Vec::new();
        for t in e {
            out.extend(std::iter::repeat_n(t.value, t.multiplicity as usize));
        }
        out.sort_by(f64::total_cmp);
        Some(out)
    }
}
