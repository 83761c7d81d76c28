//! Second-order forward-mode jets in up to four variables.
//!
//! Variable 0 is the distance coordinate `x`; variables `1..` are fiber
//! coordinates. A jet carries the value, gradient and Hessian of a
//! function at a point, so frame matrices written with jets expose the
//! exact first and second partials needed by the curvature formulas.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const MAX_VARS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; MAX_VARS],
    pub h: [[f64; MAX_VARS]; MAX_VARS],
}

impl Jet {
    pub const fn constant(v: f64) -> Self {
        Jet { v, g: [0.0; MAX_VARS], h: [[0.0; MAX_VARS]; MAX_VARS] }
    }

    pub fn variable(v: f64, index: usize) -> Self {
        let mut j = Jet::constant(v);
        j.g[index] = 1.0;
        j
    }

    /// `φ ∘ self` where `d = (φ, φ′, φ″)` evaluated at `self.v`.
    pub fn compose(self, d: [f64; 3]) -> Self {
        let mut out = Jet::constant(d[0]);
        for a in 0..MAX_VARS {
            out.g[a] = d[1] * self.g[a];
            for b in 0..MAX_VARS {
                out.h[a][b] = d[2] * self.g[a] * self.g[b] + d[1] * self.h[a][b];
            }
        }
        out
    }

    pub fn powi(self, k: i32) -> Self {
        let x = self.v;
        let kf = k as f64;
        let d1 = if k == 0 { 0.0 } else { kf * x.powi(k - 1) };
        let d2 = if k == 0 || k == 1 { 0.0 } else { kf * (kf - 1.0) * x.powi(k - 2) };
        self.compose([x.powi(k), d1, d2])
    }

    pub fn powf(self, p: f64) -> Self {
        let x = self.v;
        self.compose([x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0)])
    }

    pub fn sqrt(self) -> Self {
        self.powf(0.5)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.compose([e, e, e])
    }

    pub fn ln(self) -> Self {
        let x = self.v;
        self.compose([x.ln(), 1.0 / x, -1.0 / (x * x)])
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.compose([s, c, -s])
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.compose([c, -s, -c])
    }

    pub fn recip(self) -> Self {
        let x = self.v;
        self.compose([1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)])
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        self.v += o.v;
        for a in 0..MAX_VARS {
            self.g[a] += o.g[a];
            for b in 0..MAX_VARS {
                self.h[a][b] += o.h[a][b];
            }
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.v * o.v);
        for a in 0..MAX_VARS {
            out.g[a] = self.g[a] * o.v + self.v * o.g[a];
            for b in 0..MAX_VARS {
                out.h[a][b] = self.h[a][b] * o.v
                    + self.g[a] * o.g[b]
                    + self.g[b] * o.g[a]
                    + self.v * o.h[a][b];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.v += c;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, c: f64) -> Jet {
        self + (-c)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, c: f64) -> Jet {
        self.v *= c;
        for a in 0..MAX_VARS {
            self.g[a] *= c;
            for b in 0..MAX_VARS {
                self.h[a][b] *= c;
            }
        }
        self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j * self
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, j: Jet) -> Jet {
        j + self
    }
}

impl From<f64> for Jet {
    fn from(v: f64) -> Jet {
        Jet::constant(v)
    }
}
