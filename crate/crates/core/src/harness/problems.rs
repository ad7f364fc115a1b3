use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::assembly::Problem;
use crate::{Error, Result};

/// Manufactured solutions for `-div(alpha grad u) = f` with `alpha = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// `sin(4 pi (x+0.4)) sin(2 pi (y+0.3)) + x + y` in 2D; in 3D the
    /// separable `sin(2 pi x) sin(2 pi y) sin(pi z)`.
    #[default]
    Wave,
    /// `sin(2 pi x) sin(2 pi y)` (times `sin(pi z)` in 3D), zero on the boundary
    /// of the unit square and cube.
    Homogeneous,
    /// `1 + x + 2y (+ 3z)`, reproduced exactly by every discretization.
    Linear,
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wave" => Ok(Self::Wave),
            "homogeneous" => Ok(Self::Homogeneous),
            "linear" => Ok(Self::Linear),
            other => Err(Error::Config(format!("unknown problem '{other}' (wave, homogeneous, linear)"))),
        }
    }
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Wave => "wave",
            Self::Homogeneous => "homogeneous",
            Self::Linear => "linear",
        })
    }
}

/// A model problem with known exact solution; Dirichlet data is the trace of
/// the exact solution and Neumann data its normal derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub kind: ProblemKind,
    pub dim: usize,
}

impl Manufactured {
    pub fn new(kind: ProblemKind, dim: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {dim}")));
        }
        Ok(Self { kind, dim })
    }

    fn sines(&self) -> Option<[f64; 3]> {
        match (self.kind, self.dim) {
            (ProblemKind::Wave, 2) => Some([4.0 * PI, 2.0 * PI, 0.0]),
            (ProblemKind::Wave, _) | (ProblemKind::Homogeneous, 3) => Some([2.0 * PI, 2.0 * PI, PI]),
            (ProblemKind::Homogeneous, _) => Some([2.0 * PI, 2.0 * PI, 0.0]),
            (ProblemKind::Linear, _) => None,
        }
    }

    fn shifts(&self) -> [f64; 3] {
        if self.kind == ProblemKind::Wave && self.dim == 2 {
            [0.4, 0.3, 0.0]
        } else {
            [0.0; 3]
        }
    }

    pub fn exact(&self, x: &[f64; 3]) -> f64 {
        match self.sines() {
            None => 1.0 + x[0] + 2.0 * x[1] + if self.dim == 3 { 3.0 * x[2] } else { 0.0 },
            Some(w) => {
                let s = self.shifts();
                let prod: f64 = (0..self.dim).map(|d| (w[d] * (x[d] + s[d])).sin()).product();
                if self.kind == ProblemKind::Wave && self.dim == 2 {
                    prod + x[0] + x[1]
                } else {
                    prod
                }
            }
        }
    }

    pub fn gradient(&self, x: &[f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        match self.sines() {
            None => {
                g = [1.0, 2.0, if self.dim == 3 { 3.0 } else { 0.0 }];
            }
            Some(w) => {
                let s = self.shifts();
                for (d, gd) in g.iter_mut().enumerate().take(self.dim) {
                    *gd = (0..self.dim).map(|e| if e == d { w[e] * (w[e] * (x[e] + s[e])).cos() } else { (w[e] * (x[e] + s[e])).sin() }).product();
                }
                if self.kind == ProblemKind::Wave && self.dim == 2 {
                    g[0] += 1.0;
                    g[1] += 1.0;
                }
            }
        }
        g
    }
}

impl Problem for Manufactured {
    fn rhs(&self, x: &[f64; 3]) -> f64 {
        match self.sines() {
            None => 0.0,
            Some(w) => {
                let s = self.shifts();
                let k2: f64 = w[..self.dim].iter().map(|v| v * v).sum();
                k2 * (0..self.dim).map(|d| (w[d] * (x[d] + s[d])).sin()).product::<f64>()
            }
        }
    }

    fn dirichlet(&self, x: &[f64; 3]) -> f64 {
        self.exact(x)
    }

    fn neumann(&self, _patch: usize, x: &[f64; 3], n: &[f64; 3]) -> f64 {
        let g = self.gradient(x);
        (0..self.dim).map(|d| g[d] * n[d]).sum()
    }
}
