use serde::{Deserialize, Serialize};

use crate::assembly::{box_grid, build_topology, AssemblyOptions, BoundaryKind, Discretization, Formulation, Scaling};
use crate::ieti::{IetiOptions, PrimalStrategy};
use crate::runtime::RuntimeConfig;
use crate::splines::{GeometryMap, TensorBasis};
use crate::{Error, Result};

use super::problems::{Manufactured, ProblemKind};

/// One benchmark case. Every field has a default, so a config file only
/// lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseConfig {
    pub dim: usize,
    /// Patches per direction; empty selects 4x4 in 2D and 2x2x2 in 3D.
    pub patches: Vec<usize>,
    pub degree: usize,
    /// Each patch has `2^refine` elements per direction.
    pub refine: u32,
    pub formulation: Formulation,
    /// SIP penalty; default `4 (p + 1)^2`.
    pub delta: Option<f64>,
    /// `default` or a `+`-joined subset of `vertices`, `edges`, `faces`.
    pub primal: String,
    pub scaling: Scaling,
    pub workers: usize,
    pub holders: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub problem: ProblemKind,
    /// Condition imposed on every outer side of the domain.
    pub boundary: BoundaryKind,
    pub deterministic: bool,
    pub check_consistency: bool,
    pub seed: u64,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            dim: 2,
            patches: Vec::new(),
            degree: 2,
            refine: 2,
            formulation: Formulation::Cg,
            delta: None,
            primal: "default".into(),
            scaling: Scaling::Coefficient,
            workers: 1,
            holders: 1,
            tol: 1e-8,
            max_iter: 500,
            problem: ProblemKind::Wave,
            boundary: BoundaryKind::Dirichlet,
            deterministic: true,
            check_consistency: false,
            seed: 0,
        }
    }
}

impl CaseConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("case file: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn patch_grid(&self) -> Vec<usize> {
        if !self.patches.is_empty() {
            return self.patches.clone();
        }
        if self.dim == 3 {
            vec![2, 2, 2]
        } else {
            vec![4, 4]
        }
    }

    pub fn elements(&self) -> usize {
        1 << self.refine
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {}", self.dim)));
        }
        let grid = self.patch_grid();
        if grid.len() != self.dim || grid.contains(&0) {
            return Err(Error::Config(format!("patch grid {grid:?} does not fit dimension {}", self.dim)));
        }
        if self.degree < 1 {
            return Err(Error::Config("degree must be at least 1".into()));
        }
        if self.refine > 12 {
            return Err(Error::Config(format!("refinement level {} is out of range", self.refine)));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if self.workers < 1 {
            return Err(Error::Config("at least one worker is required".into()));
        }
        if self.holders < 1 || self.holders > self.workers {
            return Err(Error::Config(format!("holders must lie in 1..={}, got {}", self.workers, self.holders)));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(Error::Config(format!("delta must be positive, got {d}")));
            }
        }
        PrimalStrategy::parse(&self.primal, self.dim)?;
        Ok(())
    }

    pub fn ieti_options(&self) -> Result<IetiOptions> {
        Ok(IetiOptions {
            primal: PrimalStrategy::parse(&self.primal, self.dim)?,
            scaling: self.scaling,
            assembly: AssemblyOptions { delta: self.delta, quadrature: None },
            tol: self.tol,
            max_iter: self.max_iter,
        })
    }

    pub fn runtime(&self) -> RuntimeConfig {
        RuntimeConfig {
            workers: self.workers,
            holders: self.holders,
            deterministic: self.deterministic,
            check_consistency: self.check_consistency,
            ..RuntimeConfig::default()
        }
    }

    pub fn manufactured(&self) -> Result<Manufactured> {
        Manufactured::new(self.problem, self.dim)
    }

    /// Uniform patch grid on the unit square or cube and its discretization.
    pub fn discretize(&self) -> Result<(Discretization, Vec<GeometryMap>)> {
        self.validate()?;
        let grid = self.patch_grid();
        let geometries = box_grid(&grid, &vec![1.0; self.dim])?;
        let boundary = self.boundary;
        let topology = build_topology(&geometries, |_, _, _| boundary)?;
        let bases = (0..geometries.len()).map(|_| TensorBasis::uniform(self.dim, self.degree, self.elements())).collect::<Result<_>>()?;
        Ok((Discretization::new(topology, bases, self.formulation)?, geometries))
    }

    /// `4x4`-style label of the patch grid.
    pub fn grid_label(&self) -> String {
        self.patch_grid().iter().map(usize::to_string).collect::<Vec<_>>().join("x")
    }
}
