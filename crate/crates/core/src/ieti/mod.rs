//! IETI-DP: primal constraints, constrained local solves, the energy
//! minimizing primal basis, the coarse problem, and the operators `F` and
//! `M_sD^{-1}`.

mod local;
mod operators;
mod primal;

pub use local::{augmented_matrix, PatchIeti};
pub use operators::{assemble_coarse, factorize_coarse, gather_global, negligible_jump, IetiOperators, NEGLIGIBLE_JUMP};
pub use primal::{
    constraint_matrix, primals_for_solve, select_primals, AverageKind, Entity, PrimalKind, PrimalPart, PrimalSpec, PrimalStrategy, PrimalVariable,
};

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_all, build_jump_operators, scaling_weights, AssemblyOptions, Discretization, JumpOperators, PatchAssembly, Problem, Scaling};
use crate::linalg::{pcg, Euclidean, PcgOptions, PcgReport};
use crate::splines::GeometryMap;
use crate::Result;

/// Solver choices shared by the serial and the distributed drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IetiOptions {
    pub primal: PrimalStrategy,
    pub scaling: Scaling,
    pub assembly: AssemblyOptions,
    pub tol: f64,
    pub max_iter: usize,
}

impl IetiOptions {
    pub fn new(dim: usize) -> Self {
        let pcg = PcgOptions::default();
        Self {
            primal: PrimalStrategy::default_for(dim),
            scaling: Scaling::default(),
            assembly: AssemblyOptions::default(),
            tol: pcg.tol,
            max_iter: pcg.max_iter,
        }
    }

    pub fn pcg(&self) -> PcgOptions {
        PcgOptions { tol: self.tol, max_iter: self.max_iter }
    }
}

/// Jump operators without rows for classes fixed by vertex primals.
pub fn jump_operators_for(disc: &Discretization, spec: &PrimalSpec, alphas: &[f64], scaling: Scaling) -> Result<JumpOperators> {
    build_jump_operators(disc, &scaling_weights(scaling, alphas), &spec.vertex_classes())
}

/// Everything the serial driver builds.
#[derive(Debug, Clone)]
pub struct SerialSetup {
    pub assemblies: Vec<PatchAssembly>,
    pub spec: PrimalSpec,
    pub ops: IetiOperators,
}

/// Builds the IETI-DP operators on one thread.
pub fn setup_serial(disc: &Discretization, geometries: &[GeometryMap], problem: &dyn Problem, opts: &IetiOptions) -> Result<SerialSetup> {
    let assemblies = assemble_all(disc, geometries, problem, &opts.assembly)?;
    let spec = primals_for_solve(disc, opts.primal)?;
    let alphas: Vec<f64> = (0..disc.num_patches()).map(|k| problem.alpha(k)).collect();
    let jumps = jump_operators_for(disc, &spec, &alphas, opts.scaling)?;
    let patches = assemblies
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let c = constraint_matrix(disc, &spec, k, &geometries[k])?;
            PatchIeti::new(a.system.clone(), c, spec.per_patch[k].clone())
        })
        .collect::<Result<Vec<_>>>()?;
    let ops = IetiOperators::new(patches, jumps, spec.len())?;
    Ok(SerialSetup { assemblies, spec, ops })
}

/// Result of a serial solve: local solutions in system order and the
/// global coefficient vector.
#[derive(Debug, Clone)]
pub struct SerialSolution {
    pub lambda: Vec<f64>,
    pub local: Vec<Vec<f64>>,
    pub global: Vec<f64>,
    pub mismatch: f64,
    pub report: PcgReport,
}

pub fn solve_serial(disc: &Discretization, ops: &IetiOperators, opts: &PcgOptions) -> Result<SerialSolution> {
    let d = ops.rhs()?;
    let zero = vec![0.0; d.len()];
    let (lambda, report) = pcg(|x: &Vec<f64>| ops.apply_f(x), |x: &Vec<f64>| ops.apply_msd(x), &d, zero, opts, &mut Euclidean)?;
    let local = ops.recover(&lambda)?;
    let (global, mismatch) = gather_global(disc, &local)?;
    Ok(SerialSolution { lambda, local, global, mismatch, report })
}
