//! Benchmark driver: model problems, error norms, single runs, scaling
//! studies and report output.

mod config;
mod norms;
mod problems;
mod report;
mod study;

pub use config::CaseConfig;
pub use norms::{error_norms, ErrorNorms};
pub use problems::{Manufactured, ProblemKind};
pub use report::{emit_report, hash_bits, parse_csv_reports, parse_json_reports, write_report, ReportFormat, SolveReport};
pub use study::{scaling_study, weak_grid, StudyKind, StudyReport};

use crate::assembly::Discretization;
use crate::runtime::{solve_distributed, DistributedSolution};
use crate::splines::{GeometryMap, PatchMesh};
use crate::Result;

/// Everything a run produces, for callers that need more than the report.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub report: SolveReport,
    pub solution: DistributedSolution,
    pub disc: Discretization,
    pub geometries: Vec<GeometryMap>,
    pub errors: ErrorNorms,
}

/// Builds, solves and measures one case on the simulated runtime.
pub fn run_case_full(cfg: &CaseConfig) -> Result<CaseRun> {
    let (disc, geometries) = cfg.discretize()?;
    let problem = cfg.manufactured()?;
    let opts = cfg.ieti_options()?;
    let solution = solve_distributed(&disc, &geometries, &problem, &opts, &cfg.runtime())
        .map_err(|e| e.context(&format!("{}D {} p={} refine={} {}", cfg.dim, cfg.grid_label(), cfg.degree, cfg.refine, cfg.formulation)))?;
    let errors = error_norms(&disc, &geometries, &solution.patches, &problem, None)?;
    let meshes: Vec<PatchMesh> = geometries.iter().zip(&disc.bases).map(|(g, b)| PatchMesh::new(g, b)).collect::<Result<_>>()?;
    let all: Vec<f64> = solution.patches.iter().flat_map(|p| p.solution.iter().copied()).collect();
    let (asm, sol) = (solution.stats("assemble"), solution.stats("solve"));
    let report = SolveReport {
        dim: cfg.dim,
        patches: cfg.grid_label(),
        degree: cfg.degree,
        refine: cfg.refine,
        elements: cfg.elements(),
        formulation: cfg.formulation.to_string(),
        problem: cfg.problem.to_string(),
        workers: cfg.workers,
        holders: cfg.holders,
        deterministic: cfg.deterministic,
        dofs: disc.n_global(),
        n_primal: solution.n_primal,
        n_multipliers: solution.n_multipliers,
        iterations: solution.report.iterations,
        condition: solution.report.condition,
        assemble_time: solution.timings.assemble,
        solve_time: solution.timings.solve,
        total_time: solution.timings.total,
        l2_error: errors.l2,
        h1_error: errors.h1_semi,
        dg_error: errors.dg,
        h: meshes.iter().map(|m| m.h).fold(0.0, f64::max),
        patch_diameter: meshes.iter().map(|m| m.diameter).fold(0.0, f64::max),
        mismatch: solution.mismatch,
        messages_assemble: asm.messages,
        bytes_assemble: asm.bytes,
        messages_solve: sol.messages,
        bytes_solve: sol.bytes,
        solution_hash: hash_bits(&all),
        speedup: None,
    };
    Ok(CaseRun { report, solution, disc, geometries, errors })
}

pub fn run_case(cfg: &CaseConfig) -> Result<SolveReport> {
    run_case_full(cfg).map(|r| r.report)
}
