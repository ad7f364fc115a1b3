use std::cell::RefCell;
use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Barrier;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_patch, dirichlet_lifting, Discretization, Formulation, JumpOperators, NeighborTrace, Problem};
use crate::ieti::{
    assemble_coarse, constraint_matrix, factorize_coarse, gather_global, jump_operators_for, negligible_jump, primals_for_solve, IetiOptions, PatchIeti,
    PrimalSpec,
};
use crate::linalg::{pcg, DenseMatrix, Factorization, PcgReport, SparseMatrix};
use crate::splines::{GeometryMap, PatchMesh};
use crate::{Error, Result};

use super::collectives::{accumulate, check_holders_agree, ddot, gather_to_holders, reduce_primal, scatter_primal, AccumulatePlan};
use super::comm::{Comm, MessageRecord, Payload};
use super::dvector::{DVector, Repr};
use super::group::WorkerGroup;

/// Shape of the simulated machine and reduction policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuntimeConfig {
    pub workers: usize,
    pub holders: usize,
    /// Fixed summation orders, making results independent of `workers` and
    /// `holders`.
    pub deterministic: bool,
    /// Holders compare their coarse solutions after every coarse solve.
    pub check_consistency: bool,
    /// Seconds a worker waits for a message before giving up.
    pub timeout: f64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self { workers: 1, holders: 1, deterministic: true, check_consistency: false, timeout: 300.0 }
    }
}

impl RuntimeConfig {
    pub fn new(workers: usize, holders: usize) -> Self {
        Self { workers, holders, ..Self::default() }
    }
}

/// Wall-clock seconds, the maximum over workers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    /// Local assembly, factorizations, primal basis, coarse matrix and the
    /// right-hand side.
    pub assemble: f64,
    /// PCG and back-substitution.
    pub solve: f64,
    pub total: f64,
}

/// Result of one patch after the solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchResult {
    pub patch: usize,
    /// `[u_B; u_I]` in system order.
    pub solution: Vec<f64>,
    /// All local coefficients (own and extra), Dirichlet values included.
    pub extended: Vec<f64>,
    /// Interface penalty part of the dG norm of `u_h` seen from this patch.
    pub penalty_energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MessageStats {
    pub messages: usize,
    pub bytes: usize,
}

/// Outcome of a distributed solve.
#[derive(Debug, Clone)]
pub struct DistributedSolution {
    pub group: WorkerGroup,
    pub lambda: Vec<f64>,
    pub patches: Vec<PatchResult>,
    pub global: Vec<f64>,
    /// Largest disagreement between copies of a coupled dof.
    pub mismatch: f64,
    pub report: PcgReport,
    pub timings: Timings,
    pub messages: Vec<MessageRecord>,
    pub n_primal: usize,
    pub n_multipliers: usize,
}

impl DistributedSolution {
    pub fn local(&self) -> Vec<Vec<f64>> {
        self.patches.iter().map(|p| p.solution.clone()).collect()
    }

    pub fn stats(&self, phase: &str) -> MessageStats {
        self.messages
            .iter()
            .filter(|m| m.phase == phase)
            .fold(MessageStats::default(), |s, m| MessageStats { messages: s.messages + 1, bytes: s.bytes + m.bytes })
    }
}

/// Read-only data every worker sees: discretization metadata, the primal
/// set and the jump operators (index maps only, no patch matrices).
struct Shared<'a> {
    disc: &'a Discretization,
    geometries: &'a [GeometryMap],
    problem: &'a dyn Problem,
    opts: &'a IetiOptions,
    rt: &'a RuntimeConfig,
    group: &'a WorkerGroup,
    spec: &'a PrimalSpec,
    jumps: &'a JumpOperators,
    /// Per worker, the sorted primal ids its patches use.
    needed: Vec<Vec<usize>>,
}

struct WorkerOutput {
    patches: Vec<PatchResult>,
    /// Penalty matrix of each patch in `patches`.
    penalties: Vec<SparseMatrix>,
    lambda: Vec<(usize, Vec<f64>)>,
    report: PcgReport,
    assemble: f64,
    solve: f64,
    log: Vec<MessageRecord>,
}

/// State of one worker after setup.
struct Worker<'a> {
    sh: &'a Shared<'a>,
    q: usize,
    comm: RefCell<Comm>,
    own: Vec<usize>,
    patches: Vec<PatchIeti>,
    coarse: Option<Factorization>,
    plan: AccumulatePlan,
    /// Per own patch, the lifting over all local dofs and the penalty matrix.
    post: Vec<(Vec<f64>, SparseMatrix)>,
}

impl<'a> Worker<'a> {
    fn lens(&self) -> Vec<usize> {
        self.own.iter().map(|&k| self.sh.jumps.patch_rows[k].len()).collect()
    }

    fn accumulate(&self, v: &DVector) -> Result<DVector> {
        accumulate(&mut self.comm.borrow_mut(), &self.plan, v)
    }

    fn dot(&self, u: &DVector, v: &DVector) -> Result<f64> {
        ddot(&mut self.comm.borrow_mut(), self.sh.group, u, v, self.sh.rt.deterministic)
    }

    /// `I S~^{-1} I^T f` on the worker's patches; collective.
    fn solve_tilde(&self, f: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let sh = self.sh;
        let mut contrib = Vec::with_capacity(f.len());
        let mut w_delta = Vec::with_capacity(f.len());
        for (p, fk) in self.patches.iter().zip(f) {
            let loc = p.primal_part(fk);
            w_delta.push(p.apply_sdd_inv(&p.dual_part(fk, &loc))?);
            contrib.push((p.patch, loc));
        }
        let mut comm = self.comm.borrow_mut();
        let f_pi = reduce_primal(&mut comm, sh.group, &sh.spec.per_patch, sh.spec.len(), contrib, sh.rt.deterministic)?;
        let w_pi = match (&self.coarse, f_pi) {
            (Some(fact), Some(f_pi)) => Some(fact.solve(&f_pi)),
            (None, None) => None,
            _ => return Err(Error::Runtime(format!("worker {}: coarse data on a non-holder", self.q))),
        };
        if sh.rt.check_consistency {
            check_holders_agree(&mut comm, sh.group, w_pi.as_deref())?;
        }
        let w_pi = scatter_primal(&mut comm, sh.group, &sh.needed, sh.spec.len(), w_pi.as_deref())?;
        Ok(self
            .patches
            .iter()
            .zip(&w_delta)
            .map(|(p, wd)| {
                let loc: Vec<f64> = p.primal_ids.iter().map(|&i| w_pi[i]).collect();
                p.embed(&loc, wd)
            })
            .collect())
    }

    fn jump_apply(&self, w: &[Vec<f64>], scaled: bool) -> DVector {
        DVector::new(Repr::Distributed, self.own.iter().zip(w).map(|(&k, wk)| self.sh.jumps.apply_local(k, wk, scaled)).collect())
    }

    fn jump_transpose(&self, lambda: &DVector, scaled: bool) -> Vec<Vec<f64>> {
        self.own.iter().zip(&lambda.segments).map(|(&k, l)| self.sh.jumps.apply_transpose_local(k, l, scaled)).collect()
    }

    /// `F p` for accumulated `p`, returned distributed.
    fn apply_f(&self, p: &DVector) -> Result<DVector> {
        let f = self.jump_transpose(p, false);
        let w = self.solve_tilde(&f)?;
        Ok(self.jump_apply(&w, false))
    }

    /// `M_sD^{-1} r` for distributed `r`, returned accumulated.
    fn apply_msd(&self, r: &DVector) -> Result<DVector> {
        let r = self.accumulate(r)?;
        let v = self.jump_transpose(&r, true);
        let s: Vec<Vec<f64>> = self.patches.iter().zip(&v).map(|(p, vk)| p.apply_schur(vk)).collect::<Result<_>>()?;
        self.accumulate(&self.jump_apply(&s, true))
    }
}

fn setup_worker<'a>(sh: &'a Shared<'a>, comm: Comm) -> Result<Worker<'a>> {
    let q = comm.rank();
    let disc = sh.disc;
    let own = sh.group.patches_of[q].clone();
    let comm = RefCell::new(comm);
    let lifts: Vec<Vec<f64>> = own.iter().map(|&k| dirichlet_lifting(disc, k, &sh.geometries[k], sh.problem)).collect::<Result<_>>()?;
    let meshes: Vec<PatchMesh> = own.iter().map(|&k| PatchMesh::new(&sh.geometries[k], &disc.bases[k])).collect::<Result<_>>()?;
    let traces =
        if disc.formulation == Formulation::Dg { exchange_traces(sh, &mut comm.borrow_mut(), &own, &lifts, &meshes)? } else { vec![Vec::new(); own.len()] };
    let mut patches = Vec::with_capacity(own.len());
    let mut post = Vec::with_capacity(own.len());
    for (a, &k) in own.iter().enumerate() {
        let asm = assemble_patch(disc, k, &sh.geometries[k], sh.problem, &lifts[a], &traces[a], &sh.opts.assembly)?;
        let c = constraint_matrix(disc, sh.spec, k, &sh.geometries[k])?;
        patches.push(PatchIeti::new(asm.system, c, sh.spec.per_patch[k].clone())?);
        post.push((asm.lifting, asm.penalty));
    }
    let blocks = patches.iter().map(|p| (p.patch, (0..p.s_pp.cols()).flat_map(|j| p.s_pp.column(j)).collect())).collect();
    let gathered = gather_to_holders(&mut comm.borrow_mut(), sh.group, blocks)?;
    let coarse = match gathered {
        Some(all) => {
            let mats: Vec<(usize, DenseMatrix)> = all
                .into_iter()
                .map(|(k, flat)| {
                    let n = sh.spec.per_patch[k].len();
                    let cols: Vec<Vec<f64>> = flat.chunks(n.max(1)).take(n).map(<[f64]>::to_vec).collect();
                    (k, DenseMatrix::from_columns(n, &cols))
                })
                .collect();
            let s = assemble_coarse(sh.spec.len(), mats.iter().map(|(k, m)| (sh.spec.per_patch[*k].as_slice(), m)));
            Some(factorize_coarse(&s)?)
        }
        None => None,
    };
    let plan = AccumulatePlan::new(sh.group, sh.jumps, q);
    Ok(Worker { sh, q, comm, own, patches, coarse, plan, post })
}

/// Sends each neighbour the traces its extra blocks mirror and receives the
/// traces this worker's extra blocks need.
fn exchange_traces(sh: &Shared, comm: &mut Comm, own: &[usize], lifts: &[Vec<f64>], meshes: &[PatchMesh]) -> Result<Vec<Vec<NeighborTrace>>> {
    let disc = sh.disc;
    let q = comm.rank();
    let tag = comm.next_tag() * 8;
    let pos = |k: usize| own.iter().position(|&x| x == k);
    // traces built here, keyed by receiving patch
    let mut outgoing: Vec<(usize, NeighborTrace)> = Vec::new();
    for (a, &j) in own.iter().enumerate() {
        for k in 0..disc.num_patches() {
            for blk in disc.layouts[k].extras.iter().filter(|b| b.neighbor == j) {
                let tr = NeighborTrace::new(disc, j, k, blk.interface, &lifts[a], meshes[a].h, sh.problem.alpha(j))?;
                outgoing.push((k, tr));
            }
        }
    }
    let mut by_dst: std::collections::BTreeMap<usize, Vec<NeighborTrace>> = Default::default();
    let mut result: Vec<Vec<NeighborTrace>> = vec![Vec::new(); own.len()];
    for (k, tr) in outgoing {
        match pos(k) {
            Some(a) => result[a].push(tr),
            None => by_dst.entry(sh.group.owner[k]).or_default().push(tr),
        }
    }
    let sources: BTreeSet<usize> = own.iter().flat_map(|&k| disc.layouts[k].extras.iter().map(|b| sh.group.owner[b.neighbor])).filter(|&o| o != q).collect();
    for (dst, trs) in by_dst {
        comm.isend(dst, tag, Payload::Traces(trs))?.wait();
    }
    for src in sources {
        match comm.recv(src, tag)? {
            Payload::Traces(trs) => {
                for tr in trs {
                    let a = own
                        .iter()
                        .position(|&k| disc.layouts[k].extras.iter().any(|b| b.interface == tr.interface && b.neighbor == tr.from))
                        .ok_or_else(|| Error::Runtime(format!("worker {q} received a trace it does not use")))?;
                    result[a].push(tr);
                }
            }
            other => return Err(Error::Runtime(format!("expected traces, got {other:?}"))),
        }
    }
    Ok(result)
}

fn run_worker(sh: &Shared, comm: Comm, barrier: &Barrier) -> Result<WorkerOutput> {
    barrier.wait();
    let t0 = Instant::now();
    let w = setup_worker(sh, comm)?;
    // right-hand side d = B I S~^{-1} I^T g
    let g: Vec<Vec<f64>> = w.patches.iter().map(|p| p.g.clone()).collect();
    let wg = w.solve_tilde(&g)?;
    let mut d = w.jump_apply(&wg, false);
    let d2 = w.dot(&d, &w.accumulate(&d)?)?;
    let w2 = w.dot(&DVector::new(Repr::Distributed, wg.clone()), &DVector::new(Repr::Accumulated, wg))?;
    if negligible_jump(d2, w2) {
        d = DVector::zeros(Repr::Distributed, &w.lens());
    }
    let assemble = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    w.comm.borrow_mut().set_phase("solve");
    let zero = DVector::zeros(Repr::Accumulated, &w.lens());
    let (lambda, report) =
        pcg(|p: &DVector| w.apply_f(p), |r: &DVector| w.apply_msd(r), &d, zero, &sh.opts.pcg(), &mut |a: &DVector, b: &DVector| w.dot(a, b))?;
    let bt = w.jump_transpose(&lambda, false);
    let h: Vec<Vec<f64>> = w.patches.iter().zip(&g).zip(&bt).map(|((_, gk), b)| gk.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
    let ub = w.solve_tilde(&h)?;
    let mut patches = Vec::with_capacity(w.own.len());
    let mut penalties = Vec::with_capacity(w.own.len());
    for ((p, u_b), (lifting, penalty)) in w.patches.iter().zip(ub).zip(&w.post) {
        let mut solution = u_b.clone();
        solution.extend(p.recover_interior(&u_b));
        let mut extended = lifting.clone();
        for (&d, &v) in sh.disc.layouts[p.patch].system_dofs().iter().zip(&solution) {
            extended[d] = v;
        }
        patches.push(PatchResult { patch: p.patch, solution, extended, penalty_energy: 0.0 });
        penalties.push(penalty.clone());
    }
    let solve = t1.elapsed().as_secs_f64();
    let lambda = w.own.iter().copied().zip(lambda.segments).collect();
    let log = w.comm.borrow_mut().take_log();
    Ok(WorkerOutput { patches, penalties, lambda, report, assemble, solve, log })
}

/// Penalty energy of patch `k` with its extra blocks holding the
/// neighbours' own coefficients, so the jumps are those of `u_h` and not of
/// the local copies, which agree with them only to the solver tolerance.
fn penalty_energy(disc: &Discretization, patches: &[PatchResult], k: usize, penalty: &SparseMatrix) -> f64 {
    let mut u = patches[k].extended.clone();
    for blk in &disc.layouts[k].extras {
        for (a, &m) in blk.mirrored.iter().enumerate() {
            u[blk.offset + a] = patches[blk.neighbor].extended[m];
        }
    }
    crate::linalg::dot(&penalty.matvec(&u), &u)
}

/// Solves on a group of `rt.workers` threads that only share read-only
/// metadata and exchange all patch data through messages.
pub fn solve_distributed(
    disc: &Discretization,
    geometries: &[GeometryMap],
    problem: &dyn Problem,
    opts: &IetiOptions,
    rt: &RuntimeConfig,
) -> Result<DistributedSolution> {
    let n = disc.num_patches();
    if geometries.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: geometries.len() });
    }
    if !(rt.timeout > 0.0) {
        return Err(Error::Config("runtime timeout must be positive".into()));
    }
    let t_start = Instant::now();
    let spec = primals_for_solve(disc, opts.primal)?;
    let alphas: Vec<f64> = (0..n).map(|k| problem.alpha(k)).collect();
    let jumps = jump_operators_for(disc, &spec, &alphas, opts.scaling)?;
    let group = WorkerGroup::new(n, rt.workers, rt.holders)?.with_neighbors(&jumps);
    let needed =
        group.patches_of.iter().map(|ps| ps.iter().flat_map(|&k| spec.per_patch[k].iter().copied()).collect::<BTreeSet<_>>().into_iter().collect()).collect();
    let sh = Shared { disc, geometries, problem, opts, rt, group: &group, spec: &spec, jumps: &jumps, needed };
    let comms = Comm::network(rt.workers, Duration::from_secs_f64(rt.timeout));
    let barrier = Barrier::new(rt.workers);
    let results: Vec<Result<WorkerOutput>> = std::thread::scope(|s| {
        let handles: Vec<_> = comms
            .into_iter()
            .map(|comm| {
                let (sh, barrier) = (&sh, &barrier);
                s.spawn(move || {
                    let q = comm.rank();
                    // keep a way to reach the others if this worker fails
                    let alarm = comm.alarm();
                    let r = catch_unwind(AssertUnwindSafe(|| run_worker(sh, comm, barrier)))
                        .unwrap_or_else(|_| Err(Error::Runtime(format!("worker {q} panicked"))));
                    if let Err(e) = &r {
                        alarm.abort_all(&e.to_string());
                    }
                    r
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(Error::Runtime("worker thread lost".into())))).collect()
    });
    let mut outputs = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(o) => outputs.push(o),
            Err(e) => errors.push(e),
        }
    }
    if !errors.is_empty() {
        let primary = errors.iter().position(|e| !matches!(e, Error::Runtime(m) if m.starts_with("aborted by")));
        return Err(errors.swap_remove(primary.unwrap_or(0)));
    }

    let mut pairs: Vec<(PatchResult, SparseMatrix)> =
        outputs.iter_mut().flat_map(|o| std::mem::take(&mut o.patches).into_iter().zip(std::mem::take(&mut o.penalties))).collect();
    pairs.sort_by_key(|(p, _)| p.patch);
    let (mut patches, penalties): (Vec<PatchResult>, Vec<SparseMatrix>) = pairs.into_iter().unzip();
    if disc.formulation == Formulation::Dg {
        let energies: Vec<f64> = penalties.iter().enumerate().map(|(k, m)| penalty_energy(disc, &patches, k, m)).collect();
        for (p, e) in patches.iter_mut().zip(energies) {
            p.penalty_energy = e;
        }
    }
    let mut lambda = vec![0.0; jumps.num_multipliers()];
    let mut seen = vec![false; lambda.len()];
    for o in &outputs {
        for (k, seg) in &o.lambda {
            for (&r, &v) in jumps.patch_rows[*k].iter().zip(seg) {
                if !seen[r] {
                    lambda[r] = v;
                    seen[r] = true;
                }
            }
        }
    }
    let local: Vec<Vec<f64>> = patches.iter().map(|p| p.solution.clone()).collect();
    let (global, mismatch) = gather_global(disc, &local)?;
    let mut messages: Vec<MessageRecord> = outputs.iter_mut().flat_map(|o| std::mem::take(&mut o.log)).collect();
    messages.sort_by_key(|m| (m.tag, m.src, m.dst));
    let timings = Timings {
        assemble: outputs.iter().map(|o| o.assemble).fold(0.0, f64::max),
        solve: outputs.iter().map(|o| o.solve).fold(0.0, f64::max),
        total: t_start.elapsed().as_secs_f64(),
    };
    let report = outputs.swap_remove(0).report;
    Ok(DistributedSolution {
        group: group.clone(),
        lambda,
        patches,
        global,
        mismatch,
        report,
        timings,
        messages,
        n_primal: spec.len(),
        n_multipliers: jumps.num_multipliers(),
    })
}
