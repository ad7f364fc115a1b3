use ietidp::assembly::{box_grid, build_topology, BoundaryKind, Discretization, Formulation, Problem};
use ietidp::ieti::{setup_serial, solve_serial, IetiOptions};
use ietidp::runtime::{
    accumulate, allgather, ddot, reduce_primal, run_group, scatter_primal, solve_distributed, AccumulatePlan, DVector, DistributedSolution, Repr,
    RuntimeConfig, WorkerGroup,
};
use ietidp::splines::{GeometryMap, TensorBasis};
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

struct Wave;
impl Problem for Wave {
    fn rhs(&self, x: &[f64; 3]) -> f64 {
        20.0 * PI * PI * (4.0 * PI * (x[0] + 0.4)).sin() * (2.0 * PI * (x[1] + 0.3)).sin()
    }
    fn dirichlet(&self, x: &[f64; 3]) -> f64 {
        (4.0 * PI * (x[0] + 0.4)).sin() * (2.0 * PI * (x[1] + 0.3)).sin() + x[0] + x[1]
    }
}

fn setup(counts: &[usize], p: usize, e: usize, form: Formulation) -> (Discretization, Vec<GeometryMap>) {
    let g = box_grid(counts, &vec![1.0; counts.len()]).unwrap();
    let t = build_topology(&g, |_, _, _| BoundaryKind::Dirichlet).unwrap();
    let bases = (0..g.len()).map(|_| TensorBasis::uniform(counts.len(), p, e).unwrap()).collect();
    (Discretization::new(t, bases, form).unwrap(), g)
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn assert_bitwise(a: &DistributedSolution, b: &DistributedSolution, what: &str) {
    assert_eq!(a.report.iterations, b.report.iterations, "{what}: iterations");
    assert_eq!(bits(&a.report.residuals), bits(&b.report.residuals), "{what}: residual history");
    assert_eq!(bits(&a.lambda), bits(&b.lambda), "{what}: multipliers");
    for (x, y) in a.patches.iter().zip(&b.patches) {
        assert_eq!(bits(&x.solution), bits(&y.solution), "{what}: patch {}", x.patch);
    }
}

#[test]
fn bitwise_identical_across_workers_and_holders() {
    for form in [Formulation::Cg, Formulation::Dg] {
        let (disc, g) = setup(&[4, 4], 2, 2, form);
        let opts = IetiOptions::new(2);
        let base = solve_distributed(&disc, &g, &Wave, &opts, &RuntimeConfig::new(1, 1)).unwrap();
        assert!(base.messages.is_empty(), "one worker sends nothing");
        for q in [2, 4, 8] {
            for h in [1, 2, q] {
                let rt = RuntimeConfig { check_consistency: true, ..RuntimeConfig::new(q, h) };
                let s = solve_distributed(&disc, &g, &Wave, &opts, &rt).unwrap();
                assert_bitwise(&base, &s, &format!("{form} Q={q} H={h}"));
            }
        }
    }
}

#[test]
fn agrees_with_serial_solver() {
    for form in [Formulation::Cg, Formulation::Dg] {
        let (disc, g) = setup(&[3, 2], 3, 2, form);
        let opts = IetiOptions::new(2);
        let serial = setup_serial(&disc, &g, &Wave, &opts).unwrap();
        let ser = solve_serial(&disc, &serial.ops, &opts.pcg()).unwrap();
        let par = solve_distributed(&disc, &g, &Wave, &opts, &RuntimeConfig::new(3, 2)).unwrap();
        assert_eq!(ser.report.iterations, par.report.iterations);
        let norm = ser.global.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = ser.global.iter().zip(&par.global).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err / norm < 1e-10, "{form}: {err:e}");
        for (a, b) in serial.assemblies.iter().zip(&par.patches) {
            assert_eq!(a.lifting.len(), b.extended.len());
        }
    }
}

#[test]
fn fast_mode_matches_within_rounding() {
    let (disc, g) = setup(&[4, 2], 2, 2, Formulation::Cg);
    let opts = IetiOptions::new(2);
    let det = solve_distributed(&disc, &g, &Wave, &opts, &RuntimeConfig::new(4, 2)).unwrap();
    let fast = solve_distributed(&disc, &g, &Wave, &opts, &RuntimeConfig { deterministic: false, ..RuntimeConfig::new(4, 2) }).unwrap();
    let err = det.global.iter().zip(&fast.global).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-8);
}

#[test]
fn accumulate_talks_only_to_neighbours() {
    let (disc, g) = setup(&[4, 4], 2, 2, Formulation::Dg);
    let opts = IetiOptions::new(2);
    let s = solve_distributed(&disc, &g, &Wave, &opts, &RuntimeConfig::new(8, 8)).unwrap();
    // with every worker a holder, solve-phase traffic is accumulation between
    // neighbours plus the dot-product and primal all-gathers through worker 0
    for m in s.messages.iter().filter(|m| m.phase == "solve") {
        let nb = s.group.neighbors[m.src].contains(&m.dst);
        assert!(nb || m.src == 0 || m.dst == 0, "{m:?}");
    }
    assert!(s.stats("assemble").messages > 0);
}

/// Serial gather-sum-scatter oracle for [`accumulate`]: global value of row r
/// is the sum over `row_patches[r]` in ascending order.
#[test]
fn accumulate_matches_serial_oracle_bitwise() {
    let (disc, g) = setup(&[4, 4], 2, 2, Formulation::Cg);
    let opts = IetiOptions::new(2);
    let setup = setup_serial(&disc, &g, &Wave, &opts).unwrap();
    let jumps = &setup.ops.jumps;
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let parts: Vec<Vec<f64>> = jumps.patch_rows.iter().map(|r| r.iter().map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut oracle = vec![0.0; jumps.num_multipliers()];
    for (k, seg) in parts.iter().enumerate() {
        for (&r, v) in jumps.patch_rows[k].iter().zip(seg) {
            oracle[r] += v;
        }
    }
    for q in [1, 2, 4, 16] {
        let group = WorkerGroup::new(16, q, 1).unwrap().with_neighbors(jumps);
        let out = run_group(q, |comm| {
            let me = comm.rank();
            let plan = AccumulatePlan::new(&group, jumps, me);
            comm.set_phase("accumulate");
            let v = DVector::new(Repr::Distributed, group.patches_of[me].iter().map(|&k| parts[k].clone()).collect());
            let a = accumulate(comm, &plan, &v)?;
            let a2 = accumulate(comm, &plan, &v)?;
            assert_eq!(a, a2);
            // round trip: re-splitting an accumulated vector and accumulating again
            let split = DVector::from_global(Repr::Distributed, &oracle, &group.patches_of[me], &jumps.patch_rows, &jumps.row_patches);
            let back = accumulate(comm, &plan, &split)?;
            comm.set_phase("dot");
            let dot = ddot(comm, &group, &v, &a, true)?;
            for m in comm.log().iter().filter(|m| m.phase == "accumulate") {
                assert!(group.neighbors[me].contains(&m.dst));
            }
            Ok((me, a, back, dot))
        })
        .unwrap();
        let mut dots = Vec::new();
        for (me, a, back, dot) in out {
            for (seg, &k) in a.segments.iter().zip(&group.patches_of[me]) {
                let want: Vec<f64> = jumps.patch_rows[k].iter().map(|&r| oracle[r]).collect();
                assert_eq!(bits(seg), bits(&want), "Q={q} patch {k}");
            }
            for (seg, &k) in back.segments.iter().zip(&group.patches_of[me]) {
                let want: Vec<f64> = jumps.patch_rows[k].iter().map(|&r| oracle[r]).collect();
                assert_eq!(bits(seg), bits(&want));
            }
            dots.push(dot.to_bits());
        }
        assert!(dots.windows(2).all(|w| w[0] == w[1]));
        // ddot equals the per-patch serial sum
        let want = parts.iter().enumerate().fold(0.0, |s, (k, seg)| s + seg.iter().zip(&jumps.patch_rows[k]).map(|(x, &r)| x * oracle[r]).sum::<f64>());
        assert_eq!(f64::from_bits(dots[0]), want);
        let euclid: f64 = oracle.iter().map(|x| x * x).sum();
        assert!((want - euclid).abs() < 1e-12 * euclid.max(1.0));
    }
}

#[test]
fn allgather_over_two_workers() {
    // patches 0 and 1 share row 0; worker q owns patch q
    let out = run_group(2, |comm| {
        let me = comm.rank();
        let jumps_rows = [vec![0usize], vec![0usize]];
        let row_patches = [vec![0usize, 1]];
        let v = DVector::from_global(Repr::Accumulated, &[0.0], &[me], &jumps_rows, &row_patches);
        assert_eq!(v.segments[0], vec![0.0]);
        let seg = [vec![if me == 0 { 1.0 } else { 2.0 }]];
        let items = vec![(me, seg[0].clone())];
        let all = allgather(comm, &WorkerGroup::new(2, 2, 1)?, items)?;
        let sum: f64 = all.iter().map(|(_, x)| x[0]).sum();
        Ok(sum)
    })
    .unwrap();
    assert_eq!(out, vec![3.0, 3.0]);
}

#[test]
fn primal_reduce_and_scatter() {
    // four patches on four workers, primal ids per patch
    let ids = vec![vec![0], vec![0, 1], vec![1, 2], vec![2]];
    let contributions = |k: usize| -> Vec<f64> { ids[k].iter().map(|&i| (k * 10 + i) as f64 + 0.1).collect() };
    let mut serial = vec![0.0; 3];
    for (k, idk) in ids.iter().enumerate() {
        for (&i, v) in idk.iter().zip(contributions(k)) {
            serial[i] += v;
        }
    }
    for h in [1, 2, 4] {
        let group = WorkerGroup::new(4, 4, h).unwrap();
        let needed: Vec<Vec<usize>> = ids.clone();
        let out = run_group(4, |comm| {
            let me = comm.rank();
            let f = reduce_primal(comm, &group, &ids, 3, vec![(me, contributions(me))], true)?;
            assert_eq!(f.is_some(), group.is_holder(me));
            comm.take_log();
            let w = scatter_primal(comm, &group, &needed, 3, f.as_deref())?;
            Ok((f, w, comm.take_log()))
        })
        .unwrap();
        for (q, (_, _, log)) in out.iter().enumerate() {
            // a holder sends each of its slaves exactly the slave's entries
            let dsts: Vec<usize> = log.iter().map(|m| m.dst).collect();
            let slaves: Vec<usize> = if group.is_holder(q) { group.group_of(q).into_iter().filter(|&s| s != q).collect() } else { vec![] };
            assert_eq!(dsts, slaves);
            for m in log {
                assert_eq!(m.bytes, 8 * needed[m.dst].len());
            }
        }
        for (q, (f, w, _)) in out.into_iter().enumerate() {
            if let Some(f) = f {
                assert_eq!(bits(&f), bits(&serial), "H={h}");
            }
            for &i in &ids[q] {
                assert_eq!(w[i].to_bits(), serial[i].to_bits());
            }
        }
    }
}

#[test]
fn worker_failure_stops_the_group() {
    let r = run_group(3, |comm| {
        if comm.rank() == 1 {
            return Err(ietidp::Error::Config("bad input".into()));
        }
        comm.recv(1, 5).map(|_| ())
    });
    assert!(r.is_err());
}
