use ietidp::assembly::{assemble_global, box_grid, build_topology, BoundaryKind, Discretization, Formulation, PatchSystem, Problem};
use ietidp::ieti::{setup_serial, solve_serial, IetiOptions};
use ietidp::linalg::{factorize, FactorKind};
use ietidp::splines::TensorBasis;
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

fn check(counts: &[usize], p: usize, e: usize, form: Formulation) {
    let g = box_grid(counts, &vec![1.0; counts.len()]).unwrap();
    let t = build_topology(&g, |_, _, _| BoundaryKind::Dirichlet).unwrap();
    let bases = (0..g.len()).map(|_| TensorBasis::uniform(counts.len(), p, e).unwrap()).collect();
    let disc = Discretization::new(t, bases, form).unwrap();
    let opts = IetiOptions::new(counts.len());
    let setup = setup_serial(&disc, &g, &Wave, &opts).unwrap();
    let sol = solve_serial(&disc, &setup.ops, &opts.pcg()).unwrap();
    let sys: Vec<&PatchSystem> = setup.assemblies.iter().map(|a| &a.system).collect();
    let (k, f) = assemble_global(&disc, &sys).unwrap();
    let u = factorize(&k, FactorKind::Spd).unwrap().solve(&f);
    let norm = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let err = u.iter().zip(&sol.global).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    eprintln!(
        "{counts:?} p={p} {form}: iters {} kappa {:.3} rel err {:.2e} mismatch {:.2e}",
        sol.report.iterations,
        sol.report.condition,
        err / norm,
        sol.mismatch
    );
    assert!(err / norm < 1e-7);
}

#[test]
fn matches_direct_solve_2d() {
    for form in [Formulation::Cg, Formulation::Dg] {
        check(&[2, 2], 2, 4, form);
        check(&[3, 2], 3, 3, form);
    }
}

#[test]
fn matches_direct_solve_3d() {
    for form in [Formulation::Cg, Formulation::Dg] {
        check(&[2, 2, 2], 2, 2, form);
    }
}
