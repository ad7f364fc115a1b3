//! Independent quadrature oracles for the assembled dG form and norm, and
//! structural properties of the assembled matrices.

mod common;

use common::*;
use ietidp::assembly::{assemble_all, assemble_global, dg_energy, dg_norm_squared, AssemblyOptions, Formulation, PatchAssembly, PatchSystem};
use ietidp::harness::{Manufactured, ProblemKind};
use ietidp::splines::GeometryMap;

/// Simpson nodes and weights on [0, 1]; exact for the cubic and lower
/// polynomials met on bilinear elements.
const SIMPSON: [(f64, f64); 3] = [(0.0, 1.0 / 6.0), (0.5, 4.0 / 6.0), (1.0, 1.0 / 6.0)];

fn hat(i: usize, t: f64) -> f64 {
    if i == 0 {
        1.0 - t
    } else {
        t
    }
}

fn dhat(i: usize) -> f64 {
    if i == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Bilinear function with coefficients at flat index `i0 + 2 i1`.
fn bilinear(u: &[f64], xi: f64, eta: f64) -> (f64, f64, f64) {
    let (mut v, mut dx, mut dy) = (0.0, 0.0, 0.0);
    for i1 in 0..2 {
        for i0 in 0..2 {
            let c = u[i0 + 2 * i1];
            v += c * hat(i0, xi) * hat(i1, eta);
            dx += c * dhat(i0) * hat(i1, eta);
            dy += c * hat(i0, xi) * dhat(i1);
        }
    }
    (v, dx, dy)
}

/// Term-by-term `(a_h(u, u), ‖u‖²_dG)` for one-element bilinear patches on
/// axis-aligned rectangles, evaluated in closed form per patch.
fn dg_oracle(asm: &[PatchAssembly], disc: &ietidp::assembly::Discretization, geos: &[GeometryMap], u: &[Vec<f64>], delta: f64) -> (f64, f64) {
    let (mut a_h, mut norm) = (0.0, 0.0);
    for (k, pa) in asm.iter().enumerate() {
        let lo = geos[k].corner([false, false, false]);
        let hi = geos[k].corner([true, true, false]);
        let (wx, wy) = (hi[0] - lo[0], hi[1] - lo[1]);
        let alpha = pa.system.alpha;
        let uk = &u[k];
        let mut vol = 0.0;
        for (xi, a) in SIMPSON {
            for (eta, b) in SIMPSON {
                let (_, dxi, deta) = bilinear(uk, xi, eta);
                let (gx, gy) = (dxi / wx, deta / wy);
                vol += a * b * wx * wy * alpha * (gx * gx + gy * gy);
            }
        }
        a_h += vol;
        norm += vol;
        for blk in &disc.layouts[k].extras {
            assert_eq!(blk.side.dir, 0, "oracle covers vertical interfaces only");
            let xs = blk.side.coordinate();
            let nx = if xs == 1.0 { 1.0 } else { -1.0 };
            let pen = delta * alpha / pa.mesh.h;
            for (eta, b) in SIMPSON {
                let (own, dxi, _) = bilinear(uk, xs, eta);
                let other: f64 = blk.own_side.iter().enumerate().map(|(a, &s)| uk[blk.offset + a] * hat(s / 2, eta)).sum();
                let jump = other - own;
                let flux = alpha * nx * dxi / wx;
                a_h += b * wy * (flux * jump + pen * jump * jump);
                norm += b * wy * pen * jump * jump;
            }
        }
    }
    (a_h, norm)
}

#[test]
fn two_patch_dg_form_matches_quadrature_oracle() {
    let (disc, geos) = discretize(&[2, 1], 1, 1, Formulation::Dg);
    assert!((geos[0].corner([true, true, false])[0] - 0.5).abs() < 1e-15);
    let problem = Manufactured::new(ProblemKind::Homogeneous, 2).unwrap();
    let opts = AssemblyOptions { delta: Some(4.0), quadrature: None };
    let asm = assemble_all(&disc, &geos, &problem, &opts).unwrap();
    // equal mesh sizes: the harmonic mean is h itself
    assert_eq!(asm[0].mesh.h, asm[1].mesh.h);
    let mut r = rng(11);
    for _ in 0..20 {
        let u: Vec<Vec<f64>> = disc.layouts.iter().map(|l| random_vec(&mut r, l.n_local())).collect();
        let (a_h, norm) = dg_oracle(&asm, &disc, &geos, &u, 4.0);
        assert!((dg_energy(&asm, &u) - a_h).abs() < 1e-10 * a_h.abs().max(1.0));
        assert!((dg_norm_squared(&asm, &u) - norm).abs() < 1e-10 * norm.max(1.0));
    }
    let zero: Vec<Vec<f64>> = disc.layouts.iter().map(|l| vec![0.0; l.n_local()]).collect();
    assert_eq!(dg_norm_squared(&asm, &zero), 0.0);
}

#[test]
fn continuous_functions_have_no_jump_terms() {
    let (disc, geos) = discretize(&[2, 2], 2, 2, Formulation::Dg);
    let problem = Manufactured::new(ProblemKind::Linear, 2).unwrap();
    let asm = assemble_all(&disc, &geos, &problem, &AssemblyOptions::default()).unwrap();
    // interpolate x + 2y at the Greville points; extras mirror the neighbour
    let own: Vec<Vec<f64>> = (0..disc.num_patches())
        .map(|k| {
            let b = &disc.bases[k];
            let c = geos[k].corner([false, false, false]);
            (0..b.size())
                .map(|d| {
                    let m = b.multi(d);
                    let x = c[0] + 0.5 * b.knots(0).greville()[m[0]];
                    let y = c[1] + 0.5 * b.knots(1).greville()[m[1]];
                    x + 2.0 * y
                })
                .collect()
        })
        .collect();
    let u: Vec<Vec<f64>> = (0..disc.num_patches())
        .map(|k| {
            let mut v = own[k].clone();
            for blk in &disc.layouts[k].extras {
                v.extend(blk.mirrored.iter().map(|&m| own[blk.neighbor][m]));
            }
            assert_eq!(v.len(), disc.layouts[k].n_local());
            v
        })
        .collect();
    let pen: f64 = asm.iter().zip(&u).map(|(a, v)| v.iter().zip(a.penalty.matvec(v)).map(|(x, y)| x * y).sum::<f64>()).sum();
    assert!(pen.abs() < 1e-12, "penalty {pen:e}");
}

#[test]
fn constants_lie_in_the_kernel() {
    for form in [Formulation::Cg, Formulation::Dg] {
        for (c, p, e) in [(vec![2, 2], 2, 2), (vec![2, 1], 3, 3), (vec![2, 2, 2], 2, 1)] {
            let (disc, geos) = discretize(&c, p, e, form);
            let problem = Manufactured::new(ProblemKind::Wave, c.len()).unwrap();
            let asm = assemble_all(&disc, &geos, &problem, &AssemblyOptions::default()).unwrap();
            for a in &asm {
                let one = vec![1.0; a.full.nrows()];
                assert!(max_abs(a.stiffness.matvec(&one)) < 1e-12, "{form} {c:?}");
                assert!(max_abs(a.full.matvec(&one)) < 1e-11, "{form} {c:?}");
            }
        }
    }
}

#[test]
fn assembled_operators_are_symmetric() {
    for form in [Formulation::Cg, Formulation::Dg] {
        for (c, p, e) in [(vec![2, 2], 2, 2), (vec![3, 2], 3, 2), (vec![2, 2, 2], 2, 2)] {
            let (disc, geos) = discretize(&c, p, e, form);
            let problem = Manufactured::new(ProblemKind::Wave, c.len()).unwrap();
            let asm = assemble_all(&disc, &geos, &problem, &AssemblyOptions::default()).unwrap();
            let sys: Vec<&PatchSystem> = asm.iter().map(|a| &a.system).collect();
            let (k, _) = assemble_global(&disc, &sys).unwrap();
            assert!(k.max_asymmetry() < 1e-12, "{form} {c:?}");
            for a in &asm {
                assert!(a.full.max_asymmetry() < 1e-12);
            }
        }
    }
}

#[test]
fn dg_form_is_equivalent_to_the_dg_norm() {
    for p in [1, 2, 3] {
        for e in [2, 4] {
            let r = norm_ratios(p, e, 100, 5);
            let (lo, hi) = r.exact;
            assert!(lo > 0.0, "p={p} e={e}: {lo}");
            assert!(r.sampled.0 >= lo * (1.0 - 1e-10) && r.sampled.1 <= hi * (1.0 + 1e-10), "p={p} e={e}");
        }
    }
}
