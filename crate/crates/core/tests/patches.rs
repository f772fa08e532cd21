use patchbeam_core::materials::*;
use patchbeam_core::patches::{exchange_faces, lagrange_weights, state_fields};
use patchbeam_core::{DisplacementField, Error, NodeRef, PatchGrid, PatchSystem, Side};
use proptest::prelude::*;

const W: f64 = 0.015 / 0.105;
const T: f64 = 0.009 / 0.105;

fn three_layer() -> MaterialModel {
    MaterialModel::new(
        BeamGeometry { length: 0.105, width: 0.015, thickness: 0.009 },
        Mixture::AL_SIC,
        Grading::Layered {
            layers: vec![
                Layer { thickness: 0.003, metal_fraction: 1.0 },
                Layer { thickness: 0.003, metal_fraction: 0.8 },
                Layer { thickness: 0.003, metal_fraction: 0.6 },
            ],
        },
    )
    .unwrap()
}

fn axial(exponent: f64) -> MaterialModel {
    MaterialModel::new(
        BeamGeometry { length: 0.105, width: 0.015, thickness: 0.015 },
        Mixture::AL_SIC,
        Grading::Axial { exponent },
    )
    .unwrap()
}

fn system(grid: PatchGrid, model: &MaterialModel, eta: f64) -> PatchSystem {
    let scales = NonDimScales::for_model(model, ReferenceScale::ConstituentMax).unwrap();
    PatchSystem::from_model(grid, model, &scales, eta).unwrap()
}

fn random_state(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_add(0x9e3779b97f4a7c15);
    (0..n)
        .map(|_| {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
        .collect()
}

#[test]
fn coverage_of_paper_configurations() {
    let a = PatchGrid::patches(9, (7, 5, 7), 0.0061, W, T, 4).unwrap();
    assert!((a.coverage - 0.2745).abs() < 1e-12);
    let b = PatchGrid::patches(17, (7, 5, 7), 0.0061, W, T, 4).unwrap();
    assert!((b.coverage - 0.5185).abs() < 1e-12);
    assert!((a.centres[0] - 0.5 * 6.0 * 0.0061).abs() < 1e-15);
    assert!((a.centres[8] - (1.0 - 0.5 * 6.0 * 0.0061)).abs() < 1e-14);
}

#[test]
fn invalid_patch_configurations() {
    let overlap = PatchGrid::patches(9, (21, 3, 3), 0.0061, W, T, 4);
    assert!(matches!(overlap, Err(Error::Config { .. })));
    for order in [0, 9] {
        let r = PatchGrid::patches(9, (7, 3, 3), 0.0061, W, T, order);
        match r {
            Err(Error::Config { field, .. }) => assert_eq!(field, "discretisation.interp_order"),
            other => panic!("{other:?}"),
        }
    }
    assert!(PatchGrid::patches(1, (7, 3, 3), 0.0061, W, T, 1).is_err());
}

#[test]
fn lagrange_reproduces_quadratic() {
    let w = lagrange_weights(&[0.2, 0.45, 0.7], 0.56);
    let v: f64 = w.iter().zip([0.2f64, 0.45, 0.7]).map(|(a, x)| a * x * x).sum();
    assert!((v - 0.3136).abs() < 1e-12);
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
}

#[test]
fn stencils_stay_inside_the_patch_range() {
    for n in [3usize, 5, 9, 17] {
        for order in 1..n {
            let g = PatchGrid::patches(n, (7, 3, 3), 0.2 / (6.0 * n as f64), W, T, order).unwrap();
            let st = g.coupling_weights();
            assert_eq!(st.len(), 2 * (n - 1));
            for s in &st {
                assert_eq!(s.sources.len(), order + 1);
                assert!(*s.sources.last().unwrap() < n);
                assert!(s.sources.windows(2).all(|p| p[1] == p[0] + 1));
                match s.side {
                    Side::Left => assert!(s.patch != 0),
                    Side::Right => assert!(s.patch != n - 1),
                }
            }
        }
    }
}

proptest! {
    #[test]
    fn coupling_reproduces_polynomials(
        n in 3usize..12, order_frac in 0.0f64..1.0, degree_frac in 0.0f64..1.0,
        coeffs in prop::collection::vec(-1.0f64..1.0, 12),
    ) {
        let order = 1 + ((n - 1) as f64 * order_frac) as usize % (n - 1);
        let degree = (degree_frac * (order + 1) as f64) as usize % (order + 1);
        let g = PatchGrid::patches(n, (7, 3, 3), 0.25 / (6.0 * n as f64), W, T, order).unwrap();
        let poly = |x: f64| coeffs[..=degree].iter().rev().fold(0.0, |acc, c| acc * x + c);
        for s in g.coupling_weights() {
            let sum: f64 = s.weights.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            let v: f64 = s.weights.iter().zip(&s.source_x).map(|(w, &x)| w * poly(x)).sum();
            prop_assert!((v - poly(s.target_x)).abs() < 1e-8, "{} vs {}", v, poly(s.target_x));
        }
    }

    #[test]
    fn layout_round_trip(n in 1usize..5, nx in 3usize..8, ny in 3usize..6, nz in 3usize..6) {
        let g = if n == 1 {
            PatchGrid::full_domain((nx, ny, nz), W, T).unwrap()
        } else {
            PatchGrid::patches(n + 1, (nx, ny, nz), 0.3 / ((nx - 1) * (n + 1)) as f64, W, T, 1).unwrap()
        };
        let sys = PatchSystem::new(g.clone(), g.grids().iter().map(|gr| patchbeam_core::MaterialField::uniform(gr, 1.0, 1.0, 1.0)).collect(), 0.0).unwrap();
        let l = sys.layout();
        for idx in 0..l.len() {
            let node = l.locate(idx);
            prop_assert_eq!(l.index(node), Some(idx));
        }
        for dof in 0..l.n_dof() {
            let s = l.disp_state_index(dof);
            prop_assert_eq!(l.dof_of_state(s), Some(dof));
            let d = l.locate(s);
            let v = l.locate(l.vel_state_index(dof));
            prop_assert_eq!((d.patch, d.component + 3, d.i, d.j, d.k), (v.patch, v.component, v.i, v.j, v.k));
        }
        let state = random_state(l.len(), 3);
        let (d, v) = state_fields(&sys, &state);
        let mut back = sys.zero_state();
        l.pack(&d, &v, &mut back);
        prop_assert_eq!(back, state);
    }
}

#[test]
fn ghosts_and_faces_are_not_state() {
    let g = PatchGrid::full_domain((6, 4, 5), W, T).unwrap();
    let sys = system(g, &three_layer(), 0.0);
    let l = sys.layout();
    assert_eq!(l.index(NodeRef { patch: 0, component: 0, i: 0, j: 1, k: 1 }), None);
    assert_eq!(l.index(NodeRef { patch: 0, component: 2, i: 5, j: 1, k: 1 }), None);
    assert_eq!(l.index(NodeRef { patch: 0, component: 1, i: 2, j: 0, k: 1 }), None);
    assert_eq!(l.index(NodeRef { patch: 0, component: 1, i: 2, j: 4, k: 1 }), None);
    assert_eq!(l.index(NodeRef { patch: 0, component: 5, i: 2, j: 1, k: 0 }), None);
    assert!(l.index(NodeRef { patch: 0, component: 5, i: 2, j: 1, k: 1 }).is_some());
}

#[test]
fn exchange_copies_interpolated_planes() {
    let g = PatchGrid::patches(5, (7, 3, 3), 1.0 / 46.0, W, T, 2).unwrap();
    let stencils = g.coupling_weights();
    let mut fields: Vec<DisplacementField> = g.grids().iter().map(DisplacementField::zeros).collect();
    for (p, f) in fields.iter_mut().enumerate() {
        let gr = g.grid(p);
        for i in 0..gr.nx {
            for k in 0..gr.nz {
                for j in 0..gr.ny {
                    f.w[(i, j, k)] = gr.x(i) * gr.x(i);
                }
            }
        }
    }
    let mut scratch = Vec::new();
    exchange_faces(&mut fields, &stencils, 7, &mut scratch);
    for p in 1..5 {
        assert!(fields[p].face_ready(0));
        let x0 = g.grid(p).x(0);
        assert!((fields[p].w[(0, 1, 1)] - x0 * x0).abs() < 1e-14);
    }
    for p in 0..4 {
        assert!(fields[p].face_ready(1));
        let x = g.grid(p).x(6);
        assert!((fields[p].w[(6, 2, 0)] - x * x).abs() < 1e-14);
    }
}

#[test]
fn zero_state_is_an_equilibrium() {
    let g = PatchGrid::patches(5, (7, 3, 3), 1.0 / 46.0, W, T, 2).unwrap();
    let sys = system(g, &three_layer(), 0.01);
    let out = sys.rhs_vec(&sys.zero_state()).unwrap();
    assert!(out.iter().all(|&x| x == 0.0));
}

#[test]
fn rhs_is_pure() {
    let g = PatchGrid::patches(5, (7, 4, 5), 1.0 / 46.0, W, T, 3).unwrap();
    let sys = system(g, &three_layer(), 0.02);
    let state = random_state(sys.layout().len(), 11);
    let a = sys.rhs_vec(&state).unwrap();
    let mut ws = sys.workspace();
    let mut b = sys.zero_state();
    let other = random_state(sys.layout().len(), 12);
    sys.rhs(&mut ws, 0.0, &other, &mut b).unwrap();
    sys.rhs(&mut ws, 5.0, &state, &mut b).unwrap();
    assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
}

#[test]
fn non_finite_state_is_reported_with_its_node() {
    let g = PatchGrid::patches(5, (7, 3, 3), 1.0 / 46.0, W, T, 2).unwrap();
    let sys = system(g, &three_layer(), 0.0);
    let mut state = sys.zero_state();
    let node = NodeRef { patch: 3, component: 4, i: 2, j: 1, k: 2 };
    state[sys.layout().index(node).unwrap()] = f64::NAN;
    match sys.rhs_vec(&state) {
        Err(Error::Integrity { patch, component, i, j, k, value }) => {
            assert_eq!((patch, component, i, j, k), (3, "v_dot", 2, 1, 2));
            assert!(value.is_nan());
        }
        other => panic!("{other:?}"),
    }
    assert!(matches!(sys.rhs_vec(&[0.0; 3]), Err(Error::Contract(_))));
}

#[test]
fn strain_energy_identity_on_full_domain() {
    // With eta = 0 the discrete force is the negative gradient of a
    // quadratic strain energy: sum M d . a(d) = -2 E(d).
    for model in [three_layer(), axial(1.5)] {
        let g = PatchGrid::full_domain((12, 4, 5), W, T).unwrap();
        let sys = system(g, &model, 0.0);
        let l = sys.layout();
        let d = random_state(l.n_dof(), 5);
        let state = sys.disp_to_state(&d);
        let rhs = sys.rhs_vec(&state).unwrap();
        let masses = sys.dof_masses();
        let work: f64 = (0..l.n_dof()).map(|i| masses[i] * d[i] * rhs[l.vel_state_index(i)]).sum();
        let e = sys.energy(&mut sys.workspace(), &state).unwrap();
        assert!(e > 0.0);
        assert!((work + 2.0 * e).abs() < 1e-10 * e, "work {work} energy {e}");
    }
}

#[test]
fn viscosity_dissipates_on_full_domain() {
    let g = PatchGrid::full_domain((10, 4, 5), W, T).unwrap();
    let mut sys = system(g, &three_layer(), 0.0);
    sys.set_eta(0.05).unwrap();
    let l = sys.layout();
    let masses = sys.dof_masses();
    for seed in 0..5 {
        let q = random_state(l.n_dof(), seed);
        let mut state = sys.zero_state();
        for (dof, &x) in q.iter().enumerate() {
            state[l.vel_state_index(dof)] = x;
        }
        let rhs = sys.rhs_vec(&state).unwrap();
        let power: f64 = (0..l.n_dof()).map(|i| masses[i] * q[i] * rhs[l.vel_state_index(i)]).sum();
        assert!(power < 0.0);
    }
    assert!(matches!(sys.set_eta(-1.0), Err(Error::Domain { .. })));
}

/// Displacement and velocity fields that are polynomials of degree four in
/// x times arbitrary cross-section profiles.
fn polynomial_state(sys: &PatchSystem) -> Vec<f64> {
    let l = sys.layout();
    let prof = random_state(6 * (l.ny + 1) * (l.nz + 1), 99);
    let mut state = sys.zero_state();
    for (idx, s) in state.iter_mut().enumerate() {
        let n = l.locate(idx);
        let x = sys.node_x(n);
        let c = n.component;
        let p = prof[c + 6 * (n.j + (l.ny + 1) * n.k)];
        let poly = 0.3 + (c as f64 + 1.0) * x - 0.7 * x * x + 0.4 * x * x * x - 0.2 * x * x * x * x;
        *s = 1e-3 * (p + 0.5) * poly;
    }
    state
}

#[test]
fn patch_scheme_matches_full_domain_on_aligned_grids() {
    // N = 5 patches of 7 nodes with dx = 1/46 sit exactly on the nodes of a
    // 47-node full-domain grid. Degree-four macroscale fields are
    // interpolated exactly at order 4, so every dynamic node must see the
    // same time derivative in both schemes.
    let dx = 1.0 / 46.0;
    for model in [axial(2.0), three_layer()] {
        let pg = PatchGrid::patches(5, (7, 4, 5), dx, W, T, 4).unwrap();
        let patch_sys = system(pg, &model, 0.01);
        let full_sys = system(PatchGrid::full_domain((47, 4, 5), W, T).unwrap(), &model, 0.01);
        let ps = polynomial_state(&patch_sys);
        let pl = patch_sys.layout();
        let fl = full_sys.layout();
        let fs = polynomial_state(&full_sys);
        let pr = patch_sys.rhs_vec(&ps).unwrap();
        let fr = full_sys.rhs_vec(&fs).unwrap();
        let scale = fr.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut worst = 0.0f64;
        for idx in 0..pl.len() {
            let n = pl.locate(idx);
            let offset = (patch_sys.grid().grid(n.patch).origin_x / dx).round() as usize;
            let fidx = fl.index(NodeRef { patch: 0, i: n.i + offset, ..n }).unwrap();
            assert!((ps[idx] - fs[fidx]).abs() < 1e-15);
            worst = worst.max((pr[idx] - fr[fidx]).abs());
        }
        assert!(worst < 1e-9 * scale, "worst {worst} scale {scale}");
    }
}

#[test]
fn reflection_in_y_commutes_with_rhs() {
    let g = PatchGrid::patches(5, (7, 5, 5), 1.0 / 46.0, W, T, 2).unwrap();
    let sys = system(g, &three_layer(), 0.02);
    let l = sys.layout();
    let reflect = |s: &[f64]| {
        let mut out = vec![0.0; s.len()];
        for (idx, &x) in s.iter().enumerate() {
            let n = l.locate(idx);
            let (j, sign) = if n.component % 3 == 1 { (l.ny - n.j, -1.0) } else { (l.ny - 1 - n.j, 1.0) };
            out[l.index(NodeRef { j, ..n }).unwrap()] = sign * x;
        }
        out
    };
    let s = random_state(l.len(), 21);
    let a = reflect(&sys.rhs_vec(&s).unwrap());
    let b = sys.rhs_vec(&reflect(&s)).unwrap();
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-11 * scale);
    }
}

#[test]
fn tip_load_totals_the_requested_force() {
    let g = PatchGrid::patches(5, (7, 4, 5), 1.0 / 46.0, W, T, 2).unwrap();
    let mut sys = system(g, &three_layer(), 0.0);
    sys.set_tip_load(2.5e-6);
    assert!((sys.applied_force_z() + 2.5e-6).abs() < 1e-18);
    sys.set_tip_load(0.0);
    assert_eq!(sys.applied_force_z(), 0.0);
}

#[test]
fn initial_bend_and_observables() {
    let g = PatchGrid::full_domain((21, 5, 5), W, T).unwrap();
    let sys = system(g, &three_layer(), 0.0);
    let state = sys.initial_bend(0.01);
    let tip = sys.tip_displacement(&state);
    let x = 19.0 / 20.0;
    assert!((tip[2] - 0.01 * x * x * (3.0 - x)).abs() < 1e-15);
    assert_eq!(tip[0], 0.0);
    assert_eq!(tip[1], 0.0);
    let line = sys.centreline(&state);
    assert_eq!(line.len(), 19);
    for (p, x, u, v, w) in line {
        assert_eq!(p, 0);
        assert_eq!((u, v), (0.0, 0.0));
        assert!((w - 0.01 * x * x * (3.0 - x)).abs() < 1e-15);
    }
}
