use patchbeam_core::materials::*;
use patchbeam_core::Error;

fn close(a: f64, b: f64, rel: f64) -> bool {
    libm::fabs(a - b) <= rel * libm::fabs(b)
}

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
        BeamGeometry { length: 0.11, width: 0.01, thickness: 0.01 },
        Mixture::AL_SIC,
        Grading::Axial { exponent },
    )
    .unwrap()
}

#[test]
fn density_poisson_endpoints_and_interior() {
    let (m, c) = (ConstituentProps::ALUMINIUM, ConstituentProps::SILICON_CARBIDE);
    assert_eq!(mix_density_poisson(1.0, &m, &c).unwrap(), (2700.0, 0.33));
    assert_eq!(mix_density_poisson(0.0, &m, &c).unwrap(), (3200.0, 0.17));
    let (rho, nu) = mix_density_poisson(0.8, &m, &c).unwrap();
    assert!(close(rho, 2800.0, 1e-14) && close(nu, 0.298, 1e-14));
    assert!(matches!(mix_density_poisson(1.2, &m, &c), Err(Error::Domain { .. })));
}

#[test]
fn young_mixing_rule() {
    assert!(close(mix_young_semi_empirical(1.0, 67e9, 302e9, 91.6e9).unwrap(), 67e9, 1e-14));
    assert!(close(mix_young_semi_empirical(0.0, 67e9, 302e9, 91.6e9).unwrap(), 302e9, 1e-14));
    // (0.8*67*k + 0.2*302) / (0.8 k + 0.2), k = 393.6/158.6
    let e = mix_young_semi_empirical(0.8, 67e9, 302e9, 91.6e9).unwrap();
    assert!(close(e, 88.506_635_891_517_6e9, 1e-12), "{e}");
    assert!(matches!(mix_young_semi_empirical(0.5, -1.0, 302e9, 91.6e9), Err(Error::Domain { .. })));
}

#[test]
fn lame_conversion() {
    let (l, m) = lame_from_young_poisson(67e9, 0.33).unwrap();
    assert!(close(l, 48.894_294_559_929e9, 1e-12) && close(m, 25.187_969_924_812e9, 1e-12));
    let (l, m) = lame_from_young_poisson(302e9, 0.17).unwrap();
    assert!(close(l, 66.485_366_485_366e9, 1e-12) && close(m, 129.059_829_059_829e9, 1e-12));
    assert_eq!(lame_from_young_poisson(10.0, 0.0).unwrap(), (0.0, 5.0));
    assert!(matches!(lame_from_young_poisson(1.0, 0.5), Err(Error::SingularMaterial { .. })));
}

#[test]
fn axial_fraction() {
    assert_eq!(axial_metal_fraction(0.0, 1.7).unwrap(), 0.4);
    assert_eq!(axial_metal_fraction(1.0, 0.3).unwrap(), 0.2);
    assert!(close(axial_metal_fraction(0.5, 2.0).unwrap(), 0.35, 1e-15));
    assert!(axial_metal_fraction(1.5, 1.0).is_err());
}

#[test]
fn layered_sampling() {
    let model = three_layer();
    let al = model.sample([0.05, 0.0, -0.004], 0).unwrap();
    let (l, m) = lame_from_young_poisson(67e9, 0.33).unwrap();
    assert_eq!(al.rho, 2700.0);
    assert!(close(al.lambda, l, 1e-14) && close(al.mu, m, 1e-14));
    // Interface at z = -1.5 mm goes to the middle layer.
    assert!(close(model.sample([0.0, 0.0, -0.0015], 0).unwrap().rho, 2800.0, 1e-14));
    assert!(close(model.sample([0.0, 0.0, 0.0045], 0).unwrap().rho, 2900.0, 1e-14));
    assert!(model.sample([0.0, 0.0, 0.005], 0).is_err());
    assert!(model.sample([0.2, 0.0, 0.0], 0).is_err());
}

#[test]
fn axial_sampling_at_fixed_end() {
    let p = axial(1.0).sample([0.0, 0.0, 0.0], 0).unwrap();
    assert!(close(p.rho, 3000.0, 1e-14));
}

#[test]
fn zero_amplitude_random_matches_axial() {
    let base = axial(0.5);
    let random = MaterialModel::new(
        *base.geometry(),
        Mixture::AL_SIC,
        Grading::AxialRandom { exponent: 0.5, alpha: 0.0, seed: 9 },
    )
    .unwrap();
    for id in 0..20u64 {
        let pt = [0.11 * id as f64 / 19.0, 0.001, -0.002];
        assert_eq!(base.sample(pt, id).unwrap(), random.sample(pt, id).unwrap());
    }
}

#[test]
fn node_draws_are_reproducible_and_bounded() {
    for id in 0..200 {
        let a = node_uniform(42, id);
        assert_eq!(a.to_bits(), node_uniform(42, id).to_bits());
        assert!((-1.0..=1.0).contains(&a));
    }
    assert_ne!(node_uniform(42, 3), node_uniform(43, 3));
    assert_ne!(node_uniform(42, 3), node_uniform(42, 4));
}

#[test]
fn scales() {
    let al = MaterialModel::new(
        BeamGeometry { length: 0.105, width: 0.015, thickness: 0.009 },
        Mixture::AL_SIC,
        Grading::Homogeneous { metal_fraction: 1.0 },
    )
    .unwrap();
    let s = NonDimScales::for_model(&al, ReferenceScale::ConstituentMax).unwrap();
    assert!(close(s.time, 2.107_821_256_122_348e-5, 1e-12));
    assert!(close(s.stress / (s.density_ref * s.length * s.length / (s.time * s.time)), 1.0, 1e-15));
    assert!(close(s.stress, 67e9, 1e-12));

    let layered = three_layer();
    let field = NonDimScales::for_model(&layered, ReferenceScale::FieldMax).unwrap();
    assert!(close(field.young_ref, 116.761_014_686_248e9, 1e-12));
    assert!(close(field.density_ref, 2900.0, 1e-14));
    let cons = NonDimScales::for_model(&layered, ReferenceScale::ConstituentMax).unwrap();
    assert_eq!((cons.young_ref, cons.density_ref), (302e9, 3200.0));
}

#[test]
fn invalid_models_are_rejected() {
    let geometry = BeamGeometry { length: 0.1, width: 0.01, thickness: 0.009 };
    let bad_layers = Grading::Layered { layers: vec![Layer { thickness: 0.004, metal_fraction: 1.0 }] };
    assert!(MaterialModel::new(geometry, Mixture::AL_SIC, bad_layers).is_err());
    let mut mix = Mixture::AL_SIC;
    mix.metal.poisson_ratio = 0.6;
    assert!(matches!(
        MaterialModel::new(geometry, mix, Grading::Homogeneous { metal_fraction: 1.0 }),
        Err(Error::Domain { what: "poisson_ratio", .. })
    ));
}
