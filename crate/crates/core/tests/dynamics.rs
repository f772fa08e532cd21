use patchbeam_core::dynamics::{integrate, sample_times};
use patchbeam_core::materials::*;
use patchbeam_core::{integrate_dynamics, period_and_decay, Error, PatchGrid, PatchSystem, SolverSettings};

#[test]
fn harmonic_oscillator_is_accurate() {
    let settings = SolverSettings { rtol: 1e-10, atol: 1e-12, ..Default::default() };
    let samples = sample_times(20.0, 0.5);
    let mut seen = Vec::new();
    let (y, stats) = integrate(
        |_, y, dy| {
            dy[0] = y[1];
            dy[1] = -4.0 * y[0];
            Ok(())
        },
        0.0,
        &[1.0, 0.0],
        20.0,
        &samples,
        &settings,
        |t, y| {
            seen.push((t, y[0]));
            Ok(())
        },
    )
    .unwrap();
    assert_eq!(seen.len(), samples.len());
    for (t, x) in seen {
        assert!((x - (2.0 * t).cos()).abs() < 1e-8, "t = {t}");
    }
    assert!((y[0] - 40.0f64.cos()).abs() < 1e-8);
    assert!(stats.accepted > 10);
    assert!(stats.evaluations > 6 * (stats.accepted + stats.rejected));
}

#[test]
fn exponential_growth_with_loose_tolerance() {
    let settings = SolverSettings { rtol: 1e-6, atol: 1e-9, max_step: 0.05 };
    let (y, stats) = integrate(
        |_, y, dy| {
            dy[0] = y[0];
            Ok(())
        },
        0.0,
        &[1.0],
        2.0,
        &[],
        &settings,
        |_, _| Ok(()),
    )
    .unwrap();
    assert!((y[0] - 2.0f64.exp()).abs() < 1e-5);
    assert!(stats.accepted >= 40);
}

#[test]
fn invalid_settings_are_rejected() {
    let bad = SolverSettings { rtol: 0.0, ..Default::default() };
    assert!(matches!(bad.validate(), Err(Error::Domain { what: "rtol", .. })));
    let r = integrate(|_, _, _| Ok(()), 1.0, &[0.0], 0.5, &[], &SolverSettings::default(), |_, _| Ok(()));
    assert!(matches!(r, Err(Error::Domain { what: "t_final", .. })));
}

#[test]
fn stiff_blow_up_reports_underflow() {
    // y' = y^2 from y = 1 blows up at t = 1.
    let r = integrate(
        |_, y, dy| {
            dy[0] = y[0] * y[0];
            Ok(())
        },
        0.0,
        &[1.0],
        2.0,
        &[],
        &SolverSettings::default(),
        |_, _| Ok(()),
    );
    assert!(matches!(r, Err(Error::StepSizeUnderflow { .. }) | Err(Error::Integrity { .. })), "{r:?}");
}

#[test]
fn sample_grid() {
    assert_eq!(sample_times(1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(sample_times(1.1, 0.5), vec![0.0, 0.5, 1.0, 1.1]);
}

#[test]
fn damped_sinusoid_period_and_decay() {
    let times: Vec<f64> = (0..=10000).map(|n| n as f64 * 0.1).collect();
    let values: Vec<f64> = times.iter().map(|t| (-0.01 * t).exp() * (0.05 * t).sin()).collect();
    let (period, decay) = period_and_decay(&times, &values).unwrap();
    assert!((period - 125.66370614359172).abs() < 1e-3);
    assert!((decay - 0.7153956).abs() < 1e-4, "{decay}");
}

#[test]
fn pure_sinusoid_has_no_decay() {
    let times: Vec<f64> = (0..=5000).map(|n| n as f64 * 0.1).collect();
    let values: Vec<f64> = times.iter().map(|t| (0.05 * t).cos()).collect();
    let (period, decay) = period_and_decay(&times, &values).unwrap();
    assert!((period - 125.66370614359172).abs() < 1e-3);
    assert!(decay.abs() < 1e-6);
}

#[test]
fn short_records_are_rejected() {
    let times: Vec<f64> = (0..100).map(|n| n as f64).collect();
    let values: Vec<f64> = times.iter().map(|t| (0.05 * t).sin()).collect();
    assert!(matches!(period_and_decay(&times, &values), Err(Error::InsufficientData(_))));
    assert!(matches!(period_and_decay(&times, &values[1..]), Err(Error::Contract(_))));
}

fn small_beam() -> PatchSystem {
    let model = MaterialModel::new(
        BeamGeometry { length: 0.105, width: 0.015, thickness: 0.009 },
        Mixture::AL_SIC,
        Grading::Homogeneous { metal_fraction: 1.0 },
    )
    .unwrap();
    let scales = NonDimScales::for_model(&model, ReferenceScale::ConstituentMax).unwrap();
    let grid = PatchGrid::full_domain((11, 3, 3), 0.015 / 0.105, 0.009 / 0.105).unwrap();
    PatchSystem::from_model(grid, &model, &scales, 0.0).unwrap()
}

#[test]
fn zero_initial_state_stays_at_rest() {
    let sys = small_beam();
    let traj = integrate_dynamics(&sys, &sys.zero_state(), 5.0, 1.0, &SolverSettings::default()).unwrap();
    assert_eq!(traj.times.len(), 6);
    assert!(traj.tip.iter().all(|t| *t == [0.0; 3]));
    assert!(traj.energy.iter().all(|&e| e == 0.0));
}

#[test]
fn undamped_beam_conserves_energy() {
    let sys = small_beam();
    let settings = SolverSettings { rtol: 1e-9, atol: 1e-12, ..Default::default() };
    let traj = integrate_dynamics(&sys, &sys.initial_bend(1e-3), 20.0, 1.0, &settings).unwrap();
    let e0 = traj.energy[0];
    assert!(e0 > 0.0);
    for e in &traj.energy {
        assert!((e - e0).abs() < 1e-6 * e0);
    }
    assert_eq!(traj.tip_w()[0], sys.tip_displacement(&sys.initial_bend(1e-3))[2]);
}

#[test]
fn damped_beam_loses_energy() {
    let mut sys = small_beam();
    sys.set_eta(0.05).unwrap();
    let traj = integrate_dynamics(&sys, &sys.initial_bend(1e-3), 20.0, 2.0, &SolverSettings::default()).unwrap();
    for pair in traj.energy.windows(2) {
        assert!(pair[1] < pair[0] * (1.0 + 1e-6));
    }
    assert!(traj.energy.last().unwrap() < &traj.energy[0]);
}
