mod common;

use patchbeam::output::{write_rows, DEFLECTION_HEADER, SPECTRUM_HEADER};
use patchbeam::run::*;
use patchbeam::Error;

fn csv_bytes<R: serde::Serialize>(header: &[&str], rows: &[R]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_rows(&mut buf, header, rows).unwrap();
    buf
}

#[test]
fn static_run_reports_tip_and_rows() {
    let s = common::small();
    let (rows, report) = run_static(&s).unwrap();
    let grid = s.grid().unwrap();
    assert_eq!(rows.len(), grid.n_patches * (s.discretisation.n_x - 2));
    let tip = report.tip.unwrap();
    assert!(tip[2] < 0.0);
    let max = rows.iter().fold(0.0f64, |m, r| m.max(r.w.abs()));
    assert!(report.max_deflection.unwrap() >= max * 0.999);
    assert!(report.residual.unwrap() < s.solver.static_tol);
    assert!(rows.windows(2).all(|p| p[0].x < p[1].x));
}

#[test]
fn zero_load_gives_zero_deflection() {
    let mut s = common::small();
    s.physics.tip_load = 0.0;
    let (rows, report) = run_static(&s).unwrap();
    assert!(rows.iter().all(|r| r.u == 0.0 && r.v == 0.0 && r.w == 0.0));
    assert_eq!(report.tip.unwrap(), [0.0; 3]);
}

#[test]
fn runs_are_deterministic() {
    let s = common::small();
    let a = csv_bytes(&DEFLECTION_HEADER, &run_static(&s).unwrap().0);
    let b = csv_bytes(&DEFLECTION_HEADER, &run_static(&s).unwrap().0);
    assert_eq!(a, b);
    let a = csv_bytes(&SPECTRUM_HEADER, &run_modes(&s, 4).unwrap().0);
    let b = csv_bytes(&SPECTRUM_HEADER, &run_modes(&s, 4).unwrap().0);
    assert_eq!(a, b);
}

#[test]
fn modes_run_returns_requested_rows() {
    let s = common::small();
    let (rows, spectrum, report) = run_modes(&s, 5).unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(spectrum.modes.len(), 5);
    assert!(rows.iter().all(|r| r.im >= 0.0 && r.re < 0.0));
    let z1 = spectrum.frequency(patchbeam_core::ModeType::ZBend, 1).unwrap();
    let (p, d) = period_decay_of(rows.iter().find(|r| r.im == z1).unwrap().re, z1);
    assert_eq!(report.period, Some(p));
    assert_eq!(report.decay, Some(d));
    assert!(run_modes(&s, 0).unwrap().0.is_empty());
}

#[test]
fn period_and_decay_follow_the_eigenvalue() {
    let (p, d) = period_decay_of(-0.01, 0.05);
    assert!((p - 2.0 * std::f64::consts::PI / 0.05).abs() < 1e-12);
    assert!((d - (1.0 - (-0.01 * p).exp())).abs() < 1e-15);
    assert_eq!(period_decay_of(0.0, 1.0).1, 0.0);
}

#[test]
fn simulate_from_rest_stays_at_rest() {
    let mut s = common::small();
    s.physics.init_amplitude = 0.0;
    let (rows, report) = run_simulate(&s, 5.0).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.tip_w == 0.0 && r.energy == 0.0));
    assert_eq!(report.period, None);
}

#[test]
fn simulate_samples_on_the_output_grid() {
    let mut s = common::small();
    s.output.sample_interval = 0.5;
    let (rows, _) = run_simulate(&s, 3.0).unwrap();
    assert_eq!(rows.len(), 7);
    for (k, r) in rows.iter().enumerate() {
        assert!((r.t - 0.5 * k as f64).abs() < 1e-12);
    }
    assert!(rows[0].tip_w != 0.0);
    assert!(rows.windows(2).all(|p| p[1].energy <= p[0].energy * (1.0 + 1e-6)));
}

#[test]
fn sweep_of_nothing_is_empty() {
    let s = common::small();
    assert!(run_sweep(&s, SweepParam::InterpOrder, &[], 2).unwrap().is_empty());
}

#[test]
fn sweep_records_failures_and_continues() {
    let s = common::small();
    let rows = run_sweep(&s, SweepParam::InterpOrder, &[4.0, 9.0, 2.5], 1).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0].status, "ok");
    assert!(rows[0].tip_w.unwrap() < 0.0);
    assert!(rows[0].freq_1.is_some() && rows[0].period.is_some());
    for r in &rows[1..] {
        assert!(r.status.starts_with("error:"), "{}", r.status);
        assert!(r.status.contains("discretisation.interp_order"));
        assert_eq!(r.tip_w, None);
        assert_eq!(r.freq_1, None);
    }
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let s = common::small();
    let values = [3.0, 4.0, 5.0, 6.0];
    let one = run_sweep(&s, SweepParam::InterpOrder, &values, 1).unwrap();
    let many = run_sweep(&s, SweepParam::InterpOrder, &values, 3).unwrap();
    assert_eq!(one, many);
    assert!(one.iter().zip(&values).all(|(r, v)| r.value == v.to_string()));
}

#[test]
fn sweep_rejects_parameters_the_scenario_lacks() {
    let s = common::small();
    let e = run_sweep(&s, SweepParam::ExponentA, &[1.0], 1).unwrap_err();
    assert!(matches!(&e, Error::Config { field, .. } if field == "sweep.param"));
    let full = s.as_full_domain();
    assert!(run_sweep(&full, SweepParam::NPatches, &[5.0], 1).is_err());
    assert!(SweepParam::parse("bogus").is_err());
    for name in ["a", "exponent_a", "N", "N_patches", "n_patches", "P", "interp_order"] {
        let p = SweepParam::parse(name).unwrap();
        assert_eq!(SweepParam::parse(p.as_str()).unwrap(), p);
    }
}

#[test]
fn bench_of_full_domain_against_itself() {
    let full = common::small().as_full_domain();
    let b = run_bench(&full).unwrap();
    assert_eq!(b.coverage, 1.0);
    assert_eq!(b.rhs_ratio, 1.0);
    assert_eq!(b.static_ratio, 1.0);
    assert!(b.rows.iter().all(|r| r.seconds >= 0.0));
}

#[test]
fn bench_reports_each_phase() {
    let b = run_bench(&common::small()).unwrap();
    for case in ["patches", "full_domain"] {
        for phase in ["rhs", "jacobian", "solve", "static"] {
            assert!(b.rows.iter().any(|r| r.case == case && r.phase == phase), "{case} {phase}");
        }
    }
    assert!(b.coverage > 0.0 && b.coverage < 1.0);
}
