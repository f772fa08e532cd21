//! Experiment runners behind the command-line subcommands.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use patchbeam_core::{assemble_jacobian, assemble_stiffness, classify_modes, integrate_dynamics, period_and_decay, ModeType, PatchSystem, Spectrum};

use crate::error::{Error, Result};
use crate::linalg::{eigenmodes, solve_static, Factor};
use crate::output::{DeflectionRow, SpectrumRow, SweepRow, TimingRow, TrajectoryRow};
use crate::scenario::{GradingSpec, Scenario};

/// Timings and headline numbers of one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    /// `(phase, seconds)` in execution order.
    pub timings: Vec<(String, f64)>,
    pub coverage: f64,
    /// Largest centreline `|w|`.
    pub max_deflection: Option<f64>,
    /// Displacement at the free-end centre.
    pub tip: Option<[f64; 3]>,
    /// Static acceleration residual max-norm.
    pub residual: Option<f64>,
    /// Leading z-bending frequencies.
    pub frequencies: Vec<f64>,
    pub period: Option<f64>,
    pub decay: Option<f64>,
}

impl RunReport {
    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f()?;
        self.timings.push((phase.to_owned(), start.elapsed().as_secs_f64()));
        Ok(out)
    }

    /// Human-readable summary lines.
    pub fn summary(&self) -> Vec<String> {
        let mut out = vec![format!("coverage {}", self.coverage)];
        if let Some(m) = self.max_deflection {
            out.push(format!("max_deflection {m:e}"));
        }
        if let Some(t) = self.tip {
            out.push(format!("tip u {:e} v {:e} w {:e}", t[0], t[1], t[2]));
        }
        if let Some(r) = self.residual {
            out.push(format!("static_residual {r:e}"));
        }
        if !self.frequencies.is_empty() {
            out.push(format!("z_bend frequencies {:?}", self.frequencies));
        }
        if let Some(p) = self.period {
            out.push(format!("period {p}"));
        }
        if let Some(d) = self.decay {
            out.push(format!("decay_per_period {d}"));
        }
        for (phase, s) in &self.timings {
            out.push(format!("time {phase} {s:.3}s"));
        }
        out
    }
}

/// Static deflection under the configured tip load.
pub fn run_static(scenario: &Scenario) -> Result<(Vec<DeflectionRow>, RunReport)> {
    let mut report = RunReport::default();
    let sys = report.time("setup", || scenario.system())?;
    report.coverage = sys.grid().coverage;
    let (stiffness, base) = report.time("jacobian", || Ok(assemble_stiffness(&sys)?))?;
    let (disp, residual) = report.time("solve", || {
        solve_static(&stiffness, &base, scenario.solver.static_tol, scenario.solver.static_max_iter)
    })?;
    let state = sys.disp_to_state(&disp);
    let rows: Vec<DeflectionRow> = sys
        .centreline(&state)
        .into_iter()
        .map(|(patch, x, u, v, w)| DeflectionRow { patch, x, u, v, w })
        .collect();
    report.max_deflection = Some(rows.iter().fold(0.0f64, |m, r| m.max(r.w.abs())));
    report.tip = Some(sys.tip_displacement(&state));
    report.residual = Some(residual);
    Ok((rows, report))
}

/// The `count` lowest-frequency modes, labelled.
pub fn run_modes(scenario: &Scenario, count: usize) -> Result<(Vec<SpectrumRow>, Spectrum, RunReport)> {
    let mut report = RunReport::default();
    let sys = report.time("setup", || scenario.system())?;
    report.coverage = sys.grid().coverage;
    let jac = report.time("jacobian", || Ok(assemble_jacobian(&sys)?))?;
    let pairs = report.time("eigen", || eigenmodes(&jac, count, &scenario.eigen_options()))?;
    let input: Vec<_> = pairs.into_iter().map(|p| (p.value.re, p.value.im, p.shape)).collect();
    let spectrum = classify_modes(&sys, &input, scenario.solver.classify_threshold);
    let rows = spectrum
        .modes
        .iter()
        .map(|m| SpectrumRow {
            re: m.re,
            im: m.im,
            mode_type: m.mode_type.as_str().to_owned(),
            mode_number: m.mode_number,
            p_zbend: m.participation[0],
            p_ybend: m.participation[1],
            p_torsion: m.participation[2],
            p_compress: m.participation[3],
        })
        .collect();
    report.frequencies = (1..=3).filter_map(|n| spectrum.frequency(ModeType::ZBend, n)).collect();
    if let Some(m) = spectrum.of_type(ModeType::ZBend).find(|m| m.mode_number == 1) {
        let (period, decay) = period_decay_of(m.re, m.im);
        report.period = Some(period);
        report.decay = Some(decay);
    }
    Ok((rows, spectrum, report))
}

/// Period and fractional amplitude loss per period of a mode `re + i im`.
pub fn period_decay_of(re: f64, im: f64) -> (f64, f64) {
    let period = 2.0 * PI / im.abs();
    (period, 1.0 - (re * period).exp())
}

/// Free vibration released from the initial bend; the tip load is not
/// applied.
pub fn run_simulate(scenario: &Scenario, t_final: f64) -> Result<(Vec<TrajectoryRow>, RunReport)> {
    let mut report = RunReport::default();
    let mut sys = report.time("setup", || scenario.system())?;
    sys.set_tip_load(0.0);
    report.coverage = sys.grid().coverage;
    let initial = sys.initial_bend(scenario.physics.init_amplitude);
    let traj = report.time("integrate", || {
        Ok(integrate_dynamics(&sys, &initial, t_final, scenario.output.sample_interval, &scenario.integrator())?)
    })?;
    let rows = traj
        .times
        .iter()
        .zip(&traj.tip)
        .zip(&traj.energy)
        .map(|((&t, tip), &energy)| TrajectoryRow { t, tip_u: tip[0], tip_v: tip[1], tip_w: tip[2], energy })
        .collect();
    report.tip = traj.tip.last().copied();
    match period_and_decay(&traj.times, &traj.tip_w()) {
        Ok((p, d)) => {
            report.period = Some(p);
            report.decay = Some(d);
        }
        Err(patchbeam_core::Error::InsufficientData(_)) => {}
        Err(e) => return Err(e.into()),
    }
    Ok((rows, report))
}

/// Right-hand-side evaluations per timed batch in [`run_bench`].
pub const BENCH_RHS_EVALS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<TimingRow>,
    pub coverage: f64,
    /// Configured over full-domain time per rhs evaluation.
    pub rhs_ratio: f64,
    /// Configured over full-domain static solve time.
    pub static_ratio: f64,
}

fn case_name(s: &Scenario) -> &'static str {
    if s.discretisation.full_domain {
        "full_domain"
    } else {
        "patches"
    }
}

/// Rounds per timed phase in [`run_bench`]; each case keeps its fastest.
pub const BENCH_ROUNDS: usize = 5;

struct BenchCase {
    name: &'static str,
    sys: PatchSystem,
    state: Vec<f64>,
    coverage: f64,
    rhs: f64,
    jacobian: f64,
    solve: f64,
}

impl BenchCase {
    fn new(scenario: &Scenario) -> Result<Self> {
        let mut sys = scenario.system()?;
        if scenario.physics.tip_load == 0.0 {
            sys.set_tip_load(1e-6);
        }
        let state = sys.initial_bend(1e-3);
        let coverage = sys.grid().coverage;
        let name = case_name(scenario);
        Ok(Self { name, sys, state, coverage, rhs: f64::INFINITY, jacobian: f64::INFINITY, solve: f64::INFINITY })
    }

    fn time_rhs(&mut self) -> Result<()> {
        let mut out = vec![0.0; self.state.len()];
        let mut ws = self.sys.workspace();
        let start = Instant::now();
        for _ in 0..BENCH_RHS_EVALS {
            self.sys.rhs(&mut ws, 0.0, &self.state, &mut out)?;
        }
        self.rhs = self.rhs.min(start.elapsed().as_secs_f64() / BENCH_RHS_EVALS as f64);
        Ok(())
    }

    fn time_static(&mut self) -> Result<()> {
        let start = Instant::now();
        let (stiffness, base) = assemble_stiffness(&self.sys)?;
        let mid = Instant::now();
        let factor = Factor::new(&stiffness)?;
        let mut b: Vec<f64> = base.iter().map(|x| -x).collect();
        factor.solve_in_place(&mut b);
        let end = Instant::now();
        self.jacobian = self.jacobian.min((mid - start).as_secs_f64());
        self.solve = self.solve.min((end - mid).as_secs_f64());
        Ok(())
    }

    fn rows(&self, rows: &mut Vec<TimingRow>) {
        let phases = [
            ("rhs", self.rhs),
            ("jacobian", self.jacobian),
            ("solve", self.solve),
            ("static", self.jacobian + self.solve),
        ];
        for (phase, seconds) in phases {
            rows.push(TimingRow { case: self.name.into(), phase: phase.into(), seconds, coverage: self.coverage });
        }
    }
}

/// Time the configured grid against its full-domain counterpart at the same
/// microscale resolution. Rounds alternate between the two cases so drifting
/// machine load affects both alike.
pub fn run_bench(scenario: &Scenario) -> Result<BenchReport> {
    let mut cases = vec![BenchCase::new(scenario)?];
    if !scenario.discretisation.full_domain {
        cases.push(BenchCase::new(&scenario.as_full_domain())?);
    }
    for _ in 0..BENCH_ROUNDS {
        for c in cases.iter_mut() {
            c.time_rhs()?;
        }
    }
    for _ in 0..BENCH_ROUNDS {
        for c in cases.iter_mut() {
            c.time_static()?;
        }
    }
    let mut rows = Vec::new();
    for c in &cases {
        c.rows(&mut rows);
    }
    let (own, full) = (&cases[0], cases.last().unwrap());
    Ok(BenchReport {
        coverage: scenario.grid()?.coverage,
        rhs_ratio: own.rhs / full.rhs,
        static_ratio: (own.jacobian + own.solve) / (full.jacobian + full.solve),
        rows,
    })
}

/// Parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    ExponentA,
    NPatches,
    InterpOrder,
}

impl SweepParam {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "exponent_a" | "a" => Ok(Self::ExponentA),
            "N_patches" | "n_patches" | "N" => Ok(Self::NPatches),
            "P" | "interp_order" => Ok(Self::InterpOrder),
            other => Err(Error::config("sweep.param", format!("unknown parameter `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ExponentA => "exponent_a",
            Self::NPatches => "N_patches",
            Self::InterpOrder => "P",
        }
    }

    /// Reject parameters the scenario cannot vary.
    fn check(self, base: &Scenario) -> Result<()> {
        match self {
            Self::ExponentA => match base.grading {
                GradingSpec::Axial { .. } | GradingSpec::AxialRandom { .. } => Ok(()),
                _ => Err(Error::config("sweep.param", "exponent_a needs an axial grading")),
            },
            Self::NPatches | Self::InterpOrder if base.discretisation.full_domain => {
                Err(Error::config("sweep.param", "patch parameters do not apply to a full-domain scenario"))
            }
            _ => Ok(()),
        }
    }

    fn apply(self, base: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = base.clone();
        let count = |field: &str| {
            if value >= 0.0 && value.fract() == 0.0 && value.is_finite() {
                Ok(value as usize)
            } else {
                Err(Error::config(field, format!("{value} is not a count")))
            }
        };
        match self {
            Self::ExponentA => match &mut s.grading {
                GradingSpec::Axial { exponent_a } | GradingSpec::AxialRandom { exponent_a, .. } => {
                    *exponent_a = value
                }
                _ => unreachable!("checked by SweepParam::check"),
            },
            Self::NPatches => s.discretisation.n_patches = count("discretisation.n_patches")?,
            Self::InterpOrder => s.discretisation.interp_order = count("discretisation.interp_order")?,
        }
        s.validate()?;
        Ok(s)
    }
}

fn sweep_one(base: &Scenario, param: SweepParam, value: f64) -> SweepRow {
    let mut row = SweepRow {
        param: param.as_str().into(),
        value: value.to_string(),
        status: "ok".into(),
        max_deflection: None,
        tip_w: None,
        freq_1: None,
        freq_2: None,
        freq_3: None,
        period: None,
        decay: None,
    };
    let result = (|| -> Result<()> {
        let s = param.apply(base, value)?;
        if s.physics.tip_load != 0.0 {
            let (_, r) = run_static(&s)?;
            row.max_deflection = r.max_deflection;
            row.tip_w = r.tip.map(|t| t[2]);
        }
        let (_, _, r) = run_modes(&s, s.solver.eigen_count)?;
        row.freq_1 = r.frequencies.first().copied();
        row.freq_2 = r.frequencies.get(1).copied();
        row.freq_3 = r.frequencies.get(2).copied();
        row.period = r.period;
        row.decay = r.decay;
        Ok(())
    })();
    if let Err(e) = result {
        row.status = format!("error: {e}");
    }
    row
}

/// One summary row per value, in input order. Failures are recorded in the
/// row's `status` and the sweep continues. Period and decay come from the
/// first z-bending eigenvalue.
pub fn run_sweep(base: &Scenario, param: SweepParam, values: &[f64], threads: usize) -> Result<Vec<SweepRow>> {
    param.check(base)?;
    let slots: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; values.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..threads.max(1).min(values.len().max(1)) {
            scope.spawn(|| loop {
                let n = next.fetch_add(1, Ordering::Relaxed);
                let Some(&value) = values.get(n) else { break };
                let row = sweep_one(base, param, value);
                slots.lock().expect("sweep worker panicked")[n] = Some(row);
            });
        }
    });
    Ok(slots.into_inner().expect("sweep worker panicked").into_iter().map(|r| r.expect("every value ran")).collect())
}
