//! Adaptive Dormand–Prince 5(4) integration with dense output, and
//! trajectory diagnostics.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::patches::PatchSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step; infinite means unlimited.
    pub max_step: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { rtol: 1e-6, atol: 1e-9, max_step: f64::INFINITY }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        for (what, value) in [("rtol", self.rtol), ("atol", self.atol), ("max_step", self.max_step)] {
            if !(value > 0.0) {
                return Err(Error::Domain { what, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn rms_norm(v: impl Iterator<Item = f64>, n: usize) -> f64 {
    libm::sqrt(v.map(|x| x * x).sum::<f64>() / n.max(1) as f64)
}

/// Integrate `y' = f(t, y)` from `t0` to `t_final`, calling `observe` at
/// each of `samples` (ascending, within `[t0, t_final]`) with the dense
/// output there.
pub fn integrate<F, O>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_final: f64,
    samples: &[f64],
    settings: &SolverSettings,
    mut observe: O,
) -> Result<(Vec<f64>, IntegrationStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    O: FnMut(f64, &[f64]) -> Result<()>,
{
    settings.validate()?;
    if !(t_final >= t0) {
        return Err(Error::Domain { what: "t_final", value: t_final });
    }
    let n = y0.len();
    let (rtol, atol) = (settings.rtol, settings.atol);
    let mut stats = IntegrationStats::default();
    let mut y = y0.to_vec();
    let mut next_sample = 0;
    while next_sample < samples.len() && samples[next_sample] <= t0 {
        observe(samples[next_sample], &y)?;
        next_sample += 1;
    }
    if t_final == t0 || n == 0 {
        while next_sample < samples.len() {
            observe(samples[next_sample], &y)?;
            next_sample += 1;
        }
        return Ok((y, stats));
    }

    let mut k = [(); 7].map(|_| vec![0.0; n]);
    let mut ynew = vec![0.0; n];
    let mut ytmp = vec![0.0; n];
    let mut rcont = [(); 5].map(|_| vec![0.0; n]);
    let mut dense = vec![0.0; n];

    f(t0, &y, &mut k[0])?;
    stats.evaluations += 1;

    // Initial step (Hairer & Wanner).
    let sk = |a: f64, b: f64| atol + rtol * a.abs().max(b.abs());
    let d0 = rms_norm(y.iter().map(|&a| a / sk(a, a)), n);
    let d1 = rms_norm(y.iter().zip(&k[0]).map(|(&a, &b)| b / sk(a, a)), n);
    let mut h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(settings.max_step).min(t_final - t0);
    for i in 0..n {
        ytmp[i] = y[i] + h * k[0][i];
    }
    f(t0 + h, &ytmp, &mut k[1])?;
    stats.evaluations += 1;
    let d2 = rms_norm(y.iter().zip(k[1].iter().zip(&k[0])).map(|(&a, (&b, &c))| (b - c) / sk(a, a)), n) / h;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        libm::pow(0.01 / d1.max(d2), 0.2)
    };
    h = (100.0 * h).min(h1).min(settings.max_step).min(t_final - t0);

    let mut t = t0;
    let mut facold: f64 = 1e-4;
    let beta = 0.04;
    let expo1 = 0.2 - beta * 0.75;
    let mut last_rejected = false;
    loop {
        if t + 1.01 * h >= t_final {
            h = t_final - t;
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, step: h });
        }
        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k[0][i];
        }
        f(t + C2 * h, &ytmp, &mut k[1])?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        f(t + C3 * h, &ytmp, &mut k[2])?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        f(t + C4 * h, &ytmp, &mut k[3])?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        f(t + C5 * h, &ytmp, &mut k[4])?;
        for i in 0..n {
            ytmp[i] = y[i]
                + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        f(t + h, &ytmp, &mut k[5])?;
        for i in 0..n {
            ynew[i] = y[i]
                + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        f(t + h, &ynew, &mut k[6])?;
        stats.evaluations += 6;

        let err = rms_norm(
            (0..n).map(|i| {
                let e = h
                    * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i]
                        + E7 * k[6][i]);
                e / sk(y[i], ynew[i])
            }),
            n,
        );
        let fac11 = libm::pow(err, expo1);
        if err <= 1.0 {
            let fac = (fac11 / libm::pow(facold, beta) / 0.9).clamp(0.1, 5.0);
            facold = err.max(1e-4);
            stats.accepted += 1;
            let tnew = t + h;
            if next_sample < samples.len() && samples[next_sample] <= tnew {
                for i in 0..n {
                    let dy = ynew[i] - y[i];
                    let bspl = h * k[0][i] - dy;
                    rcont[0][i] = y[i];
                    rcont[1][i] = dy;
                    rcont[2][i] = bspl;
                    rcont[3][i] = dy - h * k[6][i] - bspl;
                    rcont[4][i] = h
                        * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i]
                            + D7 * k[6][i]);
                }
                while next_sample < samples.len() && samples[next_sample] <= tnew {
                    let ts = samples[next_sample];
                    let th = (ts - t) / h;
                    let th1 = 1.0 - th;
                    for i in 0..n {
                        dense[i] = rcont[0][i]
                            + th * (rcont[1][i]
                                + th1 * (rcont[2][i] + th * (rcont[3][i] + th1 * rcont[4][i])));
                    }
                    observe(ts, &dense)?;
                    next_sample += 1;
                }
            }
            core::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6);
            t = tnew;
            if t >= t_final {
                break;
            }
            let mut hnew = h / fac;
            if last_rejected {
                hnew = hnew.min(h);
            }
            last_rejected = false;
            h = hnew.min(settings.max_step);
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h /= (fac11 / 0.9).min(5.0);
        }
    }
    while next_sample < samples.len() {
        observe(samples[next_sample], &y)?;
        next_sample += 1;
    }
    Ok((y, stats))
}

/// Tip displacement and energy history of a beam run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub tip: Vec<[f64; 3]>,
    pub energy: Vec<f64>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    pub fn tip_w(&self) -> Vec<f64> {
        self.tip.iter().map(|t| t[2]).collect()
    }
}

/// Evenly spaced sample times `0, dt, 2 dt, ...` up to `t_final`.
pub fn sample_times(t_final: f64, dt: f64) -> Vec<f64> {
    let n = libm::floor(t_final / dt + 1e-9) as usize;
    let mut out: Vec<f64> = (0..=n).map(|m| m as f64 * dt).collect();
    if let Some(last) = out.last() {
        if t_final - last > 1e-9 * dt {
            out.push(t_final);
        }
    }
    out
}

/// Integrate `system` from `initial`, recording the tip displacement and
/// total energy every `sample_interval`.
pub fn integrate_dynamics(
    system: &PatchSystem,
    initial: &[f64],
    t_final: f64,
    sample_interval: f64,
    settings: &SolverSettings,
) -> Result<Trajectory> {
    if !(sample_interval > 0.0) {
        return Err(Error::Domain { what: "sample_interval", value: sample_interval });
    }
    let samples = sample_times(t_final, sample_interval);
    let mut ws = system.workspace();
    let mut ews = system.workspace();
    let mut traj = Trajectory::default();
    let (_, stats) = integrate(
        |t, y, dy| system.rhs(&mut ws, t, y, dy),
        0.0,
        initial,
        t_final,
        &samples,
        settings,
        |t, y| {
            traj.times.push(t);
            traj.tip.push(system.tip_displacement(y));
            traj.energy.push(system.energy(&mut ews, y)?);
            Ok(())
        },
    )?;
    traj.stats = stats;
    Ok(traj)
}

/// Vibration period from positive-going zero crossings and the mean
/// fractional amplitude loss per period from successive positive peaks.
///
/// A signal that starts inside a positive lobe is taken to start at that
/// lobe's peak (release from rest).
pub fn period_and_decay(times: &[f64], values: &[f64]) -> Result<(f64, f64)> {
    if times.len() != values.len() {
        return Err(Error::Contract("times and values differ in length"));
    }
    let mut crossings = Vec::new();
    for n in 1..values.len() {
        let (a, b) = (values[n - 1], values[n]);
        if a <= 0.0 && b > 0.0 {
            crossings.push(times[n - 1] + (times[n] - times[n - 1]) * (-a) / (b - a));
        }
    }
    if crossings.len() < 2 {
        return Err(Error::InsufficientData("fewer than two positive-going zero crossings"));
    }
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;

    // Peaks of positive lobes; a lobe cut off by the end of the record only
    // counts if its maximum is interior.
    let mut peaks = Vec::new();
    let mut n = 0;
    while n < values.len() {
        if values[n] <= 0.0 {
            n += 1;
            continue;
        }
        let start = n;
        while n < values.len() && values[n] > 0.0 {
            n += 1;
        }
        let lobe = &values[start..n];
        let (m, _) = lobe
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        let at = start + m;
        if n == values.len() && at + 1 == values.len() {
            continue;
        }
        peaks.push(refine_peak(values, at));
    }
    if peaks.len() < 2 {
        return Err(Error::InsufficientData("fewer than two positive peaks"));
    }
    let ratio = libm::pow(peaks[peaks.len() - 1] / peaks[0], 1.0 / (peaks.len() - 1) as f64);
    Ok((period, 1.0 - ratio))
}

/// Parabolic refinement of a sampled maximum (uniform sampling assumed).
fn refine_peak(values: &[f64], at: usize) -> f64 {
    if at == 0 || at + 1 >= values.len() {
        return values[at];
    }
    let (a, b, c) = (values[at - 1], values[at], values[at + 1]);
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return b;
    }
    b - 0.125 * (c - a) * (c - a) / denom
}
