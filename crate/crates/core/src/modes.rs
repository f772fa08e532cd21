//! Classification of vibration modes by cross-sectional motion.

use alloc::vec::Vec;
use core::fmt;

use crate::patches::{NodeRef, PatchSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModeType {
    ZBend,
    YBend,
    Torsion,
    Compression,
    Unclassified,
}

impl ModeType {
    pub const ALL: [ModeType; 5] =
        [Self::ZBend, Self::YBend, Self::Torsion, Self::Compression, Self::Unclassified];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ZBend => "z_bend",
            Self::YBend => "y_bend",
            Self::Torsion => "torsion",
            Self::Compression => "compression",
            Self::Unclassified => "unclassified",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for ModeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub re: f64,
    pub im: f64,
    pub mode_type: ModeType,
    /// 1-based ordinal within `mode_type`, by ascending `|im|`.
    pub mode_number: usize,
    /// Fractions for z-bend, y-bend, torsion, compression.
    pub participation: [f64; 4],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Spectrum {
    pub modes: Vec<Mode>,
}

impl Spectrum {
    /// Modes of one type, ascending in frequency.
    pub fn of_type(&self, t: ModeType) -> impl Iterator<Item = &Mode> {
        self.modes.iter().filter(move |m| m.mode_type == t)
    }

    /// `|im|` of the `number`-th mode of type `t` (1-based).
    pub fn frequency(&self, t: ModeType, number: usize) -> Option<f64> {
        self.of_type(t).find(|m| m.mode_number == number).map(|m| m.im.abs())
    }
}

/// Complex displacement dof vector, split into real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeShape {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Participation energies of a displacement shape: cross-section means of
/// `w`, `v`, `u` and the rigid rotation about the beam axis, each squared
/// and summed over planes, normalised to unit sum.
///
/// Panics if `shape` does not hold one entry per displacement dof.
pub fn participation(system: &PatchSystem, shape: &ModeShape) -> [f64; 4] {
    let l = system.layout();
    let grid = system.grid();
    let mut energy = [0.0f64; 4];
    for patch in 0..grid.n_patches {
        let g = grid.grid(patch);
        for i in g.dynamic_planes() {
            // Per plane: weighted sums for the means and the rotation.
            let mut acc = [[0.0f64; 2]; 3];
            let mut wsum = [0.0f64; 3];
            let mut moment = [0.0f64; 2];
            let mut inertia = 0.0f64;
            for component in 0..3 {
                let (nj, nk) = match component {
                    0 => (l.ny, l.nz),
                    1 => (l.ny + 1, l.nz),
                    _ => (l.ny, l.nz + 1),
                };
                for k in 0..nk {
                    for j in 0..nj {
                        let Some(s) = l.index(NodeRef { patch, component, i, j, k }) else { continue };
                        let dof = l.dof_of_state(s).unwrap();
                        let (wt, y, z) = match component {
                            0 => (g.u_volume(i, j, k), g.y(j), g.z(k)),
                            1 => (g.v_volume(i, j, k), g.y_half(j), g.z(k)),
                            _ => (g.w_volume(i, j, k), g.y(j), g.z_half(k)),
                        };
                        let val = [shape.re[dof], shape.im[dof]];
                        wsum[component] += wt;
                        for c in 0..2 {
                            acc[component][c] += wt * val[c];
                        }
                        // theta = (sum y w - sum z v) / (sum y^2 + sum z^2)
                        match component {
                            1 => {
                                for c in 0..2 {
                                    moment[c] -= wt * z * val[c];
                                }
                                inertia += wt * z * z;
                            }
                            2 => {
                                for c in 0..2 {
                                    moment[c] += wt * y * val[c];
                                }
                                inertia += wt * y * y;
                            }
                            _ => {}
                        }
                    }
                }
            }
            let mean_sq = |c: usize| {
                if wsum[c] > 0.0 {
                    (acc[c][0] * acc[c][0] + acc[c][1] * acc[c][1]) / (wsum[c] * wsum[c])
                } else {
                    0.0
                }
            };
            energy[0] += mean_sq(2);
            energy[1] += mean_sq(1);
            energy[3] += mean_sq(0);
            if inertia > 0.0 {
                let r2 = inertia / (wsum[1] + wsum[2]) * 2.0;
                let th = [moment[0] / inertia, moment[1] / inertia];
                energy[2] += r2 * (th[0] * th[0] + th[1] * th[1]);
            }
        }
    }
    let total: f64 = energy.iter().sum();
    if total > 0.0 {
        energy.map(|e| e / total)
    } else {
        [0.0; 4]
    }
}

fn label(p: &[f64; 4], threshold: f64) -> ModeType {
    let (arg, max) = p
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
    if max < threshold {
        return ModeType::Unclassified;
    }
    [ModeType::ZBend, ModeType::YBend, ModeType::Torsion, ModeType::Compression][arg]
}

/// Label eigenpairs `(re, im, shape)` and number them within each type.
/// Input order is kept; numbering follows ascending `|im|`.
pub fn classify_modes(
    system: &PatchSystem,
    pairs: &[(f64, f64, ModeShape)],
    threshold: f64,
) -> Spectrum {
    let mut modes: Vec<Mode> = pairs
        .iter()
        .map(|(re, im, shape)| {
            let participation = participation(system, shape);
            Mode { re: *re, im: *im, mode_type: label(&participation, threshold), mode_number: 0, participation }
        })
        .collect();
    let mut order: Vec<usize> = (0..modes.len()).collect();
    order.sort_by(|&a, &b| modes[a].im.abs().total_cmp(&modes[b].im.abs()));
    let mut counters = [0usize; 5];
    for idx in order {
        let t = modes[idx].mode_type as usize;
        counters[t] += 1;
        modes[idx].mode_number = counters[t];
    }
    Spectrum { modes }
}
