//! Sparse Jacobian of the (linear) acceleration map by coloured probing.
//!
//! Displacement dofs are numbered patch-major in the order of the state's
//! displacement blocks (`0..n_dof`). The full first-order Jacobian is
//! `[[0, I], [K, C]]` with `K = da/dd` and `C = da/dq`.
//!
//! Probing runs with the coupled face planes held as independent inputs, so
//! every patch is isolated and one colouring serves any patch count. The
//! face columns are then folded back through the interpolation weights.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::patches::{NodeRef, PatchSystem, StateLayout};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < n_rows && c < n_cols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(v);
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n_rows, n_cols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n_rows) {
            let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
            *yr = self.col_idx[a..b].iter().zip(&self.values[a..b]).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[a..b].binary_search(&c).map_or(0.0, |p| self.values[a + p])
    }

    /// Entries as `(row, col, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |p| (r, self.col_idx[p], self.values[p]))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    /// `da/dd`.
    pub stiffness: SparseMatrix,
    /// `da/dq`.
    pub damping: SparseMatrix,
    /// Acceleration of the zero state (the forcing contribution).
    pub base: Vec<f64>,
}

impl Jacobian {
    pub fn n_dof(&self) -> usize {
        self.base.len()
    }

    /// `[y_d; y_q] = J [x_d; x_q]` in the `(displacement, velocity)` dof
    /// ordering, `2 n_dof` entries each.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n_dof();
        let (xd, xq) = x.split_at(n);
        let (yd, ya) = y.split_at_mut(n);
        yd.copy_from_slice(xq);
        let mut tmp = vec![0.0; n];
        self.stiffness.matvec(xd, ya);
        self.damping.matvec(xq, &mut tmp);
        ya.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
    }
}

/// Colour class of a probe: probes sharing a key have disjoint influence
/// rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Colour {
    comp: usize,
    i: usize,
    j: usize,
    k: usize,
}

const RADIUS: usize = 2;
const MODULUS: usize = 2 * RADIUS + 1;

fn colour(n: &NodeRef) -> Colour {
    Colour { comp: n.component % 3, i: n.i % MODULUS, j: n.j % MODULUS, k: n.k % MODULUS }
}

/// A unit perturbation: a dynamic node or a coupled face node.
#[derive(Debug, Clone, Copy)]
enum Probe {
    Dof(usize),
    Face(usize),
}

/// Acceleration rows (dof numbers) within the stencil radius of `n` in its
/// own patch.
fn influence(l: &StateLayout, n: &NodeRef, out: &mut Vec<usize>) {
    out.clear();
    let range = |c: usize| c.saturating_sub(RADIUS)..=c + RADIUS;
    for k in range(n.k) {
        for j in range(n.j) {
            for i in range(n.i) {
                for component in 0..3 {
                    if let Some(s) = l.index(NodeRef { patch: n.patch, component, i, j, k }) {
                        out.push(l.dof_of_state(s).unwrap());
                    }
                }
            }
        }
    }
    out.sort_unstable();
}

fn accelerations(
    system: &PatchSystem,
    ws: &mut crate::patches::Workspace,
    state: &[f64],
    faces: [&[f64]; 2],
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    system.rhs_with_faces(ws, state, faces, scratch)?;
    let l = system.layout();
    for (dof, a) in out.iter_mut().enumerate() {
        *a = scratch[l.vel_state_index(dof)];
    }
    Ok(())
}

fn coupled_accelerations(
    system: &PatchSystem,
    ws: &mut crate::patches::Workspace,
    state: &[f64],
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<()> {
    system.rhs(ws, 0.0, state, scratch)?;
    let l = system.layout();
    for (dof, a) in out.iter_mut().enumerate() {
        *a = scratch[l.vel_state_index(dof)];
    }
    Ok(())
}

/// Probe one block (`0` displacement, `1` velocity) with the faces decoupled,
/// then fold the face columns back through the interpolation weights.
fn probe_block(system: &PatchSystem, block: usize, base: &[f64]) -> Result<SparseMatrix> {
    let l = *system.layout();
    let n = l.n_dof();
    let faces = system.face_inputs();
    let mut colours: BTreeMap<Colour, Vec<Probe>> = BTreeMap::new();
    for dof in 0..n {
        colours.entry(colour(&l.locate(l.disp_state_index(dof)))).or_default().push(Probe::Dof(dof));
    }
    for (f, (_, node)) in faces.iter().enumerate() {
        colours.entry(colour(node)).or_default().push(Probe::Face(f));
    }

    let mut ws = system.workspace();
    let mut scratch = system.zero_state();
    let mut state = system.zero_state();
    let mut face_values = [vec![0.0; faces.len()], vec![0.0; faces.len()]];
    let mut acc = vec![0.0; n];
    let mut rows = Vec::new();
    let mut triplets = Vec::new();
    let mut face_triplets = Vec::new();
    let index = |dof: usize| if block == 0 { l.disp_state_index(dof) } else { l.vel_state_index(dof) };
    for members in colours.values() {
        for m in members {
            match *m {
                Probe::Dof(d) => state[index(d)] = 1.0,
                Probe::Face(f) => face_values[block][f] = 1.0,
            }
        }
        accelerations(system, &mut ws, &state, [&face_values[0], &face_values[1]], &mut scratch, &mut acc)?;
        for m in members {
            let (node, sink, col) = match *m {
                Probe::Dof(d) => {
                    state[index(d)] = 0.0;
                    (l.locate(l.disp_state_index(d)), &mut triplets, d)
                }
                Probe::Face(f) => {
                    face_values[block][f] = 0.0;
                    (faces[f].1, &mut face_triplets, f)
                }
            };
            influence(&l, &node, &mut rows);
            for &r in &rows {
                let v = acc[r] - base[r];
                if v != 0.0 {
                    sink.push((r, col, v));
                }
            }
        }
    }

    let nx = l.nx;
    let stencils = system.stencils();
    for (r, f, v) in face_triplets {
        let (s, node) = faces[f];
        let st = &stencils[s];
        for (&q, &w) in st.sources.iter().zip(&st.weights) {
            let src = NodeRef { patch: q, i: st.source_plane(nx), ..node };
            let dof = l.index(src).and_then(|s| l.dof_of_state(s)).ok_or(Error::Contract("face source is not a dof"))?;
            triplets.push((r, dof, v * w));
        }
    }
    Ok(SparseMatrix::from_triplets(n, n, triplets))
}

fn forcing_term(system: &PatchSystem) -> Result<Vec<f64>> {
    let n = system.layout().n_dof();
    let zero_faces = vec![0.0; system.face_len()];
    let mut base = vec![0.0; n];
    accelerations(
        system,
        &mut system.workspace(),
        &system.zero_state(),
        [&zero_faces, &zero_faces],
        &mut system.zero_state(),
        &mut base,
    )?;
    Ok(base)
}

/// Assemble `K`, `C` and the forcing term of `system`.
pub fn assemble_jacobian(system: &PatchSystem) -> Result<Jacobian> {
    let base = forcing_term(system)?;
    let stiffness = probe_block(system, 0, &base)?;
    let damping = probe_block(system, 1, &base)?;
    let jac = Jacobian { stiffness, damping, base };
    linearity_spot_check(system, &jac.stiffness, &jac.base)?;
    Ok(jac)
}

/// Assemble only `K` and the forcing term, all a static solve needs.
pub fn assemble_stiffness(system: &PatchSystem) -> Result<(SparseMatrix, Vec<f64>)> {
    let base = forcing_term(system)?;
    let stiffness = probe_block(system, 0, &base)?;
    linearity_spot_check(system, &stiffness, &base)?;
    Ok((stiffness, base))
}

/// Compare doubled probes against twice the assembled column for a few
/// displacement dofs spread over the state.
fn linearity_spot_check(system: &PatchSystem, stiffness: &SparseMatrix, base: &[f64]) -> Result<()> {
    let l = *system.layout();
    let n = l.n_dof();
    let mut ws = system.workspace();
    let mut scratch = system.zero_state();
    let mut acc = vec![0.0; n];
    let mut state = system.zero_state();
    for &dof in &[0, n / 3, n / 2, n - 1] {
        state[l.disp_state_index(dof)] = 2.0;
        coupled_accelerations(system, &mut ws, &state, &mut scratch, &mut acc)?;
        state[l.disp_state_index(dof)] = 0.0;
        let mut scale = 1.0f64;
        let mut deviation = 0.0f64;
        for r in 0..n {
            let col = stiffness.get(r, dof);
            scale = scale.max(col.abs());
            deviation = deviation.max((acc[r] - base[r] - 2.0 * col).abs());
        }
        if deviation > 1e-8 * scale {
            return Err(Error::Linearity { column: dof, deviation });
        }
    }
    Ok(())
}

/// Dense column-by-column Jacobian blocks `(K, C)` as row-major `n x n`
/// arrays. Only sensible for small systems.
pub fn dense_jacobian(system: &PatchSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    let l = *system.layout();
    let n = l.n_dof();
    let mut ws = system.workspace();
    let mut scratch = system.zero_state();
    let mut base = vec![0.0; n];
    coupled_accelerations(system, &mut ws, &system.zero_state(), &mut scratch, &mut base)?;
    let mut out = [vec![0.0; n * n], vec![0.0; n * n]];
    let mut state = system.zero_state();
    let mut acc = vec![0.0; n];
    for (block, m) in out.iter_mut().enumerate() {
        for d in 0..n {
            let idx = if block == 0 { l.disp_state_index(d) } else { l.vel_state_index(d) };
            state[idx] = 1.0;
            coupled_accelerations(system, &mut ws, &state, &mut scratch, &mut acc)?;
            state[idx] = 0.0;
            for r in 0..n {
                m[r * n + d] = acc[r] - base[r];
            }
        }
    }
    let [k, c] = out;
    Ok((k, c))
}
