//! Patch layout, inter-patch coupling and the global time derivative.
//!
//! Lengths are nondimensional with beam length 1. Patch `0` owns the clamped
//! end at `x = 0` and patch `N - 1` the free end at `x = 1`.
//!
//! The flattened state is patch-major. Each patch contributes
//! `[u, v, w, u_dot, v_dot, w_dot]`, every block listing only the dynamic real
//! nodes (planes `1..=nx-2`, no ghosts) x-fastest, then y, then z.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result, COMPONENT_NAMES};
use crate::materials::{MaterialModel, NonDimScales};
use crate::microgrid::{
    acceleration, apply_fixed_left, apply_free_right, apply_transverse_bcs, compute_stress,
    energy_terms, DisplacementField, FaceKind, MaterialField, StaggeredGrid, StressField,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Order-P interpolation of one patch face from next-to-face planes.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingStencil {
    pub patch: usize,
    pub side: Side,
    pub sources: Vec<usize>,
    pub source_x: Vec<f64>,
    pub target_x: f64,
    pub weights: Vec<f64>,
}

impl CouplingStencil {
    /// Plane of the target patch that receives the interpolant.
    pub fn target_plane(&self, nx: usize) -> usize {
        match self.side {
            Side::Left => 0,
            Side::Right => nx - 1,
        }
    }

    /// Plane of each source patch that is sampled.
    pub fn source_plane(&self, nx: usize) -> usize {
        match self.side {
            Side::Left => nx - 2,
            Side::Right => 1,
        }
    }
}

/// Lagrange basis weights through `xs` evaluated at `target`.
pub fn lagrange_weights(xs: &[f64], target: f64) -> Vec<f64> {
    xs.iter()
        .enumerate()
        .map(|(m, &xm)| {
            xs.iter()
                .enumerate()
                .filter(|&(n, _)| n != m)
                .fold(1.0, |acc, (_, &xn)| acc * (target - xn) / (xm - xn))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchGrid {
    pub n_patches: usize,
    pub centres: Vec<f64>,
    /// Centre spacing `H` (zero in full-domain mode).
    pub spacing: f64,
    pub patch_length: f64,
    pub order: usize,
    pub coverage: f64,
    grids: Vec<StaggeredGrid>,
}

impl PatchGrid {
    /// One patch spanning the whole beam with `nx` nodes along it.
    pub fn full_domain(nodes: (usize, usize, usize), width: f64, thickness: f64) -> Result<Self> {
        let nx = nodes.0;
        if nx < 3 {
            return Err(Error::config("discretisation.n_x", "at least 3 nodes required"));
        }
        let dx = 1.0 / (nx - 1) as f64;
        let grid = StaggeredGrid::new(nodes, dx, width, thickness, 0.0)?
            .with_ends(FaceKind::Fixed, FaceKind::Free)?;
        Ok(Self {
            n_patches: 1,
            centres: vec![0.5],
            spacing: 0.0,
            patch_length: 1.0,
            order: 0,
            coverage: 1.0,
            grids: vec![grid],
        })
    }

    /// `n_patches` equispaced patches of `nodes.0` points spaced `dx`; the
    /// first and last patch faces coincide with the beam ends.
    pub fn patches(
        n_patches: usize,
        nodes: (usize, usize, usize),
        dx: f64,
        width: f64,
        thickness: f64,
        order: usize,
    ) -> Result<Self> {
        let nx = nodes.0;
        if n_patches < 2 {
            return Err(Error::config("discretisation.n_patches", "patch mode needs at least 2 patches"));
        }
        if nx < 3 {
            return Err(Error::config("discretisation.n_x", "at least 3 nodes required"));
        }
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::config("discretisation.delta_x", "must be positive"));
        }
        if order == 0 || order > n_patches - 1 {
            return Err(Error::config(
                "discretisation.interp_order",
                "interpolation order must lie in 1..=n_patches-1",
            ));
        }
        let h = (nx - 1) as f64 * dx;
        let spacing = (1.0 - h) / (n_patches - 1) as f64;
        if h >= spacing {
            return Err(Error::config(
                "discretisation",
                "patches overlap: patch length must be below the patch spacing",
            ));
        }
        let centres: Vec<f64> = (0..n_patches).map(|p| 0.5 * h + p as f64 * spacing).collect();
        let mut grids = Vec::with_capacity(n_patches);
        for (p, &c) in centres.iter().enumerate() {
            let left = if p == 0 { FaceKind::Fixed } else { FaceKind::Coupled };
            let right = if p + 1 == n_patches { FaceKind::Free } else { FaceKind::Coupled };
            grids.push(StaggeredGrid::new(nodes, dx, width, thickness, c - 0.5 * h)?.with_ends(left, right)?);
        }
        Ok(Self {
            n_patches,
            centres,
            spacing,
            patch_length: h,
            order,
            coverage: n_patches as f64 * (nx - 2) as f64 * dx,
            grids,
        })
    }

    pub fn is_full_domain(&self) -> bool {
        self.n_patches == 1
    }

    pub fn grid(&self, patch: usize) -> &StaggeredGrid {
        &self.grids[patch]
    }

    pub fn grids(&self) -> &[StaggeredGrid] {
        &self.grids
    }

    /// First patch of the stencil feeding face `side` of `patch`.
    fn stencil_start(&self, patch: usize, side: Side) -> usize {
        let back = match side {
            Side::Left => self.order.div_ceil(2),
            Side::Right => self.order / 2,
        };
        patch.saturating_sub(back).min(self.n_patches - 1 - self.order)
    }

    /// Stencils for every coupled face (none in full-domain mode).
    pub fn coupling_weights(&self) -> Vec<CouplingStencil> {
        if self.is_full_domain() {
            return Vec::new();
        }
        let h = self.patch_length;
        let dx = self.grids[0].dx;
        let mut out = Vec::with_capacity(2 * self.n_patches);
        for patch in 0..self.n_patches {
            for side in [Side::Left, Side::Right] {
                let kind = match side {
                    Side::Left => self.grids[patch].left,
                    Side::Right => self.grids[patch].right,
                };
                if kind != FaceKind::Coupled {
                    continue;
                }
                let start = self.stencil_start(patch, side);
                let sources: Vec<usize> = (start..=start + self.order).collect();
                let (source_x, target_x): (Vec<f64>, f64) = match side {
                    Side::Right => (
                        sources.iter().map(|&q| self.centres[q] - 0.5 * h + dx).collect(),
                        self.centres[patch] + 0.5 * h,
                    ),
                    Side::Left => (
                        sources.iter().map(|&q| self.centres[q] + 0.5 * h - dx).collect(),
                        self.centres[patch] - 0.5 * h,
                    ),
                };
                let weights = lagrange_weights(&source_x, target_x);
                out.push(CouplingStencil { patch, side, sources, source_x, target_x, weights });
            }
        }
        out
    }
}

/// Fill coupled face planes of every patch by interpolation. `scratch` is
/// reused between calls.
pub fn exchange_faces(
    fields: &mut [DisplacementField],
    stencils: &[CouplingStencil],
    nx: usize,
    scratch: &mut Vec<f64>,
) {
    for st in stencils {
        let target = st.target_plane(nx);
        let source = st.source_plane(nx);
        for comp in 0..3 {
            let [_, b, c] = fields[st.patch].components()[comp].dims();
            scratch.clear();
            scratch.resize(b * c, 0.0);
            for (&q, &wt) in st.sources.iter().zip(&st.weights) {
                let plane = fields[q].components()[comp].as_slice()[source..].iter().step_by(nx);
                scratch.iter_mut().zip(plane).for_each(|(s, &x)| *s += wt * x);
            }
            let f = fields[st.patch].components_mut().into_iter().nth(comp).unwrap();
            let plane = f.as_mut_slice()[target..].iter_mut().step_by(nx);
            plane.zip(scratch.iter()).for_each(|(t, &s)| *t = s);
        }
        let side = match st.side {
            Side::Left => 0,
            Side::Right => 1,
        };
        fields[st.patch].mark_face_ready(side);
    }
}

/// Location of one state entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRef {
    pub patch: usize,
    /// 0..3 displacement u, v, w; 3..6 the matching velocities.
    pub component: usize,
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

/// Mapping between the flat state vector and per-patch fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub n_patches: usize,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl StateLayout {
    pub fn new(grid: &PatchGrid) -> Self {
        let g = grid.grid(0);
        Self { n_patches: grid.n_patches, nx: g.nx, ny: g.ny, nz: g.nz }
    }

    /// Dynamic real node counts of u, v, w per patch.
    pub fn component_counts(&self) -> [usize; 3] {
        let m = self.nx - 2;
        [m * self.ny * self.nz, m * (self.ny - 1) * self.nz, m * self.ny * (self.nz - 1)]
    }

    /// Displacement degrees of freedom per patch.
    pub fn disp_per_patch(&self) -> usize {
        self.component_counts().iter().sum()
    }

    pub fn per_patch(&self) -> usize {
        2 * self.disp_per_patch()
    }

    pub fn len(&self) -> usize {
        self.n_patches * self.per_patch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total displacement degrees of freedom.
    pub fn n_dof(&self) -> usize {
        self.n_patches * self.disp_per_patch()
    }

    /// Extents of the dynamic real block of component `c` (0..3): the
    /// first index of each axis and the counts.
    pub(crate) fn block(&self, c: usize) -> ([usize; 3], [usize; 3]) {
        let m = self.nx - 2;
        match c {
            0 => ([1, 0, 0], [m, self.ny, self.nz]),
            1 => ([1, 1, 0], [m, self.ny - 1, self.nz]),
            _ => ([1, 0, 1], [m, self.ny, self.nz - 1]),
        }
    }

    fn component_offset(&self, c: usize) -> usize {
        let counts = self.component_counts();
        counts[..c % 3].iter().sum::<usize>() + if c >= 3 { self.disp_per_patch() } else { 0 }
    }

    /// State index of a node, if it is a dynamic real node.
    pub fn index(&self, node: NodeRef) -> Option<usize> {
        let (lo, n) = self.block(node.component % 3);
        let idx = [node.i, node.j, node.k];
        let mut rel = [0usize; 3];
        for a in 0..3 {
            if idx[a] < lo[a] || idx[a] >= lo[a] + n[a] {
                return None;
            }
            rel[a] = idx[a] - lo[a];
        }
        Some(
            node.patch * self.per_patch()
                + self.component_offset(node.component)
                + rel[0]
                + n[0] * (rel[1] + n[1] * rel[2]),
        )
    }

    pub fn locate(&self, index: usize) -> NodeRef {
        let patch = index / self.per_patch();
        let mut r = index % self.per_patch();
        let counts = self.component_counts();
        let mut component = 0;
        if r >= self.disp_per_patch() {
            r -= self.disp_per_patch();
            component = 3;
        }
        for (c, &count) in counts.iter().enumerate() {
            if r < count {
                component += c;
                break;
            }
            r -= count;
        }
        let (lo, n) = self.block(component % 3);
        NodeRef {
            patch,
            component,
            i: lo[0] + r % n[0],
            j: lo[1] + (r / n[0]) % n[1],
            k: lo[2] + r / (n[0] * n[1]),
        }
    }

    /// Displacement dof number (0..n_dof) of a displacement state index.
    pub fn dof_of_state(&self, index: usize) -> Option<usize> {
        let patch = index / self.per_patch();
        let r = index % self.per_patch();
        (r < self.disp_per_patch()).then(|| patch * self.disp_per_patch() + r)
    }

    /// State index of displacement dof `dof`.
    pub fn disp_state_index(&self, dof: usize) -> usize {
        let d = self.disp_per_patch();
        (dof / d) * self.per_patch() + dof % d
    }

    /// State index of the velocity of displacement dof `dof`.
    pub fn vel_state_index(&self, dof: usize) -> usize {
        self.disp_state_index(dof) + self.disp_per_patch()
    }

    /// Visit the contiguous x-rows of every block as `(component 0..6,
    /// state offset within patch, field offset of the row start, row length)`.
    fn for_each_row(&self, field_dims: impl Fn(usize) -> [usize; 3], mut f: impl FnMut(usize, usize, usize, usize)) {
        for c in 0..6 {
            let (lo, n) = self.block(c % 3);
            let off = self.component_offset(c);
            let [a, b, _] = field_dims(c % 3);
            for k in 0..n[2] {
                for j in 0..n[1] {
                    let field = lo[0] + a * ((lo[1] + j) + b * (lo[2] + k));
                    f(c, off + n[0] * (j + n[1] * k), field, n[0]);
                }
            }
        }
    }

    /// Copy dynamic nodes out of `state`; faces and ghosts are untouched.
    pub fn unpack(&self, state: &[f64], disp: &mut [DisplacementField], vel: &mut [DisplacementField]) {
        for p in 0..self.n_patches {
            let base = p * self.per_patch();
            let (d, v) = (&mut disp[p], &mut vel[p]);
            let dims = |c: usize| d.components()[c].dims();
            let dims: [[usize; 3]; 3] = [dims(0), dims(1), dims(2)];
            let mut fields = [
                d.u.as_mut_slice(),
                d.v.as_mut_slice(),
                d.w.as_mut_slice(),
                v.u.as_mut_slice(),
                v.v.as_mut_slice(),
                v.w.as_mut_slice(),
            ];
            self.for_each_row(|c| dims[c], |c, off, field, len| {
                fields[c][field..field + len].copy_from_slice(&state[base + off..base + off + len]);
            });
            d.invalidate_faces();
            v.invalidate_faces();
        }
    }

    pub fn pack(&self, disp: &[DisplacementField], vel: &[DisplacementField], state: &mut [f64]) {
        for p in 0..self.n_patches {
            let base = p * self.per_patch();
            let (d, v) = (&disp[p], &vel[p]);
            let fields = [
                d.u.as_slice(),
                d.v.as_slice(),
                d.w.as_slice(),
                v.u.as_slice(),
                v.v.as_slice(),
                v.w.as_slice(),
            ];
            self.for_each_row(|c| d.components()[c].dims(), |c, off, field, len| {
                state[base + off..base + off + len].copy_from_slice(&fields[c][field..field + len]);
            });
        }
    }
}

/// Reusable buffers for [`PatchSystem::rhs`].
#[derive(Debug, Clone)]
pub struct Workspace {
    disp: Vec<DisplacementField>,
    vel: Vec<DisplacementField>,
    acc: Vec<DisplacementField>,
    stress: Vec<StressField>,
    scratch: Vec<f64>,
}

/// The coupled semi-discrete beam: `d/dt [d; q] = [q; a(d, q)]`.
#[derive(Debug, Clone)]
pub struct PatchSystem {
    grid: PatchGrid,
    layout: StateLayout,
    stencils: Vec<CouplingStencil>,
    materials: Vec<MaterialField>,
    forcing: Option<DisplacementField>,
    eta: f64,
}

impl PatchSystem {
    pub fn new(grid: PatchGrid, materials: Vec<MaterialField>, eta: f64) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::Domain { what: "eta", value: eta });
        }
        if materials.len() != grid.n_patches {
            return Err(Error::Contract("one material field per patch required"));
        }
        let layout = StateLayout::new(&grid);
        let stencils = grid.coupling_weights();
        Ok(Self { grid, layout, stencils, materials, forcing: None, eta })
    }

    /// Sample `model` on every patch.
    pub fn from_model(
        grid: PatchGrid,
        model: &MaterialModel,
        scales: &NonDimScales,
        eta: f64,
    ) -> Result<Self> {
        let materials = grid
            .grids()
            .iter()
            .enumerate()
            .map(|(p, g)| MaterialField::sample(model, scales, g, p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, materials, eta)
    }

    pub fn grid(&self) -> &PatchGrid {
        &self.grid
    }

    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    pub fn stencils(&self) -> &[CouplingStencil] {
        &self.stencils
    }

    pub fn materials(&self) -> &[MaterialField] {
        &self.materials
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn set_eta(&mut self, eta: f64) -> Result<()> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::Domain { what: "eta", value: eta });
        }
        self.eta = eta;
        Ok(())
    }

    /// Spread a total nondimensional force `magnitude` acting in `-z`
    /// uniformly over the `w` nodes of the last dynamic plane of the free-end
    /// patch. Zero removes the load.
    pub fn set_tip_load(&mut self, magnitude: f64) {
        if magnitude == 0.0 {
            self.forcing = None;
            return;
        }
        let last = self.grid.n_patches - 1;
        let g = self.grid.grid(last);
        let mut f = DisplacementField::zeros(g);
        let density = -magnitude / (g.dx * g.width() * g.thickness());
        for kk in 1..g.nz {
            for j in 0..g.ny {
                f.w[(g.nx - 2, j, kk)] = density;
            }
        }
        self.forcing = Some(f);
    }

    /// Total force applied through the tip load (signed, +z positive).
    pub fn applied_force_z(&self) -> f64 {
        let Some(f) = &self.forcing else { return 0.0 };
        let g = self.grid.grid(self.grid.n_patches - 1);
        let mut total = 0.0;
        for kk in 1..g.nz {
            for j in 0..g.ny {
                for i in g.dynamic_planes() {
                    total += g.w_volume(i, j, kk) * f.w[(i, j, kk)];
                }
            }
        }
        total
    }

    pub fn workspace(&self) -> Workspace {
        let grids = self.grid.grids();
        Workspace {
            disp: grids.iter().map(DisplacementField::zeros).collect(),
            vel: grids.iter().map(DisplacementField::zeros).collect(),
            acc: grids.iter().map(DisplacementField::zeros).collect(),
            stress: grids.iter().map(StressField::zeros).collect(),
            scratch: Vec::new(),
        }
    }

    pub fn zero_state(&self) -> Vec<f64> {
        vec![0.0; self.layout.len()]
    }

    fn check_finite(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.layout.len() {
            return Err(Error::Contract("state length does not match the layout"));
        }
        if let Some(pos) = state.iter().position(|x| !x.is_finite()) {
            let n = self.layout.locate(pos);
            return Err(Error::Integrity {
                patch: n.patch,
                component: COMPONENT_NAMES[n.component],
                i: n.i,
                j: n.j,
                k: n.k,
                value: state[pos],
            });
        }
        Ok(())
    }

    /// Unpack, couple faces and apply the clamp. After this the workspace
    /// displacement and velocity fields are complete except for ghosts.
    fn prepare(&self, ws: &mut Workspace, state: &[f64], faces: Option<[&[f64]; 2]>) -> Result<()> {
        self.check_finite(state)?;
        self.layout.unpack(state, &mut ws.disp, &mut ws.vel);
        let nx = self.layout.nx;
        match faces {
            None => {
                exchange_faces(&mut ws.disp, &self.stencils, nx, &mut ws.scratch);
                exchange_faces(&mut ws.vel, &self.stencils, nx, &mut ws.scratch);
            }
            Some([disp, vel]) => {
                if disp.len() != self.face_len() || vel.len() != self.face_len() {
                    return Err(Error::Contract("face input length does not match the stencils"));
                }
                self.write_faces(&mut ws.disp, disp);
                self.write_faces(&mut ws.vel, vel);
            }
        }
        let g0 = self.grid.grid(0);
        apply_fixed_left(&mut ws.disp[0], g0)?;
        apply_fixed_left(&mut ws.vel[0], g0)?;
        for p in 0..self.grid.n_patches {
            let g = self.grid.grid(p);
            apply_transverse_bcs(&mut ws.disp[p], &self.materials[p], g);
            compute_stress(&ws.disp[p], &self.materials[p], g, &mut ws.stress[p])?;
            if g.right == FaceKind::Free {
                apply_free_right(&mut ws.stress[p], g)?;
            }
        }
        Ok(())
    }

    /// Visit every face input as `(index, stencil, component, j, k)`: the
    /// real nodes of each coupled face plane, stencil-major, then component,
    /// then z, then y.
    fn for_each_face_input(&self, mut f: impl FnMut(usize, usize, usize, usize, usize)) {
        let mut idx = 0;
        for s in 0..self.stencils.len() {
            for c in 0..3 {
                let (lo, n) = self.layout.block(c);
                for k in lo[2]..lo[2] + n[2] {
                    for j in lo[1]..lo[1] + n[1] {
                        f(idx, s, c, j, k);
                        idx += 1;
                    }
                }
            }
        }
    }

    /// Number of face inputs taken by [`rhs_with_faces`](Self::rhs_with_faces)
    /// per field.
    pub fn face_len(&self) -> usize {
        let counts = self.layout.component_counts();
        let per_face: usize = counts.iter().sum::<usize>() / (self.layout.nx - 2);
        self.stencils.len() * per_face
    }

    /// Target node of every face input, paired with its stencil index.
    pub fn face_inputs(&self) -> Vec<(usize, NodeRef)> {
        let nx = self.layout.nx;
        let mut out = Vec::with_capacity(self.face_len());
        self.for_each_face_input(|_, s, component, j, k| {
            let st = &self.stencils[s];
            out.push((s, NodeRef { patch: st.patch, component, i: st.target_plane(nx), j, k }));
        });
        out
    }

    fn write_faces(&self, fields: &mut [DisplacementField], values: &[f64]) {
        let nx = self.layout.nx;
        for st in &self.stencils {
            let plane = st.target_plane(nx);
            for f in fields[st.patch].components_mut() {
                let [_, b, c] = f.dims();
                for k in 0..c {
                    for j in 0..b {
                        f[(plane, j, k)] = 0.0;
                    }
                }
            }
        }
        self.for_each_face_input(|idx, s, c, j, k| {
            let st = &self.stencils[s];
            let f = fields[st.patch].components_mut().into_iter().nth(c).unwrap();
            f[(st.target_plane(nx), j, k)] = values[idx];
        });
        for st in &self.stencils {
            let side = match st.side {
                Side::Left => 0,
                Side::Right => 1,
            };
            fields[st.patch].mark_face_ready(side);
        }
    }

    /// Time derivative of `state` into `out`.
    pub fn rhs(&self, ws: &mut Workspace, _t: f64, state: &[f64], out: &mut [f64]) -> Result<()> {
        self.prepare(ws, state, None)?;
        self.accelerate(ws, out)
    }

    /// Time derivative with the coupled face planes taken from `faces`
    /// (displacement and velocity inputs in [`face_inputs`](Self::face_inputs)
    /// order) instead of interpolated. Patches are then independent.
    pub fn rhs_with_faces(&self, ws: &mut Workspace, state: &[f64], faces: [&[f64]; 2], out: &mut [f64]) -> Result<()> {
        self.prepare(ws, state, Some(faces))?;
        self.accelerate(ws, out)
    }

    fn accelerate(&self, ws: &mut Workspace, out: &mut [f64]) -> Result<()> {
        let last = self.grid.n_patches - 1;
        for p in 0..self.grid.n_patches {
            let forcing = if p == last { self.forcing.as_ref() } else { None };
            acceleration(
                &ws.vel[p],
                &ws.stress[p],
                &self.materials[p],
                self.grid.grid(p),
                forcing,
                self.eta,
                &mut ws.acc[p],
            )?;
        }
        self.layout.pack(&ws.vel, &ws.acc, out);
        Ok(())
    }

    /// Allocating convenience wrapper around [`rhs`](Self::rhs).
    pub fn rhs_vec(&self, state: &[f64]) -> Result<Vec<f64>> {
        let mut ws = self.workspace();
        let mut out = self.zero_state();
        self.rhs(&mut ws, 0.0, state, &mut out)?;
        Ok(out)
    }

    /// Kinetic plus strain energy summed over patches.
    pub fn energy(&self, ws: &mut Workspace, state: &[f64]) -> Result<f64> {
        self.prepare(ws, state, None)?;
        let mut total = 0.0;
        for p in 0..self.grid.n_patches {
            let (k, s) = energy_terms(
                &ws.disp[p],
                &ws.vel[p],
                &ws.stress[p],
                &self.materials[p],
                self.grid.grid(p),
            );
            total += k + s;
        }
        Ok(total)
    }

    /// Mass (density times control volume) of every displacement dof.
    pub fn dof_masses(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.n_dof()];
        for (dof, m) in out.iter_mut().enumerate() {
            let n = self.layout.locate(self.layout.disp_state_index(dof));
            let g = self.grid.grid(n.patch);
            let mat = &self.materials[n.patch];
            *m = match n.component {
                0 => g.u_volume(n.i, n.j, n.k) * mat.rho_u[(n.i, n.j, n.k)],
                1 => g.v_volume(n.i, n.j, n.k) * mat.rho_v[(n.i, n.j, n.k)],
                _ => g.w_volume(n.i, n.j, n.k) * mat.rho_w[(n.i, n.j, n.k)],
            };
        }
        out
    }

    /// Physical x of a state entry's node.
    pub fn node_x(&self, node: NodeRef) -> f64 {
        let g = self.grid.grid(node.patch);
        if node.component % 3 == 0 {
            g.x_half(node.i)
        } else {
            g.x(node.i)
        }
    }

    /// Initial deflection `w = amplitude * x^2 (3 - x)` at rest.
    pub fn initial_bend(&self, amplitude: f64) -> Vec<f64> {
        let mut state = self.zero_state();
        for (idx, s) in state.iter_mut().enumerate() {
            let n = self.layout.locate(idx);
            if n.component == 2 {
                let x = self.node_x(n);
                *s = amplitude * x * x * (3.0 - x);
            }
        }
        state
    }

    /// Cross-section centre value of displacement component `comp` (0..3)
    /// on plane `i` of `patch`, read from a state vector. Where the centre
    /// falls between two nodes of a family, the two are averaged.
    pub fn centre_value(&self, state: &[f64], patch: usize, comp: usize, i: usize) -> f64 {
        let l = &self.layout;
        let jw = centre_weights(l.ny, comp == 1);
        let kw = centre_weights(l.nz, comp == 2);
        let mut total = 0.0;
        for &(j, a) in &jw {
            for &(k, b) in &kw {
                let idx = l.index(NodeRef { patch, component: comp, i, j, k });
                total += a * b * idx.map_or(0.0, |x| state[x]);
            }
        }
        total
    }

    /// Tip displacement `(u, v, w)` at the centre of the last dynamic plane
    /// of the free-end patch.
    pub fn tip_displacement(&self, state: &[f64]) -> [f64; 3] {
        let p = self.grid.n_patches - 1;
        let i = self.layout.nx - 2;
        [0, 1, 2].map(|c| self.centre_value(state, p, c, i))
    }

    /// Centreline samples `(patch, x, u, v, w)` at every dynamic integer
    /// plane; `u` is the mean of its two neighbouring half-planes.
    pub fn centreline(&self, state: &[f64]) -> Vec<(usize, f64, f64, f64, f64)> {
        let mut out = Vec::new();
        let nx = self.layout.nx;
        for p in 0..self.grid.n_patches {
            let g = self.grid.grid(p);
            for i in 1..=nx - 2 {
                let u_left = if p == 0 && i == 1 { 0.0 } else { self.centre_value(state, p, 0, i - 1) };
                let u = 0.5 * (u_left + self.centre_value(state, p, 0, i));
                out.push((p, g.x(i), u, self.centre_value(state, p, 1, i), self.centre_value(state, p, 2, i)));
            }
        }
        out
    }

    /// State with the given displacement dofs and zero velocities.
    pub fn disp_to_state(&self, disp: &[f64]) -> Vec<f64> {
        let mut s = self.zero_state();
        for (dof, &x) in disp.iter().enumerate() {
            s[self.layout.disp_state_index(dof)] = x;
        }
        s
    }
}

/// Nodes and weights of the cross-section centre along one axis with `n`
/// integer nodes. `half` selects the half-integer family (index 1 at the
/// first real node).
fn centre_weights(n: usize, half: bool) -> Vec<(usize, f64)> {
    let pos = if half { 0.5 * (n - 1) as f64 + 0.5 } else { 0.5 * (n - 1) as f64 };
    let lo = libm::floor(pos) as usize;
    if (pos - lo as f64).abs() < 1e-12 {
        vec![(lo, 1.0)]
    } else {
        vec![(lo, 0.5), (lo + 1, 0.5)]
    }
}

/// Field-level view of a state vector, for inspection and tests.
pub fn state_fields(system: &PatchSystem, state: &[f64]) -> (Vec<DisplacementField>, Vec<DisplacementField>) {
    let grids = system.grid().grids();
    let mut d: Vec<_> = grids.iter().map(DisplacementField::zeros).collect();
    let mut v: Vec<_> = grids.iter().map(DisplacementField::zeros).collect();
    system.layout().unpack(state, &mut d, &mut v);
    (d, v)
}
