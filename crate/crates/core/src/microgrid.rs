//! Staggered microgrid of one patch.
//!
//! Node families (0-based indices, nondimensional coordinates):
//!
//! * integer nodes `(x_i, y_j, z_k)` with `x_i = origin_x + i dx`,
//!   `y_j = -W/2 + j dy`, `z_k = -T/2 + k dz`, carry the normal stresses;
//! * `u[i, j, k]` sits at `(x_i + dx/2, y_j, z_k)`;
//! * `v[i, jj, k]` sits at `(x_i, y_0 + (jj - 1/2) dy, z_k)`; `jj = 1..ny-1`
//!   are real nodes, `jj = 0` and `jj = ny` are ghosts outside the surface;
//! * `w[i, j, kk]` likewise with its ghosts at `kk = 0` and `kk = nz`;
//! * `xy[i, jj, k]` at `(x_i + dx/2, y_0 + (jj - 1/2) dy, z_k)`,
//!   `xz[i, j, kk]` and `yz[i, jj, kk]` by analogy.
//!
//! Every displacement family has `nx` planes. Planes `0` and `nx - 1` are the
//! patch faces; planes `1..=nx-2` are dynamic. On a free right end the plane
//! `nx - 2` of `u` lies on the free surface `x_{nx-1} - dx/2`.

use crate::error::{Error, Result};
use crate::field::Field3;
use crate::materials::{MaterialModel, NonDimScales};

/// What bounds a patch at one of its two x-faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    /// Filled by interpolation from neighbouring patches.
    Coupled,
    /// Clamped physical end (left only).
    Fixed,
    /// Traction-free physical end (right only).
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaggeredGrid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    pub origin_x: f64,
    pub left: FaceKind,
    pub right: FaceKind,
}

impl StaggeredGrid {
    /// Grid with coupled faces; `width`, `thickness` are nondimensional.
    pub fn new(
        (nx, ny, nz): (usize, usize, usize),
        dx: f64,
        width: f64,
        thickness: f64,
        origin_x: f64,
    ) -> Result<Self> {
        for (field, n) in [("n_x", nx), ("n_y", ny), ("n_z", nz)] {
            if n < 3 {
                return Err(Error::config(field, "at least 3 nodes required"));
            }
        }
        for (what, value) in [("delta_x", dx), ("width", width), ("thickness", thickness)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Domain { what, value });
            }
        }
        Ok(Self {
            nx,
            ny,
            nz,
            dx,
            dy: width / (ny - 1) as f64,
            dz: thickness / (nz - 1) as f64,
            origin_x,
            left: FaceKind::Coupled,
            right: FaceKind::Coupled,
        })
    }

    pub fn with_ends(mut self, left: FaceKind, right: FaceKind) -> Result<Self> {
        if left == FaceKind::Free || right == FaceKind::Fixed {
            return Err(Error::Contract("clamp is on the left end, free end on the right"));
        }
        self.left = left;
        self.right = right;
        Ok(self)
    }

    pub fn width(&self) -> f64 {
        self.dy * (self.ny - 1) as f64
    }

    pub fn thickness(&self) -> f64 {
        self.dz * (self.nz - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.origin_x + i as f64 * self.dx
    }

    #[inline]
    pub fn x_half(&self, i: usize) -> f64 {
        self.x(i) + 0.5 * self.dx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        -0.5 * self.width() + j as f64 * self.dy
    }

    /// y of the half-integer index `jj` (`jj = 0` is the front ghost).
    #[inline]
    pub fn y_half(&self, jj: usize) -> f64 {
        -0.5 * self.width() + (jj as f64 - 0.5) * self.dy
    }

    #[inline]
    pub fn z(&self, k: usize) -> f64 {
        -0.5 * self.thickness() + k as f64 * self.dz
    }

    #[inline]
    pub fn z_half(&self, kk: usize) -> f64 {
        -0.5 * self.thickness() + (kk as f64 - 0.5) * self.dz
    }

    pub fn u_dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn v_dims(&self) -> [usize; 3] {
        [self.nx, self.ny + 1, self.nz]
    }

    pub fn w_dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz + 1]
    }

    /// Dynamic planes, shared by all three components.
    pub fn dynamic_planes(&self) -> core::ops::RangeInclusive<usize> {
        1..=self.nx - 2
    }

    /// Trapezoid weight of an integer node along an axis with `n` nodes.
    #[inline]
    fn integer_weight(index: usize, n: usize, spacing: f64) -> f64 {
        if index == 0 || index + 1 == n {
            0.5 * spacing
        } else {
            spacing
        }
    }

    /// x-extent of the control cell of dynamic plane `i` of a family.
    #[inline]
    fn plane_weight(&self, i: usize, on_surface_family: bool) -> f64 {
        if !self.dynamic_planes().contains(&i) {
            0.0
        } else if on_surface_family && self.right == FaceKind::Free && i == self.nx - 2 {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    /// Control volume of a dynamic `u` node (zero for face planes).
    pub fn u_volume(&self, i: usize, j: usize, k: usize) -> f64 {
        self.plane_weight(i, true)
            * Self::integer_weight(j, self.ny, self.dy)
            * Self::integer_weight(k, self.nz, self.dz)
    }

    /// Control volume of a real dynamic `v` node (zero for faces and ghosts).
    pub fn v_volume(&self, i: usize, jj: usize, k: usize) -> f64 {
        if jj == 0 || jj == self.ny {
            return 0.0;
        }
        self.plane_weight(i, false) * self.dy * Self::integer_weight(k, self.nz, self.dz)
    }

    pub fn w_volume(&self, i: usize, j: usize, kk: usize) -> f64 {
        if kk == 0 || kk == self.nz {
            return 0.0;
        }
        self.plane_weight(i, false) * Self::integer_weight(j, self.ny, self.dy) * self.dz
    }
}

/// Displacement (or velocity) values of one patch, ghosts included.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub u: Field3,
    pub v: Field3,
    pub w: Field3,
    face_ready: [bool; 2],
}

impl DisplacementField {
    pub fn zeros(grid: &StaggeredGrid) -> Self {
        let [a, b, c] = grid.u_dims();
        let u = Field3::zeros(a, b, c);
        let [a, b, c] = grid.v_dims();
        let v = Field3::zeros(a, b, c);
        let [a, b, c] = grid.w_dims();
        let w = Field3::zeros(a, b, c);
        Self { u, v, w, face_ready: [false; 2] }
    }

    /// Declare face plane `side` (0 left, 1 right) current.
    pub fn mark_face_ready(&mut self, side: usize) {
        self.face_ready[side] = true;
    }

    pub fn invalidate_faces(&mut self) {
        self.face_ready = [false; 2];
    }

    pub fn face_ready(&self, side: usize) -> bool {
        self.face_ready[side]
    }

    pub fn components(&self) -> [&Field3; 3] {
        [&self.u, &self.v, &self.w]
    }

    pub fn components_mut(&mut self) -> [&mut Field3; 3] {
        [&mut self.u, &mut self.v, &mut self.w]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressField {
    pub xx: Field3,
    pub yy: Field3,
    pub zz: Field3,
    pub xy: Field3,
    pub xz: Field3,
    pub yz: Field3,
}

impl StressField {
    pub fn zeros(grid: &StaggeredGrid) -> Self {
        let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
        Self {
            xx: Field3::zeros(nx, ny, nz),
            yy: Field3::zeros(nx, ny, nz),
            zz: Field3::zeros(nx, ny, nz),
            xy: Field3::zeros(nx - 1, ny + 1, nz),
            xz: Field3::zeros(nx - 1, ny, nz + 1),
            yz: Field3::zeros(nx, ny + 1, nz + 1),
        }
    }
}

/// Nondimensional Lamé constants and densities at every node where the
/// stencils need them. Arrays share the shapes of the fields they multiply.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialField {
    pub lambda: Field3,
    pub mu: Field3,
    pub mu_xy: Field3,
    pub mu_xz: Field3,
    pub mu_yz: Field3,
    pub rho_u: Field3,
    pub rho_v: Field3,
    pub rho_w: Field3,
}

/// Node family tags mixed into the random-draw identifier.
const FAMILY_INTEGER: u64 = 0;
const FAMILY_XY: u64 = 1;
const FAMILY_XZ: u64 = 2;
const FAMILY_YZ: u64 = 3;
const FAMILY_U: u64 = 4;
const FAMILY_V: u64 = 5;
const FAMILY_W: u64 = 6;

fn node_id(family: u64, patch: usize, i: usize, j: usize, k: usize) -> u64 {
    (family << 60) | ((patch as u64) << 40) | ((i as u64) << 24) | ((j as u64) << 12) | k as u64
}

impl MaterialField {
    /// Uniform material, for tests and homogeneous checks.
    pub fn uniform(grid: &StaggeredGrid, lambda: f64, mu: f64, rho: f64) -> Self {
        let mut field = Self::blank(grid);
        field.lambda.fill(lambda);
        for f in [&mut field.mu, &mut field.mu_xy, &mut field.mu_xz, &mut field.mu_yz] {
            f.fill(mu);
        }
        for f in [&mut field.rho_u, &mut field.rho_v, &mut field.rho_w] {
            f.fill(rho);
        }
        field
    }

    fn blank(grid: &StaggeredGrid) -> Self {
        let s = StressField::zeros(grid);
        let d = DisplacementField::zeros(grid);
        Self {
            lambda: s.xx.clone(),
            mu: s.xx,
            mu_xy: s.xy,
            mu_xz: s.xz,
            mu_yz: s.yz,
            rho_u: d.u,
            rho_v: d.v,
            rho_w: d.w,
        }
    }

    /// Sample `model` at every node of `grid`. Points outside the beam box
    /// (ghosts, the face plane beyond a free end) take the value at the
    /// nearest point of the box.
    pub fn sample(
        model: &MaterialModel,
        scales: &NonDimScales,
        grid: &StaggeredGrid,
        patch: usize,
    ) -> Result<Self> {
        let geo = *model.geometry();
        let len = scales.length;
        let at = |x: f64, y: f64, z: f64, id: u64| {
            let p = [
                (x * len).clamp(0.0, geo.length),
                (y * len).clamp(-0.5 * geo.width, 0.5 * geo.width),
                (z * len).clamp(-0.5 * geo.thickness, 0.5 * geo.thickness),
            ];
            model.sample(p, id).map(|l| scales.lame(l))
        };
        let mut out = Self::blank(grid);
        let fill = |field: &mut Field3,
                    family: u64,
                    pos: &dyn Fn(usize, usize, usize) -> (f64, f64, f64),
                    pick: &dyn Fn(crate::materials::Lame) -> f64|
         -> Result<()> {
            let [a, b, c] = field.dims();
            for k in 0..c {
                for j in 0..b {
                    for i in 0..a {
                        let (x, y, z) = pos(i, j, k);
                        field[(i, j, k)] = pick(at(x, y, z, node_id(family, patch, i, j, k))?);
                    }
                }
            }
            Ok(())
        };
        let g = grid;
        let int_pos = |i, j, k| (g.x(i), g.y(j), g.z(k));
        fill(&mut out.lambda, FAMILY_INTEGER, &int_pos, &|l| l.lambda)?;
        fill(&mut out.mu, FAMILY_INTEGER, &int_pos, &|l| l.mu)?;
        fill(&mut out.mu_xy, FAMILY_XY, &|i, jj, k| (g.x_half(i), g.y_half(jj), g.z(k)), &|l| l.mu)?;
        fill(&mut out.mu_xz, FAMILY_XZ, &|i, j, kk| (g.x_half(i), g.y(j), g.z_half(kk)), &|l| l.mu)?;
        fill(&mut out.mu_yz, FAMILY_YZ, &|i, jj, kk| (g.x(i), g.y_half(jj), g.z_half(kk)), &|l| l.mu)?;
        fill(&mut out.rho_u, FAMILY_U, &|i, j, k| (g.x_half(i), g.y(j), g.z(k)), &|l| l.rho)?;
        fill(&mut out.rho_v, FAMILY_V, &|i, jj, k| (g.x(i), g.y_half(jj), g.z(k)), &|l| l.rho)?;
        fill(&mut out.rho_w, FAMILY_W, &|i, j, kk| (g.x(i), g.y(j), g.z_half(kk)), &|l| l.rho)?;
        Ok(out)
    }
}

fn check_faces(disp: &DisplacementField, grid: &StaggeredGrid) -> Result<()> {
    if !disp.face_ready(0) {
        return Err(Error::Contract("left face values not populated"));
    }
    if grid.right != FaceKind::Free && !disp.face_ready(1) {
        return Err(Error::Contract("right face values not populated"));
    }
    Ok(())
}

/// Fill the ghost `v` and `w` values so that the surface-normal stresses
/// vanish on the four lateral surfaces (edge nodes: both transverse normal
/// stresses vanish).
pub fn apply_transverse_bcs(disp: &mut DisplacementField, mat: &MaterialField, grid: &StaggeredGrid) {
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    let (dx, dy, dz) = (grid.dx, grid.dy, grid.dz);
    let DisplacementField { u, v, w, .. } = disp;
    // front / back
    for k in 0..nz {
        let edge = k == 0 || k == nz - 1;
        for (j, ghost, inner, sign) in [(0, 0, 1, 1.0), (ny - 1, ny, ny - 1, -1.0)] {
            let (lam, mu, u0) = (mat.lambda.row(j, k), mat.mu.row(j, k), u.row(j, k));
            let (w0, w1) = if edge { (u0, u0) } else { (w.row(j, k), w.row(j, k + 1)) };
            v.set_row_from((ghost, k), (inner, k), 1..nx, |i, vi| {
                let exx = (u0[i] - u0[i - 1]) / dx;
                let jump = if edge {
                    lam[i] / (2.0 * (mu[i] + lam[i])) * exx
                } else {
                    let ezz = (w1[i] - w0[i]) / dz;
                    lam[i] / (2.0 * mu[i] + lam[i]) * (exx + ezz)
                };
                vi + sign * dy * jump
            });
        }
    }
    // bottom / top
    for (k, ghost, inner, sign) in [(0, 0, 1, 1.0), (nz - 1, nz, nz - 1, -1.0)] {
        for j in 0..ny {
            let edge = j == 0 || j == ny - 1;
            let (lam, mu, u0) = (mat.lambda.row(j, k), mat.mu.row(j, k), u.row(j, k));
            let (v0, v1) = if edge { (u0, u0) } else { (v.row(j, k), v.row(j + 1, k)) };
            w.set_row_from((j, ghost), (j, inner), 1..nx, |i, wi| {
                let exx = (u0[i] - u0[i - 1]) / dx;
                let jump = if edge {
                    lam[i] / (2.0 * (mu[i] + lam[i])) * exx
                } else {
                    let eyy = (v1[i] - v0[i]) / dy;
                    lam[i] / (2.0 * mu[i] + lam[i]) * (exx + eyy)
                };
                wi + sign * dz * jump
            });
        }
    }
}

/// Stresses from displacements (ghosts must be filled). Shear ghosts are set
/// antisymmetric across each lateral surface, so surface shear vanishes.
pub fn compute_stress(
    disp: &DisplacementField,
    mat: &MaterialField,
    grid: &StaggeredGrid,
    out: &mut StressField,
) -> Result<()> {
    check_faces(disp, grid)?;
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    let (rdx, rdy, rdz) = (1.0 / grid.dx, 1.0 / grid.dy, 1.0 / grid.dz);
    let DisplacementField { u, v, w, .. } = disp;
    let StressField { xx, yy, zz, xy, xz, yz } = &mut *out;
    // Normal stresses: one pass per z-plane, then restore the unused i = 0 column.
    let plane = nx * ny;
    for k in 0..nz {
        let (u0, v0, v1) = (u.span(0, k, plane), v.span(0, k, plane), v.span(1, k, plane));
        let (w0, w1) = (w.span(0, k, plane), w.span(0, k + 1, plane));
        let (lam, mu) = (mat.lambda.span(0, k, plane), mat.mu.span(0, k, plane));
        let (sxx, syy, szz) = (xx.span_mut(0, k, plane), yy.span_mut(0, k, plane), zz.span_mut(0, k, plane));
        for o in 1..plane {
            let exx = (u0[o] - u0[o - 1]) * rdx;
            let eyy = (v1[o] - v0[o]) * rdy;
            let ezz = (w1[o] - w0[o]) * rdz;
            let two_mu = 2.0 * mu[o];
            let lt = lam[o] * (exx + eyy + ezz);
            sxx[o] = lt + two_mu * exx;
            syy[o] = lt + two_mu * eyy;
            szz[o] = lt + two_mu * ezz;
        }
        for o in (0..plane).step_by(nx) {
            sxx[o] = 0.0;
            syy[o] = 0.0;
            szz[o] = 0.0;
        }
    }
    for k in 0..nz {
        for jj in 1..ny {
            let (u1, u0, v0, m) = (u.row(jj, k), u.row(jj - 1, k), v.row(jj, k), mat.mu_xy.row(jj, k));
            let s = xy.row_mut(jj, k);
            for i in 0..nx - 1 {
                s[i] = m[i] * ((u1[i] - u0[i]) * rdy + (v0[i + 1] - v0[i]) * rdx);
            }
        }
    }
    for kk in 1..nz {
        for j in 0..ny {
            let (u1, u0, w0, m) = (u.row(j, kk), u.row(j, kk - 1), w.row(j, kk), mat.mu_xz.row(j, kk));
            let s = xz.row_mut(j, kk);
            for i in 0..nx - 1 {
                s[i] = m[i] * ((u1[i] - u0[i]) * rdz + (w0[i + 1] - w0[i]) * rdx);
            }
        }
    }
    let inner = nx * (ny - 1);
    for kk in 1..nz {
        let (v1, v0) = (v.span(1, kk, inner), v.span(1, kk - 1, inner));
        let (w1, w0) = (w.span(1, kk, inner), w.span(0, kk, inner));
        let m = mat.mu_yz.span(1, kk, inner);
        let s = yz.span_mut(1, kk, inner);
        for o in 0..inner {
            s[o] = m[o] * ((v1[o] - v0[o]) * rdz + (w1[o] - w0[o]) * rdy);
        }
    }
    reflect_shear_ghosts(out, grid);
    Ok(())
}

/// Antisymmetric shear ghosts across the lateral surfaces.
pub fn reflect_shear_ghosts(s: &mut StressField, grid: &StaggeredGrid) {
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    let neg = |_: usize, x: f64| -x;
    for k in 0..nz {
        s.xy.set_row_from((0, k), (1, k), 0..nx - 1, neg);
        s.xy.set_row_from((ny, k), (ny - 1, k), 0..nx - 1, neg);
    }
    for j in 0..ny {
        s.xz.set_row_from((j, 0), (j, 1), 0..nx - 1, neg);
        s.xz.set_row_from((j, nz), (j, nz - 1), 0..nx - 1, neg);
    }
    for kk in 1..nz {
        s.yz.set_row_from((0, kk), (1, kk), 0..nx, neg);
        s.yz.set_row_from((ny, kk), (ny - 1, kk), 0..nx, neg);
    }
    for jj in 1..ny {
        s.yz.set_row_from((jj, 0), (jj, 1), 0..nx, neg);
        s.yz.set_row_from((jj, nz), (jj, nz - 1), 0..nx, neg);
    }
}

/// Clamp: zero the left face plane of every component.
pub fn apply_fixed_left(field: &mut DisplacementField, grid: &StaggeredGrid) -> Result<()> {
    if grid.left != FaceKind::Fixed {
        return Err(Error::Contract("fixed end condition on a patch without a clamped end"));
    }
    for f in field.components_mut() {
        let [_, b, c] = f.dims();
        for k in 0..c {
            for j in 0..b {
                f[(0, j, k)] = 0.0;
            }
        }
    }
    field.mark_face_ready(0);
    Ok(())
}

/// Traction-free right end: mirror `xx` and zero the surface shear planes.
pub fn apply_free_right(stress: &mut StressField, grid: &StaggeredGrid) -> Result<()> {
    if grid.right != FaceKind::Free {
        return Err(Error::Contract("free end condition on a patch without a free end"));
    }
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    for k in 0..nz {
        for j in 0..ny {
            stress.xx[(nx - 1, j, k)] = -stress.xx[(nx - 2, j, k)];
        }
    }
    for k in 0..nz {
        for jj in 0..=ny {
            stress.xy[(nx - 2, jj, k)] = 0.0;
        }
    }
    for kk in 0..=nz {
        for j in 0..ny {
            stress.xz[(nx - 2, j, kk)] = 0.0;
        }
    }
    Ok(())
}

/// Second difference with zero-flux closure. `on_nodes` marks a family whose
/// end nodes lie on the boundary (half control cell, doubled flux).
#[inline]
fn second_diff(prev: Option<f64>, here: f64, next: Option<f64>, on_nodes: bool) -> f64 {
    match (prev, next) {
        (Some(p), Some(n)) => p - 2.0 * here + n,
        (Some(p), None) | (None, Some(p)) => {
            if on_nodes {
                2.0 * (p - here)
            } else {
                p - here
            }
        }
        (None, None) => 0.0,
    }
}

/// Accelerations of the dynamic nodes. `vel` supplies the viscous term and
/// must have its face planes populated; `forcing` is a body-force density on
/// the displacement nodes. Non-dynamic entries of `out` are zeroed.
#[allow(clippy::too_many_arguments)]
pub fn acceleration(
    vel: &DisplacementField,
    stress: &StressField,
    mat: &MaterialField,
    grid: &StaggeredGrid,
    forcing: Option<&DisplacementField>,
    eta: f64,
    out: &mut DisplacementField,
) -> Result<()> {
    if !(eta >= 0.0) {
        return Err(Error::Domain { what: "eta", value: eta });
    }
    if eta > 0.0 {
        check_faces(vel, grid)?;
    }
    let (ny, nz) = (grid.ny, grid.nz);
    let (rdx, rdy, rdz) = (1.0 / grid.dx, 1.0 / grid.dy, 1.0 / grid.dz);
    let s = stress;
    for f in out.components_mut() {
        f.fill(0.0);
    }
    out.face_ready = [false; 2];
    let planes = grid.dynamic_planes();

    for k in 0..nz {
        for j in 0..ny {
            let (xx, xy1, xy0) = (s.xx.row(j, k), s.xy.row(j + 1, k), s.xy.row(j, k));
            let (xz1, xz0) = (s.xz.row(j, k + 1), s.xz.row(j, k));
            let (rho, f) = (mat.rho_u.row(j, k), forcing.map(|f| f.u.row(j, k)));
            let a = out.u.row_mut(j, k);
            for i in planes.clone() {
                let mut acc = (xx[i + 1] - xx[i]) * rdx + (xy1[i] - xy0[i]) * rdy + (xz1[i] - xz0[i]) * rdz;
                if let Some(f) = f {
                    acc += f[i];
                }
                a[i] = acc / rho[i];
            }
        }
    }
    for k in 0..nz {
        for jj in 1..ny {
            let (xy, yy1, yy0) = (s.xy.row(jj, k), s.yy.row(jj, k), s.yy.row(jj - 1, k));
            let (yz1, yz0) = (s.yz.row(jj, k + 1), s.yz.row(jj, k));
            let (rho, f) = (mat.rho_v.row(jj, k), forcing.map(|f| f.v.row(jj, k)));
            let a = out.v.row_mut(jj, k);
            for i in planes.clone() {
                let mut acc = (xy[i] - xy[i - 1]) * rdx + (yy1[i] - yy0[i]) * rdy + (yz1[i] - yz0[i]) * rdz;
                if let Some(f) = f {
                    acc += f[i];
                }
                a[i] = acc / rho[i];
            }
        }
    }
    for kk in 1..nz {
        for j in 0..ny {
            let (xz, yz1, yz0) = (s.xz.row(j, kk), s.yz.row(j + 1, kk), s.yz.row(j, kk));
            let (zz1, zz0) = (s.zz.row(j, kk), s.zz.row(j, kk - 1));
            let (rho, f) = (mat.rho_w.row(j, kk), forcing.map(|f| f.w.row(j, kk)));
            let a = out.w.row_mut(j, kk);
            for i in planes.clone() {
                let mut acc = (xz[i] - xz[i - 1]) * rdx + (yz1[i] - yz0[i]) * rdy + (zz1[i] - zz0[i]) * rdz;
                if let Some(f) = f {
                    acc += f[i];
                }
                a[i] = acc / rho[i];
            }
        }
    }

    if eta > 0.0 {
        let nodes = |n: usize| ViscousAxis { lo: 0, hi: n - 1, on_nodes: true };
        let halves = |n: usize| ViscousAxis { lo: 1, hi: n - 1, on_nodes: false };
        add_viscous(&vel.u, &mut out.u, grid, eta, true, nodes(ny), nodes(nz));
        add_viscous(&vel.v, &mut out.v, grid, eta, false, halves(ny), nodes(nz));
        add_viscous(&vel.w, &mut out.w, grid, eta, false, nodes(ny), halves(nz));
    }
    Ok(())
}

/// Real index range of one transverse axis of a family.
#[derive(Debug, Clone, Copy)]
struct ViscousAxis {
    lo: usize,
    hi: usize,
    on_nodes: bool,
}

/// Add `eta` times the zero-flux Laplacian of `q` on the dynamic real nodes.
/// Beyond a free right end there is no x-neighbour.
#[allow(clippy::too_many_arguments)]
fn add_viscous(
    q: &Field3,
    out: &mut Field3,
    grid: &StaggeredGrid,
    eta: f64,
    x_on_nodes: bool,
    y: ViscousAxis,
    z: ViscousAxis,
) {
    let nx = grid.nx;
    let (rdx2, rdy2, rdz2) = (1.0 / (grid.dx * grid.dx), 1.0 / (grid.dy * grid.dy), 1.0 / (grid.dz * grid.dz));
    let free = grid.right == FaceKind::Free;
    for k in z.lo..=z.hi {
        for j in y.lo..=y.hi {
            let row = q.row(j, k);
            let (ym, yp) = ((j > y.lo).then(|| q.row(j - 1, k)), (j < y.hi).then(|| q.row(j + 1, k)));
            let (zm, zp) = ((k > z.lo).then(|| q.row(j, k - 1)), (k < z.hi).then(|| q.row(j, k + 1)));
            let a = out.row_mut(j, k);
            for i in grid.dynamic_planes() {
                let h = row[i];
                let next = if free && i == nx - 2 { None } else { Some(row[i + 1]) };
                let lx = second_diff(Some(row[i - 1]), h, next, x_on_nodes);
                let ly = second_diff(ym.map(|r| r[i]), h, yp.map(|r| r[i]), y.on_nodes);
                let lz = second_diff(zm.map(|r| r[i]), h, zp.map(|r| r[i]), z.on_nodes);
                a[i] += eta * (lx * rdx2 + ly * rdy2 + lz * rdz2);
            }
        }
    }
}

/// Kinetic and strain energy of one patch from a fully evaluated stress
/// field. Strain energy counts integer nodes of the dynamic planes and the
/// half-integer shear planes `0..=nx-2`.
pub fn energy_terms(
    disp: &DisplacementField,
    vel: &DisplacementField,
    stress: &StressField,
    mat: &MaterialField,
    grid: &StaggeredGrid,
) -> (f64, f64) {
    let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz);
    let (dx, dy, dz) = (grid.dx, grid.dy, grid.dz);
    let (rdx, rdy, rdz) = (1.0 / dx, 1.0 / dy, 1.0 / dz);
    let wy = |j: usize| StaggeredGrid::integer_weight(j, ny, dy);
    let wz = |k: usize| StaggeredGrid::integer_weight(k, nz, dz);
    let DisplacementField { u, v, w, .. } = disp;

    let mut kinetic = 0.0;
    for k in 0..nz {
        for j in 0..ny {
            for i in grid.dynamic_planes() {
                kinetic += grid.u_volume(i, j, k) * mat.rho_u[(i, j, k)] * sq(vel.u[(i, j, k)]);
            }
        }
    }
    for k in 0..nz {
        for jj in 1..ny {
            for i in grid.dynamic_planes() {
                kinetic += grid.v_volume(i, jj, k) * mat.rho_v[(i, jj, k)] * sq(vel.v[(i, jj, k)]);
            }
        }
    }
    for kk in 1..nz {
        for j in 0..ny {
            for i in grid.dynamic_planes() {
                kinetic += grid.w_volume(i, j, kk) * mat.rho_w[(i, j, kk)] * sq(vel.w[(i, j, kk)]);
            }
        }
    }

    let mut strain = 0.0;
    for k in 0..nz {
        for j in 0..ny {
            for i in grid.dynamic_planes() {
                let exx = (u[(i, j, k)] - u[(i - 1, j, k)]) * rdx;
                let eyy = (v[(i, j + 1, k)] - v[(i, j, k)]) * rdy;
                let ezz = (w[(i, j, k + 1)] - w[(i, j, k)]) * rdz;
                let density = stress.xx[(i, j, k)] * exx
                    + stress.yy[(i, j, k)] * eyy
                    + stress.zz[(i, j, k)] * ezz;
                strain += dx * wy(j) * wz(k) * density;
            }
        }
    }
    for k in 0..nz {
        for jj in 1..ny {
            for i in 0..nx - 1 {
                let g = (u[(i, jj, k)] - u[(i, jj - 1, k)]) * rdy + (v[(i + 1, jj, k)] - v[(i, jj, k)]) * rdx;
                strain += dx * dy * wz(k) * stress.xy[(i, jj, k)] * g;
            }
        }
    }
    for kk in 1..nz {
        for j in 0..ny {
            for i in 0..nx - 1 {
                let g = (u[(i, j, kk)] - u[(i, j, kk - 1)]) * rdz + (w[(i + 1, j, kk)] - w[(i, j, kk)]) * rdx;
                strain += dx * wy(j) * dz * stress.xz[(i, j, kk)] * g;
            }
        }
    }
    for kk in 1..nz {
        for jj in 1..ny {
            for i in grid.dynamic_planes() {
                let g = (v[(i, jj, kk)] - v[(i, jj, kk - 1)]) * rdz + (w[(i, jj, kk)] - w[(i, jj - 1, kk)]) * rdy;
                strain += dx * dy * dz * stress.yz[(i, jj, kk)] * g;
            }
        }
    }
    (0.5 * kinetic, 0.5 * strain)
}

/// Total (kinetic + strain) energy of a single patch whose face planes are
/// populated. Ghosts and end conditions are applied to a private copy.
pub fn total_energy(
    disp: &DisplacementField,
    vel: &DisplacementField,
    mat: &MaterialField,
    grid: &StaggeredGrid,
) -> Result<f64> {
    let mut d = disp.clone();
    if grid.left == FaceKind::Fixed {
        apply_fixed_left(&mut d, grid)?;
    }
    apply_transverse_bcs(&mut d, mat, grid);
    let mut s = StressField::zeros(grid);
    compute_stress(&d, mat, grid, &mut s)?;
    if grid.right == FaceKind::Free {
        apply_free_right(&mut s, grid)?;
    }
    let (kin, strain) = energy_terms(&d, vel, &s, mat, grid);
    Ok(kin + strain)
}

/// Full single-patch pipeline: end conditions, ghosts, stress, acceleration.
/// Face planes of coupled ends must already be current in both fields.
pub fn single_patch_acceleration(
    disp: &DisplacementField,
    vel: &DisplacementField,
    mat: &MaterialField,
    grid: &StaggeredGrid,
    forcing: Option<&DisplacementField>,
    eta: f64,
) -> Result<DisplacementField> {
    let mut d = disp.clone();
    let mut q = vel.clone();
    if grid.left == FaceKind::Fixed {
        apply_fixed_left(&mut d, grid)?;
        apply_fixed_left(&mut q, grid)?;
    }
    apply_transverse_bcs(&mut d, mat, grid);
    let mut s = StressField::zeros(grid);
    compute_stress(&d, mat, grid, &mut s)?;
    if grid.right == FaceKind::Free {
        apply_free_right(&mut s, grid)?;
    }
    let mut out = DisplacementField::zeros(grid);
    acceleration(&q, &s, mat, grid, forcing, eta, &mut out)?;
    Ok(out)
}

#[inline]
fn sq(x: f64) -> f64 {
    x * x
}
