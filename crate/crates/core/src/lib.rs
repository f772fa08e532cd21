//! Multiscale patch simulation of functionally graded viscoelastic cantilever
//! beams.
//!
//! The microscale model is a staggered-grid finite-difference discretisation
//! of linear Kelvin–Voigt viscoelasticity in 3D. It is evaluated only inside
//! a row of small patches spanning the beam cross-section; patch faces are
//! filled by Lagrange interpolation of the neighbouring patches' next-to-face
//! planes. A single patch covering the whole beam gives the full-domain
//! reference model.
//!
//! The crate is `no_std` (it needs `alloc`) and does no IO. Sparse direct
//! solves, eigen-decomposition, configuration and CSV live in the `patchbeam`
//! companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
pub mod field;
pub mod materials;
pub mod microgrid;
pub mod patches;
pub mod dynamics;
pub mod jacobian;
pub mod modes;

pub use error::{Error, Result};
pub use field::Field3;
pub use materials::{
    ConstituentProps, Grading, Lame, Layer, MaterialModel, Mixture, NonDimScales, ReferenceScale,
};
pub use microgrid::{DisplacementField, FaceKind, MaterialField, StaggeredGrid, StressField};
pub use patches::{CouplingStencil, NodeRef, PatchGrid, PatchSystem, Side, StateLayout, Workspace};
pub use dynamics::{integrate_dynamics, period_and_decay, SolverSettings, Trajectory};
pub use jacobian::{assemble_jacobian, assemble_stiffness, Jacobian, SparseMatrix};
pub use modes::{classify_modes, Mode, ModeShape, ModeType, Spectrum};
