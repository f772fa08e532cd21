//! Run configuration: a TOML document describing one beam experiment.
//!
//! Physical inputs are SI (metres, pascals, kg/m³, newtons). Everything
//! else is nondimensional.

use std::path::Path;

use serde::Deserialize;

use patchbeam_core::materials::{BeamGeometry, ConstituentProps, Grading, Layer, MaterialModel, Mixture};
use patchbeam_core::{NonDimScales, PatchGrid, PatchSystem, ReferenceScale, SolverSettings};

use crate::error::{Error, Result};
use crate::linalg::EigenOptions;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub thickness: f64,
    pub metal_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GradingSpec {
    Homogeneous { metal_fraction: f64 },
    /// Bottom layer first.
    Layered { layers: Vec<LayerSpec> },
    Axial { exponent_a: f64 },
    AxialRandom {
        exponent_a: f64,
        #[serde(default = "default_alpha", alias = "alpha")]
        perturbation_alpha: f64,
        seed: u64,
    },
}

fn default_alpha() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constituent {
    pub young_modulus: f64,
    pub density: f64,
    pub poisson_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Constituents {
    pub metal: Constituent,
    pub ceramic: Constituent,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretisation {
    #[serde(default)]
    pub n_patches: usize,
    /// Nodes along each patch.
    pub n_x: usize,
    pub n_y: usize,
    pub n_z: usize,
    /// Nodes along the full-domain beam; fixes `delta_x = 1 / (n_x_full - 1)`.
    pub n_x_full: usize,
    #[serde(default = "default_order")]
    pub interp_order: usize,
    #[serde(default)]
    pub full_domain: bool,
}

fn default_order() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    #[serde(default)]
    pub eta: f64,
    /// Newtons, acting downwards at the free end.
    #[serde(default)]
    pub tip_load: f64,
    #[serde(default)]
    pub init_amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceChoice {
    #[default]
    ConstituentMax,
    FieldMax,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Solver {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: Option<f64>,
    /// Bound on the acceleration residual max-norm of a static solve.
    pub static_tol: f64,
    pub static_max_iter: usize,
    pub eigen_count: usize,
    pub eigen_tol: f64,
    pub eigen_max_restarts: usize,
    pub classify_threshold: f64,
    pub reference_scale: ReferenceChoice,
}

impl Default for Solver {
    fn default() -> Self {
        let eig = EigenOptions::default();
        Self {
            rtol: 1e-6,
            atol: 1e-9,
            max_step: None,
            static_tol: 1e-9,
            static_max_iter: 3,
            eigen_count: 16,
            eigen_tol: eig.tol,
            eigen_max_restarts: eig.max_restarts,
            classify_threshold: 0.5,
            reference_scale: ReferenceChoice::ConstituentMax,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Output {
    /// Default output file when the command line gives none.
    pub path: Option<String>,
    /// Trajectory sampling interval.
    pub sample_interval: f64,
    pub t_final: f64,
}

impl Default for Output {
    fn default() -> Self {
        Self { path: None, sample_interval: 1.0, t_final: 300.0 }
    }
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub geometry: Geometry,
    pub grading: GradingSpec,
    pub constituents: Constituents,
    pub discretisation: Discretisation,
    #[serde(default)]
    pub physics: Physics,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub output: Output,
}

impl Default for Physics {
    fn default() -> Self {
        Self { eta: 0.0, tip_load: 0.0, init_amplitude: 0.0 }
    }
}

/// Read, parse and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.into(), source })?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse { path: path.into(), message },
        other => other,
    })
}

/// Parse and validate scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let scenario: Scenario =
        toml::from_str(text).map_err(|e| Error::Parse { path: "<input>".into(), message: e.to_string() })?;
    scenario.validate()?;
    Ok(scenario)
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be positive and finite (got {value})")))
    }
}

fn finite(field: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, "must be finite"))
    }
}

fn check_constituent(prefix: &str, c: &Constituent) -> Result<()> {
    positive(&format!("{prefix}.young_modulus"), c.young_modulus)?;
    positive(&format!("{prefix}.density"), c.density)?;
    if !(c.poisson_ratio > 0.0 && c.poisson_ratio < 0.5) {
        return Err(Error::config(
            format!("{prefix}.poisson_ratio"),
            format!("must lie in (0, 0.5) (got {})", c.poisson_ratio),
        ));
    }
    Ok(())
}

/// Prefix bare core field names with their section.
fn in_section(section: &str, e: Error) -> Error {
    match e {
        Error::Config { field, reason } if !field.starts_with(section) => {
            Error::Config { field: format!("{section}.{field}"), reason }
        }
        other => other,
    }
}

impl Scenario {
    /// Check every field; also builds the material model and patch grid so
    /// that no invalid input survives to numerical work.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        positive("geometry.length", g.length)?;
        positive("geometry.width", g.width)?;
        positive("geometry.thickness", g.thickness)?;
        check_constituent("constituents.metal", &self.constituents.metal)?;
        check_constituent("constituents.ceramic", &self.constituents.ceramic)?;
        positive("constituents.q", self.constituents.q)?;

        let p = &self.physics;
        if !(p.eta >= 0.0 && p.eta.is_finite()) {
            return Err(Error::config("physics.eta", "must be nonnegative and finite"));
        }
        finite("physics.tip_load", p.tip_load)?;
        finite("physics.init_amplitude", p.init_amplitude)?;

        let s = &self.solver;
        positive("solver.rtol", s.rtol)?;
        positive("solver.atol", s.atol)?;
        if let Some(m) = s.max_step {
            positive("solver.max_step", m)?;
        }
        positive("solver.static_tol", s.static_tol)?;
        if s.eigen_count == 0 {
            return Err(Error::config("solver.eigen_count", "must be at least 1"));
        }
        positive("solver.eigen_tol", s.eigen_tol)?;
        if !(s.classify_threshold > 0.0 && s.classify_threshold <= 1.0) {
            return Err(Error::config("solver.classify_threshold", "must lie in (0, 1]"));
        }
        positive("output.sample_interval", self.output.sample_interval)?;
        positive("output.t_final", self.output.t_final)?;

        let d = &self.discretisation;
        if d.n_x_full < 3 {
            return Err(Error::config("discretisation.n_x_full", "at least 3 nodes required"));
        }
        if !d.full_domain && d.n_patches < 2 {
            return Err(Error::config("discretisation.n_patches", "at least 2 patches required unless full_domain"));
        }
        self.model()?;
        self.grid()?;
        Ok(())
    }

    pub fn mixture(&self) -> Mixture {
        let c = |c: &Constituent| ConstituentProps {
            young_modulus: c.young_modulus,
            density: c.density,
            poisson_ratio: c.poisson_ratio,
        };
        Mixture { metal: c(&self.constituents.metal), ceramic: c(&self.constituents.ceramic), q: self.constituents.q }
    }

    pub fn grading(&self) -> Grading {
        match &self.grading {
            GradingSpec::Homogeneous { metal_fraction } => Grading::Homogeneous { metal_fraction: *metal_fraction },
            GradingSpec::Layered { layers } => Grading::Layered {
                layers: layers
                    .iter()
                    .map(|l| Layer { thickness: l.thickness, metal_fraction: l.metal_fraction })
                    .collect(),
            },
            GradingSpec::Axial { exponent_a } => Grading::Axial { exponent: *exponent_a },
            GradingSpec::AxialRandom { exponent_a, perturbation_alpha, seed } => {
                Grading::AxialRandom { exponent: *exponent_a, alpha: *perturbation_alpha, seed: *seed }
            }
        }
    }

    pub fn model(&self) -> Result<MaterialModel> {
        let g = &self.geometry;
        let geometry = BeamGeometry { length: g.length, width: g.width, thickness: g.thickness };
        MaterialModel::new(geometry, self.mixture(), self.grading()).map_err(|e| match e {
            patchbeam_core::Error::Domain { what, value } => {
                Error::config(format!("constituents.{what}"), format!("out of range: {value}"))
            }
            other => other.into(),
        })
    }

    pub fn reference_scale(&self) -> ReferenceScale {
        match self.solver.reference_scale {
            ReferenceChoice::ConstituentMax => ReferenceScale::ConstituentMax,
            ReferenceChoice::FieldMax => ReferenceScale::FieldMax,
        }
    }

    pub fn scales(&self) -> Result<NonDimScales> {
        Ok(NonDimScales::for_model(&self.model()?, self.reference_scale())?)
    }

    /// Microgrid spacing along the beam.
    pub fn delta_x(&self) -> f64 {
        1.0 / (self.discretisation.n_x_full - 1) as f64
    }

    fn width_thickness(&self) -> (f64, f64) {
        let g = &self.geometry;
        (g.width / g.length, g.thickness / g.length)
    }

    /// The patch grid, or the full-domain grid when `full_domain` is set.
    pub fn grid(&self) -> Result<PatchGrid> {
        if self.discretisation.full_domain {
            self.full_domain_grid()
        } else {
            let d = &self.discretisation;
            let (w, t) = self.width_thickness();
            PatchGrid::patches(d.n_patches, (d.n_x, d.n_y, d.n_z), self.delta_x(), w, t, d.interp_order)
                .map_err(|e| in_section("discretisation", e.into()))
        }
    }

    /// Full-domain grid at the same microscale resolution.
    pub fn full_domain_grid(&self) -> Result<PatchGrid> {
        let d = &self.discretisation;
        let (w, t) = self.width_thickness();
        PatchGrid::full_domain((d.n_x_full, d.n_y, d.n_z), w, t).map_err(|e| in_section("discretisation", e.into()))
    }

    /// Copy of this scenario run on the full domain.
    pub fn as_full_domain(&self) -> Scenario {
        let mut s = self.clone();
        s.discretisation.full_domain = true;
        s
    }

    /// Replace the random-grading seed; other gradings are unaffected.
    pub fn with_seed(mut self, seed: u64) -> Scenario {
        if let GradingSpec::AxialRandom { seed: s, .. } = &mut self.grading {
            *s = seed;
        }
        self
    }

    /// The coupled system with the configured damping and tip load.
    pub fn system(&self) -> Result<PatchSystem> {
        let scales = self.scales()?;
        let mut sys = PatchSystem::from_model(self.grid()?, &self.model()?, &scales, self.physics.eta)?;
        sys.set_tip_load(scales.force(self.physics.tip_load));
        Ok(sys)
    }

    pub fn integrator(&self) -> SolverSettings {
        SolverSettings {
            rtol: self.solver.rtol,
            atol: self.solver.atol,
            max_step: self.solver.max_step.unwrap_or(f64::INFINITY),
        }
    }

    pub fn eigen_options(&self) -> EigenOptions {
        EigenOptions { tol: self.solver.eigen_tol, max_restarts: self.solver.eigen_max_restarts, ..Default::default() }
    }
}
