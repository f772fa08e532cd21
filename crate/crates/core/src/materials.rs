//! Graded material properties of metal–ceramic beams.
//!
//! All quantities here are physical (SI units). [`NonDimScales`] converts
//! them to the nondimensional form used by the microgrid.

use alloc::vec::Vec;

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Elastic and inertial properties of one constituent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstituentProps {
    pub young_modulus: f64,
    pub density: f64,
    pub poisson_ratio: f64,
}

impl ConstituentProps {
    /// Aluminium.
    pub const ALUMINIUM: Self = Self { young_modulus: 67e9, density: 2700.0, poisson_ratio: 0.33 };
    /// Silicon carbide.
    pub const SILICON_CARBIDE: Self =
        Self { young_modulus: 302e9, density: 3200.0, poisson_ratio: 0.17 };

    pub fn new(young_modulus: f64, density: f64, poisson_ratio: f64) -> Result<Self> {
        let props = Self { young_modulus, density, poisson_ratio };
        props.validate()?;
        Ok(props)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.young_modulus > 0.0 && self.young_modulus.is_finite()) {
            return Err(Error::Domain { what: "young_modulus", value: self.young_modulus });
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return Err(Error::Domain { what: "density", value: self.density });
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return Err(Error::Domain { what: "poisson_ratio", value: self.poisson_ratio });
        }
        Ok(())
    }
}

/// Two constituents plus the empirical modulus-mixing parameter `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mixture {
    pub metal: ConstituentProps,
    pub ceramic: ConstituentProps,
    pub q: f64,
}

impl Mixture {
    /// Al/SiC with q = 91.6 GPa.
    pub const AL_SIC: Self = Self {
        metal: ConstituentProps::ALUMINIUM,
        ceramic: ConstituentProps::SILICON_CARBIDE,
        q: 91.6e9,
    };

    pub fn validate(&self) -> Result<()> {
        self.metal.validate()?;
        self.ceramic.validate()?;
        if !(self.q > 0.0 && self.q.is_finite()) {
            return Err(Error::Domain { what: "q", value: self.q });
        }
        Ok(())
    }

    /// Young's modulus, density and Poisson ratio of the mixture with metal
    /// volume fraction `metal_fraction`.
    pub fn properties(&self, metal_fraction: f64) -> Result<(f64, f64, f64)> {
        let (rho, nu) = mix_density_poisson(metal_fraction, &self.metal, &self.ceramic)?;
        let e = mix_young_semi_empirical(
            metal_fraction,
            self.metal.young_modulus,
            self.ceramic.young_modulus,
            self.q,
        )?;
        Ok((e, rho, nu))
    }
}

fn check_fraction(metal_fraction: f64) -> Result<()> {
    if (0.0..=1.0).contains(&metal_fraction) {
        Ok(())
    } else {
        Err(Error::Domain { what: "metal volume fraction", value: metal_fraction })
    }
}

/// Linear rule of mixtures for density and Poisson ratio.
pub fn mix_density_poisson(
    metal_fraction: f64,
    metal: &ConstituentProps,
    ceramic: &ConstituentProps,
) -> Result<(f64, f64)> {
    check_fraction(metal_fraction)?;
    let vc = 1.0 - metal_fraction;
    Ok((
        metal.density * metal_fraction + ceramic.density * vc,
        metal.poisson_ratio * metal_fraction + ceramic.poisson_ratio * vc,
    ))
}

/// Semi-empirical (Tamura–Tomota–Ozawa type) modulus mixing rule.
///
/// With `k = (q + Ec) / (q + Em)` and `Vc = 1 - Vm`,
/// `E = (Vm Em k + Vc Ec) / (Vm k + Vc)`.
pub fn mix_young_semi_empirical(metal_fraction: f64, em: f64, ec: f64, q: f64) -> Result<f64> {
    check_fraction(metal_fraction)?;
    for (what, value) in [("metal young_modulus", em), ("ceramic young_modulus", ec), ("q", q)] {
        if !(value > 0.0) {
            return Err(Error::Domain { what, value });
        }
    }
    let k = (q + ec) / (q + em);
    let vc = 1.0 - metal_fraction;
    Ok((metal_fraction * em * k + vc * ec) / (metal_fraction * k + vc))
}

/// Isotropic conversion `(E, ν) -> (λ, μ)`.
pub fn lame_from_young_poisson(young: f64, nu: f64) -> Result<(f64, f64)> {
    if !(young > 0.0) {
        return Err(Error::Domain { what: "young_modulus", value: young });
    }
    if nu >= 0.5 {
        return Err(Error::SingularMaterial { poisson_ratio: nu });
    }
    if nu <= -1.0 {
        return Err(Error::Domain { what: "poisson_ratio", value: nu });
    }
    let mu = young / (2.0 * (1.0 + nu));
    let lambda = young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    Ok((lambda, mu))
}

/// Axial metal fraction `Vm(x) = 0.2 (2 - x^a)` on the unit interval.
pub fn axial_metal_fraction(x: f64, exponent: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain { what: "axial position", value: x });
    }
    if !(exponent > 0.0) {
        return Err(Error::Domain { what: "exponent_a", value: exponent });
    }
    Ok(0.2 * (2.0 - libm::pow(x, exponent)))
}

/// One layer of a cross-sectionally graded beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub thickness: f64,
    pub metal_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grading {
    Homogeneous { metal_fraction: f64 },
    /// Layers listed bottom (z = -T/2) to top.
    Layered { layers: Vec<Layer> },
    Axial { exponent: f64 },
    /// Axial grading with a uniform random factor `1 + α U[-1, 1]` on the
    /// Young's modulus, drawn independently per staggered node.
    AxialRandom { exponent: f64, alpha: f64, seed: u64 },
}

/// Physical beam box `[0, L] x [-W/2, W/2] x [-T/2, T/2]` in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamGeometry {
    pub length: f64,
    pub width: f64,
    pub thickness: f64,
}

/// Lamé constants and density at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lame {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
}

/// How the reference modulus and density of the nondimensionalisation are
/// chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceScale {
    /// Largest modulus and largest density among the constituents present
    /// anywhere in the beam.
    #[default]
    ConstituentMax,
    /// Largest mixture modulus and density realised by the grading
    /// (unperturbed for the random kind).
    FieldMax,
}

/// Validated geometry + mixture + grading.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialModel {
    geometry: BeamGeometry,
    mixture: Mixture,
    grading: Grading,
}

const LAYER_TOLERANCE: f64 = 1e-9;

impl MaterialModel {
    pub fn new(geometry: BeamGeometry, mixture: Mixture, grading: Grading) -> Result<Self> {
        for (field, value) in [
            ("geometry.length", geometry.length),
            ("geometry.width", geometry.width),
            ("geometry.thickness", geometry.thickness),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(field, "must be positive"));
            }
        }
        mixture.validate()?;
        match &grading {
            Grading::Homogeneous { metal_fraction } => {
                if !(0.0..=1.0).contains(metal_fraction) {
                    return Err(Error::config("grading.metal_fraction", "must lie in [0, 1]"));
                }
            }
            Grading::Layered { layers } => {
                if layers.is_empty() {
                    return Err(Error::config("grading.layers", "at least one layer required"));
                }
                let mut total = 0.0;
                for layer in layers {
                    if !(layer.thickness > 0.0) {
                        return Err(Error::config("grading.layers.thickness", "must be positive"));
                    }
                    if !(0.0..=1.0).contains(&layer.metal_fraction) {
                        return Err(Error::config(
                            "grading.layers.metal_fraction",
                            "must lie in [0, 1]",
                        ));
                    }
                    total += layer.thickness;
                }
                if libm::fabs(total - geometry.thickness) > LAYER_TOLERANCE * geometry.thickness {
                    return Err(Error::config(
                        "grading.layers",
                        "layer thicknesses must sum to the beam thickness",
                    ));
                }
            }
            Grading::Axial { exponent } => check_exponent(*exponent)?,
            Grading::AxialRandom { exponent, alpha, .. } => {
                check_exponent(*exponent)?;
                if !(0.0..1.0).contains(alpha) {
                    return Err(Error::config("grading.alpha", "must lie in [0, 1)"));
                }
            }
        }
        Ok(Self { geometry, mixture, grading })
    }

    pub fn geometry(&self) -> &BeamGeometry {
        &self.geometry
    }

    pub fn mixture(&self) -> &Mixture {
        &self.mixture
    }

    pub fn grading(&self) -> &Grading {
        &self.grading
    }

    fn check_inside(&self, [x, y, z]: [f64; 3]) -> Result<()> {
        let g = &self.geometry;
        let slack = 1e-12 * g.length.max(g.width).max(g.thickness);
        if !(-slack..=g.length + slack).contains(&x) {
            return Err(Error::Domain { what: "x outside beam", value: x });
        }
        if libm::fabs(y) > 0.5 * g.width + slack {
            return Err(Error::Domain { what: "y outside beam", value: y });
        }
        if libm::fabs(z) > 0.5 * g.thickness + slack {
            return Err(Error::Domain { what: "z outside beam", value: z });
        }
        Ok(())
    }

    /// Metal volume fraction at a physical point (assumed inside the beam).
    fn metal_fraction_at(&self, x: f64, z: f64) -> Result<f64> {
        match &self.grading {
            Grading::Homogeneous { metal_fraction } => Ok(*metal_fraction),
            Grading::Layered { layers } => {
                // A point on an interface belongs to the layer above it.
                let mut bottom = -0.5 * self.geometry.thickness;
                for layer in &layers[..layers.len() - 1] {
                    let top = bottom + layer.thickness;
                    if z < top - LAYER_TOLERANCE * self.geometry.thickness {
                        return Ok(layer.metal_fraction);
                    }
                    bottom = top;
                }
                Ok(layers[layers.len() - 1].metal_fraction)
            }
            Grading::Axial { exponent } | Grading::AxialRandom { exponent, .. } => {
                let s = (x / self.geometry.length).clamp(0.0, 1.0);
                axial_metal_fraction(s, *exponent)
            }
        }
    }

    /// Material properties at a physical point. `node_id` identifies the
    /// staggered node for the random kind; it is ignored otherwise.
    pub fn sample(&self, point: [f64; 3], node_id: u64) -> Result<Lame> {
        self.check_inside(point)?;
        let vm = self.metal_fraction_at(point[0], point[2])?;
        let (mut young, rho, nu) = self.mixture.properties(vm)?;
        if let Grading::AxialRandom { alpha, seed, .. } = &self.grading {
            young *= 1.0 + alpha * node_uniform(*seed, node_id);
        }
        let (lambda, mu) = lame_from_young_poisson(young, nu)?;
        Ok(Lame { lambda, mu, rho })
    }

    /// Range of metal fraction realised over the beam.
    fn metal_fraction_range(&self) -> (f64, f64) {
        match &self.grading {
            Grading::Homogeneous { metal_fraction } => (*metal_fraction, *metal_fraction),
            Grading::Layered { layers } => layers.iter().fold((1.0_f64, 0.0_f64), |(lo, hi), l| {
                (lo.min(l.metal_fraction), hi.max(l.metal_fraction))
            }),
            Grading::Axial { .. } | Grading::AxialRandom { .. } => (0.2, 0.4),
        }
    }

    /// Reference modulus and density for the nondimensionalisation.
    pub fn reference_values(&self, reference: ReferenceScale) -> Result<(f64, f64)> {
        let (lo, hi) = self.metal_fraction_range();
        match reference {
            ReferenceScale::ConstituentMax => {
                let mut present = Vec::with_capacity(2);
                if hi > 0.0 {
                    present.push(self.mixture.metal);
                }
                if lo < 1.0 {
                    present.push(self.mixture.ceramic);
                }
                let e = present.iter().map(|c| c.young_modulus).fold(0.0, f64::max);
                let rho = present.iter().map(|c| c.density).fold(0.0, f64::max);
                Ok((e, rho))
            }
            ReferenceScale::FieldMax => {
                // Both mixing rules are monotone in Vm, so extremes sit at the
                // ends of the realised range.
                let (e_lo, rho_lo, _) = self.mixture.properties(lo)?;
                let (e_hi, rho_hi, _) = self.mixture.properties(hi)?;
                Ok((e_lo.max(e_hi), rho_lo.max(rho_hi)))
            }
        }
    }
}

fn check_exponent(exponent: f64) -> Result<()> {
    if exponent > 0.0 && exponent.is_finite() {
        Ok(())
    } else {
        Err(Error::config("grading.exponent_a", "must be positive"))
    }
}

/// Uniform draw on `[-1, 1]` owned by one staggered node: ChaCha8 keyed by
/// `seed`, positioned at the node's own 64-bit word.
pub fn node_uniform(seed: u64, node_id: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(u128::from(node_id) * 2);
    let bits = rng.next_u64() >> 11;
    let unit = bits as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * unit - 1.0
}

/// Characteristic scales turning the physical equations nondimensional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonDimScales {
    pub length: f64,
    pub time: f64,
    pub stress: f64,
    pub force_density: f64,
    pub young_ref: f64,
    pub density_ref: f64,
}

impl NonDimScales {
    /// `L0 = L`, `t0 = L0 / sqrt(E_ref / rho_ref)`, `sigma0 = L0^2 rho_ref / t0^2`,
    /// `f0 = L0 rho_ref / t0^2`.
    pub fn new(length: f64, young_ref: f64, density_ref: f64) -> Self {
        let time = length / libm::sqrt(young_ref / density_ref);
        let t2 = time * time;
        Self {
            length,
            time,
            stress: length * length * density_ref / t2,
            force_density: length * density_ref / t2,
            young_ref,
            density_ref,
        }
    }

    pub fn for_model(model: &MaterialModel, reference: ReferenceScale) -> Result<Self> {
        let (e, rho) = model.reference_values(reference)?;
        Ok(Self::new(model.geometry().length, e, rho))
    }

    /// Nondimensional total force corresponding to a physical force.
    pub fn force(&self, newtons: f64) -> f64 {
        newtons / (self.force_density * self.length * self.length * self.length)
    }

    pub fn lame(&self, lame: Lame) -> Lame {
        Lame {
            lambda: lame.lambda / self.stress,
            mu: lame.mu / self.stress,
            rho: lame.rho / self.density_ref,
        }
    }
}
