#![allow(dead_code)]

use patchbeam::scenario::{parse_scenario, Scenario};

/// A small three-layer beam that solves in milliseconds.
pub fn small_text() -> String {
    r#"
[geometry]
length = 0.105
width = 0.015
thickness = 0.009

[grading]
kind = "layered"
layers = [
    { thickness = 0.003, metal_fraction = 1.0 },
    { thickness = 0.003, metal_fraction = 0.8 },
    { thickness = 0.003, metal_fraction = 0.6 },
]

[constituents]
q = 91.6e9
metal = { young_modulus = 67e9, density = 2700.0, poisson_ratio = 0.33 }
ceramic = { young_modulus = 302e9, density = 3200.0, poisson_ratio = 0.17 }

[discretisation]
n_patches = 5
n_x = 7
n_y = 3
n_z = 4
n_x_full = 47
interp_order = 4

[physics]
eta = 1e-3
tip_load = 147.0
init_amplitude = 0.1

[solver]
eigen_count = 6
"#
    .to_owned()
}

pub fn small() -> Scenario {
    parse_scenario(&small_text()).unwrap()
}
