//! Reference orbits used by the examples, the CLI defaults and the test
//! suites: one regular and one chaotic initial condition for the Hénon-Heiles
//! section at `H = 1/8` and for the Standard Map at `K = 1.5`.

/// Hénon-Heiles energy of the reference orbits.
pub const HENON_HEILES_ENERGY: f64 = 0.125;

/// `(y, p_y)` on the section `x = 0`, `p_x >= 0`; a quasi-periodic orbit.
pub const HENON_HEILES_REGULAR: [f64; 2] = [0.1, 0.1];

/// `(y, p_y)` on the section `x = 0`, `p_x >= 0`; an orbit in the chaotic sea.
pub const HENON_HEILES_CHAOTIC: [f64; 2] = [-0.2, 0.0];

pub const STANDARD_MAP_K: f64 = 1.5;

/// Inside the island around the elliptic fixed point `(0.5, 0)`.
pub const STANDARD_MAP_REGULAR: [f64; 2] = [0.6, 0.0];

/// Next to the hyperbolic fixed point at the origin.
pub const STANDARD_MAP_CHAOTIC: [f64; 2] = [0.01, 0.01];
