//! CODATA 2018 physical constants, SI units.

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;
/// Unified atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Mass of a 40Ca+ ion, kg.
pub const CA40_MASS: f64 = 39.962_590_9 * AMU;

/// Coulomb constant e^2 / (4 pi eps0) for a pair of charges `q`, J m.
pub fn coulomb_strength(q: f64) -> f64 {
    q * q / (4.0 * std::f64::consts::PI * EPSILON_0)
}
