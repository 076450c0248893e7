//! Physical constants in the crate's unit system.

/// Speed of light in mm·GHz (equivalently m/s × 10⁻⁶).
pub const SPEED_OF_LIGHT_MM_GHZ: f64 = 299.792_458;

/// Speed of light in nm·GHz.
pub const SPEED_OF_LIGHT_NM_GHZ: f64 = 299_792_458.0;

/// Cs ground-state hyperfine splitting used throughout the reference setup, GHz.
pub const CS_HYPERFINE_GHZ: f64 = 9.2;

/// Cs D2 optical frequency, GHz.
pub const CS_D2_GHZ: f64 = 351_725.718_50;

/// Signal wavelength, nm.
pub const SIGNAL_WAVELENGTH_NM: f64 = 852.347;

/// HeNe lock-laser wavelength, nm.
pub const HENE_WAVELENGTH_NM: f64 = 632.8;
