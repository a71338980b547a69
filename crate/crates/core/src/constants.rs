//! Physical constants (CODATA 2018) and the bundled cesium parameter set.

use std::f64::consts::PI;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light, m/s.
pub const C: f64 = 299_792_458.0;

/// k_B/ħ in rad/s per kelvin: turns an energy in kelvin into an angular frequency.
pub const KB_OVER_HBAR: f64 = K_B / HBAR;

/// Converts a frequency in Hz to an angular frequency in rad/s.
#[inline]
pub fn hz_to_rad(f: f64) -> f64 {
    2.0 * PI * f
}

/// Converts an angular frequency in rad/s to Hz.
#[inline]
pub fn rad_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

/// Atomic species parameters needed by the trap and noise models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Species {
    /// Atomic mass, kg.
    pub mass: f64,
    /// D1 line wavelength, m.
    pub d1_wavelength: f64,
    /// D2 line wavelength, m.
    pub d2_wavelength: f64,
    /// Natural linewidth Γ of the D2 line, rad/s.
    pub linewidth: f64,
    /// Ratio of differential to total light shift, |ω_hfs/Δ_eff|.
    pub eta: f64,
    /// Effective trap-laser detuning in units of Γ (negative: red detuned).
    pub effective_detuning_gamma: f64,
    /// Ground-state hyperfine splitting in units of Γ.
    pub hyperfine_splitting_gamma: f64,
    /// Quadratic Zeeman coefficient of the clock transition, rad/s per T².
    pub quadratic_zeeman: f64,
}

/// Cesium-133 with the trap parameters of a 1064 nm Nd:YAG standing wave.
pub const CESIUM: Species = Species {
    mass: 2.2069e-25,
    d1_wavelength: 894.6e-9,
    d2_wavelength: 852.3e-9,
    linewidth: 2.0 * PI * 5.234e6,
    eta: 1.45e-4,
    effective_detuning_gamma: -1.2e7,
    hyperfine_splitting_gamma: 2.0e3,
    // 43 mHz/µT²
    quadratic_zeeman: 2.0 * PI * 0.043 * 1e12,
};

impl Default for Species {
    fn default() -> Self {
        CESIUM
    }
}
