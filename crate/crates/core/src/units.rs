//! Unit conversions between lab quantities and the internal representation.
//!
//! Internally every rate is an angular frequency in rad/s and every optical
//! power is a photon flux in s⁻¹. Watts, ppm and MHz (meaning rate / 2π)
//! appear only at I/O boundaries.

use std::f64::consts::PI;

use crate::error::{domain, Result};

/// Planck constant, J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s (exact SI value).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a frequency in MHz (rate / 2π) to an angular rate in rad/s.
pub fn mhz(value: f64) -> f64 {
    value * 2.0 * PI * 1e6
}

/// Converts an angular rate in rad/s to MHz (rate / 2π).
pub fn to_mhz(rate: f64) -> f64 {
    rate / (2.0 * PI * 1e6)
}

/// Field decay rate through a mirror of power transmission `transmission_ppm`
/// in a Fabry–Pérot cavity of the given length: κ = c·T/(4L).
pub fn mirror_ppm_to_rate(transmission_ppm: f64, cavity_length: f64) -> Result<f64> {
    if !(transmission_ppm > 0.0) {
        return Err(domain(format!(
            "mirror transmission must be positive, got {transmission_ppm} ppm"
        )));
    }
    if !(cavity_length > 0.0) {
        return Err(domain(format!(
            "cavity length must be positive, got {cavity_length} m"
        )));
    }
    Ok(SPEED_OF_LIGHT * transmission_ppm * 1e-6 / (4.0 * cavity_length))
}

/// Inverse of [`mirror_ppm_to_rate`].
pub fn rate_to_ppm(rate: f64, cavity_length: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(domain(format!("decay rate must be positive, got {rate}")));
    }
    if !(cavity_length > 0.0) {
        return Err(domain(format!(
            "cavity length must be positive, got {cavity_length} m"
        )));
    }
    Ok(rate * 4.0 * cavity_length / SPEED_OF_LIGHT * 1e6)
}

fn photon_energy(wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) {
        return Err(domain(format!(
            "wavelength must be positive, got {wavelength} m"
        )));
    }
    Ok(PLANCK * SPEED_OF_LIGHT / wavelength)
}

/// Optical power (W) to photon flux (s⁻¹).
pub fn power_to_flux(power: f64, wavelength: f64) -> Result<f64> {
    if !(power >= 0.0) {
        return Err(domain(format!("power must be non-negative, got {power} W")));
    }
    Ok(power / photon_energy(wavelength)?)
}

/// Photon flux (s⁻¹) to optical power (W).
pub fn flux_to_power(flux: f64, wavelength: f64) -> Result<f64> {
    if !(flux >= 0.0) {
        return Err(domain(format!("flux must be non-negative, got {flux} 1/s")));
    }
    Ok(flux * photon_energy(wavelength)?)
}

/// Mean intracavity photon number sustaining an output flux through a mirror
/// with field decay rate `output_kappa`: n = P_t / (2κ_out).
pub fn intracavity_photons(output_flux: f64, output_kappa: f64) -> Result<f64> {
    if !(output_kappa > 0.0) {
        return Err(domain(format!(
            "output coupling rate must be positive, got {output_kappa}"
        )));
    }
    if !(output_flux >= 0.0) {
        return Err(domain(format!(
            "output flux must be non-negative, got {output_flux}"
        )));
    }
    Ok(output_flux / (2.0 * output_kappa))
}

/// Power ratio in dB.
pub fn to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}
