//! Physical constants and the natural-unit system used throughout the crate.
//!
//! Internally ħ = c = m = 1: momenta are in units of mc, energies in units of
//! mc², times in units of ħ/(mc²), and the laser field is the dimensionless
//! ratio ε = e|E|/(m²c³/ħ), i.e. the field over the critical (Schwinger)
//! field. Laboratory inputs are keV, keV/c, W/cm² and fs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Electron rest energy mc² in keV (CODATA 2018).
pub const ELECTRON_REST_ENERGY_KEV: f64 = 510.998_950;

/// Reduced Planck constant in eV·s (CODATA 2018, exact in SI 2019).
pub const HBAR_EV_S: f64 = 6.582_119_569e-16;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Vacuum permittivity in F/m.
pub const VACUUM_PERMITTIVITY_F_M: f64 = 8.854_187_812_8e-12;

/// Elementary charge in C.
pub const ELEMENTARY_CHARGE_C: f64 = 1.602_176_634e-19;

/// Natural time unit ħ/(mc²) in femtoseconds.
pub fn natural_time_unit_fs() -> f64 {
    HBAR_EV_S / (ELECTRON_REST_ENERGY_KEV * 1e3) * 1e15
}

/// Critical field m²c³/(eħ) in V/m.
pub fn critical_field_v_m() -> f64 {
    // mc²/(e · ħc) written with mc² in eV: (mc²)² / (e ħ c) with energies in eV and e = 1.
    let mc2_ev = ELECTRON_REST_ENERGY_KEV * 1e3;
    mc2_ev * mc2_ev / (HBAR_EV_S * SPEED_OF_LIGHT_M_S)
}

/// Cycle-averaged intensity of a traveling wave whose amplitude equals the
/// critical field, in W/cm².
///
/// Gaussian I = c E²/(8π) and SI I = ε₀ c E²/2 agree; the SI form is used.
pub fn critical_intensity_w_cm2() -> f64 {
    let e = critical_field_v_m();
    0.5 * VACUUM_PERMITTIVITY_F_M * SPEED_OF_LIGHT_M_S * e * e * 1e-4
}

/// How the standing-wave amplitude |E| of the vector potential relates to the
/// quoted per-beam intensity of the two counterpropagating beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntensityConvention {
    /// |E| is the superposed amplitude of both traveling waves, |E| = 2 E_beam.
    SummedAmplitude,
    /// |E| is the amplitude of one traveling wave, |E| = E_beam.
    PerBeamAmplitude,
    /// |E| belongs to a single traveling wave that carries the intensity of
    /// both beams, |E| = √2 E_beam.
    CombinedIntensity,
}

/// Convention selected by matching the 1.9 fs three-photon Rabi period at
/// 2×10²³ W/cm² and 3.1 keV. The other two are off by factors of roughly 3
/// in the period and are kept for comparison (see `units` tests).
pub const CALIBRATED_CONVENTION: IntensityConvention = IntensityConvention::CombinedIntensity;

impl IntensityConvention {
    /// |E| / E_beam.
    pub fn amplitude_factor(self) -> f64 {
        match self {
            IntensityConvention::SummedAmplitude => 2.0,
            IntensityConvention::PerBeamAmplitude => 1.0,
            IntensityConvention::CombinedIntensity => std::f64::consts::SQRT_2,
        }
    }
}

/// Photon (or momentum) energy in keV → momentum in units of mc.
pub fn photon_momentum(photon_energy_kev: f64) -> Result<f64> {
    if !(photon_energy_kev > 0.0) || !photon_energy_kev.is_finite() {
        return Err(Error::InvalidInput(format!("photon energy must be positive, got {photon_energy_kev} keV")));
    }
    Ok(photon_energy_kev / ELECTRON_REST_ENERGY_KEV)
}

/// keV/c → mc.
pub fn momentum_from_kev(p_kev: f64) -> f64 {
    p_kev / ELECTRON_REST_ENERGY_KEV
}

/// mc → keV/c.
pub fn momentum_to_kev(p: f64) -> f64 {
    p * ELECTRON_REST_ENERGY_KEV
}

/// Per-beam intensity in W/cm² → dimensionless standing-wave field ε, using
/// [`CALIBRATED_CONVENTION`].
pub fn intensity_to_field(intensity_w_cm2: f64, photon_energy_kev: f64) -> Result<f64> {
    intensity_to_field_with(intensity_w_cm2, photon_energy_kev, CALIBRATED_CONVENTION)
}

/// Per-beam intensity → ε under an explicit convention.
///
/// Chain: E_beam/E_cr = √(I / I_cr) with I_cr the intensity of a traveling
/// wave at the critical field, then |E| = factor · E_beam. The photon energy
/// does not enter ε (it sets k separately) but must be physical.
pub fn intensity_to_field_with(
    intensity_w_cm2: f64,
    photon_energy_kev: f64,
    convention: IntensityConvention,
) -> Result<f64> {
    if !(intensity_w_cm2 >= 0.0) || !intensity_w_cm2.is_finite() {
        return Err(Error::InvalidInput(format!("intensity must be non-negative, got {intensity_w_cm2} W/cm²")));
    }
    photon_momentum(photon_energy_kev)?;
    let beam = (intensity_w_cm2 / critical_intensity_w_cm2()).sqrt();
    Ok(convention.amplitude_factor() * beam)
}

/// Inverse of [`intensity_to_field_with`].
pub fn field_to_intensity_with(field: f64, convention: IntensityConvention) -> f64 {
    let beam = field / convention.amplitude_factor();
    beam * beam * critical_intensity_w_cm2()
}

pub fn field_to_intensity(field: f64) -> f64 {
    field_to_intensity_with(field, CALIBRATED_CONVENTION)
}

/// fs → natural time.
pub fn time_to_natural(t_fs: f64) -> f64 {
    t_fs / natural_time_unit_fs()
}

/// natural time → fs.
pub fn time_to_fs(t: f64) -> f64 {
    t * natural_time_unit_fs()
}

/// Laser description in laboratory units.
///
/// The field is given either as a per-beam intensity or directly as ε; exactly
/// one of the two must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserSpec {
    pub photon_energy_kev: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity_w_cm2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_amplitude: Option<f64>,
    pub ramp_cycles: u32,
    #[serde(default)]
    pub plateau_fs: f64,
}

impl LaserSpec {
    pub fn validate(&self) -> Result<()> {
        photon_momentum(self.photon_energy_kev)?;
        match (self.intensity_w_cm2, self.field_amplitude) {
            (Some(i), None) if i >= 0.0 && i.is_finite() => {}
            (None, Some(f)) if f >= 0.0 && f.is_finite() => {}
            (Some(_), Some(_)) => {
                return Err(Error::InvalidInput("give either intensity_w_cm2 or field_amplitude, not both".into()))
            }
            (None, None) => return Err(Error::InvalidInput("laser needs intensity_w_cm2 or field_amplitude".into())),
            _ => return Err(Error::InvalidInput("laser field must be non-negative".into())),
        }
        if !(self.plateau_fs >= 0.0) {
            return Err(Error::InvalidInput("plateau_fs must be non-negative".into()));
        }
        Ok(())
    }

    /// Photon momentum k in units of mc.
    pub fn k(&self) -> Result<f64> {
        photon_momentum(self.photon_energy_kev)
    }

    /// Dimensionless field ε.
    pub fn field(&self) -> Result<f64> {
        self.validate()?;
        match (self.intensity_w_cm2, self.field_amplitude) {
            (_, Some(f)) => Ok(f),
            (Some(i), None) => intensity_to_field(i, self.photon_energy_kev),
            (None, None) => unreachable!(),
        }
    }

    /// Duration of one laser cycle 2π/(ck), natural units.
    pub fn cycle_duration(&self) -> Result<f64> {
        Ok(std::f64::consts::TAU / self.k()?)
    }
}
