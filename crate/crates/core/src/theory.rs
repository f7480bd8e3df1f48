//! Closed-form predictions for three-photon Kapitza-Dirac scattering in
//! natural units (ħ = c = m = 1). `field` is ε = e|E|/(m c² · m c/ħ) and `k`
//! the photon momentum in units of mc.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ω₀T above which the short-time expansion is flagged (sin² x ≈ x² is off
/// by about 3% at x = Ω_R T/2 ≈ 0.3).
pub const PERTURBATIVE_LIMIT: f64 = 0.3;

fn check(k: f64, field: f64) -> Result<()> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidInput(format!("photon momentum must be positive, got {k}")));
    }
    if !(field >= 0.0) || !field.is_finite() {
        return Err(Error::InvalidInput(format!("field must be non-negative, got {field}")));
    }
    Ok(())
}

fn ratio(p_e: f64, k: f64) -> Result<f64> {
    check(k, 0.0)?;
    Ok(p_e.abs() / k)
}

/// Ω₀ = ε³ / (24 k²).
pub fn omega0(field: f64, k: f64) -> Result<f64> {
    check(k, field)?;
    Ok(field.powi(3) / (24.0 * k * k))
}

/// Dirac Rabi frequency Ω₀ √((25/2)(p_E/k)² + 1).
pub fn rabi_dirac(p_e: f64, k: f64, field: f64) -> Result<f64> {
    let r = ratio(p_e, k)?;
    Ok(omega0(field, k)? * (12.5 * r * r + 1.0).sqrt())
}

/// Spin-flip fraction of the scattered wave, 1 / ((25/2)(p_E/k)² + 1).
pub fn flip_probability(p_e: f64, k: f64) -> Result<f64> {
    let r = ratio(p_e, k)?;
    Ok(1.0 / (12.5 * r * r + 1.0))
}

/// Short-time populations of the scattered spin states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbativePopulations {
    /// |c₃^{+↑}|², spin preserved.
    pub up: f64,
    /// |c₃^{+↓}|², spin flipped.
    pub down: f64,
    /// Ω₀T, the expansion parameter.
    pub omega0_t: f64,
    /// Set when Ω₀T exceeds [`PERTURBATIVE_LIMIT`].
    pub outside_validity: bool,
}

/// (Ω₀T/2)² ((5/√2) p_E/k)² and (Ω₀T/2)².
pub fn perturbative_populations(t: f64, p_e: f64, k: f64, field: f64) -> Result<PerturbativePopulations> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("interaction time must be non-negative, got {t}")));
    }
    let r = ratio(p_e, k)?;
    let x = omega0(field, k)? * t;
    let down = (0.5 * x).powi(2);
    Ok(PerturbativePopulations { up: down * 12.5 * r * r, down, omega0_t: x, outside_validity: x > PERTURBATIVE_LIMIT })
}

/// Nonrelativistic (Pauli) flip fraction 1 / (4(p_E/k)² + 1).
pub fn flip_probability_nonrel(p_e: f64, k: f64) -> Result<f64> {
    let r = ratio(p_e, k)?;
    Ok(1.0 / (4.0 * r * r + 1.0))
}

/// Nonrelativistic Rabi frequency (243/128) Ω₀ √(4(p_E/k)² + 1).
pub fn rabi_pauli(p_e: f64, k: f64, field: f64) -> Result<f64> {
    let r = ratio(p_e, k)?;
    Ok(243.0 / 128.0 * omega0(field, k)? * (4.0 * r * r + 1.0).sqrt())
}

/// Spinless Rabi frequency Ω₀ (5/√2) |p_E|/k.
pub fn rabi_spinless(p_e: f64, k: f64, field: f64) -> Result<f64> {
    let r = ratio(p_e, k)?;
    Ok(omega0(field, k)? * 5.0 / std::f64::consts::SQRT_2 * r)
}

/// Two-level Rabi populations (cos²(Ω_R T/2), sin²(Ω_R T/2)).
pub fn rabi_populations(t: f64, omega_r: f64) -> (f64, f64) {
    let x = 0.5 * omega_r * t;
    (x.cos().powi(2), x.sin().powi(2))
}

/// Detuned two-level transfer Ω²/(Ω² + δ²) · sin²(√(Ω² + δ²) T/2).
pub fn detuned_transfer(t: f64, omega_r: f64, detuning: f64) -> f64 {
    let g2 = omega_r * omega_r + detuning * detuning;
    if g2 == 0.0 {
        return 0.0;
    }
    omega_r * omega_r / g2 * (0.5 * g2.sqrt() * t).sin().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RabiModel {
    Dirac,
    Pauli,
    Spinless,
}

/// Frequencies and flip fraction predicted by one model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiPrediction {
    pub model: RabiModel,
    pub omega0: f64,
    pub omega_r: f64,
    /// Flip fraction; zero for spinless particles (no spin to flip).
    pub flip_probability: f64,
}

impl RabiPrediction {
    pub fn new(model: RabiModel, p_e: f64, k: f64, field: f64) -> Result<RabiPrediction> {
        let (omega_r, flip) = match model {
            RabiModel::Dirac => (rabi_dirac(p_e, k, field)?, flip_probability(p_e, k)?),
            RabiModel::Pauli => (rabi_pauli(p_e, k, field)?, flip_probability_nonrel(p_e, k)?),
            RabiModel::Spinless => (rabi_spinless(p_e, k, field)?, 0.0),
        };
        Ok(RabiPrediction { model, omega0: omega0(field, k)?, omega_r, flip_probability: flip })
    }

    /// Rabi period 2π/Ω_R (natural units); infinite for a closed channel.
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega_r
    }
}
