//! Generalized Bragg condition for multiphoton Kapitza-Dirac scattering.
//!
//! Frame: ê_x along the electric field, ê_y along the magnetic field and ê_z
//! along the laser wave vector. The electron always has p_y = 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Net photon numbers exchanged with the right- and left-traveling waves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawChannel", into = "RawChannel")]
pub struct ScatteringChannel {
    n_r: i32,
    n_l: i32,
}

#[derive(Serialize, Deserialize)]
struct RawChannel {
    n_r: i32,
    n_l: i32,
}

impl TryFrom<RawChannel> for ScatteringChannel {
    type Error = Error;
    fn try_from(r: RawChannel) -> Result<Self> {
        ScatteringChannel::new(r.n_r, r.n_l)
    }
}

impl From<ScatteringChannel> for RawChannel {
    fn from(c: ScatteringChannel) -> Self {
        RawChannel { n_r: c.n_r, n_l: c.n_l }
    }
}

impl ScatteringChannel {
    /// Requires opposite signs, which also guarantees n_r ≠ n_l.
    pub fn new(n_r: i32, n_l: i32) -> Result<Self> {
        if (n_r as i64) * (n_l as i64) >= 0 {
            return Err(Error::InvalidChannel { n_r, n_l });
        }
        Ok(ScatteringChannel { n_r, n_l })
    }

    /// The three-photon channel n_r = 2, n_l = −1.
    pub fn three_photon() -> Self {
        ScatteringChannel { n_r: 2, n_l: -1 }
    }

    /// The elastic two-photon channel n_r = 1, n_l = −1.
    pub fn two_photon() -> Self {
        ScatteringChannel { n_r: 1, n_l: -1 }
    }

    pub fn n_r(&self) -> i32 {
        self.n_r
    }

    pub fn n_l(&self) -> i32 {
        self.n_l
    }

    /// Momentum transfer in units of k, n_r − n_l. This is also the index of
    /// the scattered mode on the lattice p + nk.
    pub fn momentum_transfer(&self) -> i32 {
        self.n_r - self.n_l
    }

    /// Net photon energy absorbed in units of ck, n_r + n_l.
    pub fn energy_transfer(&self) -> i32 {
        self.n_r + self.n_l
    }

    fn sign(&self) -> f64 {
        if self.momentum_transfer() > 0 {
            1.0
        } else {
            -1.0
        }
    }
}

/// Electron momentum in the laser frame, units of mc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectronKinematics {
    /// Component along the electric field.
    pub p_e: f64,
    /// Component along the wave vector.
    pub p_k: f64,
}

impl ElectronKinematics {
    pub fn new(p_e: f64, p_k: f64) -> Self {
        ElectronKinematics { p_e, p_k }
    }

    pub fn momentum(&self) -> f64 {
        self.p_e.hypot(self.p_k)
    }

    /// 𝓔(p) = √(1 + p²) in units of mc².
    pub fn energy(&self) -> f64 {
        dispersion(self.momentum())
    }

    pub fn angle(&self) -> Result<f64> {
        incidence_angle(self.p_e, self.p_k)
    }

    /// de Broglie wavelength 2π/|p| in units of ħ/(mc).
    pub fn de_broglie_wavelength(&self) -> f64 {
        std::f64::consts::TAU / self.momentum()
    }

    /// Compton wavelength 2π/(mc), i.e. 2π in natural units.
    pub fn compton_wavelength() -> f64 {
        std::f64::consts::TAU
    }

    pub fn as_vector(&self) -> [f64; 3] {
        [self.p_e, 0.0, self.p_k]
    }
}

/// Relativistic dispersion 𝓔(p) = √(1 + p²).
pub fn dispersion(p: f64) -> f64 {
    (1.0 + p * p).sqrt()
}

/// Longitudinal momentum p_k solving the relativistic Bragg condition for a
/// given transverse momentum p_E, in momentum form.
pub fn bragg_longitudinal_momentum(channel: ScatteringChannel, k: f64, p_e: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::InvalidInput(format!("photon momentum must be positive, got {k}")));
    }
    let dn = channel.momentum_transfer() as f64;
    let sn = channel.energy_transfer() as f64;
    let prod = (channel.n_r() * channel.n_l()) as f64;
    let discriminant = k * k - (p_e * p_e + 1.0) / prod;
    if discriminant < 0.0 {
        return Err(Error::NoResonance { discriminant });
    }
    Ok(-dn * k / 2.0 + channel.sign() * sn / 2.0 * discriminant.sqrt())
}

/// Resonant kinematics at a fixed incidence angle ϑ: solves p_k = f(p_E) with
/// p_E = p_k tan ϑ by fixed-point iteration.
pub fn bragg_kinematics_at_angle(channel: ScatteringChannel, k: f64, theta: f64) -> Result<ElectronKinematics> {
    let tan = theta.tan();
    let mut p_k = bragg_longitudinal_momentum(channel, k, 0.0)?;
    for _ in 0..200 {
        let next = bragg_longitudinal_momentum(channel, k, p_k * tan)?;
        if (next - p_k).abs() <= 1e-15 * next.abs().max(1.0) {
            p_k = next;
            break;
        }
        p_k = next;
    }
    Ok(ElectronKinematics::new(p_k * tan, p_k))
}

/// Resonant p_k from nonrelativistic energy conservation,
/// (p + Δn k)²/2 − p²/2 = (n_r + n_l) k, i.e. p_k = (n_r+n_l)/Δn − Δn k/2.
/// Independent of p_E.
pub fn nonrelativistic_bragg_momentum(channel: ScatteringChannel, k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::InvalidInput(format!("photon momentum must be positive, got {k}")));
    }
    let dn = channel.momentum_transfer() as f64;
    let sn = channel.energy_transfer() as f64;
    Ok(sn / dn - dn * k / 2.0)
}

/// ϑ = atan2(p_E, p_k).
pub fn incidence_angle(p_e: f64, p_k: f64) -> Result<f64> {
    if p_e == 0.0 && p_k == 0.0 {
        return Err(Error::InvalidInput("incidence angle undefined for zero momentum".into()));
    }
    Ok(p_e.atan2(p_k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationResidual {
    /// |p′ − p − (n_r − n_l)k ê_k|; zero by construction.
    pub momentum: f64,
    /// 𝓔(p′) − 𝓔(p) − (n_r + n_l)k, units of mc².
    pub energy: f64,
}

pub fn check_conservation(p: &ElectronKinematics, channel: ScatteringChannel, k: f64) -> ConservationResidual {
    let p_final = ElectronKinematics::new(p.p_e, p.p_k + channel.momentum_transfer() as f64 * k);
    let transfer = [p_final.p_e - p.p_e, 0.0, p_final.p_k - p.p_k - channel.momentum_transfer() as f64 * k];
    ConservationResidual {
        momentum: (transfer[0].powi(2) + transfer[2].powi(2)).sqrt(),
        energy: p_final.energy() - p.energy() - channel.energy_transfer() as f64 * k,
    }
}
