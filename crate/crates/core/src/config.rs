//! TOML run configuration in laboratory units and its resolution into a
//! [`PhysicalSetup`]. Every physical key carries its unit in the name.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{tune_resonance, Equation, Integrator, PhysicalSetup, Picture, TunedResonance};
use crate::error::{Error, Result};
use crate::kinematics::{
    bragg_kinematics_at_angle, bragg_longitudinal_momentum, nonrelativistic_bragg_momentum, ElectronKinematics,
    ScatteringChannel,
};
use crate::units::{momentum_from_kev, momentum_to_kev, LaserSpec};

/// Default mode cutoff N: modes −N..N.
pub const DEFAULT_MODE_CUTOFF: i32 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_equation")]
    pub equation: Equation,
    pub laser: LaserConfig,
    pub electron: ElectronConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resonance_scan: Option<ResonanceScanConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareConfig>,
}

fn default_equation() -> Equation {
    Equation::Dirac
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserConfig {
    pub photon_energy_kev: f64,
    /// Peak intensity of each of the two beams.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity_w_cm2: Option<f64>,
    /// Dimensionless field ε, instead of an intensity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_amplitude: Option<f64>,
    #[serde(default = "default_ramp_cycles")]
    pub ramp_cycles: u32,
    /// Plateau of a single pulse (scan mode `pulse`).
    #[serde(default)]
    pub plateau_fs: f64,
}

fn default_ramp_cycles() -> u32 {
    10
}

/// How the longitudinal momentum p_k is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResonanceMode {
    /// Bragg momentum shifted onto the field-dressed resonance.
    #[default]
    Dressed,
    /// Bare Bragg momentum (nonrelativistic form for the Pauli equation).
    Bragg,
    /// `p_k_kev_c` used as given.
    Fixed,
}

/// Transverse momentum is given by exactly one of `p_e_kev_c`, `p_e_over_k`
/// or `incidence_angle_deg`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectronConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_e_kev_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_e_over_k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incidence_angle_deg: Option<f64>,
    /// Only with `resonance = "fixed"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_k_kev_c: Option<f64>,
    #[serde(default)]
    pub resonance: ResonanceMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub n_r: i32,
    pub n_l: i32,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig { n_r: 2, n_l: -1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "default_cutoff")]
    pub mode_cutoff: i32,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default = "default_picture")]
    pub picture: Picture,
    /// Step in natural units ħ/(mc²); the picture's default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size_natural: Option<f64>,
}

fn default_cutoff() -> i32 {
    DEFAULT_MODE_CUTOFF
}

fn default_integrator() -> Integrator {
    Integrator::PaperEuler
}

fn default_picture() -> Picture {
    Picture::Interaction
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            mode_cutoff: DEFAULT_MODE_CUTOFF,
            integrator: Integrator::PaperEuler,
            picture: Picture::Interaction,
            step_size_natural: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanMode {
    /// Final populations versus total interaction time T.
    #[default]
    InteractionTime,
    /// Populations inside one pulse with the configured plateau.
    Pulse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default)]
    pub mode: ScanMode,
    /// Scan length in predicted Rabi periods (interaction-time mode).
    #[serde(default = "default_periods")]
    pub periods: f64,
    /// Longest interaction time; overrides `periods`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_time_fs: Option<f64>,
    /// Approximate number of samples.
    #[serde(default = "default_samples")]
    pub samples: u64,
}

fn default_periods() -> f64 {
    1.3
}

fn default_samples() -> u64 {
    150
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { mode: ScanMode::InteractionTime, periods: 1.3, max_time_fs: None, samples: 150 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub equations: Vec<Equation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_e_over_k: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_e_kev_c: Option<Vec<f64>>,
}

impl SweepConfig {
    /// Grid of p_E/k values.
    pub fn grid(&self, k: f64) -> Result<Vec<f64>> {
        let grid = match (&self.p_e_over_k, &self.p_e_kev_c) {
            (Some(g), None) => g.clone(),
            (None, Some(g)) => g.iter().map(|&p| momentum_from_kev(p) / k).collect(),
            _ => return Err(Error::InvalidInput("sweep needs exactly one of p_e_over_k or p_e_kev_c".into())),
        };
        if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sweep grid must be non-empty and finite".into()));
        }
        if self.equations.is_empty() {
            return Err(Error::InvalidInput("sweep needs at least one equation".into()));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonanceScanConfig {
    /// Explicit p_k offsets; otherwise `points` offsets evenly over ±`span_kev_c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offsets_kev_c: Option<Vec<f64>>,
    #[serde(default = "default_span")]
    pub span_kev_c: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Total interaction time; half the predicted Rabi period when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction_time_fs: Option<f64>,
}

fn default_span() -> f64 {
    0.5
}

fn default_points() -> usize {
    21
}

impl ResonanceScanConfig {
    /// Offsets in keV/c, sorted, always containing 0.
    pub fn offsets(&self) -> Result<Vec<f64>> {
        let mut v = match &self.offsets_kev_c {
            Some(v) => v.clone(),
            None => {
                if self.points < 2 || !(self.span_kev_c > 0.0) {
                    return Err(Error::InvalidInput("resonance scan needs points ≥ 2 and span_kev_c > 0".into()));
                }
                let n = self.points - 1;
                (0..=n).map(|i| self.span_kev_c * (2.0 * i as f64 / n as f64 - 1.0)).collect()
            }
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("resonance offsets must be finite".into()));
        }
        // The unshifted resonance is always part of the scan.
        if !v.contains(&0.0) {
            v.push(0.0);
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub interaction_time_fs: f64,
    #[serde(default = "default_compare_equations")]
    pub equations: Vec<Equation>,
}

fn default_compare_equations() -> Vec<Equation> {
    vec![Equation::Dirac, Equation::KleinGordon]
}

/// A setup resolved from the configuration, with the resonance search (if
/// any) that fixed p_k.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSetup {
    pub setup: PhysicalSetup,
    /// Bare resonant p_k before dressing, units of mc.
    pub bragg_p_k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TunedResonance>,
}

/// The resolved setup in laboratory units, for summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabEcho {
    pub equation: Equation,
    pub photon_energy_kev: f64,
    pub field_amplitude: f64,
    pub intensity_w_cm2: Option<f64>,
    pub p_e_kev_c: f64,
    pub p_k_kev_c: f64,
    pub bragg_p_k_kev_c: f64,
    pub incidence_angle_deg: f64,
    pub p_e_over_k: f64,
    pub ramp_cycles: u32,
    pub n_r: i32,
    pub n_l: i32,
}

impl ResolvedSetup {
    pub fn lab(&self) -> Result<LabEcho> {
        let s = &self.setup;
        let k = s.laser.k()?;
        Ok(LabEcho {
            equation: s.equation,
            photon_energy_kev: s.laser.photon_energy_kev,
            field_amplitude: s.laser.field()?,
            intensity_w_cm2: s.laser.intensity_w_cm2,
            p_e_kev_c: momentum_to_kev(s.electron.p_e),
            p_k_kev_c: momentum_to_kev(s.electron.p_k),
            bragg_p_k_kev_c: momentum_to_kev(self.bragg_p_k),
            incidence_angle_deg: s.electron.angle()?.to_degrees(),
            p_e_over_k: s.electron.p_e / k,
            ramp_cycles: s.laser.ramp_cycles,
            n_r: s.channel.n_r(),
            n_l: s.channel.n_l(),
        })
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    /// Checks everything that can be checked without propagating.
    pub fn validate(&self) -> Result<()> {
        let e = &self.electron;
        let given = [e.p_e_kev_c.is_some(), e.p_e_over_k.is_some(), e.incidence_angle_deg.is_some()];
        if given.iter().filter(|g| **g).count() > 1 {
            return Err(Error::InvalidInput("give at most one of p_e_kev_c, p_e_over_k, incidence_angle_deg".into()));
        }
        match (e.resonance, e.p_k_kev_c) {
            (ResonanceMode::Fixed, None) => {
                return Err(Error::InvalidInput("resonance = \"fixed\" needs p_k_kev_c".into()))
            }
            (ResonanceMode::Dressed | ResonanceMode::Bragg, Some(_)) => {
                return Err(Error::InvalidInput("p_k_kev_c is only used with resonance = \"fixed\"".into()))
            }
            _ => {}
        }
        if !(self.scan.periods > 0.0) || self.scan.samples < 4 {
            return Err(Error::InvalidInput("scan needs periods > 0 and samples ≥ 4".into()));
        }
        if let Some(t) = self.scan.max_time_fs {
            if !(t > 0.0) {
                return Err(Error::InvalidInput("max_time_fs must be positive".into()));
            }
        }
        let base = self.base_setup(self.equation, None)?;
        base.validate()?;
        if let Some(s) = &self.sweep {
            s.grid(base.laser.k()?)?;
        }
        if let Some(r) = &self.resonance_scan {
            r.offsets()?;
        }
        if let Some(c) = &self.compare {
            if !(c.interaction_time_fs >= 0.0) || c.equations.is_empty() {
                return Err(Error::InvalidInput("compare needs interaction_time_fs ≥ 0 and an equation".into()));
            }
        }
        Ok(())
    }

    pub fn laser(&self) -> LaserSpec {
        LaserSpec {
            photon_energy_kev: self.laser.photon_energy_kev,
            intensity_w_cm2: self.laser.intensity_w_cm2,
            field_amplitude: self.laser.field_amplitude,
            ramp_cycles: self.laser.ramp_cycles,
            plateau_fs: self.laser.plateau_fs,
        }
    }

    pub fn channel(&self) -> Result<ScatteringChannel> {
        ScatteringChannel::new(self.channel.n_r, self.channel.n_l)
    }

    /// Bare resonant p_k of the equation at transverse momentum p_E.
    pub fn bragg_p_k(&self, equation: Equation, p_e: f64) -> Result<f64> {
        let k = self.laser().k()?;
        match equation {
            Equation::Pauli => nonrelativistic_bragg_momentum(self.channel()?, k),
            _ => bragg_longitudinal_momentum(self.channel()?, k, p_e),
        }
    }

    /// Transverse momentum p_E in units of mc, `p_e_over_k` overriding the
    /// configured value.
    pub fn p_e(&self, equation: Equation, p_e_over_k: Option<f64>) -> Result<f64> {
        let laser = self.laser();
        laser.validate()?;
        let k = laser.k()?;
        let e = &self.electron;
        if let Some(r) = p_e_over_k.or(e.p_e_over_k) {
            return Ok(r * k);
        }
        if let Some(p) = e.p_e_kev_c {
            return Ok(momentum_from_kev(p));
        }
        if let Some(theta) = e.incidence_angle_deg {
            let theta = theta.to_radians();
            return match (e.resonance, equation) {
                (ResonanceMode::Fixed, _) => Ok(momentum_from_kev(e.p_k_kev_c.unwrap_or(0.0)) * theta.tan()),
                (_, Equation::Pauli) => Ok(nonrelativistic_bragg_momentum(self.channel()?, k)? * theta.tan()),
                _ => Ok(bragg_kinematics_at_angle(self.channel()?, k, theta)?.p_e),
            };
        }
        Ok(0.0)
    }

    /// Setup at the bare (or fixed) momentum, before any dressing.
    pub fn base_setup(&self, equation: Equation, p_e_over_k: Option<f64>) -> Result<PhysicalSetup> {
        let channel = self.channel()?;
        let p_e = self.p_e(equation, p_e_over_k)?;
        let p_k = match self.electron.resonance {
            ResonanceMode::Fixed => momentum_from_kev(self.electron.p_k_kev_c.unwrap_or(0.0)),
            _ => self.bragg_p_k(equation, p_e)?,
        };
        let setup = PhysicalSetup {
            laser: self.laser(),
            electron: ElectronKinematics::new(p_e, p_k),
            channel,
            equation,
            mode_cutoff: self.numerics.mode_cutoff,
            integrator: self.numerics.integrator,
            picture: self.numerics.picture,
            step_size: self.numerics.step_size_natural,
        };
        setup.validate()?;
        Ok(setup)
    }

    /// Setup with p_k set according to the resonance mode.
    pub fn resolve(&self, equation: Equation, p_e_over_k: Option<f64>) -> Result<ResolvedSetup> {
        let setup = self.base_setup(equation, p_e_over_k)?;
        let bragg_p_k = self.bragg_p_k(equation, setup.electron.p_e)?;
        match self.electron.resonance {
            ResonanceMode::Dressed => {
                let tuned = tune_resonance(&setup)?;
                Ok(ResolvedSetup { setup: tuned.setup.clone(), bragg_p_k, tuning: Some(tuned) })
            }
            _ => Ok(ResolvedSetup { setup, bragg_p_k, tuning: None }),
        }
    }
}
