//! Temporal pulse envelope: sin² turn-on, flat plateau, mirrored turn-off.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::LaserSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    /// Duration of each ramp (natural units).
    pub ramp: f64,
    /// Total pulse duration including both ramps (natural units).
    pub total: f64,
}

impl Envelope {
    pub fn new(ramp: f64, total: f64) -> Result<Envelope> {
        if !(ramp >= 0.0) || !total.is_finite() || total < 2.0 * ramp {
            return Err(Error::InvalidDuration { total, ramps: 2.0 * ramp });
        }
        Ok(Envelope { ramp, total })
    }

    /// Envelope for `laser` with the given total duration.
    pub fn for_laser(laser: &LaserSpec, total: f64) -> Result<Envelope> {
        Envelope::new(laser.ramp_cycles as f64 * laser.cycle_duration()?, total)
    }

    pub fn plateau(&self) -> f64 {
        self.total - 2.0 * self.ramp
    }

    /// w(t); zero outside [0, total].
    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 || t >= self.total {
            return 0.0;
        }
        let edge = t.min(self.total - t);
        if edge >= self.ramp {
            1.0
        } else {
            (std::f64::consts::FRAC_PI_2 * edge / self.ramp).sin().powi(2)
        }
    }
}

/// w(t) for a pulse of `total_duration` built from `laser`'s ramp length.
pub fn envelope(t: f64, laser: &LaserSpec, total_duration: f64) -> Result<f64> {
    let env = Envelope::for_laser(laser, total_duration)?;
    if !(0.0..=total_duration).contains(&t) {
        return Err(Error::InvalidInput(format!("time {t} outside pulse [0, {total_duration}]")));
    }
    Ok(env.value(t))
}
