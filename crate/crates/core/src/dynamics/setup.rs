//! Physical setup, amplitude states and sampled trajectories.

use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::envelope::Envelope;
use super::generator::{Equation, Generator, Label, TermSelection};
use super::integrator::{Integrator, Picture, StateBlock, Stepper};
use crate::error::{Error, Result};
use crate::kinematics::{ElectronKinematics, ScatteringChannel};
use crate::units::{time_to_fs, LaserSpec};

/// Norm (or charge) drift above which a propagation is rejected.
pub const MAX_CHARGE_DRIFT: f64 = 1e-6;

/// Default number of steps per free-phase period in the direct picture.
pub const DIRECT_STEPS_PER_PERIOD: f64 = 64.0;

/// Default interaction-picture steps per period of the fastest coupled phase
/// difference, max |D_i − D_j| over nonzero couplings.
pub const INTERACTION_STEPS_PER_PERIOD: f64 = 64.0;

/// RK4 damps every oscillation by ~ (ωh)⁶/144 per step, so its default step
/// is this much finer than the unitary Crank-Nicolson default.
pub const RK4_STEP_REFINEMENT: f64 = 4.0;

/// A step is refused outright when it resolves the fastest phase with fewer
/// than this many points per period.
pub const MIN_STEPS_PER_PERIOD: f64 = 6.0;

/// Everything needed to propagate one electron through one pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalSetup {
    pub laser: LaserSpec,
    pub electron: ElectronKinematics,
    pub channel: ScatteringChannel,
    pub equation: Equation,
    pub mode_cutoff: i32,
    pub integrator: Integrator,
    pub picture: Picture,
    /// Step size in natural units; `None` selects the default for the picture.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_size: Option<f64>,
}

impl PhysicalSetup {
    pub fn validate(&self) -> Result<()> {
        self.laser.validate()?;
        let min = self.channel.momentum_transfer().abs() + 2;
        if self.mode_cutoff < min {
            return Err(Error::InvalidInput(format!(
                "mode cutoff {} is below |n_r − n_l| + 2 = {min}",
                self.mode_cutoff
            )));
        }
        if let Some(h) = self.step_size {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::InvalidInput(format!("step size must be positive, got {h}")));
            }
        }
        if !self.electron.p_e.is_finite() || !self.electron.p_k.is_finite() {
            return Err(Error::InvalidInput("electron momentum must be finite".into()));
        }
        Ok(())
    }

    /// Index of the scattered mode, n_r − n_l.
    pub fn target_mode(&self) -> i32 {
        self.channel.momentum_transfer()
    }

    pub fn generator(&self) -> Result<Generator> {
        self.generator_with(TermSelection::default())
    }

    pub fn generator_with(&self, terms: TermSelection) -> Result<Generator> {
        self.validate()?;
        Generator::new(
            self.equation,
            self.electron.p_e,
            self.electron.p_k,
            self.laser.k()?,
            self.laser.field()?,
            self.mode_cutoff,
            terms,
        )
    }

    /// Step size actually requested (explicit or default).
    pub fn requested_step(&self, gen: &Generator) -> f64 {
        self.step_size.unwrap_or_else(|| default_step_size(gen, self.picture, self.integrator))
    }

    /// Rejects steps that cannot resolve the fastest phase of the picture.
    pub fn check_step(&self, gen: &Generator, h: f64) -> Result<()> {
        let omega = fastest_frequency(gen, self.picture);
        if h * omega > std::f64::consts::TAU / MIN_STEPS_PER_PERIOD {
            return Err(Error::StepSize { step: h, change: f64::NAN });
        }
        Ok(())
    }

    /// Steps per laser cycle for cycle-aligned grids.
    pub fn steps_per_cycle(&self, gen: &Generator) -> Result<usize> {
        let h = self.requested_step(gen);
        let cycle = self.laser.cycle_duration()?;
        let n = (cycle / h).ceil().max(1.0) as usize;
        self.check_step(gen, cycle / n as f64)?;
        Ok(n)
    }

    /// Ramp duration in natural units.
    pub fn ramp_duration(&self) -> Result<f64> {
        Ok(self.laser.ramp_cycles as f64 * self.laser.cycle_duration()?)
    }

    pub fn initial_state(&self, gen: &Generator) -> Vec<C64> {
        let mut c = vec![C64::new(0.0, 0.0); gen.dim()];
        c[gen.index(0, self.equation.initial_label())] = C64::new(1.0, 0.0);
        c
    }
}

/// Largest frequency the integrator must resolve in the given picture.
pub fn fastest_frequency(gen: &Generator, picture: Picture) -> f64 {
    let d = gen.diagonal();
    match picture {
        Picture::Direct => d.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        Picture::Interaction => {
            let mut w = 0.0f64;
            for i in 0..gen.dim() {
                for (j, _) in gen.linear().row(i).chain(gen.quadratic().row(i)) {
                    w = w.max((d[i] - d[j]).abs());
                }
            }
            // Slowest meaningful scale: resolve at least the laser cycle.
            w.max(gen.k())
        }
    }
}

/// Default step: a fixed fraction of the fastest period of the picture.
pub fn default_step_size(gen: &Generator, picture: Picture, integrator: Integrator) -> f64 {
    let mut per = match picture {
        Picture::Direct => DIRECT_STEPS_PER_PERIOD,
        Picture::Interaction => INTERACTION_STEPS_PER_PERIOD,
    };
    if integrator == Integrator::Rk4 {
        per *= RK4_STEP_REFINEMENT;
    }
    std::f64::consts::TAU / (fastest_frequency(gen, picture) * per)
}

/// Amplitudes c_n^ζ at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeState {
    pub equation: Equation,
    pub mode_cutoff: i32,
    pub time: f64,
    pub amplitudes: Vec<C64>,
}

impl AmplitudeState {
    pub fn labels_per_mode(&self) -> usize {
        self.equation.labels_per_mode()
    }

    fn index(&self, n: i32, label: usize) -> Option<usize> {
        (n.abs() <= self.mode_cutoff && label < self.labels_per_mode())
            .then(|| (n + self.mode_cutoff) as usize * self.labels_per_mode() + label)
    }

    pub fn amplitude(&self, n: i32, label: usize) -> Option<C64> {
        self.index(n, label).map(|i| self.amplitudes[i])
    }

    pub fn population(&self, n: i32, label: usize) -> f64 {
        self.amplitude(n, label).map_or(0.0, |c| c.norm_sqr())
    }

    /// Σ_ζ |c_n^ζ|².
    pub fn mode_population(&self, n: i32) -> f64 {
        (0..self.labels_per_mode()).map(|l| self.population(n, l)).sum()
    }

    /// Σ |c|² over all components.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Conserved form: the norm, or the Feshbach-Villars charge Σ(|c⁺|² − |c⁻|²).
    pub fn charge(&self) -> f64 {
        let labels = self.equation.labels();
        self.amplitudes.iter().enumerate().map(|(i, c)| labels[i % labels.len()].metric() * c.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps: u64,
    pub step_size: f64,
    /// Largest |charge − 1| seen at any sample.
    pub charge_drift: f64,
    pub wall_time_s: f64,
}

/// Populations sampled during one pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub setup: PhysicalSetup,
    pub labels: Vec<Label>,
    /// Sample times in natural units.
    pub times: Vec<f64>,
    /// Sample times in femtoseconds.
    pub times_fs: Vec<f64>,
    /// `populations[s][i]` = |c_i|² at sample s, state ordering of the generator.
    pub populations: Vec<Vec<f64>>,
    /// Full amplitudes, only when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<AmplitudeState>>,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn index(&self, n: i32, label: usize) -> Option<usize> {
        let nl = self.labels.len();
        let cut = self.setup.mode_cutoff;
        (n.abs() <= cut && label < nl).then(|| (n + cut) as usize * nl + label)
    }

    /// Time series of |c_n^ζ|².
    pub fn series(&self, n: i32, label: usize) -> Vec<f64> {
        match self.index(n, label) {
            Some(i) => self.populations.iter().map(|p| p[i]).collect(),
            None => vec![0.0; self.len()],
        }
    }

    /// Time series of Σ_ζ |c_n^ζ|².
    pub fn mode_series(&self, n: i32) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for l in 0..self.labels.len() {
            for (o, v) in out.iter_mut().zip(self.series(n, l)) {
                *o += v;
            }
        }
        out
    }
}

/// Options for [`propagate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagateOptions {
    pub sample_stride: usize,
    pub keep_states: bool,
    pub terms: TermSelection,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions { sample_stride: 1, keep_states: false, terms: TermSelection::default() }
    }
}

/// Integrates the amplitude equations over a pulse of `total_duration`
/// (natural units, ramps included), sampling every `sample_stride` steps.
pub fn propagate(setup: &PhysicalSetup, total_duration: f64, sample_stride: usize) -> Result<Trajectory> {
    propagate_with(setup, total_duration, PropagateOptions { sample_stride, ..Default::default() })
}

pub fn propagate_with(setup: &PhysicalSetup, total_duration: f64, opts: PropagateOptions) -> Result<Trajectory> {
    let started = Instant::now();
    let gen = setup.generator_with(opts.terms)?;
    let env = Envelope::new(setup.ramp_duration()?, total_duration)?;
    let h_req = setup.requested_step(&gen);
    // Durations that are whole multiples of the step up to rounding keep
    // that number of steps.
    let nsteps = (total_duration / h_req * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = total_duration / nsteps as f64;
    setup.check_step(&gen, h)?;
    let stride = opts.sample_stride.max(1);
    let mut stepper = Stepper::new(&gen, setup.integrator, setup.picture, h)?;
    let mut block = StateBlock::from_columns(&[setup.initial_state(&gen)])?;

    let mut traj = Trajectory {
        setup: setup.clone(),
        labels: setup.equation.labels().to_vec(),
        times: Vec::new(),
        times_fs: Vec::new(),
        populations: Vec::new(),
        states: opts.keep_states.then(Vec::new),
        diagnostics: Diagnostics { steps: 0, step_size: h, charge_drift: 0.0, wall_time_s: 0.0 },
    };
    let record = |traj: &mut Trajectory, step: usize, block: &StateBlock| {
        let t = step as f64 * h;
        let c = block.column(0);
        traj.times.push(t);
        traj.times_fs.push(time_to_fs(t));
        traj.populations.push(c.iter().map(|v| v.norm_sqr()).collect());
        let drift = (gen.charge(&c) - 1.0).abs();
        traj.diagnostics.charge_drift = traj.diagnostics.charge_drift.max(drift);
        if let Some(states) = traj.states.as_mut() {
            states.push(AmplitudeState {
                equation: setup.equation,
                mode_cutoff: setup.mode_cutoff,
                time: t,
                amplitudes: c,
            });
        }
    };
    record(&mut traj, 0, &block);
    let envf = |t: f64| env.value(t);
    let mut done = 0;
    while done < nsteps {
        let n = stride.min(nsteps - done);
        stepper.run(&mut block, done as f64 * h, n, &envf);
        done += n;
        record(&mut traj, done, &block);
    }
    traj.diagnostics.steps = stepper.steps_taken();
    traj.diagnostics.wall_time_s = started.elapsed().as_secs_f64();
    if traj.diagnostics.charge_drift > MAX_CHARGE_DRIFT {
        return Err(Error::IntegrationQuality { drift: traj.diagnostics.charge_drift, limit: MAX_CHARGE_DRIFT });
    }
    Ok(traj)
}

/// Small, strongly driven three-photon setup that propagates in well under a
/// second; shared by the unit tests of the propagation modules.
#[cfg(test)]
pub(crate) fn test_setup(equation: Equation, p_e_over_k: f64, field: f64) -> PhysicalSetup {
    use crate::kinematics::{bragg_longitudinal_momentum, nonrelativistic_bragg_momentum};
    use crate::units::photon_momentum;
    let k = photon_momentum(3.1).unwrap();
    let channel = ScatteringChannel::three_photon();
    let p_e = p_e_over_k * k;
    let p_k = match equation {
        Equation::Pauli => nonrelativistic_bragg_momentum(channel, k).unwrap(),
        _ => bragg_longitudinal_momentum(channel, k, p_e).unwrap(),
    };
    PhysicalSetup {
        laser: LaserSpec {
            photon_energy_kev: 3.1,
            intensity_w_cm2: None,
            field_amplitude: Some(field),
            ramp_cycles: 2,
            plateau_fs: 0.0,
        },
        electron: ElectronKinematics::new(p_e, p_k),
        channel,
        equation,
        mode_cutoff: 6,
        integrator: Integrator::PaperEuler,
        picture: Picture::Interaction,
        step_size: Some(0.3),
    }
}
