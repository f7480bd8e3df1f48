//! Propagation of the coupled mode amplitudes through the laser pulse.

pub mod cycle;
pub mod envelope;
pub mod generator;
pub mod integrator;
pub mod resonance;
pub mod setup;

pub use cycle::{default_tracking, scan_interaction_time, scan_plateaus, Component, CycleCache, TimeScan};
pub use envelope::{envelope, Envelope};
pub use generator::{Equation, Generator, Label, SparseMatrix, TermSelection};
pub use integrator::{Integrator, Picture, StateBlock, Stepper};
pub use resonance::{bare_detuning, dressed_detuning, tune_resonance, DressedDetuning, TunedResonance};
pub use setup::{
    default_step_size, propagate, propagate_with, AmplitudeState, Diagnostics, PhysicalSetup, PropagateOptions,
    Trajectory,
};
