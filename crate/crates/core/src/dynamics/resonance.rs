//! Dressed three-photon resonance.
//!
//! The bare Bragg momentum makes the free energies match, but the field also
//! shifts the levels: the ponderomotive shift depends on the mode's energy, so
//! modes 0 and n_r − n_l are shifted differently. The dressed detuning is
//! measured from the plateau cycle propagator U acting on states that were
//! carried adiabatically through the turn-on ramp,
//!
//!   δ = wrap(arg⟨ψ₀|Γ U|ψ₀⟩ − arg⟨ψ_n|Γ U|ψ_n⟩) / T_L,
//!
//! and the longitudinal momentum is shifted until δ vanishes.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::cycle::{Component, CycleCache};
use super::generator::Equation;
use super::setup::PhysicalSetup;
use crate::error::{Error, Result};
use crate::kinematics::dispersion;

/// Tolerance on the dressed detuning (natural units) for a tuned resonance.
pub const DETUNING_TOLERANCE: f64 = 2e-10;
const MAX_ITERATIONS: usize = 12;

/// Dressed detuning at the setup's current momentum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedDetuning {
    /// Quasi-energy difference of the scattered and initial dressed states,
    /// minus the absorbed photon energy (mod k).
    pub detuning: f64,
    /// Quasi-energy splitting of the two spin states of the scattered mode
    /// (zero for Klein-Gordon).
    pub spin_splitting: f64,
}

fn wrap(phase: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    (phase + std::f64::consts::PI).rem_euclid(tau) - std::f64::consts::PI
}

fn metric_inner(a: &[C64], b: &[C64], metric: &[f64]) -> C64 {
    a.iter().zip(b).zip(metric).map(|((x, y), g)| x.conj() * y * g).sum()
}

/// Positive-energy labels of the scattered mode.
fn target_components(setup: &PhysicalSetup) -> Vec<Component> {
    let n = setup.target_mode();
    setup.equation.labels().iter().enumerate().filter(|(_, l)| l.is_positive()).map(|(i, _)| (n, i)).collect()
}

pub fn dressed_detuning(setup: &PhysicalSetup) -> Result<DressedDetuning> {
    let targets = target_components(setup);
    let mut cache = CycleCache::new(setup, &targets)?;
    let init = (0, setup.equation.initial_label());
    let mut states = vec![cache.dressed(init).expect("initial component is tracked")];
    states.extend(targets.iter().map(|&c| cache.dressed(c).expect("target is tracked")));
    let evolved = cache.apply_cycle(&states)?;
    let metric = cache.generator().metric().to_vec();
    let cycle = setup.laser.cycle_duration()?;

    let phase0 = metric_inner(&states[0], &evolved[0], &metric).arg();
    // Eigenphases of the scattered-mode block.
    let m = targets.len();
    let block: Vec<Vec<C64>> =
        (0..m).map(|a| (0..m).map(|b| metric_inner(&states[1 + a], &evolved[1 + b], &metric)).collect()).collect();
    let phases: Vec<f64> = match m {
        1 => vec![block[0][0].arg()],
        2 => {
            let tr = block[0][0] + block[1][1];
            let det = block[0][0] * block[1][1] - block[0][1] * block[1][0];
            let disc = (tr * tr - 4.0 * det).sqrt();
            vec![((tr + disc) / 2.0).arg(), ((tr - disc) / 2.0).arg()]
        }
        _ => return Err(Error::InvalidInput("unexpected number of scattered labels".into())),
    };
    // Average on the circle relative to the first eigenphase.
    let mean = phases[0] + phases.iter().map(|p| wrap(p - phases[0])).sum::<f64>() / m as f64;
    let split = if m == 2 { wrap(phases[0] - phases[1]).abs() / cycle } else { 0.0 };
    Ok(DressedDetuning { detuning: wrap(phase0 - mean) / cycle, spin_splitting: split })
}

/// Bare energy mismatch 𝓔(p + Δn k) − 𝓔(p) − (n_r + n_l)k at longitudinal
/// momentum `p_k` (kinetic energies for the Pauli equation).
pub fn bare_detuning(setup: &PhysicalSetup, p_k: f64) -> Result<f64> {
    let k = setup.laser.k()?;
    let p_e = setup.electron.p_e;
    let q = |n: i32| (p_e * p_e + (p_k + n as f64 * k).powi(2)).sqrt();
    let n = setup.target_mode();
    let s = setup.channel.energy_transfer() as f64;
    Ok(match setup.equation {
        Equation::Pauli => 0.5 * (q(n).powi(2) - q(0).powi(2)) - s * k,
        _ => dispersion(q(n)) - dispersion(q(0)) - s * k,
    })
}

/// Result of shifting p_k onto the dressed resonance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedResonance {
    /// Setup with the tuned longitudinal momentum.
    pub setup: PhysicalSetup,
    /// p_k(tuned) − p_k(input), units of mc.
    pub offset: f64,
    /// Dressed detuning before tuning.
    pub initial_detuning: f64,
    /// Dressed detuning left after tuning.
    pub residual: f64,
    pub spin_splitting: f64,
    pub evaluations: usize,
}

/// Secant search for the p_k offset that zeroes the dressed detuning,
/// started with the slope of the bare mismatch.
pub fn tune_resonance(setup: &PhysicalSetup) -> Result<TunedResonance> {
    let p0 = setup.electron.p_k;
    let eval = |off: f64| -> Result<DressedDetuning> {
        let mut s = setup.clone();
        s.electron.p_k = p0 + off;
        dressed_detuning(&s)
    };
    let dp = 1e-6;
    let slope0 = (bare_detuning(setup, p0 + dp)? - bare_detuning(setup, p0 - dp)?) / (2.0 * dp);
    if slope0 == 0.0 || !slope0.is_finite() {
        return Err(Error::ResonanceSearch("bare detuning does not depend on p_k".into()));
    }
    let first = eval(0.0)?;
    let (mut x0, mut d0) = (0.0, first.detuning);
    let mut last = first;
    let mut evaluations = 1;
    let mut x1 = -d0 / slope0;
    while evaluations < MAX_ITERATIONS {
        if d0.abs() < DETUNING_TOLERANCE {
            let mut s = setup.clone();
            s.electron.p_k = p0 + x0;
            return Ok(TunedResonance {
                setup: s,
                offset: x0,
                initial_detuning: first.detuning,
                residual: d0,
                spin_splitting: last.spin_splitting,
                evaluations,
            });
        }
        let r = eval(x1)?;
        evaluations += 1;
        let d1 = r.detuning;
        last = r;
        let slope = if d1 != d0 { (d1 - d0) / (x1 - x0) } else { slope0 };
        let x2 = x1 - d1 / slope;
        x0 = x1;
        d0 = d1;
        x1 = x2;
    }
    Err(Error::ResonanceSearch(format!("dressed detuning still {d0:e} after {evaluations} evaluations")))
}
