//! Observables extracted from propagated populations: Rabi frequency,
//! spin-flip fraction, diffraction probability and resonance width.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    default_tracking, scan_interaction_time, scan_plateaus, Component, Equation, PhysicalSetup, TimeScan, Trajectory,
};
use crate::error::{Error, Result};
use crate::theory::{self, RabiModel, RabiPrediction};
use crate::units::{momentum_to_kev, time_to_fs};

/// RMS residual above which a Rabi fit is flagged.
pub const POOR_FIT_RESIDUAL: f64 = 0.05;

/// Scattered population below which a sample is left out of the flip fraction.
pub const FLIP_SIGNAL_THRESHOLD: f64 = 1e-3;

/// Bounds on the fitted amplitude A of A cos²(ΩT/2 + φ).
pub const AMPLITUDE_BOUNDS: (f64, f64) = (0.9, 1.0);

/// Population time series indexed by (mode, label index).
pub trait PopulationSeries {
    fn setup(&self) -> &PhysicalSetup;
    /// Sample times, natural units.
    fn times(&self) -> &[f64];
    /// Components with recorded populations.
    fn components(&self) -> Vec<Component>;
    fn component_series(&self, comp: Component) -> Vec<f64>;

    fn mode_series(&self, n: i32) -> Vec<f64> {
        let mut out = vec![0.0; self.times().len()];
        for c in self.components().into_iter().filter(|c| c.0 == n) {
            for (o, v) in out.iter_mut().zip(self.component_series(c)) {
                *o += v;
            }
        }
        out
    }
}

impl PopulationSeries for Trajectory {
    fn setup(&self) -> &PhysicalSetup {
        &self.setup
    }

    fn times(&self) -> &[f64] {
        &self.times
    }

    fn components(&self) -> Vec<Component> {
        let cut = self.setup.mode_cutoff;
        (-cut..=cut).flat_map(|n| (0..self.labels.len()).map(move |l| (n, l))).collect()
    }

    fn component_series(&self, comp: Component) -> Vec<f64> {
        self.series(comp.0, comp.1)
    }
}

impl PopulationSeries for TimeScan {
    fn setup(&self) -> &PhysicalSetup {
        &self.setup
    }

    fn times(&self) -> &[f64] {
        &self.times
    }

    fn components(&self) -> Vec<Component> {
        let mut c = self.tracked.clone();
        c.sort_unstable();
        c
    }

    fn component_series(&self, comp: Component) -> Vec<f64> {
        self.series(comp)
    }
}

/// Populations |c_n^ζ|² per component, in long form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationTable {
    pub times_fs: Vec<f64>,
    pub components: Vec<Component>,
    pub label_names: Vec<String>,
    /// `values[j][s]` for component j at sample s.
    pub values: Vec<Vec<f64>>,
}

impl PopulationTable {
    /// Σ of all recorded populations at each sample.
    pub fn totals(&self) -> Vec<f64> {
        (0..self.times_fs.len()).map(|s| self.values.iter().map(|v| v[s]).sum()).collect()
    }
}

pub fn populations(source: &impl PopulationSeries) -> Result<PopulationTable> {
    if source.times().is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let labels = source.setup().equation.labels();
    let components = source.components();
    Ok(PopulationTable {
        times_fs: source.times().iter().map(|&t| time_to_fs(t)).collect(),
        label_names: components.iter().map(|c| labels[c.1].name().to_string()).collect(),
        values: components.iter().map(|&c| source.component_series(c)).collect(),
        components,
    })
}

/// Least-squares fit of A cos²(ΩT/2 + φ) to the initial-mode population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    /// Ω, natural units.
    pub omega: f64,
    /// One-sigma uncertainty of Ω from the fit covariance.
    pub omega_sigma: f64,
    pub amplitude: f64,
    pub phase: f64,
    /// RMS of the residuals.
    pub rms: f64,
    /// Set when `rms` exceeds [`POOR_FIT_RESIDUAL`].
    pub poor_fit: bool,
    pub iterations: usize,
}

impl RabiFit {
    /// 2π/Ω in natural units.
    pub fn period(&self) -> f64 {
        std::f64::consts::TAU / self.omega
    }

    pub fn period_fs(&self) -> f64 {
        time_to_fs(self.period())
    }
}

/// Time of the first minimum after the series drops below one half, and the
/// (interpolated) time of that half crossing.
fn first_minimum(times: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let cross = y.iter().position(|&v| v < 0.5)?;
    if cross == 0 {
        return None;
    }
    let t_half = {
        let (t0, t1, y0, y1) = (times[cross - 1], times[cross], y[cross - 1], y[cross]);
        t0 + (y0 - 0.5) / (y0 - y1) * (t1 - t0)
    };
    // Lowest point of the first dip below one half.
    let mut i = cross;
    let mut j = cross;
    while j < y.len() && y[j] < 0.5 {
        if y[j] < y[i] {
            i = j;
        }
        j += 1;
    }
    if i + 1 == y.len() && y[i] > 0.05 {
        return None;
    }
    Some((times[i], t_half))
}

fn model(t: f64, p: &[f64; 3]) -> (f64, [f64; 3]) {
    let x = 0.5 * p[1] * t + p[2];
    let (s, c) = x.sin_cos();
    let d = -p[0] * 2.0 * s * c;
    (p[0] * c * c, [c * c, 0.5 * t * d, d])
}

fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [[0.0; 4]; 3];
    for i in 0..3 {
        m[i][..3].copy_from_slice(&a[i]);
        m[i][3] = b[i];
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

fn normal_equations(t: &[f64], y: &[f64], p: &[f64; 3]) -> ([[f64; 3]; 3], [f64; 3], f64) {
    let mut jtj = [[0.0; 3]; 3];
    let mut jtr = [0.0; 3];
    let mut ssr = 0.0;
    for (&ti, &yi) in t.iter().zip(y) {
        let (f, g) = model(ti, p);
        let r = yi - f;
        ssr += r * r;
        for a in 0..3 {
            jtr[a] += g[a] * r;
            for b in 0..3 {
                jtj[a][b] += g[a] * g[b];
            }
        }
    }
    (jtj, jtr, ssr)
}

/// Fits A cos²(ΩT/2 + φ), A ∈ [0.9, 1], to the initial-mode population `y`
/// sampled at `times` by Levenberg-Marquardt. The start value comes from the
/// first minimum of the series.
pub fn fit_rabi(times: &[f64], y: &[f64]) -> Result<RabiFit> {
    if times.len() != y.len() {
        return Err(Error::InvalidInput("times and populations differ in length".into()));
    }
    if times.len() < 4 {
        return Err(Error::InvalidInput("a Rabi fit needs at least four samples".into()));
    }
    let (t_min, t_half) = first_minimum(times, y).ok_or(Error::InsufficientSpan)?;
    // Work in units of the first minimum's time to keep the problem scaled.
    let scale = t_min;
    let t: Vec<f64> = times.iter().map(|&v| v / scale).collect();
    let (tm, th) = (1.0, t_half / scale);
    let omega0 = if tm > th { std::f64::consts::FRAC_PI_2 / (tm - th) } else { std::f64::consts::PI };
    let a0 = y.iter().cloned().fold(0.0, f64::max).clamp(AMPLITUDE_BOUNDS.0, AMPLITUDE_BOUNDS.1);
    let mut p = [a0, omega0, std::f64::consts::FRAC_PI_2 - 0.5 * omega0 * tm];
    let clamp = |p: &mut [f64; 3]| p[0] = p[0].clamp(AMPLITUDE_BOUNDS.0, AMPLITUDE_BOUNDS.1);
    clamp(&mut p);

    let (mut jtj, mut jtr, mut ssr) = normal_equations(&t, y, &p);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < 200 {
        iterations += 1;
        let mut a = jtj;
        for i in 0..3 {
            a[i][i] += lambda * jtj[i][i].max(1e-12);
        }
        let Some(dp) = solve3(a, jtr) else { break };
        let mut trial = [p[0] + dp[0], p[1] + dp[1], p[2] + dp[2]];
        clamp(&mut trial);
        let (j2, r2, s2) = normal_equations(&t, y, &trial);
        if s2 <= ssr {
            let converged = ssr - s2 <= 1e-15 * ssr.max(1e-300)
                && dp.iter().zip(&trial).all(|(d, v)| d.abs() <= 1e-13 * v.abs().max(1.0));
            p = trial;
            jtj = j2;
            jtr = r2;
            ssr = s2;
            lambda = (lambda / 10.0).max(1e-15);
            if converged {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }

    let n = t.len() as f64;
    let rms = (ssr / n).sqrt();
    let dof = n - 3.0;
    let sigma = {
        let s2 = ssr / dof;
        // Variance of Ω from the (1,1) element of (JᵀJ)⁻¹.
        solve3(jtj, [0.0, 1.0, 0.0]).map_or(f64::NAN, |col| (s2 * col[1]).max(0.0).sqrt())
    };
    let omega = p[1].abs() / scale;
    Ok(RabiFit {
        omega,
        omega_sigma: sigma / scale,
        amplitude: p[0],
        phase: p[2],
        rms,
        poor_fit: rms > POOR_FIT_RESIDUAL,
        iterations,
    })
}

/// Fits the initial-mode population of any population series.
pub fn fit_rabi_series(source: &impl PopulationSeries) -> Result<RabiFit> {
    fit_rabi(source.times(), &source.mode_series(0))
}

/// Flipped share of the positive-energy scattered population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlipFraction {
    /// Time average over qualifying samples.
    pub mean: f64,
    /// Largest deviation of a qualifying sample from the mean.
    pub spread: f64,
    /// (time, ratio) for every qualifying sample.
    pub samples: Vec<(f64, f64)>,
}

/// Positive-energy label indices of the scattered mode split into
/// (spin kept, spin flipped) relative to the initial label.
fn spin_labels(equation: Equation) -> (Vec<usize>, Vec<usize>) {
    let labels = equation.labels();
    let initial = labels[equation.initial_label()];
    let mut kept = Vec::new();
    let mut flipped = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        if !l.is_positive() {
            continue;
        }
        match (l.spin(), initial.spin()) {
            (Some(a), Some(b)) if a != b => flipped.push(i),
            _ => kept.push(i),
        }
    }
    (kept, flipped)
}

/// Ratio |c_n^{+↓}|² / (|c_n^{+↑}|² + |c_n^{+↓}|²) in the scattered mode,
/// averaged over samples whose scattered population exceeds
/// [`FLIP_SIGNAL_THRESHOLD`]. Spinless equations give zero.
pub fn measure_flip_fraction(source: &impl PopulationSeries) -> Result<FlipFraction> {
    let setup = source.setup();
    let n = setup.target_mode();
    let (kept, flipped) = spin_labels(setup.equation);
    let sum = |idx: &[usize]| -> Vec<f64> {
        let mut out = vec![0.0; source.times().len()];
        for &l in idx {
            for (o, v) in out.iter_mut().zip(source.component_series((n, l))) {
                *o += v;
            }
        }
        out
    };
    let up = sum(&kept);
    let down = sum(&flipped);
    let samples: Vec<(f64, f64)> = source
        .times()
        .iter()
        .zip(up.iter().zip(&down))
        .filter(|(_, (u, d))| *u + *d > FLIP_SIGNAL_THRESHOLD)
        .map(|(&t, (u, d))| (t, d / (u + d)))
        .collect();
    if samples.is_empty() {
        return Err(Error::NoSignal { threshold: FLIP_SIGNAL_THRESHOLD });
    }
    let mean = samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64;
    let spread = samples.iter().map(|s| (s.1 - mean).abs()).fold(0.0, f64::max);
    Ok(FlipFraction { mean, spread, samples })
}

/// Model whose closed-form frequency applies to the equation.
pub fn rabi_model(equation: Equation) -> RabiModel {
    match equation {
        Equation::Dirac => RabiModel::Dirac,
        Equation::KleinGordon => RabiModel::Spinless,
        Equation::Pauli => RabiModel::Pauli,
    }
}

/// Closed-form prediction for the setup's equation and parameters.
pub fn predict(setup: &PhysicalSetup) -> Result<RabiPrediction> {
    RabiPrediction::new(rabi_model(setup.equation), setup.electron.p_e, setup.laser.k()?, setup.laser.field()?)
}

/// Plateau grid (max cycles, stride) for an interaction-time scan reaching
/// `max_time` (natural units, ramps included) or, when absent, `periods`
/// predicted Rabi periods, with about `samples` points. Channels predicted
/// closed are scanned over the Dirac period at the same parameters.
pub fn scan_grid(setup: &PhysicalSetup, max_time: Option<f64>, periods: f64, samples: u64) -> Result<(u64, u64)> {
    let cycle = setup.laser.cycle_duration()?;
    let total = match max_time {
        Some(t) => t,
        None => {
            let mut pred = predict(setup)?;
            if !(pred.omega_r > 0.0) {
                pred =
                    RabiPrediction::new(RabiModel::Dirac, setup.electron.p_e, setup.laser.k()?, setup.laser.field()?)?;
            }
            periods * pred.period()
        }
    };
    let ramps = 2 * setup.laser.ramp_cycles as u64;
    let plateau = ((total / cycle).ceil() as u64).saturating_sub(ramps).max(1);
    let stride = (plateau / samples.max(1)).max(1);
    Ok((plateau.div_ceil(stride) * stride, stride))
}

/// Interaction-time scan over `periods` predicted Rabi periods.
pub fn rabi_scan(setup: &PhysicalSetup, periods: f64, samples: u64) -> Result<TimeScan> {
    let (max, stride) = scan_grid(setup, None, periods, samples)?;
    scan_interaction_time(setup, max, stride, &default_tracking(setup))
}

/// Diffraction into the scattered mode at one longitudinal-momentum offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonancePoint {
    /// p_k offset from the base setup, units of mc.
    pub offset: f64,
    pub offset_kev_c: f64,
    pub diffraction_probability: Option<f64>,
    pub flip_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Diffraction probability versus p_k offset at a fixed interaction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceScan {
    /// Plateau length of every point, laser cycles.
    pub plateau_cycles: u64,
    /// Interaction time T (ramps included), natural units.
    pub interaction_time: f64,
    pub points: Vec<ResonancePoint>,
}

impl ResonanceScan {
    /// Largest diffraction probability and its offset.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.diffraction_probability.map(|d| (p.offset, d)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Mean of the |offsets| at which the diffraction falls to half the peak
    /// on either side, interpolated linearly (units of mc).
    pub fn half_maximum_offset(&self) -> Option<f64> {
        let (x0, peak) = self.peak()?;
        let pts: Vec<(f64, f64)> =
            self.points.iter().filter_map(|p| p.diffraction_probability.map(|d| (p.offset, d))).collect();
        let half = 0.5 * peak;
        let side = |iter: &mut dyn Iterator<Item = (f64, f64)>| -> Option<f64> {
            let mut prev = (x0, peak);
            for (x, d) in iter {
                if d < half {
                    return Some(prev.0 + (prev.1 - half) / (prev.1 - d) * (x - prev.0));
                }
                prev = (x, d);
            }
            None
        };
        let right = side(&mut pts.iter().copied().filter(|p| p.0 > x0));
        let left = side(&mut pts.iter().rev().copied().filter(|p| p.0 < x0));
        match (left, right) {
            (Some(l), Some(r)) => Some(0.5 * ((x0 - l).abs() + (r - x0).abs())),
            (Some(l), None) => Some((x0 - l).abs()),
            (None, Some(r)) => Some((r - x0).abs()),
            (None, None) => None,
        }
    }
}

/// Plateau length (cycles) whose total interaction time is closest to half
/// the predicted Rabi period.
pub fn half_period_plateau(setup: &PhysicalSetup) -> Result<u64> {
    let pred = predict(setup)?;
    let cycle = setup.laser.cycle_duration()?;
    let total = (0.5 * pred.period() / cycle).round();
    Ok((total - 2.0 * setup.laser.ramp_cycles as f64).max(0.0) as u64)
}

/// Propagates the base setup with each p_k offset (units of mc) for a pulse
/// of `plateau_cycles` plateau cycles; points run in parallel and failures are
/// recorded per point.
pub fn resonance_scan(base: &PhysicalSetup, offsets: &[f64], plateau_cycles: Option<u64>) -> Result<ResonanceScan> {
    if !offsets.contains(&0.0) {
        return Err(Error::InvalidInput("resonance scan offsets must include 0".into()));
    }
    base.validate()?;
    let m = match plateau_cycles {
        Some(m) => m,
        None => half_period_plateau(base)?,
    };
    let mut sorted = offsets.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let points: Vec<ResonancePoint> = sorted
        .par_iter()
        .map(|&off| {
            let mut s = base.clone();
            s.electron.p_k += off;
            let res = scan_plateaus(&s, &[m], &default_tracking(&s));
            let (d, f, e) = match res {
                Ok(scan) => {
                    let d = scan.mode_series(s.target_mode())[0];
                    (Some(d), measure_flip_fraction(&scan).ok().map(|f| f.mean), None)
                }
                Err(e) => (None, None, Some(e.to_string())),
            };
            ResonancePoint {
                offset: off,
                offset_kev_c: momentum_to_kev(off),
                diffraction_probability: d,
                flip_fraction: f,
                error: e,
            }
        })
        .collect();
    let cycle = base.laser.cycle_duration()?;
    Ok(ResonanceScan {
        plateau_cycles: m,
        interaction_time: (2 * base.laser.ramp_cycles as u64 + m) as f64 * cycle,
        points,
    })
}

/// Observables of one interaction-time scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSummary {
    pub equation: Equation,
    pub rabi_fit: Option<RabiFit>,
    pub rabi_period_fs: Option<f64>,
    pub flip_fraction: Option<FlipFraction>,
    /// ((mode, label), population) at the last sample.
    pub final_populations: Vec<((i32, String), f64)>,
    /// Largest total over all recorded components at any sample.
    pub max_total_population: f64,
    /// Largest population outside the initial and scattered modes, where
    /// recorded.
    pub max_other_mode_population: Option<f64>,
    /// Half-maximum offset of a resonance scan, units of mc.
    pub resonance_width: Option<f64>,
    pub prediction: RabiPrediction,
    /// Errors of observables that could not be extracted.
    pub notes: Vec<String>,
}

pub fn summarize(source: &impl PopulationSeries) -> Result<ObservableSummary> {
    let table = populations(source)?;
    let setup = source.setup();
    let mut notes = Vec::new();
    let rabi_fit = match fit_rabi_series(source) {
        Ok(fit) => {
            if fit.poor_fit {
                notes.push(format!("Rabi fit residual {:.3} exceeds {POOR_FIT_RESIDUAL}", fit.rms));
            }
            Some(fit)
        }
        Err(e) => {
            notes.push(format!("Rabi fit: {e}"));
            None
        }
    };
    let flip_fraction = match measure_flip_fraction(source) {
        Ok(f) => Some(f),
        Err(e) => {
            notes.push(format!("flip fraction: {e}"));
            None
        }
    };
    let last = table.times_fs.len() - 1;
    let labels = setup.equation.labels();
    let final_populations = table
        .components
        .iter()
        .zip(&table.values)
        .map(|(c, v)| ((c.0, labels[c.1].name().to_string()), v[last]))
        .collect();
    let n = setup.target_mode();
    let others: Vec<usize> =
        table.components.iter().enumerate().filter(|(_, c)| c.0 != 0 && c.0 != n).map(|(j, _)| j).collect();
    let max_other_mode_population = (!others.is_empty()).then(|| {
        let modes: std::collections::BTreeSet<i32> = others.iter().map(|&j| table.components[j].0).collect();
        modes.into_iter().flat_map(|m| source.mode_series(m)).fold(0.0, f64::max)
    });
    Ok(ObservableSummary {
        equation: setup.equation,
        rabi_period_fs: rabi_fit.map(|f| f.period_fs()),
        rabi_fit,
        flip_fraction,
        final_populations,
        max_total_population: table.totals().into_iter().fold(0.0, f64::max),
        max_other_mode_population,
        resonance_width: None,
        prediction: predict(setup)?,
        notes,
    })
}

/// Short-time scattered populations with the ramps weighted by the cube of
/// the envelope: T_eff = plateau + 2 · ramp · ∫₀¹ sin⁶(πx/2) dx.
pub fn effective_interaction_time(setup: &PhysicalSetup, total: f64) -> Result<f64> {
    let ramp = setup.ramp_duration()?;
    // ∫₀¹ sin⁶(πx/2) dx = 5/16.
    Ok(total - 2.0 * ramp + 2.0 * ramp * 5.0 / 16.0)
}

/// Eq.-level reference populations for a short pulse.
pub fn perturbative_reference(setup: &PhysicalSetup, total: f64) -> Result<theory::PerturbativePopulations> {
    theory::perturbative_populations(
        effective_interaction_time(setup, total)?,
        setup.electron.p_e,
        setup.laser.k()?,
        setup.laser.field()?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cos2(t: &[f64], a: f64, w: f64, phi: f64) -> Vec<f64> {
        t.iter().map(|&x| a * (0.5 * w * x + phi).cos().powi(2)).collect()
    }

    #[test]
    fn fit_recovers_synthetic_frequency() {
        let w = 4.26e-6;
        let t: Vec<f64> = (0..150).map(|i| 2.0e4 + i as f64 * 1.2e4).collect();
        for (a, phi) in [(1.0, 0.0), (0.97, -0.03), (0.9, 0.05)] {
            let fit = fit_rabi(&t, &cos2(&t, a, w, phi)).unwrap();
            assert_relative_eq!(fit.omega, w, max_relative = 1e-10);
            assert_relative_eq!(fit.amplitude, a, max_relative = 1e-9);
            assert!(fit.rms < 1e-10 && !fit.poor_fit);
        }
    }

    #[test]
    fn fit_needs_a_minimum() {
        let t: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let y = cos2(&t, 1.0, 0.01, 0.0);
        assert_eq!(fit_rabi(&t, &y), Err(Error::InsufficientSpan));
        assert!(fit_rabi(&t[..3], &y[..3]).is_err());
    }

    #[test]
    fn fit_flags_shallow_oscillation() {
        let t: Vec<f64> = (0..200).map(|i| i as f64 * 0.05).collect();
        // A detuned oscillation never empties the initial mode; cos² cannot follow it.
        let y: Vec<f64> = t.iter().map(|&x| 1.0 - 0.6 * (0.5 * x).sin().powi(2)).collect();
        let fit = fit_rabi(&t, &y).unwrap();
        assert!(fit.poor_fit);
        assert!(fit.rms > POOR_FIT_RESIDUAL && (fit.omega - 1.0).abs() < 0.1, "{fit:?}");
    }

    #[test]
    fn fit_is_insensitive_to_sampling_density() {
        let w = 0.7;
        let t1: Vec<f64> = (0..100).map(|i| 0.1 + i as f64 * 0.13).collect();
        let t2: Vec<f64> = (0..200).map(|i| 0.1 + i as f64 * 0.065).collect();
        let f1 = fit_rabi(&t1, &cos2(&t1, 0.95, w, -0.02)).unwrap();
        let f2 = fit_rabi(&t2, &cos2(&t2, 0.95, w, -0.02)).unwrap();
        assert_relative_eq!(f1.omega, f2.omega, max_relative = 1e-6);
    }

    #[test]
    fn half_maximum_of_triangle() {
        let points = [-2.0, -1.0, 0.0, 1.0, 2.0]
            .iter()
            .map(|&x: &f64| ResonancePoint {
                offset: x,
                offset_kev_c: momentum_to_kev(x),
                diffraction_probability: Some((1.0 - x.abs() / 2.0).max(0.0)),
                flip_fraction: None,
                error: None,
            })
            .collect();
        let scan = ResonanceScan { plateau_cycles: 0, interaction_time: 0.0, points };
        assert_eq!(scan.peak(), Some((0.0, 1.0)));
        assert_relative_eq!(scan.half_maximum_offset().unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn spin_label_partition() {
        assert_eq!(spin_labels(Equation::Dirac), (vec![0], vec![1]));
        assert_eq!(spin_labels(Equation::Pauli), (vec![0], vec![1]));
        assert_eq!(spin_labels(Equation::KleinGordon), (vec![0], vec![]));
    }

    #[test]
    fn effective_time_weights_ramps() {
        let laser = crate::units::LaserSpec {
            photon_energy_kev: 3.1,
            intensity_w_cm2: Some(2e23),
            field_amplitude: None,
            ramp_cycles: 4,
            plateau_fs: 0.0,
        };
        let k = laser.k().unwrap();
        let setup = PhysicalSetup {
            laser,
            electron: crate::kinematics::ElectronKinematics::new(0.0, 0.33),
            channel: crate::kinematics::ScatteringChannel::three_photon(),
            equation: Equation::Dirac,
            mode_cutoff: 5,
            integrator: crate::dynamics::Integrator::PaperEuler,
            picture: crate::dynamics::Picture::Interaction,
            step_size: None,
        };
        let cycle = std::f64::consts::TAU / k;
        // Midpoint quadrature of sin⁶ over one ramp.
        let n = 100_000;
        let quad: f64 =
            (0..n).map(|i| ((i as f64 + 0.5) / n as f64 * std::f64::consts::FRAC_PI_2).sin().powi(6)).sum::<f64>()
                / n as f64;
        let t = effective_interaction_time(&setup, 20.0 * cycle).unwrap();
        assert_relative_eq!(t, 12.0 * cycle + 8.0 * cycle * quad, max_relative = 1e-9);
    }

    proptest! {
        #[test]
        fn fit_recovers_random_models(w in 0.2f64..3.0, a in 0.9f64..1.0, phi in -0.1f64..0.1) {
            let t: Vec<f64> = (0..120).map(|i| 0.05 + i as f64 * 0.1).collect();
            prop_assume!(t.last().unwrap() * w > 2.0 * std::f64::consts::PI);
            let fit = fit_rabi(&t, &cos2(&t, a, w, phi)).unwrap();
            prop_assert!((fit.omega - w).abs() < 1e-8 * w);
        }
    }
}
