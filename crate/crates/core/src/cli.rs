//! Command-line front end: configuration loading, orchestration of runs,
//! sweeps, resonance scans and comparisons, and result files.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{self, populations, summarize, ObservableSummary, PopulationTable, ResonanceScan};
use crate::config::{LabEcho, ResolvedSetup, RunConfig, ScanConfig, ScanMode};
use crate::dynamics::{
    propagate, scan_interaction_time, scan_plateaus, Component, Equation, Integrator, PhysicalSetup, Picture,
};
use crate::error::Error;
use crate::kinematics::{
    bragg_kinematics_at_angle, bragg_longitudinal_momentum, check_conservation, ElectronKinematics, ScatteringChannel,
};
use crate::spinors::CouplingTable;
use crate::theory::{self, RabiModel, RabiPrediction};
use crate::units::{momentum_from_kev, momentum_to_kev, photon_momentum, time_to_fs, time_to_natural};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Share of sweep points that must succeed for exit code 0.
pub const SWEEP_SUCCESS_SHARE: f64 = 0.8;

#[derive(Debug, Parser)]
#[command(name = "kdspin", version, about = "Spin-resolved three-photon Kapitza-Dirac scattering")]
pub struct Cli {
    /// Worker threads for sweeps and scans (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override the configured integrator.
    #[arg(long, value_enum)]
    pub integrator: Option<IntegratorArg>,
    /// Override the configured picture.
    #[arg(long, value_enum)]
    pub picture: Option<PictureArg>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum IntegratorArg {
    PaperEuler,
    Rk4,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum PictureArg {
    Direct,
    Interaction,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Propagate one setup; writes trajectory.csv and summary.json.
    Run(Common),
    /// Sweep p_E for each configured equation; writes sweep.csv and sweep.json.
    Sweep(Common),
    /// Scan the longitudinal momentum around resonance; writes resonance.csv.
    Scan(Common),
    /// Diffraction pattern of several equations at one interaction time; writes compare.csv.
    Compare(Common),
    /// Print the closed-form predictions for the configured setup as JSON.
    Theory {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print resonant kinematics for a list of transverse momenta or an angle.
    Kinematics(KinematicsArgs),
    /// Debugging dumps.
    #[command(subcommand)]
    Debug(DebugCommand),
}

#[derive(Debug, Clone, Args)]
pub struct KinematicsArgs {
    #[arg(long, default_value_t = 3.1)]
    pub photon_energy_kev: f64,
    #[arg(long, default_value_t = 2, allow_negative_numbers = true)]
    pub n_r: i32,
    #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
    pub n_l: i32,
    /// Transverse momenta, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub p_e_kev_c: Vec<f64>,
    /// Incidence angle; solved self-consistently for p_E.
    #[arg(long)]
    pub angle_deg: Option<f64>,
    /// CSV instead of an aligned table.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Subcommand)]
pub enum DebugCommand {
    /// Write the free-spinor coupling elements to couplings.csv.
    Couplings(Common),
}

/// Failure of a command, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(Error),
    #[error("{0}")]
    Physics(Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{failed} of {total} sweep points failed")]
    PartialSweep { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Physics(_) => 3,
            CliError::Io { .. } => 1,
            CliError::PartialSweep { .. } => 4,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn physics(e: Error) -> CliError {
    CliError::Physics(e)
}

fn load(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(&common.config).map_err(CliError::Config)?;
    if let Some(i) = common.integrator {
        cfg.numerics.integrator = match i {
            IntegratorArg::PaperEuler => Integrator::PaperEuler,
            IntegratorArg::Rk4 => Integrator::Rk4,
        };
    }
    if let Some(p) = common.picture {
        cfg.numerics.picture = match p {
            PictureArg::Direct => Picture::Direct,
            PictureArg::Interaction => Picture::Interaction,
        };
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io = |source| CliError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable summary");
    v.push(b'\n');
    v
}

/// Shortest round-trip form; switches to an exponent for very small or large
/// magnitudes instead of printing dozens of zeros.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for r in rows {
        w.write_record(r).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

/// Long-format population table: `t_fs,n,label,population`.
pub fn population_csv(table: &PopulationTable) -> Vec<u8> {
    let mut rows = Vec::with_capacity(table.times_fs.len() * table.components.len());
    for (s, t) in table.times_fs.iter().enumerate() {
        for (j, c) in table.components.iter().enumerate() {
            rows.push(vec![num(*t), c.0.to_string(), table.label_names[j].clone(), num(table.values[j][s])]);
        }
    }
    csv_bytes(&["t_fs", "n", "label", "population"], &rows)
}

/// Interaction-time scan of a resolved setup.
pub fn observe(setup: &PhysicalSetup, scan: &ScanConfig) -> crate::Result<crate::dynamics::TimeScan> {
    let (max, stride) = analysis::scan_grid(setup, scan.max_time_fs.map(time_to_natural), scan.periods, scan.samples)?;
    scan_interaction_time(setup, max, stride, &crate::dynamics::default_tracking(setup))
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    software_version: &'static str,
    command: &'static str,
    lab: LabEcho,
    setup: &'a ResolvedSetup,
    observables: ObservableSummary,
    diagnostics: serde_json::Value,
    wall_time_s: f64,
}

pub fn cmd_run(common: &Common) -> CliResult<()> {
    let started = Instant::now();
    let cfg = load(common)?;
    let resolved = cfg.resolve(cfg.equation, None).map_err(physics)?;
    let setup = &resolved.setup;
    let (table, observables, diagnostics) = match cfg.scan.mode {
        ScanMode::InteractionTime => {
            let scan = observe(setup, &cfg.scan).map_err(physics)?;
            let obs = summarize(&scan).map_err(physics)?;
            (populations(&scan).map_err(physics)?, obs, serde_json::to_value(&scan.diagnostics))
        }
        ScanMode::Pulse => {
            let total = 2.0 * setup.ramp_duration().map_err(physics)? + time_to_natural(cfg.laser.plateau_fs);
            let gen = setup.generator().map_err(physics)?;
            let steps = (total / setup.requested_step(&gen)).ceil();
            let stride = ((steps / cfg.scan.samples as f64).ceil() as usize).max(1);
            let traj = propagate(setup, total, stride).map_err(physics)?;
            let obs = summarize(&traj).map_err(physics)?;
            (populations(&traj).map_err(physics)?, obs, serde_json::to_value(&traj.diagnostics))
        }
    };
    write_atomic(&common.out.join("trajectory.csv"), &population_csv(&table))?;
    let summary = RunSummary {
        software_version: VERSION,
        command: "run",
        lab: resolved.lab().map_err(physics)?,
        setup: &resolved,
        observables,
        diagnostics: diagnostics.expect("serializable diagnostics"),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    write_atomic(&common.out.join("summary.json"), &json_bytes(&summary))?;
    print_observables(&summary.observables);
    Ok(())
}

fn print_observables(o: &ObservableSummary) {
    if let Some(f) = o.rabi_fit {
        println!(
            "Rabi period {:.4} fs (closed form {:.4} fs), fit rms {:.2e}",
            f.period_fs(),
            time_to_fs(o.prediction.period()),
            f.rms
        );
    }
    if let Some(f) = &o.flip_fraction {
        println!("flip fraction {:.4} ± {:.4} (closed form {:.4})", f.mean, f.spread, o.prediction.flip_probability);
    }
    for n in &o.notes {
        println!("note: {n}");
    }
}

/// One sweep grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub equation: Equation,
    pub p_e_over_k: f64,
    pub p_e_kev_c: Option<f64>,
    pub p_k_kev_c: Option<f64>,
    pub omega_r_fit: Option<f64>,
    pub omega_r_sigma: Option<f64>,
    pub omega_r_theory: Option<f64>,
    pub rabi_period_fs: Option<f64>,
    pub flip_fraction: Option<f64>,
    pub flip_theory: Option<f64>,
    pub max_diffraction: Option<f64>,
    pub notes: Vec<String>,
    pub error: Option<String>,
}

/// Resolves, scans and analyses one (equation, p_E/k) point.
pub fn sweep_point(cfg: &RunConfig, equation: Equation, ratio: f64) -> SweepRow {
    let mut row = SweepRow {
        equation,
        p_e_over_k: ratio,
        p_e_kev_c: None,
        p_k_kev_c: None,
        omega_r_fit: None,
        omega_r_sigma: None,
        omega_r_theory: None,
        rabi_period_fs: None,
        flip_fraction: None,
        flip_theory: None,
        max_diffraction: None,
        notes: Vec::new(),
        error: None,
    };
    let result = (|| -> crate::Result<()> {
        let resolved = cfg.resolve(equation, Some(ratio))?;
        let s = &resolved.setup;
        row.p_e_kev_c = Some(momentum_to_kev(s.electron.p_e));
        row.p_k_kev_c = Some(momentum_to_kev(s.electron.p_k));
        let scan = observe(s, &cfg.scan)?;
        let sum = summarize(&scan)?;
        row.omega_r_theory = Some(sum.prediction.omega_r);
        row.flip_theory = Some(sum.prediction.flip_probability).filter(|_| equation != Equation::KleinGordon);
        row.omega_r_fit = sum.rabi_fit.map(|f| f.omega);
        row.omega_r_sigma = sum.rabi_fit.map(|f| f.omega_sigma);
        row.rabi_period_fs = sum.rabi_period_fs;
        row.flip_fraction = sum.flip_fraction.as_ref().map(|f| f.mean).filter(|_| equation != Equation::KleinGordon);
        row.max_diffraction = Some(scan.mode_series(s.target_mode()).into_iter().fold(0.0, f64::max));
        row.notes = sum.notes;
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

/// All sweep points, sorted by equation order then grid value.
pub fn run_sweep(cfg: &RunConfig) -> crate::Result<Vec<SweepRow>> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::InvalidInput("config has no [sweep] table".into()))?;
    let grid = sweep.grid(cfg.laser().k()?)?;
    let jobs: Vec<(usize, Equation, f64)> =
        sweep.equations.iter().enumerate().flat_map(|(i, &e)| grid.iter().map(move |&r| (i, e, r))).collect();
    let mut rows: Vec<(usize, SweepRow)> = jobs.par_iter().map(|&(i, e, r)| (i, sweep_point(cfg, e, r))).collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.p_e_over_k.total_cmp(&b.1.p_e_over_k)));
    Ok(rows.into_iter().map(|r| r.1).collect())
}

pub fn sweep_csv(rows: &[SweepRow]) -> Vec<u8> {
    let header = [
        "equation",
        "p_e_over_k",
        "p_e_kev_c",
        "p_k_kev_c",
        "omega_r_fit",
        "omega_r_sigma",
        "omega_r_theory",
        "rabi_period_fs",
        "flip_fraction",
        "flip_theory",
        "max_diffraction",
        "error",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.equation.name().to_string(),
                num(r.p_e_over_k),
                fmt_opt(r.p_e_kev_c),
                fmt_opt(r.p_k_kev_c),
                fmt_opt(r.omega_r_fit),
                fmt_opt(r.omega_r_sigma),
                fmt_opt(r.omega_r_theory),
                fmt_opt(r.rabi_period_fs),
                fmt_opt(r.flip_fraction),
                fmt_opt(r.flip_theory),
                fmt_opt(r.max_diffraction),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv_bytes(&header, &body)
}

pub fn cmd_sweep(common: &Common) -> CliResult<()> {
    let started = Instant::now();
    let cfg = load(common)?;
    if cfg.sweep.is_none() {
        return Err(CliError::Config(Error::InvalidInput("config has no [sweep] table".into())));
    }
    let rows = run_sweep(&cfg).map_err(CliError::Config)?;
    write_atomic(&common.out.join("sweep.csv"), &sweep_csv(&rows))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let summary = serde_json::json!({
        "software_version": VERSION,
        "command": "sweep",
        "config": cfg,
        "rows": rows,
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    write_atomic(&common.out.join("sweep.json"), &json_bytes(&summary))?;
    for r in &rows {
        if let Some(e) = &r.error {
            eprintln!("{} p_E/k = {}: {e}", r.equation.name(), r.p_e_over_k);
        }
    }
    println!("{} of {} sweep points succeeded", rows.len() - failed, rows.len());
    if (rows.len() - failed) as f64 >= SWEEP_SUCCESS_SHARE * rows.len() as f64 {
        Ok(())
    } else {
        Err(CliError::PartialSweep { failed, total: rows.len() })
    }
}

pub fn resonance_csv(scan: &ResonanceScan) -> Vec<u8> {
    let rows: Vec<Vec<String>> = scan
        .points
        .iter()
        .map(|p| vec![num(p.offset_kev_c), fmt_opt(p.diffraction_probability), fmt_opt(p.flip_fraction)])
        .collect();
    csv_bytes(&["offset_kev_c", "diffraction_probability", "flip_fraction"], &rows)
}

/// Resonance scan around the resolved setup.
pub fn run_resonance_scan(cfg: &RunConfig) -> crate::Result<(ResolvedSetup, ResonanceScan)> {
    let rs = cfg.resonance_scan.clone().unwrap_or(crate::config::ResonanceScanConfig {
        offsets_kev_c: None,
        span_kev_c: 0.5,
        points: 21,
        interaction_time_fs: None,
    });
    let resolved = cfg.resolve(cfg.equation, None)?;
    let offsets: Vec<f64> = rs.offsets()?.into_iter().map(momentum_from_kev).collect();
    let plateau = match rs.interaction_time_fs {
        Some(t) => {
            let s = &resolved.setup;
            let cycles = (time_to_natural(t) / s.laser.cycle_duration()?).round() as u64;
            Some(cycles.checked_sub(2 * s.laser.ramp_cycles as u64).ok_or_else(|| {
                Error::InvalidInput("resonance interaction time is shorter than the two ramps".into())
            })?)
        }
        None => None,
    };
    let scan = analysis::resonance_scan(&resolved.setup, &offsets, plateau)?;
    Ok((resolved, scan))
}

pub fn cmd_scan(common: &Common) -> CliResult<()> {
    let started = Instant::now();
    let cfg = load(common)?;
    let (resolved, scan) = run_resonance_scan(&cfg).map_err(physics)?;
    write_atomic(&common.out.join("resonance.csv"), &resonance_csv(&scan))?;
    let width = scan.half_maximum_offset();
    let summary = serde_json::json!({
        "software_version": VERSION,
        "command": "scan",
        "lab": resolved.lab().map_err(physics)?,
        "setup": resolved,
        "interaction_time_fs": time_to_fs(scan.interaction_time),
        "half_maximum_offset_kev_c": width.map(momentum_to_kev),
        "scan": scan,
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    write_atomic(&common.out.join("resonance.json"), &json_bytes(&summary))?;
    if let Some(w) = width {
        println!("half-maximum offset {:.4} keV/c", momentum_to_kev(w));
    }
    Ok(())
}

/// Populations of one equation after one pulse, for a bar chart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareResult {
    pub equation: Equation,
    /// Interaction time actually used (whole laser cycles), fs.
    pub interaction_time_fs: f64,
    pub components: Vec<Component>,
    pub labels: Vec<String>,
    pub populations: Vec<f64>,
    pub flip_fraction: Option<f64>,
}

/// Final populations of every component after a pulse of total duration
/// `total` (natural units); pulses shorter than both ramps get shortened ramps.
pub fn final_populations(setup: &PhysicalSetup, total: f64) -> crate::Result<(f64, Vec<Component>, Vec<f64>)> {
    let nl = setup.equation.labels_per_mode();
    let cut = setup.mode_cutoff;
    let comps: Vec<Component> = (-cut..=cut).flat_map(|n| (0..nl).map(move |l| (n, l))).collect();
    let cycle = setup.laser.cycle_duration()?;
    let cycles = (total / cycle).round() as u64;
    if cycles == 0 {
        let gen = setup.generator()?;
        let init = setup.initial_state(&gen);
        return Ok((0.0, comps, init.iter().map(|c| c.norm_sqr()).collect()));
    }
    let ramps = 2 * setup.laser.ramp_cycles as u64;
    if cycles >= ramps {
        let scan = scan_plateaus(setup, &[cycles - ramps], &comps)?;
        let pops = comps.iter().map(|&c| scan.series(c)[0]).collect();
        return Ok((scan.times[0], comps, pops));
    }
    let mut short = setup.clone();
    short.laser.ramp_cycles = (cycles / 2) as u32;
    let t = cycles as f64 * cycle;
    let traj = propagate(&short, t, usize::MAX)?;
    let pops = comps.iter().map(|&c| *traj.series(c.0, c.1).last().expect("final sample")).collect();
    Ok((t, comps, pops))
}

pub fn run_compare(cfg: &RunConfig) -> crate::Result<Vec<CompareResult>> {
    let cmp = cfg.compare.as_ref().ok_or_else(|| Error::InvalidInput("config has no [compare] table".into()))?;
    let total = time_to_natural(cmp.interaction_time_fs);
    cmp.equations
        .par_iter()
        .map(|&eq| {
            let resolved = cfg.resolve(eq, None)?;
            let s = &resolved.setup;
            let (t, comps, pops) = final_populations(s, total)?;
            let labels = comps.iter().map(|c| eq.labels()[c.1].name().to_string()).collect();
            let n = s.target_mode();
            let up = comps.iter().zip(&pops).filter(|(c, _)| c.0 == n && c.1 == 0).map(|p| *p.1).sum::<f64>();
            let flip = match eq {
                Equation::KleinGordon => None,
                _ => {
                    let down = comps.iter().zip(&pops).filter(|(c, _)| c.0 == n && c.1 == 1).map(|p| *p.1).sum::<f64>();
                    (up + down > 0.0).then(|| down / (up + down))
                }
            };
            Ok(CompareResult {
                equation: eq,
                interaction_time_fs: time_to_fs(t),
                components: comps,
                labels,
                populations: pops,
                flip_fraction: flip,
            })
        })
        .collect()
}

pub fn compare_csv(results: &[CompareResult]) -> Vec<u8> {
    let mut rows = Vec::new();
    for r in results {
        for ((c, l), p) in r.components.iter().zip(&r.labels).zip(&r.populations) {
            rows.push(vec![
                r.equation.name().to_string(),
                num(r.interaction_time_fs),
                c.0.to_string(),
                l.clone(),
                num(*p),
            ]);
        }
    }
    csv_bytes(&["equation", "t_fs", "n", "label", "probability"], &rows)
}

pub fn cmd_compare(common: &Common) -> CliResult<()> {
    let started = Instant::now();
    let cfg = load(common)?;
    if cfg.compare.is_none() {
        return Err(CliError::Config(Error::InvalidInput("config has no [compare] table".into())));
    }
    let results = run_compare(&cfg).map_err(physics)?;
    write_atomic(&common.out.join("compare.csv"), &compare_csv(&results))?;
    let summary = serde_json::json!({
        "software_version": VERSION,
        "command": "compare",
        "config": cfg,
        "results": results,
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    write_atomic(&common.out.join("compare.json"), &json_bytes(&summary))?;
    for r in &results {
        let n = cfg.channel.n_r - cfg.channel.n_l;
        let d: f64 = r.components.iter().zip(&r.populations).filter(|(c, _)| c.0 == n).map(|p| p.1).sum();
        println!("{}: diffraction probability {:.4e} at {:.4} fs", r.equation.name(), d, r.interaction_time_fs);
    }
    Ok(())
}

/// Closed-form predictions for the configured setup at its bare resonance.
pub fn theory_report(cfg: &RunConfig) -> crate::Result<serde_json::Value> {
    let setup = cfg.base_setup(cfg.equation, None)?;
    let k = setup.laser.k()?;
    let eps = setup.laser.field()?;
    let p_e = setup.electron.p_e;
    let models: Vec<serde_json::Value> = [RabiModel::Dirac, RabiModel::Pauli, RabiModel::Spinless]
        .iter()
        .map(|&m| {
            let p = RabiPrediction::new(m, p_e, k, eps)?;
            Ok(serde_json::json!({
                "model": m,
                "omega_r": p.omega_r,
                "rabi_period_fs": time_to_fs(p.period()),
                "flip_probability": p.flip_probability,
            }))
        })
        .collect::<crate::Result<_>>()?;
    let half = 0.5 * RabiPrediction::new(RabiModel::Dirac, p_e, k, eps)?.period();
    let short = theory::perturbative_populations(0.1 / theory::omega0(eps, k)?, p_e, k, eps)?;
    Ok(serde_json::json!({
        "software_version": VERSION,
        "photon_momentum": k,
        "field_amplitude": eps,
        "p_e_over_k": p_e / k,
        "omega0": theory::omega0(eps, k)?,
        "predictions": models,
        "dirac_half_period_fs": time_to_fs(half),
        "perturbative_at_omega0_t_0_1": short,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinematicsRow {
    pub p_e_kev_c: f64,
    pub p_k_kev_c: f64,
    pub p_kev_c: f64,
    pub theta_deg: f64,
    pub energy_residual: f64,
}

pub fn kinematics_rows(args: &KinematicsArgs) -> crate::Result<Vec<KinematicsRow>> {
    let channel = ScatteringChannel::new(args.n_r, args.n_l)?;
    let k = photon_momentum(args.photon_energy_kev)?;
    let mut electrons = Vec::new();
    if let Some(theta) = args.angle_deg {
        electrons.push(bragg_kinematics_at_angle(channel, k, theta.to_radians())?);
    }
    for &p in &args.p_e_kev_c {
        let p_e = momentum_from_kev(p);
        electrons.push(ElectronKinematics::new(p_e, bragg_longitudinal_momentum(channel, k, p_e)?));
    }
    if electrons.is_empty() {
        electrons.push(ElectronKinematics::new(0.0, bragg_longitudinal_momentum(channel, k, 0.0)?));
    }
    electrons
        .iter()
        .map(|e| {
            Ok(KinematicsRow {
                p_e_kev_c: momentum_to_kev(e.p_e),
                p_k_kev_c: momentum_to_kev(e.p_k),
                p_kev_c: momentum_to_kev(e.momentum()),
                theta_deg: e.angle()?.to_degrees(),
                energy_residual: check_conservation(e, channel, k).energy,
            })
        })
        .collect()
}

fn cmd_kinematics(args: &KinematicsArgs) -> CliResult<()> {
    let rows = kinematics_rows(args).map_err(CliError::Config)?;
    if args.csv {
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![num(r.p_e_kev_c), num(r.p_k_kev_c), num(r.p_kev_c), num(r.theta_deg), num(r.energy_residual)])
            .collect();
        let bytes = csv_bytes(&["p_e_kev_c", "p_k_kev_c", "p_kev_c", "theta_deg", "energy_residual"], &body);
        print!("{}", String::from_utf8_lossy(&bytes));
    } else {
        println!(
            "{:>12} {:>12} {:>12} {:>10} {:>12}",
            "p_E [keV/c]", "p_k [keV/c]", "|p| [keV/c]", "θ [deg]", "ΔE [mc²]"
        );
        for r in &rows {
            println!(
                "{:>12.4} {:>12.4} {:>12.4} {:>10.5} {:>12.3e}",
                r.p_e_kev_c, r.p_k_kev_c, r.p_kev_c, r.theta_deg, r.energy_residual
            );
        }
    }
    Ok(())
}

fn cmd_couplings(common: &Common) -> CliResult<()> {
    let cfg = load(common)?;
    let setup = cfg.base_setup(cfg.equation, None).map_err(CliError::Config)?;
    let table = CouplingTable::build(setup.electron.as_vector(), setup.laser.k().map_err(physics)?, setup.mode_cutoff)
        .map_err(physics)?;
    let mut bytes = Vec::new();
    table.write_csv(&mut bytes).map_err(physics)?;
    write_atomic(&common.out.join("couplings.csv"), &bytes)
}

/// Executes a parsed command line.
pub fn execute(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        // Fails only if the pool was already built, which keeps the first setting.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Scan(c) => cmd_scan(c),
        Command::Compare(c) => cmd_compare(c),
        Command::Theory { config } => {
            let cfg = RunConfig::load(config).map_err(CliError::Config)?;
            let report = theory_report(&cfg).map_err(CliError::Config)?;
            print!("{}", String::from_utf8_lossy(&json_bytes(&report)));
            Ok(())
        }
        Command::Kinematics(a) => cmd_kinematics(a),
        Command::Debug(DebugCommand::Couplings(c)) => cmd_couplings(c),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
