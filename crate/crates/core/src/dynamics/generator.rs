//! Mode-space generators for the Dirac, Klein-Gordon and Pauli equations.
//!
//! Every equation is written in the basis of free eigenmodes at momenta
//! p + n k ê_z, n ∈ [−N, N], so that the amplitude equations read
//!
//!   i ċ = (D + f₁(t) A + f₂(t) B) c,   f₁ = w(t) sin(kt),  f₂ = w(t)² sin²(kt),
//!
//! with D real diagonal (free energies) and A, B real sparse matrices. The
//! vector potential is A = −(ε/k) cos(kz) sin(kt) w(t) ê_x; with p_y = 0 all
//! matrix elements are real.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinors::{CouplingTable, EnergySign, Spin, SpinLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Equation {
    Dirac,
    KleinGordon,
    Pauli,
}

impl Equation {
    pub fn labels(self) -> &'static [Label] {
        match self {
            Equation::Dirac => &DIRAC_LABELS,
            Equation::KleinGordon => &KG_LABELS,
            Equation::Pauli => &PAULI_LABELS,
        }
    }

    pub fn labels_per_mode(self) -> usize {
        self.labels().len()
    }

    /// Label carrying the initial population: +↑, + or ↑.
    pub fn initial_label(self) -> usize {
        0
    }

    pub fn name(self) -> &'static str {
        match self {
            Equation::Dirac => "dirac",
            Equation::KleinGordon => "klein-gordon",
            Equation::Pauli => "pauli",
        }
    }
}

/// Internal degree of freedom of one momentum mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Dirac(SpinLabel),
    Charge(EnergySign),
    Spin(Spin),
}

const DIRAC_LABELS: [Label; 4] = [
    Label::Dirac(SpinLabel::PLUS_UP),
    Label::Dirac(SpinLabel::PLUS_DOWN),
    Label::Dirac(SpinLabel::MINUS_UP),
    Label::Dirac(SpinLabel::MINUS_DOWN),
];
const KG_LABELS: [Label; 2] = [Label::Charge(EnergySign::Positive), Label::Charge(EnergySign::Negative)];
const PAULI_LABELS: [Label; 2] = [Label::Spin(Spin::Up), Label::Spin(Spin::Down)];

impl Label {
    pub fn name(self) -> &'static str {
        match self {
            Label::Dirac(l) => l.name(),
            Label::Charge(EnergySign::Positive) => "+",
            Label::Charge(EnergySign::Negative) => "-",
            Label::Spin(Spin::Up) => "up",
            Label::Spin(Spin::Down) => "down",
        }
    }

    /// Spin projection if the label has one.
    pub fn spin(self) -> Option<Spin> {
        match self {
            Label::Dirac(l) => Some(l.spin),
            Label::Spin(s) => Some(s),
            Label::Charge(_) => None,
        }
    }

    /// `true` for positive-energy (or nonrelativistic) labels.
    pub fn is_positive(self) -> bool {
        match self {
            Label::Dirac(l) => l.energy == EnergySign::Positive,
            Label::Charge(s) => s == EnergySign::Positive,
            Label::Spin(_) => true,
        }
    }

    /// Sign of the conserved quadratic form: −1 only for negative-charge
    /// Feshbach-Villars components.
    pub fn metric(self) -> f64 {
        match self {
            Label::Charge(s) => s.value(),
            _ => 1.0,
        }
    }
}

/// Real sparse matrix in compressed-row form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, f64)>) -> SparseMatrix {
        entries.retain(|e| e.2 != 0.0);
        entries.sort_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0; dim + 1];
        for e in &entries {
            row_ptr[e.0 + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            dim,
            row_ptr,
            cols: entries.iter().map(|e| e.1).collect(),
            values: entries.iter().map(|e| e.2).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `i` as (column, value).
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// Largest |i − j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.dim).flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j))).max().unwrap_or(0)
    }

    /// y += s · M x for row-major blocks with `ncols` columns.
    pub fn mul_add_block(&self, s: f64, x: &[C64], y: &mut [C64], ncols: usize) {
        if s == 0.0 || self.values.is_empty() {
            return;
        }
        for i in 0..self.dim {
            let yi = &mut y[i * ncols..(i + 1) * ncols];
            for (j, v) in self.row(i) {
                let f = s * v;
                let xj = &x[j * ncols..(j + 1) * ncols];
                for (a, b) in yi.iter_mut().zip(xj) {
                    *a += f * b;
                }
            }
        }
    }
}

/// Switches for individual interaction terms, used to isolate channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TermSelection {
    /// Terms linear in the field (α·A, A·p).
    pub linear: bool,
    /// The spin-magnetic σ·B term (Pauli equation only).
    pub spin_magnetic: bool,
    /// Terms quadratic in the field (A², absent for Dirac).
    pub quadratic: bool,
}

impl Default for TermSelection {
    fn default() -> Self {
        TermSelection { linear: true, spin_magnetic: true, quadratic: true }
    }
}

/// Assembled mode-space generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    equation: Equation,
    cutoff: i32,
    k: f64,
    diagonal: Vec<f64>,
    linear: SparseMatrix,
    quadratic: SparseMatrix,
    metric: Vec<f64>,
}

impl Generator {
    /// Builds the generator for electron momentum `(p_e, 0, p_k)`, photon
    /// momentum `k`, dimensionless field `field` and mode cutoff `cutoff`.
    pub fn new(
        equation: Equation,
        p_e: f64,
        p_k: f64,
        k: f64,
        field: f64,
        cutoff: i32,
        terms: TermSelection,
    ) -> Result<Generator> {
        if cutoff < 1 {
            return Err(Error::InvalidInput(format!("mode cutoff must be at least 1, got {cutoff}")));
        }
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::InvalidInput(format!("photon momentum must be positive, got {k}")));
        }
        if !(field >= 0.0) || !field.is_finite() {
            return Err(Error::InvalidInput(format!("field must be non-negative, got {field}")));
        }
        let labels = equation.labels();
        let nl = labels.len();
        let modes = (2 * cutoff + 1) as usize;
        let dim = modes * nl;
        let idx = |n: i32, l: usize| (n + cutoff) as usize * nl + l;
        let q2 = |n: i32| p_e * p_e + (p_k + n as f64 * k).powi(2);
        let energy = |n: i32| (1.0 + q2(n)).sqrt();

        let mut diagonal = vec![0.0; dim];
        let mut metric = vec![1.0; dim];
        for n in -cutoff..=cutoff {
            for (l, label) in labels.iter().enumerate() {
                metric[idx(n, l)] = label.metric();
                diagonal[idx(n, l)] = match (equation, label) {
                    (Equation::Pauli, _) => 0.5 * q2(n),
                    (_, Label::Dirac(s)) => s.energy.value() * energy(n),
                    (_, Label::Charge(s)) => s.value() * energy(n),
                    _ => unreachable!("label does not belong to equation"),
                };
            }
        }

        let mut lin = Vec::new();
        let mut quad = Vec::new();
        let a1 = -field / (2.0 * k);
        let a_diag = field * field / (4.0 * k * k);
        let a_two = field * field / (8.0 * k * k);
        match equation {
            Equation::Dirac => {
                if terms.linear {
                    let table = CouplingTable::build([p_e, 0.0, p_k], k, cutoff)?;
                    for i in 0..table.pair_count() {
                        let n = i as i32 - cutoff;
                        let block = table.forward_block(i);
                        for g in 0..4 {
                            for z in 0..4 {
                                let v = a1 * block[g][z].re;
                                lin.push((idx(n, g), idx(n + 1, z), v));
                                lin.push((idx(n + 1, z), idx(n, g), v));
                            }
                        }
                    }
                }
            }
            Equation::KleinGordon => {
                // i ċ_n^γ = γ 𝓔_n c_n^γ + γ Σ_{m,ζ} W_nm / √(𝓔_n 𝓔_m) c_m^ζ
                let push = |list: &mut Vec<(usize, usize, f64)>, n: i32, m: i32, w: f64| {
                    let s = w / (energy(n) * energy(m)).sqrt();
                    for (g, lg) in labels.iter().enumerate() {
                        for z in 0..nl {
                            list.push((idx(n, g), idx(m, z), lg.metric() * s));
                        }
                    }
                };
                for n in -cutoff..=cutoff {
                    if terms.linear && n < cutoff {
                        push(&mut lin, n, n + 1, a1 * p_e);
                        push(&mut lin, n + 1, n, a1 * p_e);
                    }
                    if terms.quadratic {
                        push(&mut quad, n, n, a_diag);
                        if n + 2 <= cutoff {
                            push(&mut quad, n, n + 2, a_two);
                            push(&mut quad, n + 2, n, a_two);
                        }
                    }
                }
            }
            Equation::Pauli => {
                let (up, down) = (0, 1);
                for n in -cutoff..=cutoff {
                    if n < cutoff {
                        if terms.linear {
                            for s in [up, down] {
                                lin.push((idx(n, s), idx(n + 1, s), a1 * p_e));
                                lin.push((idx(n + 1, s), idx(n, s), a1 * p_e));
                            }
                        }
                        if terms.spin_magnetic {
                            // (ε/2) σ_y sin(kz) in the σ_x eigenbasis.
                            let b = field / 4.0;
                            lin.push((idx(n + 1, down), idx(n, up), -b));
                            lin.push((idx(n + 1, up), idx(n, down), b));
                            lin.push((idx(n, down), idx(n + 1, up), b));
                            lin.push((idx(n, up), idx(n + 1, down), -b));
                        }
                    }
                    if terms.quadratic {
                        for s in [up, down] {
                            quad.push((idx(n, s), idx(n, s), a_diag));
                            if n + 2 <= cutoff {
                                quad.push((idx(n, s), idx(n + 2, s), a_two));
                                quad.push((idx(n + 2, s), idx(n, s), a_two));
                            }
                        }
                    }
                }
            }
        }

        Ok(Generator {
            equation,
            cutoff,
            k,
            diagonal,
            linear: SparseMatrix::from_triplets(dim, lin),
            quadratic: SparseMatrix::from_triplets(dim, quad),
            metric,
        })
    }

    pub fn equation(&self) -> Equation {
        self.equation
    }

    pub fn cutoff(&self) -> i32 {
        self.cutoff
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.diagonal.len()
    }

    pub fn labels_per_mode(&self) -> usize {
        self.equation.labels_per_mode()
    }

    /// State index of (mode n, label l).
    pub fn index(&self, n: i32, label: usize) -> usize {
        debug_assert!(n.abs() <= self.cutoff && label < self.labels_per_mode());
        (n + self.cutoff) as usize * self.labels_per_mode() + label
    }

    /// Inverse of [`Generator::index`].
    pub fn mode_of(&self, i: usize) -> (i32, usize) {
        let nl = self.labels_per_mode();
        ((i / nl) as i32 - self.cutoff, i % nl)
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn linear(&self) -> &SparseMatrix {
        &self.linear
    }

    pub fn quadratic(&self) -> &SparseMatrix {
        &self.quadratic
    }

    /// Diagonal of the conserved quadratic form (all ones except for the
    /// negative-charge Klein-Gordon components).
    pub fn metric(&self) -> &[f64] {
        &self.metric
    }

    /// Half-bandwidth of the full generator in the state ordering.
    pub fn bandwidth(&self) -> usize {
        self.linear.bandwidth().max(self.quadratic.bandwidth())
    }

    /// Field coefficients (f₁, f₂) of the linear and quadratic parts at time
    /// `t` for envelope value `w`.
    pub fn coefficients(&self, t: f64, w: f64) -> (f64, f64) {
        let f1 = w * (self.k * t).sin();
        (f1, f1 * f1)
    }

    /// y = H x where H = D + f₁A + f₂B, on row-major blocks of `ncols` columns.
    pub fn apply_block(&self, f1: f64, f2: f64, x: &[C64], y: &mut [C64], ncols: usize) {
        for (i, d) in self.diagonal.iter().enumerate() {
            for c in 0..ncols {
                y[i * ncols + c] = x[i * ncols + c] * d;
            }
        }
        self.apply_interaction_add(f1, f2, x, y, ncols);
    }

    /// y += (f₁A + f₂B) x.
    pub fn apply_interaction_add(&self, f1: f64, f2: f64, x: &[C64], y: &mut [C64], ncols: usize) {
        self.linear.mul_add_block(f1, x, y, ncols);
        self.quadratic.mul_add_block(f2, x, y, ncols);
    }

    /// Time derivative ċ = −i H(t) c of a single state.
    pub fn derivative(&self, t: f64, w: f64, state: &[C64]) -> Vec<C64> {
        let (f1, f2) = self.coefficients(t, w);
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        self.apply_block(f1, f2, state, &mut y, 1);
        y.iter().map(|v| C64::new(v.im, -v.re)).collect()
    }

    /// Element (i, j) of H at field coefficients (f₁, f₂).
    pub fn element(&self, i: usize, j: usize, f1: f64, f2: f64) -> f64 {
        let d = if i == j { self.diagonal[i] } else { 0.0 };
        d + f1 * self.linear.get(i, j) + f2 * self.quadratic.get(i, j)
    }

    /// Conserved quadratic form Σ g_i |c_i|² (norm, or Feshbach-Villars charge).
    pub fn charge(&self, state: &[C64]) -> f64 {
        state.iter().zip(&self.metric).map(|(c, g)| g * c.norm_sqr()).sum()
    }
}
