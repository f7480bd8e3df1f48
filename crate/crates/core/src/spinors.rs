//! Free-particle Dirac eigenspinors with spin quantized along the electric
//! field (ê_x), Dirac matrices in the standard representation, and the
//! α_x coupling elements between neighbouring momentum modes.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix4 = [[C64; 4]; 4];
pub type Matrix2 = [[C64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnergySign {
    Positive,
    Negative,
}

impl EnergySign {
    pub fn value(self) -> f64 {
        match self {
            EnergySign::Positive => 1.0,
            EnergySign::Negative => -1.0,
        }
    }
}

/// Spin projection along the electric-field axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn value(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }

    /// Eigenvector of σ_x with eigenvalue ±1, first component positive.
    pub fn pauli_eigenvector(self) -> [C64; 2] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        [C64::new(s, 0.0), C64::new(self.value() * s, 0.0)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinLabel {
    pub energy: EnergySign,
    pub spin: Spin,
}

impl SpinLabel {
    pub const PLUS_UP: SpinLabel = SpinLabel { energy: EnergySign::Positive, spin: Spin::Up };
    pub const PLUS_DOWN: SpinLabel = SpinLabel { energy: EnergySign::Positive, spin: Spin::Down };
    pub const MINUS_UP: SpinLabel = SpinLabel { energy: EnergySign::Negative, spin: Spin::Up };
    pub const MINUS_DOWN: SpinLabel = SpinLabel { energy: EnergySign::Negative, spin: Spin::Down };

    /// Fixed ordering used by every Dirac state vector: +↑, +↓, −↑, −↓.
    pub const ALL: [SpinLabel; 4] =
        [SpinLabel::PLUS_UP, SpinLabel::PLUS_DOWN, SpinLabel::MINUS_UP, SpinLabel::MINUS_DOWN];

    pub fn index(self) -> usize {
        match (self.energy, self.spin) {
            (EnergySign::Positive, Spin::Up) => 0,
            (EnergySign::Positive, Spin::Down) => 1,
            (EnergySign::Negative, Spin::Up) => 2,
            (EnergySign::Negative, Spin::Down) => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match (self.energy, self.spin) {
            (EnergySign::Positive, Spin::Up) => "+up",
            (EnergySign::Positive, Spin::Down) => "+down",
            (EnergySign::Negative, Spin::Up) => "-up",
            (EnergySign::Negative, Spin::Down) => "-down",
        }
    }
}

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn pauli(axis: usize) -> Matrix2 {
    match axis {
        0 => [[ZERO, ONE], [ONE, ZERO]],
        1 => [[ZERO, -I], [I, ZERO]],
        2 => [[ONE, ZERO], [ZERO, -ONE]],
        _ => panic!("Pauli axis out of range: {axis}"),
    }
}

/// Dirac α_i in the standard representation: off-diagonal blocks σ_i.
pub fn alpha(axis: usize) -> Matrix4 {
    let s = pauli(axis);
    let mut m = [[ZERO; 4]; 4];
    for r in 0..2 {
        for col in 0..2 {
            m[r][col + 2] = s[r][col];
            m[r + 2][col] = s[r][col];
        }
    }
    m
}

/// β = diag(1, 1, −1, −1).
pub fn beta() -> Matrix4 {
    let mut m = [[ZERO; 4]; 4];
    m[0][0] = ONE;
    m[1][1] = ONE;
    m[2][2] = -ONE;
    m[3][3] = -ONE;
    m
}

/// Free Dirac Hamiltonian α·q + β (units mc² with c = 1).
pub fn dirac_hamiltonian(q: [f64; 3]) -> Matrix4 {
    let mut h = beta();
    for (axis, &qi) in q.iter().enumerate() {
        let a = alpha(axis);
        for r in 0..4 {
            for col in 0..4 {
                h[r][col] += a[r][col] * qi;
            }
        }
    }
    h
}

fn sigma_dot(q: [f64; 3]) -> Matrix2 {
    let mut m = [[ZERO; 2]; 2];
    for (axis, &qi) in q.iter().enumerate() {
        let s = pauli(axis);
        for r in 0..2 {
            for col in 0..2 {
                m[r][col] += s[r][col] * qi;
            }
        }
    }
    m
}

fn apply2(m: &Matrix2, v: &[C64; 2]) -> [C64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourSpinor {
    pub components: [C64; 4],
    pub momentum: [f64; 3],
}

impl FourSpinor {
    pub fn inner(&self, other: &FourSpinor) -> C64 {
        self.components.iter().zip(other.components.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.components.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Normalized free eigenspinor of momentum `q`.
///
/// Positive energy: √((𝓔+1)/(2𝓔)) [χ; σ·q χ/(𝓔+1)].
/// Negative energy: √((𝓔+1)/(2𝓔)) [−σ·q χ/(𝓔+1); χ].
/// χ is the σ_x eigenvector of the label's spin, so at q = 0 the spin points
/// along ±ê_x in the rest frame.
pub fn free_spinor(q: [f64; 3], label: SpinLabel) -> FourSpinor {
    let q2: f64 = q.iter().map(|x| x * x).sum();
    let energy = (1.0 + q2).sqrt();
    let norm = ((energy + 1.0) / (2.0 * energy)).sqrt();
    let chi = label.spin.pauli_eigenvector();
    let sq = apply2(&sigma_dot(q), &chi);
    let scale = 1.0 / (energy + 1.0);
    let components = match label.energy {
        EnergySign::Positive => [chi[0], chi[1], sq[0] * scale, sq[1] * scale],
        EnergySign::Negative => [-sq[0] * scale, -sq[1] * scale, chi[0], chi[1]],
    };
    FourSpinor { components: components.map(|x| x * norm), momentum: q }
}

/// u_a† α_x u_b.
fn alpha_x_element(a: &FourSpinor, b: &FourSpinor) -> C64 {
    // α_x swaps the upper and lower bispinors and applies σ_x to each.
    let ub = &b.components;
    let ax_b = [ub[3], ub[2], ub[1], ub[0]];
    a.components.iter().zip(ax_b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Unit-field coupling ⟨u_{p+nk}^γ | α_x | u_{p+mk}^ζ⟩ for |n − m| = 1.
///
/// `p` is the initial electron momentum and `k` the photon momentum along ê_z.
pub fn coupling_element(gamma: SpinLabel, n: i32, zeta: SpinLabel, m: i32, p: [f64; 3], k: f64) -> Result<C64> {
    if (n - m).abs() != 1 {
        return Err(Error::InvalidPair { n, m });
    }
    let u = free_spinor(mode_momentum(p, k, n), gamma);
    let v = free_spinor(mode_momentum(p, k, m), zeta);
    Ok(alpha_x_element(&u, &v))
}

/// p + n k ê_z.
pub fn mode_momentum(p: [f64; 3], k: f64, n: i32) -> [f64; 3] {
    [p[0], p[1], p[2] + n as f64 * k]
}

/// Precomputed α_x elements between neighbouring modes n ∈ [−N, N−1] and
/// n + 1, for all 16 label pairs. The reverse direction is the conjugate.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingTable {
    cutoff: i32,
    /// `forward[i][γ][ζ]` = ⟨u_{n}^γ|α_x|u_{n+1}^ζ⟩ with n = i − N.
    forward: Vec<[[C64; 4]; 4]>,
}

impl CouplingTable {
    pub fn build(p: [f64; 3], k: f64, cutoff: i32) -> Result<CouplingTable> {
        if cutoff < 1 {
            return Err(Error::InvalidInput(format!("mode cutoff must be at least 1, got {cutoff}")));
        }
        let spinors: Vec<[FourSpinor; 4]> =
            (-cutoff..=cutoff).map(|n| SpinLabel::ALL.map(|l| free_spinor(mode_momentum(p, k, n), l))).collect();
        let forward = spinors
            .windows(2)
            .map(|w| {
                let mut block = [[ZERO; 4]; 4];
                for (g, ug) in w[0].iter().enumerate() {
                    for (z, uz) in w[1].iter().enumerate() {
                        block[g][z] = alpha_x_element(ug, uz);
                    }
                }
                block
            })
            .collect();
        Ok(CouplingTable { cutoff, forward })
    }

    pub fn cutoff(&self) -> i32 {
        self.cutoff
    }

    /// Number of neighbouring mode pairs, 2N.
    pub fn pair_count(&self) -> usize {
        self.forward.len()
    }

    /// ⟨u_n^γ|α_x|u_m^ζ⟩ for |n − m| = 1 inside the cutoff.
    pub fn get(&self, gamma: SpinLabel, n: i32, zeta: SpinLabel, m: i32) -> Result<C64> {
        if (n - m).abs() != 1 {
            return Err(Error::InvalidPair { n, m });
        }
        let lo = n.min(m);
        if lo < -self.cutoff || lo + 1 > self.cutoff {
            return Err(Error::InvalidInput(format!("modes {n}, {m} outside cutoff {}", self.cutoff)));
        }
        let block = &self.forward[(lo + self.cutoff) as usize];
        Ok(if n < m { block[gamma.index()][zeta.index()] } else { block[zeta.index()][gamma.index()].conj() })
    }

    /// Block for the pair (n, n+1), n = i − N.
    pub fn forward_block(&self, i: usize) -> &[[C64; 4]; 4] {
        &self.forward[i]
    }

    /// CSV dump: n, gamma, m, zeta, re, im.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
        w.write_record(["n", "gamma", "m", "zeta", "re", "im"]).map_err(io)?;
        for (i, block) in self.forward.iter().enumerate() {
            let n = i as i32 - self.cutoff;
            for g in SpinLabel::ALL {
                for z in SpinLabel::ALL {
                    let v = block[g.index()][z.index()];
                    w.write_record([
                        n.to_string(),
                        g.name().to_string(),
                        (n + 1).to_string(),
                        z.name().to_string(),
                        format!("{:e}", v.re),
                        format!("{:e}", v.im),
                    ])
                    .map_err(io)?;
                }
            }
        }
        w.flush().map_err(|e| Error::InvalidInput(format!("csv flush failed: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{momentum_from_kev, photon_momentum};
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn fig2_momentum() -> [f64; 3] {
        [momentum_from_kev(1.23), 0.0, momentum_from_kev(176.0)]
    }

    fn matvec(m: &Matrix4, v: &[C64; 4]) -> [C64; 4] {
        let mut out = [ZERO; 4];
        for r in 0..4 {
            for col in 0..4 {
                out[r] += m[r][col] * v[col];
            }
        }
        out
    }

    /// Straight 4×4 contraction through α_x, independent of `alpha_x_element`.
    fn dense_alpha_x(a: &FourSpinor, b: &FourSpinor) -> C64 {
        let ab = matvec(&alpha(0), &b.components);
        a.components.iter().zip(ab.iter()).map(|(x, y)| x.conj() * y).sum()
    }

    #[test]
    fn rest_frame_spinor() {
        let u = free_spinor([0.0; 3], SpinLabel::PLUS_UP);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((u.components[0] - c(s)).norm() < 1e-15);
        assert!((u.components[1] - c(s)).norm() < 1e-15);
        assert_eq!(u.components[2], ZERO);
        assert_eq!(u.components[3], ZERO);
    }

    #[test]
    fn eigenvector_residual_at_fig2_mode_three() {
        let k = photon_momentum(3.1).unwrap();
        let q = mode_momentum(fig2_momentum(), k, 3);
        let h = dirac_hamiltonian(q);
        let e = (1.0 + q.iter().map(|x| x * x).sum::<f64>()).sqrt();
        for label in SpinLabel::ALL {
            let u = free_spinor(q, label);
            let hu = matvec(&h, &u.components);
            let res: f64 = hu
                .iter()
                .zip(u.components.iter())
                .map(|(a, b)| (a - b * (label.energy.value() * e)).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(res < 1e-10, "{label:?}: {res:e}");
        }
    }

    #[test]
    fn rest_frame_spin_points_along_field() {
        // Σ_x = diag(σ_x, σ_x): expectation ±1 for the rest-frame spinors.
        for label in SpinLabel::ALL {
            let u = free_spinor([0.0; 3], label);
            let v = u.components;
            let sx = [v[1], v[0], v[3], v[2]];
            let expect: C64 = v.iter().zip(sx.iter()).map(|(a, b)| a.conj() * b).sum();
            assert!((expect.re - label.spin.value()).abs() < 1e-14);
        }
    }

    #[test]
    fn same_spin_elements_vanish_without_transverse_momentum() {
        let k = photon_momentum(3.1).unwrap();
        let p = [0.0, 0.0, momentum_from_kev(176.0)];
        for n in -3..3 {
            for spin in [Spin::Up, Spin::Down] {
                let l = SpinLabel { energy: EnergySign::Positive, spin };
                let same = coupling_element(l, n, l, n + 1, p, k).unwrap();
                assert!(same.norm() < 1e-12);
                let flip = SpinLabel { energy: EnergySign::Positive, spin: spin.flipped() };
                let opposite = coupling_element(l, n, flip, n + 1, p, k).unwrap();
                assert!(opposite.norm() > 1e-4);
            }
        }
        // With p_E ≠ 0 the spin-preserving channel opens.
        let same = coupling_element(SpinLabel::PLUS_UP, 0, SpinLabel::PLUS_UP, 1, fig2_momentum(), k).unwrap();
        assert!(same.norm() > 1e-4);
    }

    #[test]
    fn elements_match_dense_contraction() {
        let k = photon_momentum(3.1).unwrap();
        let p = fig2_momentum();
        for g in SpinLabel::ALL {
            for z in SpinLabel::ALL {
                let a = free_spinor(mode_momentum(p, k, 2), g);
                let b = free_spinor(mode_momentum(p, k, 3), z);
                let fast = coupling_element(g, 2, z, 3, p, k).unwrap();
                assert!((fast - dense_alpha_x(&a, &b)).norm() < 1e-12);
                assert!(fast.norm() <= 1.0 + 1e-12);
            }
        }
        let flip = coupling_element(SpinLabel::PLUS_UP, 0, SpinLabel::PLUS_DOWN, 1, p, k).unwrap();
        assert!(flip.norm() > 1e-4);
    }

    #[test]
    fn invalid_pair() {
        assert!(matches!(
            coupling_element(SpinLabel::PLUS_UP, 0, SpinLabel::PLUS_UP, 2, [0.0; 3], 0.01),
            Err(Error::InvalidPair { n: 0, m: 2 })
        ));
        assert!(coupling_element(SpinLabel::PLUS_UP, 0, SpinLabel::PLUS_UP, 0, [0.0; 3], 0.01).is_err());
    }

    #[test]
    fn table_counts_and_agrees_with_elements() {
        let k = photon_momentum(3.1).unwrap();
        let p = fig2_momentum();
        let t1 = CouplingTable::build(p, k, 1).unwrap();
        assert_eq!(t1.pair_count(), 2);
        assert_eq!(t1.pair_count() * 16, 32);
        let t = CouplingTable::build(p, k, 4).unwrap();
        for n in -4..4 {
            for g in SpinLabel::ALL {
                for z in SpinLabel::ALL {
                    let direct = coupling_element(g, n, z, n + 1, p, k).unwrap();
                    assert_eq!(t.get(g, n, z, n + 1).unwrap(), direct);
                    let back = t.get(z, n + 1, g, n).unwrap();
                    assert!((back - direct.conj()).norm() < 1e-15);
                }
            }
        }
        assert!(CouplingTable::build(p, k, 0).is_err());
    }

    /// Negating p_E: spin-preserving positive-energy elements change sign,
    /// spin-flipping ones are unchanged (characterization of the phase
    /// convention, recomputed directly).
    #[test]
    fn transverse_reflection_pattern() {
        let k = photon_momentum(3.1).unwrap();
        let p = fig2_momentum();
        let q = [-p[0], p[1], p[2]];
        let a = CouplingTable::build(p, k, 3).unwrap();
        let b = CouplingTable::build(q, k, 3).unwrap();
        for n in -3..3 {
            for g in SpinLabel::ALL {
                for z in SpinLabel::ALL {
                    let x = a.get(g, n, z, n + 1).unwrap();
                    let y = b.get(g, n, z, n + 1).unwrap();
                    let expected = coupling_element(g, n, z, n + 1, q, k).unwrap();
                    assert!((y - expected).norm() < 1e-15);
                    let same_spin = g.spin == z.spin;
                    let sign = if same_spin == (g.energy == z.energy) { -1.0 } else { 1.0 };
                    // α_x elements are real here (p_y = 0), so only signs can change.
                    assert!(x.im.abs() < 1e-15 && y.im.abs() < 1e-15);
                    if same_spin && g.energy == z.energy {
                        assert!((y - x * sign).norm() < 1e-14, "{g:?} {z:?}: {x} vs {y}");
                    }
                }
            }
        }
    }

    #[test]
    fn continuity_over_transverse_grid() {
        let k = photon_momentum(3.1).unwrap();
        let p_k = momentum_from_kev(176.0);
        let step = 1e-7;
        let mut prev: Option<Vec<C64>> = None;
        for i in 0..400 {
            let p = [-2e-5 + i as f64 * step, 0.0, p_k];
            let vals: Vec<C64> = SpinLabel::ALL
                .iter()
                .flat_map(|&g| SpinLabel::ALL.iter().map(move |&z| (g, z)))
                .map(|(g, z)| coupling_element(g, 0, z, 1, p, k).unwrap())
                .collect();
            if let Some(prev) = &prev {
                for (a, b) in prev.iter().zip(vals.iter()) {
                    assert!((a - b).norm() < 1e-6);
                }
            }
            prev = Some(vals);
        }
    }

    proptest! {
        #[test]
        fn orthonormal_and_complete(qx in -1.0f64..1.0, qy in -1.0f64..1.0, qz in -1.0f64..1.0) {
            let q = [qx, qy, qz];
            let basis = SpinLabel::ALL.map(|l| free_spinor(q, l));
            for (i, a) in basis.iter().enumerate() {
                for (j, b) in basis.iter().enumerate() {
                    let g = a.inner(b);
                    let expect = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((g - c(expect)).norm() < 1e-12);
                }
            }
            for r in 0..4 {
                for col in 0..4 {
                    let sum: C64 = basis.iter().map(|u| u.components[r] * u.components[col].conj()).sum();
                    let expect = if r == col { 1.0 } else { 0.0 };
                    prop_assert!((sum - c(expect)).norm() < 1e-12);
                }
            }
        }

        #[test]
        fn coupling_is_hermitian(qx in -0.5f64..0.5, qz in -0.5f64..0.5, k in 1e-3f64..0.1) {
            let p = [qx, 0.0, qz];
            for g in SpinLabel::ALL {
                for z in SpinLabel::ALL {
                    let a = coupling_element(g, 0, z, 1, p, k).unwrap();
                    let b = coupling_element(z, 1, g, 0, p, k).unwrap();
                    prop_assert!((a - b.conj()).norm() < 1e-14);
                    prop_assert!(a.norm() <= 1.0 + 1e-12);
                }
            }
        }
    }
}
