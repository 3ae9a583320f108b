//! Exact diagonalization of the two-orbital dimer.
//!
//! The Fock space has four spin orbitals, stored as occupation bitmasks with
//! mode order `p↑, d↑, p↓, d↓`. Fermionic signs follow that order.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DimerParams, Orbital, Sector};

pub const N_MODES: usize = 4;
pub const FOCK_DIM: usize = 1 << N_MODES;

const P_UP: usize = 0;
const D_UP: usize = 1;
const P_DN: usize = 2;
const D_DN: usize = 3;

/// Channels whose normalizing occupancy is closer than this to 0 (or 1) are zeroed.
const OCCUPANCY_EPS: f64 = 1e-14;

pub type FockVec = [f64; FOCK_DIM];

fn up_mode(orbital: Orbital) -> usize {
    match orbital {
        Orbital::P => P_UP,
        Orbital::D => D_UP,
    }
}

fn parity_below(state: usize, mode: usize) -> f64 {
    if (state & ((1 << mode) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn create(mode: usize, v: &FockVec) -> FockVec {
    let mut out = [0.0; FOCK_DIM];
    for (s, &a) in v.iter().enumerate() {
        if a != 0.0 && s & (1 << mode) == 0 {
            out[s | (1 << mode)] += parity_below(s, mode) * a;
        }
    }
    out
}

pub fn annihilate(mode: usize, v: &FockVec) -> FockVec {
    let mut out = [0.0; FOCK_DIM];
    for (s, &a) in v.iter().enumerate() {
        if a != 0.0 && s & (1 << mode) != 0 {
            out[s & !(1 << mode)] += parity_below(s, mode) * a;
        }
    }
    out
}

fn dot(a: &FockVec, b: &FockVec) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `a†_{m0} a†_{m1} ... |vac>`, rightmost operator applied first.
pub fn creation_string(modes: &[usize]) -> FockVec {
    let mut v = [0.0; FOCK_DIM];
    v[0] = 1.0;
    for &m in modes.iter().rev() {
        v = create(m, &v);
    }
    v
}

/// Basis of the two-electron `S_z = 0` sector:
/// `p↑p↓, d↑p↓, p↑d↓, d↑d↓`.
pub fn ground_basis() -> [FockVec; 4] {
    [
        creation_string(&[P_UP, P_DN]),
        creation_string(&[D_UP, P_DN]),
        creation_string(&[P_UP, D_DN]),
        creation_string(&[D_UP, D_DN]),
    ]
}

/// Two-state basis mapped to qubit `|0>`, `|1>` for each excitation sector.
pub fn sector_basis(sector: Sector) -> [FockVec; 2] {
    match sector {
        Sector::Electron => [creation_string(&[P_UP, D_UP, P_DN]), creation_string(&[P_UP, D_UP, D_DN])],
        Sector::Hole => [creation_string(&[P_DN]), creation_string(&[D_DN])],
    }
}

/// Full 16x16 dimer Hamiltonian.
pub fn fock_hamiltonian(d: &DimerParams) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(FOCK_DIM, FOCK_DIM);
    for col in 0..FOCK_DIM {
        let mut e = [0.0; FOCK_DIM];
        e[col] = 1.0;
        let hv = apply_hamiltonian(d, &e);
        for (row, v) in hv.iter().enumerate() {
            h[(row, col)] = *v;
        }
    }
    h
}

pub fn apply_hamiltonian(d: &DimerParams, v: &FockVec) -> FockVec {
    let mut out = [0.0; FOCK_DIM];
    let mut acc = |w: FockVec, c: f64| {
        for (o, x) in out.iter_mut().zip(w) {
            *o += c * x;
        }
    };
    let number = |m: usize, v: &FockVec| create(m, &annihilate(m, v));
    for (p, dd) in [(P_UP, D_UP), (P_DN, D_DN)] {
        acc(number(p, v), d.eps_p - d.delta_mu);
        acc(number(dd, v), d.eps_d - d.delta_mu);
        acc(create(dd, &annihilate(p, v)), d.t_pd);
        acc(create(p, &annihilate(dd, v)), d.t_pd);
    }
    acc(number(P_UP, &number(P_DN, v)), d.u_p);
    acc(number(D_UP, &number(D_DN, v)), d.u_d);
    out
}

/// Particle number and twice the spin projection of a basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSector {
    pub n_electrons: u32,
    pub twice_sz: i32,
}

impl FockSector {
    fn of(state: usize) -> Self {
        let up = (state & 0b0011).count_ones() as i32;
        let dn = (state & 0b1100).count_ones() as i32;
        FockSector { n_electrons: (up + dn) as u32, twice_sz: up - dn }
    }
}

/// Lowest eigenpair of every `(n_e, S_z)` block.
pub fn sector_minima(d: &DimerParams) -> Vec<(FockSector, f64, FockVec)> {
    let h = fock_hamiltonian(d);
    let mut sectors: Vec<(FockSector, Vec<usize>)> = Vec::new();
    for s in 0..FOCK_DIM {
        let key = FockSector::of(s);
        match sectors.iter_mut().find(|(k, _)| *k == key) {
            Some((_, states)) => states.push(s),
            None => sectors.push((key, vec![s])),
        }
    }
    sectors
        .into_iter()
        .map(|(key, states)| {
            let n = states.len();
            let block = DMatrix::from_fn(n, n, |i, j| h[(states[i], states[j])]);
            let eig = SymmetricEigen::new(block);
            let k = (0..n).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
            let mut v = [0.0; FOCK_DIM];
            for (i, &s) in states.iter().enumerate() {
                v[s] = eig.eigenvectors[(i, k)];
            }
            (key, eig.eigenvalues[k], v)
        })
        .collect()
}

/// Lowest state of the two-electron, `S_z = 0` sector, plus the global minimum for comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundState {
    pub energy: f64,
    /// Over `p↑p↓, d↑p↓, p↑d↓, d↑d↓`; the largest-magnitude entry is positive.
    pub amplitudes: [f64; 4],
    pub lowest_sector: FockSector,
    pub lowest_energy: f64,
}

impl GroundState {
    /// Builds a state from raw amplitudes; normalizes and fixes the sign.
    pub fn from_amplitudes(energy: f64, amplitudes: [f64; 4]) -> Self {
        let mut a = amplitudes;
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        a.iter_mut().for_each(|x| *x /= norm);
        fix_sign(&mut a);
        GroundState {
            energy,
            amplitudes: a,
            lowest_sector: FockSector { n_electrons: 2, twice_sz: 0 },
            lowest_energy: energy,
        }
    }

    /// True when no other `(n_e, S_z)` sector has a lower energy.
    pub fn in_two_electron_sector(&self) -> bool {
        self.lowest_sector == (FockSector { n_electrons: 2, twice_sz: 0 })
    }

    pub fn fock(&self) -> FockVec {
        let mut v = [0.0; FOCK_DIM];
        for (b, a) in ground_basis().iter().zip(self.amplitudes) {
            for (o, x) in v.iter_mut().zip(b) {
                *o += a * x;
            }
        }
        v
    }
}

fn fix_sign(a: &mut [f64]) {
    let k = (0..a.len()).max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs())).unwrap_or(0);
    if a[k] < 0.0 {
        a.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn ground_state(d: &DimerParams) -> GroundState {
    let minima = sector_minima(d);
    let target = FockSector { n_electrons: 2, twice_sz: 0 };
    let (_, energy, v) = minima.iter().find(|(k, _, _)| *k == target).copied().unwrap();
    let (lowest_sector, lowest_energy, _) =
        minima.iter().min_by(|a, b| a.1.total_cmp(&b.1)).copied().unwrap();
    let basis = ground_basis();
    let mut amplitudes = [0.0; 4];
    for (a, b) in amplitudes.iter_mut().zip(&basis) {
        *a = dot(b, &v);
    }
    fix_sign(&mut amplitudes);
    // a tie with the target sector (within rounding) still counts as the target
    let lowest_sector = if lowest_energy >= energy - 1e-12 { target } else { lowest_sector };
    GroundState { energy, amplitudes, lowest_sector, lowest_energy: lowest_energy.min(energy) }
}

/// Spin-up one-electron density matrix, `gamma[k'][k] = <a†_{k'↑} a_{k↑}>`, index 0 = p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    pub gamma: [[f64; 2]; 2],
}

impl DensityMatrix {
    pub fn trace(&self) -> f64 {
        self.gamma[0][0] + self.gamma[1][1]
    }

    pub fn diag(&self, orbital: Orbital) -> f64 {
        self.gamma[orbital.index()][orbital.index()]
    }
}

pub fn density_matrix(gs: &GroundState) -> DensityMatrix {
    let v = gs.fock();
    let modes = [P_UP, D_UP];
    let mut gamma = [[0.0; 2]; 2];
    for (kp, &mp) in modes.iter().enumerate() {
        for (k, &m) in modes.iter().enumerate() {
            gamma[kp][k] = dot(&v, &create(mp, &annihilate(m, &v)));
        }
    }
    DensityMatrix { gamma }
}

/// Ascending eigenpairs of a real symmetric 2x2 matrix; each eigenvector has its
/// first nonzero component positive. Degenerate input returns the coordinate axes.
pub fn symmetric_eigen2(m: [[f64; 2]; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
    let (a, b, d) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let r = half.hypot(b);
    let values = [mean - r, mean + r];
    if b == 0.0 {
        return if a <= d { ([a, d], [[1.0, 0.0], [0.0, 1.0]]) } else { ([d, a], [[0.0, 1.0], [1.0, 0.0]]) };
    }
    let vec_for = |lam: f64| {
        // pick the better-conditioned of the two row equations
        let (x, y) = if (lam - d).abs() > (lam - a).abs() { (lam - d, b) } else { (b, lam - a) };
        let n = x.hypot(y);
        let (mut x, mut y) = (x / n, y / n);
        if x < 0.0 || (x == 0.0 && y < 0.0) {
            x = -x;
            y = -y;
        }
        [x, y]
    };
    (values, [vec_for(values[0]), vec_for(values[1])])
}

/// Natural orbitals: `vectors[nu]` with occupancy `occupancies[nu]`, ascending.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoBasis {
    pub occupancies: [f64; 2],
    pub vectors: [[f64; 2]; 2],
}

pub fn natural_orbitals(gamma: &DensityMatrix) -> NoBasis {
    let (occupancies, vectors) = symmetric_eigen2(gamma.gamma);
    NoBasis { occupancies, vectors }
}

/// Excited state `a†_{κ↑}|gs>` or `a_{κ↑}|gs>` as a Fock vector.
pub fn excite(gs: &GroundState, sector: Sector, orbital: Orbital) -> FockVec {
    let v = gs.fock();
    match sector {
        Sector::Electron => create(up_mode(orbital), &v),
        Sector::Hole => annihilate(up_mode(orbital), &v),
    }
}

/// Coordinates of the excited state in the two-state qubit basis.
pub fn excited_components(gs: &GroundState, sector: Sector, orbital: Orbital) -> [f64; 2] {
    let ex = excite(gs, sector, orbital);
    let basis = sector_basis(sector);
    [dot(&basis[0], &ex), dot(&basis[1], &ex)]
}

/// `R_y(2 angle)|0>` prepares the normalized excited state up to a global sign.
pub fn prep_angle(gs: &GroundState, sector: Sector, orbital: Orbital) -> Result<f64> {
    let [mut c0, mut c1] = excited_components(gs, sector, orbital);
    let n = c0.hypot(c1);
    if n < 1e-14 {
        return Err(Error::ZeroNorm(format!("{sector}, {orbital}")));
    }
    if c0 < 0.0 || (c0 == 0.0 && c1 < 0.0) {
        c0 = -c0;
        c1 = -c1;
    }
    Ok(c1.atan2(c0))
}

/// Preparation angles for the two electron excitations; the hole excitations
/// reuse them with p and d swapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepAngles {
    pub eta: f64,
    pub zeta: f64,
}

pub fn excitation_prep_angles(gs: &GroundState) -> Result<PrepAngles> {
    Ok(PrepAngles {
        eta: prep_angle(gs, Sector::Electron, Orbital::P)?,
        zeta: prep_angle(gs, Sector::Electron, Orbital::D)?,
    })
}

/// Exact excitation data of one sector; indices are `[orbital][lambda]`,
/// `[nu][lambda]` or `[orbital][nu][nu']` as named.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationTable {
    pub sector: Sector,
    /// Sector eigenvalues `E_lambda`, ascending.
    pub energies: [f64; 2],
    /// `eigenvectors[lambda]` in the qubit basis.
    pub eigenvectors: [[f64; 2]; 2],
    /// `||a†_κ|gs>||^2` (electron) or `||a_κ|gs>||^2` (hole).
    pub norms: [f64; 2],
    /// Transition amplitudes `b[κ][λ]`.
    pub amplitudes: [[f64; 2]; 2],
    /// `P_λ` for each orbital, rows sum to one.
    pub probabilities: [[f64; 2]; 2],
    /// Natural-orbital transition amplitudes `b̃[ν][λ]`.
    pub no_amplitudes: [[f64; 2]; 2],
    /// `d[κ][ν]`.
    pub d_coefficients: [[f64; 2]; 2],
    /// `S[κ][ν][ν']`.
    pub s_matrix: [[[f64; 2]; 2]; 2],
    /// Mixing angle in `[0, π)` whose rotation reproduces `no_amplitudes`.
    pub oracle_theta: f64,
}

impl ExcitationTable {
    pub fn probability(&self, orbital: Orbital, lambda: usize) -> f64 {
        self.probabilities[orbital.index()][lambda]
    }

    pub fn norm(&self, orbital: Orbital) -> f64 {
        self.norms[orbital.index()]
    }
}

/// Orbital-to-NO coefficients `d[κ][ν]` for a sector.
pub fn d_coefficients(no: &NoBasis, sector: Sector) -> [[f64; 2]; 2] {
    let mut d = [[0.0; 2]; 2];
    for nu in 0..2 {
        let n = no.occupancies[nu].clamp(0.0, 1.0);
        let w = match sector {
            Sector::Electron => (1.0 - n).sqrt(),
            Sector::Hole => n.sqrt(),
        };
        for k in 0..2 {
            d[k][nu] = no.vectors[nu][k] * w;
        }
    }
    d
}

/// `S[κ][ν][ν'] = d[κ][ν] d[κ][ν'] / norm_κ` with `norm_κ = 1 - γ_κκ` or `γ_κκ`.
pub fn s_matrix(no: &NoBasis, gamma: &DensityMatrix, sector: Sector) -> [[[f64; 2]; 2]; 2] {
    let d = d_coefficients(no, sector);
    let mut s = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        let g = gamma.gamma[k][k];
        let norm = match sector {
            Sector::Electron => 1.0 - g,
            Sector::Hole => g,
        };
        if norm.abs() < OCCUPANCY_EPS {
            continue;
        }
        for nu in 0..2 {
            for nup in 0..2 {
                s[k][nu][nup] = d[k][nu] * d[k][nup] / norm;
            }
        }
    }
    s
}

pub fn excitation_table(gs: &GroundState, d: &DimerParams, sector: Sector) -> ExcitationTable {
    let (energies, mut eigenvectors) = symmetric_eigen2(d.block(sector));
    let gamma = density_matrix(gs);
    let no = natural_orbitals(&gamma);
    let basis = sector_basis(sector);
    let excited = [excite(gs, sector, Orbital::P), excite(gs, sector, Orbital::D)];

    let compute = |eigenvectors: &[[f64; 2]; 2]| {
        let mut b = [[0.0; 2]; 2];
        for k in 0..2 {
            for lam in 0..2 {
                let c = [dot(&basis[0], &excited[k]), dot(&basis[1], &excited[k])];
                b[k][lam] = eigenvectors[lam][0] * c[0] + eigenvectors[lam][1] * c[1];
            }
        }
        let mut bt = [[0.0; 2]; 2];
        for nu in 0..2 {
            let n = no.occupancies[nu];
            let denom = match sector {
                Sector::Electron => 1.0 - n,
                Sector::Hole => n,
            };
            if denom.abs() < OCCUPANCY_EPS {
                continue;
            }
            for lam in 0..2 {
                bt[nu][lam] = (no.vectors[nu][0] * b[0][lam] + no.vectors[nu][1] * b[1][lam]) / denom.sqrt();
            }
        }
        (b, bt)
    };

    let (mut amplitudes, mut no_amplitudes) = compute(&eigenvectors);
    let det = no_amplitudes[0][0] * no_amplitudes[1][1] - no_amplitudes[0][1] * no_amplitudes[1][0];
    if det < 0.0 {
        eigenvectors[1] = [-eigenvectors[1][0], -eigenvectors[1][1]];
        (amplitudes, no_amplitudes) = compute(&eigenvectors);
    }

    let mut norms = [0.0; 2];
    let mut probabilities = [[0.0; 2]; 2];
    for k in 0..2 {
        norms[k] = dot(&excited[k], &excited[k]);
        if norms[k] > OCCUPANCY_EPS {
            for lam in 0..2 {
                probabilities[k][lam] = amplitudes[k][lam].powi(2) / norms[k];
            }
        }
    }
    let oracle_theta = no_amplitudes[0][1].atan2(no_amplitudes[0][0]).rem_euclid(PI);

    ExcitationTable {
        sector,
        energies,
        eigenvectors,
        norms,
        amplitudes,
        probabilities,
        no_amplitudes,
        d_coefficients: d_coefficients(&no, sector),
        s_matrix: s_matrix(&no, &gamma, sector),
        oracle_theta,
    }
}

/// Everything derived from one exact diagonalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FciReport {
    pub params: DimerParams,
    pub ground_state: GroundState,
    pub density_matrix: DensityMatrix,
    pub natural_orbitals: NoBasis,
    pub prep_angles: Option<PrepAngles>,
    pub electron: ExcitationTable,
    pub hole: ExcitationTable,
}

impl FciReport {
    pub fn new(d: &DimerParams) -> Self {
        let gs = ground_state(d);
        let gamma = density_matrix(&gs);
        FciReport {
            params: *d,
            natural_orbitals: natural_orbitals(&gamma),
            density_matrix: gamma,
            prep_angles: excitation_prep_angles(&gs).ok(),
            electron: excitation_table(&gs, d, Sector::Electron),
            hole: excitation_table(&gs, d, Sector::Hole),
            ground_state: gs,
        }
    }

    pub fn table(&self, sector: Sector) -> &ExcitationTable {
        match sector {
            Sector::Electron => &self.electron,
            Sector::Hole => &self.hole,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn reference() -> (DimerParams, GroundState) {
        let d = DimerParams::reference(1.5);
        let gs = ground_state(&d);
        (d, gs)
    }

    #[test]
    fn reference_ground_state() {
        let (_, gs) = reference();
        assert!(gs.in_two_electron_sector());
        assert_abs_diff_eq!(gs.energy, -1.76303, epsilon = 1e-5);
        let want = [0.09776, 0.69307, 0.69307, 0.17249];
        for (a, w) in gs.amplitudes.iter().zip(want) {
            assert_abs_diff_eq!(*a, w, epsilon = 1e-5);
        }
    }

    #[test]
    fn ground_state_is_variational_minimum() {
        let (d, gs) = reference();
        for (_, e, _) in sector_minima(&d) {
            assert!(e >= gs.energy - 1e-12);
        }
    }

    #[test]
    fn qubit_blocks_match_fock_projection() {
        let d = DimerParams::reference(0.7);
        for sector in Sector::ALL {
            let basis = sector_basis(sector);
            let block = d.block(sector);
            for i in 0..2 {
                let hb = apply_hamiltonian(&d, &basis[i]);
                for j in 0..2 {
                    assert_abs_diff_eq!(dot(&basis[j], &hb), block[j][i], epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn decoupled_orbitals_give_single_determinant() {
        let d = DimerParams { eps_p: -1.0, eps_d: -0.5, t_pd: 0.0, u_p: 0.0, u_d: 0.0, delta_mu: 0.0 };
        let gs = ground_state(&d);
        let big = gs.amplitudes.iter().filter(|a| a.abs() > 1e-12).count();
        assert_eq!(big, 1);
        assert_abs_diff_eq!(gs.amplitudes[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_shift_may_leave_two_electron_sector() {
        let gs = ground_state(&DimerParams::reference(0.0));
        // with no shift the neutral dimer is not the global minimum; the flag reports it
        assert!(!gs.in_two_electron_sector());
        assert!(gs.lowest_energy < gs.energy);
    }

    #[test]
    fn reference_density_matrix() {
        let (_, gs) = reference();
        let g = density_matrix(&gs);
        let want = [[0.48990, 0.18730], [0.18730, 0.51010]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(g.gamma[i][j], want[i][j], epsilon = 1e-5);
            }
        }
        assert_abs_diff_eq!(g.trace(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_determinant_density_matrix() {
        let gs = GroundState::from_amplitudes(0.0, [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(density_matrix(&gs).gamma, [[1.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn natural_orbitals_against_characteristic_polynomial() {
        let (_, gs) = reference();
        let g = density_matrix(&gs);
        let no = natural_orbitals(&g);
        let [[a, b], [_, d]] = g.gamma;
        // roots of x^2 - (a+d) x + (ad - b^2)
        let tr = a + d;
        let det = a * d - b * b;
        let disc = (tr * tr - 4.0 * det).sqrt();
        assert_abs_diff_eq!(no.occupancies[0], 0.5 * (tr - disc), epsilon = 1e-14);
        assert_abs_diff_eq!(no.occupancies[1], 0.5 * (tr + disc), epsilon = 1e-14);
        for nu in 0..2 {
            let c = no.vectors[nu];
            let gc = [a * c[0] + b * c[1], b * c[0] + d * c[1]];
            assert_abs_diff_eq!(gc[0], no.occupancies[nu] * c[0], epsilon = 1e-14);
            assert_abs_diff_eq!(gc[1], no.occupancies[nu] * c[1], epsilon = 1e-14);
        }
        let overlap = no.vectors[0][0] * no.vectors[1][0] + no.vectors[0][1] * no.vectors[1][1];
        assert!(overlap.abs() < 1e-15);
    }

    #[test]
    fn diagonal_gamma_gives_axes() {
        let no = natural_orbitals(&DensityMatrix { gamma: [[0.7, 0.0], [0.0, 0.2]] });
        assert_eq!(no.occupancies, [0.2, 0.7]);
        assert_eq!(no.vectors, [[0.0, 1.0], [1.0, 0.0]]);
        let no = natural_orbitals(&DensityMatrix { gamma: [[0.5, 0.0], [0.0, 0.5]] });
        assert_eq!(no.vectors, [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn reference_prep_angles() {
        let (_, gs) = reference();
        let a = excitation_prep_angles(&gs).unwrap();
        assert_abs_diff_eq!(a.eta, 0.24392, epsilon = 1e-4);
        assert_abs_diff_eq!(a.zeta, 1.43067, epsilon = 1e-4);
        // hole preparations swap the two angles
        assert_abs_diff_eq!(prep_angle(&gs, Sector::Hole, Orbital::P).unwrap(), a.zeta, epsilon = 1e-12);
        assert_abs_diff_eq!(prep_angle(&gs, Sector::Hole, Orbital::D).unwrap(), a.eta, epsilon = 1e-12);
    }

    #[test]
    fn basis_state_preparation_has_zero_angle() {
        // |gs> = d↑p↓: a†_{p↑}|gs> is exactly qubit |0>
        let gs = GroundState::from_amplitudes(0.0, [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(prep_angle(&gs, Sector::Electron, Orbital::P).unwrap(), 0.0);
    }

    #[test]
    fn zero_norm_excitation_is_an_error() {
        let gs = GroundState::from_amplitudes(0.0, [1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(prep_angle(&gs, Sector::Electron, Orbital::P), Err(Error::ZeroNorm(_))));
        assert!(excitation_prep_angles(&gs).is_err());
    }

    #[test]
    fn excitation_tables_satisfy_sum_rules() {
        let (d, gs) = reference();
        let g = density_matrix(&gs);
        for sector in Sector::ALL {
            let t = excitation_table(&gs, &d, sector);
            for k in 0..2 {
                assert_abs_diff_eq!(t.probabilities[k][0] + t.probabilities[k][1], 1.0, epsilon = 1e-12);
            }
            for k in 0..2 {
                for kp in 0..2 {
                    let lhs: f64 = (0..2).map(|l| t.amplitudes[k][l] * t.amplitudes[kp][l]).sum();
                    let rhs = match sector {
                        Sector::Electron => f64::from(u8::from(k == kp)) - g.gamma[kp][k],
                        Sector::Hole => g.gamma[kp][k],
                    };
                    assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
                }
            }
            for nu in 0..2 {
                for nup in 0..2 {
                    let o: f64 = (0..2).map(|l| t.no_amplitudes[nu][l] * t.no_amplitudes[nup][l]).sum();
                    assert_abs_diff_eq!(o, f64::from(u8::from(nu == nup)), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn hole_table_energies() {
        let (d, gs) = reference();
        let t = excitation_table(&gs, &d, Sector::Hole);
        assert_abs_diff_eq!(t.energies[0], -1.2573, epsilon = 1e-3);
        assert_abs_diff_eq!(t.energies[1], -0.4297, epsilon = 1e-3);
    }

    #[test]
    fn oracle_theta_reproduces_no_amplitudes() {
        let (d, gs) = reference();
        for sector in Sector::ALL {
            let t = excitation_table(&gs, &d, sector);
            let (s, c) = t.oracle_theta.sin_cos();
            let rot = [[c, s], [-s, c]];
            let sign = if (t.no_amplitudes[0][0] - c).abs() < 1e-9 { 1.0 } else { -1.0 };
            for nu in 0..2 {
                for lam in 0..2 {
                    assert_abs_diff_eq!(t.no_amplitudes[nu][lam], sign * rot[nu][lam], epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn s_matrix_diagonal_sums_to_one() {
        let (d, gs) = reference();
        for sector in Sector::ALL {
            let t = excitation_table(&gs, &d, sector);
            for k in 0..2 {
                assert_abs_diff_eq!(t.s_matrix[k][0][0] + t.s_matrix[k][1][1], 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn fermionic_anticommutation() {
        for m in 0..N_MODES {
            for n in 0..N_MODES {
                for s in 0..FOCK_DIM {
                    let mut e = [0.0; FOCK_DIM];
                    e[s] = 1.0;
                    let x = create(n, &annihilate(m, &e));
                    let y = annihilate(m, &create(n, &e));
                    for i in 0..FOCK_DIM {
                        let want = if m == n && i == s { 1.0 } else { 0.0 };
                        assert_eq!(x[i] + y[i], want);
                    }
                }
            }
        }
    }
}
