//! QPE sampling circuits: the three-ancilla textbook form, the single-ancilla
//! iterative form and (via [`crate::steane`]) the encoded logical form.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::model::QubitHamiltonian;
use crate::simulator::{Circuit, Condition, Gate};
use crate::steane;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QpeSettings {
    /// Ancilla bits; the grid has `2^n_qft` points.
    pub n_qft: u32,
    /// Inverse energy scale (1/eV); grid spacing is `1/t0`.
    pub t0: f64,
    /// Base energy origin (eV).
    pub e_o: f64,
    /// Number of vernier shifts.
    pub n_settings: usize,
    /// Active shift index.
    pub shift: usize,
}

impl Default for QpeSettings {
    fn default() -> Self {
        QpeSettings { n_qft: 3, t0: 5.0, e_o: -0.8, n_settings: 4, shift: 0 }
    }
}

impl QpeSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_qft == 0 || self.n_qft > 12 {
            return input(format!("n_qft must be in 1..=12, got {}", self.n_qft));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return input(format!("t0 must be positive, got {}", self.t0));
        }
        if self.n_settings == 0 || self.shift >= self.n_settings {
            return input(format!("shift {} outside 0..{}", self.shift, self.n_settings));
        }
        Ok(())
    }

    pub fn n_val(&self) -> usize {
        1 << self.n_qft
    }

    pub fn with_shift(&self, shift: usize) -> Self {
        QpeSettings { shift, ..*self }
    }

    pub fn e_orig(&self) -> f64 {
        self.e_orig_at(self.shift)
    }

    pub fn e_orig_at(&self, shift: usize) -> f64 {
        self.e_o + shift as f64 / (self.n_settings as f64 * self.t0)
    }

    /// Width of the unambiguous energy window, `N_val / t0`.
    pub fn period(&self) -> f64 {
        self.n_val() as f64 / self.t0
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.t0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum RteMode {
    #[default]
    Exact,
    /// First-order product formula with this many slices per application of `U`.
    Trotter(u32),
}

impl RteMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            RteMode::Trotter(0) => input("trotter step count must be at least 1"),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for RteMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RteMode::Exact => write!(f, "exact"),
            RteMode::Trotter(r) => write!(f, "trotter:{r}"),
        }
    }
}

impl From<RteMode> for String {
    fn from(m: RteMode) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for RteMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for RteMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "exact" {
            return Ok(RteMode::Exact);
        }
        let steps = s
            .strip_prefix("trotter:")
            .and_then(|r| r.parse::<u32>().ok())
            .ok_or_else(|| Error::Input(format!("unknown rte mode `{s}` (expected exact or trotter:<r>)")))?;
        let mode = RteMode::Trotter(steps);
        mode.validate()?;
        Ok(mode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Phys3a,
    Phys1a,
    Log1a,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Phys3a, Variant::Phys1a, Variant::Log1a];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Phys3a => "phys3a",
            Variant::Phys1a => "phys1a",
            Variant::Log1a => "log1a",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Input(format!("unknown circuit variant `{s}`")))
    }
}

/// `|1><1| ⊗ Rz(θ)` plus identity on the `|0>` control branch.
pub fn controlled_rz(ctl: usize, tgt: usize, theta: f64) -> [Gate; 2] {
    [Gate::Rz(tgt, 0.5 * theta), Gate::Rzz(ctl, tgt, -0.5 * theta)]
}

/// Gates realizing control ⊗ `U^power` with `U = exp(-i 2π (H - E_orig) t0 / N_val)`.
pub fn controlled_rte(
    h: &QubitHamiltonian,
    s: &QpeSettings,
    power: usize,
    mode: RteMode,
    ctl: usize,
    tgt: usize,
) -> Vec<Gate> {
    let alpha = 2.0 * PI * power as f64 * s.t0 / s.n_val() as f64;
    let mut gates = Vec::new();
    match mode {
        RteMode::Exact => {
            let r = h.radius();
            if r > 0.0 {
                let beta = h.hx.atan2(h.hz);
                gates.push(Gate::Ry(tgt, -beta));
                gates.extend(controlled_rz(ctl, tgt, 2.0 * alpha * r));
                gates.push(Gate::Ry(tgt, beta));
            }
        }
        RteMode::Trotter(steps) => {
            let slices = power * steps as usize;
            let delta = alpha / slices as f64;
            for _ in 0..slices {
                gates.push(Gate::H(tgt));
                gates.extend(controlled_rz(ctl, tgt, 2.0 * delta * h.hx));
                gates.push(Gate::H(tgt));
                gates.extend(controlled_rz(ctl, tgt, 2.0 * delta * h.hz));
            }
        }
    }
    gates.push(Gate::Phase(ctl, -alpha * (h.h0 - s.e_orig())));
    gates
}

/// Power of `U` applied in round `m`; the first round uses the largest power.
fn round_power(s: &QpeSettings, m: u32) -> usize {
    1 << (s.n_qft - 1 - m)
}

/// Angle of the correction that bit `l` feeds into round `m > l`.
fn correction_angle(l: u32, m: u32) -> f64 {
    2.0 * PI / f64::from(1u32 << (m - l + 1))
}

/// Multi-ancilla QPE: system qubit 0, ancilla `m` on qubit `1 + m`, bit `m` of
/// the result is the reading of ancilla `m`.
pub fn build_phys3a(h: &QubitHamiltonian, s: &QpeSettings, prep_angle: f64, mode: RteMode) -> Result<Circuit> {
    s.validate()?;
    mode.validate()?;
    let n = s.n_qft;
    let mut c = Circuit::new(1 + n as usize, n as usize);
    c.gate(Gate::Ry(0, 2.0 * prep_angle));
    for m in 0..n {
        c.gate(Gate::H(1 + m as usize));
    }
    for m in 0..n {
        c.gates(controlled_rte(h, s, round_power(s, m), mode, 1 + m as usize, 0));
    }
    for m in 0..n {
        for l in 0..m {
            c.gate(Gate::CPhase(1 + l as usize, 1 + m as usize, correction_angle(l, m)));
        }
        c.gate(Gate::H(1 + m as usize));
    }
    for m in 0..n as usize {
        c.measure(1 + m, m);
    }
    c.result_bits = (0..n as usize).collect();
    Ok(c)
}

/// Single-ancilla iterative QPE on qubits (system 0, ancilla 1).
pub fn build_phys1a(h: &QubitHamiltonian, s: &QpeSettings, prep_angle: f64, mode: RteMode) -> Result<Circuit> {
    s.validate()?;
    mode.validate()?;
    let n = s.n_qft;
    let mut c = Circuit::new(2, n as usize);
    c.gate(Gate::Ry(0, 2.0 * prep_angle));
    for m in 0..n {
        c.gate(Gate::H(1));
        c.gates(controlled_rte(h, s, round_power(s, m), mode, 1, 0));
        for l in 0..m {
            c.conditional(Condition::is_set(l as usize), Gate::Phase(1, correction_angle(l, m)));
        }
        c.gate(Gate::H(1)).measure(1, m as usize);
        if m + 1 < n {
            c.reset(1);
        }
    }
    c.result_bits = (0..n as usize).collect();
    Ok(c)
}

pub fn build(variant: Variant, h: &QubitHamiltonian, s: &QpeSettings, prep_angle: f64, mode: RteMode) -> Result<Circuit> {
    match variant {
        Variant::Phys3a => build_phys3a(h, s, prep_angle, mode),
        Variant::Phys1a => build_phys1a(h, s, prep_angle, mode),
        Variant::Log1a => steane::build_log1a(h, s, prep_angle, mode),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::kernel::qpe_kernel;
    use crate::model::{qubit_hamiltonian, DimerParams, Sector};
    use crate::simulator::{exact_distribution, StateVector};
    use approx::assert_abs_diff_eq;
    use nalgebra::{Complex, DMatrix};

    type C = Complex<f64>;

    /// Matrix of a gate list on `n` qubits, column `k` is the image of `|k>`.
    fn unitary(gates: &[Gate], n: usize) -> DMatrix<C> {
        let dim = 1 << n;
        let mut u = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let mut amps = vec![C::new(0.0, 0.0); dim];
            amps[k] = C::new(1.0, 0.0);
            let mut st = StateVector::from_amplitudes(amps).unwrap();
            gates.iter().for_each(|g| st.apply(g));
            for (r, a) in st.amplitudes().iter().enumerate() {
                u[(r, k)] = *a;
            }
        }
        u
    }

    /// Control on qubit 1, target qubit 0: `|0><0| ⊗ I + |1><1| ⊗ exp(-iα(H - E))` via Taylor series.
    fn oracle(h: &QubitHamiltonian, s: &QpeSettings, power: usize) -> DMatrix<C> {
        let alpha = 2.0 * PI * power as f64 * s.t0 / s.n_val() as f64;
        let m = h.matrix();
        let e = s.e_orig();
        let gen = DMatrix::from_fn(2, 2, |i, j| {
            C::new(0.0, -alpha) * C::new(m[i][j] - if i == j { e } else { 0.0 }, 0.0)
        });
        let u = gen.exp();
        let mut full = DMatrix::zeros(4, 4);
        full[(0, 0)] = C::new(1.0, 0.0);
        full[(1, 1)] = C::new(1.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                full[(2 + i, 2 + j)] = u[(i, j)];
            }
        }
        full
    }

    fn reference_h(sector: Sector) -> QubitHamiltonian {
        qubit_hamiltonian(&DimerParams::reference(1.5), sector)
    }

    #[test]
    fn exact_rte_matches_matrix_exponential() {
        let s = QpeSettings::default();
        for sector in Sector::ALL {
            for shift in 0..4 {
                let s = s.with_shift(shift);
                for p in [1, 2, 4] {
                    let got = unitary(&controlled_rte(&reference_h(sector), &s, p, RteMode::Exact, 1, 0), 2);
                    let want = oracle(&reference_h(sector), &s, p);
                    assert!((got - want).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn trivial_hamiltonian_is_identity() {
        let s = QpeSettings::default();
        let h = QubitHamiltonian::new(s.e_orig(), 0.0, 0.0, Sector::Electron);
        for mode in [RteMode::Exact, RteMode::Trotter(3)] {
            let u = unitary(&controlled_rte(&h, &s, 4, mode, 1, 0), 2);
            assert!((u - DMatrix::identity(4, 4)).norm() < 1e-12);
        }
    }

    #[test]
    fn trotter_error_shrinks_with_steps() {
        let s = QpeSettings::default();
        let h = reference_h(Sector::Hole);
        let want = oracle(&h, &s, 4);
        let errs: Vec<f64> = [1, 2, 4, 8]
            .iter()
            .map(|&r| (unitary(&controlled_rte(&h, &s, 4, RteMode::Trotter(r), 1, 0), 2) - &want).norm())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn rte_mode_parsing() {
        assert_eq!("exact".parse::<RteMode>().unwrap(), RteMode::Exact);
        assert_eq!("trotter:3".parse::<RteMode>().unwrap(), RteMode::Trotter(3));
        assert!("trotter:0".parse::<RteMode>().is_err());
        assert!("foo".parse::<RteMode>().is_err());
        assert_eq!(RteMode::Trotter(2).to_string(), "trotter:2");
        assert_eq!("LOG1A".parse::<Variant>().unwrap(), Variant::Log1a);
    }

    #[test]
    fn on_grid_eigenvalue_is_deterministic() {
        let s = QpeSettings::default();
        for j in 0..8 {
            // diagonal Hamiltonian with |0> eigenvalue on grid point j
            let eps = s.e_orig() + j as f64 / s.t0;
            let h = QubitHamiltonian::new(eps + 0.3, 0.0, -0.3, Sector::Electron);
            for c in [
                build_phys3a(&h, &s, 0.0, RteMode::Exact).unwrap(),
                build_phys1a(&h, &s, 0.0, RteMode::Exact).unwrap(),
            ] {
                let d = exact_distribution(&c).unwrap();
                assert_abs_diff_eq!(d.probabilities[j], 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eigenstate_follows_kernel_for_every_shift() {
        let h = reference_h(Sector::Electron);
        let (lo, _) = h.eigenvalues();
        // ground eigenvector of the 2×2 block as a preparation angle
        let theta = 0.5 * h.hx.atan2(h.hz) + 0.5 * PI;
        for shift in 0..4 {
            let s = QpeSettings::default().with_shift(shift);
            let d = exact_distribution(&build_phys3a(&h, &s, theta, RteMode::Exact).unwrap()).unwrap();
            let k = qpe_kernel(lo, &s);
            for j in 0..8 {
                assert_abs_diff_eq!(d.probabilities[j], k[j], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn iterative_matches_multi_ancilla() {
        let s = QpeSettings::default();
        for sector in Sector::ALL {
            for shift in 0..4 {
                let s = s.with_shift(shift);
                for prep in [0.0, 0.4, 1.3] {
                    let a = exact_distribution(&build_phys3a(&reference_h(sector), &s, prep, RteMode::Exact).unwrap()).unwrap();
                    let b = exact_distribution(&build_phys1a(&reference_h(sector), &s, prep, RteMode::Exact).unwrap()).unwrap();
                    for j in 0..8 {
                        assert_abs_diff_eq!(a.probabilities[j], b.probabilities[j], epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn shift_by_one_bin_rotates() {
        let h = reference_h(Sector::Electron);
        let base = QpeSettings::default();
        let moved = QpeSettings { e_o: base.e_o + 1.0 / base.t0, ..base };
        let wrapped = QpeSettings { e_o: base.e_o + base.period(), ..base };
        let a = exact_distribution(&build_phys3a(&h, &base, 0.7, RteMode::Exact).unwrap()).unwrap();
        let b = exact_distribution(&build_phys3a(&h, &moved, 0.7, RteMode::Exact).unwrap()).unwrap();
        let w = exact_distribution(&build_phys3a(&h, &wrapped, 0.7, RteMode::Exact).unwrap()).unwrap();
        for j in 0..8 {
            assert_abs_diff_eq!(a.probabilities[(j + 1) % 8], b.probabilities[j], epsilon = 1e-10);
            assert_abs_diff_eq!(a.probabilities[j], w.probabilities[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn settings_validation() {
        assert!(QpeSettings { n_qft: 0, ..Default::default() }.validate().is_err());
        assert!(QpeSettings { t0: -1.0, ..Default::default() }.validate().is_err());
        assert!(QpeSettings { shift: 4, ..Default::default() }.validate().is_err());
        assert_abs_diff_eq!(QpeSettings::default().e_orig_at(2), -0.7, epsilon = 1e-15);
    }
}
