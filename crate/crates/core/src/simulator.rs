//! Dense statevector engine with mid-circuit measurement, reset, classical
//! feed-forward, discard markers and Pauli noise.
//!
//! Qubit `q` is bit `q` of the amplitude index. Two evaluation modes share the
//! same [`Circuit`]: [`run_shot`] samples one Monte Carlo trajectory, and
//! [`exact_distribution`] enumerates every measurement branch of the
//! noiseless circuit.

use std::collections::HashSet;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::steane;

/// Largest register the engine accepts.
pub const MAX_QUBITS: usize = 16;
/// Live-branch limit for [`exact_distribution`].
pub const MAX_BRANCHES: usize = 1 << 20;
/// Branches lighter than this are dropped during enumeration.
const BRANCH_PRUNE: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gate {
    H(usize),
    S(usize),
    Sdg(usize),
    X(usize),
    Y(usize),
    Z(usize),
    Ry(usize, f64),
    Rz(usize, f64),
    /// `diag(1, e^{iθ})`.
    Phase(usize, f64),
    /// Control, target.
    Cnot(usize, usize),
    /// `exp(-i θ/2 Z⊗Z)`.
    Rzz(usize, usize, f64),
    /// `diag(1, 1, 1, e^{iθ})`.
    CPhase(usize, usize, f64),
}

impl Gate {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q)
            | Gate::S(q)
            | Gate::Sdg(q)
            | Gate::X(q)
            | Gate::Y(q)
            | Gate::Z(q)
            | Gate::Ry(q, _)
            | Gate::Rz(q, _)
            | Gate::Phase(q, _) => vec![q],
            Gate::Cnot(a, b) | Gate::Rzz(a, b, _) | Gate::CPhase(a, b, _) => vec![a, b],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Gate::H(_) => "h",
            Gate::S(_) => "s",
            Gate::Sdg(_) => "sdg",
            Gate::X(_) => "x",
            Gate::Y(_) => "y",
            Gate::Z(_) => "z",
            Gate::Ry(..) => "ry",
            Gate::Rz(..) => "rz",
            Gate::Phase(..) => "phase",
            Gate::Cnot(..) => "cx",
            Gate::Rzz(..) => "rzz",
            Gate::CPhase(..) => "cphase",
        }
    }

    /// Same gate with every qubit index passed through `f`.
    pub fn map_qubits(&self, f: impl Fn(usize) -> usize) -> Gate {
        match *self {
            Gate::H(q) => Gate::H(f(q)),
            Gate::S(q) => Gate::S(f(q)),
            Gate::Sdg(q) => Gate::Sdg(f(q)),
            Gate::X(q) => Gate::X(f(q)),
            Gate::Y(q) => Gate::Y(f(q)),
            Gate::Z(q) => Gate::Z(f(q)),
            Gate::Ry(q, t) => Gate::Ry(f(q), t),
            Gate::Rz(q, t) => Gate::Rz(f(q), t),
            Gate::Phase(q, t) => Gate::Phase(f(q), t),
            Gate::Cnot(a, b) => Gate::Cnot(f(a), f(b)),
            Gate::Rzz(a, b, t) => Gate::Rzz(f(a), f(b), t),
            Gate::CPhase(a, b, t) => Gate::CPhase(f(a), f(b), t),
        }
    }
}

/// Predicate on one classical bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub bit: usize,
    pub value: bool,
}

impl Condition {
    pub fn is_set(bit: usize) -> Self {
        Condition { bit, value: true }
    }

    pub fn holds(&self, bits: &[bool]) -> bool {
        bits[self.bit] == self.value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Instruction {
    Gate(Gate),
    Measure { qubit: usize, bit: usize },
    /// Measure, then flip to `|0>`.
    Reset(usize),
    Conditional { condition: Condition, gate: Gate },
    Checkpoint(String),
    /// Abandon the shot when the condition holds.
    DiscardIf { condition: Condition, label: String },
    /// Offline bit-flip correction of a 7-bit Steane readout into one logical bit.
    Decode { bits: [usize; 7], out: usize, label: String },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub n_bits: usize,
    pub instructions: Vec<Instruction>,
    /// Classical bits forming the result integer, least significant first.
    pub result_bits: Vec<usize>,
}

impl Circuit {
    pub fn new(n_qubits: usize, n_bits: usize) -> Self {
        Circuit { n_qubits, n_bits, instructions: Vec::new(), result_bits: Vec::new() }
    }

    pub fn gate(&mut self, g: Gate) -> &mut Self {
        self.instructions.push(Instruction::Gate(g));
        self
    }

    pub fn gates(&mut self, gs: impl IntoIterator<Item = Gate>) -> &mut Self {
        self.instructions.extend(gs.into_iter().map(Instruction::Gate));
        self
    }

    pub fn measure(&mut self, qubit: usize, bit: usize) -> &mut Self {
        self.instructions.push(Instruction::Measure { qubit, bit });
        self
    }

    pub fn reset(&mut self, qubit: usize) -> &mut Self {
        self.instructions.push(Instruction::Reset(qubit));
        self
    }

    pub fn conditional(&mut self, condition: Condition, gate: Gate) -> &mut Self {
        self.instructions.push(Instruction::Conditional { condition, gate });
        self
    }

    pub fn checkpoint(&mut self, label: impl Into<String>) -> &mut Self {
        self.instructions.push(Instruction::Checkpoint(label.into()));
        self
    }

    pub fn discard_if(&mut self, condition: Condition, label: impl Into<String>) -> &mut Self {
        self.instructions.push(Instruction::DiscardIf { condition, label: label.into() });
        self
    }

    pub fn decode(&mut self, bits: [usize; 7], out: usize, label: impl Into<String>) -> &mut Self {
        self.instructions.push(Instruction::Decode { bits, out, label: label.into() });
        self
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.instructions
            .iter()
            .filter(|i| matches!(i, Instruction::Gate(g) | Instruction::Conditional { gate: g, .. } if g.qubits().len() == 2))
            .count()
    }

    /// Checks qubit/bit ranges and that every classical read follows a write.
    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return input(format!("circuit needs 1..={MAX_QUBITS} qubits, got {}", self.n_qubits));
        }
        let mut written = vec![false; self.n_bits];
        let qubit_ok = |q: usize| -> Result<()> {
            if q >= self.n_qubits {
                return input(format!("qubit {q} out of range"));
            }
            Ok(())
        };
        let gate_ok = |g: &Gate| -> Result<()> {
            let qs = g.qubits();
            for &q in &qs {
                qubit_ok(q)?;
            }
            if qs.len() == 2 && qs[0] == qs[1] {
                return input(format!("two-qubit gate {} on a single qubit", g.name()));
            }
            Ok(())
        };
        let read = |b: usize, written: &[bool]| -> Result<()> {
            if b >= self.n_bits || !written[b] {
                return input(format!("classical bit {b} read before it is written"));
            }
            Ok(())
        };
        let write = |b: usize, written: &mut [bool]| -> Result<()> {
            if b >= self.n_bits {
                return input(format!("classical bit {b} out of range"));
            }
            written[b] = true;
            Ok(())
        };
        for ins in &self.instructions {
            match ins {
                Instruction::Gate(g) => gate_ok(g)?,
                Instruction::Measure { qubit, bit } => {
                    qubit_ok(*qubit)?;
                    write(*bit, &mut written)?;
                }
                Instruction::Reset(q) => qubit_ok(*q)?,
                Instruction::Conditional { condition, gate } => {
                    read(condition.bit, &written)?;
                    gate_ok(gate)?;
                }
                Instruction::Checkpoint(_) => {}
                Instruction::DiscardIf { condition, .. } => read(condition.bit, &written)?,
                Instruction::Decode { bits, out, .. } => {
                    for b in bits {
                        read(*b, &written)?;
                    }
                    write(*out, &mut written)?;
                }
            }
        }
        for &b in &self.result_bits {
            read(b, &written)?;
        }
        Ok(())
    }

    /// Integer formed by the result bits of a classical register.
    pub fn result_of(&self, bits: &[bool]) -> usize {
        self.result_bits.iter().enumerate().map(|(i, &b)| usize::from(bits[b]) << i).sum()
    }
}

/// Depolarizing-style Pauli noise after gates plus classical readout flips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub p1: f64,
    pub p2: f64,
    pub pm: f64,
}

impl NoiseModel {
    pub const NOISELESS: NoiseModel = NoiseModel { p1: 0.0, p2: 0.0, pm: 0.0 };

    pub fn new(p1: f64, p2: f64, pm: f64) -> Result<Self> {
        let n = NoiseModel { p1, p2, pm };
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2), ("pm", self.pm)] {
            if !(0.0..=1.0).contains(&p) {
                return input(format!("{name} = {p} is not a probability"));
            }
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.p1 == 0.0 && self.p2 == 0.0 && self.pm == 0.0
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { p1: 3e-5, p2: 1e-3, pm: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CircuitOutcome {
    pub bits: Vec<bool>,
    /// Label of the discard marker that fired, if any.
    pub discarded: Option<String>,
    /// `(label, corrected bit index)` for every bit-flip correction applied.
    pub corrections: Vec<(String, usize)>,
    pub checkpoints: Vec<String>,
}

impl CircuitOutcome {
    pub fn result(&self, c: &Circuit) -> Option<usize> {
        self.discarded.is_none().then(|| c.result_of(&self.bits))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero(n_qubits: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        StateVector { n_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let n = amps.len().trailing_zeros() as usize;
        if amps.len() != 1 << n {
            return input("amplitude vector length must be a power of two");
        }
        Ok(StateVector { n_qubits: n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn scale(&mut self, s: f64) {
        self.amps.iter_mut().for_each(|a| *a *= s);
    }

    /// Calls `f(i0, i1)` for every index pair differing only in bit `q`.
    #[inline]
    fn for_pairs(len: usize, q: usize, mut f: impl FnMut(usize, usize)) {
        let bit = 1 << q;
        for base in (0..len).step_by(bit << 1) {
            for i in base..base + bit {
                f(i, i | bit);
            }
        }
    }

    fn apply_1q(&mut self, q: usize, m: [[Complex64; 2]; 2]) {
        let amps = &mut self.amps;
        Self::for_pairs(amps.len(), q, |i, j| {
            let (a, b) = (amps[i], amps[j]);
            amps[i] = m[0][0] * a + m[0][1] * b;
            amps[j] = m[1][0] * a + m[1][1] * b;
        });
    }

    /// Multiplies the `|0>` and `|1>` components of qubit `q` by `lo` and `hi`.
    fn diag_1q(&mut self, q: usize, lo: Option<Complex64>, hi: Complex64) {
        let amps = &mut self.amps;
        Self::for_pairs(amps.len(), q, |i, j| {
            if let Some(lo) = lo {
                amps[i] *= lo;
            }
            amps[j] *= hi;
        });
    }

    pub fn apply(&mut self, g: &Gate) {
        let c = Complex64::new;
        let i = Complex64::i();
        match *g {
            Gate::H(q) => {
                let amps = &mut self.amps;
                Self::for_pairs(amps.len(), q, |i, j| {
                    let (a, b) = (amps[i], amps[j]);
                    amps[i] = (a + b) * FRAC_1_SQRT_2;
                    amps[j] = (a - b) * FRAC_1_SQRT_2;
                });
            }
            Gate::S(q) => self.diag_1q(q, None, i),
            Gate::Sdg(q) => self.diag_1q(q, None, -i),
            Gate::X(q) => {
                let amps = &mut self.amps;
                Self::for_pairs(amps.len(), q, |i, j| amps.swap(i, j));
            }
            Gate::Y(q) => self.apply_1q(q, [[c(0.0, 0.0), -i], [i, c(0.0, 0.0)]]),
            Gate::Z(q) => self.diag_1q(q, None, c(-1.0, 0.0)),
            Gate::Ry(q, t) => {
                let (s, co) = (0.5 * t).sin_cos();
                let amps = &mut self.amps;
                Self::for_pairs(amps.len(), q, |i, j| {
                    let (a, b) = (amps[i], amps[j]);
                    amps[i] = a * co - b * s;
                    amps[j] = a * s + b * co;
                });
            }
            Gate::Rz(q, t) => {
                self.diag_1q(q, Some(Complex64::from_polar(1.0, -0.5 * t)), Complex64::from_polar(1.0, 0.5 * t))
            }
            Gate::Phase(q, t) => self.diag_1q(q, None, Complex64::from_polar(1.0, t)),
            Gate::Cnot(ctl, tgt) => {
                let cb = 1 << ctl;
                let amps = &mut self.amps;
                Self::for_pairs(amps.len(), tgt, |i, j| {
                    if i & cb != 0 {
                        amps.swap(i, j);
                    }
                });
            }
            Gate::Rzz(a, b, t) => {
                let bb = 1 << b;
                let even = Complex64::from_polar(1.0, -0.5 * t);
                let odd = Complex64::from_polar(1.0, 0.5 * t);
                let amps = &mut self.amps;
                Self::for_pairs(amps.len(), a, |i, j| {
                    let (pi, pj) = if i & bb == 0 { (even, odd) } else { (odd, even) };
                    amps[i] *= pi;
                    amps[j] *= pj;
                });
            }
            Gate::CPhase(a, b, t) => {
                let bb = 1 << b;
                let p = Complex64::from_polar(1.0, t);
                let amps = &mut self.amps;
                Self::for_pairs(amps.len(), a, |_, j| {
                    if j & bb != 0 {
                        amps[j] *= p;
                    }
                });
            }
        }
    }

    /// Unnormalized probability of reading 1 on qubit `q`.
    pub fn prob_one(&self, q: usize) -> f64 {
        let bit = 1 << q;
        self.amps.iter().enumerate().filter(|(k, _)| k & bit != 0).map(|(_, a)| a.norm_sqr()).sum()
    }

    /// Zeroes the components inconsistent with `outcome` (no renormalization).
    pub fn project(&mut self, q: usize, outcome: bool) {
        let bit = 1 << q;
        for (k, a) in self.amps.iter_mut().enumerate() {
            if (k & bit != 0) != outcome {
                *a = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Expectation value of a Pauli-Z product over `qubits`.
    pub fn expect_z(&self, qubits: &[usize]) -> f64 {
        let mask: usize = qubits.iter().map(|q| 1usize << q).sum();
        self.amps
            .iter()
            .enumerate()
            .map(|(k, a)| if (k & mask).count_ones() % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }
}

const PAULIS: [fn(usize) -> Gate; 3] = [Gate::X, Gate::Y, Gate::Z];

fn inject_noise<R: Rng>(state: &mut StateVector, g: &Gate, noise: &NoiseModel, rng: &mut R) {
    let qs = g.qubits();
    match qs.len() {
        1 if noise.p1 > 0.0 && rng.random::<f64>() < noise.p1 => {
            state.apply(&PAULIS[rng.random_range(0..3)](qs[0]));
        }
        2 if noise.p2 > 0.0 && rng.random::<f64>() < noise.p2 => {
            // one of the 15 non-identity two-qubit Paulis; index 0 on a qubit means identity
            let k = rng.random_range(1..16usize);
            for (q, p) in [(qs[0], k % 4), (qs[1], k / 4)] {
                if p > 0 {
                    state.apply(&PAULIS[p - 1](q));
                }
            }
        }
        _ => {}
    }
}

fn measure_qubit<R: Rng>(state: &mut StateVector, q: usize, rng: &mut R) -> Result<bool> {
    let p1 = state.prob_one(q).clamp(0.0, 1.0);
    let outcome = rng.random::<f64>() < p1;
    let p = if outcome { p1 } else { 1.0 - p1 };
    if p <= 0.0 {
        return Err(Error::Internal(format!("collapse onto a zero-probability branch of qubit {q}")));
    }
    state.project(q, outcome);
    state.scale(1.0 / p.sqrt());
    Ok(outcome)
}

/// One Monte Carlo shot; `observe` sees the state after every instruction.
pub fn run_shot_observed<R: Rng>(
    c: &Circuit,
    noise: &NoiseModel,
    rng: &mut R,
    mut observe: impl FnMut(&Instruction, &StateVector),
) -> Result<CircuitOutcome> {
    let mut state = StateVector::zero(c.n_qubits);
    let mut out = CircuitOutcome { bits: vec![false; c.n_bits], ..Default::default() };
    let flip = |rng: &mut R| noise.pm > 0.0 && rng.random::<f64>() < noise.pm;
    for ins in &c.instructions {
        match ins {
            Instruction::Gate(g) => {
                state.apply(g);
                inject_noise(&mut state, g, noise, rng);
            }
            Instruction::Conditional { condition, gate } => {
                if condition.holds(&out.bits) {
                    state.apply(gate);
                    inject_noise(&mut state, gate, noise, rng);
                }
            }
            Instruction::Measure { qubit, bit } => {
                let v = measure_qubit(&mut state, *qubit, rng)?;
                out.bits[*bit] = v ^ flip(rng);
            }
            Instruction::Reset(q) => {
                let v = measure_qubit(&mut state, *q, rng)? ^ flip(rng);
                if v {
                    state.apply(&Gate::X(*q));
                }
            }
            Instruction::Checkpoint(label) => out.checkpoints.push(label.clone()),
            Instruction::DiscardIf { condition, label } => {
                if condition.holds(&out.bits) {
                    out.discarded = Some(label.clone());
                    return Ok(out);
                }
            }
            Instruction::Decode { bits, out: target, label } => {
                let word = steane::pack_bits(bits.iter().map(|&b| out.bits[b]));
                let d = steane::bfc_decode(word);
                out.bits[*target] = d.logical;
                if let Some(k) = d.flipped {
                    out.corrections.push((label.clone(), k));
                }
            }
        }
        observe(ins, &state);
    }
    Ok(out)
}

pub fn run_shot_with<R: Rng>(c: &Circuit, noise: &NoiseModel, rng: &mut R) -> Result<CircuitOutcome> {
    run_shot_observed(c, noise, rng, |_, _| {})
}

pub fn run_shot(c: &Circuit, noise: &NoiseModel, seed: u64) -> Result<CircuitOutcome> {
    run_shot_with(c, noise, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Generator for shot `index` of a run seeded with `seed`; each shot owns a stream.
pub fn shot_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `shots` independent shots, run in parallel and returned in shot order.
pub fn sample(c: &Circuit, noise: &NoiseModel, shots: usize, seed: u64) -> Result<Vec<CircuitOutcome>> {
    c.validate()?;
    noise.validate()?;
    (0..shots)
        .into_par_iter()
        .map(|i| run_shot_with(c, noise, &mut shot_rng(seed, i as u64)))
        .collect()
}

/// Noiseless outcome distribution over the result bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    /// Conditioned on acceptance; sums to one when `accepted > 0`.
    pub probabilities: Vec<f64>,
    /// Total probability of branches that no discard marker removed.
    pub accepted: f64,
}

struct Branch {
    state: StateVector,
    bits: Vec<bool>,
}

impl Branch {
    fn weight(&self) -> f64 {
        self.state.norm_sqr()
    }
}

/// Classical bits still read at or after each instruction index.
fn live_bits(c: &Circuit) -> Vec<Vec<bool>> {
    let mut live = vec![false; c.n_bits];
    for &b in &c.result_bits {
        live[b] = true;
    }
    let mut out = vec![live.clone(); c.instructions.len() + 1];
    for (k, ins) in c.instructions.iter().enumerate().rev() {
        match ins {
            Instruction::Measure { bit, .. } => live[*bit] = false,
            Instruction::Decode { bits, out, .. } => {
                live[*out] = false;
                for &b in bits {
                    live[b] = true;
                }
            }
            Instruction::Conditional { condition, .. } | Instruction::DiscardIf { condition, .. } => {
                live[condition.bit] = true
            }
            _ => {}
        }
        out[k] = live.clone();
    }
    out
}

/// For each instruction, whether its measured qubit is touched again later.
fn qubit_used_later(c: &Circuit) -> Vec<bool> {
    let mut used = vec![false; c.n_qubits];
    let mut out = vec![false; c.instructions.len()];
    for (k, ins) in c.instructions.iter().enumerate().rev() {
        match ins {
            Instruction::Measure { qubit, .. } | Instruction::Reset(qubit) => {
                out[k] = used[*qubit];
                used[*qubit] = true;
            }
            Instruction::Gate(g) | Instruction::Conditional { gate: g, .. } => {
                g.qubits().into_iter().for_each(|q| used[q] = true)
            }
            _ => {}
        }
    }
    out
}

/// Merges branches that agree on every live classical bit and whose states are
/// parallel; the merged weight is the sum.
fn merge_branches(branches: Vec<Branch>, live: &[bool]) -> Vec<Branch> {
    let mut merged: Vec<Branch> = Vec::with_capacity(branches.len());
    for b in branches {
        let key = |x: &Branch| x.bits.iter().zip(live).map(|(v, l)| *v && *l).collect::<Vec<_>>();
        let bkey = key(&b);
        let wb = b.weight();
        let target = merged.iter_mut().find(|m| {
            if key(m) != bkey {
                return false;
            }
            let wm = m.weight();
            let overlap = m.state.inner(&b.state).norm();
            (wm * wb).sqrt() - overlap <= 1e-12 * (wm * wb).sqrt()
        });
        match target {
            Some(m) => {
                let wm = m.weight();
                m.state.scale(((wm + wb) / wm).sqrt());
            }
            None => merged.push(b),
        }
    }
    merged
}

/// Enumerates every measurement branch of the noiseless circuit.
pub fn exact_distribution(c: &Circuit) -> Result<ExactDistribution> {
    c.validate()?;
    let live = live_bits(c);
    let used_later = qubit_used_later(c);
    let mut branches = vec![Branch { state: StateVector::zero(c.n_qubits), bits: vec![false; c.n_bits] }];
    for (k, ins) in c.instructions.iter().enumerate() {
        let mut next = Vec::with_capacity(branches.len());
        let mut split = false;
        for mut b in branches {
            match ins {
                Instruction::Gate(g) => {
                    b.state.apply(g);
                    next.push(b);
                }
                Instruction::Conditional { condition, gate } => {
                    if condition.holds(&b.bits) {
                        b.state.apply(gate);
                    }
                    next.push(b);
                }
                Instruction::Measure { qubit, .. } | Instruction::Reset(qubit) => {
                    split = true;
                    let w1 = b.state.prob_one(*qubit);
                    let w0 = b.weight() - w1;
                    let mut one = Branch { state: b.state.clone(), bits: b.bits.clone() };
                    let mut zero = b;
                    zero.state.project(*qubit, false);
                    one.state.project(*qubit, true);
                    if let Instruction::Measure { bit, .. } = ins {
                        zero.bits[*bit] = false;
                        one.bits[*bit] = true;
                    }
                    // an idle collapsed qubit can be returned to |0> so branches differing only there merge
                    if matches!(ins, Instruction::Reset(_)) || !used_later[k] {
                        one.state.apply(&Gate::X(*qubit));
                    }
                    if w0 > BRANCH_PRUNE {
                        next.push(zero);
                    }
                    if w1 > BRANCH_PRUNE {
                        next.push(one);
                    }
                }
                Instruction::Checkpoint(_) => next.push(b),
                Instruction::DiscardIf { condition, .. } => {
                    if !condition.holds(&b.bits) {
                        next.push(b);
                    }
                }
                Instruction::Decode { bits, out, .. } => {
                    split = true;
                    let word = steane::pack_bits(bits.iter().map(|&x| b.bits[x]));
                    b.bits[*out] = steane::bfc_decode(word).logical;
                    next.push(b);
                }
            }
        }
        if split && next.len() > 1 {
            next = merge_branches(next, &live[k + 1]);
        }
        if next.len() > MAX_BRANCHES {
            return Err(Error::BranchExplosion { limit: MAX_BRANCHES });
        }
        branches = next;
    }
    let mut probabilities = vec![0.0; 1 << c.result_bits.len()];
    let mut accepted = 0.0;
    for b in &branches {
        let w = b.weight();
        probabilities[c.result_of(&b.bits)] += w;
        accepted += w;
    }
    if accepted > 0.0 {
        probabilities.iter_mut().for_each(|p| *p /= accepted);
    }
    Ok(ExactDistribution { probabilities, accepted })
}

/// Histogram over the result integer of accepted shots.
pub fn tally(c: &Circuit, outcomes: &[CircuitOutcome]) -> Vec<u64> {
    let mut counts = vec![0u64; 1 << c.result_bits.len()];
    for r in outcomes.iter().filter_map(|o| o.result(c)) {
        counts[r] += 1;
    }
    counts
}

/// Distinct labels of the checkpoints a circuit declares, in order.
pub fn checkpoint_labels(c: &Circuit) -> Vec<String> {
    let mut seen = HashSet::new();
    c.instructions
        .iter()
        .filter_map(|i| match i {
            Instruction::Checkpoint(l) => Some(l.clone()),
            _ => None,
        })
        .filter(|l| seen.insert(l.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn hadamard_measure() -> Circuit {
        let mut c = Circuit::new(1, 1);
        c.gate(Gate::H(0)).measure(0, 0);
        c.result_bits = vec![0];
        c
    }

    #[test]
    fn hadamard_is_fair() {
        let c = hadamard_measure();
        let outcomes = sample(&c, &NoiseModel::NOISELESS, 100_000, 7).unwrap();
        let ones = tally(&c, &outcomes)[1] as f64 / 1e5;
        assert!((ones - 0.5).abs() < 0.01, "P(1) = {ones}");
    }

    #[test]
    fn x_always_reads_one() {
        let mut c = Circuit::new(1, 1);
        c.gate(Gate::X(0)).measure(0, 0);
        c.result_bits = vec![0];
        for seed in 0..50 {
            assert_eq!(run_shot(&c, &NoiseModel::NOISELESS, seed).unwrap().bits, vec![true]);
        }
    }

    #[test]
    fn bell_pair_distribution() {
        let mut c = Circuit::new(2, 2);
        c.gate(Gate::H(0)).gate(Gate::Cnot(0, 1)).measure(0, 0).measure(1, 1);
        c.result_bits = vec![0, 1];
        let d = exact_distribution(&c).unwrap();
        assert_abs_diff_eq!(d.probabilities[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.probabilities[3], 0.5, epsilon = 1e-15);
        assert_eq!(d.probabilities[1] + d.probabilities[2], 0.0);
    }

    #[test]
    fn discard_conditions_renormalize() {
        let mut c = Circuit::new(2, 2);
        c.gate(Gate::H(0)).gate(Gate::Ry(1, 1.0)).measure(0, 0);
        c.discard_if(Condition::is_set(0), "cp").measure(1, 1);
        c.result_bits = vec![1];
        let d = exact_distribution(&c).unwrap();
        assert_abs_diff_eq!(d.accepted, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d.probabilities[1], (0.5f64).sin().powi(2), epsilon = 1e-15);
        let out = run_shot(&c, &NoiseModel::NOISELESS, 3).unwrap();
        if out.bits[0] {
            assert_eq!(out.discarded.as_deref(), Some("cp"));
            assert_eq!(out.result(&c), None);
        }
    }

    #[test]
    fn reset_returns_to_zero() {
        let mut c = Circuit::new(1, 2);
        c.gate(Gate::H(0)).measure(0, 0).reset(0).measure(0, 1);
        c.result_bits = vec![1];
        let d = exact_distribution(&c).unwrap();
        assert_abs_diff_eq!(d.probabilities[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn feed_forward_undoes_measured_flip() {
        // teleport-like check: measure, then conditionally re-flip a copy
        let mut c = Circuit::new(2, 2);
        c.gate(Gate::H(0)).gate(Gate::Cnot(0, 1)).measure(0, 0);
        c.conditional(Condition::is_set(0), Gate::X(1)).measure(1, 1);
        c.result_bits = vec![1];
        assert_abs_diff_eq!(exact_distribution(&c).unwrap().probabilities[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn validation_catches_bad_circuits() {
        let mut c = Circuit::new(1, 1);
        c.gate(Gate::H(1));
        assert!(c.validate().is_err());
        let mut c = Circuit::new(1, 1);
        c.conditional(Condition::is_set(0), Gate::X(0));
        assert!(c.validate().is_err());
        let mut c = Circuit::new(2, 0);
        c.gate(Gate::Cnot(1, 1));
        assert!(c.validate().is_err());
        assert!(NoiseModel::new(0.1, 1.5, 0.0).is_err());
    }

    #[test]
    fn same_seed_same_outcome() {
        let mut c = Circuit::new(3, 3);
        c.gates([Gate::H(0), Gate::Cnot(0, 1), Gate::Ry(2, 0.3), Gate::Rzz(1, 2, 0.7)]);
        c.measure(0, 0).measure(1, 1).measure(2, 2);
        let noise = NoiseModel::new(0.05, 0.1, 0.05).unwrap();
        for seed in 0..20 {
            assert_eq!(run_shot(&c, &noise, seed).unwrap(), run_shot(&c, &noise, seed).unwrap());
        }
    }

    #[test]
    fn noise_changes_statistics() {
        let mut c = Circuit::new(1, 1);
        c.gate(Gate::X(0)).measure(0, 0);
        c.result_bits = vec![0];
        let out = sample(&c, &NoiseModel::new(0.0, 0.0, 0.2).unwrap(), 20_000, 1).unwrap();
        let zeros = tally(&c, &out)[0] as f64 / 20_000.0;
        assert!((zeros - 0.2).abs() < 0.02);
        let out = sample(&c, &NoiseModel::new(0.3, 0.0, 0.0).unwrap(), 20_000, 2).unwrap();
        // X or Y after the gate flips the bit: 2/3 of 0.3
        let zeros = tally(&c, &out)[0] as f64 / 20_000.0;
        assert!((zeros - 0.2).abs() < 0.02, "{zeros}");
    }

    #[test]
    fn gate_identities() {
        let mut a = StateVector::zero(2);
        a.apply(&Gate::H(0));
        a.apply(&Gate::Ry(1, 0.8));
        let ops_equal = |x: &[Gate], y: &[Gate]| {
            let (mut p, mut q) = (a.clone(), a.clone());
            x.iter().for_each(|g| p.apply(g));
            y.iter().for_each(|g| q.apply(g));
            let ov = p.inner(&q).norm();
            assert_abs_diff_eq!(ov, 1.0, epsilon = 1e-12);
        };
        ops_equal(&[Gate::S(0), Gate::S(0)], &[Gate::Z(0)]);
        ops_equal(&[Gate::S(1), Gate::Sdg(1)], &[]);
        ops_equal(&[Gate::Phase(0, 0.4)], &[Gate::Rz(0, 0.4)]);
        ops_equal(&[Gate::Rzz(0, 1, 0.6)], &[Gate::Cnot(0, 1), Gate::Rz(1, 0.6), Gate::Cnot(0, 1)]);
        ops_equal(
            &[Gate::CPhase(0, 1, 0.9)],
            &[Gate::Phase(0, 0.45), Gate::Phase(1, 0.45), Gate::Rzz(0, 1, -0.45)],
        );
        ops_equal(&[Gate::Y(0)], &[Gate::X(0), Gate::Z(0)]);
        ops_equal(&[Gate::S(1), Gate::H(1), Gate::Rz(1, 0.3), Gate::H(1), Gate::Sdg(1)], &[Gate::Ry(1, -0.3)]);
    }

    #[test]
    fn live_bits_track_reads() {
        let mut c = Circuit::new(1, 2);
        c.measure(0, 0).conditional(Condition::is_set(0), Gate::X(0)).measure(0, 1);
        c.result_bits = vec![1];
        let live = live_bits(&c);
        assert_eq!(live[1], vec![true, false]);
        assert_eq!(live[2], vec![false, false]);
        assert_eq!(live[3], vec![false, true]);
    }
}
