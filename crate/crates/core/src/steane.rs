//! Steane [[7,1,3]] machinery: flagged encoding, logical gate expansion,
//! offline bit-flip correction and the encoded single-ancilla QPE circuit.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::circuits::{controlled_rte, QpeSettings, RteMode};
use crate::error::{Error, Result};
use crate::model::QubitHamiltonian;
use crate::simulator::{Circuit, CircuitOutcome, Condition, Gate};

/// Supports shared by the X- and Z-type generators.
pub const GENERATOR_SUPPORTS: [[usize; 4]; 3] = [[0, 1, 2, 3], [1, 2, 4, 5], [2, 3, 5, 6]];
/// Weight-3 representative of the logical Z (and X) operator.
pub const LOGICAL_SUPPORT: [usize; 3] = [2, 3, 4];
pub const BLOCK: usize = 7;

fn mask(qubits: &[usize]) -> u8 {
    qubits.iter().fold(0u8, |m, &q| m | (1 << q))
}

/// Pauli string on seven qubits in binary symplectic form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PauliString {
    pub x: u8,
    pub z: u8,
}

impl PauliString {
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StabilizerSet {
    pub x_type: [PauliString; 3],
    pub z_type: [PauliString; 3],
}

impl StabilizerSet {
    pub fn steane() -> Self {
        let m = GENERATOR_SUPPORTS.map(|s| mask(&s));
        StabilizerSet {
            x_type: m.map(|x| PauliString { x, z: 0 }),
            z_type: m.map(|z| PauliString { x: 0, z }),
        }
    }

    pub fn generators(&self) -> Vec<PauliString> {
        self.x_type.iter().chain(&self.z_type).copied().collect()
    }

    pub fn all_commute(&self) -> bool {
        let g = self.generators();
        g.iter().all(|a| g.iter().all(|b| a.commutes_with(b)))
    }
}

/// The 8 strings of `|0>_L` (the X-stabilizer orbit of 0000000) and their complements.
pub fn codewords() -> [Vec<u8>; 2] {
    let gens = GENERATOR_SUPPORTS.map(|s| mask(&s));
    let zero: Vec<u8> = (0..8u8)
        .map(|k| (0..3).filter(|i| k >> i & 1 == 1).fold(0u8, |w, i| w ^ gens[i]))
        .collect();
    let one = zero.iter().map(|w| w ^ 0x7f).collect();
    [zero, one]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decoded {
    pub codeword: u8,
    pub logical: bool,
    pub flipped: Option<usize>,
}

/// Lookup table over all 128 readouts.
pub fn bfc_table() -> &'static [Decoded; 128] {
    static TABLE: OnceLock<[Decoded; 128]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let words = codewords();
        std::array::from_fn(|raw| {
            let raw = raw as u8;
            for (logical, set) in words.iter().enumerate() {
                for &w in set {
                    let diff = raw ^ w;
                    if diff.count_ones() <= 1 {
                        return Decoded {
                            codeword: w,
                            logical: logical == 1,
                            flipped: (diff != 0).then(|| diff.trailing_zeros() as usize),
                        };
                    }
                }
            }
            unreachable!("the Hamming code is perfect")
        })
    })
}

pub fn bfc_decode(bits: u8) -> Decoded {
    bfc_table()[(bits & 0x7f) as usize]
}

/// Packs bits, first element least significant.
pub fn pack_bits(bits: impl IntoIterator<Item = bool>) -> u8 {
    bits.into_iter().enumerate().fold(0u8, |w, (i, b)| w | (u8::from(b) << i))
}

const ENCODER_HADAMARDS: [usize; 3] = [0, 4, 6];
const ENCODER_CNOTS: [(usize, usize); 8] = [(0, 1), (0, 2), (0, 3), (4, 1), (4, 5), (6, 3), (6, 5), (5, 2)];

/// Unitary part of the `|0>_L` encoder on the block starting at `offset`, with
/// the flag collecting the parity of the weight-3 logical-Z representative.
pub fn encoder_gates(offset: usize, flag: usize) -> Vec<Gate> {
    let mut g: Vec<Gate> = ENCODER_HADAMARDS.iter().map(|&q| Gate::H(offset + q)).collect();
    g.extend(ENCODER_CNOTS.iter().map(|&(a, b)| Gate::Cnot(offset + a, offset + b)));
    g.extend(LOGICAL_SUPPORT.iter().map(|&q| Gate::Cnot(offset + q, flag)));
    g
}

/// Encoder, flag readout into `bit`, discard marker and flag reset.
pub fn append_encoding(c: &mut Circuit, offset: usize, flag: usize, bit: usize, label: &str) {
    c.gates(encoder_gates(offset, flag));
    c.measure(flag, bit);
    c.discard_if(Condition::is_set(bit), label);
    c.reset(flag);
}

/// Standalone eight-qubit encoder (data 0..7, flag 7) for inspection.
pub fn build_encoder() -> Circuit {
    let mut c = Circuit::new(BLOCK + 1, 1);
    append_encoding(&mut c, 0, BLOCK, 0, "CP0");
    c
}

fn transversal(offset: usize, f: fn(usize) -> Gate) -> Vec<Gate> {
    (0..BLOCK).map(|q| f(offset + q)).collect()
}

/// `exp(-iθ/2 Z2 Z3 Z4)` on one block.
fn logical_rz(offset: usize, theta: f64) -> Vec<Gate> {
    let [a, b, c] = LOGICAL_SUPPORT.map(|q| offset + q);
    vec![Gate::Cnot(a, b), Gate::Rzz(b, c, theta), Gate::Cnot(a, b)]
}

/// `exp(-iθ/2 Z_L ⊗ Z_L)` through parity ladders on both weight-3 supports.
fn logical_rzz(a: usize, b: usize, theta: f64) -> Vec<Gate> {
    let ladder = |o: usize| [Gate::Cnot(o + 2, o + 3), Gate::Cnot(o + 3, o + 4)];
    let mut g = Vec::with_capacity(9);
    g.extend(ladder(a));
    g.extend(ladder(b));
    g.push(Gate::Rzz(a + 4, b + 4, theta));
    g.extend(ladder(b).into_iter().rev());
    g.extend(ladder(a).into_iter().rev());
    g
}

/// Physical gates implementing `g`, where qubit `k` of `g` names logical block
/// `k` whose first physical qubit is `blocks[k]`. Phase-type gates are exact
/// up to a global phase.
pub fn expand_logical(g: &Gate, blocks: &[usize]) -> Result<Vec<Gate>> {
    let off = |k: usize| {
        blocks.get(k).copied().ok_or_else(|| Error::Input(format!("logical block {k} has no layout entry")))
    };
    Ok(match *g {
        Gate::H(k) => transversal(off(k)?, Gate::H),
        Gate::X(k) => transversal(off(k)?, Gate::X),
        Gate::Z(k) => transversal(off(k)?, Gate::Z),
        Gate::S(k) => transversal(off(k)?, Gate::Sdg),
        Gate::Sdg(k) => transversal(off(k)?, Gate::S),
        Gate::Rz(k, t) | Gate::Phase(k, t) => logical_rz(off(k)?, t),
        Gate::Ry(k, t) => {
            let o = off(k)?;
            let mut v = transversal(o, Gate::S);
            v.extend(transversal(o, Gate::H));
            v.extend(logical_rz(o, t));
            v.extend(transversal(o, Gate::H));
            v.extend(transversal(o, Gate::Sdg));
            v
        }
        Gate::Cnot(a, b) => {
            let (a, b) = (off(a)?, off(b)?);
            (0..BLOCK).map(|q| Gate::Cnot(a + q, b + q)).collect()
        }
        Gate::Rzz(a, b, t) => logical_rzz(off(a)?, off(b)?, t),
        Gate::CPhase(a, b, t) => {
            let (a, b) = (off(a)?, off(b)?);
            let mut v = logical_rz(a, 0.5 * t);
            v.extend(logical_rz(b, 0.5 * t));
            v.extend(logical_rzz(a, b, -0.5 * t));
            v
        }
        Gate::Y(_) => return Err(Error::UnsupportedGate("y has no expansion in this gate set".into())),
    })
}

pub const CHECKPOINTS: [&str; 7] = ["CP0", "CP1", "CP2", "CP3", "CP4", "CP5", "CP6"];

/// X fault inserted just before one of the logical readouts (0..n_qft are
/// the ancilla rounds, n_qft the final system readout).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadoutFault {
    pub readout: usize,
    pub qubit: usize,
}

/// Encoded single-ancilla QPE: system block on qubits 0..7, logical ancilla on
/// 7..14, shared flag on 14.
pub fn build_log1a(h: &QubitHamiltonian, s: &QpeSettings, prep_angle: f64, mode: RteMode) -> Result<Circuit> {
    build_log1a_with_fault(h, s, prep_angle, mode, None)
}

pub fn build_log1a_with_fault(
    h: &QubitHamiltonian,
    s: &QpeSettings,
    prep_angle: f64,
    mode: RteMode,
    fault: Option<ReadoutFault>,
) -> Result<Circuit> {
    s.validate()?;
    mode.validate()?;
    let n = s.n_qft as usize;
    if n != 3 {
        return Err(Error::Input(format!("the logical circuit is laid out for 3 rounds, got n_qft = {n}")));
    }
    let (sys, anc, flag) = (0, BLOCK, 2 * BLOCK);
    let blocks = [sys, anc];
    let flag_bit = |k: usize| k;
    let raw_bit = |round: usize, q: usize| 4 + BLOCK * round + q;
    let decoded_bit = |round: usize| 4 + BLOCK * (n + 1) + round;
    let mut c = Circuit::new(2 * BLOCK + 1, 4 + (BLOCK + 1) * (n + 1));
    let readout = |c: &mut Circuit, round: usize, offset: usize, label: &str| {
        if let Some(f) = fault.filter(|f| f.readout == round) {
            c.gate(Gate::X(offset + f.qubit));
        }
        for q in 0..BLOCK {
            c.measure(offset + q, raw_bit(round, q));
        }
        c.decode(std::array::from_fn(|q| raw_bit(round, q)), decoded_bit(round), label);
        c.checkpoint(label);
    };

    append_encoding(&mut c, sys, flag, flag_bit(0), CHECKPOINTS[0]);
    append_encoding(&mut c, anc, flag, flag_bit(1), CHECKPOINTS[0]);
    c.checkpoint(CHECKPOINTS[0]);
    for g in expand_logical(&Gate::Ry(0, 2.0 * prep_angle), &blocks)? {
        c.gate(g);
    }
    for m in 0..n {
        if m > 0 {
            for q in 0..BLOCK {
                c.reset(anc + q);
            }
            let label = CHECKPOINTS[2 * m];
            append_encoding(&mut c, anc, flag, flag_bit(m + 1), label);
            c.checkpoint(label);
        }
        let mut logical = vec![Gate::H(1)];
        logical.extend(controlled_rte(h, s, 1 << (n - 1 - m), mode, 1, 0));
        for g in &logical {
            c.gates(expand_logical(g, &blocks)?);
        }
        for l in 0..m {
            let phase = Gate::Phase(1, 2.0 * std::f64::consts::PI / (1u32 << (m - l + 1)) as f64);
            for g in expand_logical(&phase, &blocks)? {
                c.conditional(Condition::is_set(decoded_bit(l)), g);
            }
        }
        c.gates(expand_logical(&Gate::H(1), &blocks)?);
        readout(&mut c, m, anc, CHECKPOINTS[2 * m + 1]);
    }
    readout(&mut c, n, sys, CHECKPOINTS[6]);
    c.result_bits = (0..n).map(decoded_bit).collect();
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRow {
    pub checkpoint: String,
    pub local_discard: u64,
    pub local_ratio: f64,
    pub accumulated_discard: u64,
    pub accumulated_ratio: f64,
    pub corrections: u64,
    pub correction_ratio: f64,
    pub survived: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub shots: u64,
    pub rows: Vec<SurvivalRow>,
}

impl SurvivalRecord {
    pub fn row(&self, label: &str) -> Option<&SurvivalRow> {
        self.rows.iter().find(|r| r.checkpoint == label)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "checkpoint",
            "local_discard",
            "local_ratio",
            "accumulated_discard",
            "accumulated_ratio",
            "corrections",
            "correction_ratio",
            "survived",
        ])
        .map_err(csv_err)?;
        w.write_record(["initialization", "", "", "", "", "", "", &self.shots.to_string()]).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.checkpoint.clone(),
                r.local_discard.to_string(),
                format!("{:.4}", r.local_ratio),
                r.accumulated_discard.to_string(),
                format!("{:.4}", r.accumulated_ratio),
                r.corrections.to_string(),
                format!("{:.4}", r.correction_ratio),
                r.survived.to_string(),
            ])
            .map_err(csv_err)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Internal(e.to_string()))?)
            .map_err(|e| Error::Internal(e.to_string()))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Internal(e.to_string())
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-checkpoint discards and corrections. Local ratios divide by the shots
/// alive just before the checkpoint, accumulated ratios by all shots.
pub fn survival_report(outcomes: &[CircuitOutcome]) -> SurvivalRecord {
    let shots = outcomes.len() as u64;
    let mut alive = shots;
    let mut accumulated = 0;
    let rows = CHECKPOINTS
        .iter()
        .map(|&label| {
            let local = outcomes.iter().filter(|o| o.discarded.as_deref() == Some(label)).count() as u64;
            let local_ratio = ratio(local, alive);
            alive -= local;
            accumulated += local;
            let corrections =
                outcomes.iter().filter(|o| o.corrections.iter().any(|(l, _)| l == label)).count() as u64;
            SurvivalRow {
                checkpoint: label.to_string(),
                local_discard: local,
                local_ratio,
                accumulated_discard: accumulated,
                accumulated_ratio: ratio(accumulated, shots),
                corrections,
                correction_ratio: ratio(corrections, alive),
                survived: alive,
            }
        })
        .collect();
    SurvivalRecord { shots, rows }
}
