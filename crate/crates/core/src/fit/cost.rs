//! Trial distributions and the shift-averaged discrepancy cost.

use serde::{Deserialize, Serialize};

use super::kernel::kernel_into;
use crate::circuits::QpeSettings;
use crate::error::{input, Error, Result};
use crate::fci::ExcitationTable;
use crate::histogram::Histogram;
use crate::model::{Orbital, Sector};

/// Mixing angle and the two pole energies of one excitation sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub theta: f64,
    pub eps: [f64; 2],
    pub sector: Sector,
}

impl TrialParams {
    pub fn new(theta: f64, eps0: f64, eps1: f64, sector: Sector) -> Self {
        TrialParams { theta, eps: [eps0, eps1], sector }
    }

    /// Exact parameters from the diagonalization.
    pub fn oracle(table: &ExcitationTable) -> Self {
        TrialParams { theta: table.oracle_theta, eps: table.energies, sector: table.sector }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.theta, self.eps[0], self.eps[1]]
    }

    pub fn from_array(x: [f64; 3], sector: Sector) -> Self {
        TrialParams { theta: x[0], eps: [x[1], x[2]], sector }
    }

    /// Natural-orbital transition amplitudes `b̃[ν][λ]`.
    pub fn no_amplitudes(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.theta.sin_cos();
        [[c, s], [-s, c]]
    }
}

/// `P_λ(ϑ)` for one orbital from its `S[ν][ν']` block.
pub fn pole_probabilities(theta: f64, s: &[[f64; 2]; 2]) -> [f64; 2] {
    let (sn, c) = theta.sin_cos();
    let cross = (s[0][1] + s[1][0]) * c * sn;
    [s[0][0] * c * c - cross + s[1][1] * sn * sn, s[0][0] * sn * sn + cross + s[1][1] * c * c]
}

fn checked_probabilities(theta: f64, s: &[[f64; 2]; 2]) -> Result<[f64; 2]> {
    let p = pole_probabilities(theta, s);
    if p.iter().any(|&x| !(-1e-9..=1.0 + 1e-9).contains(&x)) {
        return Err(Error::Internal(format!("pole probabilities {p:?} outside [0, 1]")));
    }
    Ok(p)
}

/// Expected histogram for orbital `κ` at one shift under trial parameters.
pub fn trial_distribution(
    params: &TrialParams,
    orbital: Orbital,
    settings: &QpeSettings,
    table: &ExcitationTable,
) -> Result<Vec<f64>> {
    if params.sector != table.sector {
        return input("trial parameters and excitation table belong to different sectors");
    }
    let p = checked_probabilities(params.theta, &table.s_matrix[orbital.index()])?;
    let mut out = vec![0.0; settings.n_val()];
    let mut k = vec![0.0; settings.n_val()];
    for lam in 0..2 {
        kernel_into(params.eps[lam], settings.e_orig(), settings.t0, &mut k);
        out.iter_mut().zip(&k).for_each(|(o, kj)| *o += p[lam] * kj);
    }
    Ok(out)
}

fn check_normalized(h: &[f64]) -> Result<()> {
    let total: f64 = h.iter().sum();
    if (total - 1.0).abs() > 1e-9 || h.iter().any(|&x| x < -1e-12) {
        return input(format!("distribution is not normalized (sum {total})"));
    }
    Ok(())
}

/// Half the L1 norm of the difference of two normalized distributions.
pub fn l1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return input("distributions have different lengths");
    }
    check_normalized(a)?;
    check_normalized(b)?;
    Ok(l1_unchecked(a, b))
}

fn l1_unchecked(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discrepancy {
    #[default]
    L1,
    /// `1 - (Σ √(p q))²`.
    Infidelity,
    /// `-Σ f ln p`, averaged per histogram.
    Nll,
}

impl Discrepancy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Discrepancy::L1),
            "infidelity" => Ok(Discrepancy::Infidelity),
            "nll" => Ok(Discrepancy::Nll),
            other => input(format!("unknown discrepancy `{other}`")),
        }
    }

    fn eval(self, model: &[f64], data: &[f64]) -> f64 {
        match self {
            Discrepancy::L1 => l1_unchecked(model, data),
            Discrepancy::Infidelity => {
                let bc: f64 = model.iter().zip(data).map(|(p, q)| (p.max(0.0) * q.max(0.0)).sqrt()).sum();
                1.0 - bc * bc
            }
            Discrepancy::Nll => -data.iter().zip(model).map(|(f, p)| f * (p.max(0.0) + 1e-12).ln()).sum::<f64>(),
        }
    }
}

struct Term {
    orbital: usize,
    e_orig: f64,
    frequencies: Vec<f64>,
}

/// Cost over a fixed set of histograms of one sector, averaged over `(s, κ)`.
pub struct CostFunction {
    pub sector: Sector,
    pub settings: QpeSettings,
    pub discrepancy: Discrepancy,
    s_matrix: [[[f64; 2]; 2]; 2],
    terms: Vec<Term>,
    shifts: Vec<usize>,
}

impl CostFunction {
    /// Uses every shift present in `histograms`; each needs both orbitals.
    pub fn new(histograms: &[Histogram], table: &ExcitationTable, discrepancy: Discrepancy) -> Result<Self> {
        let mut shifts: Vec<usize> =
            histograms.iter().filter(|h| h.sector == table.sector).map(|h| h.shift).collect();
        shifts.sort_unstable();
        shifts.dedup();
        Self::for_shifts(histograms, table, discrepancy, &shifts)
    }

    pub fn for_shifts(
        histograms: &[Histogram],
        table: &ExcitationTable,
        discrepancy: Discrepancy,
        shifts: &[usize],
    ) -> Result<Self> {
        if shifts.is_empty() {
            return input(format!("no histograms for sector {}", table.sector));
        }
        let mut terms = Vec::new();
        let mut settings = None;
        for &s in shifts {
            for orbital in Orbital::ALL {
                let h = histograms
                    .iter()
                    .find(|h| h.sector == table.sector && h.orbital == orbital && h.shift == s)
                    .ok_or_else(|| Error::Input(format!("missing histogram ({}, {orbital}, s={s})", table.sector)))?;
                let base = QpeSettings { shift: 0, ..h.settings };
                match settings {
                    None => settings = Some(base),
                    Some(prev) if prev != base => return input("histograms use different grid settings"),
                    _ => {}
                }
                check_normalized(&h.frequencies)?;
                terms.push(Term {
                    orbital: orbital.index(),
                    e_orig: h.settings.e_orig(),
                    frequencies: h.frequencies.clone(),
                });
            }
        }
        Ok(CostFunction {
            sector: table.sector,
            settings: settings.expect("at least one shift"),
            discrepancy,
            s_matrix: table.s_matrix,
            terms,
            shifts: shifts.to_vec(),
        })
    }

    pub fn shifts(&self) -> &[usize] {
        &self.shifts
    }

    pub fn eval(&self, p: &TrialParams) -> f64 {
        self.eval_raw(p.theta, p.eps)
    }

    pub fn eval_raw(&self, theta: f64, eps: [f64; 2]) -> f64 {
        let n = self.settings.n_val();
        let mut model = vec![0.0; n];
        let mut k = vec![0.0; n];
        let probs = [pole_probabilities(theta, &self.s_matrix[0]), pole_probabilities(theta, &self.s_matrix[1])];
        let mut total = 0.0;
        for t in &self.terms {
            model.iter_mut().for_each(|m| *m = 0.0);
            for lam in 0..2 {
                kernel_into(eps[lam], t.e_orig, self.settings.t0, &mut k);
                let w = probs[t.orbital][lam];
                model.iter_mut().zip(&k).for_each(|(m, kj)| *m += w * kj);
            }
            total += self.discrepancy.eval(&model, &t.frequencies);
        }
        total / self.terms.len() as f64
    }
}
