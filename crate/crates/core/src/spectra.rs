//! Green's-function and density-of-states reconstruction from fitted poles,
//! plus the direct histogram-based baselines.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::fci::{d_coefficients, DensityMatrix, NoBasis};
use crate::fit::TrialParams;
use crate::histogram::Histogram;
use crate::model::{Orbital, Sector};

pub const DEFAULT_SMEARING: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for EnergyGrid {
    fn default() -> Self {
        EnergyGrid { start: -2.0, stop: 2.0, step: 0.002 }
    }
}

impl EnergyGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || self.stop < self.start {
            return input("energy grid needs step > 0 and stop >= start");
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| self.start + i as f64 * self.step).collect())
    }
}

/// One pole of a single-spin Green's function block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    /// Excitation energy (eV).
    pub position: f64,
    /// Trace of the residue.
    pub weight: f64,
    /// Residue matrix over `(p, d)`.
    pub residue: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    pub rho_e: Vec<f64>,
    pub rho_h: Vec<f64>,
    pub rho_total: Vec<f64>,
    pub delta: f64,
    pub electron_poles: Vec<Pole>,
    pub hole_poles: Vec<Pole>,
}

impl Spectrum {
    /// Spectral weight of both spins, `2 Σ weight`.
    pub fn total_weight(&self) -> f64 {
        2.0 * self.electron_poles.iter().chain(&self.hole_poles).map(|p| p.weight).sum::<f64>()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("E,rho_e,rho_h,rho_total\n");
        for i in 0..self.energies.len() {
            s.push_str(&format!(
                "{:.6},{:.10},{:.10},{:.10}\n",
                self.energies[i], self.rho_e[i], self.rho_h[i], self.rho_total[i]
            ));
        }
        s
    }
}

pub fn lorentzian(e: f64, center: f64, delta: f64) -> f64 {
    delta / (PI * ((e - center).powi(2) + delta * delta))
}

/// Transition amplitudes `b[κ][λ]` from the mixing angle and NO coefficients.
pub fn amplitudes(params: &TrialParams, no: &NoBasis) -> [[f64; 2]; 2] {
    let d = d_coefficients(no, params.sector);
    let bt = params.no_amplitudes();
    let mut b = [[0.0; 2]; 2];
    for k in 0..2 {
        for lam in 0..2 {
            b[k][lam] = d[k][0] * bt[0][lam] + d[k][1] * bt[1][lam];
        }
    }
    b
}

pub fn poles(params: &TrialParams, no: &NoBasis, e_gs: f64) -> Vec<Pole> {
    let b = amplitudes(params, no);
    (0..2)
        .map(|lam| {
            let residue = std::array::from_fn(|k| std::array::from_fn(|kp| b[k][lam] * b[kp][lam]));
            let position = match params.sector {
                Sector::Electron => params.eps[lam] - e_gs,
                Sector::Hole => e_gs - params.eps[lam],
            };
            Pole { position, weight: b[0][lam].powi(2) + b[1][lam].powi(2), residue }
        })
        .collect()
}

/// DOS `-(1/π) Im tr G(E + iδ)` summed over spin.
pub fn reconstruct_gf(
    electron: &TrialParams,
    hole: &TrialParams,
    no: &NoBasis,
    e_gs: f64,
    grid: &EnergyGrid,
    delta: f64,
) -> Result<Spectrum> {
    if electron.sector != Sector::Electron || hole.sector != Sector::Hole {
        return input("expected electron and hole parameters in that order");
    }
    if !(delta > 0.0) {
        return input("smearing must be positive");
    }
    let energies = grid.points()?;
    let electron_poles = poles(electron, no, e_gs);
    let hole_poles = poles(hole, no, e_gs);
    let rho = |ps: &[Pole]| -> Vec<f64> {
        energies.iter().map(|&e| 2.0 * ps.iter().map(|p| p.weight * lorentzian(e, p.position, delta)).sum::<f64>()).collect()
    };
    let rho_e = rho(&electron_poles);
    let rho_h = rho(&hole_poles);
    let rho_total = rho_e.iter().zip(&rho_h).map(|(a, b)| a + b).collect();
    Ok(Spectrum { energies, rho_e, rho_h, rho_total, delta, electron_poles, hole_poles })
}

/// Excitation-axis weights of one shift's histograms: `(center, weight)` per bin.
fn bin_weights(histograms: &[Histogram], norms: [f64; 2], e_gs: f64, window_start: f64) -> Result<(Sector, f64, Vec<(f64, f64)>)> {
    let first = histograms.first().ok_or_else(|| crate::Error::Input("no histograms".into()))?;
    if histograms.iter().any(|h| h.shift != first.shift || h.settings != first.settings) {
        return input("direct reconstruction needs histograms of a single shift");
    }
    if histograms.iter().any(|h| h.sector != first.sector) {
        return input("direct reconstruction needs histograms of a single sector");
    }
    let s = first.settings;
    let period = s.period();
    let mut out = Vec::new();
    for orbital in Orbital::ALL {
        let hs: Vec<&Histogram> = histograms.iter().filter(|h| h.orbital == orbital).collect();
        if hs.len() != 1 {
            return input(format!("need exactly one histogram for orbital {orbital}"));
        }
        for (j, f) in hs[0].frequencies.iter().enumerate() {
            if *f == 0.0 {
                continue;
            }
            let eps = window_start + (s.e_orig() + j as f64 / s.t0 - window_start).rem_euclid(period);
            let center = match first.sector {
                Sector::Electron => eps - e_gs,
                Sector::Hole => e_gs - eps,
            };
            out.push((center, f * norms[orbital.index()]));
        }
    }
    Ok((first.sector, s.spacing(), out))
}

/// Piecewise-constant single-spin DOS: each bin spread uniformly over its cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarDos {
    pub sector: Sector,
    pub width: f64,
    /// `(center, weight)`.
    pub bars: Vec<(f64, f64)>,
}

impl BarDos {
    pub fn eval(&self, e: f64) -> f64 {
        self.bars
            .iter()
            .filter(|(c, _)| e >= c - 0.5 * self.width && e < c + 0.5 * self.width)
            .map(|(_, w)| w / self.width)
            .sum()
    }

    pub fn integral(&self) -> f64 {
        self.bars.iter().map(|(_, w)| w).sum()
    }
}

/// `norms[κ]` is the excitation norm `1 - γ_κκ` (electron) or `γ_κκ` (hole).
pub fn direct_dos_bars(histograms: &[Histogram], norms: [f64; 2], e_gs: f64, window_start: f64) -> Result<BarDos> {
    let (sector, width, bars) = bin_weights(histograms, norms, e_gs, window_start)?;
    Ok(BarDos { sector, width, bars })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianDos {
    pub sector: Sector,
    pub delta: f64,
    pub peaks: Vec<(f64, f64)>,
}

impl LorentzianDos {
    pub fn eval(&self, e: f64) -> f64 {
        self.peaks.iter().map(|(c, w)| w * lorentzian(e, *c, self.delta)).sum()
    }
}

pub fn direct_dos_lorentzian(
    histograms: &[Histogram],
    norms: [f64; 2],
    e_gs: f64,
    window_start: f64,
    delta: f64,
) -> Result<LorentzianDos> {
    if !(delta > 0.0) {
        return input(format!("smearing must be positive, got {delta}"));
    }
    let (sector, _, peaks) = bin_weights(histograms, norms, e_gs, window_start)?;
    Ok(LorentzianDos { sector, delta, peaks })
}

pub fn excitation_norms(gamma: &DensityMatrix, sector: Sector) -> [f64; 2] {
    std::array::from_fn(|k| match sector {
        Sector::Electron => 1.0 - gamma.gamma[k][k],
        Sector::Hole => gamma.gamma[k][k],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{QpeSettings, RteMode, Variant};
    use crate::fci::FciReport;
    use crate::fit::canonicalize;
    use crate::model::DimerParams;
    use approx::assert_abs_diff_eq;

    fn report() -> FciReport {
        FciReport::new(&DimerParams::reference(1.5))
    }

    fn oracle_spectrum(delta: f64) -> (FciReport, Spectrum) {
        let r = report();
        let s = reconstruct_gf(
            &TrialParams::oracle(&r.electron),
            &TrialParams::oracle(&r.hole),
            &r.natural_orbitals,
            r.ground_state.energy,
            &EnergyGrid::default(),
            delta,
        )
        .unwrap();
        (r, s)
    }

    #[test]
    fn oracle_poles_and_sum_rules() {
        let (r, s) = oracle_spectrum(DEFAULT_SMEARING);
        assert_abs_diff_eq!(s.total_weight(), 4.0, epsilon = 1e-10);
        for (poles, table) in [(&s.electron_poles, &r.electron), (&s.hole_poles, &r.hole)] {
            for lam in 0..2 {
                let want = match table.sector {
                    Sector::Electron => table.energies[lam] - r.ground_state.energy,
                    Sector::Hole => r.ground_state.energy - table.energies[lam],
                };
                assert_abs_diff_eq!(poles[lam].position, want, epsilon = 1e-10);
                for k in 0..2 {
                    assert_abs_diff_eq!(poles[lam].residue[k][k], table.amplitudes[k][lam].powi(2), epsilon = 1e-10);
                }
            }
            for k in 0..2 {
                let w: f64 = poles.iter().map(|p| p.residue[k][k]).sum();
                let g = r.density_matrix.gamma[k][k];
                let want = if table.sector == Sector::Electron { 1.0 - g } else { g };
                assert_abs_diff_eq!(w, want, epsilon = 1e-10);
            }
        }
        assert!(s.rho_total.iter().all(|&x| x >= -1e-12));
        assert_eq!(s.energies.len(), 2001);
    }

    #[test]
    fn peak_height_scales_inversely_with_smearing() {
        let (_, a) = oracle_spectrum(0.02);
        let (_, b) = oracle_spectrum(0.04);
        let p = a.electron_poles[0];
        let h = |s: &Spectrum, d: f64| 2.0 * s.electron_poles.iter().map(|q| q.weight * lorentzian(p.position, q.position, d)).sum::<f64>();
        let ratio = h(&a, 0.02) / h(&b, 0.04);
        assert!((ratio - 2.0).abs() < 0.05, "{ratio}");
        assert_abs_diff_eq!(lorentzian(0.0, 0.0, 0.02), 2.0 * lorentzian(0.0, 0.0, 0.04), epsilon = 1e-12);
    }

    #[test]
    fn canonical_form_gives_same_spectrum() {
        let r = report();
        let raw = TrialParams::new(2.7, 0.1, -0.6, Sector::Electron);
        let h = TrialParams::oracle(&r.hole);
        let grid = EnergyGrid { start: -1.0, stop: 2.0, step: 0.01 };
        let a = reconstruct_gf(&raw, &h, &r.natural_orbitals, -1.7, &grid, 0.02).unwrap();
        let b = reconstruct_gf(&canonicalize(&raw), &h, &r.natural_orbitals, -1.7, &grid, 0.02).unwrap();
        for (x, y) in a.rho_total.iter().zip(&b.rho_total) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    fn one_shift(sector: Sector, f: [Vec<f64>; 2]) -> Vec<Histogram> {
        Orbital::ALL
            .iter()
            .zip(f)
            .map(|(&o, f)| {
                Histogram::from_distribution(Variant::Phys1a, sector, o, QpeSettings::default(), RteMode::Exact, f).unwrap()
            })
            .collect()
    }

    #[test]
    fn bar_integrals_follow_norms() {
        let r = report();
        let spread = vec![0.1, 0.2, 0.05, 0.05, 0.3, 0.1, 0.1, 0.1];
        for sector in Sector::ALL {
            let norms = excitation_norms(&r.density_matrix, sector);
            let hs = one_shift(sector, [spread.clone(), spread.iter().rev().copied().collect()]);
            let bars = direct_dos_bars(&hs, norms, r.ground_state.energy, -0.8).unwrap();
            assert_abs_diff_eq!(bars.integral(), 1.0, epsilon = 1e-10);
            let lor = direct_dos_lorentzian(&hs, norms, r.ground_state.energy, -0.8, 0.02).unwrap();
            let grid: Vec<f64> = (0..400_001).map(|i| -20.0 + i as f64 * 1e-4).collect();
            let mass: f64 = grid.iter().map(|&e| lor.eval(e)).sum::<f64>() * 1e-4;
            assert!((mass - 1.0).abs() < 0.01, "{mass}");
        }
    }

    #[test]
    fn single_bin_is_one_box() {
        let mut f = vec![0.0; 8];
        f[2] = 1.0;
        let hs = one_shift(Sector::Electron, [f.clone(), f]);
        let bars = direct_dos_bars(&hs, [0.5, 0.5], 0.0, -0.8).unwrap();
        assert_eq!(bars.bars.len(), 2);
        let c = bars.bars[0].0;
        assert_abs_diff_eq!(c, -0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(bars.eval(c + 0.09), 1.0 / 0.2, epsilon = 1e-12);
        assert_eq!(bars.eval(c + 0.11), 0.0);
    }

    #[test]
    fn input_errors() {
        let r = report();
        let f = vec![0.125; 8];
        let mut hs = one_shift(Sector::Electron, [f.clone(), f]);
        assert!(direct_dos_lorentzian(&hs, [0.5; 2], 0.0, -0.8, 0.0).is_err());
        hs[1].settings = hs[1].settings.with_shift(1);
        hs[1].shift = 1;
        assert!(direct_dos_bars(&hs, [0.5; 2], 0.0, -0.8).is_err());
        assert!(reconstruct_gf(
            &TrialParams::oracle(&r.hole),
            &TrialParams::oracle(&r.hole),
            &r.natural_orbitals,
            0.0,
            &EnergyGrid::default(),
            0.02
        )
        .is_err());
    }
}
