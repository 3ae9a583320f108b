//! Two-orbital (p, d) dimer model and its single-qubit reductions.
//!
//! The five Wannier orbitals split into a p class (`pa`, `pb`) and a d class
//! (`d0`, `d1`, `d2`). Class averages give the dimer parameters, and the two
//! two-dimensional excitation subspaces of the dimer give one qubit Hamiltonian
//! `h0 I + hx X + hz Z` each.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

pub const P_LABELS: [&str; 2] = ["pa", "pb"];
pub const D_LABELS: [&str; 3] = ["d0", "d1", "d2"];

/// Default chemical-potential shift in eV.
pub const DEFAULT_DELTA_MU: f64 = 1.5;

const BUNDLED_WANNIER: &str = include_str!("../data/wannier.json");

/// Excitation sector: an added spin-up electron or a removed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Electron,
    Hole,
}

impl Sector {
    pub const ALL: [Sector; 2] = [Sector::Electron, Sector::Hole];

    pub fn short(self) -> &'static str {
        match self {
            Sector::Electron => "e",
            Sector::Hole => "h",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "e" | "electron" => Ok(Sector::Electron),
            "h" | "hole" => Ok(Sector::Hole),
            other => input(format!("unknown sector `{other}`")),
        }
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// Effective orbital of the dimer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orbital {
    P,
    D,
}

impl Orbital {
    pub const ALL: [Orbital; 2] = [Orbital::P, Orbital::D];

    pub fn index(self) -> usize {
        match self {
            Orbital::P => 0,
            Orbital::D => 1,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Orbital::P => "p",
            Orbital::D => "d",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "p" => Ok(Orbital::P),
            "d" => Ok(Orbital::D),
            other => input(format!("unknown orbital `{other}`")),
        }
    }
}

impl fmt::Display for Orbital {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// Wannier-orbital data: on-site energies, transfer integrals and repulsions (eV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WannierSet {
    pub orbital_energies: BTreeMap<String, f64>,
    /// Each pair is listed once; the lookup is symmetric.
    pub transfers: Vec<(String, String, f64)>,
    pub bare_repulsion: BTreeMap<String, f64>,
    pub screened_repulsion: BTreeMap<String, f64>,
}

impl WannierSet {
    /// The five-orbital table shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_WANNIER).expect("bundled Wannier data is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: WannierSet = serde_json::from_str(text)?;
        set.validate()?;
        Ok(set)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        for label in P_LABELS.iter().chain(D_LABELS.iter()) {
            for map in [&self.orbital_energies, &self.screened_repulsion, &self.bare_repulsion] {
                if !map.contains_key(*label) {
                    return Err(Error::MissingLabel((*label).to_string()));
                }
            }
            for map in [&self.screened_repulsion, &self.bare_repulsion] {
                if map[*label] <= 0.0 {
                    return input(format!("repulsion for `{label}` must be positive"));
                }
            }
        }
        for (i, (a, b, v)) in self.transfers.iter().enumerate() {
            for (c, d, w) in &self.transfers[i + 1..] {
                let same = (a == c && b == d) || (a == d && b == c);
                if same && v != w {
                    return input(format!("asymmetric transfer between `{a}` and `{b}`"));
                }
            }
        }
        Ok(())
    }

    pub fn transfer(&self, a: &str, b: &str) -> Option<f64> {
        self.transfers
            .iter()
            .find(|(x, y, _)| (x == a && y == b) || (x == b && y == a))
            .map(|t| t.2)
    }
}

/// Parameters of the two-orbital Hubbard dimer (eV).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerParams {
    pub eps_p: f64,
    pub eps_d: f64,
    pub t_pd: f64,
    pub u_p: f64,
    pub u_d: f64,
    pub delta_mu: f64,
}

impl DimerParams {
    /// Rounded class-averaged parameters as tabulated for the CO/Fe dimer.
    pub fn reference(delta_mu: f64) -> Self {
        DimerParams { eps_p: 1.021, eps_d: 0.292, t_pd: -0.195, u_p: 1.96, u_d: 2.22, delta_mu }
    }

    /// 2x2 Hamiltonian of the three-electron `S_z = 1/2` subspace in the basis
    /// (p↑ d↑ p↓, p↑ d↑ d↓).
    pub fn electron_block(&self) -> [[f64; 2]; 2] {
        let dm = self.delta_mu;
        [
            [2.0 * self.eps_p + self.eps_d - 3.0 * dm + self.u_p, self.t_pd],
            [self.t_pd, self.eps_p + 2.0 * self.eps_d - 3.0 * dm + self.u_d],
        ]
    }

    /// 2x2 Hamiltonian of the one-electron `S_z = -1/2` subspace in the basis (p↓, d↓).
    pub fn hole_block(&self) -> [[f64; 2]; 2] {
        [[self.eps_p - self.delta_mu, self.t_pd], [self.t_pd, self.eps_d - self.delta_mu]]
    }

    pub fn block(&self, sector: Sector) -> [[f64; 2]; 2] {
        match sector {
            Sector::Electron => self.electron_block(),
            Sector::Hole => self.hole_block(),
        }
    }
}

/// Class averages of the Wannier data. `delta_mu` is passed through.
pub fn average_wannier(w: &WannierSet, delta_mu: f64) -> Result<DimerParams> {
    w.validate()?;
    let mean = |labels: &[&str], map: &BTreeMap<String, f64>| {
        labels.iter().map(|l| map[*l]).sum::<f64>() / labels.len() as f64
    };
    let mut transfers = Vec::with_capacity(P_LABELS.len() * D_LABELS.len());
    for p in P_LABELS {
        for d in D_LABELS {
            let t = w
                .transfer(p, d)
                .ok_or_else(|| Error::Input(format!("missing transfer between `{p}` and `{d}`")))?;
            transfers.push(t);
        }
    }
    Ok(DimerParams {
        eps_p: mean(&P_LABELS, &w.orbital_energies),
        eps_d: mean(&D_LABELS, &w.orbital_energies),
        t_pd: transfers.iter().sum::<f64>() / transfers.len() as f64,
        u_p: mean(&P_LABELS, &w.screened_repulsion),
        u_d: mean(&D_LABELS, &w.screened_repulsion),
        delta_mu,
    })
}

/// `h0 I + hx X + hz Z` acting on the qubit that encodes one excitation subspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitHamiltonian {
    pub h0: f64,
    pub hx: f64,
    pub hz: f64,
    pub sector: Sector,
}

impl QubitHamiltonian {
    pub fn new(h0: f64, hx: f64, hz: f64, sector: Sector) -> Self {
        QubitHamiltonian { h0, hx, hz, sector }
    }

    /// Half-splitting `sqrt(hx^2 + hz^2)`.
    pub fn radius(&self) -> f64 {
        self.hx.hypot(self.hz)
    }

    /// `(low, high)` eigenvalues.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let r = self.radius();
        (self.h0 - r, self.h0 + r)
    }

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.h0 + self.hz, self.hx], [self.hx, self.h0 - self.hz]]
    }
}

pub fn qubit_hamiltonian(d: &DimerParams, sector: Sector) -> QubitHamiltonian {
    let m = d.block(sector);
    QubitHamiltonian {
        h0: 0.5 * (m[0][0] + m[1][1]),
        hx: m[0][1],
        hz: 0.5 * (m[0][0] - m[1][1]),
        sector,
    }
}

pub fn eigenvalues(h: &QubitHamiltonian) -> (f64, f64) {
    h.eigenvalues()
}
