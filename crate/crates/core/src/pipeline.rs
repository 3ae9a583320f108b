//! End-to-end workflow: model → circuits → histograms → fits → spectra.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuits::{self, QpeSettings, RteMode, Variant};
use crate::error::{input, Result};
use crate::fci::{prep_angle, FciReport};
use crate::fit::{optimize, CostFunction, FitResult, OptimizerConfig};
use crate::fit::kernel::qpe_kernel;
use crate::histogram::Histogram;
use crate::model::{qubit_hamiltonian, DimerParams, Orbital, QubitHamiltonian, Sector, DEFAULT_DELTA_MU};
use crate::simulator::{exact_distribution, sample, tally, Circuit, CircuitOutcome, NoiseModel};
use crate::steane::{survival_report, SurvivalRecord};

/// One flat, serializable description of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub delta_mu: f64,
    /// Use the rounded reference dimer parameters instead of averaging the Wannier data.
    pub reference_params: bool,
    pub qpe: QpeSettings,
    pub rte: RteMode,
    pub noise: NoiseModel,
    pub shots: u64,
    pub seed: u64,
    pub variant: Variant,
    /// Shift indices to run; all `qpe.n_settings` shifts when empty.
    pub shifts: Vec<usize>,
    pub optimizer: OptimizerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            delta_mu: DEFAULT_DELTA_MU,
            reference_params: true,
            qpe: QpeSettings::default(),
            rte: RteMode::Exact,
            noise: NoiseModel::NOISELESS,
            shots: 500,
            seed: 0,
            variant: Variant::Phys1a,
            shifts: Vec::new(),
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.qpe.validate()?;
        self.rte.validate()?;
        self.noise.validate()?;
        if self.shots == 0 {
            return input("shots must be positive");
        }
        if let Some(s) = self.shifts.iter().find(|&&s| s >= self.qpe.n_settings) {
            return input(format!("shift {s} outside 0..{}", self.qpe.n_settings));
        }
        Ok(())
    }

    pub fn shift_list(&self) -> Vec<usize> {
        if self.shifts.is_empty() {
            (0..self.qpe.n_settings).collect()
        } else {
            let mut s = self.shifts.clone();
            s.sort_unstable();
            s.dedup();
            s
        }
    }

    pub fn dimer(&self) -> Result<DimerParams> {
        if self.reference_params {
            Ok(DimerParams::reference(self.delta_mu))
        } else {
            crate::model::average_wannier(&crate::model::WannierSet::bundled(), self.delta_mu)
        }
    }

    pub fn settings(&self) -> Vec<Setting> {
        let mut out = Vec::new();
        for sector in Sector::ALL {
            for orbital in Orbital::ALL {
                for shift in self.shift_list() {
                    out.push(Setting { sector, orbital, shift });
                }
            }
        }
        out
    }

    /// Lower edge of the fit window: one period centred on `h0` of the sector.
    pub fn window_start(&self, sector: Sector) -> Result<f64> {
        let h = qubit_hamiltonian(&self.dimer()?, sector);
        Ok(h.h0 - 0.5 * self.qpe.period())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Setting {
    pub sector: Sector,
    pub orbital: Orbital,
    pub shift: usize,
}

impl Setting {
    /// Stable index used to derive per-setting random streams.
    pub fn index(&self) -> u64 {
        let s = match self.sector {
            Sector::Electron => 0,
            Sector::Hole => 1,
        };
        ((s * 2 + self.orbital.index() as u64) << 16) | self.shift as u64
    }
}

/// SplitMix64 step, used to decorrelate per-setting seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub struct Workflow {
    pub config: RunConfig,
    pub dimer: DimerParams,
    pub report: FciReport,
}

impl Workflow {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let dimer = config.dimer()?;
        let report = FciReport::new(&dimer);
        Ok(Workflow { config, dimer, report })
    }

    pub fn hamiltonian(&self, sector: Sector) -> QubitHamiltonian {
        qubit_hamiltonian(&self.dimer, sector)
    }

    pub fn circuit(&self, setting: &Setting, variant: Variant) -> Result<Circuit> {
        let gs = &self.report.ground_state;
        let angle = prep_angle(gs, setting.sector, setting.orbital)?;
        let qpe = self.config.qpe.with_shift(setting.shift);
        circuits::build(variant, &self.hamiltonian(setting.sector), &qpe, angle, self.config.rte)
    }

    fn run(&self, setting: &Setting) -> Result<(Histogram, Vec<CircuitOutcome>)> {
        let cfg = &self.config;
        let c = self.circuit(setting, cfg.variant)?;
        let seed = derive_seed(cfg.seed, setting.index());
        let outcomes = sample(&c, &cfg.noise, cfg.shots as usize, seed)?;
        let h = Histogram::from_counts(
            cfg.variant,
            setting.sector,
            setting.orbital,
            cfg.qpe.with_shift(setting.shift),
            cfg.rte,
            cfg.noise,
            seed,
            cfg.shots,
            tally(&c, &outcomes),
        )?;
        Ok((h, outcomes))
    }

    /// Sampled histograms for every setting, plus the survival record of a
    /// logical run.
    pub fn sample_all(&self) -> Result<(Vec<Histogram>, Option<SurvivalRecord>)> {
        let mut hs = Vec::new();
        let mut all = Vec::new();
        for setting in self.config.settings() {
            let (h, outcomes) = self.run(&setting)?;
            hs.push(h);
            if self.config.variant == Variant::Log1a {
                all.extend(outcomes);
            }
        }
        let survival = (self.config.variant == Variant::Log1a).then(|| survival_report(&all));
        Ok((hs, survival))
    }

    /// Noiseless exact distributions for every setting.
    pub fn exact_all(&self) -> Result<Vec<Histogram>> {
        self.config
            .settings()
            .par_iter()
            .map(|s| {
                let d = exact_distribution(&self.circuit(s, self.config.variant)?)?;
                Histogram::from_distribution(
                    self.config.variant,
                    s.sector,
                    s.orbital,
                    self.config.qpe.with_shift(s.shift),
                    self.config.rte,
                    d.probabilities,
                )
            })
            .collect()
    }

    /// Classically evaluated distributions: exact pole weights convolved with the kernel.
    pub fn analytic_all(&self) -> Result<Vec<Histogram>> {
        self.config
            .settings()
            .iter()
            .map(|s| {
                let t = self.report.table(s.sector);
                let qpe = self.config.qpe.with_shift(s.shift);
                let mut f = vec![0.0; qpe.n_val()];
                for lam in 0..2 {
                    let k = qpe_kernel(t.energies[lam], &qpe);
                    f.iter_mut().zip(&k).for_each(|(x, kj)| *x += t.probability(s.orbital, lam) * kj);
                }
                Histogram::from_distribution(Variant::Phys3a, s.sector, s.orbital, qpe, RteMode::Exact, f)
            })
            .collect()
    }

    pub fn cost(&self, histograms: &[Histogram], sector: Sector) -> Result<CostFunction> {
        let table = self.report.table(sector);
        let shifts = self.config.shift_list();
        CostFunction::for_shifts(histograms, table, self.config.optimizer.discrepancy, &shifts)
    }

    pub fn fit(&self, histograms: &[Histogram], sector: Sector) -> Result<FitResult> {
        let cost = self.cost(histograms, sector)?;
        let mut opt = self.config.optimizer;
        if opt.window_start.is_none() {
            opt.window_start = Some(self.config.window_start(sector)?);
        }
        let sector_seed = derive_seed(self.config.seed, 0xF17 + sector as u64);
        optimize(&cost, &opt, sector_seed)
    }
}

/// Mean L1 distance between matching histograms of two sets.
pub fn mean_l1(data: &[Histogram], reference: &[Histogram], sector: Sector) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0;
    for h in data.iter().filter(|h| h.sector == sector) {
        let r = reference
            .iter()
            .find(|r| r.sector == h.sector && r.orbital == h.orbital && r.shift == h.shift)
            .ok_or_else(|| crate::Error::Input(format!("no reference for {} {} s={}", h.sector, h.orbital, h.shift)))?;
        total += crate::fit::l1_distance(&h.frequencies, &r.frequencies)?;
        n += 1;
    }
    if n == 0 {
        return input(format!("no histograms for sector {sector}"));
    }
    Ok(total / n as f64)
}
