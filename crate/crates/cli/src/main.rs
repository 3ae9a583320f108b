//! `qavg`: file-in/file-out driver for the vernier-averaged QPE workflow.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use qavg_core::circuits::{RteMode, Variant};
use qavg_core::fci::FciReport;
use qavg_core::fit::{landscape_scan, CostFunction, Discrepancy, FitResult, Param, Plane, TrialParams};
use qavg_core::histogram::{load_histograms, Histogram};
use qavg_core::model::Sector;
use qavg_core::pipeline::{mean_l1, RunConfig, Workflow};
use qavg_core::simulator::NoiseModel;
use qavg_core::spectra::{
    direct_dos_bars, direct_dos_lorentzian, excitation_norms, reconstruct_gf, EnergyGrid, Pole, DEFAULT_SMEARING,
};

#[derive(Parser)]
#[command(name = "qavg", version, about = "Vernier-averaged quantum phase estimation for a two-orbital dimer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact diagonalization report: ground state, density matrix, excitation tables.
    Fci(Common),
    /// Sample every (sector, orbital, shift) circuit and write histograms.
    Sample(Common),
    /// Exact noiseless outcome distributions in histogram format.
    ExactDist(Common),
    /// Fit the averaged cost to a directory of histograms.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Histogram directory or single file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        restarts: Option<usize>,
        /// l1, infidelity or nll.
        #[arg(long)]
        discrepancy: Option<String>,
    },
    /// Density of states from fitted (or exact) parameters.
    Dos {
        #[command(flatten)]
        common: Common,
        /// Fit result written by `optimize`.
        #[arg(long, conflicts_with = "oracle")]
        fit: Option<PathBuf>,
        /// Use the exact parameters instead of a fit.
        #[arg(long)]
        oracle: bool,
        /// Lorentzian half-width.
        #[arg(long, default_value_t = DEFAULT_SMEARING)]
        delta: f64,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Direct DOS from histograms, one curve per sector and shift.
    Direct {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// Lorentzian half-width; 0 keeps the raw bars.
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Scan the cost over a plane of the parameter torus.
    Landscape {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// e or h.
        #[arg(long, default_value = "e")]
        sector: String,
        /// Parameter held fixed: theta, eps0 or eps1.
        #[arg(long, default_value = "theta")]
        fixed: String,
        /// Value of the fixed parameter; the fitted optimum when omitted.
        #[arg(long, allow_hyphen_values = true)]
        value: Option<f64>,
        /// Points per axis.
        #[arg(long, default_value_t = 200)]
        grid: usize,
    },
    /// Run the logical circuit and write the per-checkpoint survival record.
    Survival(Common),
}

/// Flags shared by every command; each overrides the config file.
#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// phys3a, phys1a or log1a.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// p1,p2,pm, or "none".
    #[arg(long, value_parser = parse_noise)]
    noise: Option<NoiseModel>,
    /// exact or trotter:<r>.
    #[arg(long)]
    rte: Option<RteMode>,
    #[arg(long, allow_hyphen_values = true)]
    delta_mu: Option<f64>,
    /// Comma-separated shift indices.
    #[arg(long, value_delimiter = ',')]
    shifts: Option<Vec<usize>>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Clone, Copy)]
struct GridArgs {
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    e_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    e_max: f64,
    #[arg(long, default_value_t = 0.002)]
    e_step: f64,
}

impl GridArgs {
    fn grid(&self) -> EnergyGrid {
        EnergyGrid { start: self.e_min, stop: self.e_max, step: self.e_step }
    }
}

fn parse_noise(s: &str) -> Result<NoiseModel, String> {
    if s == "none" {
        return Ok(NoiseModel::NOISELESS);
    }
    let p: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad probability `{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    match p[..] {
        [p1, p2, pm] => NoiseModel::new(p1, p2, pm).map_err(|e| e.to_string()),
        _ => Err(format!("expected p1,p2,pm, got `{s}`")),
    }
}

impl Common {
    fn resolve(&self, base: Option<RunConfig>) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
            }
            None => base.unwrap_or_default(),
        };
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(s) = self.shots {
            cfg.shots = s;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.noise {
            cfg.noise = n;
        }
        if let Some(r) = self.rte {
            cfg.rte = r;
        }
        if let Some(d) = self.delta_mu {
            cfg.delta_mu = d;
        }
        if let Some(s) = &self.shifts {
            cfg.shifts = s.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

/// CSV with the resolved config as a leading comment line.
fn write_csv(path: &Path, config: &RunConfig, body: &str) -> Result<()> {
    let text = format!("# config {}\n{body}", serde_json::to_string(config)?);
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct FciFile<'a> {
    config: &'a RunConfig,
    report: &'a FciReport,
}

#[derive(Serialize, Deserialize)]
struct FitFile {
    config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    electron: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    hole: Option<FitResult>,
}

#[derive(Serialize)]
struct PoleFile<'a> {
    config: &'a RunConfig,
    ground_state_energy: f64,
    smearing: f64,
    electron: &'a [Pole],
    hole: &'a [Pole],
}

/// Histogram directories carry the config of the run that produced them.
fn input_base(input: &Path) -> Result<Option<RunConfig>> {
    let path = if input.is_dir() { input.join("config.json") } else { input.with_file_name("config.json") };
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path)?;
    Ok(Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?))
}

/// Loads histograms and aligns the circuit settings of `cfg` with them.
fn load_input(input: &Path, cfg: &mut RunConfig) -> Result<Vec<Histogram>> {
    let hs = load_histograms(input).with_context(|| format!("loading histograms from {}", input.display()))?;
    let first = hs.first().with_context(|| format!("no histograms in {}", input.display()))?;
    if hs.iter().any(|h| h.settings.with_shift(0) != first.settings.with_shift(0) || h.rte != first.rte) {
        bail!("histograms in {} mix circuit settings", input.display());
    }
    cfg.qpe = first.settings.with_shift(0);
    cfg.rte = first.rte;
    cfg.variant = first.variant;
    if let Some(n) = first.noise {
        cfg.noise = n;
    }
    if cfg.shifts.is_empty() {
        let mut s: Vec<usize> = hs.iter().map(|h| h.shift).collect();
        s.sort_unstable();
        s.dedup();
        cfg.shifts = s;
    }
    cfg.validate()?;
    Ok(hs)
}

fn sectors_in(hs: &[Histogram]) -> Vec<Sector> {
    Sector::ALL.into_iter().filter(|s| hs.iter().any(|h| h.sector == *s)).collect()
}

fn write_histograms(out: &Path, cfg: &RunConfig, hs: &[Histogram]) -> Result<()> {
    write_json(&out.join("config.json"), cfg)?;
    for h in hs {
        h.write(out.join(h.file_name()))?;
    }
    Ok(())
}

fn cmd_fci(common: &Common) -> Result<()> {
    let cfg = common.resolve(None)?;
    let w = Workflow::new(cfg)?;
    let gs = &w.report.ground_state;
    if !gs.in_two_electron_sector() {
        eprintln!("warning: the global ground state lies outside the two-electron sector at this shift");
    }
    let path = common.out_dir()?.join("fci.json");
    write_json(&path, &FciFile { config: &w.config, report: &w.report })?;
    println!("E_gs = {:.7} eV -> {}", gs.energy, path.display());
    Ok(())
}

fn cmd_sample(common: &Common) -> Result<()> {
    let w = Workflow::new(common.resolve(None)?)?;
    let (hs, survival) = w.sample_all()?;
    let out = common.out_dir()?;
    write_histograms(out, &w.config, &hs)?;
    if let Some(record) = survival {
        write_csv(&out.join("survival.csv"), &w.config, &record.to_csv()?)?;
        write_json(&out.join("survival.json"), &record)?;
    }
    for h in &hs {
        println!("{}: accepted {}/{}", h.file_name(), h.accepted, h.shots);
    }
    Ok(())
}

fn cmd_exact(common: &Common) -> Result<()> {
    let w = Workflow::new(common.resolve(None)?)?;
    let hs = w.exact_all()?;
    write_histograms(common.out_dir()?, &w.config, &hs)?;
    println!("{} exact distributions -> {}", hs.len(), common.out.display());
    Ok(())
}

fn cmd_optimize(common: &Common, input: &Path, restarts: Option<usize>, discrepancy: Option<&str>) -> Result<()> {
    let mut cfg = common.resolve(input_base(input)?)?;
    let hs = load_input(input, &mut cfg)?;
    if let Some(r) = restarts {
        cfg.optimizer.restarts = r;
    }
    if let Some(d) = discrepancy {
        cfg.optimizer.discrepancy = Discrepancy::parse(d)?;
    }
    let w = Workflow::new(cfg)?;
    let reference = Workflow::new(RunConfig { variant: Variant::Phys3a, ..w.config.clone() })?.exact_all()?;
    let mut file = FitFile { config: w.config.clone(), electron: None, hole: None };
    for sector in sectors_in(&hs) {
        let mut fit = w.fit(&hs, sector)?;
        fit.reference_l1 = Some(mean_l1(&hs, &reference, sector)?);
        println!(
            "{sector}: theta {:.4} eps ({:.4}, {:.4}) cost {:.4}",
            fit.params.theta, fit.params.eps[0], fit.params.eps[1], fit.cost
        );
        match sector {
            Sector::Electron => file.electron = Some(fit),
            Sector::Hole => file.hole = Some(fit),
        }
    }
    write_json(&common.out_dir()?.join("fit.json"), &file)
}

fn cmd_dos(common: &Common, fit: Option<&Path>, oracle: bool, delta: f64, grid: GridArgs) -> Result<()> {
    let fitted: Option<FitFile> = match fit {
        Some(p) => Some(serde_json::from_str(&fs::read_to_string(p)?).with_context(|| format!("parsing {}", p.display()))?),
        None if oracle => None,
        None => bail!("dos needs --fit <fit.json> or --oracle"),
    };
    let cfg = common.resolve(fitted.as_ref().map(|f| f.config.clone()))?;
    let w = Workflow::new(cfg)?;
    let (e, h) = match &fitted {
        Some(f) => (
            f.electron.as_ref().context("fit file has no electron result")?.params,
            f.hole.as_ref().context("fit file has no hole result")?.params,
        ),
        None => (TrialParams::oracle(&w.report.electron), TrialParams::oracle(&w.report.hole)),
    };
    let e_gs = w.report.ground_state.energy;
    let s = reconstruct_gf(&e, &h, &w.report.natural_orbitals, e_gs, &grid.grid(), delta)?;
    let out = common.out_dir()?;
    write_csv(&out.join("dos.csv"), &w.config, &s.to_csv())?;
    write_json(
        &out.join("poles.json"),
        &PoleFile {
            config: &w.config,
            ground_state_energy: e_gs,
            smearing: delta,
            electron: &s.electron_poles,
            hole: &s.hole_poles,
        },
    )?;
    println!("total weight {:.6} -> {}", s.total_weight(), out.join("dos.csv").display());
    Ok(())
}

fn cmd_direct(common: &Common, input: &Path, delta: f64, grid: GridArgs) -> Result<()> {
    let mut cfg = common.resolve(input_base(input)?)?;
    let hs = load_input(input, &mut cfg)?;
    let w = Workflow::new(cfg)?;
    let e_gs = w.report.ground_state.energy;
    let energies = grid.grid().points()?;
    let out = common.out_dir()?;
    for sector in sectors_in(&hs) {
        let norms = excitation_norms(&w.report.density_matrix, sector);
        let start = w.config.window_start(sector)?;
        for shift in w.config.shift_list() {
            let one: Vec<Histogram> = hs.iter().filter(|h| h.sector == sector && h.shift == shift).cloned().collect();
            if one.is_empty() {
                continue;
            }
            let (rho, integral): (Vec<f64>, f64) = if delta > 0.0 {
                let d = direct_dos_lorentzian(&one, norms, e_gs, start, delta)?;
                (energies.iter().map(|&x| d.eval(x)).collect(), d.peaks.iter().map(|p| p.1).sum())
            } else {
                let d = direct_dos_bars(&one, norms, e_gs, start)?;
                (energies.iter().map(|&x| d.eval(x)).collect(), d.integral())
            };
            let mut body = String::from("E,rho\n");
            for (x, r) in energies.iter().zip(&rho) {
                body.push_str(&format!("{x:.6},{r:.10}\n"));
            }
            let path = out.join(format!("direct_{sector}_s{shift}.csv"));
            write_csv(&path, &w.config, &body)?;
            println!("{sector} s={shift}: weight {integral:.6} -> {}", path.display());
        }
    }
    Ok(())
}

fn cmd_landscape(common: &Common, input: &Path, sector: &str, fixed: &str, value: Option<f64>, n: usize) -> Result<()> {
    let mut cfg = common.resolve(input_base(input)?)?;
    let hs = load_input(input, &mut cfg)?;
    let sector = Sector::parse(sector)?;
    let fixed = Param::parse(fixed)?;
    let w = Workflow::new(cfg)?;
    let value = match value {
        Some(v) => v,
        None => {
            let p = w.fit(&hs, sector)?.params;
            match fixed {
                Param::Theta => p.theta,
                Param::Eps0 => p.eps[0],
                Param::Eps1 => p.eps[1],
            }
        }
    };
    let cost: CostFunction = w.cost(&hs, sector)?;
    let plane = Plane { fixed, value, eps_start: w.config.window_start(sector)?, nx: n, ny: n };
    let scan = landscape_scan(&cost, &plane)?;
    let path = common.out_dir()?.join(format!("landscape_{sector}.csv"));
    write_csv(&path, &w.config, &scan.to_csv())?;
    println!("{} strict local minima on {n}x{n} -> {}", scan.minima, path.display());
    Ok(())
}

fn cmd_survival(common: &Common) -> Result<()> {
    let mut cfg = common.resolve(None)?;
    cfg.variant = Variant::Log1a;
    if common.noise.is_none() && common.config.is_none() {
        cfg.noise = NoiseModel::default();
    }
    let w = Workflow::new(cfg)?;
    let (_, record) = w.sample_all()?;
    let record = record.context("logical run produced no survival record")?;
    let out = common.out_dir()?;
    let csv = record.to_csv()?;
    write_csv(&out.join("survival.csv"), &w.config, &csv)?;
    write_json(&out.join("survival.json"), &record)?;
    print!("{csv}");
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Fci(c) => cmd_fci(c),
        Command::Sample(c) => cmd_sample(c),
        Command::ExactDist(c) => cmd_exact(c),
        Command::Optimize { common, input, restarts, discrepancy } => {
            cmd_optimize(common, input, *restarts, discrepancy.as_deref())
        }
        Command::Dos { common, fit, oracle, delta, grid } => cmd_dos(common, fit.as_deref(), *oracle, *delta, *grid),
        Command::Direct { common, input, delta, grid } => cmd_direct(common, input, *delta, *grid),
        Command::Landscape { common, input, sector, fixed, value, grid } => {
            cmd_landscape(common, input, sector, fixed, *value, *grid)
        }
        Command::Survival(c) => cmd_survival(c),
    }
}
