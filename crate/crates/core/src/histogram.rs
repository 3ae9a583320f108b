//! Normalized QPE outcome histograms and their JSON files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circuits::{QpeSettings, RteMode, Variant};
use crate::error::{input, Result};
use crate::model::{Orbital, Sector};
use crate::simulator::NoiseModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub variant: Variant,
    pub sector: Sector,
    pub orbital: Orbital,
    pub shift: usize,
    pub settings: QpeSettings,
    pub rte: RteMode,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise: Option<NoiseModel>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Shots submitted; zero for an exact distribution.
    pub shots: u64,
    /// Shots surviving every discard marker.
    pub accepted: u64,
    /// Raw counts; absent for an exact distribution.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counts: Option<Vec<u64>>,
    pub frequencies: Vec<f64>,
}

impl Histogram {
    #[allow(clippy::too_many_arguments)]
    pub fn from_counts(
        variant: Variant,
        sector: Sector,
        orbital: Orbital,
        settings: QpeSettings,
        rte: RteMode,
        noise: NoiseModel,
        seed: u64,
        shots: u64,
        counts: Vec<u64>,
    ) -> Result<Self> {
        let accepted: u64 = counts.iter().sum();
        let frequencies = if accepted == 0 {
            vec![0.0; counts.len()]
        } else {
            counts.iter().map(|&c| c as f64 / accepted as f64).collect()
        };
        let h = Histogram {
            variant,
            sector,
            orbital,
            shift: settings.shift,
            settings,
            rte,
            noise: Some(noise),
            seed: Some(seed),
            shots,
            accepted,
            counts: Some(counts),
            frequencies,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn from_distribution(
        variant: Variant,
        sector: Sector,
        orbital: Orbital,
        settings: QpeSettings,
        rte: RteMode,
        probabilities: Vec<f64>,
    ) -> Result<Self> {
        let h = Histogram {
            variant,
            sector,
            orbital,
            shift: settings.shift,
            settings,
            rte,
            noise: None,
            seed: None,
            shots: 0,
            accepted: 0,
            counts: None,
            frequencies: probabilities,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn is_exact(&self) -> bool {
        self.counts.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        if self.shift != self.settings.shift {
            return input("histogram shift disagrees with its settings");
        }
        let n = self.settings.n_val();
        if self.frequencies.len() != n {
            return input(format!("expected {n} frequencies, found {}", self.frequencies.len()));
        }
        if self.frequencies.iter().any(|f| !(0.0..=1.0 + 1e-12).contains(f)) {
            return input("frequencies must lie in [0, 1]");
        }
        if let Some(c) = &self.counts {
            if c.len() != n || c.iter().sum::<u64>() != self.accepted || self.accepted > self.shots {
                return input("counts inconsistent with accepted/submitted shot numbers");
            }
        }
        let total: f64 = self.frequencies.iter().sum();
        let empty = self.counts.is_some() && self.accepted == 0;
        if !empty && (total - 1.0).abs() > 1e-9 {
            return input(format!("frequencies sum to {total}, not 1"));
        }
        Ok(())
    }

    pub fn file_name(&self) -> String {
        format!("{}_{}_{}_s{}.json", self.variant, self.sector.short(), self.orbital.short(), self.shift)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let h: Histogram = serde_json::from_str(text)?;
        h.validate()?;
        Ok(h)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

/// Loads every `*.json` histogram in a directory, or a single file, sorted by key.
pub fn load_histograms(path: impl AsRef<Path>) -> Result<Vec<Histogram>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    if path.is_dir() {
        let mut entries: Vec<_> = fs::read_dir(path)?.collect::<std::io::Result<Vec<_>>>()?;
        entries.sort_by_key(|e| e.file_name());
        for e in entries {
            let p = e.path();
            if p.extension().is_some_and(|x| x == "json") {
                // other JSON sidecars (survival, configs) are skipped
                if let Ok(h) = Histogram::read(&p) {
                    out.push(h);
                }
            }
        }
    } else {
        out.push(Histogram::read(path)?);
    }
    out.sort_by_key(|h| (h.variant, h.sector.short(), h.orbital.index(), h.shift));
    Ok(out)
}
