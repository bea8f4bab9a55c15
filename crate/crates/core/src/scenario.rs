//! JSON scenario files.
//!
//! ```json
//! {"M": 9, "N": 11, "freq_ghz": 30.0,
//!  "targets": [{"theta_deg": -35.0, "range_m": 25.0}],
//!  "T": 100, "snr_db": 10.0, "seed": 7, "model": "exact"}
//! ```
//!
//! Either `d_mm` or `freq_ghz` may be omitted: a missing spacing defaults
//! to a quarter wavelength, a missing frequency puts the wavelength at `4 d`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::{synthesize, SnapshotSet, SteeringModel, SynthesisConfig, Target};
use crate::error::{Error, Result};
use crate::geometry::{build_coprime_layout, wavelength_from_ghz, CoprimeParams, SensorLayout};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub theta_deg: f64,
    pub range_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_ghz: Option<f64>,
    pub targets: Vec<TargetSpec>,
    #[serde(rename = "T")]
    pub snapshots: usize,
    /// `null` or absent means noise-free.
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub model: SteeringModel,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)?;
        s.params()?;
        if s.targets.is_empty() {
            return Err(Error::NoTargets);
        }
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn params(&self) -> Result<CoprimeParams> {
        let (d, lambda) = match (self.d_mm, self.freq_ghz) {
            (Some(d_mm), Some(f)) => (d_mm * 1e-3, wavelength_from_ghz(f)),
            (Some(d_mm), None) => (d_mm * 1e-3, 4.0 * d_mm * 1e-3),
            (None, Some(f)) => (wavelength_from_ghz(f) / 4.0, wavelength_from_ghz(f)),
            (None, None) => return Err(Error::Scenario("one of d_mm or freq_ghz is required".into())),
        };
        CoprimeParams::new(self.m, self.n, d, lambda)
    }

    pub fn layout(&self) -> Result<SensorLayout> {
        Ok(build_coprime_layout(&self.params()?))
    }

    pub fn targets(&self) -> Vec<Target> {
        self.targets.iter().map(|t| Target::from_degrees(t.theta_deg, t.range_m)).collect()
    }

    pub fn synthesis(&self) -> SynthesisConfig {
        SynthesisConfig { snapshots: self.snapshots, snr_db: self.snr_db, seed: self.seed, model: self.model }
    }

    /// Synthesizes snapshots on `layout`, which need not be the coprime one.
    pub fn simulate_on(&self, layout: &SensorLayout) -> Result<SnapshotSet> {
        synthesize(layout, &self.targets(), &self.synthesis())
    }

    pub fn simulate(&self) -> Result<(SensorLayout, SnapshotSet)> {
        let layout = self.layout()?;
        let snaps = self.simulate_on(&layout)?;
        Ok((layout, snaps))
    }
}
