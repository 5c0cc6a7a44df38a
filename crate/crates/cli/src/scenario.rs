//! Scenario files: parsing, range checks and resolution into core types.
//!
//! The accepted document is described by `scenario.schema.json` next to this
//! crate's manifest. Unknown fields are rejected.

use std::path::Path;

use ehsense_core::{
    Capacity, ChannelModel, InitialBattery, ObservationModel, SensorDesign, TableEntry,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub prior: f64,
    #[serde(default)]
    pub channel: ChannelSpec,
    pub sensors: Vec<SensorSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub sim: Option<SimSpec>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub eps0: f64,
    pub eps1: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    RayleighRician {
        s: f64,
        #[serde(default = "unit")]
        sigma0: f64,
        #[serde(default = "unit")]
        sigma1: f64,
    },
    Table {
        entries: Vec<TableEntry>,
    },
}

fn unit() -> f64 {
    1.0
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub model: ModelSpec,
    pub capacity: Capacity,
    pub harvest_prob: f64,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default = "one")]
    pub count: usize,
    #[serde(default)]
    pub channel: Option<ChannelSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
pub enum SweepVariable {
    #[serde(rename = "s")]
    Snr,
    #[serde(rename = "K")]
    Capacity,
    #[serde(rename = "tau")]
    Threshold,
    #[serde(rename = "p_e")]
    Harvest,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub steps: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub burn_in: Option<u64>,
    #[serde(default)]
    pub initial_battery: InitialBattery,
}

/// A validated sensor entry; `count` identical sensors share one design.
#[derive(Debug, Clone)]
pub struct Entry {
    pub model: ObservationModel,
    pub capacity: Capacity,
    pub harvest_prob: f64,
    pub threshold: Option<f64>,
    pub channel: ChannelModel,
    pub count: usize,
}

impl Entry {
    pub fn design(&self, threshold: f64) -> SensorDesign {
        SensorDesign {
            model: self.model.clone(),
            threshold,
            capacity: self.capacity,
            harvest_prob: self.harvest_prob,
            channel: self.channel,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub prior: f64,
    pub entries: Vec<Entry>,
    pub sweep: Option<SweepSpec>,
    pub sim: Option<SimSpec>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ScenarioFile =
            serde_json::from_str(text).map_err(|e| CliError::Input(e.to_string()))?;
        file.resolve()
    }

    pub fn sensor_count(&self) -> usize {
        self.entries.iter().map(|e| e.count).sum()
    }
}

fn field_error(field: impl std::fmt::Display, err: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{field}: {err}"))
}

fn channel(spec: ChannelSpec, field: &str) -> Result<ChannelModel, CliError> {
    ChannelModel::new(spec.eps0, spec.eps1).map_err(|e| field_error(field, e))
}

impl ScenarioFile {
    fn resolve(self) -> Result<Scenario, CliError> {
        if !(self.prior > 0.0 && self.prior < 1.0) {
            return Err(field_error(
                "prior",
                format!("{} is not in (0, 1)", self.prior),
            ));
        }
        let default_channel = channel(self.channel, "channel")?;
        if self.sensors.is_empty() {
            return Err(field_error("sensors", "at least one sensor required"));
        }
        let mut entries = Vec::with_capacity(self.sensors.len());
        for (i, spec) in self.sensors.into_iter().enumerate() {
            let at = |name: &str| format!("sensors[{i}].{name}");
            let model = match spec.model {
                ModelSpec::RayleighRician { s, sigma0, sigma1 } => {
                    ObservationModel::rayleigh_rician(s, sigma0, sigma1)
                }
                ModelSpec::Table { entries } => ObservationModel::table(entries),
            }
            .map_err(|e| field_error(at("model"), e))?;
            if !(0.0..=1.0).contains(&spec.harvest_prob) {
                return Err(field_error(
                    at("harvest_prob"),
                    format!("{} is not in [0, 1]", spec.harvest_prob),
                ));
            }
            if let Some(t) = spec.threshold {
                if !t.is_finite() {
                    return Err(field_error(at("threshold"), "must be finite"));
                }
            }
            if spec.count == 0 {
                return Err(field_error(at("count"), "must be >= 1"));
            }
            let channel = match spec.channel {
                Some(c) => channel(c, &at("channel"))?,
                None => default_channel,
            };
            entries.push(Entry {
                model,
                capacity: spec.capacity,
                harvest_prob: spec.harvest_prob,
                threshold: spec.threshold,
                channel,
                count: spec.count,
            });
        }
        if let Some(sweep) = &self.sweep {
            check_sweep(sweep, &entries)?;
        }
        if let Some(sim) = &self.sim {
            if sim.steps == 0 {
                return Err(field_error("sim.steps", "must be >= 1"));
            }
            if let Some(b) = sim.burn_in {
                if b >= sim.steps {
                    return Err(field_error("sim.burn_in", "must be smaller than sim.steps"));
                }
            }
        }
        Ok(Scenario {
            prior: self.prior,
            entries,
            sweep: self.sweep,
            sim: self.sim,
        })
    }
}

fn check_sweep(sweep: &SweepSpec, entries: &[Entry]) -> Result<(), CliError> {
    if sweep.points == 0 {
        return Err(field_error("sweep.points", "must be >= 1"));
    }
    if !sweep.start.is_finite() || !sweep.stop.is_finite() {
        return Err(field_error("sweep", "start and stop must be finite"));
    }
    for v in sweep_values(sweep) {
        let ok = match sweep.variable {
            SweepVariable::Snr => v >= 0.0,
            SweepVariable::Capacity => v >= 1.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX),
            SweepVariable::Threshold => true,
            SweepVariable::Harvest => (0.0..=1.0).contains(&v),
        };
        if !ok {
            return Err(field_error(
                "sweep",
                format!("value {v} is out of range for {:?}", sweep.variable),
            ));
        }
    }
    if sweep.variable == SweepVariable::Snr {
        if let Some(i) = entries
            .iter()
            .position(|e| !matches!(e.model, ObservationModel::RayleighRician { .. }))
        {
            return Err(field_error(
                format!("sensors[{i}].model"),
                "an s sweep needs rayleigh_rician models",
            ));
        }
    }
    Ok(())
}

/// Evenly spaced sweep values, endpoints included. Capacity sweeps are
/// rounded to the nearest integer only when within 1e-9 of it.
pub fn sweep_values(sweep: &SweepSpec) -> Vec<f64> {
    let n = sweep.points;
    (0..n)
        .map(|i| {
            let v = if n == 1 {
                sweep.start
            } else {
                sweep.start + (sweep.stop - sweep.start) * i as f64 / (n - 1) as f64
            };
            if sweep.variable == SweepVariable::Capacity && (v - v.round()).abs() < 1e-9 {
                v.round()
            } else {
                v
            }
        })
        .collect()
}
