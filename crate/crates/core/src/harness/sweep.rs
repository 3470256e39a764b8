//! Parameter sweeps producing one Pd row per value and antenna.

use std::path::Path;

use serde::Serialize;

use super::config::{Antenna, ExperimentConfig, SweepAxis, SweepSpec};
use super::montecarlo::{monte_carlo_pd, PdEstimate};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "axis_value,antenna,trials,pd,wilson_lo,wilson_hi,mean_cycles";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub antenna: Antenna,
    pub trials: usize,
    pub pd: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub mean_cycles: f64,
}

impl SweepRow {
    pub fn estimate(&self) -> PdEstimate {
        PdEstimate {
            trials: self.trials,
            successes: (self.pd * self.trials as f64).round() as usize,
            pd: self.pd,
            wilson_lo: self.wilson_lo,
            wilson_hi: self.wilson_hi,
            mean_cycles: self.mean_cycles,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Numerical(format!("csv: {e}")))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Numerical(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
    }

    /// Rows of one antenna in sweep order.
    pub fn series(&self, antenna: Antenna) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.antenna == antenna).collect()
    }
}

fn count(value: f64, axis: SweepAxis) -> Result<usize> {
    if value.fract() != 0.0 || value < 1.0 {
        return Err(Error::Config(format!("{} sweep needs positive integers, got {value}", axis.label())));
    }
    Ok(value as usize)
}

/// The configurations a sweep value expands to, one per antenna.
pub fn configs_for(cfg: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<Vec<ExperimentConfig>> {
    let mut base = cfg.clone();
    base.sweep = None;
    let out = match axis {
        SweepAxis::Cost => {
            let (rhs, pa) = cfg.cost_model()?.elements_for(value);
            if rhs == 0 || pa == 0 {
                return Err(Error::Config(format!("cost {value} buys no phased-array element")));
            }
            let rhs_cfg =
                ExperimentConfig { tx_elements: rhs, rx_elements: rhs, antenna: Antenna::Rhs, ..base.clone() };
            let pa_cfg = ExperimentConfig { pa_elements: Some(pa), antenna: Antenna::Pa, ..base };
            vec![rhs_cfg, pa_cfg]
        }
        SweepAxis::Cycles => vec![ExperimentConfig { cycles: count(value, axis)?, ..base }],
        SweepAxis::Snapshots => vec![ExperimentConfig { snapshots: count(value, axis)?, ..base }],
        SweepAxis::Power => vec![ExperimentConfig { power: value, ..base }],
        SweepAxis::Elements => {
            let n = count(value, axis)?;
            match cfg.antenna {
                Antenna::Rhs => vec![ExperimentConfig { tx_elements: n, rx_elements: n, ..base }],
                Antenna::Pa => vec![ExperimentConfig { pa_elements: Some(n), ..base }],
            }
        }
    };
    for c in &out {
        c.validate()?;
    }
    Ok(out)
}

/// Runs the sweep declared in `cfg.sweep`.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepTable> {
    let spec = cfg.sweep.as_ref().ok_or_else(|| Error::Config("no [sweep] section in the configuration".into()))?;
    run_sweep_spec(cfg, spec)
}

pub fn run_sweep_spec(cfg: &ExperimentConfig, spec: &SweepSpec) -> Result<SweepTable> {
    if spec.values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut rows = Vec::new();
    for &value in &spec.values {
        for c in configs_for(cfg, spec.axis, value)? {
            let est = monte_carlo_pd(&c, c.trials)?;
            rows.push(SweepRow {
                axis_value: value,
                antenna: c.antenna,
                trials: est.trials,
                pd: est.pd,
                wilson_lo: est.wilson_lo,
                wilson_hi: est.wilson_hi,
                mean_cycles: est.mean_cycles,
            });
        }
    }
    Ok(SweepTable { axis: spec.axis, rows })
}
