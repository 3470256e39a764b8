//! Experiment configuration, loaded from TOML or JSON.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::baseline::{CostModel, PhasedArrayContext};
use crate::error::{Error, Result};
use crate::hypothesis::{AngularGrid, Hypothesis};
use crate::signal::{ArraySide, MeasurementContext, Scene};
use crate::surface::{wavelength, FeedLayout, PropagationModel, SurfaceGeometry};
use crate::waoa::{PowerBudget, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Antenna {
    #[default]
    Rhs,
    #[serde(alias = "phased_array")]
    Pa,
}

impl Antenna {
    pub fn label(self) -> &'static str {
        match self {
            Antenna::Rhs => "rhs",
            Antenna::Pa => "pa",
        }
    }
}

impl std::fmt::Display for Antenna {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Hardware budget in holographic-element units; both antennas are run.
    Cost,
    Cycles,
    Elements,
    Power,
    Snapshots,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::Cost => "cost",
            SweepAxis::Cycles => "cycles",
            SweepAxis::Elements => "elements",
            SweepAxis::Power => "power",
            SweepAxis::Snapshots => "snapshots",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Iteration controls of the alternating optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverTuning {
    pub tolerance: f64,
    pub fp_tolerance: f64,
    pub max_outer: usize,
    pub max_fp: usize,
    pub safeguard: bool,
}

impl Default for SolverTuning {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            tolerance: d.tolerance,
            fp_tolerance: d.fp_tolerance,
            max_outer: d.max_outer,
            max_fp: d.max_fp,
            safeguard: d.safeguard,
        }
    }
}

/// One experiment. Angles are in degrees and grid indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub frequency_hz: f64,
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub tx_feeds: usize,
    pub rx_feeds: usize,
    /// Holographic element spacing in wavelengths.
    pub rhs_spacing: f64,
    /// Phased-array element spacing in wavelengths.
    pub pa_spacing: f64,
    pub feed_layout: FeedLayout,
    pub refractive_index: f64,
    /// Feed-line attenuation `α` in 1/m.
    pub attenuation_per_meter: f64,
    pub grids: usize,
    pub grid_polar_deg: f64,
    pub max_targets: usize,
    /// Grid cells holding the true targets.
    pub targets: Vec<usize>,
    /// Reflection coefficient `β` shared by every grid cell.
    pub reflection: f64,
    pub noise_power: f64,
    pub power: f64,
    pub power_budget: PowerBudget,
    pub snapshots: usize,
    pub cycles: usize,
    pub accept_threshold: f64,
    pub reject_threshold: f64,
    pub trials: usize,
    pub seed: u64,
    pub antenna: Antenna,
    /// Phased-array element count; defaults to the equal-cost count.
    pub pa_elements: Option<usize>,
    pub pa_feed_gain: f64,
    pub cost_ratio: f64,
    pub solver: SolverTuning,
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            frequency_hz: 30e9,
            tx_elements: 16,
            rx_elements: 16,
            tx_feeds: 1,
            rx_feeds: 1,
            rhs_spacing: 1.0 / 3.0,
            pa_spacing: 0.5,
            feed_layout: FeedLayout::Edge,
            refractive_index: 3f64.sqrt(),
            attenuation_per_meter: 5.0,
            grids: 4,
            grid_polar_deg: 30.0,
            max_targets: 2,
            targets: vec![1, 2],
            reflection: 0.1,
            noise_power: 1.0,
            power: 10.0,
            power_budget: PowerBudget::PerSnapshot,
            snapshots: 4,
            cycles: 10,
            accept_threshold: 0.9,
            reject_threshold: 0.05,
            trials: 500,
            seed: 2024,
            antenna: Antenna::Rhs,
            pa_elements: None,
            pa_feed_gain: crate::baseline::DEFAULT_FEED_GAIN,
            cost_ratio: crate::baseline::DEFAULT_COST_RATIO,
            solver: SolverTuning::default(),
            sweep: None,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Reads a `.json` file as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json { Self::from_json(&text)? } else { Self::from_toml(&text)? };
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(config_err(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.frequency_hz, "frequency_hz")?;
        positive(self.rhs_spacing, "rhs_spacing")?;
        positive(self.pa_spacing, "pa_spacing")?;
        positive(self.refractive_index, "refractive_index")?;
        positive(self.noise_power, "noise_power")?;
        positive(self.power, "power")?;
        positive(self.pa_feed_gain, "pa_feed_gain")?;
        positive(self.cost_ratio, "cost_ratio")?;
        if !(self.attenuation_per_meter.is_finite() && self.attenuation_per_meter >= 0.0) {
            return Err(config_err("attenuation_per_meter must be non-negative"));
        }
        if !self.reflection.is_finite() || self.reflection == 0.0 {
            return Err(config_err("reflection must be finite and non-zero"));
        }
        for (v, name) in [
            (self.tx_elements, "tx_elements"),
            (self.rx_elements, "rx_elements"),
            (self.tx_feeds, "tx_feeds"),
            (self.rx_feeds, "rx_feeds"),
            (self.grids, "grids"),
            (self.max_targets, "max_targets"),
            (self.snapshots, "snapshots"),
            (self.cycles, "cycles"),
            (self.trials, "trials"),
        ] {
            if v == 0 {
                return Err(config_err(format!("{name} must be at least 1")));
            }
        }
        if self.max_targets > self.grids {
            return Err(config_err("max_targets cannot exceed grids"));
        }
        if !(0.0..=90.0).contains(&self.grid_polar_deg) {
            return Err(config_err("grid_polar_deg must lie in [0, 90]"));
        }
        if !(self.reject_threshold > 0.0 && self.reject_threshold < self.accept_threshold) {
            return Err(config_err("need 0 < reject_threshold < accept_threshold"));
        }
        if self.targets.len() > self.max_targets {
            return Err(config_err("more true targets than max_targets"));
        }
        for &t in &self.targets {
            if t == 0 || t > self.grids {
                return Err(config_err(format!("target grid {t} outside 1..={}", self.grids)));
            }
        }
        let mut sorted = self.targets.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.targets.len() {
            return Err(config_err("true targets must occupy distinct grids"));
        }
        if self.pa_elements == Some(0) {
            return Err(config_err("pa_elements must be at least 1"));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(config_err("sweep needs at least one value"));
            }
            if s.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(config_err("sweep values must be positive"));
            }
        }
        self.solver_config().validate().map_err(|e| config_err(e.to_string()))
    }

    pub fn wavelength(&self) -> f64 {
        wavelength(self.frequency_hz)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            power: self.power,
            budget: self.power_budget,
            tolerance: self.solver.tolerance,
            fp_tolerance: self.solver.fp_tolerance,
            max_outer: self.solver.max_outer,
            max_fp: self.solver.max_fp,
            safeguard: self.solver.safeguard,
        }
    }

    pub fn cost_model(&self) -> Result<CostModel> {
        CostModel::with_ratio(self.cost_ratio)
    }

    pub fn grid(&self) -> Result<AngularGrid> {
        AngularGrid::azimuth_partition(self.grids, self.grid_polar_deg * PI / 180.0)
    }

    /// The true hypothesis with 0-based grid indices.
    pub fn true_hypothesis(&self) -> Result<Hypothesis> {
        Hypothesis::new(self.targets.iter().map(|t| t - 1).collect())
    }

    pub fn true_scene(&self, grid: &AngularGrid) -> Result<Scene> {
        let hyp = self.true_hypothesis()?;
        Scene::new(
            hyp.grid_indices()
                .iter()
                .map(|&j| crate::signal::Target {
                    direction: grid.directions()[j],
                    reflection: Complex64::new(self.reflection, 0.0),
                })
                .collect(),
        )
    }

    fn rhs_side(&self, elements: usize, feeds: usize) -> Result<ArraySide> {
        let lambda = self.wavelength();
        let geometry =
            SurfaceGeometry::with_element_count(elements, self.rhs_spacing * lambda, feeds, &self.feed_layout)?;
        let propagation = PropagationModel::new(&geometry, self.refractive_index, self.attenuation_per_meter, lambda)?;
        ArraySide::new(geometry, propagation)
    }

    pub fn rhs_context(&self) -> Result<MeasurementContext> {
        let grid = self.grid()?;
        MeasurementContext::new(
            self.rhs_side(self.tx_elements, self.tx_feeds)?,
            self.rhs_side(self.rx_elements, self.rx_feeds)?,
            self.wavelength(),
            self.noise_power,
            self.snapshots,
            grid,
            vec![Complex64::new(self.reflection, 0.0); self.grids],
        )
    }

    /// Phased-array element count: explicit, or the cost-equivalent of the
    /// transmit surface (at least one).
    pub fn pa_element_count(&self) -> usize {
        self.pa_elements
            .unwrap_or_else(|| ((self.tx_elements as f64 / self.cost_ratio) + 1e-9).floor().max(1.0) as usize)
    }

    pub fn pa_context(&self) -> Result<PhasedArrayContext> {
        let lambda = self.wavelength();
        let n = self.pa_element_count();
        let array = || -> Result<SurfaceGeometry> {
            let (rows, cols) = crate::surface::grid_shape(n)?;
            SurfaceGeometry::planar(rows, cols, self.pa_spacing * lambda, &FeedLayout::AtElements(vec![0]))
        };
        PhasedArrayContext::new(
            array()?,
            array()?,
            lambda,
            self.pa_feed_gain,
            self.noise_power,
            self.snapshots,
            self.grid()?,
            vec![Complex64::new(self.reflection, 0.0); self.grids],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_experiment() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let ctx = cfg.rhs_context().unwrap();
        assert_eq!(ctx.tx().n_elements(), 16);
        assert_eq!(ctx.rx().n_feeds(), 1);
        let space = crate::hypothesis::enumerate_hypotheses(cfg.grids, cfg.max_targets).unwrap();
        assert_eq!(space.len(), 11);
        let dirs = ctx.grid().directions();
        assert!((dirs[0].azimuth() - PI / 4.0).abs() < 1e-12);
        assert!((dirs[1].azimuth() - 3.0 * PI / 4.0).abs() < 1e-12);
        assert!((dirs[0].polar() - PI / 6.0).abs() < 1e-12);
        assert_eq!(cfg.true_hypothesis().unwrap().grid_indices(), &[0, 1]);
        assert_eq!(cfg.pa_element_count(), 2);
        assert_eq!(cfg.pa_context().unwrap().n_tx(), 2);
    }

    #[test]
    fn toml_and_json_round_trip() {
        let text = r#"
            tx_elements = 24
            targets = [1, 3]
            antenna = "phased_array"
            [solver]
            max_outer = 5
            [sweep]
            axis = "cycles"
            values = [1, 2, 3]
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.tx_elements, 24);
        assert_eq!(cfg.antenna, Antenna::Pa);
        assert_eq!(cfg.solver.max_outer, 5);
        assert_eq!(cfg.pa_element_count(), 4);
        assert_eq!(cfg.sweep.as_ref().unwrap().axis, SweepAxis::Cycles);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&json).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = [
            "unknown_key = 1",
            "targets = [5]",
            "targets = [1, 1]",
            "targets = [1, 2, 3]",
            "noise_power = 0.0",
            "max_targets = 5",
            "reject_threshold = 0.95",
            "[solver]\nmax_fp = 0",
            "[sweep]\naxis = \"cycles\"\nvalues = []",
            "[sweep]\naxis = \"bogus\"\nvalues = [1]",
        ];
        for text in bad {
            let err = ExperimentConfig::from_toml(text).unwrap_err();
            assert!(err.is_config_error(), "{text}: {err}");
        }
        let ok = ExperimentConfig { accept_threshold: 2.0, ..Default::default() };
        ok.validate().unwrap();
    }
}
