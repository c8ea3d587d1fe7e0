//! JSON documents for parameter sets and scenarios. Angles are degrees.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{ControllerKind, ControllerOptions};
use crate::detector::{DetectorConfig, Thresholds};
use crate::error::{Error, Result};
use crate::experiment::{Dof, InputSpec, ScenarioSpec};
use crate::geometry::{ShaftSegment, ShaftShape};
use crate::hysteresis::{
    Direction, HysteresisInputs, HysteresisParams, DEFAULT_OMEGA, DEFAULT_X_REF_DEG,
};
use crate::io;
use crate::plant::CurrentModel;

/// Flat parameter document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub d_pos_deg: f64,
    pub d_neg_deg: f64,
    pub b_pos_deg: f64,
    pub b_neg_deg: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    pub h_pos_deg: f64,
    pub h_neg_deg: f64,
    #[serde(default = "default_x_ref_pos")]
    pub x_ref_pos_deg: f64,
    #[serde(default = "default_x_ref_neg")]
    pub x_ref_neg_deg: f64,
}

fn default_omega() -> f64 {
    DEFAULT_OMEGA
}

fn default_x_ref_pos() -> f64 {
    DEFAULT_X_REF_DEG
}

fn default_x_ref_neg() -> f64 {
    -DEFAULT_X_REF_DEG
}

impl From<HysteresisInputs> for ParamsFile {
    fn from(p: HysteresisInputs) -> Self {
        Self {
            d_pos_deg: p.d_pos.to_degrees(),
            d_neg_deg: p.d_neg.to_degrees(),
            b_pos_deg: p.b_pos.to_degrees(),
            b_neg_deg: p.b_neg.to_degrees(),
            omega: p.omega,
            h_pos_deg: p.h_pos.to_degrees(),
            h_neg_deg: p.h_neg.to_degrees(),
            x_ref_pos_deg: p.x_ref_pos.to_degrees(),
            x_ref_neg_deg: p.x_ref_neg.to_degrees(),
        }
    }
}

impl From<&HysteresisParams> for ParamsFile {
    fn from(p: &HysteresisParams) -> Self {
        p.inputs().into()
    }
}

impl Default for ParamsFile {
    fn default() -> Self {
        HysteresisInputs::default().into()
    }
}

impl ParamsFile {
    pub fn inputs(&self) -> HysteresisInputs {
        HysteresisInputs {
            d_pos: self.d_pos_deg.to_radians(),
            d_neg: self.d_neg_deg.to_radians(),
            b_pos: self.b_pos_deg.to_radians(),
            b_neg: self.b_neg_deg.to_radians(),
            omega: self.omega,
            h_pos: self.h_pos_deg.to_radians(),
            h_neg: self.h_neg_deg.to_radians(),
            x_ref_pos: self.x_ref_pos_deg.to_radians(),
            x_ref_neg: self.x_ref_neg_deg.to_radians(),
        }
    }

    pub fn params(&self) -> Result<HysteresisParams> {
        HysteresisParams::derive(self.inputs())
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::load_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::save_json(path, self)
    }
}

/// A curved segment gives `radius_mm` and `alpha_deg`; a straight one gives
/// `length_mm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_mm: Option<f64>,
    #[serde(default)]
    pub alpha_deg: f64,
    #[serde(default)]
    pub theta_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_mm: Option<f64>,
}

impl SegmentFile {
    pub fn segment(&self) -> Result<ShaftSegment> {
        match (self.radius_mm, self.length_mm) {
            (Some(r), None) => {
                ShaftSegment::curved(r, self.alpha_deg.to_radians(), self.theta_deg.to_radians())
            }
            (None, Some(l)) if self.alpha_deg == 0.0 => ShaftSegment::straight(l),
            (None, Some(_)) => Err(Error::config(
                "a segment with alpha_deg > 0 needs radius_mm",
            )),
            (Some(_), Some(_)) => Err(Error::config(
                "give either radius_mm or length_mm per segment, not both",
            )),
            (None, None) => Err(Error::config("a segment needs radius_mm or length_mm")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeFile {
    pub segments: Vec<SegmentFile>,
    #[serde(default = "default_beta_catheter")]
    pub beta_catheter_mm: f64,
    #[serde(default = "default_beta_knob")]
    pub beta_knob_mm: f64,
}

fn default_beta_catheter() -> f64 {
    1.0
}

fn default_beta_knob() -> f64 {
    10.0
}

impl ShapeFile {
    pub fn shape(&self) -> Result<ShaftShape> {
        let segs = self
            .segments
            .iter()
            .map(SegmentFile::segment)
            .collect::<Result<Vec<_>>>()?;
        ShaftShape::new(segs, self.beta_catheter_mm, self.beta_knob_mm)
            .map_err(|e| Error::config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorFile {
    pub thresholds: Thresholds,
    pub step_u_deg: f64,
    pub max_iterations: usize,
    pub initial_direction: Direction,
    pub dwell_ticks: usize,
    pub window: usize,
    pub filter_order: usize,
    pub filter_cutoff_hz: f64,
}

impl Default for DetectorFile {
    fn default() -> Self {
        DetectorConfig::default().into()
    }
}

impl From<DetectorConfig> for DetectorFile {
    fn from(c: DetectorConfig) -> Self {
        Self {
            thresholds: c.thresholds,
            step_u_deg: c.step_u.to_degrees(),
            max_iterations: c.max_iterations,
            initial_direction: c.initial_direction,
            dwell_ticks: c.dwell_ticks,
            window: c.window,
            filter_order: c.filter_order,
            filter_cutoff_hz: c.filter_cutoff_hz,
        }
    }
}

impl DetectorFile {
    pub fn config(&self) -> DetectorConfig {
        DetectorConfig {
            thresholds: self.thresholds,
            step_u: self.step_u_deg.to_radians(),
            max_iterations: self.max_iterations,
            initial_direction: self.initial_direction,
            dwell_ticks: self.dwell_ticks,
            window: self.window,
            filter_order: self.filter_order,
            filter_cutoff_hz: self.filter_cutoff_hz,
        }
    }
}

/// Ground truth either inline or in a separate parameter file (resolved
/// relative to the scenario file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamsRef {
    Inline(ParamsFile),
    File(PathBuf),
}

impl Default for ParamsRef {
    fn default() -> Self {
        ParamsRef::Inline(ParamsFile::default())
    }
}

fn default_controllers() -> Vec<ControllerKind> {
    ControllerKind::ALL.to_vec()
}

fn default_trials() -> usize {
    3
}

fn default_catheters() -> usize {
    2
}

fn default_jitter() -> f64 {
    0.1
}

fn default_lr_speed() -> f64 {
    2.0
}

fn default_sample_rate() -> f64 {
    100.0
}

fn default_knob_limit() -> f64 {
    120.0
}

/// Scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub shape: ShapeFile,
    pub dof: Dof,
    pub input: InputSpec,
    #[serde(default = "default_controllers")]
    pub controllers: Vec<ControllerKind>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: ParamsRef,
    #[serde(default = "default_catheters")]
    pub catheters: usize,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    #[serde(default = "default_lr_speed")]
    pub lr_speed: f64,
    #[serde(default)]
    pub current: CurrentModel,
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discard_s: Option<f64>,
    #[serde(default)]
    pub detector: DetectorFile,
    #[serde(default = "default_knob_limit")]
    pub knob_limit_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slew_deg_per_tick: Option<f64>,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self> {
        io::load_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::save_json(path, self)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Builds and validates the in-memory scenario. `base` resolves
    /// relative parameter-file paths.
    pub fn spec(&self, base: &Path) -> Result<ScenarioSpec> {
        self.build(base).map_err(|e| match e {
            Error::Domain(m) => Error::Config(m),
            other => other,
        })
    }

    fn build(&self, base: &Path) -> Result<ScenarioSpec> {
        let truth = match &self.params {
            ParamsRef::Inline(p) => p.inputs(),
            ParamsRef::File(rel) => {
                let path = if rel.is_absolute() {
                    rel.clone()
                } else {
                    base.join(rel)
                };
                ParamsFile::load(&path)?.inputs()
            }
        };
        let spec = ScenarioSpec {
            name: self.name.clone(),
            shape: self.shape.shape()?,
            dof: self.dof,
            input: self.input.clone(),
            lr_speed: self.lr_speed,
            controllers: self.controllers.clone(),
            trials: self.trials,
            seed: self.seed,
            truth,
            catheters: self.catheters,
            jitter: self.jitter,
            current: self.current,
            sample_rate_hz: self.sample_rate_hz,
            discard_s: self.discard_s,
            detector: self.detector.config(),
            control: ControllerOptions {
                knob_limit: self.knob_limit_deg.to_radians(),
                slew_per_tick: self.slew_deg_per_tick.map(f64::to_radians),
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}
