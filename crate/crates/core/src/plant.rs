//! Simulated catheter: ground-truth hysteresis per knob plus a synthetic
//! motor-current signal.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::control::Controller;
use crate::error::{Error, Result};
use crate::geometry::ShaftShape;
use crate::hysteresis::{Branch, HysteresisParams, HysteresisState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Anterior-posterior knob.
    Ap,
    /// Right-left knob.
    Lr,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::Ap, Axis::Lr];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Ap => "ap",
            Axis::Lr => "lr",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ap" => Ok(Axis::Ap),
            "lr" => Ok(Axis::Lr),
            other => Err(Error::config(format!("unknown axis '{other}'"))),
        }
    }
}

/// Motor current as a function of knob angle.
///
/// `C = baseline + gain * s^2` where `s` is the distance past the nearer
/// dead-zone boundary (zero inside the dead zone), so the plateau is exactly
/// flat and the curve is C1 at both edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentModel {
    pub baseline: f64,
    /// Amps per squared radian.
    pub gain: f64,
    pub noise_std: f64,
}

impl Default for CurrentModel {
    fn default() -> Self {
        Self {
            baseline: 0.3,
            gain: 8.0,
            noise_std: 2e-4,
        }
    }
}

impl CurrentModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return Err(Error::config("current gain must be > 0"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::config("noise std must be >= 0"));
        }
        if !self.baseline.is_finite() {
            return Err(Error::config("current baseline must be finite"));
        }
        Ok(())
    }

    /// Noise-free current at effective (straight-shaft) input `x`.
    pub fn clean(&self, params: &HysteresisParams, x: f64) -> f64 {
        let s = (x - params.d_pos()).max(params.d_neg() - x).max(0.0);
        self.baseline + self.gain * s * s
    }
}

/// Environment contact limits on the commanded knob angle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Walls {
    pub upper: Option<f64>,
    pub lower: Option<f64>,
}

/// Current slope against a wall, amps per radian.
pub const WALL_STIFFNESS: f64 = 2.0e4;

impl Walls {
    fn current(&self, q: f64) -> f64 {
        let over = self.upper.map_or(0.0, |w| (q - w).max(0.0));
        let under = self.lower.map_or(0.0, |w| (w - q).max(0.0));
        WALL_STIFFNESS * (over + under)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    /// Straight-shaft ground truth per axis.
    pub params_ap: HysteresisParams,
    pub params_lr: HysteresisParams,
    pub shape: ShaftShape,
    pub current: CurrentModel,
    pub sample_rate_hz: f64,
    pub walls_ap: Walls,
    pub walls_lr: Walls,
}

impl PlantConfig {
    pub fn new(params: HysteresisParams, shape: ShaftShape) -> Self {
        Self {
            params_ap: params,
            params_lr: params,
            shape,
            current: CurrentModel::default(),
            sample_rate_hz: 100.0,
            walls_ap: Walls::default(),
            walls_lr: Walls::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.current.validate()?;
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::config("sample rate must be > 0"));
        }
        Ok(())
    }

    pub fn params(&self, axis: Axis) -> &HysteresisParams {
        match axis {
            Axis::Ap => &self.params_ap,
            Axis::Lr => &self.params_lr,
        }
    }

    pub fn walls(&self, axis: Axis) -> &Walls {
        match axis {
            Axis::Ap => &self.walls_ap,
            Axis::Lr => &self.walls_lr,
        }
    }

    /// Input-axis translation the shaft shape imposes on `axis`.
    pub fn offset(&self, axis: Axis) -> f64 {
        let k = self.shape.knob_offset();
        match axis {
            Axis::Ap => k.ap,
            Axis::Lr => k.lr,
        }
    }

    /// Ground truth as seen from the knob: the straight model translated by
    /// the shape offset.
    pub fn shifted_params(&self, axis: Axis) -> HysteresisParams {
        self.params(axis).shifted(self.offset(axis))
    }
}

/// Something that accepts a knob command and answers with one current
/// sample per tick.
pub trait CurrentProbe {
    fn sample_rate_hz(&self) -> f64;
    /// Holds `q` for one tick and returns the measured current.
    fn command(&mut self, q: f64) -> f64;
}

/// One simulated knob.
#[derive(Debug, Clone)]
pub struct PlantAxis {
    params: HysteresisParams,
    offset: f64,
    state: HysteresisState,
    current: CurrentModel,
    walls: Walls,
    sample_rate_hz: f64,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl PlantAxis {
    pub fn new(cfg: &PlantConfig, axis: Axis, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let params = *cfg.params(axis);
        let offset = cfg.offset(axis);
        let noise = if cfg.current.noise_std > 0.0 {
            Some(
                Normal::new(0.0, cfg.current.noise_std)
                    .map_err(|e| Error::config(e.to_string()))?,
            )
        } else {
            None
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(axis.index() as u64);
        Ok(Self {
            params,
            offset,
            state: HysteresisState::at_rest(&params, -offset),
            current: cfg.current,
            walls: *cfg.walls(axis),
            sample_rate_hz: cfg.sample_rate_hz,
            rng,
            noise,
        })
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn state(&self) -> &HysteresisState {
        &self.state
    }

    /// Advances one tick with knob command `q`; returns `(y_true, current)`.
    pub fn step(&mut self, q: f64) -> (f64, f64) {
        let x = q - self.offset;
        let y = self.state.step(&self.params, x);
        let mut c = self.current.clean(&self.params, x) + self.walls.current(q);
        if let Some(n) = &self.noise {
            c += n.sample(&mut self.rng);
        }
        (y, c)
    }
}

impl CurrentProbe for PlantAxis {
    fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    fn command(&mut self, q: f64) -> f64 {
        self.step(q).1
    }
}

/// Both knobs of one catheter. Axes are independent.
#[derive(Debug, Clone)]
pub struct Plant {
    axes: [PlantAxis; 2],
    sample_rate_hz: f64,
}

impl Plant {
    pub fn new(cfg: &PlantConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            axes: [
                PlantAxis::new(cfg, Axis::Ap, seed)?,
                PlantAxis::new(cfg, Axis::Lr, seed)?,
            ],
            sample_rate_hz: cfg.sample_rate_hz,
        })
    }

    pub fn axis(&self, axis: Axis) -> &PlantAxis {
        &self.axes[axis.index()]
    }

    pub fn axis_mut(&mut self, axis: Axis) -> &mut PlantAxis {
        &mut self.axes[axis.index()]
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub t: f64,
    pub axis: Axis,
    pub q_desired: f64,
    pub q_commanded: f64,
    pub y_true: f64,
    pub current: f64,
    pub branch: Branch,
}

/// Desired input and controller for one knob.
pub struct AxisDrive<'a> {
    pub axis: Axis,
    pub desired: &'a [f64],
    pub controller: &'a mut Controller,
}

/// Runs the desired inputs through the controllers and plant. Rows are
/// ordered by tick, then by the order of `drives`.
pub fn run_trajectory(plant: &mut Plant, drives: &mut [AxisDrive<'_>]) -> Result<Vec<TraceSample>> {
    let Some(first) = drives.first() else {
        return Ok(Vec::new());
    };
    let n = first.desired.len();
    if let Some(d) = drives.iter().find(|d| d.desired.len() != n) {
        return Err(Error::config(format!(
            "input length mismatch: {n} samples vs {} on axis {}",
            d.desired.len(),
            d.axis
        )));
    }
    for (i, d) in drives.iter().enumerate() {
        if drives[..i].iter().any(|o| o.axis == d.axis) {
            return Err(Error::config(format!("axis {} driven twice", d.axis)));
        }
    }
    let dt = 1.0 / plant.sample_rate_hz();
    let mut out = Vec::with_capacity(n * drives.len());
    for i in 0..n {
        let t = i as f64 * dt;
        for d in drives.iter_mut() {
            let q_desired = d.desired[i];
            let q_commanded = d.controller.command(q_desired).command;
            let ax = plant.axis_mut(d.axis);
            let (y_true, current) = ax.step(q_commanded);
            out.push(TraceSample {
                t,
                axis: d.axis,
                q_desired,
                q_commanded,
                y_true,
                current,
                branch: ax.state().branch,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ShaftSegment;
    use crate::hysteresis::HysteresisInputs;
    use crate::{deg, rad};

    fn params() -> HysteresisParams {
        HysteresisParams::derive(HysteresisInputs::default()).unwrap()
    }

    fn bent(alpha_deg: f64) -> ShaftShape {
        let seg = ShaftSegment::curved(100.0, rad(alpha_deg), 0.0).unwrap();
        ShaftShape::new(vec![seg], 1.0, 10.0).unwrap()
    }

    fn quiet(shape: ShaftShape) -> PlantConfig {
        let mut cfg = PlantConfig::new(params(), shape);
        cfg.current.noise_std = 0.0;
        cfg
    }

    #[test]
    fn dead_zone_current_is_baseline() {
        let cfg = quiet(ShaftShape::straight(500.0, 1.0, 10.0).unwrap());
        let mut ax = PlantAxis::new(&cfg, Axis::Ap, 1).unwrap();
        for i in -100..=100 {
            let q = rad(10.0) * i as f64 / 100.0;
            assert_eq!(ax.step(q).1, cfg.current.baseline);
        }
    }

    #[test]
    fn current_rises_past_both_boundaries() {
        let cfg = quiet(ShaftShape::straight(500.0, 1.0, 10.0).unwrap());
        let p = params();
        let c = |x: f64| cfg.current.clean(&p, x);
        let mut prev = c(p.d_pos());
        for i in 1..200 {
            let now = c(p.d_pos() + 1e-3 * i as f64);
            assert!(now > prev);
            prev = now;
        }
        assert!(c(p.d_neg() - 0.01) > c(p.d_neg() - 0.005));
        assert_eq!(c(p.d_neg() + 1e-6), cfg.current.baseline);
    }

    #[test]
    fn bent_shape_translates_the_valley() {
        let cfg = quiet(bent(90.0));
        let off = cfg.offset(Axis::Ap);
        assert!((deg(off) - 9.0).abs() < 1e-9);
        let straight = quiet(ShaftShape::straight(157.0796, 1.0, 10.0).unwrap());
        let mut a = PlantAxis::new(&cfg, Axis::Ap, 1).unwrap();
        let mut b = PlantAxis::new(&straight, Axis::Ap, 1).unwrap();
        for i in 0..400 {
            let q = rad(40.0) * (i as f64 * 0.03).sin();
            assert_eq!(a.step(q), b.step(q - off));
        }
    }

    #[test]
    fn wall_current_is_steep() {
        let mut cfg = quiet(ShaftShape::straight(500.0, 1.0, 10.0).unwrap());
        cfg.walls_ap.upper = Some(rad(5.0));
        let mut ax = PlantAxis::new(&cfg, Axis::Ap, 1).unwrap();
        let c0 = ax.step(rad(5.0)).1;
        let c1 = ax.step(rad(5.1)).1;
        assert!((c1 - c0) / rad(0.1) >= 10.0 * cfg.current.gain);
    }

    #[test]
    fn same_seed_same_noise() {
        let cfg = PlantConfig::new(params(), bent(45.0));
        let mut a = Plant::new(&cfg, 42).unwrap();
        let mut b = Plant::new(&cfg, 42).unwrap();
        let mut c = Plant::new(&cfg, 43).unwrap();
        let mut differs = false;
        for i in 0..100 {
            let q = 0.001 * i as f64;
            let x = a.axis_mut(Axis::Lr).step(q);
            assert_eq!(x, b.axis_mut(Axis::Lr).step(q));
            differs |= x != c.axis_mut(Axis::Lr).step(q);
        }
        assert!(differs);
    }

    #[test]
    fn axes_have_distinct_noise() {
        let cfg = PlantConfig::new(params(), bent(45.0));
        let mut p = Plant::new(&cfg, 9).unwrap();
        let a = p.axis_mut(Axis::Ap).step(0.0).1;
        let b = p.axis_mut(Axis::Lr).step(0.0).1;
        assert_ne!(a, b);
    }

    #[test]
    fn invalid_current_model_is_rejected() {
        let mut cfg = PlantConfig::new(params(), bent(45.0));
        cfg.current.gain = 0.0;
        assert!(matches!(Plant::new(&cfg, 0), Err(Error::Config(_))));
        cfg.current.gain = 1.0;
        cfg.current.noise_std = -1.0;
        assert!(Plant::new(&cfg, 0).is_err());
    }
}
