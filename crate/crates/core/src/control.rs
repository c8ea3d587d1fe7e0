//! Feed-forward knob controllers.

use serde::{Deserialize, Serialize};

use crate::detector::ShiftEstimate;
use crate::error::{Error, Result};
use crate::hysteresis::{inverse, Direction, HysteresisParams, HysteresisState, Saturation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ControllerKind {
    /// Sends the desired angle unchanged.
    #[serde(rename = "none")]
    NoCompensation,
    /// Inverts the straight-shaft hysteresis model.
    #[serde(rename = "only")]
    CompensationOnly,
    /// Inverts the model translated by a detected shift.
    #[serde(rename = "shift")]
    CompensationShift,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [
        ControllerKind::NoCompensation,
        ControllerKind::CompensationOnly,
        ControllerKind::CompensationShift,
    ];

    /// Short name used in configs and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::NoCompensation => "none",
            ControllerKind::CompensationOnly => "only",
            ControllerKind::CompensationShift => "shift",
        }
    }

    /// Row label in reports.
    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::NoCompensation => "No compensation",
            ControllerKind::CompensationOnly => "Compensation only",
            ControllerKind::CompensationShift => "Compensation+Shift",
        }
    }
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ControllerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown controller '{s}' (expected none, only or shift)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerOptions {
    /// Largest knob angle magnitude ever commanded, radians.
    pub knob_limit: f64,
    /// Largest command change per tick, radians. `None` disables slewing.
    pub slew_per_tick: Option<f64>,
}

impl Default for ControllerOptions {
    fn default() -> Self {
        Self {
            knob_limit: 120f64.to_radians(),
            slew_per_tick: None,
        }
    }
}

impl ControllerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.knob_limit > 0.0) {
            return Err(Error::config("knob limit must be > 0"));
        }
        if let Some(s) = self.slew_per_tick {
            if !(s > 0.0) {
                return Err(Error::config("slew limit must be > 0"));
            }
        }
        Ok(())
    }
}

/// Output of one controller tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub command: f64,
    /// Set when the model asked for more than the knob limit allows.
    pub saturated: Option<Saturation>,
}

#[derive(Debug, Clone)]
struct Model {
    params: HysteresisParams,
    state: HysteresisState,
}

/// One knob's controller, holding its own copy of the model state.
#[derive(Debug, Clone)]
pub struct Controller {
    kind: ControllerKind,
    model: Option<Model>,
    opts: ControllerOptions,
    last_desired: Option<f64>,
    last_command: f64,
}

impl Controller {
    pub fn no_compensation(opts: ControllerOptions) -> Self {
        Self::build(ControllerKind::NoCompensation, None, opts)
    }

    pub fn compensation_only(params: HysteresisParams, opts: ControllerOptions) -> Self {
        Self::build(ControllerKind::CompensationOnly, Some(params), opts)
    }

    pub fn compensation_shift(
        params: HysteresisParams,
        shift: &ShiftEstimate,
        opts: ControllerOptions,
    ) -> Self {
        Self::build(
            ControllerKind::CompensationShift,
            Some(params.shifted(shift.offset)),
            opts,
        )
    }

    fn build(
        kind: ControllerKind,
        params: Option<HysteresisParams>,
        opts: ControllerOptions,
    ) -> Self {
        Self {
            kind,
            model: params.map(|params| Model {
                params,
                state: HysteresisState::at_rest(&params, 0.0),
            }),
            opts,
            last_desired: None,
            last_command: 0.0,
        }
    }

    pub fn kind(&self) -> ControllerKind {
        self.kind
    }

    /// Model the controller inverts, already shifted for
    /// `CompensationShift`.
    pub fn model(&self) -> Option<&HysteresisParams> {
        self.model.as_ref().map(|m| &m.params)
    }

    pub fn options(&self) -> &ControllerOptions {
        &self.opts
    }

    pub fn command(&mut self, q_desired: f64) -> Command {
        let direction = self
            .last_desired
            .map_or(Direction::Still, |prev| Direction::of(q_desired - prev));
        self.last_desired = Some(q_desired);
        let limit = self.opts.knob_limit;

        let (raw, mut saturated) = match &self.model {
            None => (q_desired, None),
            Some(m) => match inverse(&m.params, &m.state, q_desired, direction, limit) {
                Ok(x) => (x, None),
                Err(sat) => (sat.clamped, Some(sat)),
            },
        };
        let mut x = raw;
        if x.abs() > limit {
            saturated.get_or_insert(Saturation {
                required: x,
                clamped: x.clamp(-limit, limit),
            });
            x = x.clamp(-limit, limit);
        }
        if let Some(s) = self.opts.slew_per_tick {
            x = x.clamp(self.last_command - s, self.last_command + s);
        }
        if let Some(m) = &mut self.model {
            m.state.step(&m.params, x);
        }
        self.last_command = x;
        Command {
            command: x,
            saturated,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::Side;
    use crate::hysteresis::HysteresisInputs;
    use crate::rad;

    fn params() -> HysteresisParams {
        HysteresisParams::derive(HysteresisInputs::default()).unwrap()
    }

    fn estimate(offset: f64) -> ShiftEstimate {
        let p = params().shifted(offset);
        ShiftEstimate {
            d_tilde_pos: p.d_pos(),
            d_tilde_neg: p.d_neg(),
            offset,
            detected_side: Side::Positive,
            iterations_used: 1,
            direction_flips: 0,
        }
    }

    fn sine(n: usize) -> impl Iterator<Item = f64> {
        (0..n).map(move |i| rad(60.0) * (std::f64::consts::TAU * i as f64 / 2500.0).sin())
    }

    #[test]
    fn pass_through() {
        let mut c = Controller::no_compensation(ControllerOptions::default());
        assert_eq!(c.command(rad(12.3)).command, rad(12.3));
        let out = c.command(rad(500.0));
        assert_eq!(out.command, rad(120.0));
        assert!(out.saturated.is_some());
    }

    #[test]
    fn zero_shift_matches_uncompensated_shift_bitwise() {
        let opts = ControllerOptions::default();
        let mut a = Controller::compensation_only(params(), opts);
        let mut b = Controller::compensation_shift(params(), &estimate(0.0), opts);
        for q in sine(5000) {
            assert_eq!(
                a.command(q).command.to_bits(),
                b.command(q).command.to_bits()
            );
        }
    }

    #[test]
    fn model_matched_tracking() {
        // the controller's own model doubles as the plant
        let off = rad(9.0);
        let truth = params().shifted(off);
        let mut plant = HysteresisState::at_rest(&truth, 0.0);
        let mut c =
            Controller::compensation_shift(params(), &estimate(off), ControllerOptions::default());
        for (i, q) in sine(7500).enumerate() {
            let y = plant.step(&truth, c.command(q).command);
            if i > 2500 {
                assert!((y - q).abs() < 1e-3, "tick {i}: {y} vs {q}");
            }
        }
    }

    #[test]
    fn unshifted_model_on_shifted_plant_is_biased() {
        let off = rad(9.0);
        let truth = params().shifted(off);
        let mut plant = HysteresisState::at_rest(&truth, 0.0);
        let mut c = Controller::compensation_only(params(), ControllerOptions::default());
        let mut worst: f64 = 0.0;
        for (i, q) in sine(7500).enumerate() {
            let y = plant.step(&truth, c.command(q).command);
            // on the rising engaged branch the command lacks the offset
            if i > 2500 && q > rad(30.0) && (i % 2500) < 625 {
                assert!((q - y - 1.45 * off).abs() < 1e-9, "tick {i}");
            }
            worst = worst.max((y - q).abs());
        }
        assert!(worst > rad(10.0));
    }

    #[test]
    fn commands_stay_inside_the_knob_limit() {
        let opts = ControllerOptions {
            knob_limit: rad(45.0),
            slew_per_tick: None,
        };
        let mut cs = [
            Controller::no_compensation(opts),
            Controller::compensation_only(params(), opts),
            Controller::compensation_shift(params(), &estimate(rad(-7.0)), opts),
        ];
        for q in sine(5000) {
            for c in &mut cs {
                assert!(c.command(q).command.abs() <= rad(45.0));
            }
        }
    }

    #[test]
    fn slew_limit_bounds_each_step() {
        let opts = ControllerOptions {
            slew_per_tick: Some(rad(0.5)),
            ..Default::default()
        };
        let mut c = Controller::compensation_only(params(), opts);
        let mut prev = 0.0;
        for q in sine(5000) {
            let x = c.command(q).command;
            assert!((x - prev).abs() <= rad(0.5) + 1e-15);
            prev = x;
        }
    }

    #[test]
    fn names_parse() {
        for k in ControllerKind::ALL {
            assert_eq!(k.name().parse::<ControllerKind>().unwrap(), k);
        }
        assert!("pid".parse::<ControllerKind>().is_err());
    }
}
