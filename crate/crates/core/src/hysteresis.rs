//! Piecewise-linear dead-zone + backlash hysteresis.
//!
//! The model has eight linear branches. Moving in the positive direction the
//! output follows
//!
//! * `L1` hold at the level reached when the motion reversed,
//! * `L2` `omega (x - d_hat_pos) + h_pos`,
//! * `L3` the plateau `h_pos`,
//! * `L4` `omega (x - d_pos) + h_pos`,
//!
//! and in the negative direction
//!
//! * `L5` hold at the level reached when the motion reversed,
//! * `L6` `omega (x - d_hat_neg) + h_neg`,
//! * `L7` the plateau `h_neg`,
//! * `L8` `omega (x - d_neg) + h_neg`.
//!
//! `L2..L4` form the ascending envelope and `L6..L8` the descending one.
//! `L1`/`L5` are the backlash holds; after a full sweep to a reference
//! input `x_ref` they sit exactly at `y_ref`.
//!
//! The output at every step is the previous output clamped into the band
//! `[min(asc, desc), max(asc, desc)]` evaluated at the new input. When the
//! ascending envelope lies below the descending one this is precisely the
//! branch-switching rule above; when the plateaus cross (`h_pos > h_neg`)
//! the band stays well defined, so the output remains continuous and
//! `omega`-Lipschitz in the input for every parameter set.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slope used when none has been identified.
pub const DEFAULT_OMEGA: f64 = 1.45;

/// Default calibration sweep bound, degrees.
pub const DEFAULT_X_REF_DEG: f64 = 40.0;

#[inline]
fn hat_pos(h_pos: f64, h_neg: f64, omega: f64, d_neg: f64, b_neg: f64) -> f64 {
    (h_pos - h_neg) / omega + d_neg + b_neg
}

#[inline]
fn hat_neg(h_pos: f64, h_neg: f64, omega: f64, d_pos: f64, b_pos: f64) -> f64 {
    (h_neg - h_pos) / omega + d_pos - b_pos
}

/// The measured (or assumed) model parameters from which the rest follow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HysteresisInputs {
    pub d_pos: f64,
    pub d_neg: f64,
    pub b_pos: f64,
    pub b_neg: f64,
    pub omega: f64,
    pub h_pos: f64,
    pub h_neg: f64,
    /// Positive reference input (signed, usually `+x_ref`).
    pub x_ref_pos: f64,
    /// Negative reference input (signed, usually `-x_ref`).
    pub x_ref_neg: f64,
}

impl Default for HysteresisInputs {
    /// A representative catheter: dead zone of +17/-16 degrees, 4/3 degrees
    /// of backlash and plateaus at +/-1 degree.
    fn default() -> Self {
        let r = f64::to_radians;
        Self {
            d_pos: r(17.0),
            d_neg: r(-16.0),
            b_pos: r(4.0),
            b_neg: r(3.0),
            omega: DEFAULT_OMEGA,
            h_pos: r(1.0),
            h_neg: r(-1.0),
            x_ref_pos: r(DEFAULT_X_REF_DEG),
            x_ref_neg: r(-DEFAULT_X_REF_DEG),
        }
    }
}

/// Full parameter set. Construct with [`HysteresisParams::derive`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisParams {
    d_pos: f64,
    d_neg: f64,
    b_pos: f64,
    b_neg: f64,
    omega: f64,
    h_pos: f64,
    h_neg: f64,
    d_hat_pos: f64,
    d_hat_neg: f64,
    x_ref_pos: f64,
    y_ref_pos: f64,
    x_ref_neg: f64,
    y_ref_neg: f64,
}

impl HysteresisParams {
    /// Fills in the opposite-side dead-zone boundaries and the reference
    /// outputs from the primary parameters.
    pub fn derive(inputs: HysteresisInputs) -> Result<Self> {
        let HysteresisInputs {
            d_pos,
            d_neg,
            b_pos,
            b_neg,
            omega,
            h_pos,
            h_neg,
            x_ref_pos,
            x_ref_neg,
        } = inputs;
        let all = [
            d_pos, d_neg, b_pos, b_neg, omega, h_pos, h_neg, x_ref_pos, x_ref_neg,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("hysteresis parameters must be finite"));
        }
        if omega <= 0.0 {
            return Err(Error::domain(format!(
                "slope omega must be > 0, got {omega}"
            )));
        }
        if d_neg >= d_pos {
            return Err(Error::domain(format!(
                "dead zone needs d_neg < d_pos, got d_neg={d_neg} d_pos={d_pos}"
            )));
        }
        if b_pos < 0.0 || b_neg < 0.0 {
            return Err(Error::domain("backlash sizes must be >= 0"));
        }
        Ok(Self {
            d_pos,
            d_neg,
            b_pos,
            b_neg,
            omega,
            h_pos,
            h_neg,
            d_hat_pos: hat_pos(h_pos, h_neg, omega, d_neg, b_neg),
            d_hat_neg: hat_neg(h_pos, h_neg, omega, d_pos, b_pos),
            x_ref_pos,
            y_ref_pos: omega * (x_ref_pos - d_pos) + h_pos,
            x_ref_neg,
            y_ref_neg: omega * (x_ref_neg - d_neg) + h_neg,
        })
    }

    /// Translates every input-axis quantity by `offset`. Output-axis
    /// quantities (heights, reference outputs) and backlash are untouched.
    pub fn shifted(&self, offset: f64) -> Self {
        let d_pos = self.d_pos + offset;
        let d_neg = self.d_neg + offset;
        Self {
            d_pos,
            d_neg,
            d_hat_pos: hat_pos(self.h_pos, self.h_neg, self.omega, d_neg, self.b_neg),
            d_hat_neg: hat_neg(self.h_pos, self.h_neg, self.omega, d_pos, self.b_pos),
            x_ref_pos: self.x_ref_pos + offset,
            x_ref_neg: self.x_ref_neg + offset,
            ..*self
        }
    }

    pub fn inputs(&self) -> HysteresisInputs {
        HysteresisInputs {
            d_pos: self.d_pos,
            d_neg: self.d_neg,
            b_pos: self.b_pos,
            b_neg: self.b_neg,
            omega: self.omega,
            h_pos: self.h_pos,
            h_neg: self.h_neg,
            x_ref_pos: self.x_ref_pos,
            x_ref_neg: self.x_ref_neg,
        }
    }

    pub fn d_pos(&self) -> f64 {
        self.d_pos
    }
    pub fn d_neg(&self) -> f64 {
        self.d_neg
    }
    pub fn b_pos(&self) -> f64 {
        self.b_pos
    }
    pub fn b_neg(&self) -> f64 {
        self.b_neg
    }
    pub fn omega(&self) -> f64 {
        self.omega
    }
    pub fn h_pos(&self) -> f64 {
        self.h_pos
    }
    pub fn h_neg(&self) -> f64 {
        self.h_neg
    }
    pub fn d_hat_pos(&self) -> f64 {
        self.d_hat_pos
    }
    pub fn d_hat_neg(&self) -> f64 {
        self.d_hat_neg
    }
    pub fn x_ref_pos(&self) -> f64 {
        self.x_ref_pos
    }
    pub fn y_ref_pos(&self) -> f64 {
        self.y_ref_pos
    }
    pub fn x_ref_neg(&self) -> f64 {
        self.x_ref_neg
    }
    pub fn y_ref_neg(&self) -> f64 {
        self.y_ref_neg
    }

    /// Midpoint of the dead zone.
    pub fn dead_zone_center(&self) -> f64 {
        0.5 * (self.d_pos + self.d_neg)
    }

    fn ascending(&self) -> Ramp {
        Ramp {
            height: self.h_pos,
            left: self.d_hat_pos.min(self.d_pos),
            right: self.d_pos,
            slope: self.omega,
        }
    }

    fn descending(&self) -> Ramp {
        Ramp {
            height: self.h_neg,
            left: self.d_neg,
            right: self.d_hat_neg.max(self.d_neg),
            slope: self.omega,
        }
    }

    /// Lower and upper edge of the reachable output band at input `x`.
    pub fn band(&self, x: f64) -> (f64, f64) {
        let (a, d) = (self.ascending().value(x), self.descending().value(x));
        (a.min(d), a.max(d))
    }

    /// Output produced by driving the input to `x` from far below.
    pub fn ascending_output(&self, x: f64) -> f64 {
        self.band(x).0
    }

    /// Output produced by driving the input to `x` from far above.
    pub fn descending_output(&self, x: f64) -> f64 {
        self.band(x).1
    }

    fn lower_edge(&self, x: f64) -> (f64, Branch) {
        let (asc, desc) = (self.ascending(), self.descending());
        let (a, d) = (asc.value(x), desc.value(x));
        if a <= d {
            (a, asc.piece(x).ascending_branch())
        } else {
            (d, desc.piece(x).descending_branch())
        }
    }

    fn upper_edge(&self, x: f64) -> (f64, Branch) {
        let (asc, desc) = (self.ascending(), self.descending());
        let (a, d) = (asc.value(x), desc.value(x));
        if d >= a {
            (d, desc.piece(x).descending_branch())
        } else {
            (a, asc.piece(x).ascending_branch())
        }
    }

    /// Smallest input whose lower band edge reaches `y`.
    fn lower_edge_inverse(&self, y: f64) -> f64 {
        self.ascending()
            .first_at_least(y)
            .max(self.descending().first_at_least(y))
    }

    /// Largest input whose upper band edge does not exceed `y`.
    fn upper_edge_inverse(&self, y: f64) -> f64 {
        self.ascending()
            .last_at_most(y)
            .min(self.descending().last_at_most(y))
    }
}

/// `height` on `[left, right]`, slope `slope` outside.
#[derive(Debug, Clone, Copy)]
struct Ramp {
    height: f64,
    left: f64,
    right: f64,
    slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Piece {
    Lower,
    Plateau,
    Upper,
}

impl Piece {
    fn ascending_branch(self) -> Branch {
        match self {
            Piece::Lower => Branch::L2,
            Piece::Plateau => Branch::L3,
            Piece::Upper => Branch::L4,
        }
    }

    fn descending_branch(self) -> Branch {
        match self {
            Piece::Upper => Branch::L6,
            Piece::Plateau => Branch::L7,
            Piece::Lower => Branch::L8,
        }
    }
}

impl Ramp {
    fn value(&self, x: f64) -> f64 {
        if x < self.left {
            self.height + self.slope * (x - self.left)
        } else if x > self.right {
            self.height + self.slope * (x - self.right)
        } else {
            self.height
        }
    }

    fn piece(&self, x: f64) -> Piece {
        if x < self.left {
            Piece::Lower
        } else if x > self.right {
            Piece::Upper
        } else {
            Piece::Plateau
        }
    }

    fn first_at_least(&self, y: f64) -> f64 {
        if y <= self.height {
            self.left + (y - self.height) / self.slope
        } else {
            self.right + (y - self.height) / self.slope
        }
    }

    fn last_at_most(&self, y: f64) -> f64 {
        if y >= self.height {
            self.right + (y - self.height) / self.slope
        } else {
            self.left + (y - self.height) / self.slope
        }
    }
}

/// Active branch label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    L1,
    L2,
    L3,
    L4,
    L5,
    L6,
    L7,
    L8,
}

impl Branch {
    pub const ALL: [Branch; 8] = [
        Branch::L1,
        Branch::L2,
        Branch::L3,
        Branch::L4,
        Branch::L5,
        Branch::L6,
        Branch::L7,
        Branch::L8,
    ];

    /// Plateau branches carry no slope.
    pub fn is_flat(self) -> bool {
        matches!(self, Branch::L1 | Branch::L3 | Branch::L5 | Branch::L7)
    }

    pub fn is_hold(self) -> bool {
        matches!(self, Branch::L1 | Branch::L5)
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = Branch::ALL.iter().position(|b| b == self).unwrap() + 1;
        write!(f, "L{n}")
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let idx: usize = s
            .strip_prefix('L')
            .and_then(|n| n.parse().ok())
            .filter(|n| (1..=8).contains(n))
            .ok_or_else(|| Error::config(format!("unknown branch label {s:?}")))?;
        Ok(Branch::ALL[idx - 1])
    }
}

/// Sign of the input velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Negative,
    Still,
    Positive,
}

impl Direction {
    pub fn of(v: f64) -> Self {
        if v > 0.0 {
            Direction::Positive
        } else if v < 0.0 {
            Direction::Negative
        } else {
            Direction::Still
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Direction::Negative => -1.0,
            Direction::Still => 0.0,
            Direction::Positive => 1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Negative => Direction::Positive,
            Direction::Still => Direction::Still,
            Direction::Positive => Direction::Negative,
        }
    }
}

/// Per-axis model memory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisState {
    pub branch: Branch,
    pub x_prev: f64,
    /// Last non-zero velocity sign (`Still` only before the first move).
    pub v_prev: Direction,
    pub y_prev: f64,
}

impl HysteresisState {
    /// Slack knob resting at `x0`: the output is zero if the band admits it,
    /// otherwise the nearest band edge.
    pub fn at_rest(params: &HysteresisParams, x0: f64) -> Self {
        let (lo, lo_branch) = params.lower_edge(x0);
        let (hi, hi_branch) = params.upper_edge(x0);
        let y = 0.0_f64.clamp(lo, hi);
        let branch = if y == lo && lo_branch.is_flat() {
            lo_branch
        } else if y == hi && hi_branch.is_flat() {
            hi_branch
        } else if y == lo && lo < hi {
            lo_branch
        } else if y == hi && lo < hi {
            hi_branch
        } else {
            Branch::L3
        };
        Self {
            branch,
            x_prev: x0,
            v_prev: Direction::Still,
            y_prev: y,
        }
    }

    /// Advances the model to input `x` and returns the new output.
    ///
    /// The model is rate independent: only the input value and the sign of
    /// its change matter. Zero velocity keeps the current branch.
    pub fn step(&mut self, params: &HysteresisParams, x: f64) -> f64 {
        let dir = Direction::of(x - self.x_prev);
        let (lo, lo_branch) = params.lower_edge(x);
        let (hi, hi_branch) = params.upper_edge(x);
        let y_prev = self.y_prev;
        let (y, branch) = match dir {
            Direction::Positive => {
                if y_prev <= lo {
                    (lo, lo_branch)
                } else if y_prev > hi {
                    (hi, hi_branch)
                } else {
                    (y_prev, Branch::L1)
                }
            }
            Direction::Negative => {
                if y_prev >= hi {
                    (hi, hi_branch)
                } else if y_prev < lo {
                    (lo, lo_branch)
                } else {
                    (y_prev, Branch::L5)
                }
            }
            Direction::Still => (y_prev.clamp(lo, hi), self.branch),
        };
        self.x_prev = x;
        self.y_prev = y;
        self.branch = branch;
        if dir != Direction::Still {
            self.v_prev = dir;
        }
        y
    }
}

/// Inverse could not be realised inside the knob range.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("desired output needs knob angle {required} rad, limited to {clamped} rad")]
pub struct Saturation {
    pub required: f64,
    pub clamped: f64,
}

/// Knob command that brings the model from `state` to `y_desired`.
///
/// A rising target is met on the lower band edge and a falling one on the
/// upper band edge, so a reversal of the target jumps the command across
/// the backlash and dead zone to pre-load the opposing tendon. When the
/// target equals the current output, `direction` picks the edge to wait on;
/// continuing in the current direction keeps the current command.
pub fn inverse(
    params: &HysteresisParams,
    state: &HysteresisState,
    y_desired: f64,
    direction: Direction,
    knob_limit: f64,
) -> Result<f64, Saturation> {
    let y = state.y_prev;
    let x = if y_desired > y {
        params.lower_edge_inverse(y_desired)
    } else if y_desired < y {
        params.upper_edge_inverse(y_desired)
    } else {
        match direction {
            Direction::Positive => state.x_prev.max(params.lower_edge_inverse(y)),
            Direction::Negative => state.x_prev.min(params.upper_edge_inverse(y)),
            Direction::Still => state.x_prev,
        }
    };
    if x.abs() > knob_limit {
        Err(Saturation {
            required: x,
            clamped: x.clamp(-knob_limit, knob_limit),
        })
    } else {
        Ok(x)
    }
}
