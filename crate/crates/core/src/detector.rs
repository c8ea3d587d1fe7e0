//! Online detection of the dead-zone translation from motor current.
//!
//! The knob is stepped away from a point inside the dead zone while the
//! filtered current slope is watched. A slope above the lower threshold
//! marks the dead-zone edge; one above the upper threshold is treated as an
//! obstacle and reverses the search.

use serde::{Deserialize, Serialize};

use crate::dsp::{ButterworthLowpass, FilterSpec, GradientWindow};
use crate::error::{Error, Result};
use crate::hysteresis::{Direction, HysteresisParams};
use crate::plant::CurrentProbe;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Thresholds {
    /// Explicit slope thresholds in current units per radian.
    Fixed { eps_lower: f64, eps_upper: f64 },
    /// Derived from the current noise seen while holding still.
    Auto {
        /// Readings taken at the start point.
        dwell_readings: usize,
        /// Lower threshold in standard deviations above the mean.
        sigmas: f64,
        /// Lower bound on the lower threshold.
        floor: f64,
        /// Upper threshold as a multiple of the lower one.
        upper_ratio: f64,
    },
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::Auto {
            dwell_readings: 32,
            sigmas: 6.0,
            floor: 0.05,
            upper_ratio: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub thresholds: Thresholds,
    /// Knob step per iteration, radians.
    pub step_u: f64,
    pub max_iterations: usize,
    pub initial_direction: Direction,
    /// Ticks the knob is held after each step before the current is read.
    pub dwell_ticks: usize,
    /// Readings per slope estimate.
    pub window: usize,
    pub filter_order: usize,
    pub filter_cutoff_hz: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            step_u: 0.5f64.to_radians(),
            max_iterations: 400,
            initial_direction: Direction::Positive,
            dwell_ticks: 8,
            window: crate::dsp::DEFAULT_WINDOW,
            filter_order: 3,
            filter_cutoff_hz: 20.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        match self.thresholds {
            Thresholds::Fixed {
                eps_lower,
                eps_upper,
            } => {
                if !(eps_lower > 0.0 && eps_lower < eps_upper && eps_upper.is_finite()) {
                    return Err(Error::config(
                        "thresholds must satisfy 0 < eps_lower < eps_upper",
                    ));
                }
            }
            Thresholds::Auto {
                dwell_readings,
                sigmas,
                floor,
                upper_ratio,
            } => {
                if dwell_readings < self.window + 2 {
                    return Err(Error::config(format!(
                        "auto thresholds need at least {} dwell readings",
                        self.window + 2
                    )));
                }
                if !(sigmas >= 0.0 && floor > 0.0 && upper_ratio > 1.0) {
                    return Err(Error::config(
                        "auto thresholds need sigmas >= 0, floor > 0, ratio > 1",
                    ));
                }
            }
        }
        if !(self.step_u.is_finite() && self.step_u > 0.0) {
            return Err(Error::config("step_u must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations must be >= 1"));
        }
        if self.initial_direction == Direction::Still {
            return Err(Error::config(
                "initial direction must be positive or negative",
            ));
        }
        if self.dwell_ticks == 0 {
            return Err(Error::config("dwell_ticks must be >= 1"));
        }
        if self.window < 2 {
            return Err(Error::config(
                "slope window must span at least two readings",
            ));
        }
        Ok(())
    }

    fn filter_spec(&self, sample_rate_hz: f64) -> FilterSpec {
        FilterSpec {
            order: self.filter_order,
            cutoff_hz: self.filter_cutoff_hz,
            sample_rate_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Positive,
    Negative,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Positive => "positive",
            Side::Negative => "negative",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftEstimate {
    pub d_tilde_pos: f64,
    pub d_tilde_neg: f64,
    pub offset: f64,
    pub detected_side: Side,
    pub iterations_used: usize,
    pub direction_flips: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Event {
    Dwell,
    Step,
    Flip,
    Detect,
}

impl Event {
    pub fn as_str(self) -> &'static str {
        match self {
            Event::Dwell => "dwell",
            Event::Step => "step",
            Event::Flip => "flip",
            Event::Detect => "detect",
        }
    }
}

/// One reading of the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    /// Zero for threshold-calibration readings.
    pub iteration: usize,
    pub q: f64,
    /// Filtered current.
    pub current: f64,
    /// Slope along the search direction, once the window is full.
    pub grad: Option<f64>,
    pub direction: Direction,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub estimate: ShiftEstimate,
    pub eps_lower: f64,
    pub eps_upper: f64,
    pub log: Vec<LogRow>,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum DetectError {
    #[error("no dead-zone edge found within {iterations} iterations")]
    Timeout { iterations: usize, log: Vec<LogRow> },
    #[error("non-finite current reading at q = {q} rad (iteration {iteration})")]
    Sensor { iteration: usize, q: f64 },
    #[error("invalid detector setup: {0}")]
    Setup(String),
}

struct Reader<'a, P: CurrentProbe> {
    probe: &'a mut P,
    filter: ButterworthLowpass,
    ticks: usize,
}

impl<P: CurrentProbe> Reader<'_, P> {
    fn read(&mut self, q: f64, iteration: usize) -> Result<f64, DetectError> {
        let mut out = f64::NAN;
        for _ in 0..self.ticks {
            let c = self.probe.command(q);
            if !c.is_finite() {
                return Err(DetectError::Sensor { iteration, q });
            }
            out = self.filter.process(c);
        }
        Ok(out)
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, var.sqrt())
}

/// Searches for a dead-zone edge starting from `start_q` (default: the
/// centre of the calibrated dead zone) and returns the translation of the
/// calibrated model that explains it.
pub fn detect_shift<P: CurrentProbe>(
    cfg: &DetectorConfig,
    calib: &HysteresisParams,
    probe: &mut P,
    start_q: Option<f64>,
) -> Result<Detection, DetectError> {
    cfg.validate()
        .map_err(|e| DetectError::Setup(e.to_string()))?;
    let spec = cfg.filter_spec(probe.sample_rate_hz());
    let filter = ButterworthLowpass::new(spec).map_err(|e| DetectError::Setup(e.to_string()))?;
    let mut reader = Reader {
        probe,
        filter,
        ticks: cfg.dwell_ticks,
    };
    let mut q = start_q.unwrap_or_else(|| calib.dead_zone_center());
    let mut direction = cfg.initial_direction;
    let mut log = Vec::new();

    let (eps_lower, eps_upper) = match cfg.thresholds {
        Thresholds::Fixed {
            eps_lower,
            eps_upper,
        } => (eps_lower, eps_upper),
        Thresholds::Auto {
            dwell_readings,
            sigmas,
            floor,
            upper_ratio,
        } => {
            let mut readings = Vec::with_capacity(dwell_readings);
            for _ in 0..dwell_readings {
                let c = reader.read(q, 0)?;
                readings.push(c);
                log.push(LogRow {
                    iteration: 0,
                    q,
                    current: c,
                    grad: None,
                    direction,
                    event: Event::Dwell,
                });
            }
            // slopes the noise alone would produce over a window of steps
            let span = (cfg.window - 1) as f64 * cfg.step_u;
            let pseudo: Vec<f64> = readings
                .windows(cfg.window)
                .map(|w| (w[cfg.window - 1] - w[0]) / span)
                .collect();
            let (m, s) = mean_std(&pseudo);
            let lower = (m + sigmas * s).max(floor);
            (lower, upper_ratio * lower)
        }
    };

    let mut window =
        GradientWindow::new(cfg.window).map_err(|e| DetectError::Setup(e.to_string()))?;
    let mut flips = 0;
    for iteration in 1..=cfg.max_iterations {
        q += direction.sign() * cfg.step_u;
        let c = reader.read(q, iteration)?;
        let slope = window.push(q, c);
        let grad = slope.map(|(_, g)| g.value * direction.sign());
        let mut row = LogRow {
            iteration,
            q,
            current: c,
            grad,
            direction,
            event: Event::Step,
        };
        if let (Some((q_centre, _)), Some(g)) = (slope, grad) {
            if g >= eps_upper {
                row.event = Event::Flip;
                log.push(row);
                direction = direction.reversed();
                window.clear();
                reader.filter.reset();
                flips += 1;
                continue;
            }
            if g >= eps_lower {
                row.event = Event::Detect;
                log.push(row);
                let (side, edge) = match direction {
                    Direction::Negative => (Side::Negative, calib.d_neg()),
                    _ => (Side::Positive, calib.d_pos()),
                };
                let offset = q_centre - edge;
                let shifted = calib.shifted(offset);
                return Ok(Detection {
                    estimate: ShiftEstimate {
                        d_tilde_pos: shifted.d_pos(),
                        d_tilde_neg: shifted.d_neg(),
                        offset,
                        detected_side: side,
                        iterations_used: iteration,
                        direction_flips: flips,
                    },
                    eps_lower,
                    eps_upper,
                    log,
                });
            }
        }
        log.push(row);
    }
    Err(DetectError::Timeout {
        iterations: cfg.max_iterations,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hysteresis::HysteresisInputs;
    use crate::rad;

    /// Scripted current: flat valley between two edges plus a quadratic rise.
    struct Valley {
        lo: f64,
        hi: f64,
        commands: Vec<f64>,
        nan_after: Option<usize>,
    }

    impl CurrentProbe for Valley {
        fn sample_rate_hz(&self) -> f64 {
            100.0
        }

        fn command(&mut self, q: f64) -> f64 {
            self.commands.push(q);
            if self.nan_after.is_some_and(|n| self.commands.len() > n) {
                return f64::NAN;
            }
            let s = (q - self.hi).max(self.lo - q).max(0.0);
            1.0 + 10.0 * s * s
        }
    }

    fn calib() -> HysteresisParams {
        HysteresisParams::derive(HysteresisInputs::default()).unwrap()
    }

    fn valley(off: f64) -> Valley {
        let p = calib();
        Valley {
            lo: p.d_neg() + off,
            hi: p.d_pos() + off,
            commands: Vec::new(),
            nan_after: None,
        }
    }

    #[test]
    fn finds_the_positive_edge() {
        let mut v = valley(rad(6.0));
        let d = detect_shift(&DetectorConfig::default(), &calib(), &mut v, None).unwrap();
        assert!((d.estimate.offset - rad(6.0)).abs() <= rad(0.5));
        assert_eq!(d.estimate.detected_side, Side::Positive);
        assert_eq!(d.estimate.direction_flips, 0);
        let width = d.estimate.d_tilde_pos - d.estimate.d_tilde_neg;
        assert!((width - (calib().d_pos() - calib().d_neg())).abs() < 1e-12);
        // search is monotone and stays below the true lower edge
        assert!(v.commands.windows(2).all(|w| w[1] >= w[0]));
        assert!(v.commands.iter().all(|&q| q > v.lo));
    }

    #[test]
    fn negative_start_direction_finds_the_negative_edge() {
        let cfg = DetectorConfig {
            initial_direction: Direction::Negative,
            ..Default::default()
        };
        let mut v = valley(rad(-3.0));
        let d = detect_shift(&cfg, &calib(), &mut v, None).unwrap();
        assert_eq!(d.estimate.detected_side, Side::Negative);
        assert!((d.estimate.offset - rad(-3.0)).abs() <= rad(0.5));
    }

    #[test]
    fn fixed_thresholds_are_used_verbatim() {
        let cfg = DetectorConfig {
            thresholds: Thresholds::Fixed {
                eps_lower: 0.2,
                eps_upper: 50.0,
            },
            ..Default::default()
        };
        let d = detect_shift(&cfg, &calib(), &mut valley(0.0), None).unwrap();
        assert_eq!((d.eps_lower, d.eps_upper), (0.2, 50.0));
        assert!(d.log.iter().all(|r| r.event != Event::Dwell));
        // valley gain is 10 per rad^2
        assert!(d.estimate.offset.abs() <= rad(0.5) + 0.2 / 20.0);
    }

    #[test]
    fn timeout_keeps_the_log() {
        let cfg = DetectorConfig {
            max_iterations: 5,
            ..Default::default()
        };
        match detect_shift(&cfg, &calib(), &mut valley(0.0), None) {
            Err(DetectError::Timeout { iterations, log }) => {
                assert_eq!(iterations, 5);
                assert_eq!(log.iter().filter(|r| r.event == Event::Step).count(), 5);
            }
            other => panic!("expected timeout, got {other:?}"),
        }
    }

    #[test]
    fn nan_current_is_a_sensor_error() {
        let mut v = valley(0.0);
        v.nan_after = Some(300);
        let err = detect_shift(&DetectorConfig::default(), &calib(), &mut v, None).unwrap_err();
        assert!(matches!(err, DetectError::Sensor { .. }));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = [
            DetectorConfig {
                step_u: 0.0,
                ..Default::default()
            },
            DetectorConfig {
                max_iterations: 0,
                ..Default::default()
            },
            DetectorConfig {
                thresholds: Thresholds::Fixed {
                    eps_lower: 2.0,
                    eps_upper: 1.0,
                },
                ..Default::default()
            },
            DetectorConfig {
                initial_direction: Direction::Still,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
            assert!(matches!(
                detect_shift(&cfg, &calib(), &mut valley(0.0), None),
                Err(DetectError::Setup(_))
            ));
        }
    }
}
