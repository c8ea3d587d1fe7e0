//! Experiment protocol: input generators, shape scenarios, repeated trials,
//! error metrics and report tables.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{Controller, ControllerKind, ControllerOptions};
use crate::detector::{detect_shift, Detection, DetectorConfig, ShiftEstimate};
use crate::error::{Error, Result};
use crate::geometry::ShaftShape;
use crate::hysteresis::{HysteresisInputs, HysteresisParams};
use crate::plant::{
    run_trajectory, Axis, AxisDrive, CurrentModel, Plant, PlantAxis, PlantConfig, TraceSample,
};

/// Desired knob motion. Angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InputSpec {
    /// `A sin(2 pi f t)`.
    Periodic {
        amplitude_deg: f64,
        frequency_hz: f64,
        duration_s: f64,
    },
    /// Sum of sines with incommensurate frequencies.
    Nonperiodic {
        amplitudes_deg: Vec<f64>,
        frequencies_hz: Vec<f64>,
        duration_s: f64,
    },
    /// Triangle wave `0 -> +A -> -A -> 0` at constant rate.
    Sweep {
        amplitude_deg: f64,
        rate_deg_s: f64,
        cycles: usize,
    },
}

impl InputSpec {
    /// 60 degrees at 0.04 Hz for three periods.
    pub fn periodic() -> Self {
        InputSpec::Periodic {
            amplitude_deg: 60.0,
            frequency_hz: 0.04,
            duration_s: 75.0,
        }
    }

    /// `30 sin(2 pi 0.02 t) + 30 sin(2 pi 0.02 sqrt(3) t)` for 150 s.
    pub fn nonperiodic() -> Self {
        InputSpec::Nonperiodic {
            amplitudes_deg: vec![30.0, 30.0],
            frequencies_hz: vec![0.02, 0.02 * 3f64.sqrt()],
            duration_s: 150.0,
        }
    }

    /// Two cycles of +/-40 degrees at 40 degrees per second.
    pub fn sweep() -> Self {
        InputSpec::Sweep {
            amplitude_deg: 40.0,
            rate_deg_s: 40.0,
            cycles: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("{what} must be > 0")))
            }
        };
        match self {
            InputSpec::Periodic {
                amplitude_deg,
                frequency_hz,
                duration_s,
            } => {
                pos(*frequency_hz, "frequency")?;
                pos(*duration_s, "duration")?;
                if !amplitude_deg.is_finite() {
                    return Err(Error::config("amplitude must be finite"));
                }
            }
            InputSpec::Nonperiodic {
                amplitudes_deg,
                frequencies_hz,
                duration_s,
            } => {
                if amplitudes_deg.is_empty() || amplitudes_deg.len() != frequencies_hz.len() {
                    return Err(Error::config(
                        "nonperiodic input needs one amplitude per frequency",
                    ));
                }
                for f in frequencies_hz {
                    pos(*f, "frequency")?;
                }
                pos(*duration_s, "duration")?;
            }
            InputSpec::Sweep {
                amplitude_deg,
                rate_deg_s,
                cycles,
            } => {
                pos(*amplitude_deg, "sweep amplitude")?;
                pos(*rate_deg_s, "sweep rate")?;
                if *cycles == 0 {
                    return Err(Error::config("sweep needs at least one cycle"));
                }
            }
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        match self {
            InputSpec::Periodic { duration_s, .. } | InputSpec::Nonperiodic { duration_s, .. } => {
                *duration_s
            }
            InputSpec::Sweep {
                amplitude_deg,
                rate_deg_s,
                cycles,
            } => *cycles as f64 * 4.0 * amplitude_deg / rate_deg_s,
        }
    }

    /// Same motion played `speed` times faster over the same duration.
    pub fn faster(&self, speed: f64) -> Self {
        match self.clone() {
            InputSpec::Periodic {
                amplitude_deg,
                frequency_hz,
                duration_s,
            } => InputSpec::Periodic {
                amplitude_deg,
                frequency_hz: frequency_hz * speed,
                duration_s,
            },
            InputSpec::Nonperiodic {
                amplitudes_deg,
                frequencies_hz,
                duration_s,
            } => InputSpec::Nonperiodic {
                amplitudes_deg,
                frequencies_hz: frequencies_hz.iter().map(|f| f * speed).collect(),
                duration_s,
            },
            InputSpec::Sweep {
                amplitude_deg,
                rate_deg_s,
                cycles,
            } => InputSpec::Sweep {
                amplitude_deg,
                rate_deg_s: rate_deg_s * speed,
                cycles: ((cycles as f64) * speed).round().max(1.0) as usize,
            },
        }
    }

    /// Transient to drop before scoring, seconds.
    pub fn default_discard_s(&self) -> f64 {
        match self {
            InputSpec::Periodic { frequency_hz, .. } => 1.0 / frequency_hz,
            InputSpec::Nonperiodic { .. } => 50.0,
            InputSpec::Sweep { .. } => 0.0,
        }
    }
}

/// Samples `spec` at `sample_rate` Hz from `t = 0`. Degrees.
pub fn gen_input(spec: &InputSpec, sample_rate: f64) -> Vec<f64> {
    let n = (spec.duration_s() * sample_rate).round() as usize + 1;
    (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate;
            match spec {
                InputSpec::Periodic {
                    amplitude_deg,
                    frequency_hz,
                    ..
                } => amplitude_deg * (2.0 * PI * frequency_hz * t).sin(),
                InputSpec::Nonperiodic {
                    amplitudes_deg,
                    frequencies_hz,
                    ..
                } => amplitudes_deg
                    .iter()
                    .zip(frequencies_hz)
                    .map(|(a, f)| a * (2.0 * PI * f * t).sin())
                    .sum(),
                InputSpec::Sweep {
                    amplitude_deg,
                    rate_deg_s,
                    ..
                } => triangle(rate_deg_s * t, *amplitude_deg),
            }
        })
        .collect()
}

fn triangle(travel: f64, a: f64) -> f64 {
    let p = travel.rem_euclid(4.0 * a);
    if p <= a {
        p
    } else if p <= 3.0 * a {
        2.0 * a - p
    } else {
        p - 4.0 * a
    }
}

/// Peak-to-peak error: `max(e) - min(e)`.
pub fn ptpe(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::domain("ptpe of an empty series"));
    }
    let (lo, hi) = errors
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
            (lo.min(e), hi.max(e))
        });
    Ok(hi - lo)
}

pub fn rmse(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::domain("rmse of an empty series"));
    }
    Ok((errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt())
}

/// Error reduction of `ours` relative to `baseline`, percent.
pub fn improvement_rate(baseline: f64, ours: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::domain(format!(
            "improvement needs a positive baseline, got {baseline}"
        )));
    }
    Ok(100.0 * (baseline - ours) / baseline)
}

/// Mean and sample standard deviation (`n - 1`; zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dof {
    #[serde(rename = "one_ap")]
    OneAp,
    #[serde(rename = "one_lr")]
    OneLr,
    #[serde(rename = "two")]
    Two,
}

impl Dof {
    pub fn axes(self) -> &'static [Axis] {
        match self {
            Dof::OneAp => &[Axis::Ap],
            Dof::OneLr => &[Axis::Lr],
            Dof::Two => &Axis::BOTH,
        }
    }
}

/// One experiment: a shaft shape, a motion, and the controllers to compare.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub shape: ShaftShape,
    pub dof: Dof,
    pub input: InputSpec,
    /// Speed of the right-left knob relative to the anterior-posterior one
    /// in two-knob runs.
    pub lr_speed: f64,
    pub controllers: Vec<ControllerKind>,
    pub trials: usize,
    pub seed: u64,
    /// Nominal straight-shaft model of the catheters.
    pub truth: HysteresisInputs,
    pub catheters: usize,
    /// Relative spread of dead-zone and backlash sizes between catheters.
    pub jitter: f64,
    pub current: CurrentModel,
    pub sample_rate_hz: f64,
    /// Scoring starts at this time; `None` uses the input's default.
    pub discard_s: Option<f64>,
    pub detector: DetectorConfig,
    pub control: ControllerOptions,
}

impl ScenarioSpec {
    pub fn new(name: impl Into<String>, shape: ShaftShape, dof: Dof, input: InputSpec) -> Self {
        Self {
            name: name.into(),
            shape,
            dof,
            input,
            lr_speed: 2.0,
            controllers: ControllerKind::ALL.to_vec(),
            trials: 3,
            seed: 1,
            truth: HysteresisInputs::default(),
            catheters: 2,
            jitter: 0.1,
            current: CurrentModel::default(),
            sample_rate_hz: 100.0,
            discard_s: None,
            detector: DetectorConfig::default(),
            control: ControllerOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\', ',']) {
            return Err(Error::config(format!(
                "invalid scenario name '{}'",
                self.name
            )));
        }
        self.input.validate()?;
        if self.trials == 0 {
            return Err(Error::config("trials must be >= 1"));
        }
        if self.catheters == 0 {
            return Err(Error::config("catheters must be >= 1"));
        }
        if self.controllers.is_empty() {
            return Err(Error::config("no controllers selected"));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::config("jitter must lie in [0, 1)"));
        }
        if !(self.lr_speed.is_finite() && self.lr_speed > 0.0) {
            return Err(Error::config("lr_speed must be > 0"));
        }
        if let Some(d) = self.discard_s {
            if !(d >= 0.0 && d < self.input.duration_s()) {
                return Err(Error::config("discard window must be shorter than the run"));
            }
        }
        self.current.validate()?;
        self.detector.validate()?;
        self.control.validate()?;
        HysteresisParams::derive(self.truth)?;
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::config("sample rate must be > 0"));
        }
        Ok(())
    }

    fn discard(&self) -> f64 {
        self.discard_s
            .unwrap_or_else(|| self.input.default_discard_s())
    }

    /// Straight-shaft ground truth of each catheter.
    pub fn catheter_params(&self) -> Result<Vec<HysteresisParams>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.catheters)
            .map(|_| {
                let mut k = || 1.0 + self.jitter * rng.random_range(-1.0..=1.0);
                let t = self.truth;
                HysteresisParams::derive(HysteresisInputs {
                    d_pos: t.d_pos * k(),
                    d_neg: t.d_neg * k(),
                    b_pos: t.b_pos * k(),
                    b_neg: t.b_neg * k(),
                    ..t
                })
            })
            .collect()
    }

    /// Desired angles per driven axis, radians.
    pub fn desired(&self) -> Vec<(Axis, Vec<f64>)> {
        let rad = |v: Vec<f64>| v.into_iter().map(f64::to_radians).collect::<Vec<_>>();
        self.dof
            .axes()
            .iter()
            .map(|&axis| {
                let spec = if self.dof == Dof::Two && axis == Axis::Lr {
                    self.input.faster(self.lr_speed)
                } else {
                    self.input.clone()
                };
                let mut v = gen_input(&spec, self.sample_rate_hz);
                v.resize(
                    gen_input(&self.input, self.sample_rate_hz).len(),
                    *v.last().unwrap_or(&0.0),
                );
                (axis, rad(v))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ptpe,
    Rmse,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Ptpe => "ptpe",
            Metric::Rmse => "rmse",
        }
    }
}

/// Score of one axis in one cell.
#[derive(Debug, Clone, PartialEq)]
pub enum AxisOutcome {
    /// PTPE and RMSE in degrees.
    Measured {
        ptpe: f64,
        rmse: f64,
    },
    /// Straight axis: shift compensation coincides with plain compensation.
    NotApplicable,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub catheter: usize,
    pub trial: usize,
    pub controller: ControllerKind,
    pub outcomes: Vec<(Axis, AxisOutcome)>,
    pub detections: Vec<(Axis, ShiftEstimate)>,
    /// Kept for the first catheter's first trial only.
    pub trace: Option<Vec<TraceSample>>,
}

/// Aggregate value of one report cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stat {
    Value {
        mean: f64,
        std: f64,
    },
    /// Not applicable, shown as `-`.
    Dash,
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub controller: ControllerKind,
    pub metric: Metric,
    pub stat: Stat,
    pub improvement_vs_none: Option<f64>,
    pub improvement_vs_only: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: ExperimentReport,
    pub cells: Vec<CellResult>,
    pub discard_s: f64,
}

fn cell_seeds(seed: u64, catheter: usize, trial: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + ((catheter as u64) << 32) + trial as u64);
    (rng.next_u64(), rng.next_u64())
}

fn run_cell(
    spec: &ScenarioSpec,
    desired: &[(Axis, Vec<f64>)],
    params: &HysteresisParams,
    catheter: usize,
    trial: usize,
    kind: ControllerKind,
) -> Result<CellResult> {
    let mut cfg = PlantConfig::new(*params, spec.shape.clone());
    cfg.current = spec.current;
    cfg.sample_rate_hz = spec.sample_rate_hz;
    let (run_seed, detect_seed) = cell_seeds(spec.seed, catheter, trial);

    let mut outcomes = Vec::new();
    let mut detections = Vec::new();
    let mut controllers = Vec::new();
    for &(axis, _) in desired {
        let mut outcome = None;
        let c = match kind {
            ControllerKind::NoCompensation => Controller::no_compensation(spec.control),
            ControllerKind::CompensationOnly => {
                Controller::compensation_only(*params, spec.control)
            }
            ControllerKind::CompensationShift if cfg.offset(axis) == 0.0 => {
                outcome = Some(AxisOutcome::NotApplicable);
                Controller::compensation_only(*params, spec.control)
            }
            ControllerKind::CompensationShift => {
                let mut probe = PlantAxis::new(&cfg, axis, detect_seed)?;
                match detect_shift(&spec.detector, params, &mut probe, None) {
                    Ok(d) => {
                        detections.push((axis, d.estimate));
                        Controller::compensation_shift(*params, &d.estimate, spec.control)
                    }
                    Err(e) => {
                        log::warn!(
                            "{} catheter {catheter} trial {trial} axis {axis}: {e}",
                            spec.name
                        );
                        outcome = Some(AxisOutcome::Failed(e.to_string()));
                        Controller::compensation_only(*params, spec.control)
                    }
                }
            }
        };
        outcomes.push((axis, outcome));
        controllers.push(c);
    }

    let mut plant = Plant::new(&cfg, run_seed)?;
    let mut drives: Vec<AxisDrive<'_>> = desired
        .iter()
        .zip(controllers.iter_mut())
        .map(|((axis, d), c)| AxisDrive {
            axis: *axis,
            desired: d,
            controller: c,
        })
        .collect();
    let trace = run_trajectory(&mut plant, &mut drives)?;

    let discard = spec.discard();
    let outcomes = outcomes
        .into_iter()
        .map(|(axis, preset)| {
            let out = match preset {
                Some(o) => o,
                None => {
                    let e: Vec<f64> = trace
                        .iter()
                        .filter(|s| s.axis == axis && s.t >= discard)
                        .map(|s| (s.y_true - s.q_desired).to_degrees())
                        .collect();
                    AxisOutcome::Measured {
                        ptpe: ptpe(&e)?,
                        rmse: rmse(&e)?,
                    }
                }
            };
            Ok((axis, out))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CellResult {
        catheter,
        trial,
        controller: kind,
        outcomes,
        detections,
        trace: (catheter == 0 && trial == 0).then_some(trace),
    })
}

/// Row label for one axis of a scenario.
pub fn scenario_label(name: &str, axis: Axis) -> String {
    format!("{name}/{axis}")
}

/// Runs every catheter x trial x controller cell, `jobs` at a time
/// (`None`: one per core), and aggregates the report.
pub fn run_scenario(spec: &ScenarioSpec, jobs: Option<usize>) -> Result<ScenarioRun> {
    spec.validate()?;
    let params = spec.catheter_params()?;
    let desired = spec.desired();
    let mut jobs_list = Vec::new();
    for c in 0..spec.catheters {
        for t in 0..spec.trials {
            for &k in &spec.controllers {
                jobs_list.push((c, t, k));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    let cells: Vec<CellResult> = pool.install(|| {
        jobs_list
            .par_iter()
            .map(|&(c, t, k)| run_cell(spec, &desired, &params[c], c, t, k))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ScenarioRun {
        report: aggregate(spec, &cells),
        cells,
        discard_s: spec.discard(),
    })
}

/// One run of the first catheter with one controller, keeping the trace.
pub fn simulate(spec: &ScenarioSpec, kind: ControllerKind) -> Result<CellResult> {
    spec.validate()?;
    let params = spec.catheter_params()?;
    run_cell(spec, &spec.desired(), &params[0], 0, 0, kind)
}

/// Runs shift detection on one axis of the first catheter, with the same
/// plant seed a `run` would use for its first trial.
pub fn detect(spec: &ScenarioSpec, axis: Axis) -> Result<Detection> {
    spec.validate()?;
    let params = spec.catheter_params()?;
    let mut cfg = PlantConfig::new(params[0], spec.shape.clone());
    cfg.current = spec.current;
    cfg.sample_rate_hz = spec.sample_rate_hz;
    let (_, detect_seed) = cell_seeds(spec.seed, 0, 0);
    let mut probe = PlantAxis::new(&cfg, axis, detect_seed)?;
    Ok(detect_shift(&spec.detector, &params[0], &mut probe, None)?)
}

fn aggregate(spec: &ScenarioSpec, cells: &[CellResult]) -> ExperimentReport {
    let mut rows = Vec::new();
    for &axis in spec.dof.axes() {
        let label = scenario_label(&spec.name, axis);
        let mut block = Vec::new();
        for &kind in &spec.controllers {
            for metric in [Metric::Ptpe, Metric::Rmse] {
                let outcomes: Vec<&AxisOutcome> = cells
                    .iter()
                    .filter(|c| c.controller == kind)
                    .flat_map(|c| {
                        c.outcomes
                            .iter()
                            .filter(|(a, _)| *a == axis)
                            .map(|(_, o)| o)
                    })
                    .collect();
                let stat = if outcomes.iter().any(|o| matches!(o, AxisOutcome::Failed(_))) {
                    Stat::Failed
                } else if outcomes
                    .iter()
                    .all(|o| matches!(o, AxisOutcome::NotApplicable))
                {
                    Stat::Dash
                } else {
                    let v: Vec<f64> = outcomes
                        .iter()
                        .filter_map(|o| match o {
                            AxisOutcome::Measured { ptpe, rmse } => Some(match metric {
                                Metric::Ptpe => *ptpe,
                                Metric::Rmse => *rmse,
                            }),
                            _ => None,
                        })
                        .collect();
                    let (mean, std) = mean_std(&v);
                    Stat::Value { mean, std }
                };
                block.push(ReportRow {
                    scenario: label.clone(),
                    controller: kind,
                    metric,
                    stat,
                    improvement_vs_none: None,
                    improvement_vs_only: None,
                });
            }
        }
        fill_improvements(&mut block);
        rows.extend(block);
    }
    ExperimentReport { rows }
}

fn fill_improvements(rows: &mut [ReportRow]) {
    let mean_of = |rows: &[ReportRow], kind: ControllerKind, metric: Metric| {
        rows.iter()
            .find(|r| r.controller == kind && r.metric == metric)
            .and_then(|r| match r.stat {
                Stat::Value { mean, .. } => Some(mean),
                _ => None,
            })
    };
    let snapshot = rows.to_vec();
    for r in rows.iter_mut() {
        let Stat::Value { mean, .. } = r.stat else {
            continue;
        };
        let vs = |base: ControllerKind| {
            mean_of(&snapshot, base, r.metric).and_then(|b| improvement_rate(b, mean).ok())
        };
        r.improvement_vs_none = match r.controller {
            ControllerKind::NoCompensation => None,
            _ => vs(ControllerKind::NoCompensation),
        };
        r.improvement_vs_only = match r.controller {
            ControllerKind::CompensationShift => vs(ControllerKind::CompensationOnly),
            _ => None,
        };
    }
}

pub const REPORT_HEADER: [&str; 7] = [
    "scenario",
    "controller",
    "metric",
    "mean_deg",
    "std_deg",
    "improvement_vs_none_pct",
    "improvement_vs_only_pct",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.2}"))
}

impl ExperimentReport {
    pub fn extend(&mut self, other: ExperimentReport) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_HEADER)?;
        for r in &self.rows {
            let (mean, std) = match r.stat {
                Stat::Value { mean, std } => (format!("{mean:.4}"), format!("{std:.4}")),
                Stat::Dash => ("-".into(), "-".into()),
                Stat::Failed => ("failed".into(), "failed".into()),
            };
            w.write_record([
                r.scenario.as_str(),
                r.controller.name(),
                r.metric.as_str(),
                &mean,
                &std,
                &fmt_opt(r.improvement_vs_none),
                &fmt_opt(r.improvement_vs_only),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header = rd.headers()?.clone();
        if header.iter().ne(REPORT_HEADER) {
            return Err(Error::config(format!(
                "unexpected report header: {header:?}"
            )));
        }
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse()
                    .map(Some)
                    .map_err(|_| Error::config(format!("bad number '{s}' in report")))
            }
        };
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let metric = match &rec[2] {
                "ptpe" => Metric::Ptpe,
                "rmse" => Metric::Rmse,
                m => return Err(Error::config(format!("unknown metric '{m}'"))),
            };
            let stat = match &rec[3] {
                "-" => Stat::Dash,
                "failed" => Stat::Failed,
                m => Stat::Value {
                    mean: num(m)?.unwrap_or(f64::NAN),
                    std: num(&rec[4])?.unwrap_or(f64::NAN),
                },
            };
            rows.push(ReportRow {
                scenario: rec[0].to_string(),
                controller: rec[1].parse()?,
                metric,
                stat,
                improvement_vs_none: num(&rec[5])?,
                improvement_vs_only: num(&rec[6])?,
            });
        }
        Ok(Self { rows })
    }

    /// Looks up one aggregate value.
    pub fn get(
        &self,
        scenario: &str,
        controller: ControllerKind,
        metric: Metric,
    ) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.scenario == scenario && r.controller == controller && r.metric == metric)
    }

    /// Aligned table laid out with controllers as rows and scenarios as
    /// columns, one block per metric.
    pub fn to_table(&self) -> String {
        let mut scenarios: Vec<&str> = Vec::new();
        let mut kinds: Vec<ControllerKind> = Vec::new();
        for r in &self.rows {
            if !scenarios.contains(&r.scenario.as_str()) {
                scenarios.push(&r.scenario);
            }
            if !kinds.contains(&r.controller) {
                kinds.push(r.controller);
            }
        }
        kinds.sort();
        let cells: BTreeMap<(&str, ControllerKind, Metric), String> = self
            .rows
            .iter()
            .map(|r| {
                let text = match r.stat {
                    Stat::Value { mean, std } => format!("{mean:.2} ({std:.2})"),
                    Stat::Dash => "-".to_string(),
                    Stat::Failed => "failed".to_string(),
                };
                ((r.scenario.as_str(), r.controller, r.metric), text)
            })
            .collect();
        let label_w = kinds
            .iter()
            .map(|k| k.label().len())
            .max()
            .unwrap_or(0)
            .max(10);
        let col_w = |s: &str| s.len().max(14);
        let mut out = String::new();
        for metric in [Metric::Ptpe, Metric::Rmse] {
            let _ = write!(
                out,
                "{:<label_w$}",
                format!("{} (deg)", metric.as_str().to_uppercase())
            );
            for s in &scenarios {
                let _ = write!(out, "  {:>w$}", s, w = col_w(s));
            }
            out.push('\n');
            for &k in &kinds {
                let _ = write!(out, "{:<label_w$}", k.label());
                for s in &scenarios {
                    let text = cells.get(&(*s, k, metric)).map_or("", String::as_str);
                    let _ = write!(out, "  {:>w$}", text, w = col_w(s));
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// Gnuplot data for one axis of a trace: time, desired and true angle and
/// error, degrees, from `from_s` on.
pub fn plot_data(trace: &[TraceSample], axis: Axis, from_s: f64) -> String {
    let mut out =
        String::from("# t_s q_desired_deg y_true_deg error_deg q_commanded_deg current\n");
    for s in trace.iter().filter(|s| s.axis == axis && s.t >= from_s) {
        let _ = writeln!(
            out,
            "{:.2} {:.6} {:.6} {:.6} {:.6} {:.6}",
            s.t,
            s.q_desired.to_degrees(),
            s.y_true.to_degrees(),
            (s.y_true - s.q_desired).to_degrees(),
            s.q_commanded.to_degrees(),
            s.current
        );
    }
    out
}
