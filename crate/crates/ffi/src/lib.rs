//! C ABI for the `tdcm` toolkit.
//!
//! Objects are opaque handles created by `*_new` and released by `*_free`.
//! Every fallible call returns a [`TdcmStatus`]; on failure a message is
//! kept per thread and can be fetched with [`tdcm_last_error_message`].
//! Angles cross the boundary in degrees.

#![allow(clippy::missing_safety_doc, clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tdcm::config::ScenarioFile;
use tdcm::detector::{DetectError, Side};
use tdcm::experiment;
use tdcm::hysteresis::{inverse, Direction, HysteresisInputs, HysteresisParams, HysteresisState};
use tdcm::{Axis, ButterworthLowpass, Error, FilterSpec, ShaftSegment, ShaftShape};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdcmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Config = 4,
    Identification = 5,
    DetectionTimeout = 6,
    Sensor = 7,
    Io = 8,
    Saturated = 9,
    Panic = 10,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: TdcmStatus, msg: impl Into<String>) -> TdcmStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> TdcmStatus {
    let status = match e {
        Error::Domain(_) => TdcmStatus::Domain,
        Error::Config(_) | Error::Json { .. } | Error::Csv(_) => TdcmStatus::Config,
        Error::Identification(_) => TdcmStatus::Identification,
        Error::Detection(DetectError::Timeout { .. }) => TdcmStatus::DetectionTimeout,
        Error::Detection(DetectError::Sensor { .. }) => TdcmStatus::Sensor,
        Error::Detection(DetectError::Setup(_)) => TdcmStatus::Config,
        Error::Io { .. } => TdcmStatus::Io,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> TdcmStatus) -> TdcmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(TdcmStatus::Panic, "internal panic"),
    }
}

/// Copy of the last error message on this thread, or NULL. Release with
/// [`tdcm_string_free`].
#[no_mangle]
pub extern "C" fn tdcm_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_ref()
            .map_or(ptr::null_mut(), |s| s.clone().into_raw())
    })
}

/// Releases a string returned by this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn tdcm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Hysteresis parameters in degrees; `omega` is dimensionless.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdcmParams {
    pub d_pos_deg: f64,
    pub d_neg_deg: f64,
    pub b_pos_deg: f64,
    pub b_neg_deg: f64,
    pub omega: f64,
    pub h_pos_deg: f64,
    pub h_neg_deg: f64,
    pub x_ref_pos_deg: f64,
    pub x_ref_neg_deg: f64,
}

impl From<HysteresisInputs> for TdcmParams {
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

/// Default parameter set.
#[no_mangle]
pub extern "C" fn tdcm_params_default() -> TdcmParams {
    HysteresisInputs::default().into()
}

/// Result of a shift detection, degrees.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TdcmShiftEstimate {
    pub d_tilde_pos_deg: f64,
    pub d_tilde_neg_deg: f64,
    pub offset_deg: f64,
    /// +1 when the positive edge was found, -1 for the negative one.
    pub detected_side: c_int,
    pub iterations_used: usize,
    pub direction_flips: usize,
}

/// Shaft shape under construction.
pub struct TdcmShape {
    segments: Vec<ShaftSegment>,
    beta_catheter_mm: f64,
    beta_knob_mm: f64,
}

impl TdcmShape {
    fn build(&self) -> tdcm::Result<ShaftShape> {
        ShaftShape::new(
            self.segments.clone(),
            self.beta_catheter_mm,
            self.beta_knob_mm,
        )
    }
}

#[no_mangle]
pub unsafe extern "C" fn tdcm_shape_new(
    beta_catheter_mm: f64,
    beta_knob_mm: f64,
    out: *mut *mut TdcmShape,
) -> TdcmStatus {
    guard(|| {
        if out.is_null() {
            return fail(TdcmStatus::NullPointer, "out is NULL");
        }
        if !(beta_catheter_mm > 0.0 && beta_knob_mm > 0.0) {
            return fail(
                TdcmStatus::InvalidArgument,
                "tendon offset and knob radius must be > 0",
            );
        }
        *out = Box::into_raw(Box::new(TdcmShape {
            segments: Vec::new(),
            beta_catheter_mm,
            beta_knob_mm,
        }));
        TdcmStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn tdcm_shape_add_curved(
    shape: *mut TdcmShape,
    radius_mm: f64,
    alpha_deg: f64,
    theta_deg: f64,
) -> TdcmStatus {
    guard(|| {
        let Some(shape) = shape.as_mut() else {
            return fail(TdcmStatus::NullPointer, "shape is NULL");
        };
        match ShaftSegment::curved(radius_mm, alpha_deg.to_radians(), theta_deg.to_radians()) {
            Ok(s) => {
                shape.segments.push(s);
                TdcmStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn tdcm_shape_add_straight(
    shape: *mut TdcmShape,
    length_mm: f64,
) -> TdcmStatus {
    guard(|| {
        let Some(shape) = shape.as_mut() else {
            return fail(TdcmStatus::NullPointer, "shape is NULL");
        };
        match ShaftSegment::straight(length_mm) {
            Ok(s) => {
                shape.segments.push(s);
                TdcmStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Knob offsets the shape imposes on each knob, degrees.
#[no_mangle]
pub unsafe extern "C" fn tdcm_shape_knob_offset(
    shape: *const TdcmShape,
    ap_deg: *mut f64,
    lr_deg: *mut f64,
) -> TdcmStatus {
    guard(|| {
        let Some(shape) = shape.as_ref() else {
            return fail(TdcmStatus::NullPointer, "shape is NULL");
        };
        if ap_deg.is_null() || lr_deg.is_null() {
            return fail(TdcmStatus::NullPointer, "output pointer is NULL");
        }
        match shape.build() {
            Ok(s) => {
                let k = s.knob_offset();
                *ap_deg = k.ap.to_degrees();
                *lr_deg = k.lr.to_degrees();
                TdcmStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn tdcm_shape_free(shape: *mut TdcmShape) {
    if !shape.is_null() {
        drop(Box::from_raw(shape));
    }
}

/// Hysteresis model with its own state.
pub struct TdcmModel {
    params: HysteresisParams,
    state: HysteresisState,
}

#[no_mangle]
pub unsafe extern "C" fn tdcm_model_new(
    params: *const TdcmParams,
    out: *mut *mut TdcmModel,
) -> TdcmStatus {
    guard(|| {
        let Some(p) = params.as_ref() else {
            return fail(TdcmStatus::NullPointer, "params is NULL");
        };
        if out.is_null() {
            return fail(TdcmStatus::NullPointer, "out is NULL");
        }
        let inputs = HysteresisInputs {
            d_pos: p.d_pos_deg.to_radians(),
            d_neg: p.d_neg_deg.to_radians(),
            b_pos: p.b_pos_deg.to_radians(),
            b_neg: p.b_neg_deg.to_radians(),
            omega: p.omega,
            h_pos: p.h_pos_deg.to_radians(),
            h_neg: p.h_neg_deg.to_radians(),
            x_ref_pos: p.x_ref_pos_deg.to_radians(),
            x_ref_neg: p.x_ref_neg_deg.to_radians(),
        };
        match HysteresisParams::derive(inputs) {
            Ok(params) => {
                let state = HysteresisState::at_rest(&params, 0.0);
                *out = Box::into_raw(Box::new(TdcmModel { params, state }));
                TdcmStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// New model translated along the input axis, at rest at zero input.
#[no_mangle]
pub unsafe extern "C" fn tdcm_model_shifted(
    model: *const TdcmModel,
    offset_deg: f64,
    out: *mut *mut TdcmModel,
) -> TdcmStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(TdcmStatus::NullPointer, "model is NULL");
        };
        if out.is_null() {
            return fail(TdcmStatus::NullPointer, "out is NULL");
        }
        if !offset_deg.is_finite() {
            return fail(TdcmStatus::InvalidArgument, "offset must be finite");
        }
        let params = m.params.shifted(offset_deg.to_radians());
        let state = HysteresisState::at_rest(&params, 0.0);
        *out = Box::into_raw(Box::new(TdcmModel { params, state }));
        TdcmStatus::Ok
    })
}

/// Opposite dead-zone boundaries, degrees.
#[no_mangle]
pub unsafe extern "C" fn tdcm_model_hat_boundaries(
    model: *const TdcmModel,
    d_hat_pos_deg: *mut f64,
    d_hat_neg_deg: *mut f64,
) -> TdcmStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(TdcmStatus::NullPointer, "model is NULL");
        };
        if d_hat_pos_deg.is_null() || d_hat_neg_deg.is_null() {
            return fail(TdcmStatus::NullPointer, "output pointer is NULL");
        }
        *d_hat_pos_deg = m.params.d_hat_pos().to_degrees();
        *d_hat_neg_deg = m.params.d_hat_neg().to_degrees();
        TdcmStatus::Ok
    })
}

/// Puts the model at rest at input `x0_deg`.
#[no_mangle]
pub unsafe extern "C" fn tdcm_model_reset(model: *mut TdcmModel, x0_deg: f64) -> TdcmStatus {
    guard(|| {
        let Some(m) = model.as_mut() else {
            return fail(TdcmStatus::NullPointer, "model is NULL");
        };
        m.state = HysteresisState::at_rest(&m.params, x0_deg.to_radians());
        TdcmStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn tdcm_model_step(
    model: *mut TdcmModel,
    x_deg: f64,
    y_deg: *mut f64,
) -> TdcmStatus {
    guard(|| {
        let Some(m) = model.as_mut() else {
            return fail(TdcmStatus::NullPointer, "model is NULL");
        };
        if y_deg.is_null() {
            return fail(TdcmStatus::NullPointer, "y_deg is NULL");
        }
        if !x_deg.is_finite() {
            return fail(TdcmStatus::InvalidArgument, "input must be finite");
        }
        *y_deg = m.state.step(&m.params, x_deg.to_radians()).to_degrees();
        TdcmStatus::Ok
    })
}

/// Input that brings the model to `y_deg`. `direction` is the sign of the
/// desired motion. On `TDCM_STATUS_SATURATED` the clamped command is still
/// written to `x_deg`. The model state is not advanced.
#[no_mangle]
pub unsafe extern "C" fn tdcm_model_inverse(
    model: *const TdcmModel,
    y_deg: f64,
    direction: c_int,
    knob_limit_deg: f64,
    x_deg: *mut f64,
) -> TdcmStatus {
    guard(|| {
        let Some(m) = model.as_ref() else {
            return fail(TdcmStatus::NullPointer, "model is NULL");
        };
        if x_deg.is_null() {
            return fail(TdcmStatus::NullPointer, "x_deg is NULL");
        }
        if !(knob_limit_deg > 0.0) || !y_deg.is_finite() {
            return fail(
                TdcmStatus::InvalidArgument,
                "need a finite target and a positive knob limit",
            );
        }
        let dir = Direction::of(direction as f64);
        match inverse(
            &m.params,
            &m.state,
            y_deg.to_radians(),
            dir,
            knob_limit_deg.to_radians(),
        ) {
            Ok(x) => {
                *x_deg = x.to_degrees();
                TdcmStatus::Ok
            }
            Err(sat) => {
                *x_deg = sat.clamped.to_degrees();
                fail(TdcmStatus::Saturated, sat.to_string())
            }
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn tdcm_model_free(model: *mut TdcmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Causal Butterworth low-pass.
pub struct TdcmFilter(ButterworthLowpass);

#[no_mangle]
pub unsafe extern "C" fn tdcm_filter_new(
    order: usize,
    cutoff_hz: f64,
    sample_rate_hz: f64,
    out: *mut *mut TdcmFilter,
) -> TdcmStatus {
    guard(|| {
        if out.is_null() {
            return fail(TdcmStatus::NullPointer, "out is NULL");
        }
        let spec = FilterSpec {
            order,
            cutoff_hz,
            sample_rate_hz,
        };
        match ButterworthLowpass::new(spec) {
            Ok(f) => {
                *out = Box::into_raw(Box::new(TdcmFilter(f)));
                TdcmStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Filters `n` samples from `input` into `output` (which may alias).
#[no_mangle]
pub unsafe extern "C" fn tdcm_filter_process(
    filter: *mut TdcmFilter,
    input: *const f64,
    output: *mut f64,
    n: usize,
) -> TdcmStatus {
    guard(|| {
        let Some(f) = filter.as_mut() else {
            return fail(TdcmStatus::NullPointer, "filter is NULL");
        };
        if n == 0 {
            return TdcmStatus::Ok;
        }
        if input.is_null() || output.is_null() {
            return fail(TdcmStatus::NullPointer, "buffer is NULL");
        }
        for i in 0..n {
            *output.add(i) = f.0.process(*input.add(i));
        }
        TdcmStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn tdcm_filter_free(filter: *mut TdcmFilter) {
    if !filter.is_null() {
        drop(Box::from_raw(filter));
    }
}

unsafe fn scenario_from_json(
    json: *const c_char,
    seed: u64,
    use_seed: bool,
) -> Result<experiment::ScenarioSpec, TdcmStatus> {
    if json.is_null() {
        return Err(fail(TdcmStatus::NullPointer, "json is NULL"));
    }
    let text = CStr::from_ptr(json)
        .to_str()
        .map_err(|_| fail(TdcmStatus::InvalidArgument, "json is not UTF-8"))?;
    let file: ScenarioFile = serde_json::from_str(text)
        .map_err(|e| fail(TdcmStatus::Config, format!("scenario: {e}")))?;
    let mut spec = file.spec(Path::new(".")).map_err(|e| from_error(&e))?;
    if use_seed {
        spec.seed = seed;
    }
    Ok(spec)
}

/// Runs a scenario given as a JSON document and returns the report CSV in
/// `report_csv` (release with [`tdcm_string_free`]). `jobs == 0` uses one
/// thread per core. A non-zero `override_seed` replaces the seed.
#[no_mangle]
pub unsafe extern "C" fn tdcm_run_scenario_json(
    scenario_json: *const c_char,
    jobs: usize,
    override_seed: u64,
    report_csv: *mut *mut c_char,
) -> TdcmStatus {
    guard(|| {
        if report_csv.is_null() {
            return fail(TdcmStatus::NullPointer, "report_csv is NULL");
        }
        let spec = match scenario_from_json(scenario_json, override_seed, override_seed != 0) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let jobs = (jobs > 0).then_some(jobs);
        let csv = match experiment::run_scenario(&spec, jobs).and_then(|r| r.report.to_csv()) {
            Ok(c) => c,
            Err(e) => return from_error(&e),
        };
        match CString::new(csv) {
            Ok(c) => {
                *report_csv = c.into_raw();
                TdcmStatus::Ok
            }
            Err(_) => fail(TdcmStatus::Panic, "report contains NUL"),
        }
    })
}

/// Detects the dead-zone shift of one axis (0 = anterior-posterior,
/// 1 = right-left) on the simulated catheter of a scenario.
#[no_mangle]
pub unsafe extern "C" fn tdcm_detect_json(
    scenario_json: *const c_char,
    axis: c_int,
    out: *mut TdcmShiftEstimate,
) -> TdcmStatus {
    guard(|| {
        if out.is_null() {
            return fail(TdcmStatus::NullPointer, "out is NULL");
        }
        let axis = match axis {
            0 => Axis::Ap,
            1 => Axis::Lr,
            _ => return fail(TdcmStatus::InvalidArgument, "axis must be 0 or 1"),
        };
        let spec = match scenario_from_json(scenario_json, 0, false) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match experiment::detect(&spec, axis) {
            Ok(d) => {
                let e = d.estimate;
                *out = TdcmShiftEstimate {
                    d_tilde_pos_deg: e.d_tilde_pos.to_degrees(),
                    d_tilde_neg_deg: e.d_tilde_neg.to_degrees(),
                    offset_deg: e.offset.to_degrees(),
                    detected_side: match e.detected_side {
                        Side::Positive => 1,
                        Side::Negative => -1,
                    },
                    iterations_used: e.iterations_used,
                    direction_flips: e.direction_flips,
                };
                TdcmStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}
