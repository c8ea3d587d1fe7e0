use std::ffi::{CStr, CString};
use std::ptr;

use tdcm_ffi::*;

fn last_error() -> String {
    let p = tdcm_last_error_message();
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { tdcm_string_free(p) };
    s
}

const SCENARIO: &str = r#"{
    "name": "ffi",
    "shape": {"segments": [{"radius_mm": 100, "alpha_deg": 90, "theta_deg": 0}]},
    "dof": "one_ap",
    "input": {"kind": "periodic", "amplitude_deg": 60, "frequency_hz": 0.04, "duration_s": 75},
    "trials": 1,
    "catheters": 1,
    "seed": 5
}"#;

#[test]
fn header_declares_the_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/tdcm.h")).unwrap();
    for name in [
        "TDCM_STATUS_OK",
        "TDCM_STATUS_DETECTION_TIMEOUT",
        "typedef struct TdcmModel TdcmModel",
        "TdcmParams tdcm_params_default(void)",
        "tdcm_shape_knob_offset",
        "tdcm_model_inverse",
        "tdcm_filter_process",
        "tdcm_run_scenario_json",
        "tdcm_detect_json",
        "tdcm_string_free",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn shape_offset() {
    let mut shape = ptr::null_mut();
    unsafe {
        assert_eq!(tdcm_shape_new(1.0, 10.0, &mut shape), TdcmStatus::Ok);
        assert_eq!(
            tdcm_shape_add_curved(shape, 100.0, 90.0, 0.0),
            TdcmStatus::Ok
        );
        assert_eq!(tdcm_shape_add_straight(shape, 200.0), TdcmStatus::Ok);
        let (mut ap, mut lr) = (f64::NAN, f64::NAN);
        assert_eq!(
            tdcm_shape_knob_offset(shape, &mut ap, &mut lr),
            TdcmStatus::Ok
        );
        assert!((ap - 9.0).abs() < 1e-9);
        assert!(lr.abs() < 1e-9);
        assert_eq!(
            tdcm_shape_add_curved(shape, -1.0, 10.0, 0.0),
            TdcmStatus::Domain
        );
        assert!(last_error().contains("must be > 0"));
        tdcm_shape_free(shape);
    }
}

#[test]
fn empty_shape_is_a_domain_error() {
    let mut shape = ptr::null_mut();
    unsafe {
        tdcm_shape_new(1.0, 10.0, &mut shape);
        let (mut ap, mut lr) = (0.0, 0.0);
        assert_eq!(
            tdcm_shape_knob_offset(shape, &mut ap, &mut lr),
            TdcmStatus::Domain
        );
        tdcm_shape_free(shape);
    }
}

#[test]
fn model_step_and_inverse() {
    let params = tdcm_params_default();
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(tdcm_model_new(&params, &mut model), TdcmStatus::Ok);
        let mut y = 0.0;
        for i in 0..=300 {
            assert_eq!(
                tdcm_model_step(model, 30.0 * i as f64 / 300.0, &mut y),
                TdcmStatus::Ok
            );
        }
        let want = params.omega * (30.0 - params.d_pos_deg) + params.h_pos_deg;
        assert!((y - want).abs() < 1e-9);
        let mut x = 0.0;
        assert_eq!(
            tdcm_model_inverse(model, y + 2.0, 1, 120.0, &mut x),
            TdcmStatus::Ok
        );
        assert!((x - (30.0 + 2.0 / params.omega)).abs() < 1e-9);
        assert_eq!(
            tdcm_model_inverse(model, 500.0, 1, 120.0, &mut x),
            TdcmStatus::Saturated
        );
        assert!((x - 120.0).abs() < 1e-9);

        let mut shifted = ptr::null_mut();
        assert_eq!(tdcm_model_shifted(model, 5.0, &mut shifted), TdcmStatus::Ok);
        let (mut hp, mut hn) = (0.0, 0.0);
        tdcm_model_hat_boundaries(shifted, &mut hp, &mut hn);
        let want_hp = (params.h_pos_deg - params.h_neg_deg) / params.omega
            + params.d_neg_deg
            + 5.0
            + params.b_neg_deg;
        assert!((hp - want_hp).abs() < 1e-9);
        tdcm_model_free(shifted);
        tdcm_model_free(model);
    }
}

#[test]
fn invalid_params_are_rejected() {
    let mut params = tdcm_params_default();
    params.omega = -1.0;
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(tdcm_model_new(&params, &mut model), TdcmStatus::Domain);
        assert!(model.is_null());
        assert_eq!(
            tdcm_model_new(ptr::null(), &mut model),
            TdcmStatus::NullPointer
        );
    }
    assert!(last_error().contains("params"));
}

#[test]
fn filter_in_place() {
    let mut f = ptr::null_mut();
    unsafe {
        assert_eq!(tdcm_filter_new(3, 20.0, 100.0, &mut f), TdcmStatus::Ok);
        let mut buf = vec![2.5; 64];
        assert_eq!(
            tdcm_filter_process(f, buf.as_ptr(), buf.as_mut_ptr(), buf.len()),
            TdcmStatus::Ok
        );
        assert!(buf.iter().all(|v| (v - 2.5).abs() < 1e-12));
        tdcm_filter_free(f);
        assert_eq!(tdcm_filter_new(3, 60.0, 100.0, &mut f), TdcmStatus::Config);
        assert!(last_error().contains("cutoff"));
    }
}

#[test]
fn scenario_report_and_detection() {
    let json = CString::new(SCENARIO).unwrap();
    let mut csv = ptr::null_mut();
    unsafe {
        assert_eq!(
            tdcm_run_scenario_json(json.as_ptr(), 1, 0, &mut csv),
            TdcmStatus::Ok
        );
        let report = CStr::from_ptr(csv).to_str().unwrap().to_owned();
        tdcm_string_free(csv);
        assert!(report.starts_with("scenario,controller,metric,mean_deg,std_deg"));
        assert_eq!(report.lines().count(), 7);

        let mut est = TdcmShiftEstimate::default();
        assert_eq!(tdcm_detect_json(json.as_ptr(), 0, &mut est), TdcmStatus::Ok);
        assert_eq!(est.detected_side, 1);
        assert!((est.offset_deg - 9.0).abs() < 1.0);
        assert_eq!(
            tdcm_detect_json(json.as_ptr(), 7, &mut est),
            TdcmStatus::InvalidArgument
        );

        let bad = CString::new("{\"name\": 3}").unwrap();
        assert_eq!(
            tdcm_run_scenario_json(bad.as_ptr(), 1, 0, &mut csv),
            TdcmStatus::Config
        );
    }
}

#[test]
fn detection_timeout_status() {
    let json = CString::new(SCENARIO.replace(
        "\"seed\": 5",
        "\"seed\": 5, \"detector\": {\"max_iterations\": 2}",
    ))
    .unwrap();
    let mut est = TdcmShiftEstimate::default();
    let status = unsafe { tdcm_detect_json(json.as_ptr(), 0, &mut est) };
    assert_eq!(status, TdcmStatus::DetectionTimeout);
}
