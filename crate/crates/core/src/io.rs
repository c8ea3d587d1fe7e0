//! File formats: traces, detection logs, shift estimates, atomic writes.
//!
//! Angles in files are degrees. Currents are in the plant's units and
//! slopes in current units per radian.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{Detection, LogRow, ShiftEstimate, Side};
use crate::error::{Error, Result};
use crate::hysteresis::Branch;
use crate::plant::{Axis, TraceSample};

pub const TRACE_HEADER: [&str; 7] = [
    "t",
    "axis",
    "q_desired",
    "q_commanded",
    "y_true",
    "current",
    "branch_id",
];
pub const DETECTION_LOG_HEADER: [&str; 6] =
    ["iteration", "q", "current", "grad", "direction", "event"];

/// Formats `x` with nine significant digits, like C's `%.9g`.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes `bytes` to `path` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn trace_to_csv(trace: &[TraceSample]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_HEADER)?;
    for s in trace {
        w.write_record([
            fmt_sig9(s.t),
            s.axis.to_string(),
            fmt_sig9(s.q_desired.to_degrees()),
            fmt_sig9(s.q_commanded.to_degrees()),
            fmt_sig9(s.y_true.to_degrees()),
            fmt_sig9(s.current),
            s.branch.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn trace_from_csv(text: &str) -> Result<Vec<TraceSample>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers()?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::config(format!(
            "unexpected trace header: {header:?}"
        )));
    }
    let num = |s: &str, what: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| Error::config(format!("bad {what} value '{s}' in trace")))
    };
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        out.push(TraceSample {
            t: num(&rec[0], "t")?,
            axis: rec[1].parse()?,
            q_desired: num(&rec[2], "q_desired")?.to_radians(),
            q_commanded: num(&rec[3], "q_commanded")?.to_radians(),
            y_true: num(&rec[4], "y_true")?.to_radians(),
            current: num(&rec[5], "current")?,
            branch: rec[6]
                .parse::<Branch>()
                .map_err(|e| Error::config(format!("bad branch id: {e}")))?,
        });
    }
    Ok(out)
}

pub fn detection_log_to_csv(log: &[LogRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(DETECTION_LOG_HEADER)?;
    for r in log {
        w.write_record([
            r.iteration.to_string(),
            fmt_sig9(r.q.to_degrees()),
            fmt_sig9(r.current),
            r.grad.map_or_else(String::new, fmt_sig9),
            format!("{:+}", r.direction.sign() as i32),
            r.event.as_str().to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Shift estimate as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftEstimateFile {
    pub axis: Axis,
    pub d_tilde_pos_deg: f64,
    pub d_tilde_neg_deg: f64,
    pub offset_deg: f64,
    pub detected_side: Side,
    pub iterations_used: usize,
    pub direction_flips: usize,
    pub eps_lower: f64,
    pub eps_upper: f64,
}

impl ShiftEstimateFile {
    pub fn new(axis: Axis, d: &Detection) -> Self {
        Self {
            axis,
            d_tilde_pos_deg: d.estimate.d_tilde_pos.to_degrees(),
            d_tilde_neg_deg: d.estimate.d_tilde_neg.to_degrees(),
            offset_deg: d.estimate.offset.to_degrees(),
            detected_side: d.estimate.detected_side,
            iterations_used: d.estimate.iterations_used,
            direction_flips: d.estimate.direction_flips,
            eps_lower: d.eps_lower,
            eps_upper: d.eps_upper,
        }
    }

    pub fn estimate(&self) -> ShiftEstimate {
        ShiftEstimate {
            d_tilde_pos: self.d_tilde_pos_deg.to_radians(),
            d_tilde_neg: self.d_tilde_neg_deg.to_radians(),
            offset: self.offset_deg.to_radians(),
            detected_side: self.detected_side,
            iterations_used: self.iterations_used,
            direction_flips: self.direction_flips,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig9(0.0), "0");
        assert_eq!(fmt_sig9(1.0), "1");
        assert_eq!(fmt_sig9(0.1), "0.1");
        assert_eq!(fmt_sig9(-12.3456789012), "-12.3456789");
        assert_eq!(fmt_sig9(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_sig9(0.000012345678912), "1.23456789e-05");
        assert_eq!(fmt_sig9(0.00012345678912), "0.000123456789");
        assert_eq!(fmt_sig9(9.9999999999), "10");
        assert_eq!(fmt_sig9(std::f64::consts::PI), "3.14159265");
    }

    #[test]
    fn trace_round_trip_keeps_nine_digits() {
        let s = TraceSample {
            t: 0.01,
            axis: Axis::Lr,
            q_desired: 0.2,
            q_commanded: -0.3,
            y_true: 0.123456789,
            current: 0.30001,
            branch: Branch::L6,
        };
        let text = trace_to_csv(&[s]).unwrap();
        assert!(text.starts_with("t,axis,q_desired,q_commanded,y_true,current,branch_id\n"));
        let back = trace_from_csv(&text).unwrap();
        assert_eq!(back[0].axis, Axis::Lr);
        assert_eq!(back[0].branch, Branch::L6);
        assert!((back[0].y_true - s.y_true).abs() < 1e-9);
    }

    #[test]
    fn atomic_write_replaces_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
