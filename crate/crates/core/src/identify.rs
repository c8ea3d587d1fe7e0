//! Hysteresis parameter identification from a calibration sweep.
//!
//! Dead-zone edges come from where the motor current leaves its plateau,
//! the slope from a pooled fit over engaged motion, and the plateau heights
//! and opposite boundaries from branch intercepts.

use crate::error::{Error, Result};
use crate::hysteresis::{HysteresisInputs, HysteresisParams, DEFAULT_OMEGA};
use crate::plant::{Axis, TraceSample};

/// Plateau samples are those within this many standard deviations of the
/// plateau mean.
const PLATEAU_SIGMAS: f64 = 4.0;

/// Identification output with fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Identified {
    pub params: HysteresisParams,
    /// Number of increments used for the slope fit; zero when the default
    /// slope was substituted.
    pub omega_samples: usize,
    /// Largest input increment in the trace.
    pub sample_step: f64,
}

fn ident(msg: impl Into<String>) -> Error {
    Error::Identification(msg.into())
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (n, s) = v.fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    (n > 0).then(|| s / n as f64)
}

/// Dead-zone edges `(d_neg, d_pos)` from `(q, current)` pairs.
fn plateau_edges(q: &[f64], c: &[f64]) -> Result<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = q.iter().copied().zip(c.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (c_min, c_max) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
    if !(c_max > c_min) {
        return Err(ident("current is constant; no plateau edge visible"));
    }
    // coarse valley, then its middle half as a clean plateau sample
    let coarse = c_min + 0.05 * (c_max - c_min);
    let i_min = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut a = i_min;
    while a > 0 && pts[a - 1].1 <= coarse {
        a -= 1;
    }
    let mut b = i_min;
    while b + 1 < pts.len() && pts[b + 1].1 <= coarse {
        b += 1;
    }
    let (qa, qb) = (pts[a].0, pts[b].0);
    let (lo, hi) = (qa + 0.25 * (qb - qa), qb - 0.25 * (qb - qa));
    let inner: Vec<f64> = pts[a..=b]
        .iter()
        .filter(|p| p.0 >= lo && p.0 <= hi)
        .map(|p| p.1)
        .collect();
    let level = mean(inner.iter().copied()).unwrap_or(c_min);
    let sd = if inner.len() > 1 {
        (inner.iter().map(|x| (x - level).powi(2)).sum::<f64>() / (inner.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let tol = (PLATEAU_SIGMAS * sd).max(1e-9 * (c_max - c_min));
    let above = |i: usize| pts[i].1 > level + tol;
    // an edge is where the current leaves the plateau for good
    let leaves = |i: usize, step: isize| {
        (0..3).all(|k| {
            let j = i as isize + k * step;
            j < 0 || j as usize >= pts.len() || above(j as usize)
        })
    };

    let centre = (a + b) / 2;
    let mut d_pos = None;
    for i in centre..pts.len() {
        if above(i) && leaves(i, 1) {
            d_pos = i.checked_sub(1).map(|k| pts[k].0);
            break;
        }
    }
    let mut d_neg = None;
    for i in (0..=centre).rev() {
        if above(i) && leaves(i, -1) {
            d_neg = pts.get(i + 1).map(|p| p.0);
            break;
        }
    }
    match (d_neg, d_pos) {
        (Some(n), Some(p)) if n < p => Ok((n, p)),
        (None, Some(_)) => Err(ident(
            "no current rise found on the negative side (negative dead-zone edge missing)",
        )),
        (Some(_), None) => Err(ident(
            "no current rise found on the positive side (positive dead-zone edge missing)",
        )),
        _ => Err(ident("neither dead-zone edge is visible in the current")),
    }
}

/// Identifies one axis from a calibration sweep trace.
pub fn identify(trace: &[TraceSample], axis: Axis) -> Result<Identified> {
    let rows: Vec<&TraceSample> = trace.iter().filter(|s| s.axis == axis).collect();
    if rows.len() < 8 {
        return Err(ident(format!(
            "trace has {} samples on axis {axis}; need a full sweep",
            rows.len()
        )));
    }
    let q: Vec<f64> = rows.iter().map(|s| s.q_commanded).collect();
    let y: Vec<f64> = rows.iter().map(|s| s.y_true).collect();
    let c: Vec<f64> = rows.iter().map(|s| s.current).collect();
    if q.iter().chain(&y).chain(&c).any(|v| !v.is_finite()) {
        return Err(ident("trace contains non-finite values"));
    }
    let (d_neg, d_pos) = plateau_edges(&q, &c)?;
    let sample_step = q
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(0.0, f64::max);

    // increments where the output moves with the input, away from branch
    // switches
    let n = q.len();
    let sign = |i: usize| {
        let dq = q[i + 1] - q[i];
        let dy = y[i + 1] - y[i];
        if dq > 0.0 && dy > 0.0 {
            1
        } else if dq < 0.0 && dy < 0.0 {
            -1
        } else {
            0
        }
    };
    let signs: Vec<i32> = (0..n - 1).map(sign).collect();
    let engaged: Vec<usize> = (1..n.saturating_sub(2))
        .filter(|&i| signs[i] != 0 && signs[i - 1] == signs[i] && signs[i + 1] == signs[i])
        .collect();
    let (sxy, sxx) = engaged.iter().fold((0.0, 0.0), |(sxy, sxx), &i| {
        let dq = q[i + 1] - q[i];
        (sxy + dq * (y[i + 1] - y[i]), sxx + dq * dq)
    });
    let (omega, omega_samples) = if engaged.len() >= 3 && sxx > 0.0 {
        (sxy / sxx, engaged.len())
    } else {
        log::warn!("slope fit under-determined on axis {axis}; using {DEFAULT_OMEGA}");
        (DEFAULT_OMEGA, 0)
    };

    // engaged samples by branch: sample i+1 of an engaged increment
    let (q, y, signs, engaged) = (&q, &y, &signs, &engaged);
    let pick = |dir: i32, outside_pos: bool| {
        engaged
            .iter()
            .filter(move |&&i| {
                signs[i] == dir
                    && if outside_pos {
                        q[i + 1] > d_pos
                    } else {
                        q[i + 1] < d_neg
                    }
            })
            .map(move |&i| (q[i + 1], y[i + 1]))
    };
    let h_pos = mean(pick(1, true).map(|(x, v)| v - omega * (x - d_pos)))
        .ok_or_else(|| ident("sweep never engages past the positive dead-zone edge"))?;
    let h_neg = mean(pick(-1, false).map(|(x, v)| v - omega * (x - d_neg)))
        .ok_or_else(|| ident("sweep never engages past the negative dead-zone edge"))?;
    let d_hat_pos = mean(pick(1, false).map(|(x, v)| x - (v - h_pos) / omega));
    let d_hat_neg = mean(pick(-1, true).map(|(x, v)| x - (v - h_neg) / omega));
    let d_hat_pos = d_hat_pos.ok_or_else(|| {
        ident("no rising engaged motion below the negative edge; backlash unknown")
    })?;
    let d_hat_neg = d_hat_neg.ok_or_else(|| {
        ident("no falling engaged motion above the positive edge; backlash unknown")
    })?;
    let b_neg = (d_hat_pos - d_neg - (h_pos - h_neg) / omega).max(0.0);
    let b_pos = ((h_neg - h_pos) / omega + d_pos - d_hat_neg).max(0.0);

    let x_ref_pos = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let x_ref_neg = q.iter().copied().fold(f64::INFINITY, f64::min);
    let params = HysteresisParams::derive(HysteresisInputs {
        d_pos,
        d_neg,
        b_pos,
        b_neg,
        omega,
        h_pos,
        h_neg,
        x_ref_pos,
        x_ref_neg,
    })
    .map_err(|e| ident(e.to_string()))?;
    Ok(Identified {
        params,
        omega_samples,
        sample_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_trace_is_an_error() {
        assert!(matches!(
            identify(&[], Axis::Ap),
            Err(Error::Identification(_))
        ));
    }

    #[test]
    fn flat_current_names_the_problem() {
        let trace: Vec<TraceSample> = (0..50)
            .map(|i| TraceSample {
                t: i as f64 * 0.01,
                axis: Axis::Ap,
                q_desired: 0.001 * i as f64,
                q_commanded: 0.001 * i as f64,
                y_true: 0.0,
                current: 0.3,
                branch: crate::Branch::L3,
            })
            .collect();
        let err = identify(&trace, Axis::Ap).unwrap_err().to_string();
        assert!(err.contains("constant"), "{err}");
    }
}
