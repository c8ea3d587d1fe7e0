//! Proximal-shaft geometry.
//!
//! The shaft is a chain of constant-curvature segments. Each segment pulls
//! the tendon on the inside of its bend and releases the one on the outside
//! by `alpha * beta_catheter` projected on the tendon's roll direction. The
//! knob has to absorb that length before the bending section sees any
//! tension, which is what shifts the hysteresis along the knob axis.
//!
//! Roll angle `theta` is measured in the catheter body frame from the
//! anterior tendon, right-handed about the heading axis: `theta = 0` bends
//! toward the anterior tendon, `theta = pi/2` toward the right tendon.

use crate::error::{Error, Result};

const ARC_TOLERANCE_MM: f64 = 1e-9;

/// One constant-curvature piece of the proximal shaft.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShaftSegment {
    radius_mm: Option<f64>,
    alpha: f64,
    theta: f64,
    arc_length_mm: f64,
}

impl ShaftSegment {
    /// A curved segment; arc length is `radius * alpha`.
    pub fn curved(radius_mm: f64, alpha: f64, theta: f64) -> Result<Self> {
        Self::new(Some(radius_mm), alpha, theta, radius_mm * alpha)
    }

    /// A straight segment of the given centerline length.
    pub fn straight(arc_length_mm: f64) -> Result<Self> {
        Self::new(None, 0.0, 0.0, arc_length_mm)
    }

    /// General constructor. For `alpha > 0` the radius is required and must
    /// agree with the arc length; for `alpha == 0` the radius is ignored.
    pub fn new(radius_mm: Option<f64>, alpha: f64, theta: f64, arc_length_mm: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::domain(format!(
                "segment curvature angle must be >= 0, got {alpha}"
            )));
        }
        if !theta.is_finite() {
            return Err(Error::domain("segment roll angle must be finite"));
        }
        if !arc_length_mm.is_finite() || arc_length_mm <= 0.0 {
            return Err(Error::domain(format!(
                "segment arc length must be > 0 mm, got {arc_length_mm}"
            )));
        }
        let radius_mm = if alpha > 0.0 {
            let r = radius_mm
                .ok_or_else(|| Error::domain("curved segment needs a curvature radius"))?;
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::domain(format!(
                    "curvature radius must be > 0 mm, got {r}"
                )));
            }
            if (arc_length_mm - r * alpha).abs() >= ARC_TOLERANCE_MM {
                return Err(Error::domain(format!(
                    "arc length {arc_length_mm} mm disagrees with radius*alpha = {} mm",
                    r * alpha
                )));
            }
            Some(r)
        } else {
            None
        };
        Ok(Self {
            radius_mm,
            alpha,
            theta,
            arc_length_mm,
        })
    }

    pub fn radius_mm(&self) -> Option<f64> {
        self.radius_mm
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn arc_length_mm(&self) -> f64 {
        self.arc_length_mm
    }

    pub fn is_straight(&self) -> bool {
        self.alpha == 0.0
    }

    fn rotated(&self, dtheta: f64) -> Self {
        Self {
            theta: self.theta + dtheta,
            ..*self
        }
    }
}

/// Lengths of the four tendons (anterior, posterior, right, left) in mm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TendonLengths {
    pub anterior: f64,
    pub posterior: f64,
    pub right: f64,
    pub left: f64,
}

impl std::ops::Add for TendonLengths {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            anterior: self.anterior + o.anterior,
            posterior: self.posterior + o.posterior,
            right: self.right + o.right,
            left: self.left + o.left,
        }
    }
}

/// Pulled length of each tendon caused by the shaft shape, in mm.
///
/// Antagonistic tendons always move by equal and opposite amounts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TendonDeltas {
    pub anterior: f64,
    pub posterior: f64,
    pub right: f64,
    pub left: f64,
}

/// Knob angle consumed by the shaft shape before the bending section is
/// loaded, per knob (radians).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KnobOffset {
    /// Anterior-posterior knob.
    pub ap: f64,
    /// Right-left knob.
    pub lr: f64,
}

/// Tendon lengths along a single segment.
pub fn segment_tendon_lengths(seg: &ShaftSegment, beta_catheter_mm: f64) -> Result<TendonLengths> {
    if !beta_catheter_mm.is_finite() || beta_catheter_mm <= 0.0 {
        return Err(Error::domain(format!(
            "tendon offset must be > 0 mm, got {beta_catheter_mm}"
        )));
    }
    let l = seg.arc_length_mm;
    let pull = seg.alpha * beta_catheter_mm;
    let (s, c) = seg.theta.sin_cos();
    Ok(TendonLengths {
        anterior: l - pull * c,
        posterior: l + pull * c,
        right: l - pull * s,
        left: l + pull * s,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShaftShape {
    segments: Vec<ShaftSegment>,
    beta_catheter_mm: f64,
    beta_knob_mm: f64,
}

impl ShaftShape {
    pub fn new(
        segments: Vec<ShaftSegment>,
        beta_catheter_mm: f64,
        beta_knob_mm: f64,
    ) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::domain("shaft needs at least one segment"));
        }
        if !beta_catheter_mm.is_finite() || beta_catheter_mm <= 0.0 {
            return Err(Error::domain(format!(
                "tendon offset must be > 0 mm, got {beta_catheter_mm}"
            )));
        }
        if !beta_knob_mm.is_finite() || beta_knob_mm <= 0.0 {
            return Err(Error::domain(format!(
                "knob radius must be > 0 mm, got {beta_knob_mm}"
            )));
        }
        Ok(Self {
            segments,
            beta_catheter_mm,
            beta_knob_mm,
        })
    }

    /// A single straight segment.
    pub fn straight(length_mm: f64, beta_catheter_mm: f64, beta_knob_mm: f64) -> Result<Self> {
        Self::new(
            vec![ShaftSegment::straight(length_mm)?],
            beta_catheter_mm,
            beta_knob_mm,
        )
    }

    pub fn segments(&self) -> &[ShaftSegment] {
        &self.segments
    }

    pub fn beta_catheter_mm(&self) -> f64 {
        self.beta_catheter_mm
    }

    pub fn beta_knob_mm(&self) -> f64 {
        self.beta_knob_mm
    }

    pub fn total_length_mm(&self) -> f64 {
        self.segments.iter().map(|s| s.arc_length_mm).sum()
    }

    pub fn total_tendon_lengths(&self) -> Result<TendonLengths> {
        self.segments
            .iter()
            .try_fold(TendonLengths::default(), |acc, seg| {
                Ok(acc + segment_tendon_lengths(seg, self.beta_catheter_mm)?)
            })
    }

    pub fn total_deltas(&self) -> TendonDeltas {
        let (mut ap, mut lr) = (0.0, 0.0);
        for seg in &self.segments {
            let (s, c) = seg.theta.sin_cos();
            ap += seg.alpha * self.beta_catheter_mm * c;
            lr += seg.alpha * self.beta_catheter_mm * s;
        }
        TendonDeltas {
            anterior: ap,
            posterior: -ap,
            right: lr,
            left: -lr,
        }
    }

    pub fn knob_offset(&self) -> KnobOffset {
        let d = self.total_deltas();
        KnobOffset {
            ap: d.anterior / self.beta_knob_mm,
            lr: d.right / self.beta_knob_mm,
        }
    }

    /// The same shape rolled about the heading axis by `dtheta`.
    pub fn rotated(&self, dtheta: f64) -> Self {
        Self {
            segments: self.segments.iter().map(|s| s.rotated(dtheta)).collect(),
            ..self.clone()
        }
    }
}
