//! Signal conditioning: causal Butterworth low-pass and finite-difference
//! slope estimation.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FilterSpec {
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
}

impl FilterSpec {
    /// Third order, 20 Hz.
    pub fn standard(sample_rate_hz: f64) -> Self {
        Self {
            order: 3,
            cutoff_hz: 20.0,
            sample_rate_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::config("filter order must be >= 1"));
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::config("filter sample rate must be > 0"));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < 0.5 * self.sample_rate_hz) {
            return Err(Error::config(format!(
                "cutoff {} Hz must lie in (0, {}) Hz",
                self.cutoff_hz,
                0.5 * self.sample_rate_hz
            )));
        }
        Ok(())
    }
}

/// Transposed direct-form II biquad, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Section {
    b: [f64; 3],
    a: [f64; 2],
    z: [f64; 2],
}

impl Section {
    fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z[0];
        self.z[0] = self.b[1] * x - self.a[0] * y + self.z[1];
        self.z[1] = self.b[2] * x - self.a[1] * y;
        y
    }

    /// Steady state for a constant input `c` (unity DC gain).
    fn settle(&mut self, c: f64) {
        self.z[1] = (self.b[2] - self.a[1]) * c;
        self.z[0] = (self.b[1] - self.a[0]) * c + self.z[1];
    }

    fn response(&self, z_inv: Complex64) -> Complex64 {
        let num = self.b[0] + z_inv * (self.b[1] + z_inv * self.b[2]);
        let den = 1.0 + z_inv * (self.a[0] + z_inv * self.a[1]);
        num / den
    }
}

/// Causal Butterworth low-pass designed by the bilinear transform with
/// frequency pre-warping, realised as cascaded second-order sections.
///
/// The recursion state is primed with the first sample so a constant input
/// passes through without a start-up transient.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterworthLowpass {
    spec: FilterSpec,
    sections: Vec<Section>,
    poles: Vec<Complex64>,
    primed: bool,
}

impl ButterworthLowpass {
    pub fn new(spec: FilterSpec) -> Result<Self> {
        spec.validate()?;
        let n = spec.order;
        let fs2 = 2.0 * spec.sample_rate_hz;
        let warped = fs2 * (PI * spec.cutoff_hz / spec.sample_rate_hz).tan();
        let analog: Vec<Complex64> = (0..n)
            .map(|k| {
                let angle = PI * (2 * k + n + 1) as f64 / (2 * n) as f64;
                Complex64::from_polar(warped, angle)
            })
            .collect();
        let poles: Vec<Complex64> = analog.iter().map(|&p| (fs2 + p) / (fs2 - p)).collect();

        let mut sections = Vec::with_capacity(n.div_ceil(2));
        for p in &poles[..n / 2] {
            let a1 = -2.0 * p.re;
            let a2 = p.norm_sqr();
            let g = (1.0 + a1 + a2) / 4.0;
            sections.push(Section {
                b: [g, 2.0 * g, g],
                a: [a1, a2],
                z: [0.0; 2],
            });
        }
        if n % 2 == 1 {
            let p = poles[n / 2].re;
            let g = (1.0 - p) / 2.0;
            sections.push(Section {
                b: [g, g, 0.0],
                a: [-p, 0.0],
                z: [0.0; 2],
            });
        }

        if let Some(bad) = poles.iter().find(|p| p.norm() >= 1.0) {
            return Err(Error::config(format!("unstable filter pole {bad}")));
        }
        Ok(Self {
            spec,
            sections,
            poles,
            primed: false,
        })
    }

    pub fn spec(&self) -> &FilterSpec {
        &self.spec
    }

    /// Z-plane poles; all lie strictly inside the unit circle.
    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn process(&mut self, x: f64) -> f64 {
        if !self.primed {
            for s in &mut self.sections {
                s.settle(x);
            }
            self.primed = true;
        }
        self.sections.iter_mut().fold(x, |acc, s| s.process(acc))
    }

    pub fn reset(&mut self) {
        for s in &mut self.sections {
            s.z = [0.0; 2];
        }
        self.primed = false;
    }

    /// Complex gain at `freq_hz`.
    pub fn frequency_response(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.spec.sample_rate_hz;
        let z_inv = Complex64::from_polar(1.0, -w);
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.response(z_inv))
    }

    /// Expanded transfer function `(b, a)` in powers of `z^-1`, `a[0] = 1`.
    pub fn transfer_function(&self) -> (Vec<f64>, Vec<f64>) {
        let mut num = vec![1.0];
        let mut den = vec![1.0];
        for s in &self.sections {
            num = poly_mul(&num, &s.b);
            den = poly_mul(&den, &[1.0, s.a[0], s.a[1]]);
        }
        let trim = |mut v: Vec<f64>| {
            v.truncate(self.spec.order + 1);
            v
        };
        (trim(num), trim(den))
    }
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Filters a whole series with a fresh filter.
pub fn butterworth_filter(spec: FilterSpec, signal: &[f64]) -> Result<Vec<f64>> {
    if signal.is_empty() {
        return Err(Error::domain("cannot filter an empty signal"));
    }
    let mut f = ButterworthLowpass::new(spec)?;
    Ok(signal.iter().map(|&x| f.process(x)).collect())
}

/// Smallest input step that still yields a slope.
pub const MIN_DELTA_Q: f64 = 1e-9;

pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientPoint {
    pub value: f64,
    /// True when the window was degenerate and the last valid slope was
    /// carried forward.
    pub carried: bool,
}

/// Centred windowed slope `dC/dq`. Windows shrink to one side at the ends
/// of the series.
pub fn gradient(q: &[f64], c: &[f64], window: usize) -> Result<Vec<GradientPoint>> {
    if q.len() != c.len() {
        return Err(Error::domain(format!(
            "gradient inputs differ in length ({} vs {})",
            q.len(),
            c.len()
        )));
    }
    if q.len() < 2 {
        return Err(Error::domain("gradient needs at least two samples"));
    }
    if window < 2 {
        return Err(Error::domain(
            "gradient window must span at least two samples",
        ));
    }
    let half = (window - 1) / 2;
    let half_hi = window - 1 - half;
    let n = q.len();
    let mut last = 0.0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half_hi).min(n - 1);
        let (lo, hi) = if lo == hi {
            (lo.saturating_sub(1), hi)
        } else {
            (lo, hi)
        };
        let dq = q[hi] - q[lo];
        if dq.abs() < MIN_DELTA_Q {
            out.push(GradientPoint {
                value: last,
                carried: true,
            });
        } else {
            last = (c[hi] - c[lo]) / dq;
            out.push(GradientPoint {
                value: last,
                carried: false,
            });
        }
    }
    Ok(out)
}

/// Trailing-window slope estimator for online use. The estimate refers to
/// the centre sample of the window.
#[derive(Debug, Clone)]
pub struct GradientWindow {
    len: usize,
    q: std::collections::VecDeque<f64>,
    c: std::collections::VecDeque<f64>,
    last: Option<f64>,
}

impl GradientWindow {
    pub fn new(len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::config(
                "gradient window must span at least two samples",
            ));
        }
        Ok(Self {
            len,
            q: Default::default(),
            c: Default::default(),
            last: None,
        })
    }

    pub fn clear(&mut self) {
        self.q.clear();
        self.c.clear();
        self.last = None;
    }

    /// Adds a sample; once the window is full returns `(q_centre, slope)`.
    pub fn push(&mut self, q: f64, c: f64) -> Option<(f64, GradientPoint)> {
        if self.q.len() == self.len {
            self.q.pop_front();
            self.c.pop_front();
        }
        self.q.push_back(q);
        self.c.push_back(c);
        if self.q.len() < self.len {
            return None;
        }
        let dq = self.q[self.len - 1] - self.q[0];
        let centre = self.q[(self.len - 1) / 2];
        let point = if dq.abs() < MIN_DELTA_Q {
            GradientPoint {
                value: self.last.unwrap_or(0.0),
                carried: true,
            }
        } else {
            let v = (self.c[self.len - 1] - self.c[0]) / dq;
            self.last = Some(v);
            GradientPoint {
                value: v,
                carried: false,
            }
        };
        Some((centre, point))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn lp(fs: f64) -> ButterworthLowpass {
        ButterworthLowpass::new(FilterSpec::standard(fs)).unwrap()
    }

    #[test]
    fn constant_passes_unchanged() {
        let out = butterworth_filter(FilterSpec::standard(100.0), &[3.7; 500]).unwrap();
        for y in out {
            assert_abs_diff_eq!(y, 3.7, epsilon = 1e-9);
        }
    }

    #[test]
    fn dc_gain_is_one() {
        let f = lp(100.0);
        assert_abs_diff_eq!(f.frequency_response(0.0).norm(), 1.0, epsilon = 1e-12);
        let (b, a) = f.transfer_function();
        assert_abs_diff_eq!(
            b.iter().sum::<f64>() / a.iter().sum::<f64>(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn magnitude_matches_analytic_butterworth() {
        // |H| = 1 / sqrt(1 + (tan(pi f/fs) / tan(pi fc/fs))^(2n)) after pre-warping
        for order in 1..=6 {
            let spec = FilterSpec {
                order,
                cutoff_hz: 20.0,
                sample_rate_hz: 100.0,
            };
            let f = ButterworthLowpass::new(spec).unwrap();
            for freq in [0.0, 1.0, 5.0, 12.5, 20.0, 33.0, 45.0] {
                let ratio = (PI * freq / 100.0).tan() / (PI * 20.0 / 100.0).tan();
                let expect = 1.0 / (1.0 + ratio.powi(2 * order as i32)).sqrt();
                assert_abs_diff_eq!(f.frequency_response(freq).norm(), expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn order_three_coefficients_match_scipy() {
        // scipy.signal.butter(3, 20, fs=100)
        let (b, a) = lp(100.0).transfer_function();
        let b_ref = [0.09853116, 0.29559348, 0.29559348, 0.09853116];
        let a_ref = [1.0, -0.57724052, 0.42178705, -0.05629724];
        for (x, y) in b.iter().zip(b_ref) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-8);
        }
        for (x, y) in a.iter().zip(a_ref) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-8);
        }
    }

    #[test]
    fn order_three_matches_pole_form() {
        // H(s) = 1/((s+1)(s^2+s+1)) with s = (1/K)(1 - z^-1)/(1 + z^-1)
        let k = (PI * 0.2).tan();
        let first = [1.0 + k, k - 1.0];
        let second = [1.0 + k + k * k, 2.0 * (k * k - 1.0), 1.0 - k + k * k];
        let den = poly_mul(&first, &second);
        let num: Vec<f64> = [1.0, 3.0, 3.0, 1.0].iter().map(|c| c * k.powi(3)).collect();
        let (b, a) = lp(100.0).transfer_function();
        for i in 0..4 {
            assert_abs_diff_eq!(b[i], num[i] / den[0], epsilon = 1e-12);
            assert_abs_diff_eq!(a[i], den[i] / den[0], epsilon = 1e-12);
        }
    }

    #[test]
    fn poles_inside_unit_circle() {
        for order in 1..=8 {
            let f = ButterworthLowpass::new(FilterSpec {
                order,
                cutoff_hz: 45.0,
                sample_rate_hz: 100.0,
            })
            .unwrap();
            assert_eq!(f.poles().len(), order);
            assert!(f.poles().iter().all(|p| p.norm() < 1.0));
        }
    }

    #[test]
    fn cutoff_at_or_above_nyquist_is_rejected() {
        for fc in [50.0, 60.0, 0.0, -1.0] {
            let spec = FilterSpec {
                order: 3,
                cutoff_hz: fc,
                sample_rate_hz: 100.0,
            };
            assert!(matches!(
                ButterworthLowpass::new(spec),
                Err(Error::Config(_))
            ));
        }
        assert!(ButterworthLowpass::new(FilterSpec {
            order: 0,
            ..FilterSpec::standard(100.0)
        })
        .is_err());
        assert!(butterworth_filter(FilterSpec::standard(100.0), &[]).is_err());
    }

    #[test]
    fn filter_is_linear() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..400).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..400).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = FilterSpec::standard(100.0);
        let fx = butterworth_filter(spec, &x).unwrap();
        let fy = butterworth_filter(spec, &y).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.5 * a - 0.75 * b).collect();
        let fm = butterworth_filter(spec, &mix).unwrap();
        for i in 0..400 {
            assert_abs_diff_eq!(fm[i], 2.5 * fx[i] - 0.75 * fy[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn gradient_of_linear_data_is_exact() {
        let q: Vec<f64> = (0..50).map(|i| 0.01 * i as f64).collect();
        let c: Vec<f64> = q.iter().map(|x| 3.0 * x - 1.0).collect();
        for g in gradient(&q, &c, DEFAULT_WINDOW).unwrap() {
            assert_abs_diff_eq!(g.value, 3.0, epsilon = 1e-9);
            assert!(!g.carried);
        }
    }

    #[test]
    fn gradient_of_square_at_window_centres() {
        let q: Vec<f64> = (0..=100).map(|i| 1.0 + 0.01 * i as f64).collect();
        let c: Vec<f64> = q.iter().map(|x| x * x).collect();
        let g = gradient(&q, &c, 5).unwrap();
        for i in 2..=98 {
            assert_abs_diff_eq!(g[i].value, 2.0 * q[i], epsilon = 1e-9);
        }
        // one-sided edges are first-order accurate
        assert_abs_diff_eq!(g[0].value, 2.0 * q[0], epsilon = 0.03);
    }

    #[test]
    fn gradient_of_plateau_is_zero_and_degenerate_windows_carry() {
        let q: Vec<f64> = (0..20).map(|i| 0.1 * i as f64).collect();
        let g = gradient(&q, &[0.4; 20], 5).unwrap();
        assert!(g.iter().all(|p| p.value == 0.0));

        let q = [0.0, 0.1, 0.2, 0.2, 0.2, 0.2, 0.2, 0.3];
        let c = [0.0, 0.1, 0.2, 0.2, 0.2, 0.2, 0.2, 0.3];
        let g = gradient(&q, &c, 3).unwrap();
        assert!(g[4].carried);
        assert_eq!(g[4].value, g[2].value);
        assert!(gradient(&q, &c[..3], 3).is_err());
        assert!(gradient(&q[..1], &c[..1], 3).is_err());
    }

    #[test]
    fn streaming_window_matches_series() {
        let q: Vec<f64> = (0..30).map(|i| 0.02 * i as f64).collect();
        let c: Vec<f64> = q.iter().map(|x| x * x * x).collect();
        let series = gradient(&q, &c, 5).unwrap();
        let mut w = GradientWindow::new(5).unwrap();
        for i in 0..30 {
            if let Some((centre, g)) = w.push(q[i], c[i]) {
                assert_eq!(centre, q[i - 2]);
                assert_abs_diff_eq!(g.value, series[i - 2].value, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn filtering_reduces_plateau_gradient_noise() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let raw: Vec<f64> = (0..2000).map(|_| 0.3 + noise.sample(&mut rng)).collect();
        let q: Vec<f64> = (0..2000).map(|i| 1e-3 * i as f64).collect();
        let filtered = butterworth_filter(FilterSpec::standard(100.0), &raw).unwrap();
        let sd = |v: &[GradientPoint]| {
            let m = v.iter().map(|g| g.value).sum::<f64>() / v.len() as f64;
            (v.iter().map(|g| (g.value - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
        };
        let g_raw = gradient(&q, &raw, 5).unwrap();
        let g_f = gradient(&q, &filtered, 5).unwrap();
        assert!(sd(&g_f) < sd(&g_raw));
    }
}
