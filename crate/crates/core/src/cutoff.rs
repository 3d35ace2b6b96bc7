//! The transition function `F`: smooth, `0` on `(-∞, ε]`, `1` on
//! `[1 − ε, ∞)`, with `0 ≤ F' < 2`, and its rescalings `F_τ(t) = F(t/τ)`.
//!
//! `F(t) = Φ((t − ε)/(1 − 2ε))` where `Φ' ∝ σ(s/w) σ((1 − s)/w)` is a
//! plateau bump built from the smooth step
//! `σ(x) = 1 / (1 + exp(1/x − 1/(1 − x)))`. Because `σ(x) + σ(1 − x) = 1`
//! the bump integrates to `1 − w` and `sup F' = 1 / ((1 − w)(1 − 2ε))`.

use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 0.125;
pub const DEFAULT_VERIFY_SAMPLES: usize = 10_000;

/// `σ(x)`, `σ'(x)`, `σ''(x)`.
pub fn smooth_step(x: f64) -> [f64; 3] {
    if x <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    if x >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    let y = 1.0 - x;
    let q = 1.0 / x - 1.0 / y;
    let s = 1.0 / (1.0 + q.exp());
    // σ(1 − σ) without cancellation
    let p = 1.0 / (4.0 * (0.5 * q).cosh().powi(2));
    if p == 0.0 {
        return [s, 0.0, 0.0];
    }
    let w = 1.0 / (x * x) + 1.0 / (y * y);
    let dw = -2.0 / (x * x * x) + 2.0 / (y * y * y);
    let d1 = p * w;
    let d2 = d1 * (1.0 - 2.0 * s) * w + p * dw;
    [s, d1, d2]
}

const TABLE_INTERVALS: usize = 4096;

// 5-point Gauss–Legendre on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_1,
];

fn gauss_legendre(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(&x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

fn step_integral_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 1.0 / TABLE_INTERVALS as f64;
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(TABLE_INTERVALS + 1);
        out.push(0.0);
        for i in 0..TABLE_INTERVALS {
            acc += gauss_legendre(i as f64 * h, (i + 1) as f64 * h, |x| smooth_step(x)[0]);
            out.push(acc);
        }
        out
    })
}

/// `Σ(y) = ∫₀^y σ`, extended by `y − 1/2` past `y = 1`.
pub fn smooth_step_integral(y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y >= 1.0 {
        return y - 0.5;
    }
    let table = step_integral_table();
    let h = 1.0 / TABLE_INTERVALS as f64;
    let i = ((y / h) as usize).min(TABLE_INTERVALS - 1);
    let y0 = i as f64 * h;
    table[i] + gauss_legendre(y0, y, |x| smooth_step(x)[0])
}

/// Anything that can be certified as a transition function.
pub trait Transition: Send + Sync {
    fn epsilon(&self) -> f64;
    /// `F(t)`, `F'(t)`, `F''(t)`; `None` derivatives mean value-only.
    fn eval(&self, t: f64) -> (f64, Option<f64>, Option<f64>);
}

/// Outcome of [`verify_cutoff`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffCertificate {
    pub epsilon: f64,
    pub samples: usize,
    pub sup_derivative: f64,
    pub sup_derivative_fd: f64,
    pub jump_ratio: f64,
    pub violations: Vec<String>,
}

impl CutoffCertificate {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The canonical cutoff.
#[derive(Debug, Clone, Serialize)]
pub struct CutoffFunction {
    epsilon: f64,
    ramp_width: f64,
    certificate: Option<CutoffCertificate>,
}

pub fn make_cutoff(epsilon: f64) -> Result<CutoffFunction> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(Error::BadEpsilon(epsilon));
    }
    let span = 1.0 - 2.0 * epsilon;
    let widest = 1.0 - 1.0 / (2.0 * span);
    let ramp_width = (0.75 * widest).min(0.25);
    let mut f = CutoffFunction { epsilon, ramp_width, certificate: None };
    let cert = verify_cutoff(&f, DEFAULT_VERIFY_SAMPLES);
    if !cert.passed() {
        return Err(Error::ConstraintViolation(cert.violations.join("; ")));
    }
    f.certificate = Some(cert);
    Ok(f)
}

impl CutoffFunction {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Relative width `w` of the two shoulders of `Φ'`.
    pub fn ramp_width(&self) -> f64 {
        self.ramp_width
    }

    pub fn certificate(&self) -> Option<&CutoffCertificate> {
        self.certificate.as_ref()
    }

    /// `sup F' = 1 / ((1 − w)(1 − 2ε))`, attained on the plateau.
    pub fn sup_derivative(&self) -> f64 {
        1.0 / ((1.0 - self.ramp_width) * (1.0 - 2.0 * self.epsilon))
    }

    /// `Φ(s)`, `Φ'(s)`, `Φ''(s)` on the unit interval.
    fn profile(&self, s: f64) -> [f64; 3] {
        let w = self.ramp_width;
        let norm = 1.0 - w;
        if s <= 0.0 {
            return [0.0, 0.0, 0.0];
        }
        if s >= 1.0 {
            return [1.0, 0.0, 0.0];
        }
        let [a, da, _] = smooth_step(s / w);
        let [b, db, _] = smooth_step((1.0 - s) / w);
        let value = if s <= w {
            w * smooth_step_integral(s / w)
        } else if s <= 1.0 - w {
            s - 0.5 * w
        } else {
            norm - w * smooth_step_integral((1.0 - s) / w)
        };
        let d1 = a * b;
        let d2 = (da * b - a * db) / w;
        [value / norm, d1 / norm, d2 / norm]
    }

    /// `F(t)`, `F'(t)`, `F''(t)`.
    pub fn derivatives(&self, t: f64) -> [f64; 3] {
        let span = 1.0 - 2.0 * self.epsilon;
        let [v, d1, d2] = self.profile((t - self.epsilon) / span);
        [v, d1 / span, d2 / (span * span)]
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivatives(t)[0]
    }
}

impl Transition for CutoffFunction {
    fn epsilon(&self) -> f64 {
        self.epsilon
    }
    fn eval(&self, t: f64) -> (f64, Option<f64>, Option<f64>) {
        let [v, d1, d2] = self.derivatives(t);
        (v, Some(d1), Some(d2))
    }
}

/// `c · F(t/τ)` with its first two derivatives.
#[derive(Debug, Clone)]
pub struct Ramp {
    cutoff: Arc<CutoffFunction>,
    tau: f64,
    amplitude: f64,
}

impl Ramp {
    pub fn new(cutoff: Arc<CutoffFunction>, tau: f64, amplitude: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::NonpositiveTau(tau));
        }
        Ok(Self { cutoff, tau, amplitude })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn cutoff(&self) -> &Arc<CutoffFunction> {
        &self.cutoff
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Self { amplitude, ..self.clone() }
    }

    pub fn derivatives(&self, t: f64) -> [f64; 3] {
        let [v, d1, d2] = self.cutoff.derivatives(t / self.tau);
        let c = self.amplitude;
        [c * v, c * d1 / self.tau, c * d2 / (self.tau * self.tau)]
    }

    pub fn value(&self, t: f64) -> f64 {
        self.derivatives(t)[0]
    }
}

/// `F_τ(t) = F(t/τ)`.
pub fn scale_cutoff(cutoff: &Arc<CutoffFunction>, tau: f64) -> Result<Ramp> {
    Ramp::new(cutoff.clone(), tau, 1.0)
}

const FLAT_TOLERANCE: f64 = 1e-12;
const DERIVATIVE_FLAT_TOLERANCE: f64 = 1e-9;
const FD_STEP: f64 = 1e-6;
const JUMP_RATIO_LIMIT: f64 = 1.5;

/// Estimates `sup |F'''|` from second differences of values on `n` uniform
/// samples of `[lo, hi]`.
fn third_difference_sup(f: &dyn Transition, lo: f64, hi: f64, n: usize) -> f64 {
    let step = (hi - lo) / (n - 1) as f64;
    let values: Vec<f64> = (0..n).map(|i| f.eval(lo + step * i as f64).0).collect();
    let second: Vec<f64> = values
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]) / (step * step))
        .collect();
    second
        .windows(2)
        .map(|w| (w[1] - w[0]).abs() / step)
        .fold(0.0, f64::max)
}

/// Checks every cutoff constraint on `samples` uniform points of
/// `[-0.1, 1.1]`. Never fails; violations are listed in the certificate.
pub fn verify_cutoff(f: &dyn Transition, samples: usize) -> CutoffCertificate {
    let eps = f.epsilon();
    let samples = samples.max(2);
    let (lo, hi) = (-0.1, 1.1);
    let step = (hi - lo) / (samples - 1) as f64;
    let mut violations = Vec::new();
    let mut note = |msg: String| {
        if !violations.contains(&msg) {
            violations.push(msg);
        }
    };
    if !(eps > 0.0 && eps < 0.25) {
        note(format!("epsilon {eps} outside (0, 1/4)"));
    }
    let mut sup_d1: f64 = 0.0;
    let mut sup_fd: f64 = 0.0;
    for i in 0..samples {
        let t = lo + step * i as f64;
        let (v, d1, d2) = f.eval(t);
        if !(-FLAT_TOLERANCE..=1.0 + FLAT_TOLERANCE).contains(&v) {
            note("F leaves [0, 1]".into());
        }
        if t <= eps && v.abs() > FLAT_TOLERANCE {
            note("F ≠ 0 on t ≤ ε".into());
        }
        if t >= 1.0 - eps && (v - 1.0).abs() > FLAT_TOLERANCE {
            note("F ≠ 1 on t ≥ 1 − ε".into());
        }
        let fd = (f.eval(t + FD_STEP).0 - f.eval(t - FD_STEP).0) / (2.0 * FD_STEP);
        sup_fd = sup_fd.max(fd);
        let slope = d1.unwrap_or(fd);
        sup_d1 = sup_d1.max(slope);
        if slope < -FLAT_TOLERANCE || fd < -1e-9 {
            note("F′ < 0".into());
        }
        if let Some(d1) = d1 {
            // central-difference truncation bound from the analytic F''
            let truncation = match (f.eval(t + FD_STEP).2, f.eval(t - FD_STEP).2) {
                (Some(a), Some(b)) => FD_STEP * (a - b).abs() / 12.0,
                _ => 0.0,
            };
            if (d1 - fd).abs() > 1e-6 * d1.abs().max(1.0) + truncation {
                note("F′ disagrees with finite differences".into());
            }
        }
        let flat = t <= eps || t >= 1.0 - eps;
        if flat {
            let d2 = d2.unwrap_or(0.0);
            if slope.abs() > DERIVATIVE_FLAT_TOLERANCE || d2.abs() > DERIVATIVE_FLAT_TOLERANCE {
                note("F′, F″ do not vanish outside (ε, 1 − ε)".into());
            }
        }
    }
    if sup_d1 >= 2.0 || sup_fd >= 2.0 {
        note("sup F′ ≥ 2".into());
    }
    // a jump in F'' makes the third-difference estimate grow like 1/Δ
    let coarse = third_difference_sup(f, lo, hi, samples);
    let fine = third_difference_sup(f, lo, hi, 2 * samples - 1);
    let jump_ratio = if coarse > 0.0 { fine / coarse } else { 1.0 };
    if jump_ratio > JUMP_RATIO_LIMIT {
        note("F″ discontinuous".into());
    }
    CutoffCertificate { epsilon: eps, samples, sup_derivative: sup_d1, sup_derivative_fd: sup_fd, jump_ratio, violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct PiecewiseLinear(f64);

    impl Transition for PiecewiseLinear {
        fn epsilon(&self) -> f64 {
            self.0
        }
        fn eval(&self, t: f64) -> (f64, Option<f64>, Option<f64>) {
            let span = 1.0 - 2.0 * self.0;
            ((t - self.0).clamp(0.0, span) / span, None, None)
        }
    }

    /// Quintic smoothstep over `[ε, 1 − ε]`: C², slope peak `15/8 / (1 − 2ε)`.
    struct Quintic(f64);

    impl Transition for Quintic {
        fn epsilon(&self) -> f64 {
            self.0
        }
        fn eval(&self, t: f64) -> (f64, Option<f64>, Option<f64>) {
            let span = 1.0 - 2.0 * self.0;
            let x = ((t - self.0) / span).clamp(0.0, 1.0);
            let v = x * x * x * (x * (6.0 * x - 15.0) + 10.0);
            let d1 = 30.0 * x * x * (x - 1.0) * (x - 1.0) / span;
            let d2 = 60.0 * x * (2.0 * x * x - 3.0 * x + 1.0) / (span * span);
            (v, Some(d1), Some(d2))
        }
    }

    #[test]
    fn smooth_step_symmetry_and_integral() {
        for &x in &[0.1, 0.25, 0.4, 0.5] {
            let a = smooth_step(x);
            let b = smooth_step(1.0 - x);
            assert!((a[0] + b[0] - 1.0).abs() < 1e-15);
            assert!((a[1] - b[1]).abs() < 1e-12);
        }
        assert!((smooth_step_integral(1.0) - 0.5).abs() < 1e-15);
        assert!((smooth_step_integral(0.999_999_999) - 0.5).abs() < 1e-9);
        assert!((smooth_step_integral(0.7) - (0.2 + smooth_step_integral(0.3))).abs() < 1e-14);
    }

    #[test]
    fn canonical_cutoff_values() {
        let f = make_cutoff(0.125).unwrap();
        assert_eq!(f.value(0.125), 0.0);
        assert_eq!(f.value(0.875), 1.0);
        assert!((f.value(0.5) - 0.5).abs() < 1e-14);
        let sup = f.sup_derivative();
        assert!(sup > 1.0 && sup < 2.0, "{sup}");
        assert!((sup - 16.0 / 9.0).abs() < 1e-14);
        let cert = f.certificate().unwrap();
        assert!((cert.sup_derivative - sup).abs() < 1e-9);
        assert!(cert.passed(), "{:?}", cert.violations);
    }

    #[test]
    fn bad_epsilon() {
        assert_eq!(make_cutoff(0.3).unwrap_err(), Error::BadEpsilon(0.3));
        assert!(make_cutoff(0.0).is_err());
        assert!(make_cutoff(0.25).is_err());
    }

    #[test]
    fn whole_epsilon_range_certifies() {
        for eps in [0.01, 0.05, 0.125, 0.2, 0.24, 0.249] {
            let f = make_cutoff(eps).unwrap();
            assert!(f.sup_derivative() < 2.0, "{eps}");
        }
    }

    #[test]
    fn tampered_slope_is_flagged() {
        let cert = verify_cutoff(&Quintic(0.125), 10_000);
        assert!((cert.sup_derivative - 2.5).abs() < 1e-6);
        assert!(cert.violations.contains(&"sup F′ ≥ 2".to_string()), "{:?}", cert.violations);
        assert!(!cert.violations.iter().any(|v| v.contains("discontinuous")));
    }

    #[test]
    fn piecewise_linear_is_flagged() {
        let cert = verify_cutoff(&PiecewiseLinear(0.125), 10_000);
        assert!(cert.violations.contains(&"F″ discontinuous".to_string()), "{:?}", cert);
    }

    #[test]
    fn flat_joins_and_monotone() {
        let f = make_cutoff(0.125).unwrap();
        for t in [0.125, 0.875] {
            let [_, d1, d2] = f.derivatives(t);
            assert!(d1.abs() < 1e-9 && d2.abs() < 1e-9);
        }
        for i in 0..=2000 {
            assert!(f.derivatives(i as f64 / 2000.0)[1] >= 0.0);
        }
    }

    #[test]
    fn derivative_integrates_to_one() {
        let f = make_cutoff(0.125).unwrap();
        let n = 4000;
        let (a, b) = (0.125, 0.875);
        let h = (b - a) / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f.derivatives(a + h * i as f64)[1];
        }
        assert!((acc * h / 3.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let f = make_cutoff(0.125).unwrap();
        let h = 1e-5;
        for i in 1..100 {
            let t = i as f64 / 100.0;
            let fd = (f.derivatives(t + h)[1] - f.derivatives(t - h)[1]) / (2.0 * h);
            assert!((fd - f.derivatives(t)[2]).abs() < 1e-4 * fd.abs().max(1.0), "{t}");
        }
    }

    #[test]
    fn scaled_ramp() {
        let f = Arc::new(make_cutoff(0.125).unwrap());
        let one = scale_cutoff(&f, 1.0).unwrap();
        assert_eq!(one.derivatives(0.3), f.derivatives(0.3));
        let two = scale_cutoff(&f, 2.0).unwrap();
        assert_eq!(two.value(1.0), f.value(0.5));
        let [_, d1, d2] = two.derivatives(0.9);
        let [_, e1, e2] = f.derivatives(0.45);
        assert_eq!(d1, e1 / 2.0);
        assert_eq!(d2, e2 / 4.0);
        assert!(matches!(scale_cutoff(&f, 0.0), Err(Error::NonpositiveTau(_))));
        assert!(matches!(scale_cutoff(&f, -1.0), Err(Error::NonpositiveTau(_))));
    }
}
