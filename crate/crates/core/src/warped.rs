//! Warped metrics `g(t)² dt² + f(t)² dξ²` on the disk `D^k`, where `dξ²` is
//! the unit round metric of `S^{k−1}`, and torpedo metrics among them.
//!
//! With arc length `ds = g dt` and dots for `d/ds`,
//! `κ = −2(k−1) f̈/f + (k−1)(k−2)(1 − ḟ²)/f²`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::chart::Chart;
use crate::cutoff::{smooth_step, smooth_step_integral};
use crate::error::{Error, Result};
use crate::fixtures::{product_field, unit_sphere_diagonal, Analytic, Components, Real};
use crate::metric::MetricField;

/// Radius below which the polar expression is not evaluated.
pub const T_MIN: f64 = 1e-3;
pub const DEFAULT_PROFILE_SAMPLES: usize = 4000;

/// Radial data of a warped metric.
pub trait RadialProfile: Send + Sync {
    /// `f`, `f'`, `f''` in the radial coordinate `t`.
    fn warp(&self, t: f64) -> [f64; 3];
    /// `g`, `g'`, `g''`.
    fn speed(&self, _t: f64) -> [f64; 3] {
        [1.0, 0.0, 0.0]
    }
}

/// `f(t) = δ sin(t/δ)`: the round sphere of radius `δ`.
#[derive(Debug, Clone, Copy)]
pub struct RoundCap {
    pub delta: f64,
}

impl RadialProfile for RoundCap {
    fn warp(&self, t: f64) -> [f64; 3] {
        let d = self.delta;
        let (s, c) = (t / d).sin_cos();
        [d * s, c, -s / d]
    }
}

/// `f ≡ δ`: the cylinder `ℝ × S^{k−1}(δ)`. Not smooth at a center.
#[derive(Debug, Clone, Copy)]
pub struct Neck {
    pub delta: f64,
}

impl RadialProfile for Neck {
    fn warp(&self, _: f64) -> [f64; 3] {
        [self.delta, 0.0, 0.0]
    }
}

/// `f(t) = t`: Euclidean polar coordinates.
#[derive(Debug, Clone, Copy)]
pub struct FlatDisk;

impl RadialProfile for FlatDisk {
    fn warp(&self, t: f64) -> [f64; 3] {
        [t, 1.0, 0.0]
    }
}

#[derive(Clone)]
pub struct WarpedDiskMetric {
    k: usize,
    t_max: f64,
    profile: Arc<dyn RadialProfile>,
}

impl fmt::Debug for WarpedDiskMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpedDiskMetric").field("k", &self.k).field("t_max", &self.t_max).finish_non_exhaustive()
    }
}

/// Numerical evidence that the metric closes up smoothly at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CenterReport {
    pub f0: f64,
    pub f1_minus_one: f64,
    pub f2: f64,
    /// `|f(h) + f(−h)|`, `|g(h) − g(−h)|` at a small `h`.
    pub odd_defect: f64,
    pub even_defect: f64,
}

impl CenterReport {
    pub fn is_smooth(&self, tol: f64) -> bool {
        [self.f0, self.f1_minus_one, self.f2, self.odd_defect, self.even_defect]
            .iter()
            .all(|v| v.abs() <= tol)
    }
}

impl WarpedDiskMetric {
    pub fn new(k: usize, t_max: f64, profile: Arc<dyn RadialProfile>) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("warped disk needs k ≥ 2, got {k}")));
        }
        if !(t_max > T_MIN) {
            return Err(Error::InvalidArgument(format!("radial range {t_max} too short")));
        }
        Ok(Self { k, t_max, profile })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn profile(&self) -> &Arc<dyn RadialProfile> {
        &self.profile
    }

    pub fn center_report(&self) -> CenterReport {
        let [f0, f1, f2] = self.profile.warp(0.0);
        let h = 1e-3;
        CenterReport {
            f0,
            f1_minus_one: f1 - 1.0,
            f2,
            odd_defect: self.profile.warp(h)[0] + self.profile.warp(-h)[0],
            even_defect: self.profile.speed(h)[0] - self.profile.speed(-h)[0],
        }
    }

    /// The metric on the polar chart `(t, ξ)`, `t ∈ [t_min, t_max]` and
    /// `ξ` hyperspherical angles of `S^{k−1}`.
    pub fn field(&self) -> Result<MetricField> {
        let radial = Chart::boxed(vec![(T_MIN, self.t_max)])?;
        let chart = radial.product(&Chart::sphere(self.k - 1, Chart::default_pole_margin())?);
        MetricField::analytic(chart, Arc::new(Analytic(PolarComponents { w: self.clone() })))
    }
}

struct PolarComponents {
    w: WarpedDiskMetric,
}

impl Components for PolarComponents {
    fn inputs(&self) -> usize {
        self.w.k
    }
    fn size(&self) -> usize {
        self.w.k
    }
    fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        let t = x[0].value();
        let [f, f1, f2] = self.w.profile.warp(t);
        let [g, g1, g2] = self.w.profile.speed(t);
        let f = x[0].lift(f, f1, f2);
        let g = x[0].lift(g, g1, g2);
        let k = self.w.k;
        let mut out = vec![T::from(0.0); k * k];
        out[0] = g.clone() * g;
        let f2 = f.clone() * f;
        for (i, e) in unit_sphere_diagonal(&x[1..]).into_iter().enumerate() {
            out[(i + 1) * k + i + 1] = f2.clone() * e;
        }
        out
    }
}

pub fn warped_scalar_curvature(w: &WarpedDiskMetric, t: f64) -> Result<f64> {
    if t < T_MIN {
        return Err(Error::DegenerateCenter { t, t_min: T_MIN });
    }
    let [f, f1, f2] = w.profile.warp(t);
    if !(f > 0.0) {
        return Err(Error::NonpositiveF { t, f });
    }
    let [g, g1, _] = w.profile.speed(t);
    let fd = f1 / g;
    let fdd = f2 / (g * g) - f1 * g1 / (g * g * g);
    let k = w.k as f64;
    Ok(-2.0 * (k - 1.0) * fdd / f + (k - 1.0) * (k - 2.0) * (1.0 - fd * fd) / (f * f))
}

/// `f = δ sin θ(t)` with `θ' = (1 − H)/δ`, `H` a smooth step across
/// `[πδ/2 − s, πδ/2 + s]`. Symmetry of `H` makes `θ` land on `π/2` exactly
/// at the end of the blend, where `f` reaches `δ` with all derivatives zero.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TorpedoShape {
    pub delta: f64,
    pub smoothing: f64,
}

impl TorpedoShape {
    pub fn cap_end(&self) -> f64 {
        FRAC_PI_2 * self.delta - self.smoothing
    }

    pub fn neck_start(&self) -> f64 {
        FRAC_PI_2 * self.delta + self.smoothing
    }

    /// `θ`, `θ'`, `θ''`.
    pub fn angle(&self, t: f64) -> [f64; 3] {
        let (d, s) = (self.delta, self.smoothing);
        let a = self.cap_end();
        if t <= a {
            return [t / d, 1.0 / d, 0.0];
        }
        if t >= self.neck_start() {
            return [FRAC_PI_2, 0.0, 0.0];
        }
        let y = (t - a) / (2.0 * s);
        let [h, h1, _] = smooth_step(y);
        [t / d - 2.0 * s / d * smooth_step_integral(y), (1.0 - h) / d, -h1 / (2.0 * s * d)]
    }
}

impl RadialProfile for TorpedoShape {
    fn warp(&self, t: f64) -> [f64; 3] {
        let d = self.delta;
        let [th, th1, th2] = self.angle(t);
        let (s, c) = th.sin_cos();
        if th == FRAC_PI_2 {
            return [d, 0.0, 0.0];
        }
        [d * s, d * c * th1, d * (c * th2 - s * th1 * th1)]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TorpedoProfile {
    pub k: usize,
    pub shape: TorpedoShape,
    pub t_max: f64,
    pub min_kappa: f64,
    pub argmin: f64,
    pub cap_kappa: f64,
    pub neck_kappa: f64,
    /// `k = 2`: the neck is flat, so only cap and blend are certified positive.
    pub neck_flat: bool,
    pub samples: usize,
}

impl TorpedoProfile {
    pub fn metric(&self) -> WarpedDiskMetric {
        WarpedDiskMetric { k: self.k, t_max: self.t_max, profile: Arc::new(self.shape) }
    }

    /// `(t, f, κ)` on `n` equally spaced radii of `[t_min, t_max]`.
    pub fn table(&self, n: usize) -> Result<Vec<[f64; 3]>> {
        let w = self.metric();
        radii(self.t_max, n)
            .into_iter()
            .map(|t| Ok([t, self.shape.warp(t)[0], warped_scalar_curvature(&w, t)?]))
            .collect()
    }

    pub fn cap_end(&self) -> f64 {
        self.shape.cap_end()
    }

    pub fn neck_start(&self) -> f64 {
        self.shape.neck_start()
    }
}

fn radii(t_max: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let step = (t_max - T_MIN) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { t_max } else { T_MIN + step * i as f64 }).collect()
}

pub fn default_smoothing(delta: f64) -> f64 {
    0.2 * delta
}

/// Torpedo of radius `δ` on `D^k` with a neck of length `δ`.
pub fn torpedo_profile(k: usize, delta: f64, smoothing: f64) -> Result<TorpedoProfile> {
    if k < 2 {
        return Err(Error::BadTorpedoParameters(format!("k = {k} < 2")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::BadTorpedoParameters(format!("δ = {delta} must be positive")));
    }
    if !(smoothing > 0.0 && smoothing < FRAC_PI_2 * delta / 2.0) {
        return Err(Error::BadTorpedoParameters(format!("smoothing {smoothing} outside (0, πδ/4)")));
    }
    let shape = TorpedoShape { delta, smoothing };
    let t_max = shape.neck_start() + delta;
    let w = WarpedDiskMetric::new(k, t_max, Arc::new(shape))?;
    let mut min_kappa = f64::INFINITY;
    let mut argmin = T_MIN;
    let mut min_before_neck = f64::INFINITY;
    for t in radii(t_max, DEFAULT_PROFILE_SAMPLES) {
        let kappa = warped_scalar_curvature(&w, t)?;
        if kappa < min_kappa {
            min_kappa = kappa;
            argmin = t;
        }
        if t < shape.neck_start() {
            min_before_neck = min_before_neck.min(kappa);
        }
    }
    let cap_kappa = warped_scalar_curvature(&w, T_MIN.max(0.5 * shape.cap_end()))?;
    let neck_kappa = warped_scalar_curvature(&w, t_max)?;
    let neck_flat = k == 2;
    let positive = if neck_flat { min_before_neck >= 0.0 && cap_kappa > 0.0 } else { min_kappa > 0.0 };
    if !positive {
        return Err(Error::BadSmoothing { min_kappa, t: argmin });
    }
    Ok(TorpedoProfile {
        k,
        shape,
        t_max,
        min_kappa,
        argmin,
        cap_kappa,
        neck_kappa,
        neck_flat,
        samples: DEFAULT_PROFILE_SAMPLES,
    })
}

/// `g_N + g_torpedo` on the chart `N × D^k` (polar coordinates on the disk).
pub fn build_product_handle_metric(g_n: &MetricField, torpedo: &TorpedoProfile) -> Result<MetricField> {
    product_field(g_n, &torpedo.metric().field()?)
}
