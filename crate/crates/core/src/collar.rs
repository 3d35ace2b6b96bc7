//! Collared metrics and the gluing / flow-pullback retraction.
//!
//! A metric on `M` is represented only on its collar `∂M × (−1, 0]`: a
//! cross-section `h(t)` on the boundary chart and the coefficient of `dt²`.
//! Everything further inside is an opaque marker carried along unchanged.
//!
//! Gluing attaches the cylinder `ω(F(t/S)) + dt²` along `∂M × [0, S]`; the
//! time-one flow of `ψ(t) S ∂_t` pulls the result back onto `(−1, 0]`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::chart::{Chart, GridSpec};
use crate::cutoff::{CutoffFunction, Ramp};
use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::{DerivativeMode, FdSteps, Jet, MetricField, SymmetricField};
use crate::path::{reparameterize_path, MetricPath};
use crate::stretch::{stretch_from_samples, CylinderSamples, StretchOptions, StretchResult};

pub const BOUNDARY_TOLERANCE: f64 = 1e-8;
pub const FLOW_STEPS: usize = 10_000;
pub const FLOW_TOLERANCE: f64 = 1e-6;
/// Collar coordinates at or below this are never moved by the flow.
pub const FLOW_FIXED_BELOW: f64 = -0.75;
/// The input collar must be a product on `(PRODUCT_BAND, 0]`.
pub const PRODUCT_BAND: f64 = -0.25;

/// Collar data: cross-sections `h(t)` and the `dt²` coefficient.
pub trait CollarData: Send + Sync {
    fn chart(&self) -> &Chart;
    fn cross_section(&self, t: f64, x: &[f64]) -> DMatrix<f64>;
    fn dt_coefficient(&self, t: f64) -> f64;
    /// Range of the collar coordinate, open at the lower end.
    fn range(&self) -> (f64, f64) {
        (-1.0, 0.0)
    }
}

#[derive(Clone)]
pub struct CollaredMetric {
    data: Arc<dyn CollarData>,
    /// Stands in for the metric away from the collar.
    pub interior: String,
}

impl fmt::Debug for CollaredMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CollaredMetric")
            .field("chart", self.data.chart())
            .field("range", &self.data.range())
            .field("interior", &self.interior)
            .finish_non_exhaustive()
    }
}

impl CollaredMetric {
    pub fn new(data: Arc<dyn CollarData>, interior: impl Into<String>) -> Self {
        Self { data, interior: interior.into() }
    }

    /// `h(t) ≡ h0`, `dt² + h0` on the whole collar.
    pub fn product(h0: &MetricField, interior: impl Into<String>) -> Self {
        Self::new(Arc::new(ProductCollar { h0: h0.clone() }), interior)
    }

    /// `h(t) = β(ψ(t))`: `β(0)` deep inside, `β(1)` on the product band.
    pub fn from_path(beta: &MetricPath, psi: &CollarCutoff, interior: impl Into<String>) -> Self {
        Self::new(Arc::new(PathCollar { beta: beta.clone(), psi: psi.clone() }), interior)
    }

    pub fn data(&self) -> &Arc<dyn CollarData> {
        &self.data
    }

    pub fn chart(&self) -> &Chart {
        self.data.chart()
    }

    pub fn cross_section(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        self.data.cross_section(t, x)
    }

    pub fn dt_coefficient(&self, t: f64) -> f64 {
        self.data.dt_coefficient(t)
    }

    /// Checks positive definiteness on `grid × t_samples` and that the
    /// collar is a product on `(−1/4, 0]`.
    pub fn validate(&self, grid: &GridSpec, t_samples: usize) -> Result<()> {
        let points = grid.samples(self.chart())?;
        let h0: Vec<DMatrix<f64>> = points.iter().map(|x| self.cross_section(0.0, x)).collect();
        for t in collar_samples(t_samples) {
            if !(self.dt_coefficient(t) > 0.0) {
                return Err(Error::ConstraintViolation(format!("dt² coefficient not positive at t = {t}")));
            }
            for (x, h0x) in points.iter().zip(&h0) {
                let h = self.cross_section(t, x);
                let min = linalg::min_eigenvalue(&h);
                if !(min > 0.0) {
                    let mut point = x.clone();
                    point.push(t);
                    return Err(Error::NonSpd { point, min_eigenvalue: min });
                }
                if t > PRODUCT_BAND && ((&h - h0x).amax() > 0.0 || self.dt_coefficient(t) != 1.0) {
                    return Err(Error::ConstraintViolation(format!("collar is not a product at t = {t}")));
                }
            }
        }
        Ok(())
    }

    /// Largest `w` (on the samples) such that the collar is a product on `[−w, 0]`.
    pub fn product_band_width(&self, grid: &GridSpec, t_samples: usize, tol: f64) -> Result<f64> {
        let points = grid.samples(self.chart())?;
        let h0: Vec<DMatrix<f64>> = points.iter().map(|x| self.cross_section(0.0, x)).collect();
        let c0 = self.dt_coefficient(0.0);
        let mut ts = collar_samples(t_samples);
        ts.reverse();
        let mut width = 0.0;
        for t in ts {
            let same = (self.dt_coefficient(t) - c0).abs() <= tol
                && points.iter().zip(&h0).all(|(x, h)| (self.cross_section(t, x) - h).amax() <= tol);
            if !same {
                break;
            }
            width = -t;
        }
        Ok(width)
    }
}

/// `n` equally spaced collar coordinates in `(−1, 0]`, `0` included.
pub fn collar_samples(n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..n).map(|i| -1.0 + (i + 1) as f64 / n as f64).collect()
}

struct ProductCollar {
    h0: MetricField,
}

impl CollarData for ProductCollar {
    fn chart(&self) -> &Chart {
        self.h0.chart()
    }
    fn cross_section(&self, _: f64, x: &[f64]) -> DMatrix<f64> {
        self.h0.value(x)
    }
    fn dt_coefficient(&self, _: f64) -> f64 {
        1.0
    }
}

struct PathCollar {
    beta: MetricPath,
    psi: CollarCutoff,
}

impl CollarData for PathCollar {
    fn chart(&self) -> &Chart {
        self.beta.chart()
    }
    fn cross_section(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        self.beta.value(self.psi.derivatives(t)[0], x)
    }
    fn dt_coefficient(&self, _: f64) -> f64 {
        1.0
    }
}

/// `ψ(t) = F(2t + 3/2)`: zero up to `−3/4`, one from `−1/4` on.
#[derive(Debug, Clone)]
pub struct CollarCutoff {
    cutoff: Arc<CutoffFunction>,
}

impl CollarCutoff {
    pub fn new(cutoff: Arc<CutoffFunction>) -> Self {
        Self { cutoff }
    }

    /// `ψ`, `ψ'`, `ψ''`.
    pub fn derivatives(&self, t: f64) -> [f64; 3] {
        let [v, d1, d2] = self.cutoff.derivatives(2.0 * t + 1.5);
        [v, 2.0 * d1, 4.0 * d2]
    }
}

/// `ρ(g) = g|_{∂M}` as a field on the boundary chart.
pub fn boundary_restrict(cm: &CollaredMetric) -> Result<MetricField> {
    MetricField::new(
        cm.chart().clone(),
        Arc::new(Section { data: cm.data.clone(), t: 0.0 }),
        DerivativeMode::FiniteDifference(FdSteps::default()),
    )
}

struct Section {
    data: Arc<dyn CollarData>,
    t: f64,
}

impl SymmetricField for Section {
    fn inputs(&self) -> usize {
        self.data.chart().dim()
    }
    fn size(&self) -> usize {
        self.data.chart().dim()
    }
    fn value(&self, x: &[f64]) -> DMatrix<f64> {
        self.data.cross_section(self.t, x)
    }
    fn jet(&self, _: &[f64]) -> Option<Jet> {
        None
    }
}

/// Time-one map of `ṫ = S ψ(t)` and its derivative in the initial value.
#[derive(Debug, Clone)]
pub struct FlowMap {
    s: f64,
    psi: CollarCutoff,
    steps: usize,
}

impl FlowMap {
    pub fn speed(&self) -> f64 {
        self.s
    }

    /// `(φ(t), φ'(t))` by classical Runge–Kutta on the state and its
    /// variational equation `ż = S ψ'(y) z`.
    pub fn map(&self, t: f64) -> (f64, f64) {
        let s = self.s;
        if s == 0.0 || t <= FLOW_FIXED_BELOW {
            return (t, 1.0);
        }
        let h = 1.0 / self.steps as f64;
        let field = |y: f64, z: f64| {
            let [p, dp, _] = self.psi.derivatives(y);
            (s * p, s * dp * z)
        };
        let (mut y, mut z) = (t, 1.0);
        for _ in 0..self.steps {
            let (k1, l1) = field(y, z);
            let (k2, l2) = field(y + 0.5 * h * k1, z + 0.5 * h * l1);
            let (k3, l3) = field(y + 0.5 * h * k2, z + 0.5 * h * l2);
            let (k4, l4) = field(y + h * k3, z + h * l3);
            y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            z += h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        }
        (y, z)
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.map(t).0
    }
}

pub fn collar_flow(s: f64, psi: &CollarCutoff) -> Result<FlowMap> {
    collar_flow_with_steps(s, psi, FLOW_STEPS)
}

pub fn collar_flow_with_steps(s: f64, psi: &CollarCutoff, steps: usize) -> Result<FlowMap> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("flow speed {s} must be nonnegative")));
    }
    let flow = FlowMap { s, psi: psi.clone(), steps: steps.max(1) };
    let end = flow.phi(0.0);
    if (end - s).abs() > FLOW_TOLERANCE * s.max(f64::MIN_POSITIVE) && s > 0.0 {
        return Err(Error::OdeTolerance { reached: end, expected: s });
    }
    let mut prev = f64::NEG_INFINITY;
    for t in collar_samples(200) {
        let (y, z) = flow.map(t);
        if !(y > prev && z > 0.0) {
            return Err(Error::ConstraintViolation(format!("flow map not increasing at t = {t}")));
        }
        prev = y;
    }
    Ok(flow)
}

/// Collar extended by the cylinder `ω(c F(t/S))` on `[0, S]`.
pub struct GluedCollar {
    inner: Arc<dyn CollarData>,
    omega: MetricPath,
    ramp: Ramp,
}

impl GluedCollar {
    pub fn stretch(&self) -> f64 {
        self.ramp.tau()
    }
}

impl CollarData for GluedCollar {
    fn chart(&self) -> &Chart {
        self.inner.chart()
    }
    fn cross_section(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        if t <= 0.0 {
            self.inner.cross_section(t, x)
        } else {
            self.omega.value(self.ramp.value(t), x)
        }
    }
    fn dt_coefficient(&self, t: f64) -> f64 {
        if t <= 0.0 {
            self.inner.dt_coefficient(t)
        } else {
            1.0
        }
    }
    fn range(&self) -> (f64, f64) {
        (self.inner.range().0, self.ramp.tau())
    }
}

/// `(Φ₁)^*` of a collar: `h(φ(t))` and `φ'(t)² c(φ(t))`.
pub struct PulledBack {
    source: Arc<dyn CollarData>,
    flow: FlowMap,
    cache: Mutex<HashMap<u64, (f64, f64)>>,
}

impl PulledBack {
    pub fn new(source: Arc<dyn CollarData>, flow: FlowMap) -> Self {
        Self { source, flow, cache: Mutex::new(HashMap::new()) }
    }

    pub fn flow(&self) -> &FlowMap {
        &self.flow
    }

    fn mapped(&self, t: f64) -> (f64, f64) {
        if let Some(&hit) = self.cache.lock().unwrap().get(&t.to_bits()) {
            return hit;
        }
        let out = self.flow.map(t);
        self.cache.lock().unwrap().insert(t.to_bits(), out);
        out
    }
}

impl CollarData for PulledBack {
    fn chart(&self) -> &Chart {
        self.source.chart()
    }
    fn cross_section(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        self.source.cross_section(self.mapped(t).0, x)
    }
    fn dt_coefficient(&self, t: f64) -> f64 {
        let (y, z) = self.mapped(t);
        z * z * self.source.dt_coefficient(y)
    }
}

/// Stretch of `ω` with the coefficient table it was read from.
pub struct GlueContext {
    pub stretch: StretchResult,
    samples: CylinderSamples,
    cutoff: Arc<CutoffFunction>,
}

impl GlueContext {
    /// Computes `S(ω)` and checks `ω(0) = ρ(g)` on the grid.
    pub fn new(cm: &CollaredMetric, omega: &MetricPath, cutoff: &Arc<CutoffFunction>, options: &StretchOptions) -> Result<Self> {
        if cm.chart() != omega.chart() {
            return Err(Error::ChartMismatch("path and collar live on different boundary charts".into()));
        }
        let residual = options
            .grid
            .samples(cm.chart())?
            .iter()
            .map(|x| (omega.value(0.0, x) - cm.cross_section(0.0, x)).amax())
            .fold(0.0, f64::max);
        if residual > BOUNDARY_TOLERANCE {
            return Err(Error::BoundaryMismatch { residual });
        }
        let samples = CylinderSamples::build(omega, cutoff, options)?;
        let stretch = stretch_from_samples(&samples, options.tolerance)?;
        Ok(Self { stretch, samples, cutoff: cutoff.clone() })
    }

    pub fn s(&self) -> f64 {
        self.stretch.s
    }

    /// Glues `ω(c F(t/S))` for a given amplitude `c`.
    pub fn glue(&self, cm: &CollaredMetric, omega: &MetricPath, amplitude: f64) -> Result<GluedCollar> {
        Ok(GluedCollar {
            inner: cm.data.clone(),
            omega: omega.clone(),
            ramp: Ramp::new(self.cutoff.clone(), self.s(), amplitude)?,
        })
    }
}

/// `g^ω`: the collar extended by the cylinder at stretch `S(ω)`.
pub fn glue_omega(
    cm: &CollaredMetric,
    omega: &MetricPath,
    cutoff: &Arc<CutoffFunction>,
    options: &StretchOptions,
) -> Result<(GluedCollar, StretchResult)> {
    let ctx = GlueContext::new(cm, omega, cutoff, options)?;
    let min_kappa = ctx.samples.min_kappa(ctx.s());
    if min_kappa < 0.0 {
        return Err(Error::NotPscCylinder { stretch: ctx.s(), min_kappa });
    }
    Ok((ctx.glue(cm, omega, 1.0)?, ctx.stretch))
}

fn pull_back(glued: GluedCollar, speed: f64, psi: &CollarCutoff, interior: &str) -> Result<CollaredMetric> {
    let flow = collar_flow(speed, psi)?;
    Ok(CollaredMetric::new(Arc::new(PulledBack::new(Arc::new(glued), flow)), interior))
}

/// `r(g, ω) = (Φ₁^{S(ω)})^* g^ω` restricted to the collar.
pub fn retract(
    cm: &CollaredMetric,
    omega: &MetricPath,
    cutoff: &Arc<CutoffFunction>,
    psi: &CollarCutoff,
    options: &StretchOptions,
) -> Result<CollaredMetric> {
    let (glued, stretch) = glue_omega(cm, omega, cutoff, options)?;
    pull_back(glued, stretch.s, psi, &cm.interior)
}

/// The homotopy from the identity (`u = 0`) to `(r(g, ω), ω(1))` (`u = 1`).
///
/// `S(ω)` is computed once and used for every `u`.
pub fn homotopy_h(
    cm: &CollaredMetric,
    omega: &MetricPath,
    cutoff: &Arc<CutoffFunction>,
    psi: &CollarCutoff,
    u: f64,
    options: &StretchOptions,
) -> Result<(CollaredMetric, MetricPath)> {
    let ctx = GlueContext::new(cm, omega, cutoff, options)?;
    homotopy_with(&ctx, cm, omega, psi, u)
}

pub fn homotopy_with(
    ctx: &GlueContext,
    cm: &CollaredMetric,
    omega: &MetricPath,
    psi: &CollarCutoff,
    u: f64,
) -> Result<(CollaredMetric, MetricPath)> {
    let branch = if u <= 0.5 { Branch::Lower } else { Branch::Upper };
    homotopy_branch(ctx, cm, omega, psi, u, branch)
}

/// The two halves of the homotopy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// `u ∈ [0, 1/2]`: flow for time `2u S` with the cylinder switched off.
    Lower,
    /// `u ∈ [1/2, 1]`: full flow, cylinder amplitude `2u − 1`, path `ω_{2u−1}`.
    Upper,
}

/// One branch formula evaluated at `u`, without checking which half `u`
/// lies in beyond `[0, 1]`. Both formulas are defined at `u = 1/2`.
pub fn homotopy_branch(
    ctx: &GlueContext,
    cm: &CollaredMetric,
    omega: &MetricPath,
    psi: &CollarCutoff,
    u: f64,
    branch: Branch,
) -> Result<(CollaredMetric, MetricPath)> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::OutOfRangeU(u));
    }
    let s = ctx.s();
    match branch {
        Branch::Lower => {
            let glued = ctx.glue(cm, omega, 0.0)?;
            Ok((pull_back(glued, (2.0 * u).min(1.0) * s, psi, &cm.interior)?, omega.clone()))
        }
        Branch::Upper => {
            let c = (2.0 * u - 1.0).max(0.0);
            let glued = ctx.glue(cm, omega, c)?;
            Ok((pull_back(glued, s, psi, &cm.interior)?, reparameterize_path(omega, c)?))
        }
    }
}

/// Largest component-wise difference between two collars over the grid and
/// `t_samples` collar coordinates, including the `dt²` coefficient.
pub fn collar_gap(a: &CollaredMetric, b: &CollaredMetric, grid: &GridSpec, t_samples: usize) -> Result<f64> {
    let points = grid.samples(a.chart())?;
    let mut gap: f64 = 0.0;
    for t in collar_samples(t_samples) {
        gap = gap.max((a.dt_coefficient(t) - b.dt_coefficient(t)).abs());
        for x in &points {
            gap = gap.max((a.cross_section(t, x) - b.cross_section(t, x)).amax());
        }
    }
    Ok(gap)
}

/// Per-sample record used in reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollarRow {
    pub t: f64,
    pub dt_coefficient: f64,
    pub cross_section: Vec<f64>,
}

/// Cross-sections at one base point for `t_samples` collar coordinates.
pub fn collar_table(cm: &CollaredMetric, x: &[f64], t_samples: usize) -> Vec<CollarRow> {
    collar_samples(t_samples)
        .into_iter()
        .map(|t| CollarRow {
            t,
            dt_coefficient: cm.dt_coefficient(t),
            cross_section: cm.cross_section(t, x).iter().copied().collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoff::make_cutoff;
    use crate::fixtures::round_sphere_field;
    use crate::path::{sphere_radius_path, RadiusProfile};

    fn cutoff() -> Arc<CutoffFunction> {
        Arc::new(make_cutoff(0.125).unwrap())
    }

    fn psi() -> CollarCutoff {
        CollarCutoff::new(cutoff())
    }

    #[test]
    fn psi_bands() {
        let p = psi();
        assert_eq!(p.derivatives(-0.75), [0.0, 0.0, 0.0]);
        assert_eq!(p.derivatives(-0.25)[0], 1.0);
        assert_eq!(p.derivatives(0.5)[0], 1.0);
    }

    #[test]
    fn flow_basics() {
        let zero = collar_flow(0.0, &psi()).unwrap();
        assert_eq!(zero.map(-0.3), (-0.3, 1.0));
        let one = collar_flow(1.0, &psi()).unwrap();
        assert_eq!(one.phi(-0.9), -0.9);
        let two = collar_flow(2.0, &psi()).unwrap();
        assert!((two.phi(-0.2) - 1.8).abs() < 1e-12);
        assert!((two.phi(0.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn flow_derivative_matches_differences() {
        let f = collar_flow(2.0, &psi()).unwrap();
        for t in [-0.7, -0.6, -0.5, -0.4] {
            let h = 1e-4;
            let fd = (8.0 * (f.phi(t + h) - f.phi(t - h)) - (f.phi(t + 2.0 * h) - f.phi(t - 2.0 * h))) / (12.0 * h);
            assert!((f.map(t).1 - fd).abs() < 1e-8, "{t}: {} vs {fd}", f.map(t).1);
        }
    }

    #[test]
    fn product_collar_validates() {
        let h0 = round_sphere_field(2, 1.0).unwrap();
        let cm = CollaredMetric::product(&h0, "M");
        cm.validate(&GridSpec::uniform(2, 4), 20).unwrap();
        let rho = boundary_restrict(&cm).unwrap();
        assert_eq!(rho.value(&[1.0, 2.0]), h0.value(&[1.0, 2.0]));
    }

    #[test]
    fn boundary_mismatch_is_rejected() {
        let h0 = round_sphere_field(2, 1.5).unwrap();
        let cm = CollaredMetric::product(&h0, "M");
        let omega = sphere_radius_path(2, RadiusProfile::Linear { r0: 1.0, r1: 2.0 }).unwrap();
        let opts = StretchOptions::new(GridSpec::uniform(2, 4));
        assert!(matches!(
            glue_omega(&cm, &omega, &cutoff(), &opts),
            Err(Error::BoundaryMismatch { .. })
        ));
    }

    #[test]
    fn retract_reaches_endpoint() {
        let h0 = round_sphere_field(2, 1.0).unwrap();
        let cm = CollaredMetric::product(&h0, "M");
        let omega = sphere_radius_path(2, RadiusProfile::Linear { r0: 1.0, r1: 2.0 }).unwrap();
        let opts = StretchOptions::new(GridSpec::uniform(2, 4));
        let r = retract(&cm, &omega, &cutoff(), &psi(), &opts).unwrap();
        let x = [1.0, 0.5];
        assert!((r.cross_section(0.0, &x) - omega.value(1.0, &x)).amax() < 1e-12);
        assert_eq!(r.cross_section(-0.8, &x), cm.cross_section(-0.8, &x));
        assert_eq!(r.dt_coefficient(-0.8), 1.0);
        assert_eq!(r.interior, "M");
    }
}
