//! One-parameter families `α(u)` of metrics on a fixed chart, `u ∈ [0, 1]`.
//!
//! A path is stored as a [`SymmetricField`] with one extra leading input:
//! `source.value(&[u, x…]) = α(u)(x)`. Mixed `(u, x)` derivatives come for
//! free from the same jet, which the cylinder metric needs for its chain
//! rule.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{Chart, GridSpec};
use crate::curvature::scalar_curvature;
use crate::error::{Error, Result};
use crate::fixtures::{ellipsoid_components, Components, Real, RoundSphere};
use crate::metric::{DerivativeMode, FdSteps, Jet, MetricField, SymmetricField};

pub const DEFAULT_PSC_MARGIN: f64 = 1e-6;
pub const DEFAULT_U_STEP: f64 = 1e-4;

/// How `α'` and `α''` are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PathDerivatives {
    Analytic,
    /// Central differences in `u` with the given step.
    FiniteDifference(f64),
}

/// Outcome of [`MetricPath::certify_psc`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PscCertificate {
    pub min_kappa: f64,
    pub argmin_u: f64,
    pub argmin_x: Vec<f64>,
    pub margin: f64,
    pub u_samples: usize,
    pub passed: bool,
}

#[derive(Clone)]
pub struct MetricPath {
    name: String,
    chart: Chart,
    source: Arc<dyn SymmetricField>,
    derivatives: PathDerivatives,
    psc: Option<PscCertificate>,
}

impl fmt::Debug for MetricPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricPath")
            .field("name", &self.name)
            .field("chart", &self.chart)
            .field("derivatives", &self.derivatives)
            .field("psc", &self.psc)
            .finish_non_exhaustive()
    }
}

fn check_u(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::OutOfRangeU(u))
    }
}

impl MetricPath {
    pub fn new(name: impl Into<String>, chart: Chart, source: Arc<dyn SymmetricField>) -> Result<Self> {
        if source.inputs() != chart.dim() + 1 || source.size() != chart.dim() {
            return Err(Error::ChartMismatch(format!(
                "path of size {} on {} inputs does not fit a {}-chart",
                source.size(),
                source.inputs(),
                chart.dim()
            )));
        }
        Ok(Self { name: name.into(), chart, source, derivatives: PathDerivatives::Analytic, psc: None })
    }

    pub fn with_derivatives(mut self, derivatives: PathDerivatives) -> Self {
        self.derivatives = derivatives;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn source(&self) -> &Arc<dyn SymmetricField> {
        &self.source
    }

    pub fn derivatives(&self) -> PathDerivatives {
        self.derivatives
    }

    pub fn psc_certificate(&self) -> Option<&PscCertificate> {
        self.psc.as_ref()
    }

    pub fn value(&self, u: f64, x: &[f64]) -> DMatrix<f64> {
        self.source.value(&stack(u, x))
    }

    /// Jet in `(u, x)`, slot 0 being `u`.
    pub fn jet(&self, u: f64, x: &[f64]) -> Result<Jet> {
        match self.derivatives {
            PathDerivatives::Analytic => self.source.jet(&stack(u, x)).ok_or(Error::MissingAnalyticJet),
            PathDerivatives::FiniteDifference(h) => {
                let steps = FdSteps::uniform(h);
                Ok(crate::metric::finite_difference_jet(self.source.as_ref(), &stack(u, x), steps, None))
            }
        }
    }

    /// The metric `α(u)` as a field on the base chart.
    pub fn slice(&self, u: f64) -> Result<MetricField> {
        check_u(u)?;
        let mode = match self.derivatives {
            PathDerivatives::Analytic => DerivativeMode::Analytic,
            PathDerivatives::FiniteDifference(_) => DerivativeMode::FiniteDifference(FdSteps::default()),
        };
        MetricField::new(self.chart.clone(), Arc::new(Slice { inner: self.source.clone(), u }), mode)
    }

    /// Checks `min κ(α(u)) ≥ margin` over `u_samples` equally spaced values
    /// of `u` (endpoints included) times the grid, and records the result.
    pub fn certify_psc(mut self, grid: &GridSpec, u_samples: usize, margin: f64) -> Result<Self> {
        let cert = psc_certificate(&self, grid, u_samples, margin)?;
        self.psc = Some(cert);
        Ok(self)
    }
}

fn stack(u: f64, x: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(x.len() + 1);
    p.push(u);
    p.extend_from_slice(x);
    p
}

pub fn psc_certificate(path: &MetricPath, grid: &GridSpec, u_samples: usize, margin: f64) -> Result<PscCertificate> {
    let points = grid.samples(path.chart())?;
    let us: Vec<f64> = match u_samples {
        0 | 1 => vec![0.0],
        n => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    };
    let (min_kappa, argmin_u, argmin_x) = us
        .par_iter()
        .map(|&u| -> Result<(f64, f64, Vec<f64>)> {
            let slice = path.slice(u)?;
            let mut best = (f64::INFINITY, u, Vec::new());
            for p in &points {
                let k = scalar_curvature(&slice, p)?;
                if k < best.0 {
                    best = (k, u, p.clone());
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((f64::INFINITY, 0.0, Vec::new()), |a, b| if b.0 < a.0 { b } else { a });
    Ok(PscCertificate {
        min_kappa,
        argmin_u,
        argmin_x,
        margin,
        u_samples: us.len(),
        passed: min_kappa >= margin,
    })
}

/// `(α(u), α'(u), α''(u))` at a point of the base chart.
pub fn eval_path(path: &MetricPath, u: f64, point: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    check_u(u)?;
    if point.len() != path.dim() {
        return Err(Error::ChartMismatch(format!(
            "point has {} coordinates, chart has {}",
            point.len(),
            path.dim()
        )));
    }
    let jet = path.jet(u, point)?;
    let d2 = jet.d2(0, 0).clone();
    Ok((jet.value, jet.d1[0].clone(), d2))
}

/// `α(u) = (1 − u) g0 + u g1`.
pub fn linear_path(g0: &MetricField, g1: &MetricField) -> Result<MetricPath> {
    if g0.chart() != g1.chart() {
        return Err(Error::ChartMismatch("linear path endpoints live on different charts".into()));
    }
    let path = MetricPath::new(
        "linear",
        g0.chart().clone(),
        Arc::new(Linear { g0: g0.source().clone(), g1: g1.source().clone() }),
    )?;
    Ok(match (g0.mode(), g1.mode()) {
        (DerivativeMode::Analytic, DerivativeMode::Analytic) => path,
        _ => path.with_derivatives(PathDerivatives::FiniteDifference(DEFAULT_U_STEP)),
    })
}

/// `α(u) ≡ g0`.
pub fn constant_path(g0: &MetricField) -> Result<MetricPath> {
    let path = MetricPath::new("constant", g0.chart().clone(), Arc::new(Constant { g0: g0.source().clone() }))?;
    Ok(match g0.mode() {
        DerivativeMode::Analytic => path,
        _ => path.with_derivatives(PathDerivatives::FiniteDifference(DEFAULT_U_STEP)),
    })
}

/// `ω_u(τ) = ω((1 − u) τ + u)`.
pub fn reparameterize_path(omega: &MetricPath, u: f64) -> Result<MetricPath> {
    check_u(u)?;
    Ok(MetricPath {
        name: format!("{}∘reparam({u})", omega.name),
        chart: omega.chart.clone(),
        source: Arc::new(Reparam { inner: omega.source.clone(), u }),
        derivatives: omega.derivatives,
        psc: omega.psc.clone(),
    })
}

/// Radius profiles `r(u)` for paths `α(u) = r(u)² g`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RadiusProfile {
    /// `r(u) = r0 + (r1 − r0) u`.
    Linear { r0: f64, r1: f64 },
    /// `r(u) = 1 + A sin(2π n u)`.
    Oscillating { amplitude: f64, frequency: f64 },
}

impl RadiusProfile {
    /// `r`, `r'`, `r''`.
    pub fn eval(&self, u: f64) -> [f64; 3] {
        match *self {
            RadiusProfile::Linear { r0, r1 } => [r0 + (r1 - r0) * u, r1 - r0, 0.0],
            RadiusProfile::Oscillating { amplitude, frequency } => {
                let w = TAU * frequency;
                let (s, c) = (w * u).sin_cos();
                [1.0 + amplitude * s, amplitude * w * c, -amplitude * w * w * s]
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        let ok = match *self {
            RadiusProfile::Linear { r0, r1 } => r0 > 0.0 && r1 > 0.0,
            RadiusProfile::Oscillating { amplitude, frequency } => amplitude.abs() < 1.0 && frequency.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("radius profile {self:?} vanishes somewhere on [0, 1]")))
        }
    }
}

/// Largest component-wise difference between two paths over the grid and
/// `u_samples + 1` equally spaced parameters.
pub fn path_distance(a: &MetricPath, b: &MetricPath, grid: &GridSpec, u_samples: usize) -> Result<f64> {
    if a.chart() != b.chart() {
        return Err(Error::ChartMismatch("paths live on different charts".into()));
    }
    let points = grid.samples(a.chart())?;
    let n = u_samples.max(1);
    let mut gap: f64 = 0.0;
    for i in 0..=n {
        let u = i as f64 / n as f64;
        for x in &points {
            gap = gap.max((a.value(u, x) - b.value(u, x)).amax());
        }
    }
    Ok(gap)
}

/// `α(u) = r(u)² g` for a fixed field `g`.
pub struct RadiusPath {
    pub profile: RadiusProfile,
    pub base: Arc<dyn SymmetricField>,
}

impl RadiusPath {
    fn factor(&self, u: f64) -> [f64; 3] {
        let [r, r1, r2] = self.profile.eval(u);
        [r * r, 2.0 * r * r1, 2.0 * (r1 * r1 + r * r2)]
    }
}

impl SymmetricField for RadiusPath {
    fn inputs(&self) -> usize {
        self.base.inputs() + 1
    }
    fn size(&self) -> usize {
        self.base.size()
    }
    fn value(&self, x: &[f64]) -> DMatrix<f64> {
        self.base.value(&x[1..]) * self.factor(x[0])[0]
    }
    fn jet(&self, x: &[f64]) -> Option<Jet> {
        let [p, p1, p2] = self.factor(x[0]);
        let base = self.base.jet(&x[1..])?;
        let n = base.inputs();
        let mut jet = Jet::zeros(n + 1, self.size());
        jet.value = &base.value * p;
        jet.d1[0] = &base.value * p1;
        *jet.d2_mut(0, 0) = &base.value * p2;
        for a in 0..n {
            jet.d1[a + 1] = &base.d1[a] * p;
            *jet.d2_mut(0, a + 1) = &base.d1[a] * p1;
            *jet.d2_mut(a + 1, 0) = &base.d1[a] * p1;
            for b in 0..n {
                *jet.d2_mut(a + 1, b + 1) = base.d2(a, b) * p;
            }
        }
        Some(jet)
    }
}

/// Round `S^n` with radius `r(u)` on the default polar chart.
pub fn sphere_radius_path(n: usize, profile: RadiusProfile) -> Result<MetricPath> {
    profile.check()?;
    let name = match profile {
        RadiusProfile::Linear { .. } => "sphere-radius",
        RadiusProfile::Oscillating { .. } => "oscillating-radius",
    };
    MetricPath::new(
        name,
        Chart::sphere(n, Chart::default_pole_margin())?,
        Arc::new(RadiusPath { profile, base: Arc::new(RoundSphere::new(n, 1.0)) }),
    )
}

/// Ellipsoids with semi-axes `a`, `b` and `c(u) = c0 + (c1 − c0) u`.
#[derive(Debug, Clone, Copy)]
pub struct EllipsoidFamily {
    pub a: f64,
    pub b: f64,
    pub c0: f64,
    pub c1: f64,
}

impl Components for EllipsoidFamily {
    fn inputs(&self) -> usize {
        3
    }
    fn size(&self) -> usize {
        2
    }
    fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        let c = x[0].clone() * (self.c1 - self.c0) + self.c0;
        ellipsoid_components(T::from(self.a), T::from(self.b), c, &x[1], &x[2])
    }
}

pub fn ellipsoid_family_path(a: f64, b: f64, c0: f64, c1: f64) -> Result<MetricPath> {
    if !(a > 0.0 && b > 0.0 && c0 > 0.0 && c1 > 0.0) {
        return Err(Error::InvalidArgument("ellipsoid semi-axes must be positive".into()));
    }
    MetricPath::new(
        "ellipsoid-family",
        Chart::sphere(2, Chart::default_pole_margin())?,
        Arc::new(crate::fixtures::Analytic(EllipsoidFamily { a, b, c0, c1 })),
    )
}

struct Constant {
    g0: Arc<dyn SymmetricField>,
}

impl SymmetricField for Constant {
    fn inputs(&self) -> usize {
        self.g0.inputs() + 1
    }
    fn size(&self) -> usize {
        self.g0.size()
    }
    fn value(&self, x: &[f64]) -> DMatrix<f64> {
        self.g0.value(&x[1..])
    }
    fn jet(&self, x: &[f64]) -> Option<Jet> {
        Some(prepend_parameter(&self.g0.jet(&x[1..])?, None, None, None))
    }
}

/// Embeds an `x`-jet into a `(u, x)`-jet given the `u`, `uu` and `u x_a`
/// derivatives (zero when `None`).
fn prepend_parameter(
    base: &Jet,
    du: Option<DMatrix<f64>>,
    duu: Option<DMatrix<f64>>,
    dux: Option<&[DMatrix<f64>]>,
) -> Jet {
    let n = base.inputs();
    let mut jet = Jet::zeros(n + 1, base.value.nrows());
    jet.value = base.value.clone();
    if let Some(du) = du {
        jet.d1[0] = du;
    }
    if let Some(duu) = duu {
        *jet.d2_mut(0, 0) = duu;
    }
    for a in 0..n {
        jet.d1[a + 1] = base.d1[a].clone();
        if let Some(dux) = dux {
            *jet.d2_mut(0, a + 1) = dux[a].clone();
            *jet.d2_mut(a + 1, 0) = dux[a].clone();
        }
        for b in 0..n {
            *jet.d2_mut(a + 1, b + 1) = base.d2(a, b).clone();
        }
    }
    jet
}

struct Linear {
    g0: Arc<dyn SymmetricField>,
    g1: Arc<dyn SymmetricField>,
}

impl SymmetricField for Linear {
    fn inputs(&self) -> usize {
        self.g0.inputs() + 1
    }
    fn size(&self) -> usize {
        self.g0.size()
    }
    fn value(&self, x: &[f64]) -> DMatrix<f64> {
        let u = x[0];
        self.g0.value(&x[1..]) * (1.0 - u) + self.g1.value(&x[1..]) * u
    }
    fn jet(&self, x: &[f64]) -> Option<Jet> {
        let u = x[0];
        let a = self.g0.jet(&x[1..])?;
        let b = self.g1.jet(&x[1..])?;
        let mix = Jet {
            value: &a.value * (1.0 - u) + &b.value * u,
            d1: a.d1.iter().zip(&b.d1).map(|(p, q)| p * (1.0 - u) + q * u).collect(),
            d2: a.d2.iter().zip(&b.d2).map(|(p, q)| p * (1.0 - u) + q * u).collect(),
        };
        let dux: Vec<DMatrix<f64>> = a.d1.iter().zip(&b.d1).map(|(p, q)| q - p).collect();
        Some(prepend_parameter(&mix, Some(&b.value - &a.value), None, Some(&dux)))
    }
}

struct Reparam {
    inner: Arc<dyn SymmetricField>,
    u: f64,
}

impl Reparam {
    fn map(&self, tau: f64) -> f64 {
        // keeps ω_u(1) = ω(1) bit-exact
        if tau == 1.0 {
            1.0
        } else {
            (1.0 - self.u) * tau + self.u
        }
    }
}

impl SymmetricField for Reparam {
    fn inputs(&self) -> usize {
        self.inner.inputs()
    }
    fn size(&self) -> usize {
        self.inner.size()
    }
    fn value(&self, x: &[f64]) -> DMatrix<f64> {
        let mut p = x.to_vec();
        p[0] = self.map(x[0]);
        self.inner.value(&p)
    }
    fn jet(&self, x: &[f64]) -> Option<Jet> {
        let mut p = x.to_vec();
        p[0] = self.map(x[0]);
        let mut jet = self.inner.jet(&p)?;
        let s = 1.0 - self.u;
        let n = jet.inputs();
        jet.d1[0] *= s;
        for a in 0..n {
            let f = if a == 0 { s * s } else { s };
            *jet.d2_mut(0, a) *= f;
            if a != 0 {
                *jet.d2_mut(a, 0) *= s;
            }
        }
        Some(jet)
    }
}

struct Slice {
    inner: Arc<dyn SymmetricField>,
    u: f64,
}

impl SymmetricField for Slice {
    fn inputs(&self) -> usize {
        self.inner.inputs() - 1
    }
    fn size(&self) -> usize {
        self.inner.size()
    }
    fn value(&self, x: &[f64]) -> DMatrix<f64> {
        self.inner.value(&stack(self.u, x))
    }
    fn jet(&self, x: &[f64]) -> Option<Jet> {
        let full = self.inner.jet(&stack(self.u, x))?;
        let n = self.inputs();
        let mut jet = Jet::zeros(n, self.size());
        jet.value = full.value.clone();
        for a in 0..n {
            jet.d1[a] = full.d1[a + 1].clone();
            for b in 0..n {
                *jet.d2_mut(a, b) = full.d2(a + 1, b + 1).clone();
            }
        }
        Some(jet)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{flat_torus_field, round_sphere_field, scaled_field};
    use crate::linalg;

    fn gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn constant_path_has_no_motion() {
        let g = round_sphere_field(2, 1.0).unwrap();
        let p = constant_path(&g).unwrap();
        let x = [0.7, 1.2];
        let (v, d1, d2) = eval_path(&p, 0.3, &x).unwrap();
        assert_eq!(v, g.value(&x));
        assert_eq!(d1.amax(), 0.0);
        assert_eq!(d2.amax(), 0.0);
    }

    #[test]
    fn sphere_scaling_derivatives() {
        let p = sphere_radius_path(2, RadiusProfile::Linear { r0: 1.0, r1: 2.0 }).unwrap();
        let x = [0.9, 0.4];
        let round = round_sphere_field(2, 1.0).unwrap().value(&x);
        let u: f64 = 0.35;
        let (v, d1, d2) = eval_path(&p, u, &x).unwrap();
        assert!(gap(&v, &(&round * (1.0 + u).powi(2))) < 1e-14);
        assert!(gap(&d1, &(&round * (2.0 * (1.0 + u)))) < 1e-14);
        assert!(gap(&d2, &(&round * 2.0)) < 1e-14);
    }

    #[test]
    fn linear_path_arithmetic() {
        let g0 = flat_torus_field(2).unwrap();
        let g1 = scaled_field(4.0, &g0).unwrap();
        let p = linear_path(&g0, &g1).unwrap();
        let (v, d1, d2) = eval_path(&p, 0.5, &[1.0, 2.0]).unwrap();
        assert_eq!(v, DMatrix::identity(2, 2) * 2.5);
        assert_eq!(d1, DMatrix::identity(2, 2) * 3.0);
        assert_eq!(d2.amax(), 0.0);
    }

    #[test]
    fn linear_sphere_path_certifies_at_larger_radius() {
        let g0 = round_sphere_field(2, 1.0).unwrap();
        let g1 = round_sphere_field(2, 2.0).unwrap();
        let p = linear_path(&g0, &g1).unwrap().certify_psc(&GridSpec::uniform(2, 6), 11, DEFAULT_PSC_MARGIN).unwrap();
        let cert = p.psc_certificate().unwrap();
        assert!(cert.passed);
        assert!((cert.min_kappa - 0.5).abs() < 1e-9, "{}", cert.min_kappa);
        assert_eq!(cert.argmin_u, 1.0);
    }

    #[test]
    fn out_of_range_u() {
        let p = sphere_radius_path(2, RadiusProfile::Linear { r0: 1.0, r1: 2.0 }).unwrap();
        assert_eq!(eval_path(&p, 1.5, &[1.0, 1.0]).unwrap_err(), Error::OutOfRangeU(1.5));
        assert!(reparameterize_path(&p, -0.1).is_err());
    }

    #[test]
    fn reparameterization_endpoints() {
        let p = sphere_radius_path(2, RadiusProfile::Oscillating { amplitude: 0.5, frequency: 1.0 }).unwrap();
        let x = [1.1, 0.3];
        let same = reparameterize_path(&p, 0.0).unwrap();
        for tau in [0.0, 0.3, 1.0] {
            let (a, a1, a2) = eval_path(&p, tau, &x).unwrap();
            let (b, b1, b2) = eval_path(&same, tau, &x).unwrap();
            assert_eq!((a, a1, a2), (b, b1, b2));
        }
        let frozen = reparameterize_path(&p, 1.0).unwrap();
        let (end, _, _) = eval_path(&p, 1.0, &x).unwrap();
        for tau in [0.0, 0.5, 1.0] {
            let (v, d1, d2) = eval_path(&frozen, tau, &x).unwrap();
            assert!(gap(&v, &end) < 1e-15);
            assert_eq!(d1.amax(), 0.0);
            assert_eq!(d2.amax(), 0.0);
        }
        let half = reparameterize_path(&p, 0.5).unwrap();
        assert_eq!(eval_path(&half, 0.0, &x).unwrap().0, eval_path(&p, 0.5, &x).unwrap().0);
    }

    #[test]
    fn reparameterized_chain_rule_matches_differences() {
        let p = ellipsoid_family_path(1.0, 1.5, 1.0, 3.0).unwrap();
        let x = [0.8, 2.0];
        let u = 0.3;
        let q = reparameterize_path(&p, u).unwrap();
        let h = 1e-4;
        let tau = 0.4;
        let (v, d1, d2) = eval_path(&q, tau, &x).unwrap();
        let (vp, _, _) = eval_path(&q, tau + h, &x).unwrap();
        let (vm, _, _) = eval_path(&q, tau - h, &x).unwrap();
        assert!(gap(&d1, &((&vp - &vm) / (2.0 * h))) < 1e-7);
        assert!(gap(&d2, &((&vp - &v * 2.0 + &vm) / (h * h))) < 1e-5);
        let (_, p1, p2) = eval_path(&p, (1.0 - u) * tau + u, &x).unwrap();
        assert!(gap(&d1, &(p1 * (1.0 - u))) < 1e-14);
        assert!(gap(&d2, &(p2 * (1.0 - u) * (1.0 - u))) < 1e-14);
    }

    #[test]
    fn finite_difference_mode_agrees() {
        let p = ellipsoid_family_path(1.0, 1.0, 1.0, 3.0).unwrap();
        let q = p.clone().with_derivatives(PathDerivatives::FiniteDifference(1e-3));
        let x = [1.0, 0.5];
        let (_, a1, a2) = eval_path(&p, 0.5, &x).unwrap();
        let (_, b1, b2) = eval_path(&q, 0.5, &x).unwrap();
        assert!(gap(&a1, &b1) < 1e-6);
        assert!(gap(&a2, &b2) < 1e-5);
    }

    #[test]
    fn slice_is_a_metric() {
        let p = ellipsoid_family_path(1.0, 1.0, 1.0, 3.0).unwrap();
        let s = p.slice(1.0).unwrap();
        let e = crate::fixtures::ellipsoid_field(1.0, 1.0, 3.0).unwrap();
        let x = [1.3, 0.2];
        assert!(gap(&s.value(&x), &e.value(&x)) < 1e-15);
        let (a, b) = (s.jet(&x).unwrap(), e.jet(&x).unwrap());
        assert!(gap(a.d2(0, 1), b.d2(0, 1)) < 1e-13);
        assert!(linalg::min_eigenvalue(&s.value(&x)) > 0.0);
    }

    #[test]
    fn oscillating_profile_derivatives() {
        let prof = RadiusProfile::Oscillating { amplitude: 0.9, frequency: 1.0 };
        let h = 1e-5;
        for u in [0.0, 0.2, 0.7] {
            let [_, r1, r2] = prof.eval(u);
            let fd1 = (prof.eval(u + h)[0] - prof.eval(u - h)[0]) / (2.0 * h);
            let fd2 = (prof.eval(u + h)[1] - prof.eval(u - h)[1]) / (2.0 * h);
            assert!((r1 - fd1).abs() < 1e-6);
            assert!((r2 - fd2).abs() < 1e-5);
        }
        assert!(RadiusProfile::Oscillating { amplitude: 1.0, frequency: 1.0 }.check().is_err());
    }
}
