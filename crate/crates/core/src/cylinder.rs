//! The interpolated cylinder metric `g = α(F(t/τ))(x) + dt²` on
//! `X × [0, τ]` and the closed form of its scalar curvature.
//!
//! In a frame orthonormal for `α(u)`, `u = F(t/τ)`, with `a' = α'(u)` and
//! `a'' = α''(u)` written in that frame,
//!
//! ```text
//! κ = κ_X(α(u)) + (F'/τ)² (¼ Σ (a'_ij² − a'_ii a'_jj) + ½ Σ a'_ij²)
//!               − (1/τ²) Σ (F'' a'_ii + F'² a''_ii)
//! ```
//!
//! with `F', F''` evaluated at `t/τ`. The opposite sign of the last group is
//! kept available as [`MiddleSign::Plus`] so tests can show it is wrong.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::chart::Chart;
use crate::curvature::scalar_curvature;
use crate::cutoff::{CutoffFunction, Ramp};
use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::{DerivativeMode, FdSteps, Jet, MetricField, SymmetricField};
use crate::path::{MetricPath, PathDerivatives};

/// Sign in front of `Σ (F'' a'_ii + F'² a''_ii)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MiddleSign {
    Plus,
    Minus,
}

impl MiddleSign {
    /// The sign that agrees with the brute-force curvature pipeline.
    pub const RESOLVED: MiddleSign = MiddleSign::Minus;

    fn factor(self) -> f64 {
        match self {
            MiddleSign::Plus => 1.0,
            MiddleSign::Minus => -1.0,
        }
    }
}

struct CylinderSource {
    path: MetricPath,
    ramp: Ramp,
}

impl CylinderSource {
    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], f64) {
        let n = self.path.dim();
        (&x[..n], x[n])
    }

    fn embed(&self, block: &DMatrix<f64>, corner: f64) -> DMatrix<f64> {
        let n = self.path.dim();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(block);
        m[(n, n)] = corner;
        m
    }
}

impl SymmetricField for CylinderSource {
    fn inputs(&self) -> usize {
        self.path.dim() + 1
    }
    fn size(&self) -> usize {
        self.path.dim() + 1
    }
    fn value(&self, x: &[f64]) -> DMatrix<f64> {
        let (base, t) = self.split(x);
        self.embed(&self.path.value(self.ramp.value(t), base), 1.0)
    }
    fn jet(&self, x: &[f64]) -> Option<Jet> {
        let (base, t) = self.split(x);
        let [u, f1, f2] = self.ramp.derivatives(t);
        let path_jet = self.path.jet(u, base).ok()?;
        let n = self.path.dim();
        let mut jet = Jet::zeros(n + 1, n + 1);
        jet.value = self.embed(&path_jet.value, 1.0);
        for a in 0..n {
            jet.d1[a] = self.embed(&path_jet.d1[a + 1], 0.0);
            let mixed = self.embed(&(path_jet.d2(a + 1, 0) * f1), 0.0);
            *jet.d2_mut(a, n) = mixed.clone();
            *jet.d2_mut(n, a) = mixed;
            for b in 0..n {
                *jet.d2_mut(a, b) = self.embed(path_jet.d2(a + 1, b + 1), 0.0);
            }
        }
        jet.d1[n] = self.embed(&(&path_jet.d1[0] * f1), 0.0);
        let tt = path_jet.d2(0, 0) * (f1 * f1) + &path_jet.d1[0] * f2;
        *jet.d2_mut(n, n) = self.embed(&tt, 0.0);
        Some(jet)
    }
}

/// `α(c F(t/τ)) + dt²` with its chart `X × [0, τ]`.
#[derive(Debug, Clone)]
pub struct CylinderMetric {
    path: MetricPath,
    ramp: Ramp,
    field: MetricField,
}

impl CylinderMetric {
    /// Cylinder built from an arbitrary ramp `c F(t/τ)`.
    pub fn from_ramp(path: &MetricPath, ramp: Ramp) -> Result<Self> {
        let chart = path.chart().product(&Chart::boxed(vec![(0.0, ramp.tau())])?);
        let mode = match path.derivatives() {
            PathDerivatives::Analytic => DerivativeMode::Analytic,
            PathDerivatives::FiniteDifference(_) => DerivativeMode::FiniteDifference(FdSteps::default()),
        };
        let source = Arc::new(CylinderSource { path: path.clone(), ramp: ramp.clone() });
        let field = MetricField::new(chart, source, mode)?;
        Ok(Self { path: path.clone(), ramp, field })
    }

    pub fn path(&self) -> &MetricPath {
        &self.path
    }

    pub fn ramp(&self) -> &Ramp {
        &self.ramp
    }

    pub fn tau(&self) -> f64 {
        self.ramp.tau()
    }

    /// The metric as a field on the `(dim + 1)`-chart, `t` last.
    pub fn field(&self) -> &MetricField {
        &self.field
    }

    /// Cross-section `α(c F(t/τ))(x)`.
    pub fn cross_section(&self, t: f64, x: &[f64]) -> DMatrix<f64> {
        self.path.value(self.ramp.value(t), x)
    }
}

pub fn cylinder_metric(path: &MetricPath, cutoff: &Arc<CutoffFunction>, tau: f64) -> Result<CylinderMetric> {
    CylinderMetric::from_ramp(path, Ramp::new(cutoff.clone(), tau, 1.0)?)
}

/// Slice quantities entering the closed form at parameter `u` and point `x`,
/// with `α'`, `α''` written in the symmetric orthonormal frame of `α(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceTerms {
    pub kappa_x: f64,
    /// `¼ Σ (a'_ij² − a'_ii a'_jj) + ½ Σ a'_ij²`.
    pub quadratic: f64,
    /// `Σ a'_ii`.
    pub trace_d1: f64,
    /// `Σ a''_ii`.
    pub trace_d2: f64,
}

impl SliceTerms {
    /// Coefficient of `1/τ²` for the given (unscaled) `F'`, `F''`.
    pub fn stretch_coefficient(&self, f1: f64, f2: f64, sign: MiddleSign) -> f64 {
        f1 * f1 * self.quadratic + sign.factor() * (f2 * self.trace_d1 + f1 * f1 * self.trace_d2)
    }
}

pub fn slice_terms(path: &MetricPath, u: f64, x: &[f64]) -> Result<SliceTerms> {
    path.chart().check_regular(x)?;
    let (g, d1, d2) = crate::path::eval_path(path, u, x)?;
    let e = linalg::inverse_sqrt(&g).ok_or_else(|| Error::NonSpd {
        point: x.to_vec(),
        min_eigenvalue: linalg::min_eigenvalue(&g),
    })?;
    let a1 = linalg::congruence(&e, &d1);
    let a2 = linalg::congruence(&e, &d2);
    let n = g.nrows();
    let mut quadratic = 0.0;
    for i in 0..n {
        for j in 0..n {
            let off = a1[(i, j)] * a1[(i, j)];
            quadratic += 0.25 * (off - a1[(i, i)] * a1[(j, j)]) + 0.5 * off;
        }
    }
    let kappa_x = scalar_curvature(&path.slice(u)?, x)?;
    Ok(SliceTerms { kappa_x, quadratic, trace_d1: a1.trace(), trace_d2: a2.trace() })
}

/// Closed-form scalar curvature of `α(c F(t/τ)) + dt²` at `(x, t)`.
pub fn closed_form_with_ramp(path: &MetricPath, ramp: &Ramp, x: &[f64], t: f64, sign: MiddleSign) -> Result<f64> {
    let [u, f1, f2] = ramp.derivatives(t);
    let terms = slice_terms(path, u, x)?;
    Ok(terms.kappa_x + terms.stretch_coefficient(f1, f2, sign))
}

/// Closed-form `κ` of `α(F(t/t0)) + dt²` at `(x, τ0)`.
pub fn cylinder_scalar_closed_form(
    path: &MetricPath,
    cutoff: &Arc<CutoffFunction>,
    t0: f64,
    x: &[f64],
    tau0: f64,
) -> Result<f64> {
    closed_form_with_sign(path, cutoff, t0, x, tau0, MiddleSign::RESOLVED)
}

pub fn closed_form_with_sign(
    path: &MetricPath,
    cutoff: &Arc<CutoffFunction>,
    t0: f64,
    x: &[f64],
    tau0: f64,
    sign: MiddleSign,
) -> Result<f64> {
    closed_form_with_ramp(path, &Ramp::new(cutoff.clone(), t0, 1.0)?, x, tau0, sign)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoff::make_cutoff;
    use crate::fixtures::round_sphere_field;
    use crate::path::{constant_path, sphere_radius_path, RadiusProfile};

    fn cutoff() -> Arc<CutoffFunction> {
        Arc::new(make_cutoff(0.125).unwrap())
    }

    #[test]
    fn constant_path_gives_product() {
        let g = round_sphere_field(2, 1.0).unwrap();
        let path = constant_path(&g).unwrap();
        let cyl = cylinder_metric(&path, &cutoff(), 3.0).unwrap();
        let x = [0.8, 1.0, 1.7];
        let v = cyl.field().value(&x);
        let mut expect = DMatrix::zeros(3, 3);
        expect.view_mut((0, 0), (2, 2)).copy_from(&g.value(&x[..2]));
        expect[(2, 2)] = 1.0;
        assert_eq!(v, expect);
        let k = cylinder_scalar_closed_form(&path, &cutoff(), 3.0, &x[..2], 1.7).unwrap();
        assert!((k - 2.0).abs() < 1e-12);
        let oracle = scalar_curvature(cyl.field(), &x).unwrap();
        assert!((oracle - 2.0).abs() < 1e-12);
    }

    #[test]
    fn initial_band_is_alpha_zero() {
        let path = sphere_radius_path(2, RadiusProfile::Linear { r0: 1.0, r1: 2.0 }).unwrap();
        let cyl = cylinder_metric(&path, &cutoff(), 2.0).unwrap();
        let x = [1.0, 0.5];
        assert_eq!(cyl.cross_section(0.2, &x), path.value(0.0, &x));
        assert_eq!(cyl.cross_section(1.9, &x), path.value(1.0, &x));
        assert!((&cyl.cross_section(1.0, &x) - path.value(0.5, &x)).amax() < 1e-14);
        let k = cylinder_scalar_closed_form(&path, &cutoff(), 2.0, &x, 0.1).unwrap();
        assert!((k - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_tau() {
        let path = sphere_radius_path(2, RadiusProfile::Linear { r0: 1.0, r1: 2.0 }).unwrap();
        assert!(matches!(cylinder_metric(&path, &cutoff(), 0.0), Err(Error::NonpositiveTau(_))));
    }

    #[test]
    fn cylinder_jet_matches_differences() {
        let path = sphere_radius_path(2, RadiusProfile::Oscillating { amplitude: 0.5, frequency: 1.0 }).unwrap();
        let cyl = cylinder_metric(&path, &cutoff(), 1.5).unwrap();
        let x = [1.1, 0.4, 0.6];
        let jet = cyl.field().jet(&x).unwrap();
        let fd = crate::metric::finite_difference_jet(cyl.field().source().as_ref(), &x, FdSteps { first: 1e-5, second: 1e-4, ..Default::default() }, None);
        for a in 0..3 {
            assert!((&jet.d1[a] - &fd.d1[a]).amax() < 1e-7, "d1 {a}");
            for b in 0..3 {
                assert!((jet.d2(a, b) - fd.d2(a, b)).amax() < 1e-4, "d2 {a}{b}");
            }
        }
    }

    #[test]
    fn round_sphere_scaling_closed_form() {
        // α(u) = ρ(u) g_round on S²: in the frame a' = (ρ'/ρ) I, a'' = (ρ''/ρ) I,
        // so κ = 2/ρ + (F'²(q²/2 − 2ρ''/ρ) − 2F''q)/τ² with q = ρ'/ρ.
        let f = cutoff();
        let path = sphere_radius_path(2, RadiusProfile::Linear { r0: 1.0, r1: 2.0 }).unwrap();
        let t0 = 2.0;
        for &s in &[0.2, 0.35, 0.5, 0.7] {
            let [u, f1, f2] = f.derivatives(s);
            let r = 1.0 + u;
            let (rho, rho1, rho2) = (r * r, 2.0 * r, 2.0);
            let q = rho1 / rho;
            let expect = 2.0 / rho + (f1 * f1 * (0.5 * q * q - 2.0 * rho2 / rho) - 2.0 * f2 * q) / (t0 * t0);
            let got = cylinder_scalar_closed_form(&path, &f, t0, &[1.2, 0.3], s * t0).unwrap();
            assert!((got - expect).abs() < 1e-10, "{s}: {got} vs {expect}");
        }
    }
}
