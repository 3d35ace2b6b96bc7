//! Built-in metric families.
//!
//! Closed-form families implement [`Components`] once, generically over the
//! scalar type; [`Analytic`] evaluates them with `f64` for values and with
//! second-order dual numbers for exact jets. Structural combinators
//! (products, scalings) assemble jets from the jets of their parts.

use std::sync::Arc;

use nalgebra::{DMatrix, Dyn, U1};
use num_dual::{Dual2DVec64, DualNum, DualStruct};

use crate::chart::Chart;
use crate::error::Result;
use crate::linalg;
use crate::metric::{DerivativeMode, Jet, MetricField, SymmetricField};

/// Scalars the closed-form families are written against.
pub trait Real: DualNum<Primitive = f64> + Clone + From<f64> {
    /// Composes with a scalar function given its value and first two
    /// derivatives at `self.value()`.
    fn lift(&self, f0: f64, f1: f64, f2: f64) -> Self;
    fn value(&self) -> f64;
}

impl Real for f64 {
    fn lift(&self, f0: f64, _: f64, _: f64) -> Self {
        f0
    }
    fn value(&self) -> f64 {
        *self
    }
}

impl Real for Dual2DVec64 {
    fn lift(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let v1 = self.v1.0.as_ref().map(|g| g * f1);
        let v2 = match (&self.v1.0, &self.v2.0) {
            (Some(g), Some(h)) => Some(h * f1 + g.transpose() * g * f2),
            (Some(g), None) => Some(g.transpose() * g * f2),
            (None, h) => h.as_ref().map(|h| h * f1),
        };
        Dual2DVec64::new(f0, num_dual::Derivative::new(v1), num_dual::Derivative::new(v2))
    }
    fn value(&self) -> f64 {
        self.re()
    }
}

/// A closed-form symmetric matrix field. `eval` returns the full matrix in
/// row-major order.
pub trait Components: Send + Sync {
    fn inputs(&self) -> usize;
    fn size(&self) -> usize;
    fn eval<T: Real>(&self, x: &[T]) -> Vec<T>;
}

/// [`SymmetricField`] adapter computing exact jets of [`Components`].
#[derive(Debug, Clone)]
pub struct Analytic<C>(pub C);

impl<C: Components> SymmetricField for Analytic<C> {
    fn inputs(&self) -> usize {
        self.0.inputs()
    }

    fn size(&self) -> usize {
        self.0.size()
    }

    fn value(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.0.size();
        DMatrix::from_row_slice(n, n, &self.0.eval(x))
    }

    fn jet(&self, x: &[f64]) -> Option<Jet> {
        let inputs = self.0.inputs();
        let size = self.0.size();
        let vars: Vec<Dual2DVec64> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| Dual2DVec64::from_re(xi).derivative(inputs, i))
            .collect();
        let entries = self.0.eval(&vars);
        let mut jet = Jet::zeros(inputs, size);
        for r in 0..size {
            for c in 0..size {
                let e = &entries[r * size + c];
                jet.value[(r, c)] = e.re;
                if let Some(g) = &e.v1.0 {
                    let g = g.clone().reshape_generic(U1, Dyn(inputs));
                    for a in 0..inputs {
                        jet.d1[a][(r, c)] = g[a];
                    }
                }
                if let Some(h) = &e.v2.0 {
                    for a in 0..inputs {
                        for b in 0..inputs {
                            jet.d2[a * inputs + b][(r, c)] = h[(a, b)];
                        }
                    }
                }
            }
        }
        Some(jet)
    }
}

fn diagonal<T: Real>(entries: Vec<T>) -> Vec<T> {
    let n = entries.len();
    let mut out = vec![T::from(0.0); n * n];
    for (i, e) in entries.into_iter().enumerate() {
        out[i * n + i] = e;
    }
    out
}

/// Euclidean metric `δ_ij`.
#[derive(Debug, Clone, Copy)]
pub struct FlatMetric {
    dim: usize,
}

impl FlatMetric {
    pub fn new(dim: usize) -> Analytic<Self> {
        Analytic(Self { dim })
    }
}

impl Components for FlatMetric {
    fn inputs(&self) -> usize {
        self.dim
    }
    fn size(&self) -> usize {
        self.dim
    }
    fn eval<T: Real>(&self, _: &[T]) -> Vec<T> {
        diagonal(vec![T::from(1.0); self.dim])
    }
}

/// Round metric of radius `r` on `S^n` in hyperspherical angles:
/// `g_kk = r² ∏_{j<k} sin²(x_j)`.
#[derive(Debug, Clone, Copy)]
pub struct RoundSphere {
    pub n: usize,
    pub radius: f64,
}

impl RoundSphere {
    pub fn new(n: usize, radius: f64) -> Analytic<Self> {
        Analytic(Self { n, radius })
    }
}

/// Unit round sphere components, shared with the warped and path families.
pub(crate) fn unit_sphere_diagonal<T: Real>(x: &[T]) -> Vec<T> {
    let mut acc = T::from(1.0);
    let mut out = Vec::with_capacity(x.len());
    for (k, xk) in x.iter().enumerate() {
        out.push(acc.clone());
        if k + 1 < x.len() {
            acc *= xk.sin().powi(2);
        }
    }
    out
}

impl Components for RoundSphere {
    fn inputs(&self) -> usize {
        self.n
    }
    fn size(&self) -> usize {
        self.n
    }
    fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        let r2 = self.radius * self.radius;
        diagonal(unit_sphere_diagonal(x).into_iter().map(|e| e * r2).collect())
    }
}

/// Induced metric of the ellipsoid `(a sinθ cosφ, b sinθ sinφ, c cosθ)`.
#[derive(Debug, Clone, Copy)]
pub struct Ellipsoid {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Ellipsoid {
    pub fn new(a: f64, b: f64, c: f64) -> Analytic<Self> {
        Analytic(Self { a, b, c })
    }

    /// Gauss curvature `1 / (a²b²c² (x²/a⁴ + y²/b⁴ + z²/c⁴)²)` at `(θ, φ)`.
    pub fn gauss_curvature(&self, theta: f64, phi: f64) -> f64 {
        let (a, b, c) = (self.a, self.b, self.c);
        let x = a * theta.sin() * phi.cos();
        let y = b * theta.sin() * phi.sin();
        let z = c * theta.cos();
        let s = x * x / a.powi(4) + y * y / b.powi(4) + z * z / c.powi(4);
        1.0 / (a * a * b * b * c * c * s * s)
    }
}

/// Ellipsoid induced-metric components with (possibly dual) semi-axes.
pub(crate) fn ellipsoid_components<T: Real>(a: T, b: T, c: T, theta: &T, phi: &T) -> Vec<T> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    let a2 = a.clone() * a;
    let b2 = b.clone() * b;
    let c2 = c.clone() * c;
    let g_tt = (a2.clone() * cp.clone() * cp.clone() + b2.clone() * sp.clone() * sp.clone())
        * ct.clone()
        * ct.clone()
        + c2 * st.clone() * st.clone();
    let g_tp = (b2.clone() - a2.clone()) * st.clone() * ct * sp.clone() * cp.clone();
    let g_pp = st.clone() * st * (a2 * sp.clone() * sp + b2 * cp.clone() * cp);
    vec![g_tt, g_tp.clone(), g_tp, g_pp]
}

impl Components for Ellipsoid {
    fn inputs(&self) -> usize {
        2
    }
    fn size(&self) -> usize {
        2
    }
    fn eval<T: Real>(&self, x: &[T]) -> Vec<T> {
        ellipsoid_components(T::from(self.a), T::from(self.b), T::from(self.c), &x[0], &x[1])
    }
}

/// Diagonal metric from a closure over dual numbers; values are taken from
/// the real part. Meant for ad-hoc fixtures.
pub struct DiagonalFn<F> {
    dim: usize,
    f: F,
}

impl<F> DiagonalFn<F>
where
    F: Fn(&[Dual2DVec64]) -> Vec<Dual2DVec64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> SymmetricField for DiagonalFn<F>
where
    F: Fn(&[Dual2DVec64]) -> Vec<Dual2DVec64> + Send + Sync,
{
    fn inputs(&self) -> usize {
        self.dim
    }
    fn size(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &[f64]) -> DMatrix<f64> {
        let vars: Vec<Dual2DVec64> = x.iter().map(|&v| Dual2DVec64::from_re(v)).collect();
        let d: Vec<f64> = (self.f)(&vars).iter().map(|e| e.re).collect();
        linalg::diag(&d)
    }
    fn jet(&self, x: &[f64]) -> Option<Jet> {
        let n = self.dim;
        let vars: Vec<Dual2DVec64> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual2DVec64::from_re(v).derivative(n, i))
            .collect();
        let entries = (self.f)(&vars);
        let mut jet = Jet::zeros(n, n);
        for (i, e) in entries.iter().enumerate() {
            jet.value[(i, i)] = e.re;
            if let Some(g) = &e.v1.0 {
                for a in 0..n {
                    jet.d1[a][(i, i)] = g[a];
                }
            }
            if let Some(h) = &e.v2.0 {
                for a in 0..n {
                    for b in 0..n {
                        jet.d2[a * n + b][(i, i)] = h[(a, b)];
                    }
                }
            }
        }
        Some(jet)
    }
}

/// `c · g` for a constant `c > 0`.
pub struct Scaled {
    factor: f64,
    inner: Arc<dyn SymmetricField>,
}

impl Scaled {
    pub fn new(factor: f64, inner: Arc<dyn SymmetricField>) -> Self {
        Self { factor, inner }
    }
}

impl SymmetricField for Scaled {
    fn inputs(&self) -> usize {
        self.inner.inputs()
    }
    fn size(&self) -> usize {
        self.inner.size()
    }
    fn value(&self, x: &[f64]) -> DMatrix<f64> {
        self.inner.value(x) * self.factor
    }
    fn jet(&self, x: &[f64]) -> Option<Jet> {
        Some(self.inner.jet(x)?.scale(self.factor))
    }
}

/// Riemannian product `g_A ⊕ g_B` on the product chart, `A`'s coordinates first.
pub struct Product {
    a: Arc<dyn SymmetricField>,
    b: Arc<dyn SymmetricField>,
}

impl Product {
    pub fn new(a: Arc<dyn SymmetricField>, b: Arc<dyn SymmetricField>) -> Self {
        Self { a, b }
    }
}

impl SymmetricField for Product {
    fn inputs(&self) -> usize {
        self.a.inputs() + self.b.inputs()
    }
    fn size(&self) -> usize {
        self.a.size() + self.b.size()
    }
    fn value(&self, x: &[f64]) -> DMatrix<f64> {
        let (xa, xb) = x.split_at(self.a.inputs());
        linalg::block_diag(&self.a.value(xa), &self.b.value(xb))
    }
    fn jet(&self, x: &[f64]) -> Option<Jet> {
        let (na, nb) = (self.a.inputs(), self.b.inputs());
        let (xa, xb) = x.split_at(na);
        let (ja, jb) = (self.a.jet(xa)?, self.b.jet(xb)?);
        let (sa, sb) = (self.a.size(), self.b.size());
        let za = DMatrix::zeros(sa, sa);
        let zb = DMatrix::zeros(sb, sb);
        let n = na + nb;
        let mut jet = Jet::zeros(n, sa + sb);
        jet.value = linalg::block_diag(&ja.value, &jb.value);
        for i in 0..na {
            jet.d1[i] = linalg::block_diag(&ja.d1[i], &zb);
            for j in 0..na {
                jet.d2[i * n + j] = linalg::block_diag(ja.d2(i, j), &zb);
            }
        }
        for i in 0..nb {
            jet.d1[na + i] = linalg::block_diag(&za, &jb.d1[i]);
            for j in 0..nb {
                jet.d2[(na + i) * n + na + j] = linalg::block_diag(&za, jb.d2(i, j));
            }
        }
        Some(jet)
    }
}

/// Round `S^n(r)` as a metric field on the default polar chart.
pub fn round_sphere_field(n: usize, radius: f64) -> Result<MetricField> {
    MetricField::analytic(
        Chart::sphere(n, Chart::default_pole_margin())?,
        Arc::new(RoundSphere::new(n, radius)),
    )
}

/// Flat torus `[0, 2π)^dim`.
pub fn flat_torus_field(dim: usize) -> Result<MetricField> {
    MetricField::analytic(Chart::torus(dim)?, Arc::new(FlatMetric::new(dim)))
}

pub fn ellipsoid_field(a: f64, b: f64, c: f64) -> Result<MetricField> {
    MetricField::analytic(
        Chart::sphere(2, Chart::default_pole_margin())?,
        Arc::new(Ellipsoid::new(a, b, c)),
    )
}

/// `g_A ⊕ g_B` on the product chart. Derivative mode is taken from `a`.
pub fn product_field(a: &MetricField, b: &MetricField) -> Result<MetricField> {
    MetricField::new(
        a.chart().product(b.chart()),
        Arc::new(Product::new(a.source().clone(), b.source().clone())),
        a.mode(),
    )
}

/// `c · g` with the same chart and derivative mode.
pub fn scaled_field(factor: f64, g: &MetricField) -> Result<MetricField> {
    MetricField::new(g.chart().clone(), Arc::new(Scaled::new(factor, g.source().clone())), g.mode())
}

/// Same metric, derivatives by finite differences.
pub fn finite_difference(g: &MetricField, steps: crate::metric::FdSteps) -> MetricField {
    g.with_mode(DerivativeMode::FiniteDifference(steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{finite_difference_jet, FdSteps};

    fn max_jet_gap(a: &Jet, b: &Jet) -> (f64, f64) {
        let d1 = a.d1.iter().zip(&b.d1).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max);
        let d2 = a.d2.iter().zip(&b.d2).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max);
        (d1, d2)
    }

    #[test]
    fn sphere_jets_match_finite_differences() {
        let s = RoundSphere::new(3, 1.5);
        let x = [0.7, 1.1, 2.0];
        let exact = s.jet(&x).unwrap();
        let fd = finite_difference_jet(&s, &x, FdSteps::default(), None);
        let (d1, d2) = max_jet_gap(&exact, &fd);
        assert!(d1 < 1e-5 && d2 < 1e-4, "{d1} {d2}");
        assert_eq!(exact.value, s.value(&x));
    }

    #[test]
    fn ellipsoid_jets_match_finite_differences() {
        let e = Ellipsoid::new(1.0, 2.0, 3.0);
        let x = [0.9, 0.4];
        let exact = e.jet(&x).unwrap();
        let fd = finite_difference_jet(&e, &x, FdSteps::default(), None);
        let (d1, d2) = max_jet_gap(&exact, &fd);
        assert!(d1 < 1e-4 && d2 < 1e-3, "{d1} {d2}");
    }

    #[test]
    fn product_and_scaled_jets() {
        let p = Product::new(Arc::new(RoundSphere::new(2, 1.0)), Arc::new(Ellipsoid::new(1.0, 1.0, 2.0)));
        let x = [1.0, 0.3, 0.8, 2.0];
        let exact = p.jet(&x).unwrap();
        let fd = finite_difference_jet(&p, &x, FdSteps::default(), None);
        let (d1, d2) = max_jet_gap(&exact, &fd);
        assert!(d1 < 1e-4 && d2 < 1e-3);
        let s = Scaled::new(4.0, Arc::new(RoundSphere::new(2, 1.0)));
        assert_eq!(s.value(&[1.0, 0.0]), RoundSphere::new(2, 2.0).value(&[1.0, 0.0]));
    }

    #[test]
    fn lift_applies_chain_rule() {
        let x = Dual2DVec64::from_re(0.3).derivative(1, 0);
        let y = x.lift(0.3f64.exp(), 0.3f64.exp(), 0.3f64.exp());
        let z = x.exp();
        assert!((y.v1.0.unwrap()[0] - z.v1.0.unwrap()[0]).abs() < 1e-15);
        assert!((y.v2.0.unwrap()[0] - z.v2.0.unwrap()[0]).abs() < 1e-15);
    }
}
