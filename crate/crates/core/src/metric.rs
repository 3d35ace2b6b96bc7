//! Metric fields: symmetric-matrix valued functions on a chart with
//! first and second coordinate derivatives.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{Chart, GridSpec};
use crate::error::{Error, Result};
use crate::linalg;

/// Value and first two coordinate derivatives of a symmetric matrix field.
///
/// `d1[a]` is `∂_a g`; `d2[a * n + b]` is `∂_a ∂_b g` where `n` is the
/// number of input coordinates.
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: DMatrix<f64>,
    pub d1: Vec<DMatrix<f64>>,
    pub d2: Vec<DMatrix<f64>>,
}

impl Jet {
    pub fn zeros(inputs: usize, size: usize) -> Self {
        let z = DMatrix::zeros(size, size);
        Self {
            value: z.clone(),
            d1: vec![z.clone(); inputs],
            d2: vec![z; inputs * inputs],
        }
    }

    pub fn inputs(&self) -> usize {
        self.d1.len()
    }

    pub fn d2(&self, a: usize, b: usize) -> &DMatrix<f64> {
        &self.d2[a * self.inputs() + b]
    }

    pub fn d2_mut(&mut self, a: usize, b: usize) -> &mut DMatrix<f64> {
        let n = self.inputs();
        &mut self.d2[a * n + b]
    }

    pub fn scale(mut self, c: f64) -> Self {
        self.value *= c;
        self.d1.iter_mut().for_each(|m| *m *= c);
        self.d2.iter_mut().for_each(|m| *m *= c);
        self
    }
}

/// A smooth symmetric-matrix valued function of `inputs()` real variables.
///
/// Metrics on an `n`-chart have `inputs() == size() == n`; metric paths
/// carry the path parameter as an extra leading input.
pub trait SymmetricField: Send + Sync {
    fn inputs(&self) -> usize;
    fn size(&self) -> usize;
    fn value(&self, x: &[f64]) -> DMatrix<f64>;
    /// Analytic second-order jet, if the field supplies one.
    fn jet(&self, x: &[f64]) -> Option<Jet>;
}

/// Where the second differences are taken.
///
/// `MetricJet` differences g itself and contracts exactly, which keeps the
/// error small near coordinate singularities where Γ blows up.
/// `Christoffel` differences the Christoffel field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum FdScheme {
    #[default]
    MetricJet,
    Christoffel,
}

/// Finite-difference steps for first and second derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdSteps {
    pub first: f64,
    pub second: f64,
    pub scheme: FdScheme,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self { first: 1e-3, second: 10f64.powf(-2.5), scheme: FdScheme::MetricJet }
    }
}

impl FdSteps {
    /// Same step `h` for both orders.
    pub fn uniform(h: f64) -> Self {
        Self { first: h, second: h, scheme: FdScheme::MetricJet }
    }

    pub fn with_scheme(self, scheme: FdScheme) -> Self {
        Self { scheme, ..self }
    }

    pub fn halved(self) -> Self {
        Self { first: 0.5 * self.first, second: 0.5 * self.second, scheme: self.scheme }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference(FdSteps),
}

/// Central-difference jet of `field` at `x`.
///
/// `wrap` maps displaced points back into the chart on periodic axes.
pub fn finite_difference_jet(
    field: &dyn SymmetricField,
    x: &[f64],
    steps: FdSteps,
    wrap: Option<&Chart>,
) -> Jet {
    let n = field.inputs();
    let eval = |dx: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(a, h) in dx {
            p[a] += h;
        }
        if let Some(chart) = wrap {
            chart.wrap(&mut p);
        }
        field.value(&p)
    };
    let value = field.value(x);
    let h1 = steps.first;
    let d1 = (0..n)
        .map(|a| (eval(&[(a, h1)]) - eval(&[(a, -h1)])) / (2.0 * h1))
        .collect();
    let h = steps.second;
    let mut d2 = vec![DMatrix::zeros(value.nrows(), value.ncols()); n * n];
    for a in 0..n {
        d2[a * n + a] = (eval(&[(a, h)]) - &value * 2.0 + eval(&[(a, -h)])) / (h * h);
        for b in (a + 1)..n {
            let m = (eval(&[(a, h), (b, h)]) - eval(&[(a, h), (b, -h)]) - eval(&[(a, -h), (b, h)])
                + eval(&[(a, -h), (b, -h)]))
                / (4.0 * h * h);
            d2[b * n + a] = m.clone();
            d2[a * n + b] = m;
        }
    }
    Jet { value, d1, d2 }
}

/// A Riemannian metric on a chart together with the way its derivatives
/// are obtained.
#[derive(Clone)]
pub struct MetricField {
    chart: Chart,
    source: Arc<dyn SymmetricField>,
    mode: DerivativeMode,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MetricField")
            .field("chart", &self.chart)
            .field("mode", &self.mode)
            .finish_non_exhaustive()
    }
}

impl MetricField {
    pub fn new(chart: Chart, source: Arc<dyn SymmetricField>, mode: DerivativeMode) -> Result<Self> {
        if source.inputs() != chart.dim() || source.size() != chart.dim() {
            return Err(Error::ChartMismatch(format!(
                "field of size {} on {} inputs does not fit a {}-chart",
                source.size(),
                source.inputs(),
                chart.dim()
            )));
        }
        Ok(Self { chart, source, mode })
    }

    pub fn analytic(chart: Chart, source: Arc<dyn SymmetricField>) -> Result<Self> {
        Self::new(chart, source, DerivativeMode::Analytic)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn mode(&self) -> DerivativeMode {
        self.mode
    }

    pub fn source(&self) -> &Arc<dyn SymmetricField> {
        &self.source
    }

    /// Same components, different derivative mode.
    pub fn with_mode(&self, mode: DerivativeMode) -> Self {
        Self { chart: self.chart.clone(), source: self.source.clone(), mode }
    }

    pub fn value(&self, x: &[f64]) -> DMatrix<f64> {
        self.source.value(x)
    }

    pub fn jet(&self, x: &[f64]) -> Result<Jet> {
        match self.mode {
            DerivativeMode::Analytic => self.source.jet(x).ok_or(Error::MissingAnalyticJet),
            DerivativeMode::FiniteDifference(steps) => {
                Ok(finite_difference_jet(self.source.as_ref(), x, steps, Some(&self.chart)))
            }
        }
    }

    /// Value and first derivatives only; cheaper than [`Self::jet`] in
    /// finite-difference mode.
    pub fn first_jet(&self, x: &[f64]) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
        match self.mode {
            DerivativeMode::Analytic => {
                let jet = self.source.jet(x).ok_or(Error::MissingAnalyticJet)?;
                Ok((jet.value, jet.d1))
            }
            DerivativeMode::FiniteDifference(steps) => {
                let h = steps.first;
                let d1 = (0..self.dim())
                    .map(|a| {
                        let mut p = x.to_vec();
                        let mut m = x.to_vec();
                        p[a] += h;
                        m[a] -= h;
                        self.chart.wrap(&mut p);
                        self.chart.wrap(&mut m);
                        (self.source.value(&p) - self.source.value(&m)) / (2.0 * h)
                    })
                    .collect();
                Ok((self.source.value(x), d1))
            }
        }
    }

    /// Metric value at `x`, checked for positive definiteness.
    pub fn spd_value(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.value(x);
        let min = linalg::min_eigenvalue(&g);
        if min > 0.0 {
            Ok(g)
        } else {
            Err(Error::NonSpd { point: x.to_vec(), min_eigenvalue: min })
        }
    }
}

/// Outcome of [`validate_metric`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub min_eigenvalue: f64,
    pub argmin: Vec<f64>,
    pub max_symmetry_defect: f64,
    pub samples: usize,
    pub passed: bool,
}

pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Sweeps the grid checking symmetry and positive definiteness of `g`.
pub fn validate_metric(field: &MetricField, grid: &GridSpec) -> Result<ValidationReport> {
    let points = grid.samples(field.chart())?;
    let stats: Vec<(f64, f64)> = points
        .par_iter()
        .map(|p| {
            let g = field.value(p);
            let defect = (&g - g.transpose()).amax();
            (linalg::min_eigenvalue(&g), defect)
        })
        .collect();
    let mut min = f64::INFINITY;
    let mut argmin = 0;
    let mut defect: f64 = 0.0;
    for (i, &(m, d)) in stats.iter().enumerate() {
        if m < min {
            min = m;
            argmin = i;
        }
        defect = defect.max(d);
    }
    if !(min > 0.0) {
        return Err(Error::NonSpd { point: points[argmin].clone(), min_eigenvalue: min });
    }
    Ok(ValidationReport {
        min_eigenvalue: min,
        argmin: points[argmin].clone(),
        max_symmetry_defect: defect,
        samples: points.len(),
        passed: defect <= SYMMETRY_TOLERANCE,
    })
}

/// `C^k` distance between two metrics on the same chart.
///
/// Maximum over `i <= k` of the grid supremum of the Frobenius norm of the
/// `i`-th coordinate derivative of `g1 - g2`, using flat chart derivatives.
pub fn ck_distance(g1: &MetricField, g2: &MetricField, k: usize, grid: &GridSpec) -> Result<f64> {
    if k > 2 {
        return Err(Error::UnsupportedK(k));
    }
    if g1.chart() != g2.chart() {
        return Err(Error::ChartMismatch("metrics live on different charts".into()));
    }
    let points = grid.samples(g1.chart())?;
    let per_point: Vec<Result<[f64; 3]>> = points
        .par_iter()
        .map(|p| {
            let mut norms = [0.0; 3];
            if k == 0 {
                norms[0] = (g1.value(p) - g2.value(p)).norm();
                return Ok(norms);
            }
            let (a, b) = (g1.jet(p)?, g2.jet(p)?);
            norms[0] = (&a.value - &b.value).norm();
            norms[1] = frobenius_of_difference(&a.d1, &b.d1);
            if k == 2 {
                norms[2] = frobenius_of_difference(&a.d2, &b.d2);
            }
            Ok(norms)
        })
        .collect();
    let mut sup = [0.0f64; 3];
    for r in per_point {
        let r = r?;
        for i in 0..3 {
            sup[i] = sup[i].max(r[i]);
        }
    }
    Ok(sup[..=k].iter().cloned().fold(0.0, f64::max))
}

fn frobenius_of_difference(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_squared())
        .sum::<f64>()
        .sqrt()
}
