//! Brute-force curvature: metric → Christoffel symbols → Riemann tensor →
//! scalar curvature, by plain index contraction in chart coordinates.
//!
//! Index conventions:
//!
//! * `Γ^k_{ij} = ½ g^{kl} (∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})`
//! * `R^s_{ijk} = ∂_j Γ^s_{ik} − ∂_i Γ^s_{jk} + Γ^l_{ik} Γ^s_{jl} − Γ^l_{jk} Γ^s_{il}`
//! * `R_{ijks} = R^l_{ijk} g_{ls}`, so that `R_{ijij} > 0` on round spheres
//! * `κ = g^{ik} g^{js} R_{ijks}`
//!
//! With analytic derivatives `∂Γ` comes from the chain rule through `∂²g`;
//! with finite differences it is a central difference of `Γ` itself.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::chart::GridSpec;
use crate::error::{Error, Result};
use crate::frame::OrthonormalFrame;
use crate::linalg;
use crate::metric::{DerivativeMode, FdScheme, FdSteps, MetricField};
use crate::table;

/// Christoffel symbols of the second kind at a point, `gamma[(k, i, j)]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChristoffelField {
    pub point: Vec<f64>,
    pub dim: usize,
    pub gamma: Vec<f64>,
}

impl ChristoffelField {
    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.dim;
        self.gamma[(k * n + i) * n + j]
    }
}

fn gamma_from(g_inv: &DMatrix<f64>, d1: &[DMatrix<f64>]) -> Vec<f64> {
    let n = g_inv.nrows();
    // first kind: [l; i j]
    let mut first = vec![0.0; n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (d1[i][(j, l)] + d1[j][(i, l)] - d1[l][(i, j)]);
                first[(l * n + i) * n + j] = v;
                first[(l * n + j) * n + i] = v;
            }
        }
    }
    let mut gamma = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += g_inv[(k, l)] * first[(l * n + i) * n + j];
                }
                gamma[(k * n + i) * n + j] = acc;
                gamma[(k * n + j) * n + i] = acc;
            }
        }
    }
    gamma
}

fn inverse_at(g: &DMatrix<f64>, point: &[f64]) -> Result<DMatrix<f64>> {
    linalg::spd_inverse(g).ok_or_else(|| Error::NonSpd {
        point: point.to_vec(),
        min_eigenvalue: linalg::min_eigenvalue(g),
    })
}

fn gamma_at(field: &MetricField, point: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
    let (g, d1) = field.first_jet(point)?;
    let g_inv = inverse_at(&g, point)?;
    let gamma = gamma_from(&g_inv, &d1);
    Ok((g, g_inv, gamma))
}

pub fn christoffel(field: &MetricField, point: &[f64]) -> Result<ChristoffelField> {
    field.chart().check_regular(point)?;
    let (_, _, gamma) = gamma_at(field, point)?;
    Ok(ChristoffelField { point: point.to_vec(), dim: field.dim(), gamma })
}

/// Fully lowered Riemann tensor at a point together with the metric there.
#[derive(Debug, Clone)]
pub struct RiemannTensor {
    pub point: Vec<f64>,
    pub dim: usize,
    pub metric: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    /// `R_{ijks}` at `((i * n + j) * n + k) * n + s`.
    pub lowered: Vec<f64>,
}

impl RiemannTensor {
    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, s: usize) -> f64 {
        let n = self.dim;
        self.lowered[((i * n + j) * n + k) * n + s]
    }

    /// `κ = g^{ik} g^{js} R_{ijks}`.
    pub fn scalar(&self) -> f64 {
        let n = self.dim;
        let h = &self.inverse;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let hik = h[(i, k)];
                    if hik == 0.0 {
                        continue;
                    }
                    for s in 0..n {
                        acc += hik * h[(j, s)] * self.get(i, j, k, s);
                    }
                }
            }
        }
        acc
    }

    /// `K_ij = R(E_i, E_j, E_i, E_j)` in the frame columns of `e`.
    pub fn frame_sectional(&self, e: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.dim;
        let mut out = DMatrix::zeros(n, n);
        for p in 0..n {
            for q in 0..n {
                if p == q {
                    continue;
                }
                let mut acc = 0.0;
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            for d in 0..n {
                                acc += e[(a, p)] * e[(b, q)] * e[(c, p)] * e[(d, q)] * self.get(a, b, c, d);
                            }
                        }
                    }
                }
                out[(p, q)] = acc;
            }
        }
        out
    }

    /// `Σ_{i≠j} K_ij` in the symmetric orthonormal frame of the metric.
    pub fn scalar_via_frame(&self) -> Result<f64> {
        let frame = OrthonormalFrame::from_metric(&self.metric, &self.point)?;
        Ok(self.frame_sectional(&frame.e).sum())
    }
}

/// `g`, `g⁻¹`, `Γ` and `∂Γ`.
type GammaJet = (DMatrix<f64>, DMatrix<f64>, Vec<f64>, Vec<f64>);

/// `∂_m Γ^k_{ij}` at `((m * n + k) * n + i) * n + j`.
fn gamma_derivatives(field: &MetricField, point: &[f64]) -> Result<GammaJet> {
    let n = field.dim();
    match field.mode() {
        DerivativeMode::Analytic
        | DerivativeMode::FiniteDifference(FdSteps { scheme: FdScheme::MetricJet, .. }) => {
            let jet = field.jet(point)?;
            let g_inv = inverse_at(&jet.value, point)?;
            let gamma = gamma_from(&g_inv, &jet.d1);
            let mut dgamma = vec![0.0; n * n * n * n];
            for m in 0..n {
                // ∂_m g^{kl} = −(g⁻¹ ∂_m g g⁻¹)_{kl}
                let dinv = -(&g_inv * &jet.d1[m] * &g_inv);
                for k in 0..n {
                    for i in 0..n {
                        for j in i..n {
                            let mut acc = 0.0;
                            for l in 0..n {
                                let s = 0.5 * (jet.d1[i][(j, l)] + jet.d1[j][(i, l)] - jet.d1[l][(i, j)]);
                                let ds = 0.5
                                    * (jet.d2(m, i)[(j, l)] + jet.d2(m, j)[(i, l)] - jet.d2(m, l)[(i, j)]);
                                acc += dinv[(k, l)] * s + g_inv[(k, l)] * ds;
                            }
                            dgamma[((m * n + k) * n + i) * n + j] = acc;
                            dgamma[((m * n + k) * n + j) * n + i] = acc;
                        }
                    }
                }
            }
            Ok((jet.value, g_inv, gamma, dgamma))
        }
        DerivativeMode::FiniteDifference(steps) => {
            let (g, g_inv, gamma) = gamma_at(field, point)?;
            let h = steps.second;
            let mut dgamma = vec![0.0; n * n * n * n];
            for m in 0..n {
                let mut plus = point.to_vec();
                let mut minus = point.to_vec();
                plus[m] += h;
                minus[m] -= h;
                field.chart().wrap(&mut plus);
                field.chart().wrap(&mut minus);
                let (_, _, gp) = gamma_at(field, &plus)?;
                let (_, _, gm) = gamma_at(field, &minus)?;
                let block = &mut dgamma[m * n * n * n..(m + 1) * n * n * n];
                for (d, (a, b)) in block.iter_mut().zip(gp.iter().zip(&gm)) {
                    *d = (a - b) / (2.0 * h);
                }
            }
            Ok((g, g_inv, gamma, dgamma))
        }
    }
}

pub fn riemann_tensor(field: &MetricField, point: &[f64]) -> Result<RiemannTensor> {
    field.chart().check_regular(point)?;
    let n = field.dim();
    let (g, g_inv, gamma, dgamma) = gamma_derivatives(field, point)?;
    let ga = |k: usize, i: usize, j: usize| gamma[(k * n + i) * n + j];
    let dga = |m: usize, k: usize, i: usize, j: usize| dgamma[((m * n + k) * n + i) * n + j];
    // R^s_{ijk} at ((s * n + i) * n + j) * n + k
    let mut up = vec![0.0; n * n * n * n];
    for s in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut r = dga(j, s, i, k) - dga(i, s, j, k);
                    for l in 0..n {
                        r += ga(l, i, k) * ga(s, j, l) - ga(l, j, k) * ga(s, i, l);
                    }
                    up[((s * n + i) * n + j) * n + k] = r;
                }
            }
        }
    }
    let mut lowered = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for s in 0..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += up[((l * n + i) * n + j) * n + k] * g[(l, s)];
                    }
                    lowered[((i * n + j) * n + k) * n + s] = acc;
                }
            }
        }
    }
    Ok(RiemannTensor { point: point.to_vec(), dim: n, metric: g, inverse: g_inv, lowered })
}

/// `R_{ijks}` at `point`.
pub fn riemann_component(field: &MetricField, point: &[f64], (i, j, k, s): (usize, usize, usize, usize)) -> Result<f64> {
    let n = field.dim();
    if i >= n || j >= n || k >= n || s >= n {
        return Err(Error::InvalidArgument(format!("index out of range for dimension {n}")));
    }
    Ok(riemann_tensor(field, point)?.get(i, j, k, s))
}

pub fn scalar_curvature(field: &MetricField, point: &[f64]) -> Result<f64> {
    Ok(riemann_tensor(field, point)?.scalar())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureSample {
    pub point: Vec<f64>,
    pub kappa: f64,
}

/// Scalar curvature over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub samples: Vec<CurvatureSample>,
    pub min_kappa: f64,
    pub argmin: Vec<f64>,
}

impl CurvatureReport {
    pub fn from_samples(samples: Vec<CurvatureSample>) -> Self {
        let (min_kappa, argmin) = samples
            .iter()
            .fold((f64::INFINITY, Vec::new()), |(m, p), s| {
                if s.kappa < m {
                    (s.kappa, s.point.clone())
                } else {
                    (m, p)
                }
            });
        Self { samples, min_kappa, argmin }
    }

    pub fn max_kappa(&self) -> f64 {
        self.samples.iter().map(|s| s.kappa).fold(f64::NEG_INFINITY, f64::max)
    }

    /// One row per sample: chart coordinates `x0, x1, …` then `kappa`.
    pub fn to_csv(&self) -> String {
        let dim = self.samples.first().map_or(0, |s| s.point.len());
        let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        header.push("kappa".into());
        let rows = self.samples.iter().map(|s| {
            let mut row = s.point.clone();
            row.push(s.kappa);
            row
        });
        table::csv(&header, rows)
    }
}

pub fn min_scalar_on_grid(field: &MetricField, grid: &GridSpec) -> Result<CurvatureReport> {
    let points = grid.samples(field.chart())?;
    let samples = points
        .into_par_iter()
        .map(|p| scalar_curvature(field, &p).map(|kappa| CurvatureSample { point: p, kappa }))
        .collect::<Result<Vec<_>>>()?;
    Ok(CurvatureReport::from_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{ellipsoid_field, flat_torus_field, product_field, round_sphere_field};
    use std::f64::consts::PI;

    #[test]
    fn flat_torus_is_flat() {
        let f = flat_torus_field(3).unwrap();
        let c = christoffel(&f, &[0.1, 2.0, 5.0]).unwrap();
        assert!(c.gamma.iter().all(|&v| v == 0.0));
        let r = riemann_tensor(&f, &[0.1, 2.0, 5.0]).unwrap();
        assert!(r.lowered.iter().all(|&v| v == 0.0));
        assert_eq!(r.scalar(), 0.0);
    }

    #[test]
    fn sphere_christoffel_symbols() {
        // g = diag(1, sin²θ): Γ^θ_φφ = −sinθ cosθ, Γ^φ_θφ = cotθ
        let f = round_sphere_field(2, 1.0).unwrap();
        let eq = christoffel(&f, &[PI / 2.0, 1.0]).unwrap();
        assert!(eq.get(0, 1, 1).abs() < 1e-15);
        assert!(eq.get(1, 0, 1).abs() < 1e-15);
        let c = christoffel(&f, &[PI / 4.0, 1.0]).unwrap();
        assert!((c.get(0, 1, 1) + 0.5).abs() < 1e-14);
        assert!((c.get(1, 0, 1) - 1.0).abs() < 1e-14);
        assert_eq!(c.get(1, 0, 1), c.get(1, 1, 0));
    }

    #[test]
    fn sphere_sectional_curvature() {
        for r in [1.0, 2.0] {
            let f = round_sphere_field(2, r).unwrap();
            let p = [1.1, 0.3];
            let t = riemann_tensor(&f, &p).unwrap();
            let k = t.get(0, 1, 0, 1) / t.metric.determinant();
            assert!((k - 1.0 / (r * r)).abs() < 1e-12, "{k}");
            let fd = riemann_tensor(&f.with_mode(DerivativeMode::FiniteDifference(FdSteps::default())), &p).unwrap();
            let kfd = fd.get(0, 1, 0, 1) / fd.metric.determinant();
            assert!((kfd - 1.0 / (r * r)).abs() < 1e-4, "{kfd}");
        }
    }

    #[test]
    fn both_difference_schemes_converge() {
        let f = round_sphere_field(2, 1.0).unwrap();
        // Away from the poles Γ is tame and both schemes are accurate.
        let p = [1.2, 0.7];
        for scheme in [FdScheme::MetricJet, FdScheme::Christoffel] {
            let err = |steps: FdSteps| {
                (scalar_curvature(&f.with_mode(DerivativeMode::FiniteDifference(steps.with_scheme(scheme))), &p).unwrap()
                    - 2.0)
                    .abs()
            };
            let coarse = err(FdSteps::uniform(1e-2));
            let fine = err(FdSteps::uniform(5e-3));
            assert!(coarse < 1e-3, "{scheme:?}: {coarse}");
            assert!((3.5..4.5).contains(&(coarse / fine)), "{scheme:?}: {}", coarse / fine);
        }
    }

    #[test]
    fn product_mixed_components_vanish() {
        let f = product_field(&round_sphere_field(2, 1.0).unwrap(), &flat_torus_field(1).unwrap()).unwrap();
        let t = riemann_tensor(&f, &[1.0, 2.0, 0.5]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    for s in 0..3 {
                        let count = [i, j, k, s].iter().filter(|&&a| a == 2).count();
                        if count == 1 {
                            assert_eq!(t.get(i, j, k, s), 0.0);
                        }
                    }
                }
            }
        }
        assert!((t.scalar() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_region_rejected() {
        let f = round_sphere_field(2, 1.0).unwrap();
        assert!(matches!(scalar_curvature(&f, &[0.01, 0.0]), Err(Error::SingularRegion { .. })));
    }

    #[test]
    fn ellipsoid_minimum_on_equator() {
        let f = ellipsoid_field(1.0, 1.0, 3.0).unwrap();
        let report = min_scalar_on_grid(&f, &GridSpec::uniform(2, 9)).unwrap();
        assert!((report.argmin[0] - PI / 2.0).abs() < 1e-12);
        // κ = 2K, K = c²/(c² sin²θ + a² cos²θ)² = 1/9 on the equator
        assert!((report.min_kappa - 2.0 / 9.0).abs() < 1e-10, "{}", report.min_kappa);
    }

    #[test]
    fn csv_layout() {
        let f = flat_torus_field(2).unwrap();
        let r = min_scalar_on_grid(&f, &GridSpec::uniform(2, 2)).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("x0,x1,kappa"));
        assert_eq!(csv.lines().count(), 5);
    }
}
