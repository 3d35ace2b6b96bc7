//! The minimal psc stretch `S'(α) = inf { t > 0 : α(F(·/τ)) + dt² is psc
//! for all τ ≥ t }` and `S(α) = max(S'(α), 1)`.
//!
//! On a fixed set of relative samples `(x, s = t/τ)` the closed form reads
//! `κ = A(x, s) + B(x, s)/τ²`, so `A` and `B` are computed once and every
//! trial stretch costs a single pass over the table.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::chart::GridSpec;
use crate::cutoff::CutoffFunction;
use crate::cylinder::{slice_terms, MiddleSign};
use crate::error::{Error, Result};
use crate::path::MetricPath;

pub const DEFAULT_T_SAMPLES: usize = 64;
pub const DEFAULT_REFINEMENT: usize = 4;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;
pub const MAX_BRACKET_EXPONENT: i32 = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct StretchOptions {
    /// Samples on the base chart.
    pub grid: GridSpec,
    /// Uniform samples of `s = t/τ` across `[0, 1]`.
    pub t_samples: usize,
    /// Extra density inside the transition band `[ε, 1 − ε]`.
    pub refinement: usize,
    /// Relative width of the final bisection bracket.
    pub tolerance: f64,
    pub sign: MiddleSign,
}

impl StretchOptions {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            t_samples: DEFAULT_T_SAMPLES,
            refinement: DEFAULT_REFINEMENT,
            tolerance: DEFAULT_TOLERANCE,
            sign: MiddleSign::RESOLVED,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    /// Relative positions `s ∈ [0, 1]` sampled along the cylinder axis.
    pub fn relative_samples(&self, epsilon: f64) -> Vec<f64> {
        let n = self.t_samples.max(2);
        let mut s: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let fine = (n - 1) * self.refinement.max(1);
        let step = 1.0 / fine as f64;
        s.extend((0..=fine).map(|i| i as f64 * step).filter(|&v| v > epsilon && v < 1.0 - epsilon));
        s.sort_by(f64::total_cmp);
        s.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        s
    }
}

/// One relative sample with its closed-form coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CylinderSample {
    pub x: Vec<f64>,
    pub s: f64,
    /// Path parameter `F(s)`.
    pub u: f64,
    /// `κ_X(x; α(u))`.
    pub a: f64,
    /// Coefficient of `1/τ²`.
    pub b: f64,
}

impl CylinderSample {
    pub fn kappa(&self, tau: f64) -> f64 {
        self.a + self.b / (tau * tau)
    }
}

/// Closed-form coefficients on the sample set `grid × s-samples`.
#[derive(Debug, Clone)]
pub struct CylinderSamples {
    pub samples: Vec<CylinderSample>,
    /// Number of distinct `s` values per base point.
    pub s_count: usize,
}

impl CylinderSamples {
    pub fn build(path: &MetricPath, cutoff: &Arc<CutoffFunction>, options: &StretchOptions) -> Result<Self> {
        let points = options.grid.samples(path.chart())?;
        let rel = options.relative_samples(cutoff.epsilon());
        let jobs: Vec<(usize, usize)> =
            (0..points.len()).flat_map(|p| (0..rel.len()).map(move |i| (p, i))).collect();
        let samples = jobs
            .into_par_iter()
            .map(|(p, i)| {
                let s = rel[i];
                let [u, f1, f2] = cutoff.derivatives(s);
                let terms = slice_terms(path, u, &points[p])?;
                Ok(CylinderSample {
                    x: points[p].clone(),
                    s,
                    u,
                    a: terms.kappa_x,
                    b: terms.stretch_coefficient(f1, f2, options.sign),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { samples, s_count: rel.len() })
    }

    /// Most negative sample at stretch `tau`.
    pub fn min_at(&self, tau: f64) -> (f64, &CylinderSample) {
        self.samples
            .iter()
            .map(|s| (s.kappa(tau), s))
            .fold((f64::INFINITY, &self.samples[0]), |a, b| if b.0 < a.0 { b } else { a })
    }

    pub fn min_kappa(&self, tau: f64) -> f64 {
        self.min_at(tau).0
    }

    /// Smallest `τ` with `κ ≥ 0` at every sample, read off sample by sample.
    pub fn exact_threshold(&self) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.b < 0.0)
            .map(|s| (-s.b / s.a).sqrt())
            .fold(0.0, f64::max)
    }

    /// Half the largest jump in `κ(τ)` between neighbouring `s` samples
    /// over the same base point: a rough bound on what sampling can miss.
    pub fn sampling_slack(&self, tau: f64) -> f64 {
        self.samples
            .chunks(self.s_count.max(1))
            .flat_map(|row| row.windows(2).map(|w| (w[1].kappa(tau) - w[0].kappa(tau)).abs()))
            .fold(0.0, f64::max)
            * 0.5
    }

    fn check_psc(&self) -> Result<()> {
        let worst = self
            .samples
            .iter()
            .fold(&self.samples[0], |a, b| if b.a < a.a { b } else { a });
        if worst.a > 0.0 {
            Ok(())
        } else {
            Err(Error::NotPscPath { min_kappa: worst.a, u: worst.u, point: worst.x.clone() })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StretchResult {
    pub s_prime: f64,
    pub s: f64,
    /// `(τ, min κ)` for every trial stretch, in evaluation order.
    pub history: Vec<(f64, f64)>,
    pub tolerance: f64,
    /// Threshold computed directly from the sample coefficients.
    pub exact_threshold: f64,
    /// `min κ` at `S'(1 + tolerance)`, or at `τ = 1` when `S' = 0`.
    pub certified_min_kappa: f64,
    pub sampling_slack: f64,
    pub samples: usize,
}

pub fn compute_s(path: &MetricPath, cutoff: &Arc<CutoffFunction>, options: &StretchOptions) -> Result<StretchResult> {
    let table = CylinderSamples::build(path, cutoff, options)?;
    stretch_from_samples(&table, options.tolerance)
}

pub fn stretch_from_samples(table: &CylinderSamples, tolerance: f64) -> Result<StretchResult> {
    if !(tolerance > 0.0 && tolerance < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tolerance} outside (0, 1)")));
    }
    table.check_psc()?;
    let mut history = Vec::new();
    let mut probe = |tau: f64| {
        let k = table.min_kappa(tau);
        history.push((tau, k));
        k >= 0.0
    };
    let exact = table.exact_threshold();
    let s_prime = if table.samples.iter().all(|s| s.b >= 0.0) {
        0.0
    } else {
        let mut k = 0;
        while !probe(2f64.powi(k)) {
            k += 1;
            if k > MAX_BRACKET_EXPONENT {
                return Err(Error::BracketFailure { max_tau: 2f64.powi(MAX_BRACKET_EXPONENT) });
            }
        }
        let mut hi = 2f64.powi(k);
        let mut lo = 0.5 * hi;
        if k == 0 {
            while probe(lo) {
                hi = lo;
                lo *= 0.5;
            }
        }
        while hi - lo > tolerance * hi {
            let mid = 0.5 * (lo + hi);
            if probe(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    check_monotone(&history)?;
    let check_tau = if s_prime > 0.0 { s_prime * (1.0 + tolerance) } else { 1.0 };
    Ok(StretchResult {
        s_prime,
        s: s_prime.max(1.0),
        history,
        tolerance,
        exact_threshold: exact,
        certified_min_kappa: table.min_kappa(check_tau),
        sampling_slack: table.sampling_slack(check_tau),
        samples: table.samples.len(),
    })
}

/// Bisection assumes that passing at `τ` implies passing at every larger
/// trial; any trial contradicting that is an error.
fn check_monotone(history: &[(f64, f64)]) -> Result<()> {
    for &(t1, k1) in history {
        for &(t2, k2) in history {
            if t1 < t2 && k1 >= 0.0 && k2 < 0.0 {
                return Err(Error::ConstraintViolation(format!(
                    "psc at τ = {t1} but not at τ = {t2}"
                )));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    /// Stretch `(1 − η) S'`.
    pub t_n: f64,
    pub x: Vec<f64>,
    /// Position along the cylinder, in `[0, t_n]`.
    pub tau: f64,
    pub kappa: f64,
}

/// Most negative sample of the cylinder at stretch `(1 − η) S'`, or `None`
/// when no sample is negative.
pub fn negativity_witness(
    path: &MetricPath,
    cutoff: &Arc<CutoffFunction>,
    s_prime: f64,
    eta: f64,
    options: &StretchOptions,
) -> Result<Option<Witness>> {
    if !(s_prime > 0.0) {
        return Err(Error::NonpositiveSprime(s_prime));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("η = {eta} outside (0, 1)")));
    }
    let table = CylinderSamples::build(path, cutoff, options)?;
    Ok(witness_from_samples(&table, s_prime, eta))
}

pub fn witness_from_samples(table: &CylinderSamples, s_prime: f64, eta: f64) -> Option<Witness> {
    let t_n = (1.0 - eta) * s_prime;
    let (kappa, sample) = table.min_at(t_n);
    (kappa < 0.0).then(|| Witness { t_n, x: sample.x.clone(), tau: sample.s * t_n, kappa })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoff::make_cutoff;
    use crate::fixtures::round_sphere_field;
    use crate::path::{constant_path, sphere_radius_path, RadiusProfile};
    use proptest::prelude::*;

    fn cutoff() -> Arc<CutoffFunction> {
        Arc::new(make_cutoff(0.125).unwrap())
    }

    fn options() -> StretchOptions {
        StretchOptions::new(GridSpec::uniform(2, 6))
    }

    #[test]
    fn constant_path_has_unit_stretch() {
        let path = constant_path(&round_sphere_field(2, 1.0).unwrap()).unwrap();
        let r = compute_s(&path, &cutoff(), &options()).unwrap();
        assert_eq!(r.s_prime, 0.0);
        assert_eq!(r.s, 1.0);
        assert!(r.history.is_empty());
        assert!(matches!(
            negativity_witness(&path, &cutoff(), 0.0, 0.05, &options()),
            Err(Error::NonpositiveSprime(_))
        ));
    }

    #[test]
    fn gentle_path_brackets_exact_threshold() {
        let path = sphere_radius_path(2, RadiusProfile::Linear { r0: 1.0, r1: 2.0 }).unwrap();
        let opts = options();
        let r = compute_s(&path, &cutoff(), &opts).unwrap();
        assert!(r.s >= 1.0);
        assert!(r.certified_min_kappa >= 0.0);
        if r.exact_threshold > 0.0 {
            assert!(r.s_prime >= r.exact_threshold);
            assert!(r.s_prime <= r.exact_threshold * (1.0 + 2.0 * opts.tolerance) + 1e-12);
            let w = negativity_witness(&path, &cutoff(), r.s_prime, 0.5, &opts).unwrap().unwrap();
            assert!(w.kappa < 0.0);
            assert!(w.tau >= 0.0 && w.tau <= w.t_n);
        }
    }

    #[test]
    fn oscillating_path_needs_long_cylinder() {
        let path = sphere_radius_path(2, RadiusProfile::Oscillating { amplitude: 0.9, frequency: 1.0 }).unwrap();
        let opts = options();
        let table = CylinderSamples::build(&path, &cutoff(), &opts).unwrap();
        let r = stretch_from_samples(&table, opts.tolerance).unwrap();
        assert!(r.s_prime > 1.0, "{}", r.s_prime);
        assert!(table.min_kappa(0.95 * r.s_prime) < 0.0);
        assert!(table.min_kappa(1.01 * r.s_prime) >= 0.0);
        let w = witness_from_samples(&table, r.s_prime, 0.05).unwrap();
        assert!(w.kappa < 0.0);
    }

    #[test]
    fn relative_samples_cover_band() {
        let s = options().relative_samples(0.125);
        assert_eq!(s[0], 0.0);
        assert_eq!(*s.last().unwrap(), 1.0);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        let band = s.iter().filter(|&&v| v > 0.125 && v < 0.875).count();
        assert!(band > 150);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn passing_is_monotone_in_tau(a in 0.1f64..5.0, b in -50.0f64..50.0, t1 in 0.1f64..20.0, t2 in 0.1f64..20.0) {
            let s = CylinderSample { x: vec![0.0], s: 0.5, u: 0.5, a, b };
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            if s.kappa(lo) >= 0.0 {
                prop_assert!(s.kappa(hi) >= 0.0);
            }
        }
    }
}
