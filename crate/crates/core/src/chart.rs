//! Coordinate charts and the regular sample lattices used for every sweep.

use crate::error::{Error, Result};

/// Default width of the excluded pole band, in units of a 64-point grid step.
pub const DEFAULT_MARGIN_STEPS: f64 = 5.0;

/// A closed coordinate box with optional periodic axes and excluded bands
/// near the ends of axes where the coordinate expression degenerates.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    ranges: Vec<(f64, f64)>,
    periodic: Vec<bool>,
    singular_margin: Vec<f64>,
}

impl Chart {
    pub fn new(ranges: Vec<(f64, f64)>, periodic: Vec<bool>, singular_margin: Vec<f64>) -> Result<Self> {
        let dim = ranges.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("chart needs at least one axis".into()));
        }
        if periodic.len() != dim || singular_margin.len() != dim {
            return Err(Error::InvalidArgument("chart axis data lengths differ".into()));
        }
        for (axis, (&(lo, hi), &m)) in ranges.iter().zip(&singular_margin).enumerate() {
            let len = hi - lo;
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::InvalidArgument(format!("axis {axis} has empty range")));
            }
            if !(m >= 0.0) || m >= 0.5 * len {
                return Err(Error::InvalidArgument(format!(
                    "axis {axis}: singular margin {m} must lie in [0, {})",
                    0.5 * len
                )));
            }
        }
        Ok(Self { ranges, periodic, singular_margin })
    }

    /// Axes without periodicity or margins.
    pub fn boxed(ranges: Vec<(f64, f64)>) -> Result<Self> {
        let n = ranges.len();
        Self::new(ranges, vec![false; n], vec![0.0; n])
    }

    /// `[0, 2π)^dim`, all periodic.
    pub fn torus(dim: usize) -> Result<Self> {
        Self::new(
            vec![(0.0, std::f64::consts::TAU); dim],
            vec![true; dim],
            vec![0.0; dim],
        )
    }

    /// Hyperspherical angles for `S^n`: `n - 1` polar angles in `[0, π]`
    /// with pole margins, then one periodic azimuth.
    pub fn sphere(n: usize, margin: f64) -> Result<Self> {
        use std::f64::consts::{PI, TAU};
        if n == 0 {
            return Err(Error::InvalidArgument("sphere dimension must be >= 1".into()));
        }
        let mut ranges = vec![(0.0, PI); n - 1];
        let mut periodic = vec![false; n - 1];
        let mut margins = vec![margin; n - 1];
        ranges.push((0.0, TAU));
        periodic.push(true);
        margins.push(0.0);
        Self::new(ranges, periodic, margins)
    }

    /// Pole margin used by the built-in spherical charts.
    pub fn default_pole_margin() -> f64 {
        DEFAULT_MARGIN_STEPS * std::f64::consts::PI / 64.0
    }

    pub fn dim(&self) -> usize {
        self.ranges.len()
    }

    pub fn ranges(&self) -> &[(f64, f64)] {
        &self.ranges
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    pub fn singular_margin(&self) -> &[f64] {
        &self.singular_margin
    }

    /// Cartesian product of two charts, axes of `self` first.
    pub fn product(&self, other: &Chart) -> Chart {
        let mut out = self.clone();
        out.ranges.extend_from_slice(&other.ranges);
        out.periodic.extend_from_slice(&other.periodic);
        out.singular_margin.extend_from_slice(&other.singular_margin);
        out
    }

    /// Errors with `SingularRegion` if `point` falls inside an excluded band.
    pub fn check_regular(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::ChartMismatch(format!(
                "point has {} coordinates, chart has {}",
                point.len(),
                self.dim()
            )));
        }
        for (axis, &x) in point.iter().enumerate() {
            let m = self.singular_margin[axis];
            if m > 0.0 {
                let (lo, hi) = self.ranges[axis];
                if x < lo + m || x > hi - m {
                    return Err(Error::SingularRegion { point: point.to_vec(), axis });
                }
            }
        }
        Ok(())
    }

    /// Maps periodic coordinates back into their fundamental range.
    pub fn wrap(&self, point: &mut [f64]) {
        for (axis, x) in point.iter_mut().enumerate() {
            if self.periodic[axis] {
                let (lo, hi) = self.ranges[axis];
                let len = hi - lo;
                if *x < lo || *x >= hi {
                    *x = lo + (*x - lo).rem_euclid(len);
                }
            }
        }
    }
}

/// Regular lattice of sample points on a chart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSpec {
    pub points_per_axis: Vec<usize>,
}

impl GridSpec {
    pub fn new(points_per_axis: Vec<usize>) -> Self {
        Self { points_per_axis }
    }

    pub fn uniform(dim: usize, points: usize) -> Self {
        Self { points_per_axis: vec![points; dim] }
    }

    pub fn check(&self, chart: &Chart) -> Result<()> {
        if self.points_per_axis.len() != chart.dim() {
            return Err(Error::ChartMismatch(format!(
                "grid has {} axes, chart has {}",
                self.points_per_axis.len(),
                chart.dim()
            )));
        }
        if self.points_per_axis.contains(&0) {
            return Err(Error::InvalidArgument("grid axes need at least one point".into()));
        }
        Ok(())
    }

    /// Sample coordinates along one axis.
    ///
    /// Periodic axes use `n` equally spaced points without the duplicate
    /// endpoint. Other axes use `n` equally spaced points spanning the closed
    /// non-singular interval `[lo + m, hi - m]` (its midpoint when `n == 1`).
    pub fn axis_samples(chart: &Chart, axis: usize, n: usize) -> Vec<f64> {
        let (lo, hi) = chart.ranges()[axis];
        if chart.periodic()[axis] {
            let step = (hi - lo) / n as f64;
            return (0..n).map(|i| lo + step * i as f64).collect();
        }
        let m = chart.singular_margin()[axis];
        let (a, b) = (lo + m, hi - m);
        if n == 1 {
            return vec![0.5 * (a + b)];
        }
        let step = (b - a) / (n - 1) as f64;
        (0..n)
            .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
            .collect()
    }

    /// All lattice points, last axis varying fastest.
    pub fn samples(&self, chart: &Chart) -> Result<Vec<Vec<f64>>> {
        self.check(chart)?;
        let axes: Vec<Vec<f64>> = self
            .points_per_axis
            .iter()
            .enumerate()
            .map(|(axis, &n)| Self::axis_samples(chart, axis, n))
            .collect();
        let mut out = vec![Vec::with_capacity(axes.len())];
        for axis in &axes {
            let mut next = Vec::with_capacity(out.len() * axis.len());
            for prefix in &out {
                for &x in axis {
                    let mut p = prefix.clone();
                    p.push(x);
                    next.push(p);
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// Largest spacing between neighbouring samples on each axis.
    pub fn spacing(&self, chart: &Chart) -> Vec<f64> {
        self.points_per_axis
            .iter()
            .enumerate()
            .map(|(axis, &n)| {
                let (lo, hi) = chart.ranges()[axis];
                if chart.periodic()[axis] {
                    (hi - lo) / n as f64
                } else if n <= 1 {
                    hi - lo - 2.0 * chart.singular_margin()[axis]
                } else {
                    (hi - lo - 2.0 * chart.singular_margin()[axis]) / (n - 1) as f64
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn chart_rejects_wide_margin() {
        assert!(Chart::new(vec![(0.0, 1.0)], vec![false], vec![0.5]).is_err());
        assert!(Chart::new(vec![(0.0, 1.0)], vec![false], vec![0.49]).is_ok());
        assert!(Chart::new(vec![(1.0, 1.0)], vec![false], vec![0.0]).is_err());
        assert!(Chart::new(vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn periodic_axis_has_no_duplicate_endpoint() {
        let chart = Chart::torus(1).unwrap();
        let s = GridSpec::axis_samples(&chart, 0, 4);
        assert_eq!(s, vec![0.0, PI / 2.0, PI, 1.5 * PI]);
    }

    #[test]
    fn samples_stay_out_of_margins() {
        let chart = Chart::sphere(2, 0.1).unwrap();
        let grid = GridSpec::uniform(2, 7);
        let pts = grid.samples(&chart).unwrap();
        assert_eq!(pts.len(), 49);
        for p in &pts {
            chart.check_regular(p).unwrap();
        }
        let theta = GridSpec::axis_samples(&chart, 0, 7);
        assert_eq!(theta[0], 0.1);
        assert_eq!(theta[6], PI - 0.1);
        assert!((theta[3] - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn margin_points_are_rejected() {
        let chart = Chart::sphere(2, 0.2).unwrap();
        assert!(matches!(
            chart.check_regular(&[0.1, 1.0]),
            Err(Error::SingularRegion { axis: 0, .. })
        ));
        assert!(chart.check_regular(&[0.2, 7.0]).is_ok());
    }

    #[test]
    fn grid_dimension_mismatch() {
        let chart = Chart::torus(2).unwrap();
        assert!(matches!(
            GridSpec::uniform(3, 4).samples(&chart),
            Err(Error::ChartMismatch(_))
        ));
    }

    #[test]
    fn wrap_periodic() {
        let chart = Chart::torus(2).unwrap();
        let mut p = [-0.5, 7.0];
        chart.wrap(&mut p);
        assert!((p[0] - (2.0 * PI - 0.5)).abs() < 1e-15);
        assert!((p[1] - (7.0 - 2.0 * PI)).abs() < 1e-15);
    }
}
