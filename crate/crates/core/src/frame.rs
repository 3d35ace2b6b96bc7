use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::metric::MetricField;

/// Frame `E` at a point with `Eᵀ g E = I`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrthonormalFrame {
    pub base_point: Vec<f64>,
    #[serde(serialize_with = "serialize_matrix")]
    pub e: DMatrix<f64>,
}

impl OrthonormalFrame {
    /// Symmetric inverse square root of `g`.
    pub fn from_metric(g: &DMatrix<f64>, base_point: &[f64]) -> Result<Self> {
        let e = linalg::inverse_sqrt(g).ok_or_else(|| Error::NonSpd {
            point: base_point.to_vec(),
            min_eigenvalue: linalg::min_eigenvalue(g),
        })?;
        Ok(Self { base_point: base_point.to_vec(), e })
    }

    /// Components of a (0,2)-tensor in this frame.
    pub fn transform(&self, t: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::congruence(&self.e, t)
    }

    /// `max |Eᵀ g E − I|` entrywise.
    pub fn defect(&self, g: &DMatrix<f64>) -> f64 {
        let n = g.nrows();
        (self.transform(g) - DMatrix::<f64>::identity(n, n)).amax()
    }
}

pub fn orthonormal_frame(field: &MetricField, point: &[f64]) -> Result<OrthonormalFrame> {
    OrthonormalFrame::from_metric(&field.value(point), point)
}

fn serialize_matrix<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for row in m.row_iter() {
        seq.serialize_element(&row.iter().cloned().collect::<Vec<f64>>())?;
    }
    seq.end()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(g: DMatrix<f64>) -> OrthonormalFrame {
        OrthonormalFrame::from_metric(&g, &[0.0, 0.0]).unwrap()
    }

    #[test]
    fn identity_frame() {
        let f = frame(DMatrix::identity(2, 2));
        assert_eq!(f.e, DMatrix::identity(2, 2));
    }

    #[test]
    fn diagonal_frame() {
        let f = frame(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 9.0]));
        let want = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0 / 3.0]);
        assert!((f.e - want).amax() < 1e-15);
    }

    #[test]
    fn coupled_frame() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let f = frame(g.clone());
        // eigenvalues 3 and 1 on (1,1)/√2 and (1,−1)/√2
        let a = 0.5 * (1.0 / 3f64.sqrt() + 1.0);
        let b = 0.5 * (1.0 / 3f64.sqrt() - 1.0);
        let want = DMatrix::from_row_slice(2, 2, &[a, b, b, a]);
        assert!((&f.e - want).amax() < 1e-14);
        assert!(f.defect(&g) < 1e-14);
    }

    #[test]
    fn indefinite_is_rejected() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(OrthonormalFrame::from_metric(&g, &[0.1, 0.2]), Err(Error::NonSpd { .. })));
    }

    fn spd(n: usize, angles: &[f64], log_eigs: &[f64]) -> (DMatrix<f64>, f64) {
        let mut q = DMatrix::<f64>::identity(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let (s, c) = angles[k % angles.len()].sin_cos();
                let mut r = DMatrix::<f64>::identity(n, n);
                r[(i, i)] = c;
                r[(j, j)] = c;
                r[(i, j)] = -s;
                r[(j, i)] = s;
                q *= r;
                k += 1;
            }
        }
        let eigs: Vec<f64> = log_eigs[..n].iter().map(|l| 10f64.powf(*l)).collect();
        let cond = eigs.iter().cloned().fold(0.0, f64::max) / eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let g = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(eigs)) * q.transpose();
        (linalg::symmetrize(&g), cond)
    }

    proptest! {
        // The defect is measured in double precision, so its floor is about
        // ε·cond(g). Well-conditioned inputs reach 1e-12.
        #[test]
        fn frame_defect_tracks_condition(
            n in 2usize..5,
            angles in prop::collection::vec(0.0..std::f64::consts::TAU, 6),
            log_eigs in prop::collection::vec(-4.0..4.0f64, 4),
        ) {
            let (g, cond) = spd(n, &angles, &log_eigs);
            let f = OrthonormalFrame::from_metric(&g, &[0.0]).unwrap();
            let d = f.defect(&g);
            prop_assert!(d <= 8.0 * n as f64 * f64::EPSILON * cond.max(1.0), "defect {d} cond {cond}");
            if cond <= 1e3 {
                prop_assert!(d <= 1e-12);
            }
        }
    }
}
