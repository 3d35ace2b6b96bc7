//! Positive scalar curvature on stretched cylinders.
//!
//! A general curvature pipeline (metric → Christoffel symbols → Riemann
//! tensor → scalar curvature) sits underneath closed-form routines for
//! interpolated cylinder metrics `α(F(t/τ)) + dt²`, the minimal psc stretch,
//! warped and torpedo disk metrics, and the collar gluing and flow pullback
//! that retracts a metric-plus-path pair onto a fixed boundary metric.

// `!(x > 0.0)` and friends are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chart;
pub mod collar;
pub mod curvature;
pub mod cutoff;
pub mod cylinder;
pub mod error;
pub mod fixtures;
pub mod frame;
pub mod linalg;
pub mod metric;
pub mod path;
pub mod stretch;
pub mod table;
pub mod warped;

pub use chart::{Chart, GridSpec};
pub use collar::{
    boundary_restrict, collar_flow, glue_omega, homotopy_branch, homotopy_h, retract, Branch, CollarCutoff, CollarData, CollaredMetric,
    FlowMap, GluedCollar,
};
pub use curvature::{
    christoffel, min_scalar_on_grid, riemann_component, scalar_curvature, ChristoffelField, CurvatureReport,
};
pub use cutoff::{make_cutoff, scale_cutoff, verify_cutoff, CutoffCertificate, CutoffFunction, Ramp, Transition};
pub use cylinder::{cylinder_metric, cylinder_scalar_closed_form, CylinderMetric, MiddleSign};
pub use error::{Error, Result};
pub use frame::{orthonormal_frame, OrthonormalFrame};
pub use metric::{ck_distance, validate_metric, DerivativeMode, FdScheme, FdSteps, Jet, MetricField, SymmetricField};
pub use path::{constant_path, eval_path, linear_path, path_distance, reparameterize_path, MetricPath};
pub use stretch::{compute_s, negativity_witness, StretchOptions, StretchResult, Witness};
pub use warped::{
    build_product_handle_metric, torpedo_profile, warped_scalar_curvature, TorpedoProfile, WarpedDiskMetric,
};
