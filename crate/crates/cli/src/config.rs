//! Scenario files: one JSON object per scenario, unknown keys rejected.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::Deserialize;

use psc_core::cutoff::{make_cutoff, CutoffFunction, DEFAULT_EPSILON};
use psc_core::fixtures::{ellipsoid_field, finite_difference, flat_torus_field, round_sphere_field};
use psc_core::path::{ellipsoid_family_path, sphere_radius_path, PathDerivatives, RadiusProfile};
use psc_core::warped::{default_smoothing, TorpedoProfile};
use psc_core::{
    constant_path, linear_path, torpedo_profile, DerivativeMode, FdSteps, MetricField, MetricPath,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown family at line {line}: {message}")]
    UnknownFamily { line: usize, message: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub manifold: Option<Manifold>,
    pub path: Option<PathSpec>,
    pub collar: Option<CollarSpec>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Points per axis.
    pub grid: Option<usize>,
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub derivatives: Derivatives,
    /// Finite-difference step, both orders.
    pub fd_step: Option<f64>,
    /// Stretches `t0` for `cylinder-check`.
    pub stretches: Option<Vec<f64>>,
    /// Witness offset below `S'`.
    pub eta: Option<f64>,
    /// Radii in `profile.csv`.
    pub profile_samples: Option<usize>,
    /// Collar coordinates sampled by `retract`.
    pub collar_samples: Option<usize>,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Derivatives {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Manifold {
    #[serde(rename = "s2-round")]
    S2Round { r: f64 },
    Sphere { n: usize, r: f64 },
    Torus { dims: usize },
    Ellipsoid { a: f64, b: f64, c: f64 },
    WarpedDisk { k: usize, delta: f64, smoothing: Option<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathSpec {
    /// `α ≡ g` for the scenario manifold.
    Constant,
    /// From the scenario manifold to `to`.
    Linear { to: Manifold },
    /// `r(u)² g_round` on the scenario sphere.
    SphereRadius { r0: f64, r1: f64 },
    OscillatingRadius {
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
    },
    EllipsoidFamily { a: f64, b: f64, c0: f64, c1: f64 },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CollarSpec {
    /// `dt² + g` on the whole collar.
    Product,
    /// `dt² + β(ψ(t))`; `β(1)` must be the scenario manifold.
    Path { path: PathSpec },
}

pub fn load(path: &Path) -> anyhow::Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).map_err(Into::into)
}

pub fn parse(text: &str) -> Result<Scenario, ConfigError> {
    serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        let line = e.line();
        if message.contains("unknown variant") {
            ConfigError::UnknownFamily { line, message }
        } else {
            ConfigError::Parse { line, message }
        }
    })
}

impl Scenario {
    pub fn cutoff(&self) -> anyhow::Result<Arc<CutoffFunction>> {
        Ok(Arc::new(make_cutoff(self.epsilon)?))
    }

    pub fn manifold(&self) -> anyhow::Result<&Manifold> {
        self.manifold.as_ref().context("scenario needs a \"manifold\"")
    }

    pub fn path_spec(&self) -> anyhow::Result<&PathSpec> {
        self.path.as_ref().context("scenario needs a \"path\"")
    }

    pub fn fd_steps(&self) -> FdSteps {
        self.fd_step.map(FdSteps::uniform).unwrap_or_default()
    }

    /// The manifold field in the configured derivative mode.
    pub fn field(&self) -> anyhow::Result<MetricField> {
        let g = self.manifold()?.field()?;
        Ok(match self.derivatives {
            Derivatives::Analytic => g,
            Derivatives::FiniteDifference => finite_difference(&g, self.fd_steps()),
        })
    }

    pub fn metric_path(&self) -> anyhow::Result<MetricPath> {
        let path = self.path_spec()?.build(self.manifold.as_ref())?;
        Ok(match self.derivatives {
            Derivatives::Analytic => path,
            Derivatives::FiniteDifference => {
                path.with_derivatives(PathDerivatives::FiniteDifference(self.fd_step.unwrap_or(1e-3)))
            }
        })
    }
}

impl Manifold {
    pub fn field(&self) -> anyhow::Result<MetricField> {
        Ok(match *self {
            Manifold::S2Round { r } => round_sphere_field(2, r)?,
            Manifold::Sphere { n, r } => round_sphere_field(n, r)?,
            Manifold::Torus { dims } => flat_torus_field(dims)?,
            Manifold::Ellipsoid { a, b, c } => ellipsoid_field(a, b, c)?,
            Manifold::WarpedDisk { .. } => self.torpedo()?.metric().field()?,
        })
    }

    pub fn torpedo(&self) -> anyhow::Result<TorpedoProfile> {
        match *self {
            Manifold::WarpedDisk { k, delta, smoothing } => {
                Ok(torpedo_profile(k, delta, smoothing.unwrap_or_else(|| default_smoothing(delta)))?)
            }
            _ => bail!("torpedo needs a \"warped-disk\" manifold"),
        }
    }

    /// Dimension and radius of a round sphere manifold.
    fn sphere(&self) -> Option<(usize, f64)> {
        match *self {
            Manifold::S2Round { r } => Some((2, r)),
            Manifold::Sphere { n, r } => Some((n, r)),
            _ => None,
        }
    }
}

impl PathSpec {
    pub fn build(&self, manifold: Option<&Manifold>) -> anyhow::Result<MetricPath> {
        let base = || manifold.context("this path family needs a \"manifold\"");
        let sphere_dim = || -> anyhow::Result<usize> {
            match manifold {
                None => Ok(2),
                Some(m) => m.sphere().map(|(n, _)| n).context("radius paths need a round sphere manifold"),
            }
        };
        Ok(match self {
            PathSpec::Constant => constant_path(&base()?.field()?)?,
            PathSpec::Linear { to } => linear_path(&base()?.field()?, &to.field()?)?,
            PathSpec::SphereRadius { r0, r1 } => {
                sphere_radius_path(sphere_dim()?, RadiusProfile::Linear { r0: *r0, r1: *r1 })?
            }
            PathSpec::OscillatingRadius { amplitude, frequency } => sphere_radius_path(
                sphere_dim()?,
                RadiusProfile::Oscillating { amplitude: *amplitude, frequency: *frequency },
            )?,
            PathSpec::EllipsoidFamily { a, b, c0, c1 } => ellipsoid_family_path(*a, *b, *c0, *c1)?,
        })
    }
}

/// Derivative mode actually used by a field, for reports.
pub fn mode_name(mode: DerivativeMode) -> &'static str {
    match mode {
        DerivativeMode::Analytic => "analytic",
        DerivativeMode::FiniteDifference(_) => "finite-difference",
    }
}
