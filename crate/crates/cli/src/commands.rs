//! One function per subcommand. Each returns the checks it certified, a
//! JSON results block and its CSV tables.

use anyhow::{bail, Context};
use rayon::prelude::*;
use serde_json::{json, Value};

use psc_core::chart::{Chart, GridSpec};
use psc_core::collar::{collar_gap, collar_table, homotopy_branch, homotopy_with, GlueContext};
use psc_core::cutoff::{verify_cutoff, DEFAULT_VERIFY_SAMPLES};
use psc_core::cylinder::closed_form_with_sign;
use psc_core::fixtures::{finite_difference, Ellipsoid};
use psc_core::stretch::{stretch_from_samples, witness_from_samples, CylinderSamples};
use psc_core::{
    boundary_restrict, collar_flow, constant_path, cylinder_metric, cylinder_scalar_closed_form, min_scalar_on_grid,
    path_distance, retract, scalar_curvature, warped_scalar_curvature, Branch, CollarCutoff, CollaredMetric, FdSteps,
    MetricField, MiddleSign, StretchOptions,
};

use crate::config::{mode_name, CollarSpec, Derivatives, Manifold, Scenario};
use crate::report::{coordinate_columns, num, nums, Check, Report, Table};

/// Command-line overrides of scenario keys.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub tol: Option<f64>,
}

struct Settings<'a> {
    scenario: &'a Scenario,
    overrides: Overrides,
}

impl Settings<'_> {
    fn grid(&self, default: usize) -> usize {
        self.overrides.grid.or(self.scenario.grid).unwrap_or(default)
    }

    fn tol(&self, default: f64) -> f64 {
        self.overrides.tol.or(self.scenario.tolerance).unwrap_or(default)
    }
}

/// Tolerance of the warped closed form against the polar-chart oracle.
const POLAR_ORACLE_TOL: f64 = 1e-5;
const RETRACT_BOUNDARY_TOL: f64 = 1e-6;
const HOMOTOPY_TOL: f64 = 1e-8;

type Expected = Box<dyn Fn(&[f64]) -> f64 + Sync>;

/// Expected scalar curvature of a built-in manifold at a chart point.
fn expected_kappa(manifold: &Manifold) -> anyhow::Result<Expected> {
    Ok(match *manifold {
        Manifold::S2Round { r } => Box::new(move |_: &[f64]| 2.0 / (r * r)),
        Manifold::Sphere { n, r } => {
            let k = (n * (n - 1)) as f64 / (r * r);
            Box::new(move |_: &[f64]| k)
        }
        Manifold::Torus { .. } => Box::new(|_: &[f64]| 0.0),
        Manifold::Ellipsoid { a, b, c } => {
            let e = Ellipsoid { a, b, c };
            Box::new(move |x: &[f64]| 2.0 * e.gauss_curvature(x[0], x[1]))
        }
        Manifold::WarpedDisk { .. } => {
            let w = manifold.torpedo()?.metric();
            Box::new(move |x: &[f64]| warped_scalar_curvature(&w, x[0]).unwrap_or(f64::NAN))
        }
    })
}

pub fn curvature(scenario: &Scenario, overrides: Overrides) -> anyhow::Result<Report> {
    let set = Settings { scenario, overrides };
    let manifold = scenario.manifold()?;
    let field = scenario.field()?;
    let default_tol = match scenario.derivatives {
        Derivatives::Analytic => 1e-6,
        Derivatives::FiniteDifference => 1e-3,
    };
    let tol = set.tol(default_tol);
    let grid = GridSpec::uniform(field.dim(), set.grid(32));
    let report = min_scalar_on_grid(&field, &grid)?;
    let expected = expected_kappa(manifold)?;
    let mut header = coordinate_columns(field.dim());
    header.extend(["kappa", "expected", "error"].map(String::from));
    let mut table = Table::new("grid.csv", header);
    let mut max_error = 0.0f64;
    for s in &report.samples {
        let want = expected(&s.point);
        let err = (s.kappa - want).abs();
        max_error = if err.is_nan() { f64::NAN } else { max_error.max(err) };
        let mut row = s.point.clone();
        row.extend([s.kappa, want, err]);
        table.push(row);
    }
    let results = json!({
        "derivatives": mode_name(field.mode()),
        "points": report.samples.len(),
        "grid": grid.points_per_axis,
        "min_kappa": num(report.min_kappa),
        "argmin": nums(&report.argmin),
        "max_kappa": num(report.max_kappa()),
        "max_error": num(max_error),
    });
    Ok(Report { checks: vec![Check::at_most("kappa-matches-expected", max_error, tol)], results, tables: vec![table] })
}

pub fn cylinder_check(scenario: &Scenario, overrides: Overrides) -> anyhow::Result<Report> {
    let set = Settings { scenario, overrides };
    let path = scenario.metric_path()?;
    let cutoff = scenario.cutoff()?;
    let tol = set.tol(1e-4);
    let n = set.grid(16);
    let stretches = scenario.stretches.clone().unwrap_or_else(|| vec![1.0, 2.0, 4.0]);
    let dim = path.dim();
    let mut header = coordinate_columns(dim);
    header.extend(["t0", "t", "kappa_oracle", "kappa_closed", "kappa_rejected"].map(String::from));
    let mut table = Table::new("grid.csv", header);
    let mut checks = Vec::new();
    let mut per_stretch = Vec::new();
    for &t0 in &stretches {
        let cyl = cylinder_metric(&path, &cutoff, t0)?;
        let points = GridSpec::uniform(dim + 1, n).samples(cyl.field().chart())?;
        let rows = points
            .par_iter()
            .map(|p| {
                let (x, t) = (&p[..dim], p[dim]);
                let oracle = scalar_curvature(cyl.field(), p)?;
                let closed = cylinder_scalar_closed_form(&path, &cutoff, t0, x, t)?;
                let rejected = closed_form_with_sign(&path, &cutoff, t0, x, t, MiddleSign::Plus)?;
                Ok([oracle, closed, rejected])
            })
            .collect::<psc_core::Result<Vec<_>>>()?;
        let (mut dev, mut wrong) = (0.0f64, 0.0f64);
        for (p, [oracle, closed, rejected]) in points.iter().zip(&rows) {
            let scale = oracle.abs().max(1.0);
            dev = dev.max((closed - oracle).abs() / scale);
            wrong = wrong.max((rejected - oracle).abs() / scale);
            let mut row = p[..dim].to_vec();
            row.extend([t0, p[dim], *oracle, *closed, *rejected]);
            table.push(row);
        }
        checks.push(Check::at_most(format!("closed-form-t0={t0}"), dev, tol));
        checks.push(Check::above(format!("rejected-sign-t0={t0}"), wrong, 10.0 * tol));
        per_stretch.push(json!({ "t0": num(t0), "max_rel_deviation": num(dev), "rejected_sign_deviation": num(wrong) }));
    }
    let results = json!({
        "path": path.name(),
        "oracle_derivatives": mode_name(cylinder_metric(&path, &cutoff, 1.0)?.field().mode()),
        "points_per_stretch": n.pow(dim as u32 + 1),
        "stretches": per_stretch,
    });
    Ok(Report { checks, results, tables: vec![table] })
}

pub fn stretch(scenario: &Scenario, overrides: Overrides) -> anyhow::Result<Report> {
    let set = Settings { scenario, overrides };
    let path = scenario.metric_path()?;
    let cutoff = scenario.cutoff()?;
    let tol = set.tol(psc_core::stretch::DEFAULT_TOLERANCE);
    let eta = scenario.eta.unwrap_or(0.05);
    let options = StretchOptions::new(GridSpec::uniform(path.dim(), set.grid(16))).with_tolerance(tol);
    let table = CylinderSamples::build(&path, &cutoff, &options)?;
    let r = stretch_from_samples(&table, tol)?;
    let mut checks = vec![
        Check::at_least("psc-above-stretch", r.certified_min_kappa, 0.0),
        Check::at_least("stretch-at-least-one", r.s, 1.0),
    ];
    let witness = if r.s_prime > 0.0 {
        let w = witness_from_samples(&table, r.s_prime, eta);
        checks.push(Check::below("witness-negative", w.as_ref().map_or(f64::NAN, |w| w.kappa), 0.0));
        w
    } else {
        None
    };
    let mut bisection = Table::with_columns("bisection.csv", &["tau", "min_kappa"]);
    let mut history = r.history.clone();
    history.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (tau, k) in history {
        bisection.push(vec![tau, k]);
    }
    let check_tau = if r.s_prime > 0.0 { r.s_prime * (1.0 + tol) } else { 1.0 };
    let mut header = coordinate_columns(path.dim());
    header.extend(["s", "u", "a", "b", "kappa"].map(String::from));
    let mut grid = Table::new("grid.csv", header);
    for s in &table.samples {
        let mut row = s.x.clone();
        row.extend([s.s, s.u, s.a, s.b, s.kappa(check_tau)]);
        grid.push(row);
    }
    let results = json!({
        "path": path.name(),
        "S_prime": num(r.s_prime),
        "S": num(r.s),
        "tolerance": num(tol),
        "exact_threshold": num(r.exact_threshold),
        "check_tau": num(check_tau),
        "certified_min_kappa": num(r.certified_min_kappa),
        "sampling_slack": num(r.sampling_slack),
        "samples": r.samples,
        "evaluations": r.history.len(),
        "witness": witness.map(|w| json!({
            "eta": num(eta),
            "t_n": num(w.t_n),
            "x": nums(&w.x),
            "tau": num(w.tau),
            "kappa": num(w.kappa),
        })),
    });
    Ok(Report { checks, results, tables: vec![bisection, grid] })
}

/// Regular interior point of a chart, used for sampling fixed directions.
fn centre(chart: &Chart) -> Vec<f64> {
    chart.ranges().iter().map(|(lo, hi)| 0.5 * (lo + hi) + 0.1 * (hi - lo)).collect()
}

pub fn torpedo(scenario: &Scenario, overrides: Overrides) -> anyhow::Result<Report> {
    let set = Settings { scenario, overrides };
    let manifold = scenario.manifold()?;
    let p = manifold.torpedo()?;
    let tol = set.tol(1e-3);
    let w = p.metric();
    let delta = p.shape.delta;
    let k = p.k as f64;
    let cap_target = k * (k - 1.0) / (delta * delta);
    let neck_target = (k - 1.0) * (k - 2.0) / (delta * delta);
    let rows = p.table(scenario.profile_samples.unwrap_or(2001))?;
    let mut profile = Table::with_columns("profile.csv", &["t", "f", "kappa"]);
    let (mut cap, mut neck) = (0.0f64, 0.0f64);
    for row in &rows {
        let [t, _, kappa] = *row;
        if t <= p.cap_end() {
            cap = cap.max((kappa - cap_target).abs());
        }
        if t >= p.neck_start() {
            neck = neck.max((kappa - neck_target).abs());
        }
        profile.push(row.to_vec());
    }
    let field = w.field()?;
    let xi = centre(field.chart());
    let n = set.grid(64);
    let mut grid = Table::with_columns("grid.csv", &["t", "kappa_closed", "kappa_oracle"]);
    let mut oracle = 0.0f64;
    for i in 0..n {
        let t = 0.02 * p.t_max + 0.96 * p.t_max * i as f64 / (n.max(2) - 1) as f64;
        let mut x = xi.clone();
        x[0] = t;
        let closed = warped_scalar_curvature(&w, t)?;
        let brute = scalar_curvature(&field, &x)?;
        oracle = oracle.max((closed - brute).abs() / closed.abs().max(1.0));
        grid.push(vec![t, closed, brute]);
    }
    let mut checks = vec![
        Check::at_most("cap-band", cap, tol),
        Check::at_most("neck-band", neck, tol),
        Check::at_most("polar-oracle", oracle, POLAR_ORACLE_TOL),
        Check::holds("smooth-center", w.center_report().is_smooth(1e-9)),
    ];
    if !p.neck_flat {
        checks.push(Check::above("psc-profile", p.min_kappa, 0.0));
    }
    let results = json!({
        "k": p.k,
        "delta": num(delta),
        "smoothing": num(p.shape.smoothing),
        "t_max": num(p.t_max),
        "cap_end": num(p.cap_end()),
        "neck_start": num(p.neck_start()),
        "cap_kappa": num(p.cap_kappa),
        "neck_kappa": num(p.neck_kappa),
        "min_kappa": num(p.min_kappa),
        "argmin": num(p.argmin),
        "neck_flat": p.neck_flat,
        "cap_deviation": num(cap),
        "neck_deviation": num(neck),
        "polar_oracle_deviation": num(oracle),
    });
    Ok(Report { checks, results, tables: vec![profile, grid] })
}

fn collared(scenario: &Scenario, h0: &MetricField, psi: &CollarCutoff) -> anyhow::Result<CollaredMetric> {
    Ok(match &scenario.collar {
        None | Some(CollarSpec::Product) => CollaredMetric::product(h0, "M"),
        Some(CollarSpec::Path { path }) => {
            let beta = path.build(scenario.manifold.as_ref())?;
            CollaredMetric::from_path(&beta, psi, "M")
        }
    })
}

fn collar_rows(file: &'static str, cm: &CollaredMetric, x: &[f64], n: usize) -> Table {
    let rows = collar_table(cm, x, n);
    let size = rows.first().map_or(0, |r| r.cross_section.len());
    let dim = (size as f64).sqrt() as usize;
    let mut header = vec!["t".to_string(), "dt_coefficient".to_string()];
    for i in 0..dim {
        for j in 0..dim {
            header.push(format!("h{i}{j}"));
        }
    }
    let mut table = Table::new(file, header);
    for r in rows {
        let mut row = vec![r.t, r.dt_coefficient];
        row.extend(r.cross_section);
        table.push(row);
    }
    table
}

pub fn retract_cmd(scenario: &Scenario, overrides: Overrides) -> anyhow::Result<Report> {
    let set = Settings { scenario, overrides };
    let h0 = scenario.manifold()?.field()?;
    let omega = scenario.metric_path()?;
    let cutoff = scenario.cutoff()?;
    let psi = CollarCutoff::new(cutoff.clone());
    let cm = collared(scenario, &h0, &psi)?;
    let grid = GridSpec::uniform(h0.dim(), set.grid(8));
    let t_samples = scenario.collar_samples.unwrap_or(40);
    let options = StretchOptions::new(grid.clone());
    let ctx = GlueContext::new(&cm, &omega, &cutoff, &options)?;
    let r = retract(&cm, &omega, &cutoff, &psi, &options)?;

    let rho = boundary_restrict(&r)?;
    let mut header = coordinate_columns(h0.dim());
    header.push("boundary_residual".into());
    let mut residuals = Table::new("grid.csv", header);
    let mut boundary = 0.0f64;
    for x in grid.samples(rho.chart())? {
        let res = (rho.value(&x) - omega.value(1.0, &x)).amax();
        boundary = boundary.max(res);
        let mut row = x.clone();
        row.push(res);
        residuals.push(row);
    }
    let mut frozen = r.interior == cm.interior;
    for x in grid.samples(r.chart())? {
        for i in 0..=25 {
            let t = -1.0 + 0.25 * i as f64 / 25.0;
            frozen &= r.cross_section(t, &x) == cm.cross_section(t, &x) && r.dt_coefficient(t) == cm.dt_coefficient(t);
        }
    }
    let (h_start, w_start) = homotopy_with(&ctx, &cm, &omega, &psi, 0.0)?;
    let start = collar_gap(&h_start, &cm, &grid, t_samples)?.max(path_distance(&w_start, &omega, &grid, 8)?);
    let (h_end, w_end) = homotopy_with(&ctx, &cm, &omega, &psi, 1.0)?;
    let end_path = constant_path(&omega.slice(1.0)?)?;
    let end = collar_gap(&h_end, &r, &grid, t_samples)?.max(path_distance(&w_end, &end_path, &grid, 8)?);
    let (lo, w_lo) = homotopy_branch(&ctx, &cm, &omega, &psi, 0.5, Branch::Lower)?;
    let (hi, w_hi) = homotopy_branch(&ctx, &cm, &omega, &psi, 0.5, Branch::Upper)?;
    let branch = collar_gap(&lo, &hi, &grid, t_samples)?.max(path_distance(&w_lo, &w_hi, &grid, 8)?);

    let x = centre(h0.chart());
    let before = collar_rows("collar_before.csv", &cm, &x, t_samples);
    let after = collar_rows("collar_after.csv", &r, &x, t_samples);
    let checks = vec![
        Check::at_most("boundary-restriction", boundary, set.overrides.tol.unwrap_or(RETRACT_BOUNDARY_TOL)),
        Check::holds("interior-unchanged", frozen),
        Check::at_most("homotopy-start", start, HOMOTOPY_TOL),
        Check::at_most("homotopy-end", end, HOMOTOPY_TOL),
        Check::at_most("homotopy-branches", branch, HOMOTOPY_TOL),
    ];
    let results = json!({
        "path": omega.name(),
        "S": num(ctx.s()),
        "S_prime": num(ctx.stretch.s_prime),
        "boundary_residual": num(boundary),
        "homotopy_start_gap": num(start),
        "homotopy_end_gap": num(end),
        "branch_gap": num(branch),
        "reference_point": nums(&x),
    });
    Ok(Report { checks, results, tables: vec![residuals, before, after] })
}

/// Every check that applies to the scenario, plus the cutoff certificate,
/// flow invariants and finite-difference convergence on the manifold.
pub fn verify(scenario: &Scenario, overrides: Overrides) -> anyhow::Result<Report> {
    let mut checks = Vec::new();
    let mut results = serde_json::Map::new();
    let mut tables = Vec::new();

    let cutoff = scenario.cutoff()?;
    let cert = match cutoff.certificate() {
        Some(c) => c.clone(),
        None => verify_cutoff(cutoff.as_ref(), DEFAULT_VERIFY_SAMPLES),
    };
    checks.push(Check::holds("cutoff/certificate", cert.passed()));
    checks.push(Check::below("cutoff/sup-derivative", cert.sup_derivative, 2.0));
    results.insert("cutoff".into(), json!({ "epsilon": num(cert.epsilon), "sup_derivative": num(cert.sup_derivative) }));

    let psi = CollarCutoff::new(cutoff.clone());
    for s in [1.0, 2.0, 5.0] {
        let flow = collar_flow(s, &psi)?;
        checks.push(Check::at_most(format!("flow/endpoint-S={s}"), (flow.phi(0.0) - s).abs() / s, 1e-6));
        let identity = (0..=50).map(|i| -1.0 + 0.25 * i as f64 / 50.0).all(|t| flow.phi(t) == t);
        checks.push(Check::holds(format!("flow/identity-band-S={s}"), identity));
    }

    let mut merge = |prefix: &str, report: Report, keep_tables: bool| {
        checks.extend(report.checks.into_iter().map(|c| c.prefixed(prefix)));
        results.insert(prefix.into(), report.results);
        if keep_tables {
            tables.extend(report.tables);
        }
    };
    if let Some(manifold) = &scenario.manifold {
        merge("curvature", curvature(scenario, overrides)?, true);
        if matches!(manifold, Manifold::WarpedDisk { .. }) {
            merge("torpedo", torpedo(scenario, overrides)?, false);
        }
    }
    if scenario.path.is_some() {
        let coarse = Overrides { grid: Some(overrides.grid.unwrap_or(8)), tol: None };
        merge("cylinder-check", cylinder_check(scenario, coarse)?, false);
        let stretch_report = stretch(scenario, overrides)?;
        merge("stretch", stretch_report, false);
        if scenario.manifold.is_some() && !matches!(scenario.manifold, Some(Manifold::WarpedDisk { .. })) {
            match retract_cmd(scenario, overrides) {
                Ok(report) => merge("retract", report, false),
                Err(e) if is_boundary_mismatch(&e) => {
                    results.insert("retract".into(), json!({ "skipped": e.to_string() }));
                }
                Err(e) => return Err(e),
            }
        }
    }
    // The polar chart of a warped disk reaches to within T_MIN of the
    // center, where difference stencils straddle the coordinate
    // singularity; convergence is only meaningful on the closed fixtures.
    let closed = !matches!(scenario.manifold, None | Some(Manifold::WarpedDisk { .. }));
    if closed && scenario.derivatives == Derivatives::Analytic {
        let (ratio, coarse, fine) = convergence_ratio(scenario, overrides)?;
        if coarse > 1e-10 {
            checks.push(Check::within("convergence/ratio", ratio, 3.5, 4.5));
        }
        results.insert("convergence".into(), json!({ "coarse": num(coarse), "fine": num(fine), "ratio": num(ratio) }));
    }
    Ok(Report { checks, results: Value::Object(results), tables })
}

fn is_boundary_mismatch(e: &anyhow::Error) -> bool {
    matches!(e.downcast_ref::<psc_core::Error>(), Some(psc_core::Error::BoundaryMismatch { .. }))
}

/// Error of the finite-difference pipeline at the default steps and at half
/// of them.
fn convergence_ratio(scenario: &Scenario, overrides: Overrides) -> anyhow::Result<(f64, f64, f64)> {
    let manifold = scenario.manifold()?;
    let g = manifold.field()?;
    let expected = expected_kappa(manifold)?;
    let n = overrides.grid.or(scenario.grid).unwrap_or(16).min(32);
    let points = GridSpec::uniform(g.dim(), n).samples(g.chart())?;
    let err = |steps: FdSteps| -> anyhow::Result<f64> {
        let fd = finite_difference(&g, steps);
        let errs = points
            .par_iter()
            .map(|p| Ok((scalar_curvature(&fd, p)? - expected(p)).abs()))
            .collect::<psc_core::Result<Vec<f64>>>()?;
        Ok(errs.into_iter().fold(0.0, f64::max))
    };
    let coarse = err(FdSteps::default())?;
    let fine = err(FdSteps::default().halved())?;
    Ok((coarse / fine, coarse, fine))
}

pub fn run(command: &str, scenario: &Scenario, overrides: Overrides) -> anyhow::Result<Report> {
    match command {
        "curvature" => curvature(scenario, overrides),
        "cylinder-check" => cylinder_check(scenario, overrides),
        "stretch" => stretch(scenario, overrides),
        "torpedo" => torpedo(scenario, overrides),
        "retract" => retract_cmd(scenario, overrides),
        "verify" => verify(scenario, overrides),
        other => bail!("unknown subcommand {other}"),
    }
    .with_context(|| format!("{command} on scenario {:?}", scenario.name))
}
