//! The orchestrated verification suites: every pointwise identity with an
//! independent oracle gates the run; quantities whose derivations rest on
//! hypotheses the configuration cannot certify (tangency of the conformal
//! field, harmonicity) are emitted report-only with explicit flags.

use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::Rng;

use csl_core::ambient::{
    curvature_direct, curvature_via_transform, riemann_max_abs, riemann_max_diff, ConformalFactor,
};
use csl_core::catalog;
use csl_core::expr::parse_expect;
use csl_core::flow::{project_to_spectral, run_flow, FlowConfig};
use csl_core::jet::Scalar;
use csl_core::parallel::ExecMode;
use csl_core::quadrature::{
    eval_nodes, euler_characteristic_estimate, functional_value, gauss_bonnet_check,
    hessian_symmetry_identity, integrate, minimality_integral, minkowski_identity, Integrand,
    QuadratureGrid,
};
use csl_core::sampling::{random_ambient_field, random_periodic_chart_expr, rng_for};
use csl_core::surface::{
    codazzi_residual_at, omega_sharp_frame_trace, omega_sharp_normal_trace, surface_at,
    ClosedSurface,
};
use csl_core::variation::{
    compare_against_fd, delta_area_element_analytic, delta_eigenvalue_analytic,
    delta_gauss_curvature_analytic, delta_metric_analytic, fd_delta, mean_el_residual_at,
    speed_weighted_integral, willmore_el_residual_at, FdQuantity, NormalVariation, SpeedWeighted,
    Verdict,
};

use crate::config::RunConfig;
use crate::report::{CheckResult, CheckVerdict, SuiteReport, SuiteTotals};

pub const CONVENTIONS: [&str; 4] = [
    "curvature: R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z",
    "curvature transformation quarter-term carries a minus sign, fixed by the direct-curvature cross oracle",
    "shape operator A = -nabla N with inward catalog normals (round sphere positive)",
    "eigenvalue-variation curvature term g(R(e_i,N)N,e_i), fixed by the finite-difference harness",
];

struct SuiteCtx {
    config: RunConfig,
    surfaces: Vec<(String, Arc<ClosedSurface>)>,
    factors: Vec<(String, ConformalFactor)>,
    checks: Vec<CheckResult>,
}

impl SuiteCtx {
    fn push(&mut self, mut check: CheckResult, started: Instant) {
        if self.config.include_timings {
            check.wall_clock_s = Some(started.elapsed().as_secs_f64());
        }
        self.checks.push(check);
    }

    fn tol(&self, name: &str, default: f64) -> f64 {
        self.config.tolerance(name, default)
    }

    fn grid_for(&self, surface: &ClosedSurface) -> QuadratureGrid {
        QuadratureGrid::for_surface(surface, self.config.grid.nu, self.config.grid.nv)
    }

    /// Spectrally accurate identity integrals don't need the full grid.
    fn identity_grid_for(&self, surface: &ClosedSurface) -> QuadratureGrid {
        QuadratureGrid::for_surface(
            surface,
            self.config.grid.nu.min(64),
            self.config.grid.nv.min(64),
        )
    }
}

/// The fixed tangent configuration used for tangency-dependent checks.
fn tangent_pair() -> (Arc<ClosedSurface>, ConformalFactor) {
    (
        Arc::new(catalog::torus(2.0, 0.5)),
        catalog::factor_azimuthal(0.4),
    )
}

pub fn known_suites() -> &'static [&'static str] {
    &["ambient", "surface", "integral", "variation", "flow"]
}

/// Run the configured suites and assemble the report. The process exit code
/// contract is: zero iff no check fails.
pub fn run_suite(config: &RunConfig) -> Result<SuiteReport> {
    for name in &config.suites {
        if !known_suites().contains(&name.as_str()) {
            bail!(
                "unknown suite `{name}` (available: {})",
                known_suites().join(", ")
            );
        }
    }
    let mut surfaces = Vec::new();
    for spec in &config.surfaces {
        let s = spec.build().context("building surface from config")?;
        surfaces.push((s.name.clone(), Arc::new(s)));
    }
    let mut factors = Vec::new();
    for spec in &config.factors {
        factors.push((spec.label(), spec.build().context("building factor")?));
    }
    let mut ctx = SuiteCtx {
        config: config.clone(),
        surfaces,
        factors,
        checks: Vec::new(),
    };
    let started = Instant::now();
    for suite in &config.suites {
        match suite.as_str() {
            "ambient" => ambient_suite(&mut ctx)?,
            "surface" => surface_suite(&mut ctx)?,
            "integral" => integral_suite(&mut ctx)?,
            "variation" => variation_suite(&mut ctx)?,
            "flow" => flow_suite(&mut ctx)?,
            _ => unreachable!(),
        }
    }
    let mut totals = SuiteTotals::default();
    for c in &ctx.checks {
        match c.verdict {
            CheckVerdict::Pass => totals.pass += 1,
            CheckVerdict::Fail => totals.fail += 1,
            CheckVerdict::ReportOnly => totals.report_only += 1,
        }
    }
    Ok(SuiteReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(),
        config: config.clone(),
        totals,
        checks: ctx.checks,
        wall_clock_s: config
            .include_timings
            .then(|| started.elapsed().as_secs_f64()),
    })
}

fn sample_nodes(surface: &ClosedSurface, n: usize) -> Vec<[f64; 2]> {
    let [ur, vr] = surface.domain;
    (0..n)
        .map(|i| {
            let fu = (i as f64 + 0.5) / n as f64;
            let fv = ((i * 7 + 3) % n) as f64 / n as f64;
            [
                ur[0] + fu * (ur[1] - ur[0]),
                vr[0] + (0.06 + 0.88 * fv) * (vr[1] - vr[0]),
            ]
        })
        .collect()
}

fn ambient_suite(ctx: &mut SuiteCtx) -> Result<()> {
    // curvature transformation law against the direct route
    for (name, factor) in catalog::standard_factors() {
        let t0 = Instant::now();
        let mut rng = rng_for(ctx.config.seed, &format!("curvature/{name}"));
        let mut worst = 0.0f64;
        for _ in 0..200 {
            let p = std::array::from_fn(|_| rng.random_range(-1.4..1.4));
            let direct = curvature_direct(&factor, p)?;
            let transform = curvature_via_transform(&factor, p)?;
            let scale = riemann_max_abs(&direct).max(1e-30);
            let rel = riemann_max_diff(&direct, &transform) / scale;
            worst = worst.max(if scale < 1e-14 {
                riemann_max_diff(&direct, &transform)
            } else {
                rel
            });
        }
        let tol = ctx.tol("curvature_transform", 1e-9);
        ctx.push(
            CheckResult::gated("curvature_transform", format!("factor {name}"), worst, 0.0, tol),
            t0,
        );
    }

    // harmonic generators stay harmonic on every configured surface
    let combos: Vec<(String, Arc<ClosedSurface>, String, ConformalFactor)> = ctx
        .surfaces
        .iter()
        .flat_map(|(sn, s)| {
            ctx.factors
                .iter()
                .map(move |(fn_, f)| (sn.clone(), s.clone(), fn_.clone(), f.clone()))
        })
        .collect();
    for (sname, surface, fname, factor) in &combos {
        if !factor.harmonic_intent() {
            continue;
        }
        let t0 = Instant::now();
        let grid = ctx.grid_for(surface);
        let values = eval_nodes(surface, factor, &grid, 2, ExecMode::Parallel, |pt| {
            Ok(pt.ambient_values.laplacian_sigma().abs())
        })?;
        let sup = values.iter().copied().fold(0.0, f64::max);
        let tol = ctx.tol("harmonicity", 1e-9);
        ctx.push(
            CheckResult::gated("harmonicity", format!("{sname} x {fname}"), sup, 0.0, tol),
            t0,
        );
    }

    // ambient divergence of the conformal field equals the curved Laplacian
    // of sigma (frame trace + normal trace), validating the trace plumbing
    for (sname, surface, fname, factor) in &combos {
        let t0 = Instant::now();
        let mut worst = 0.0f64;
        for uv in sample_nodes(surface, 12) {
            let pt = surface_at(surface, factor, uv, 3)?;
            let total = omega_sharp_frame_trace(&pt) + omega_sharp_normal_trace(&pt);
            let lap = pt.ambient_values.laplacian_sigma();
            worst = worst.max((total - lap).abs());
        }
        let tol = ctx.tol("omega_divergence_consistency", 1e-9);
        ctx.push(
            CheckResult::gated(
                "omega_divergence_consistency",
                format!("{sname} x {fname}"),
                worst,
                0.0,
                tol,
            ),
            t0,
        );
    }

    // sectional curvature from the transformation-trace closed form
    for (sname, surface, fname, factor) in &combos {
        let t0 = Instant::now();
        let mut worst = 0.0f64;
        for uv in sample_nodes(surface, 12) {
            let pt = surface_at(surface, factor, uv, 3)?;
            let trace = omega_sharp_frame_trace(&pt);
            let w1 = pt.omega_apply(&pt.principal_directions[0]);
            let w2 = pt.omega_apply(&pt.principal_directions[1]);
            let predicted =
                0.25 * pt.omega_sharp_norm_sq - 0.5 * trace - 0.25 * (w1 * w1 + w2 * w2);
            worst = worst.max((pt.ambient_sectional - predicted).abs());
        }
        let tol = ctx.tol("sectional_trace_identity", 1e-8);
        ctx.push(
            CheckResult::gated(
                "sectional_trace_identity",
                format!("{sname} x {fname}"),
                worst,
                0.0,
                tol,
            ),
            t0,
        );
    }
    Ok(())
}

fn surface_suite(ctx: &mut SuiteCtx) -> Result<()> {
    let combos: Vec<(String, Arc<ClosedSurface>, String, ConformalFactor)> = ctx
        .surfaces
        .iter()
        .flat_map(|(sn, s)| {
            ctx.factors
                .iter()
                .map(move |(fn_, f)| (sn.clone(), s.clone(), fn_.clone(), f.clone()))
        })
        .collect();

    // Gauss equation: intrinsic K against ambient sectional + extrinsic
    for (sname, surface, fname, factor) in &combos {
        let t0 = Instant::now();
        let grid = ctx.grid_for(surface);
        let values = eval_nodes(surface, factor, &grid, 3, ExecMode::Parallel, |pt| {
            Ok((pt.gauss_intrinsic - pt.ambient_sectional - pt.gauss_extrinsic).abs())
        })?;
        let sup = values.iter().copied().fold(0.0, f64::max);
        let tol = ctx.tol("gauss_equation", 1e-8);
        ctx.push(
            CheckResult::gated("gauss_equation", format!("{sname} x {fname}"), sup, 0.0, tol),
            t0,
        );
    }

    // principal frame quality
    for (sname, surface, fname, factor) in &combos {
        let t0 = Instant::now();
        let mut worst = 0.0f64;
        for uv in sample_nodes(surface, 10) {
            let pt = surface_at(surface, factor, uv, 2)?;
            for i in 0..2 {
                let ae = pt.shape_apply(&pt.principal_directions[i]);
                let mut diff = [0.0; 3];
                for k in 0..3 {
                    diff[k] = ae[k] - pt.principal_curvatures[i] * pt.principal_directions[i][k];
                }
                worst = worst.max(pt.metric_dot(&diff, &diff).sqrt());
            }
        }
        let tol = ctx.tol("principal_eigen", 1e-9);
        ctx.push(
            CheckResult::gated("principal_eigen", format!("{sname} x {fname}"), worst, 0.0, tol),
            t0,
        );
    }

    // orientation flip maps (A, H) -> (-A, -H) and fixes K
    for (sname, surface, fname, factor) in combos.iter().take(4) {
        let t0 = Instant::now();
        let flipped = (**surface).clone().flipped();
        let mut worst = 0.0f64;
        for uv in sample_nodes(surface, 6) {
            let a = surface_at(surface, factor, uv, 3)?;
            let b = surface_at(&flipped, factor, uv, 3)?;
            worst = worst.max((a.mean_curvature + b.mean_curvature).abs());
            worst = worst.max((a.gauss_intrinsic - b.gauss_intrinsic).abs());
            worst = worst.max((a.principal_curvatures[0] + b.principal_curvatures[1]).abs());
        }
        let tol = ctx.tol("orientation_flip", 1e-9);
        ctx.push(
            CheckResult::gated("orientation_flip", format!("{sname} x {fname}"), worst, 0.0, tol),
            t0,
        );
    }

    // conformal Codazzi relation on the tangent pair and in flat space
    let (torus, azimuthal) = tangent_pair();
    for (fname, factor) in [
        ("zero".to_string(), catalog::factor_zero()),
        ("azimuthal(0.4)".to_string(), azimuthal.clone()),
    ] {
        let t0 = Instant::now();
        let mut rng = rng_for(ctx.config.seed, &format!("codazzi/{fname}"));
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let uv = [
                rng.random_range(0.0..std::f64::consts::TAU),
                rng.random_range(0.0..std::f64::consts::TAU),
            ];
            let pt = surface_at(&torus, &factor, uv, 3)?;
            let mut rv = || [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let (x, y, z) = (rv(), rv(), rv());
            worst = worst.max(codazzi_residual_at(&pt, x, y, z));
        }
        let tol = ctx.tol("codazzi", 1e-8);
        ctx.push(
            CheckResult::gated("codazzi", format!("torus(2,0.5) x {fname}"), worst, 0.0, tol),
            t0,
        );
    }

    // tangency of the azimuthal pair
    let t0 = Instant::now();
    let grid = ctx.identity_grid_for(&torus);
    let values = eval_nodes(&torus, &azimuthal, &grid, 2, ExecMode::Parallel, |pt| {
        Ok(pt.tangency_residual)
    })?;
    let sup = values.iter().copied().fold(0.0, f64::max);
    ctx.push(
        CheckResult::gated(
            "tangency_residual",
            "torus(2,0.5) x azimuthal(0.4)",
            sup,
            0.0,
            ctx.tol("tangency_residual", 1e-10),
        ),
        t0,
    );
    Ok(())
}

fn integral_suite(ctx: &mut SuiteCtx) -> Result<()> {
    let combos: Vec<(String, Arc<ClosedSurface>, String, ConformalFactor)> = ctx
        .surfaces
        .iter()
        .flat_map(|(sn, s)| {
            ctx.factors
                .iter()
                .map(move |(fn_, f)| (sn.clone(), s.clone(), fn_.clone(), f.clone()))
        })
        .collect();

    // Gauss-Bonnet with conformal ambient metrics
    for (sname, surface, fname, factor) in &combos {
        let t0 = Instant::now();
        let grid = ctx.grid_for(surface);
        let gb = gauss_bonnet_check(surface, factor, &grid)?;
        let expected = 2.0 * std::f64::consts::PI * gb.chi_expected;
        let tol = ctx.tol("gauss_bonnet", 1e-6);
        ctx.push(
            CheckResult::gated(
                "gauss_bonnet",
                format!("{sname} x {fname}"),
                gb.total_curvature.value,
                expected,
                tol,
            ),
            t0,
        );
    }

    // weighted-divergence identity; pass-gated only where the tangency
    // hypothesis is certified (flat factor or azimuthal on revolution)
    let (torus, azimuthal) = tangent_pair();
    let torus_grid = ctx.identity_grid_for(&torus);
    let factor_set: Vec<(String, ConformalFactor, bool)> = vec![
        ("zero".into(), catalog::factor_zero(), true),
        ("azimuthal(0.4)".into(), azimuthal.clone(), true),
        (
            "2ln(1+0.2x)".into(),
            ConformalFactor::harmonic_from_potential(parse_expect("1 + 0.2*x")),
            false,
        ),
    ];
    for (fname, factor, tangent_certified) in &factor_set {
        let mut rng = rng_for(ctx.config.seed, &format!("minkowski/{fname}"));
        for trial in 0..3 {
            let t0 = Instant::now();
            let field = [
                random_ambient_field(&mut rng),
                random_ambient_field(&mut rng),
                random_ambient_field(&mut rng),
            ];
            let rep = minkowski_identity(&torus, factor, &field, &torus_grid)?;
            let tol = ctx.tol("minkowski_identity", 1e-6);
            let context = format!("torus(2,0.5) x {fname}, field {trial}");
            if *tangent_certified {
                ctx.push(
                    CheckResult::gated("minkowski_identity", context.clone(), rep.residual, 0.0, tol),
                    t0,
                );
            } else {
                ctx.push(
                    CheckResult::report_only("minkowski_identity", context.clone(), rep.residual, 0.0)
                        .with_flags(vec!["tangency not certified".into()]),
                    t0,
                );
            }
            let t1 = Instant::now();
            ctx.push(
                CheckResult::gated(
                    "minkowski_divergence_oracle",
                    context.clone(),
                    rep.oracle_residual,
                    0.0,
                    ctx.tol("minkowski_divergence_oracle", 1e-7),
                ),
                t1,
            );
            let t2 = Instant::now();
            ctx.push(
                CheckResult::gated(
                    "minkowski_general_form",
                    context,
                    rep.general_residual,
                    0.0,
                    ctx.tol("minkowski_general_form", 1e-6),
                ),
                t2,
            );
        }
    }

    // Hessian-weighted symmetry identity
    for (fname, factor, tangent_certified) in &factor_set {
        let mut rng = rng_for(ctx.config.seed, &format!("hessian_symmetry/{fname}"));
        for trial in 0..3 {
            let t0 = Instant::now();
            let f = random_periodic_chart_expr(&mut rng, 2);
            let g = random_periodic_chart_expr(&mut rng, 2);
            let rep = hessian_symmetry_identity(&torus, factor, &f, &g, &torus_grid)?;
            let context = format!("torus(2,0.5) x {fname}, pair {trial}");
            if *tangent_certified {
                ctx.push(
                    CheckResult::gated(
                        "hessian_symmetry",
                        context,
                        rep.residual,
                        0.0,
                        ctx.tol("hessian_symmetry", 1e-6),
                    ),
                    t0,
                );
            } else {
                ctx.push(
                    CheckResult::report_only("hessian_symmetry", context, rep.residual, 0.0)
                        .with_flags(vec!["tangency not certified".into()]),
                    t0,
                );
            }
        }
    }

    // report-only global quantities
    for (sname, surface, fname, factor) in &combos {
        let t0 = Instant::now();
        let grid = ctx.identity_grid_for(surface);
        let mixed = minimality_integral(surface, factor, &grid)?;
        ctx.push(
            CheckResult::report_only(
                "minimality_integral",
                format!("{sname} x {fname}"),
                mixed,
                0.0,
            )
            .with_flags(vec![
                "criticality and tangency hypotheses not certified".into()
            ]),
            t0,
        );

        let t1 = Instant::now();
        let est = euler_characteristic_estimate(surface, factor, &grid)?;
        let gb = gauss_bonnet_check(surface, factor, &grid)?;
        ctx.push(
            CheckResult::report_only(
                "euler_characteristic_estimate",
                format!("{sname} x {fname}"),
                est,
                gb.chi_implied,
            )
            .with_flags(vec![
                "mean-curvature criticality hypothesis not certified".into()
            ]),
            t1,
        );

        let t2 = Instant::now();
        let stats = integrate(surface, factor, Integrand::MeanElResidual, &grid)?;
        ctx.push(
            CheckResult::report_only(
                "mean_el_residual_field",
                format!("{sname} x {fname} (integral; extrema {:.3e}..{:.3e})",
                    stats.integrand_min, stats.integrand_max),
                stats.value,
                0.0,
            )
            .with_flags(vec!["criticality hypothesis not certified".into()]),
            t2,
        );
    }

    // tangent-frame balance quantities on the tangent pair
    let t0 = Instant::now();
    let values = eval_nodes(&torus, &azimuthal, &torus_grid, 3, ExecMode::Parallel, |pt| {
        let w1 = pt.omega_apply(&pt.principal_directions[0]);
        let w2 = pt.omega_apply(&pt.principal_directions[1]);
        Ok((w1 * w1 - w2 * w2).abs())
    })?;
    let sup = values.iter().copied().fold(0.0, f64::max);
    ctx.push(
        CheckResult::report_only(
            "principal_frame_omega_balance",
            "torus(2,0.5) x azimuthal(0.4)",
            sup,
            0.0,
        )
        .with_flags(vec![
            "frame balance holds only for frames bisecting the conformal field".into(),
        ]),
        t0,
    );
    let t1 = Instant::now();
    let values = eval_nodes(&torus, &azimuthal, &torus_grid, 3, ExecMode::Parallel, |pt| {
        let closed_form = 0.25 * pt.omega_sharp_norm_sq - 0.5 * omega_sharp_frame_trace(pt);
        Ok((pt.ambient_sectional - closed_form).abs())
    })?;
    let sup = values.iter().copied().fold(0.0, f64::max);
    ctx.push(
        CheckResult::report_only(
            "sectional_closed_form_tangent",
            "torus(2,0.5) x azimuthal(0.4)",
            sup,
            0.0,
        )
        .with_flags(vec![
            "closed form omits the principal-frame omega terms".into(),
        ]),
        t1,
    );
    Ok(())
}

fn variation_suite(ctx: &mut SuiteCtx) -> Result<()> {
    let torus = Arc::new(catalog::torus(2.0, 0.5));
    let factor_set: Vec<(String, ConformalFactor)> = vec![
        ("zero".into(), catalog::factor_zero()),
        ("linear_harmonic(0.3)".into(), catalog::factor_linear_harmonic(0.3)),
        (
            "point_source".into(),
            catalog::factor_point_source([3.0, 0.0, 0.0]),
        ),
    ];
    let variations = [
        NormalVariation::chart(parse_expect("sin(u)*cos(v)")),
        NormalVariation::ambient(parse_expect("0.4*x - 0.2*y*z + 0.3")),
    ];
    let nodes = [[0.8, 1.0], [2.4, 3.9], [5.9, 2.2], [1.3, 5.1]];

    // pointwise delta formulas against the finite-difference oracle
    for (fname, factor) in &factor_set {
        for (vi, variation) in variations.iter().enumerate() {
            let t0 = Instant::now();
            let mut worst = 0.0f64;
            for &uv in &nodes {
                let pt = surface_at(&torus, factor, uv, 3)?;
                for branch in 0..2 {
                    let analytic = delta_eigenvalue_analytic(&pt, variation, branch)?;
                    let q = if branch == 0 {
                        FdQuantity::Lambda1At(uv)
                    } else {
                        FdQuantity::Lambda2At(uv)
                    };
                    let fd = fd_delta(&torus, factor, variation, q)?;
                    let rep = compare_against_fd("delta_lambda", analytic, &fd, true, vec![]);
                    worst = worst.max(rep.rel_discrepancy);
                }
            }
            ctx.push(
                CheckResult::gated(
                    "delta_eigenvalue_fd",
                    format!("torus x {fname}, variation {vi}"),
                    worst,
                    0.0,
                    ctx.tol("delta_eigenvalue_fd", 1e-6),
                ),
                t0,
            );

            let t1 = Instant::now();
            let mut worst = 0.0f64;
            for &uv in &nodes {
                let pt = surface_at(&torus, factor, uv, 2)?;
                let analytic = delta_area_element_analytic(&pt, variation)?;
                let fd = fd_delta(&torus, factor, variation, FdQuantity::AreaElementAt(uv))?;
                let rep = compare_against_fd("delta_area_element", analytic, &fd, true, vec![]);
                worst = worst.max(rep.rel_discrepancy);
            }
            ctx.push(
                CheckResult::gated(
                    "delta_area_element_fd",
                    format!("torus x {fname}, variation {vi}"),
                    worst,
                    0.0,
                    ctx.tol("delta_area_element_fd", 1e-6),
                ),
                t1,
            );

            let t2 = Instant::now();
            let mut worst = 0.0f64;
            for &uv in &nodes[..2] {
                let pt = surface_at(&torus, factor, uv, 2)?;
                for (a, b) in [(0, 0), (0, 1), (1, 1)] {
                    let x = if a == 0 { pt.tangent_u } else { pt.tangent_v };
                    let y = if b == 0 { pt.tangent_u } else { pt.tangent_v };
                    let analytic = delta_metric_analytic(&pt, variation, &x, &y)?;
                    let fd = fd_delta(
                        &torus,
                        factor,
                        variation,
                        FdQuantity::MetricComponentAt(uv, a, b),
                    )?;
                    let rep = compare_against_fd("delta_metric", analytic, &fd, true, vec![]);
                    worst = worst.max(rep.rel_discrepancy);
                }
            }
            ctx.push(
                CheckResult::gated(
                    "delta_metric_fd",
                    format!("torus x {fname}, variation {vi}"),
                    worst,
                    0.0,
                    ctx.tol("delta_metric_fd", 1e-6),
                ),
                t2,
            );
        }
    }

    // variational Gauss-Bonnet: the total curvature is stationary under
    // every normal variation
    let sphere = Arc::new(catalog::sphere(1.0, [0.0; 3]));
    for (sname, surface) in [("sphere", &sphere), ("torus", &torus)] {
        for (fname, factor) in &factor_set[1..] {
            let t0 = Instant::now();
            let mut rng = rng_for(ctx.config.seed, &format!("vgb/{sname}/{fname}"));
            let mut worst = 0.0f64;
            for _ in 0..2 {
                let variation = NormalVariation::ambient(random_ambient_field(&mut rng));
                let fd = fd_delta(
                    surface,
                    factor,
                    &variation,
                    FdQuantity::Functional(Integrand::GaussIntrinsic, (48, 48)),
                )?;
                worst = worst.max(fd.value.abs());
            }
            ctx.push(
                CheckResult::gated(
                    "variational_gauss_bonnet",
                    format!("{sname} x {fname}"),
                    worst,
                    0.0,
                    ctx.tol("variational_gauss_bonnet", 1e-6),
                ),
                t0,
            );
        }
    }

    // Gauss-curvature variation: asserted flat, reported on the tangent pair
    let t0 = Instant::now();
    let flat = catalog::factor_zero();
    let variation = NormalVariation::chart(parse_expect("sin(u)*cos(v) + 0.2*cos(u)"));
    let mut worst = 0.0f64;
    for &uv in &nodes[..3] {
        let pt = surface_at(&torus, &flat, uv, 3)?;
        let rep = delta_gauss_curvature_analytic(&pt, &variation)?;
        let fd = fd_delta(&torus, &flat, &variation, FdQuantity::GaussIntrinsicAt(uv))?;
        let cmp = compare_against_fd("delta_gauss", rep.paper, &fd, true, vec![]);
        worst = worst.max(cmp.rel_discrepancy);
    }
    ctx.push(
        CheckResult::gated(
            "delta_gauss_fd_flat",
            "torus x zero",
            worst,
            0.0,
            ctx.tol("delta_gauss_fd_flat", 1e-6),
        ),
        t0,
    );
    let (torus_t, azimuthal) = tangent_pair();
    let t1 = Instant::now();
    let uv = [1.1, 2.3];
    let pt = surface_at(&torus_t, &azimuthal, uv, 3)?;
    let rep = delta_gauss_curvature_analytic(&pt, &variation)?;
    let fd = fd_delta(&torus_t, &azimuthal, &variation, FdQuantity::GaussIntrinsicAt(uv))?;
    ctx.push(
        CheckResult::report_only(
            "delta_gauss_tangent_pair",
            format!("torus x azimuthal @ {uv:?} (chain-rule alt {:.6e})", rep.chain_rule_alt),
            rep.paper,
            fd.value,
        )
        .with_flags(vec![
            "harmonicity hypothesis not satisfied by the azimuthal factor".into(),
            "delta omega_sharp reading: f nabla_N omega_sharp".into(),
        ]),
        t1,
    );

    // Willmore consistency
    let t0 = Instant::now();
    let grid = ctx.identity_grid_for(&torus);
    let mut rng = rng_for(ctx.config.seed, "willmore_consistency");
    let mut worst = 0.0f64;
    for _ in 0..2 {
        let variation = NormalVariation::chart(random_periodic_chart_expr(&mut rng, 2));
        let analytic =
            speed_weighted_integral(&torus, &flat, &variation, &grid, SpeedWeighted::WillmoreOperator)?;
        let fd = fd_delta(
            &torus,
            &flat,
            &variation,
            FdQuantity::Functional(Integrand::MeanCurvatureSq, (grid.resolution.0, grid.resolution.1)),
        )?;
        let rep = compare_against_fd("willmore_consistency", analytic, &fd, true, vec![]);
        worst = worst.max(rep.rel_discrepancy);
    }
    ctx.push(
        CheckResult::gated(
            "willmore_consistency",
            "torus x zero",
            worst,
            0.0,
            ctx.tol("willmore_consistency", 1e-6),
        ),
        t0,
    );

    // Willmore operator magnitudes on the classical surfaces
    let t0 = Instant::now();
    let mut sup = 0.0f64;
    for uv in sample_nodes(&sphere, 10) {
        let pt = surface_at(&sphere, &flat, uv, 4)?;
        sup = sup.max(willmore_el_residual_at(&pt)?.abs());
    }
    ctx.push(
        CheckResult::gated(
            "willmore_residual_round_sphere",
            "sphere x zero",
            sup,
            0.0,
            ctx.tol("willmore_residual_round_sphere", 1e-9),
        ),
        t0,
    );
    let clifford = Arc::new(catalog::clifford_torus());
    let t0 = Instant::now();
    let cg = ctx.identity_grid_for(&clifford);
    let values = eval_nodes(&clifford, &flat, &cg, 4, ExecMode::Parallel, |pt| {
        willmore_el_residual_at(pt).map(f64::abs)
    })?;
    let sup = values.iter().copied().fold(0.0, f64::max);
    ctx.push(
        CheckResult::gated(
            "willmore_residual_clifford",
            "clifford torus x zero",
            sup,
            0.0,
            ctx.tol("willmore_residual_clifford", 1e-6),
        ),
        t0,
    );
    let t0 = Instant::now();
    let energy = functional_value(&clifford, &flat, Integrand::MeanCurvatureSq, &cg)?;
    let two_pi_sq = 2.0 * std::f64::consts::PI * std::f64::consts::PI;
    ctx.push(
        CheckResult::gated(
            "clifford_energy",
            "clifford torus x zero",
            energy,
            two_pi_sq,
            ctx.tol("clifford_energy", 1e-6),
        ),
        t0,
    );

    // mean-curvature functional path: asserted flat, report-only otherwise
    let t0 = Instant::now();
    let mut rng = rng_for(ctx.config.seed, "mean_path");
    let variation = NormalVariation::chart(random_periodic_chart_expr(&mut rng, 2));
    let analytic = speed_weighted_integral(
        &torus,
        &flat,
        &variation,
        &grid,
        SpeedWeighted::MeanCurvatureOperator,
    )?;
    let fd = fd_delta(
        &torus,
        &flat,
        &variation,
        FdQuantity::Functional(Integrand::MeanCurvature, (grid.resolution.0, grid.resolution.1)),
    )?;
    let rep = compare_against_fd("mean_consistency", analytic, &fd, true, vec![]);
    ctx.push(
        CheckResult::gated(
            "mean_curvature_consistency",
            "torus x zero",
            rep.rel_discrepancy,
            0.0,
            ctx.tol("mean_curvature_consistency", 1e-6),
        ),
        t0,
    );
    for (fname, factor) in &factor_set[1..2] {
        let t0 = Instant::now();
        let analytic = speed_weighted_integral(
            &torus,
            factor,
            &variation,
            &grid,
            SpeedWeighted::MeanCurvatureOperator,
        )?;
        let fd = fd_delta(
            &torus,
            factor,
            &variation,
            FdQuantity::Functional(Integrand::MeanCurvature, (grid.resolution.0, grid.resolution.1)),
        )?;
        ctx.push(
            CheckResult::report_only(
                "mean_curvature_consistency",
                format!("torus x {fname}"),
                analytic,
                fd.value,
            )
            .with_flags(vec!["tangency not certified".into()]),
            t0,
        );
    }

    // pointwise mean-curvature critical equation statistics are covered in
    // the integral suite; nothing gated here
    let _ = mean_el_residual_at;
    Ok(())
}

fn flow_suite(ctx: &mut SuiteCtx) -> Result<()> {
    let base = Arc::new(catalog::clifford_torus());
    let flat = catalog::factor_zero();
    let variation = NormalVariation::chart(parse_expect("cos(2*u)*cos(v)"));
    let perturbed = csl_core::variation::varied_unchecked(&base, &flat, &variation, 0.03);
    let t0 = Instant::now();
    let state = project_to_spectral(&perturbed, &flat, (8, 8), (24, 24))
        .map_err(|e| anyhow::anyhow!("spectral projection: {e}"))?;
    let config = FlowConfig {
        max_steps: 25,
        tol: 1e-12,
        ..FlowConfig::default()
    };
    let (trace, _) = run_flow(&state, &flat, &config)
        .map_err(|e| anyhow::anyhow!("flow: {e}"))?;
    let energies: Vec<f64> = trace.records.iter().map(|r| r.energy).collect();
    let violations = energies
        .windows(2)
        .filter(|w| w[1] >= w[0])
        .count();
    ctx.push(
        CheckResult::gated(
            "flow_energy_monotonicity",
            "perturbed clifford torus x zero (25 steps)",
            violations as f64,
            0.0,
            0.5,
        ),
        t0,
    );
    let t1 = Instant::now();
    let drift = trace
        .records
        .iter()
        .map(|r| r.total_gauss.abs())
        .fold(0.0, f64::max);
    ctx.push(
        CheckResult::gated(
            "flow_total_curvature_drift",
            "perturbed clifford torus x zero (25 steps)",
            drift,
            0.0,
            ctx.tol("flow_total_curvature_drift", 1e-5),
        ),
        t1,
    );
    let t2 = Instant::now();
    let dropped = energies.first().unwrap() - energies.last().unwrap();
    ctx.push(
        CheckResult::gated(
            "flow_energy_decrease",
            "perturbed clifford torus x zero (25 steps)",
            if dropped > 0.0 { 0.0 } else { 1.0 },
            0.0,
            0.5,
        ),
        t2,
    );
    let _ = Verdict::Pass;
    Ok(())
}
