//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};

use csl_core::flow::{project_to_spectral, run_flow, FlowConfig, SpectralSurface};
use csl_core::quadrature::{integrate, Integrand, QuadratureGrid};
use csl_core::surface::surface_at;
use csl_core::variation::{
    compare_against_fd, delta_area_element_analytic, delta_eigenvalue_analytic,
    delta_gauss_curvature_analytic, fd_delta, speed_weighted_integral, FdQuantity,
    NormalVariation, SpeedWeighted, VariationReport,
};

use crate::config::{FactorSpec, RunConfig, SurfaceSpec};
use crate::report::{flow_trace_csv, integral_csv, write_atomic, write_json};

pub fn cmd_catalog() -> String {
    let mut out = String::new();
    out.push_str("surfaces:\n");
    out.push_str("  sphere            {\"kind\":\"sphere\",\"r\":1.0,\"center\":[0,0,0]}\n");
    out.push_str("  ellipsoid         {\"kind\":\"ellipsoid\",\"a\":1.0,\"b\":1.0,\"c\":1.3}\n");
    out.push_str("  torus             {\"kind\":\"torus\",\"R\":2.0,\"r\":0.5}\n");
    out.push_str("  clifford_torus    {\"kind\":\"clifford_torus\"}  (R/r = sqrt(2), unit tube)\n");
    out.push_str(
        "  perturbed_sphere  {\"kind\":\"perturbed_sphere\",\"r\":1.0,\"eps\":0.05,\"mode\":\"cos(2*u)*sin(v)^3\"}\n",
    );
    out.push_str(
        "  custom            {\"kind\":\"custom\",\"topology\":\"torus_like\",\"x\":\"...\",\"y\":\"...\",\"z\":\"...\"}\n",
    );
    out.push_str("factors:\n");
    out.push_str("  zero              {\"kind\":\"zero\"}\n");
    out.push_str("  expr              {\"kind\":\"expr\",\"sigma\":\"0.3*sin(x)\"}\n");
    out.push_str("  harmonic_potential {\"kind\":\"harmonic_potential\",\"h\":\"1 + 0.3*x\"}  (sigma = 2 ln h)\n");
    out.push_str("  linear_harmonic   {\"kind\":\"linear_harmonic\",\"a\":0.3}\n");
    out.push_str("  point_source      {\"kind\":\"point_source\",\"center\":[3,0,0]}\n");
    out.push_str("  azimuthal         {\"kind\":\"azimuthal\",\"amplitude\":0.4}  (tangent to surfaces of revolution)\n");
    out.push_str("integrands:\n");
    out.push_str("  area, h, h2, k, k_extrinsic, k_ambient, omega2, h_omega2,\n");
    out.push_str("  mean_el, willmore_el, gauss_residual, tangency, harmonicity\n");
    out
}

pub struct IntegrateArgs {
    pub surface: String,
    pub factor: String,
    pub integrand: String,
    pub nu: usize,
    pub nv: usize,
    pub out_json: Option<PathBuf>,
    pub out_csv: Option<PathBuf>,
}

pub fn cmd_integrate(args: &IntegrateArgs) -> Result<String> {
    let surface = SurfaceSpec::parse_cli(&args.surface)?.build()?;
    let factor = FactorSpec::parse_cli(&args.factor)?.build()?;
    let integrand = Integrand::parse(&args.integrand)
        .with_context(|| format!("unknown integrand `{}` (see `csl catalog`)", args.integrand))?;
    let grid = QuadratureGrid::for_surface(&surface, args.nu, args.nv);
    let report = integrate(&surface, &factor, integrand, &grid)
        .map_err(|e| anyhow::anyhow!("integration failed: {e}"))?;
    if let Some(path) = &args.out_json {
        write_json(path, &report)?;
    }
    if let Some(path) = &args.out_csv {
        write_atomic(path, integral_csv(std::slice::from_ref(&report)).as_bytes())?;
    }
    Ok(format!(
        "{} on {} = {:.12e} (error estimate {:.3e}, grid {}x{})",
        report.name, surface.name, report.value, report.error_estimate, args.nu, args.nv
    ))
}

pub struct VaryArgs {
    pub surface: String,
    pub factor: String,
    pub speed: String,
    pub ambient_speed: bool,
    pub quantity: String,
    pub uv: Option<(f64, f64)>,
    pub nu: usize,
    pub nv: usize,
    pub report: Option<PathBuf>,
}

pub fn cmd_vary(args: &VaryArgs) -> Result<String> {
    let surface = Arc::new(SurfaceSpec::parse_cli(&args.surface)?.build()?);
    let factor = FactorSpec::parse_cli(&args.factor)?.build()?;
    let expr = csl_core::parse_field(&args.speed)
        .with_context(|| format!("speed `{}`", args.speed))?;
    let variation = if args.ambient_speed {
        NormalVariation::ambient(expr)
    } else {
        NormalVariation::chart(expr)
    };
    let uv = args.uv.map(|(u, v)| [u, v]).unwrap_or([1.0, 1.2]);
    let res = (args.nu, args.nv);
    let grid = QuadratureGrid::for_surface(&surface, res.0, res.1);
    let err = |e: csl_core::GeomError| anyhow::anyhow!("variation failed: {e}");

    let report: VariationReport = match args.quantity.as_str() {
        "lambda1" | "lambda2" => {
            let branch = if args.quantity == "lambda1" { 0 } else { 1 };
            let pt = surface_at(&surface, &factor, uv, 3).map_err(err)?;
            let analytic = delta_eigenvalue_analytic(&pt, &variation, branch).map_err(err)?;
            let q = if branch == 0 {
                FdQuantity::Lambda1At(uv)
            } else {
                FdQuantity::Lambda2At(uv)
            };
            let fd = fd_delta(&surface, &factor, &variation, q).map_err(err)?;
            compare_against_fd(format!("delta {}", args.quantity), analytic, &fd, true, vec![])
        }
        "H" | "h" => {
            let pt = surface_at(&surface, &factor, uv, 3).map_err(err)?;
            let d1 = delta_eigenvalue_analytic(&pt, &variation, 0).map_err(err)?;
            let d2 = delta_eigenvalue_analytic(&pt, &variation, 1).map_err(err)?;
            let fd = fd_delta(&surface, &factor, &variation, FdQuantity::MeanCurvatureAt(uv))
                .map_err(err)?;
            compare_against_fd("delta H", 0.5 * (d1 + d2), &fd, true, vec![])
        }
        "K" | "k" => {
            let pt = surface_at(&surface, &factor, uv, 3).map_err(err)?;
            let rep = delta_gauss_curvature_analytic(&pt, &variation).map_err(err)?;
            let fd = fd_delta(&surface, &factor, &variation, FdQuantity::GaussIntrinsicAt(uv))
                .map_err(err)?;
            let gate = pt.omega_sharp_norm_sq < 1e-20;
            compare_against_fd("delta K", rep.paper, &fd, gate, if gate {
                vec![]
            } else {
                vec![
                    "tangency/harmonicity hypotheses not certified".into(),
                    format!("chain-rule alternative {:.12e}", rep.chain_rule_alt),
                ]
            })
        }
        "area_element" => {
            let pt = surface_at(&surface, &factor, uv, 2).map_err(err)?;
            let analytic = delta_area_element_analytic(&pt, &variation).map_err(err)?;
            let fd = fd_delta(&surface, &factor, &variation, FdQuantity::AreaElementAt(uv))
                .map_err(err)?;
            compare_against_fd("delta dOmega", analytic, &fd, true, vec![])
        }
        "area" => {
            let analytic = speed_weighted_integral(
                &surface,
                &factor,
                &variation,
                &grid,
                SpeedWeighted::AreaOperator,
            )
            .map_err(err)?;
            let fd = fd_delta(
                &surface,
                &factor,
                &variation,
                FdQuantity::Functional(Integrand::One, res),
            )
            .map_err(err)?;
            compare_against_fd("delta area", analytic, &fd, true, vec![])
        }
        "total_H" | "total_h" => {
            let analytic = speed_weighted_integral(
                &surface,
                &factor,
                &variation,
                &grid,
                SpeedWeighted::MeanCurvatureOperator,
            )
            .map_err(err)?;
            let fd = fd_delta(
                &surface,
                &factor,
                &variation,
                FdQuantity::Functional(Integrand::MeanCurvature, res),
            )
            .map_err(err)?;
            let flat = is_flat(&factor);
            compare_against_fd("delta total H", analytic, &fd, flat, if flat {
                vec![]
            } else {
                vec!["tangency/harmonicity hypotheses not certified".into()]
            })
        }
        "willmore" => {
            let analytic = speed_weighted_integral(
                &surface,
                &factor,
                &variation,
                &grid,
                SpeedWeighted::WillmoreOperator,
            )
            .map_err(err)?;
            let fd = fd_delta(
                &surface,
                &factor,
                &variation,
                FdQuantity::Functional(Integrand::MeanCurvatureSq, res),
            )
            .map_err(err)?;
            let flat = is_flat(&factor);
            compare_against_fd("delta willmore energy", analytic, &fd, flat, if flat {
                vec![]
            } else {
                vec!["tangency/harmonicity hypotheses not certified".into()]
            })
        }
        "gauss_bonnet" => {
            let fd = fd_delta(
                &surface,
                &factor,
                &variation,
                FdQuantity::Functional(Integrand::GaussIntrinsic, res),
            )
            .map_err(err)?;
            compare_against_fd("delta total K (topological)", 0.0, &fd, true, vec![])
        }
        other => bail!(
            "unknown quantity `{other}` (expected lambda1, lambda2, H, K, area_element, area, total_H, willmore, gauss_bonnet)"
        ),
    };
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    Ok(format!(
        "{}: analytic {:.12e}, fd {:.12e} (err est {:.3e}), rel discrepancy {:.3e}, verdict {:?}",
        report.quantity,
        report.analytic,
        report.fd,
        report.fd_error,
        report.rel_discrepancy,
        report.verdict
    ))
}

fn is_flat(factor: &csl_core::ambient::ConformalFactor) -> bool {
    matches!(
        factor.sigma(),
        csl_core::expr::FieldExpr::Const(c) if *c == 0.0
    )
}

pub struct FlowArgs {
    pub initial: String,
    pub factor: String,
    pub dt0: Option<f64>,
    pub tol: f64,
    pub max_steps: usize,
    pub bandlimit: (usize, usize),
    pub grid: (usize, usize),
    pub no_filter: bool,
    pub trace: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

pub fn cmd_flow(args: &FlowArgs) -> Result<String> {
    let factor = FactorSpec::parse_cli(&args.factor)?.build()?;
    let initial: SpectralSurface = if args.initial.ends_with(".json") {
        let text = std::fs::read_to_string(&args.initial)
            .with_context(|| format!("reading checkpoint {}", args.initial))?;
        serde_json::from_str(&text).context("parsing checkpoint")?
    } else {
        let surface = SurfaceSpec::parse_cli(&args.initial)?.build()?;
        project_to_spectral(&surface, &factor, args.bandlimit, args.grid)
            .map_err(|e| anyhow::anyhow!("spectral projection: {e}"))?
    };
    let config = FlowConfig {
        max_steps: args.max_steps,
        dt0: args.dt0,
        tol: args.tol,
        filter_decades: if args.no_filter { None } else { Some(36.0) },
        ..FlowConfig::default()
    };
    let (trace, final_state) =
        run_flow(&initial, &factor, &config).map_err(|e| anyhow::anyhow!("flow: {e}"))?;
    if let Some(path) = &args.trace {
        write_atomic(path, flow_trace_csv(&trace).as_bytes())?;
    }
    if let Some(path) = &args.checkpoint {
        write_json(path, &final_state)?;
    }
    let last = trace.records.last().expect("trace has at least one record");
    Ok(format!(
        "flow terminated: {:?} after {} records; energy {:.9e}, |W|_L2 {:.3e}, total curvature {:.3e}",
        trace.termination,
        trace.records.len(),
        last.energy,
        last.w_l2,
        last.total_gauss
    ))
}

/// Make a path absolute inside the output directory unless already explicit.
pub fn in_out_dir(out_dir: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() || path.components().count() > 1 {
        path.to_path_buf()
    } else {
        out_dir.join(path)
    }
}
