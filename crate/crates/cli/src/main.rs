use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use csl_cli::commands::{
    cmd_catalog, cmd_flow, cmd_integrate, cmd_vary, in_out_dir, FlowArgs, IntegrateArgs, VaryArgs,
};
use csl_cli::config::RunConfig;
use csl_cli::report::write_json;
use csl_cli::suite::run_suite;

/// Numerical laboratory for closed surfaces in conformally rescaled
/// Euclidean 3-space.
#[derive(Parser)]
#[command(name = "csl", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON run configuration (see README for the schema).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread count (falls back to CSL_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory for reports.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// List the surface and factor catalogs with their parameter schemas.
    Catalog,
    /// Run the verification suites and write a JSON report.
    Check {
        /// Suites to run (default: from config; empty string for none).
        #[arg(long)]
        suites: Option<String>,
        /// Report path (default: <out-dir>/report.json).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Integrate a named scalar over a surface.
    Integrate {
        #[arg(long)]
        surface: String,
        #[arg(long, default_value = "zero")]
        factor: String,
        #[arg(long)]
        integrand: String,
        #[arg(long, default_value_t = 128)]
        nu: usize,
        #[arg(long, default_value_t = 128)]
        nv: usize,
        #[arg(long)]
        out_json: Option<PathBuf>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Compare an analytic first variation against the finite-difference
    /// oracle.
    Vary {
        #[arg(long)]
        surface: String,
        #[arg(long, default_value = "zero")]
        factor: String,
        /// Normal speed expression.
        #[arg(long = "f")]
        speed: String,
        /// Interpret the speed in ambient coordinates (composed with the
        /// immersion) instead of chart coordinates.
        #[arg(long)]
        ambient_speed: bool,
        /// lambda1 | lambda2 | H | K | area_element | area | total_H |
        /// willmore | gauss_bonnet
        #[arg(long)]
        quantity: String,
        /// Chart point "u,v" for pointwise quantities.
        #[arg(long)]
        uv: Option<String>,
        #[arg(long, default_value_t = 96)]
        nu: usize,
        #[arg(long, default_value_t = 96)]
        nv: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the Willmore gradient flow.
    Flow {
        /// Initial surface: catalog name, JSON spec, or a checkpoint *.json.
        #[arg(long)]
        initial: String,
        #[arg(long, default_value = "zero")]
        factor: String,
        #[arg(long)]
        dt0: Option<f64>,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 20000)]
        max_steps: usize,
        /// Bandlimit "mu,mv".
        #[arg(long, default_value = "8,8")]
        bandlimit: String,
        /// Collocation grid "nu,nv".
        #[arg(long, default_value = "24,24")]
        grid: String,
        #[arg(long)]
        no_filter: bool,
        /// Trace CSV path.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Final-state checkpoint path (resumable via --initial).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn parse_pair_usize(text: &str) -> Result<(usize, usize)> {
    let (a, b) = text
        .split_once(',')
        .with_context(|| format!("expected `a,b`, got `{text}`"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn parse_pair_f64(text: &str) -> Result<(f64, f64)> {
    let (a, b) = text
        .split_once(',')
        .with_context(|| format!("expected `u,v`, got `{text}`"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn effective_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    if let Some(threads) = global.threads {
        config.threads = Some(threads);
    } else if config.threads.is_none() {
        if let Ok(env_threads) = std::env::var("CSL_THREADS") {
            config.threads = Some(
                env_threads
                    .parse()
                    .context("CSL_THREADS must be an integer")?,
            );
        }
    }
    if let Some(dir) = &global.out_dir {
        config.out_dir = dir.display().to_string();
    }
    if let Some(n) = config.threads {
        csl_core::parallel::configure_threads(n);
    }
    Ok(config)
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    let config = effective_config(&cli.global)?;
    let out_dir = PathBuf::from(&config.out_dir);
    match cli.command {
        Command::Catalog => {
            print!("{}", cmd_catalog());
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { suites, report } => {
            let mut config = config;
            if let Some(list) = suites {
                config.suites = list
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect();
            }
            let suite_report = run_suite(&config)?;
            let path = in_out_dir(&out_dir, &report.unwrap_or_else(|| PathBuf::from("report.json")));
            write_json(&path, &suite_report)?;
            for check in &suite_report.checks {
                println!(
                    "[{}] {} :: {} (value {:.6e}, oracle {:.6e}, tol {:.1e})",
                    match check.verdict {
                        csl_cli::CheckVerdict::Pass => "pass",
                        csl_cli::CheckVerdict::Fail => "FAIL",
                        csl_cli::CheckVerdict::ReportOnly => "info",
                    },
                    check.name,
                    check.context,
                    check.value,
                    check.oracle,
                    check.tolerance,
                );
            }
            println!(
                "{} pass, {} fail, {} report-only -> {}",
                suite_report.totals.pass,
                suite_report.totals.fail,
                suite_report.totals.report_only,
                path.display()
            );
            Ok(if suite_report.failed() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Integrate {
            surface,
            factor,
            integrand,
            nu,
            nv,
            out_json,
            out_csv,
        } => {
            let args = IntegrateArgs {
                surface,
                factor,
                integrand,
                nu,
                nv,
                out_json: out_json.map(|p| in_out_dir(&out_dir, &p)),
                out_csv: out_csv.map(|p| in_out_dir(&out_dir, &p)),
            };
            println!("{}", cmd_integrate(&args)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Vary {
            surface,
            factor,
            speed,
            ambient_speed,
            quantity,
            uv,
            nu,
            nv,
            report,
        } => {
            let args = VaryArgs {
                surface,
                factor,
                speed,
                ambient_speed,
                quantity,
                uv: uv.map(|s| parse_pair_f64(&s)).transpose()?,
                nu,
                nv,
                report: report.map(|p| in_out_dir(&out_dir, &p)),
            };
            println!("{}", cmd_vary(&args)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Flow {
            initial,
            factor,
            dt0,
            tol,
            max_steps,
            bandlimit,
            grid,
            no_filter,
            trace,
            checkpoint,
        } => {
            let args = FlowArgs {
                initial,
                factor,
                dt0,
                tol,
                max_steps,
                bandlimit: parse_pair_usize(&bandlimit)?,
                grid: parse_pair_usize(&grid)?,
                no_filter,
                trace: trace.map(|p| in_out_dir(&out_dir, &p)),
                checkpoint: checkpoint.map(|p| in_out_dir(&out_dir, &p)),
            };
            println!("{}", cmd_flow(&args)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
