//! Run configuration: JSON-declared surfaces, factors, grids, and overrides.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use csl_core::ambient::ConformalFactor;
use csl_core::catalog;
use csl_core::expr::parse_field;
use csl_core::surface::{ClosedSurface, Topology};

/// Declarative surface description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    Sphere {
        r: f64,
        #[serde(default)]
        center: [f64; 3],
    },
    Ellipsoid {
        a: f64,
        b: f64,
        c: f64,
    },
    Torus {
        #[serde(rename = "R")]
        major: f64,
        #[serde(rename = "r")]
        minor: f64,
    },
    CliffordTorus,
    PerturbedSphere {
        r: f64,
        eps: f64,
        mode: String,
    },
    Custom {
        topology: TopologySpec,
        x: String,
        y: String,
        z: String,
    },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TopologySpec {
    SphereLike,
    TorusLike,
}

impl From<TopologySpec> for Topology {
    fn from(t: TopologySpec) -> Topology {
        match t {
            TopologySpec::SphereLike => Topology::SphereLike,
            TopologySpec::TorusLike => Topology::TorusLike,
        }
    }
}

impl SurfaceSpec {
    pub fn build(&self) -> Result<ClosedSurface> {
        Ok(match self {
            SurfaceSpec::Sphere { r, center } => catalog::sphere(*r, *center),
            SurfaceSpec::Ellipsoid { a, b, c } => catalog::ellipsoid(*a, *b, *c),
            SurfaceSpec::Torus { major, minor } => catalog::torus(*major, *minor),
            SurfaceSpec::CliffordTorus => catalog::clifford_torus(),
            SurfaceSpec::PerturbedSphere { r, eps, mode } => {
                let mode = parse_field(mode).with_context(|| format!("mode `{mode}`"))?;
                catalog::perturbed_sphere(*r, *eps, &mode)
            }
            SurfaceSpec::Custom { topology, x, y, z } => {
                let parse = |s: &str| parse_field(s).with_context(|| format!("component `{s}`"));
                catalog::custom(
                    "custom",
                    (*topology).into(),
                    [parse(x)?, parse(y)?, parse(z)?],
                )
            }
        })
    }

    /// Parse a CLI argument: a catalog shorthand or inline JSON.
    pub fn parse_cli(text: &str) -> Result<SurfaceSpec> {
        let trimmed = text.trim();
        match trimmed {
            "sphere" => {
                return Ok(SurfaceSpec::Sphere {
                    r: 1.0,
                    center: [0.0; 3],
                })
            }
            "ellipsoid" => {
                return Ok(SurfaceSpec::Ellipsoid {
                    a: 1.0,
                    b: 1.0,
                    c: 1.3,
                })
            }
            "torus" => {
                return Ok(SurfaceSpec::Torus {
                    major: 2.0,
                    minor: 0.5,
                })
            }
            "clifford_torus" | "clifford" => return Ok(SurfaceSpec::CliffordTorus),
            _ => {}
        }
        if trimmed.starts_with('{') {
            return serde_json::from_str(trimmed).context("surface spec JSON");
        }
        bail!("unknown surface `{trimmed}` (expected a catalog name or JSON object)")
    }
}

/// Declarative conformal-factor description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorSpec {
    Zero,
    Expr {
        sigma: String,
        #[serde(default)]
        harmonic_intent: bool,
    },
    HarmonicPotential {
        h: String,
    },
    LinearHarmonic {
        a: f64,
    },
    PointSource {
        center: [f64; 3],
    },
    Azimuthal {
        amplitude: f64,
    },
}

impl FactorSpec {
    pub fn build(&self) -> Result<ConformalFactor> {
        Ok(match self {
            FactorSpec::Zero => catalog::factor_zero(),
            FactorSpec::Expr {
                sigma,
                harmonic_intent,
            } => {
                let expr = parse_field(sigma).with_context(|| format!("sigma `{sigma}`"))?;
                ConformalFactor::from_expr(expr).with_harmonic_intent(*harmonic_intent)
            }
            FactorSpec::HarmonicPotential { h } => {
                let expr = parse_field(h).with_context(|| format!("potential `{h}`"))?;
                ConformalFactor::harmonic_from_potential(expr)
            }
            FactorSpec::LinearHarmonic { a } => catalog::factor_linear_harmonic(*a),
            FactorSpec::PointSource { center } => catalog::factor_point_source(*center),
            FactorSpec::Azimuthal { amplitude } => catalog::factor_azimuthal(*amplitude),
        })
    }

    pub fn parse_cli(text: &str) -> Result<FactorSpec> {
        let trimmed = text.trim();
        match trimmed {
            "zero" | "flat" => return Ok(FactorSpec::Zero),
            "linear_harmonic" => return Ok(FactorSpec::LinearHarmonic { a: 0.3 }),
            "point_source" => {
                return Ok(FactorSpec::PointSource {
                    center: [3.0, 0.0, 0.0],
                })
            }
            "azimuthal" => return Ok(FactorSpec::Azimuthal { amplitude: 0.4 }),
            _ => {}
        }
        if trimmed.starts_with('{') {
            return serde_json::from_str(trimmed).context("factor spec JSON");
        }
        // bare expression text is treated as sigma
        parse_field(trimmed).with_context(|| format!("sigma `{trimmed}`"))?;
        Ok(FactorSpec::Expr {
            sigma: trimmed.to_string(),
            harmonic_intent: false,
        })
    }

    pub fn label(&self) -> String {
        match self {
            FactorSpec::Zero => "zero".into(),
            FactorSpec::Expr { sigma, .. } => format!("sigma={sigma}"),
            FactorSpec::HarmonicPotential { h } => format!("2ln({h})"),
            FactorSpec::LinearHarmonic { a } => format!("linear_harmonic(a={a})"),
            FactorSpec::PointSource { center } => format!("point_source@{center:?}"),
            FactorSpec::Azimuthal { amplitude } => format!("azimuthal({amplitude})"),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nu: usize,
    pub nv: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { nu: 128, nv: 128 }
    }
}

fn default_suites() -> Vec<String> {
    ["ambient", "surface", "integral", "variation"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_jet_order() -> usize {
    4
}

fn default_out_dir() -> String {
    "out".into()
}

/// Top-level run configuration; serializable, and a persisted config re-runs
/// to an identical report at a fixed seed and single thread.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_jet_order")]
    pub jet_order: usize,
    #[serde(default = "RunConfig::default_surfaces")]
    pub surfaces: Vec<SurfaceSpec>,
    #[serde(default = "RunConfig::default_factors")]
    pub factors: Vec<FactorSpec>,
    #[serde(default = "default_suites")]
    pub suites: Vec<String>,
    /// Per-check tolerance overrides by check name.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    /// Wall-clock fields make reports non-reproducible byte for byte, so
    /// they are opt-in.
    #[serde(default)]
    pub include_timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: None,
            grid: GridSpec::default(),
            jet_order: default_jet_order(),
            surfaces: Self::default_surfaces(),
            factors: Self::default_factors(),
            suites: default_suites(),
            tolerances: BTreeMap::new(),
            out_dir: default_out_dir(),
            include_timings: false,
        }
    }
}

impl RunConfig {
    pub fn default_surfaces() -> Vec<SurfaceSpec> {
        vec![
            SurfaceSpec::Sphere {
                r: 1.0,
                center: [0.0; 3],
            },
            SurfaceSpec::Torus {
                major: 2.0,
                minor: 0.5,
            },
        ]
    }

    pub fn default_factors() -> Vec<FactorSpec> {
        vec![
            FactorSpec::Zero,
            FactorSpec::LinearHarmonic { a: 0.3 },
            FactorSpec::PointSource {
                center: [3.0, 0.0, 0.0],
            },
        ]
    }

    /// Load from a JSON file with `path:line:column: message` diagnostics.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| {
            anyhow::anyhow!(
                "{}:{}:{}: {}",
                path.display(),
                e.line(),
                e.column(),
                e
            )
        })
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }
}
