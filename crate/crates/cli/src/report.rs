//! Report records and atomic file emission.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckVerdict {
    Pass,
    Fail,
    ReportOnly,
}

/// One named check: a value, its oracle, and the comparison outcome.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// Which surface/factor/field combination the check ran on.
    pub context: String,
    pub value: f64,
    pub oracle: f64,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub verdict: CheckVerdict,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub flags: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

impl CheckResult {
    pub fn gated(
        name: impl Into<String>,
        context: impl Into<String>,
        value: f64,
        oracle: f64,
        tolerance: f64,
    ) -> Self {
        let discrepancy = (value - oracle).abs();
        CheckResult {
            name: name.into(),
            context: context.into(),
            value,
            oracle,
            discrepancy,
            tolerance,
            verdict: if discrepancy <= tolerance {
                CheckVerdict::Pass
            } else {
                CheckVerdict::Fail
            },
            flags: Vec::new(),
            wall_clock_s: None,
        }
    }

    pub fn report_only(
        name: impl Into<String>,
        context: impl Into<String>,
        value: f64,
        oracle: f64,
    ) -> Self {
        CheckResult {
            name: name.into(),
            context: context.into(),
            value,
            oracle,
            discrepancy: (value - oracle).abs(),
            tolerance: f64::NAN,
            verdict: CheckVerdict::ReportOnly,
            flags: Vec::new(),
            wall_clock_s: None,
        }
    }

    pub fn with_flags(mut self, flags: Vec<String>) -> Self {
        self.flags = flags;
        self
    }
}

#[derive(Debug, Clone, Copy, Serialize, Default)]
pub struct SuiteTotals {
    pub pass: usize,
    pub fail: usize,
    pub report_only: usize,
}

/// Full suite output: artifact version, config echo, conventions header, and
/// every check.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub version: String,
    /// Resolved convention choices that downstream readers need to interpret
    /// signed quantities.
    pub conventions: Vec<String>,
    pub config: RunConfig,
    pub totals: SuiteTotals,
    pub checks: Vec<CheckResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_s: Option<f64>,
}

impl SuiteReport {
    pub fn failed(&self) -> bool {
        self.totals.fail > 0
    }
}

/// Write bytes atomically: temp file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} -> {}", tmp.display(), path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Flat CSV for integral reports: `name,value,error,n_u,n_v`.
pub fn integral_csv(rows: &[csl_core::quadrature::IntegralReport]) -> String {
    let mut out = String::from("name,value,error,n_u,n_v\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.17e},{:.3e},{},{}\n",
            r.name, r.value, r.error_estimate, r.resolution.0, r.resolution.1
        ));
    }
    out
}

/// Flat CSV for flow traces.
pub fn flow_trace_csv(trace: &csl_core::flow::FlowTrace) -> String {
    let mut out = String::from("step,dt,energy,w_sup,w_l2,area,total_gauss\n");
    for r in &trace.records {
        out.push_str(&format!(
            "{},{:.6e},{:.17e},{:.6e},{:.6e},{:.17e},{:.6e}\n",
            r.step, r.dt, r.energy, r.w_sup, r.w_l2, r.area, r.total_gauss
        ));
    }
    out
}
