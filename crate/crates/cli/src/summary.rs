use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

/// One pass/fail check. `margin` is positive when the check passes with room to spare.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub claim: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    pub fn at_least(name: impl Into<String>, claim: impl Into<String>, value: f64, threshold: f64) -> Check {
        let margin = value - threshold;
        Check { name: name.into(), claim: claim.into(), passed: margin >= 0.0, value, threshold, margin, note: None }
    }

    pub fn at_most(name: impl Into<String>, claim: impl Into<String>, value: f64, threshold: f64) -> Check {
        let margin = threshold - value;
        Check { name: name.into(), claim: claim.into(), passed: margin >= 0.0, value, threshold, margin, note: None }
    }

    /// `|value − target| ≤ tol · |target|`; value and threshold are reported as relative deviation and tol.
    pub fn relative(name: impl Into<String>, claim: impl Into<String>, value: f64, target: f64, tol: f64) -> Check {
        let dev = ((value - target) / target).abs();
        let mut c = Check::at_most(name, claim, dev, tol);
        if !dev.is_finite() {
            c.passed = false;
        }
        c.note = Some(format!("measured {value}, target {target}"));
        c
    }

    pub fn holds(name: impl Into<String>, claim: impl Into<String>, passed: bool) -> Check {
        let v = if passed { 1.0 } else { 0.0 };
        Check { name: name.into(), claim: claim.into(), passed, value: v, threshold: 1.0, margin: v - 1.0, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Check {
        self.note = Some(note.into());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeshInfo {
    pub nodes: usize,
    /// `log2(x_max / x_min)` of the graded mesh.
    pub depth: f64,
    pub x_min: f64,
    pub rho: f64,
    pub h_max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub command: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<Value>,
    pub grids: BTreeMap<String, Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshInfo>,
    pub checks: Vec<Check>,
    pub results: Value,
    pub passed: bool,
}

pub fn version() -> String {
    match option_env!("WEYLLAB_GIT_DESCRIBE") {
        Some(d) if !d.is_empty() => format!("weyllab {} ({d})", env!("CARGO_PKG_VERSION")),
        _ => format!("weyllab {}", env!("CARGO_PKG_VERSION")),
    }
}

/// Result of a command: the summary plus named output files.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub summary: Summary,
    pub files: Vec<(String, String)>,
    pub stdout: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.summary.passed
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.summary.checks.iter().find(|c| c.name == name)
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

/// 17 significant digits.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
