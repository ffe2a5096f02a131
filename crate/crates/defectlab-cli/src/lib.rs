//! Command implementations behind the `defectlab` binary.
//!
//! Each command returns an [`Outcome`]: named pass/fail checks, a JSON report and the data files
//! to write.  [`RunManifest`] ties them together on disk.

pub mod algebra;
pub mod backlund;
pub mod config;
pub mod kmatrix;
pub mod simulate;
mod states;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use defectlab::ResidualReport;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("run aborted: {0}")]
    Run(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for usage/configuration problems, 1 for everything that happened during a run.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<defectlab::FieldError> for CliError {
    fn from(e: defectlab::FieldError) -> Self {
        match e {
            defectlab::FieldError::Parameter(m) => CliError::Config(m),
            other => CliError::Run(other.to_string()),
        }
    }
}

impl From<defectlab::defect_sim::SimError> for CliError {
    fn from(e: defectlab::defect_sim::SimError) -> Self {
        use defectlab::defect_sim::SimError;
        match e {
            SimError::Config(_) | SimError::Cfl { .. } => CliError::Config(e.to_string()),
            other => CliError::Run(other.to_string()),
        }
    }
}

/// One pass/fail check.  `criterion` links it to the numbered acceptance list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub criterion: Option<u8>,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(criterion: Option<u8>, name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { criterion, name: name.into(), pass, detail: detail.into() }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub report: serde_json::Value,
    /// (file name, contents), written into the output directory.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub code_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<String>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Write the report, data files and manifest into `dir`; returns the manifest.
pub fn write_outputs(
    dir: &Path,
    command: &str,
    config: serde_json::Value,
    started: f64,
    outcome: &Outcome,
) -> Result<RunManifest, CliError> {
    std::fs::create_dir_all(dir)?;
    let mut outputs = Vec::new();
    let mut put = |name: &str, text: &str| -> Result<(), CliError> {
        let path: PathBuf = dir.join(name);
        std::fs::write(&path, text)?;
        outputs.push(name.to_string());
        Ok(())
    };
    put("report.json", &pretty(&outcome.report))?;
    for (name, text) in &outcome.files {
        put(name, text)?;
    }
    let manifest = RunManifest {
        command: command.to_string(),
        config,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        outputs,
        checks: outcome.checks.clone(),
        pass: outcome.pass(),
    };
    std::fs::write(dir.join(MANIFEST_NAME), pretty(&manifest))?;
    Ok(manifest)
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Convergence table in long CSV form: equation, level, h, max_norm, slope.
pub fn convergence_csv(reports: &[ResidualReport]) -> String {
    let mut out = String::from("equation,level,nodes,max_norm,slope\n");
    for r in reports {
        for (k, v) in r.level_norms.iter().enumerate() {
            let nodes = r.grid_sizes.get(k).copied().unwrap_or(0);
            let slope = r.slope.map(|s| format!("{s:.6}")).unwrap_or_default();
            out.push_str(&format!("\"{}\",{k},{nodes},{v:.6e},{slope}\n", r.equation_id));
        }
    }
    out
}

/// Check that every report converges at `min_slope` (or is identically zero).
pub fn convergence_check(criterion: Option<u8>, name: &str, reports: &[ResidualReport], min_slope: f64) -> Check {
    let worst = reports
        .iter()
        .filter(|r| !r.converges_at(min_slope))
        .map(|r| format!("{} (slope {:?})", r.equation_id, r.slope))
        .collect::<Vec<_>>();
    let slopes = reports.iter().filter_map(|r| r.slope).fold(f64::INFINITY, f64::min);
    let detail = if worst.is_empty() {
        format!("{} residuals, min slope {slopes:.3}", reports.len())
    } else {
        format!("below {min_slope}: {}", worst.join("; "))
    };
    Check::new(criterion, name, worst.is_empty(), detail)
}
