//! Machine-readable outputs. Every JSON file carries `schema_version`,
//! every CSV starts with a `# schema=<v>` line. No timestamps or host
//! details are written, so identical runs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_FILE: &str = "summary.json";
pub const CHECKS_FILE: &str = "checks.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured quantity; `None` when not finite or not applicable.
    pub value: Option<f64>,
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, value: f64, bound: f64) -> Self {
        Check { name: name.into(), passed, value: finite(value), bound: finite(bound), detail: String::new() }
    }

    pub fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub checks: Vec<Check>,
    /// Files written by the stage, relative to the output directory.
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StageReport {
    pub fn new(stage: &str) -> Self {
        StageReport { stage: stage.into(), ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.passed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Overall {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub overall: Overall,
    pub config_hash: String,
    pub checks_total: usize,
    pub checks_failed: usize,
    pub stages: Vec<StageReport>,
}

impl Summary {
    pub fn new(config_hash: String, stages: Vec<StageReport>) -> Self {
        let checks_total = stages.iter().map(|s| s.checks.len()).sum();
        let checks_failed = stages.iter().flat_map(|s| &s.checks).filter(|c| !c.passed).count();
        let ok = stages.iter().all(StageReport::passed);
        Summary {
            schema_version: SCHEMA_VERSION,
            overall: if ok { Overall::Pass } else { Overall::Fail },
            config_hash,
            checks_total,
            checks_failed,
            stages,
        }
    }
}

/// A JSON document with the schema version spliced in front.
#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

pub fn json_text<T: Serialize>(body: &T) -> String {
    let mut s = serde_json::to_string_pretty(&Versioned { schema_version: SCHEMA_VERSION, body })
        .expect("report types serialise");
    s.push('\n');
    s
}

/// Shortest round-trip decimal; `nan`/`inf` spelled out.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn csv_text(columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = format!("# schema={SCHEMA_VERSION}\n{}\n", columns.join(","));
    for r in rows {
        let _ = writeln!(s, "{}", r.join(","));
    }
    s
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))
}

fn checks_csv(summary: &Summary) -> String {
    let rows: Vec<Vec<String>> = summary
        .stages
        .iter()
        .flat_map(|s| {
            s.checks.iter().map(move |c| {
                let opt = |v: Option<f64>| v.map(num).unwrap_or_default();
                vec![s.stage.clone(), c.name.clone(), c.passed.to_string(), opt(c.value), opt(c.bound)]
            })
        })
        .collect();
    csv_text(&["stage", "check", "passed", "value", "bound"], &rows)
}

/// Write `summary.json` and the flat `checks.csv` into `dir`.
pub fn emit_report(dir: &Path, summary: &Summary) -> CliResult<()> {
    ensure_dir(dir)?;
    let mut text = serde_json::to_string_pretty(summary).expect("summary serialises");
    text.push('\n');
    write_file(dir, SUMMARY_FILE, &text)?;
    write_file(dir, CHECKS_FILE, &checks_csv(summary))
}
