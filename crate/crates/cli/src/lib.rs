//! Configuration, scenario orchestration and data emission for `cpo-sim`.

use std::path::{Path, PathBuf};

use cpo_core::CoreError;
use serde_json::{json, Value};
use thiserror::Error;

pub mod config;
pub mod output;
pub mod scenarios;

pub use config::{parse_config, ResolvedConfig, Scenario, ScenarioConfig};
pub use output::{emit_outputs, Report};
pub use scenarios::{run_scenario, RunOutput};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: CoreError,
    },
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn core(context: &str, source: CoreError) -> Self {
        Self::Core {
            context: context.into(),
            source,
        }
    }
}

/// Result of a run that produced outputs.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub complete: bool,
    pub written: Vec<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.complete && self.report.passed
    }
}

fn base_metadata(resolved: &ResolvedConfig) -> serde_json::Map<String, Value> {
    let mut meta = serde_json::Map::new();
    meta.insert("scenario".into(), json!(resolved.scenario.name()));
    meta.insert(
        "inputs".into(),
        serde_json::to_value(&resolved.config).unwrap_or(Value::Null),
    );
    meta.insert("defaults".into(), json!(resolved.defaults));
    meta.insert("warnings".into(), json!(resolved.warnings));
    meta.insert(
        "versions".into(),
        json!({ "cpo-cli": env!("CARGO_PKG_VERSION"), "format": 1 }),
    );
    meta.insert(
        "units".into(),
        json!("frequencies in units of gamma2, hbar = 1, c = 1 unless overridden"),
    );
    meta
}

/// Runs the scenario and writes its outputs under `dir`. A failed run still
/// writes `metadata.json` marked incomplete before returning the error.
pub fn execute(resolved: &ResolvedConfig, dir: &Path, jobs: Option<usize>) -> Result<Outcome, CliError> {
    let mut meta = base_metadata(resolved);
    match run_scenario(resolved, jobs) {
        Ok(run) => {
            meta.extend(run.metadata);
            meta.insert("complete".into(), json!(run.complete));
            meta.insert("passed".into(), json!(run.complete && run.report.passed));
            let written = emit_outputs(&run.tables, &Value::Object(meta), Some(&run.report), dir)?;
            Ok(Outcome {
                report: run.report,
                complete: run.complete,
                written,
            })
        }
        Err(e) => {
            meta.insert("complete".into(), json!(false));
            meta.insert("error".into(), json!(e.to_string()));
            // the run error matters more than a secondary write failure
            let _ = emit_outputs(&[], &Value::Object(meta), None, dir);
            Err(e)
        }
    }
}
