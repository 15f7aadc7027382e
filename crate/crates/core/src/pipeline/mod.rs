//! Declarative stage orchestration. Each stage reads JSONL from disk and
//! writes JSONL (or a JSON summary) back, so a manifest run and the
//! equivalent sequence of CLI subcommands produce the same files.

mod config;
mod manifest;
mod stages;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{with_overrides, AppConfig, DpoConfig, IfdConfig, ToolConfig};
pub use manifest::{Inputs, Manifest, PlannedStage, StageSpec};
pub use stages::{
    min_inputs, plan_stage, run_stage, side_path, Plan, PrefSource, StageIo, StageKind, StageReport,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub seed: u64,
    pub stages: Vec<StageReport>,
    /// Set when a stage failed; later stages did not run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_ms: u64,
}

impl RunReport {
    pub fn is_conserved(&self) -> bool {
        self.stages.iter().all(StageReport::is_conserved)
    }
}

/// The report (always written when validation passed) and the stage error,
/// if any.
#[derive(Debug)]
pub struct PipelineOutcome {
    pub report: RunReport,
    pub report_path: PathBuf,
    pub error: Option<Error>,
}

impl PipelineOutcome {
    pub fn into_result(self) -> Result<RunReport> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.report),
        }
    }
}

/// Validates the whole manifest, then runs the stages in order. A stage
/// failure stops the run; outputs of finished stages stay on disk and the
/// report names the failing stage.
pub fn run_pipeline(manifest: &Manifest, cfg: &AppConfig) -> Result<PipelineOutcome> {
    let planned = manifest.validate(cfg)?;
    let started = std::time::Instant::now();
    let mut report = RunReport {
        run_id: manifest.run_id.clone(),
        seed: manifest.seed,
        stages: Vec::with_capacity(planned.len()),
        failed_stage: None,
        error: None,
        wall_ms: 0,
    };
    let mut error = None;
    for (i, st) in planned.iter().enumerate() {
        log::info!("stage {}/{}: {}", i + 1, planned.len(), st.kind);
        match run_stage(st.kind, &st.io, &st.plan) {
            Ok(r) => {
                log::info!(
                    "{}: {} in, {} out, {} dropped ({} ms)",
                    r.stage,
                    r.records_in,
                    r.records_out,
                    r.dropped,
                    r.wall_ms
                );
                report.stages.push(r);
            }
            Err(e) => {
                let name = format!("#{} {}", i + 1, st.kind);
                report.failed_stage = Some(name.clone());
                report.error = Some(e.to_string());
                error = Some(Error::Stage {
                    stage: name,
                    source: Box::new(e),
                });
                break;
            }
        }
    }
    report.wall_ms = started.elapsed().as_millis() as u64;
    let report_path = manifest.report_path();
    crate::jsonl::write_json(&report_path, &report)?;
    Ok(PipelineOutcome {
        report,
        report_path,
        error,
    })
}
