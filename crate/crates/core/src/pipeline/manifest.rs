use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::AppConfig;
use super::stages::{min_inputs, plan_stage, Plan, StageIo, StageKind};
use crate::error::{Error, Result};

/// One input path or several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Inputs {
    One(PathBuf),
    Many(Vec<PathBuf>),
}

impl Inputs {
    pub fn to_vec(&self) -> Vec<PathBuf> {
        match self {
            Inputs::One(p) => vec![p.clone()],
            Inputs::Many(ps) => ps.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub name: String,
    pub input: Inputs,
    pub output: PathBuf,
    /// Overrides for the stage's config section plus stage-only options.
    #[serde(default)]
    pub params: toml::Table,
}

/// A declarative, ordered list of stages. Relative paths resolve against
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub run_id: String,
    #[serde(default)]
    pub seed: u64,
    /// Where the run report goes; defaults to `<run_id>.report.json`.
    #[serde(default)]
    pub report: Option<PathBuf>,
    #[serde(default)]
    pub stage: Vec<StageSpec>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// A manifest stage after validation.
#[derive(Debug, Clone)]
pub struct PlannedStage {
    pub kind: StageKind,
    pub io: StageIo,
    pub plan: Plan,
}

impl Manifest {
    pub fn from_toml_str(s: &str, base_dir: &Path) -> Result<Self> {
        let mut m: Manifest =
            toml::from_str(s).map_err(|e| Error::config(format!("manifest: {e}")))?;
        m.base_dir = base_dir.to_path_buf();
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        Self::from_toml_str(&s, dir)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn report_path(&self) -> PathBuf {
        match &self.report {
            Some(p) => self.resolve(p),
            None => self.resolve(Path::new(&format!("{}.report.json", self.run_id))),
        }
    }

    /// Checks every stage before anything runs: names, arities, params, and
    /// that each input is an existing file or an earlier stage's output.
    pub fn validate(&self, cfg: &AppConfig) -> Result<Vec<PlannedStage>> {
        if self.run_id.trim().is_empty() {
            return Err(Error::config("manifest: run_id is empty"));
        }
        if self.stage.is_empty() {
            return Err(Error::config("manifest has no stages"));
        }
        let mut produced: HashSet<PathBuf> = HashSet::new();
        let mut planned = Vec::with_capacity(self.stage.len());
        for (i, spec) in self.stage.iter().enumerate() {
            let ctx = |e: Error| Error::config(format!("stage #{} ({}): {e}", i + 1, spec.name));
            let kind = StageKind::parse(&spec.name).map_err(ctx)?;
            let plan =
                plan_stage(kind, &spec.params, cfg, self.seed, &self.base_dir).map_err(ctx)?;
            let inputs: Vec<PathBuf> = spec
                .input
                .to_vec()
                .iter()
                .map(|p| self.resolve(p))
                .collect();
            let need = min_inputs(kind, &plan);
            if inputs.len() < need {
                return Err(ctx(Error::config(format!(
                    "needs at least {need} input(s)"
                ))));
            }
            for p in &inputs {
                if !produced.contains(p) && !p.is_file() {
                    return Err(ctx(Error::config(format!(
                        "input {} is neither an existing file nor an earlier stage's output",
                        p.display()
                    ))));
                }
            }
            let io = StageIo::new(kind, inputs, self.resolve(&spec.output));
            if io.inputs.contains(&io.output) {
                return Err(ctx(Error::config("output overwrites its own input")));
            }
            produced.insert(io.output.clone());
            produced.extend(io.sides.values().cloned());
            planned.push(PlannedStage { kind, io, plan });
        }
        Ok(planned)
    }
}
