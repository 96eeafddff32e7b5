//! Task documents and their resolution into engine inputs.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use treeverify::constraints::{Constraint, JointConstraint, PairConstraint};
use treeverify::graph::MergeConfig;
use treeverify::model_io;
use treeverify::search::SearchConfig;
use treeverify::{Ensemble, Example};

use crate::error::CliError;

/// Overrides the default memory budget (in MB) when a task does not set one.
pub const MEMORY_ENV: &str = "TREEVERIFY_MEMORY_MB";
pub const DEFAULT_MEMORY_MB: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Maximize,
    Minimize,
    DiffMaximize,
    Robustness,
    Stress,
    RandomTasks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmName {
    #[default]
    Veritas,
    Merge,
    Oracle,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_budget_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_budget: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory_budget_mb: Option<u64>,
    #[serde(default)]
    pub algorithm: AlgorithmName,
    #[serde(default, rename = "merge_L", skip_serializing_if = "Option::is_none")]
    pub merge_l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessDoc {
    pub x: Example,
    pub source: usize,
    pub target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default)]
    pub integer_grid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomTasksDoc {
    pub count: usize,
    pub fractions: Vec<f64>,
}

/// Provenance of a generated task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedDoc {
    pub target_fraction: f64,
    pub achieved_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDoc {
    pub kind: TaskKind,
    /// Model file, relative to the task file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// One file per model, for tasks over several models.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub models: Vec<PathBuf>,
    #[serde(default)]
    pub constraints: Vec<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_tasks: Option<RandomTasksDoc>,
    #[serde(default)]
    pub config: ConfigDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated: Option<GeneratedDoc>,
}

/// Constraints split into those on a single input and those linking two.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    pub single: Constraint,
    pub joint: Vec<PairConstraint>,
}

impl Constraints {
    pub fn joint_constraint(&self) -> JointConstraint {
        JointConstraint {
            first: self.single.clone(),
            second: self.single.clone(),
            joint: self.joint.clone(),
        }
    }
}

/// A task with its models loaded.
#[derive(Debug, Clone)]
pub struct Task {
    pub doc: TaskDoc,
    /// Loaded models: one per class or per instance, depending on the kind.
    pub models: Vec<Ensemble>,
    pub constraints: Constraints,
}

pub fn read_task(path: &Path) -> Result<Task, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let doc: TaskDoc = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    resolve(doc, base)
}

pub fn resolve(doc: TaskDoc, base: &Path) -> Result<Task, CliError> {
    let constraints = parse_constraints(&doc.constraints)?;
    let models = load_models(&doc, base)?;
    let task = Task {
        doc,
        models,
        constraints,
    };
    check_shape(&task)?;
    Ok(task)
}

fn parse_constraints(values: &[Value]) -> Result<Constraints, CliError> {
    let mut single = Vec::new();
    let mut joint = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let at = |e: serde_json::Error| CliError::Input(format!("$.constraints[{i}]: {e}"));
        match v.get("kind").and_then(Value::as_str) {
            Some("differs_only") => joint.push(PairConstraint::deserialize(v).map_err(at)?),
            Some(_) => single.push(Constraint::deserialize(v).map_err(at)?),
            None => return Err(CliError::Input(format!("$.constraints[{i}]: missing \"kind\""))),
        }
    }
    let single = match single.len() {
        0 => Constraint::none(),
        1 => single.pop().unwrap(),
        _ => Constraint::all_of(single),
    };
    Ok(Constraints { single, joint })
}

fn load_file(base: &Path, rel: &Path) -> Result<Vec<Ensemble>, CliError> {
    let path = base.join(rel);
    let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    model_io::parse_any(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn load_single(base: &Path, rel: &Path) -> Result<Ensemble, CliError> {
    let mut models = load_file(base, rel)?;
    if models.len() != 1 {
        return Err(CliError::Input(format!(
            "{}: expected a single-output model, found {} classes",
            rel.display(),
            models.len()
        )));
    }
    Ok(models.pop().unwrap())
}

fn load_models(doc: &TaskDoc, base: &Path) -> Result<Vec<Ensemble>, CliError> {
    let paths: Vec<&PathBuf> = doc.model.iter().chain(&doc.models).collect();
    if paths.is_empty() {
        return Err(CliError::Input("task names no model".into()));
    }
    if doc.model.is_some() && !doc.models.is_empty() {
        return Err(CliError::Input("give either \"model\" or \"models\", not both".into()));
    }
    match doc.kind {
        TaskKind::Robustness if paths.len() == 1 => load_file(base, paths[0]),
        TaskKind::DiffMaximize if paths.len() == 1 => {
            let m = load_single(base, paths[0])?;
            Ok(vec![m.clone(), m])
        }
        _ => paths.iter().map(|p| load_single(base, p)).collect(),
    }
}

fn check_shape(task: &Task) -> Result<(), CliError> {
    let doc = &task.doc;
    let n = task.models.len();
    let bad = |m: &str| Err(CliError::Input(m.to_string()));
    match doc.kind {
        TaskKind::Maximize | TaskKind::Minimize | TaskKind::Stress | TaskKind::RandomTasks if n != 1 => {
            return bad("this task kind takes exactly one model");
        }
        TaskKind::DiffMaximize if n != 2 => return bad("diff_maximize takes one or two models"),
        TaskKind::Robustness if n < 2 => return bad("robustness needs at least two class models"),
        _ => {}
    }
    if doc.kind != TaskKind::DiffMaximize && !task.constraints.joint.is_empty() {
        return bad("differs_only only applies to diff_maximize tasks");
    }
    if doc.kind == TaskKind::Stress && !doc.constraints.is_empty() {
        return bad("stress tasks are unconstrained");
    }
    if doc.kind == TaskKind::Robustness && doc.robustness.is_none() {
        return bad("robustness task without a \"robustness\" section");
    }
    if doc.kind == TaskKind::RandomTasks && doc.random_tasks.is_none() {
        return bad("random_tasks task without a \"random_tasks\" section");
    }
    let attrs = task.models[0].num_attributes();
    if task.models.iter().any(|m| m.num_attributes() != attrs) {
        return bad("models disagree on the number of attributes");
    }
    let cfg = &doc.config;
    if cfg.merge_l.is_some_and(|l| l < 2) {
        return bad("merge_L must be at least 2");
    }
    if cfg.time_budget_s.is_some_and(|t| !(t >= 0.0 && t.is_finite())) {
        return bad("time_budget_s must be a non-negative number");
    }
    search_config(cfg)
        .validate()
        .map_err(|e| CliError::Input(e.to_string()))
}

fn memory_bytes(cfg: &ConfigDoc) -> usize {
    let mb = cfg.memory_budget_mb.unwrap_or_else(|| {
        std::env::var(MEMORY_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_MEMORY_MB)
    });
    usize::try_from(mb.saturating_mul(1 << 20)).unwrap_or(usize::MAX)
}

pub fn search_config(cfg: &ConfigDoc) -> SearchConfig {
    let d = SearchConfig::default();
    SearchConfig {
        epsilon_start: cfg.epsilon_start.unwrap_or(d.epsilon_start),
        epsilon_step: cfg.epsilon_step.unwrap_or(d.epsilon_step),
        time_budget: cfg.time_budget_s.map(Duration::from_secs_f64),
        node_budget: cfg.node_budget,
        memory_budget: Some(memory_bytes(cfg)),
        tree_order: d.tree_order,
    }
}

pub fn merge_config(cfg: &ConfigDoc) -> MergeConfig {
    MergeConfig {
        group_size: cfg.merge_l.unwrap_or(2),
        time_budget: cfg.time_budget_s.map(Duration::from_secs_f64),
        memory_budget: Some(memory_bytes(cfg)),
        max_steps: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constraints_split_by_kind() {
        let vals: Vec<Value> = serde_json::from_str(
            r#"[{"kind":"box","intervals":[{"attr":0,"lo":1.0}]},
                {"kind":"differs_only","attrs":[1]},
                {"kind":"at_most_k","attrs":[0,1],"k":1}]"#,
        )
        .unwrap();
        let c = parse_constraints(&vals).unwrap();
        assert_eq!(c.joint, vec![PairConstraint::differs_only(vec![1])]);
        assert!(matches!(c.single, Constraint::AllOf { ref parts } if parts.len() == 2));
    }

    #[test]
    fn unknown_constraint_kind_names_index() {
        let vals: Vec<Value> = serde_json::from_str(r#"[{"kind":"box","intervals":[]},{"kind":"l2"}]"#).unwrap();
        let err = parse_constraints(&vals).unwrap_err().to_string();
        assert!(err.contains("$.constraints[1]"), "{err}");
    }

    #[test]
    fn config_defaults() {
        let cfg: ConfigDoc = serde_json::from_str(r#"{"merge_L": 3, "memory_budget_mb": 1}"#).unwrap();
        assert_eq!(cfg.algorithm, AlgorithmName::Veritas);
        assert_eq!(merge_config(&cfg).group_size, 3);
        assert_eq!(search_config(&cfg).memory_budget, Some(1 << 20));
        assert_eq!(search_config(&cfg).epsilon_start, 0.5);
    }
}
