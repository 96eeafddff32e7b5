use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use treeverify::constraints::Constraint;
use treeverify::model_io;
use treeverify::tasks::compute_metrics;
use treeverify::BoundsTrace;

use crate::error::CliError;
use crate::exec::{self, Outcome};
use crate::result::{write_json, write_trace, BatchEntry, ResultDoc, RobustnessDoc, RunSummary};
use crate::task::{read_task, resolve, AlgorithmName, ConfigDoc, GeneratedDoc, Task, TaskDoc, TaskKind};

pub const RESULT_FILE: &str = "result.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const MANIFEST_FILE: &str = "manifest.json";

fn prepare_out(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))
}

fn summary(alg: AlgorithmName, out: &Outcome, file: &str) -> RunSummary {
    RunSummary::new(alg, &out.trace, out.witnesses.clone(), file, out.expansions)
}

pub fn cmd_run(task_file: &Path, out: &Path, jobs: usize) -> Result<(), CliError> {
    let task = read_task(task_file)?;
    prepare_out(out)?;
    let alg = task.doc.config.algorithm;
    let mut doc = ResultDoc::new(task.doc.kind);
    match task.doc.kind {
        TaskKind::Robustness => {
            let r = exec::robustness(&task, alg)?;
            write_trace(&out.join(TRACE_FILE), &r.trace)?;
            let witnesses = r.result.adversarial_witness.iter().cloned().collect();
            doc.result = Some(RunSummary::new(alg, &r.trace, witnesses, TRACE_FILE, None));
            doc.robustness = Some(RobustnessDoc::from(&r.result));
        }
        TaskKind::RandomTasks => doc.tasks = Some(run_batch(&task, out, jobs)?),
        _ => {
            let o = exec::solve(&task, alg)?;
            write_trace(&out.join(TRACE_FILE), &o.trace)?;
            doc.result = Some(summary(alg, &o, TRACE_FILE));
        }
    }
    write_json(&out.join(RESULT_FILE), &doc)
}

/// `min` traces are compared as traces of `max -T`, so that a smaller upper
/// bound is always the better one.
fn as_max(trace: &BoundsTrace, kind: TaskKind) -> BoundsTrace {
    let mut t = trace.clone();
    if kind == TaskKind::Minimize {
        for e in &mut t.entries {
            let (u, l) = (e.upper, e.lower);
            e.upper = -l;
            e.lower = -u;
        }
    }
    t
}

pub fn cmd_compare(task_file: &Path, out: &Path) -> Result<(), CliError> {
    let task = read_task(task_file)?;
    if matches!(task.doc.kind, TaskKind::Robustness | TaskKind::RandomTasks) {
        return Err(CliError::Input(
            "compare takes maximize, minimize, diff_maximize or stress tasks".into(),
        ));
    }
    prepare_out(out)?;
    let ours = exec::solve(&task, AlgorithmName::Veritas)?;
    let base = exec::solve(&task, AlgorithmName::Merge)?;
    let (f_ours, f_base) = ("trace_veritas.csv", "trace_merge.csv");
    write_trace(&out.join(f_ours), &ours.trace)?;
    write_trace(&out.join(f_base), &base.trace)?;
    let kind = task.doc.kind;
    let metrics = compute_metrics(&as_max(&ours.trace, kind), &as_max(&base.trace, kind));
    write_json(&out.join(METRICS_FILE), &metrics)?;
    let mut doc = ResultDoc::new(kind);
    doc.result = Some(summary(AlgorithmName::Veritas, &ours, f_ours));
    doc.baseline = Some(summary(AlgorithmName::Merge, &base, f_base));
    doc.metrics = Some(metrics);
    write_json(&out.join(RESULT_FILE), &doc)
}

fn run_batch(task: &Task, out: &Path, jobs: usize) -> Result<Vec<BatchEntry>, CliError> {
    let spec = task.doc.random_tasks.as_ref().expect("checked when the task was loaded");
    if spec.fractions.is_empty() {
        return Err(CliError::Input("random_tasks.fractions is empty".into()));
    }
    let seed = task.doc.config.seed.unwrap_or(0);
    let ens = &task.models[0];
    let alg = task.doc.config.algorithm;
    let entries = pool(jobs)?.install(|| {
        (0..spec.count)
            .into_par_iter()
            .map(|i| {
                let mut entry = BatchEntry {
                    index: i,
                    target_fraction: exec::task_fraction(&spec.fractions, i),
                    seed: exec::task_seed(seed, i),
                    achieved_fraction: None,
                    result: None,
                    error: None,
                };
                let generated = match exec::random_constraint(ens, &spec.fractions, seed, i) {
                    Ok(g) => g,
                    Err(e) => {
                        entry.error = Some(e.to_string());
                        return Ok(entry);
                    }
                };
                entry.achieved_fraction = Some(generated.achieved_fraction);
                let mut sub = task.clone();
                sub.doc.kind = TaskKind::Maximize;
                sub.constraints.single = Constraint::all_of(vec![
                    task.constraints.single.clone(),
                    Constraint::boxed(generated.intervals),
                ]);
                match exec::solve(&sub, alg) {
                    Ok(o) => {
                        let file = format!("trace_{i:03}.csv");
                        write_trace(&out.join(&file), &o.trace)?;
                        entry.result = Some(summary(alg, &o, &file));
                    }
                    Err(e @ CliError::Internal(_)) => return Err(e),
                    Err(e) => entry.error = Some(e.to_string()),
                }
                Ok(entry)
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    Ok(entries)
}

/// One line of the gen-tasks manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub index: usize,
    pub target_fraction: f64,
    pub seed: u64,
    pub file: Option<String>,
    pub achieved_fraction: Option<f64>,
    pub error: Option<String>,
}

pub fn cmd_gen_tasks(
    model: &Path,
    count: usize,
    fractions: &[f64],
    seed: u64,
    out: &Path,
    jobs: usize,
) -> Result<(), CliError> {
    if fractions.is_empty() {
        return Err(CliError::Input("--fractions needs at least one value".into()));
    }
    let model_path: PathBuf = model.canonicalize().map_err(|e| CliError::io(model, e))?;
    let bytes = std::fs::read(&model_path).map_err(|e| CliError::io(&model_path, e))?;
    let mut models = model_io::parse_any(&bytes)
        .map_err(|e| CliError::Input(format!("{}: {e}", model.display())))?;
    if models.len() != 1 {
        return Err(CliError::Input(format!(
            "{}: expected a single-output model, found {} classes",
            model.display(),
            models.len()
        )));
    }
    let ens = models.pop().unwrap();
    prepare_out(out)?;

    let manifest = pool(jobs)?.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let mut entry = ManifestEntry {
                    index: i,
                    target_fraction: exec::task_fraction(fractions, i),
                    seed: exec::task_seed(seed, i),
                    file: None,
                    achieved_fraction: None,
                    error: None,
                };
                match exec::random_constraint(&ens, fractions, seed, i) {
                    Ok(g) => {
                        let doc = TaskDoc {
                            kind: TaskKind::Maximize,
                            model: Some(model_path.clone()),
                            models: Vec::new(),
                            constraints: vec![serde_json::to_value(Constraint::boxed(g.intervals))
                                .map_err(|e| CliError::Internal(e.to_string()))?],
                            robustness: None,
                            random_tasks: None,
                            config: ConfigDoc {
                                seed: Some(g.seed),
                                ..ConfigDoc::default()
                            },
                            generated: Some(GeneratedDoc {
                                target_fraction: g.target_fraction,
                                achieved_fraction: g.achieved_fraction,
                                seed: g.seed,
                            }),
                        };
                        // a generated task must load like any hand-written one
                        resolve(doc.clone(), Path::new("/"))?;
                        let file = format!("task_{i:03}.json");
                        write_json(&out.join(&file), &doc)?;
                        entry.file = Some(file);
                        entry.achieved_fraction = Some(g.achieved_fraction);
                    }
                    Err(e) => {
                        eprintln!("task {i}: {e}");
                        entry.error = Some(e.to_string());
                    }
                }
                Ok(entry)
            })
            .collect::<Result<Vec<_>, CliError>>()
    })?;
    write_json(&out.join(MANIFEST_FILE), &manifest)
}
