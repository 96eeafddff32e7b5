use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::json;
use tempfile::TempDir;
use treeverify::ensemble::{Tree, TreeNode};
use treeverify::model_io::{serialize_model, serialize_multiclass};
use treeverify::random::RandomEnsembleSpec;
use treeverify::tasks::{reachable_fraction, FRACTION_TOLERANCE, Metrics};
use treeverify::{Ensemble, Hyperbox, Status};
use treeverify_cli::commands::ManifestEntry;
use treeverify_cli::result::ResultDoc;
use treeverify_cli::task::TaskDoc;

fn stump(tau: f64, l: f64, r: f64) -> Tree {
    Tree::new(&TreeNode::split(0, tau, TreeNode::leaf(l), TreeNode::leaf(r))).unwrap()
}

fn f1() -> Ensemble {
    Ensemble::new(vec![stump(2.0, 1.0, 3.0), stump(4.0, 10.0, 5.0)], 1).unwrap()
}

fn f2() -> Ensemble {
    Ensemble::new(vec![stump(2.0, 1.0, 3.0), stump(2.0, 10.0, 5.0)], 1).unwrap()
}

struct Work {
    dir: TempDir,
}

impl Work {
    fn new() -> Self {
        let w = Work {
            dir: tempfile::tempdir().unwrap(),
        };
        w.write("f1.json", &serialize_model(&f1()));
        w.write("f2.json", &serialize_model(&f2()));
        w
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, bytes).unwrap();
        p
    }

    fn task(&self, name: &str, doc: serde_json::Value) -> PathBuf {
        self.write(name, doc.to_string().as_bytes())
    }
}

fn treeverify(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_treeverify"));
    cmd.args(args).env_remove("TREEVERIFY_MEMORY_MB");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn run_cmd(sub: &str, task: &Path, out: &Path) -> Output {
    treeverify(&[sub, task.to_str().unwrap(), "--out", out.to_str().unwrap()], &[])
}

fn ok(o: &Output) {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn result_doc(dir: &Path) -> ResultDoc {
    let text = std::fs::read_to_string(dir.join("result.json")).unwrap();
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("result.json does not match the schema: {e}\n{text}"))
}

/// Rows of a trace file, after checking its format and monotonicity.
fn csv_rows(path: &Path) -> Vec<(f64, f64, f64)> {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t_seconds,upper,lower"));
    let rows: Vec<(f64, f64, f64)> = lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(v.len(), 3, "{l}");
            (v[0], v[1], v[2])
        })
        .collect();
    for w in rows.windows(2) {
        assert!(w[1].0 > w[0].0, "time not increasing: {w:?}");
        assert!(w[1].1 <= w[0].1, "upper rose: {w:?}");
        assert!(w[1].2 >= w[0].2, "lower fell: {w:?}");
    }
    rows
}

fn fin(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[test]
fn maximize_f1_with_veritas_is_exact() {
    let w = Work::new();
    let t = w.task("t.json", json!({"kind": "maximize", "model": "f1.json"}));
    let out = w.path("out");
    ok(&run_cmd("run", &t, &out));
    let doc = result_doc(&out);
    let r = doc.result.unwrap();
    assert_eq!(r.status, Status::Exact);
    assert_eq!((r.upper, r.lower), (Some(13.0), Some(13.0)));
    assert_eq!(f1().eval(&r.witnesses[0]).unwrap(), 13.0);
    let rows = csv_rows(&out.join(&r.trace_file));
    let last = rows.last().unwrap();
    assert_eq!((fin(last.1), fin(last.2)), (r.upper, r.lower));
}

#[test]
fn maximize_f1_with_merge_takes_few_rows() {
    let w = Work::new();
    let t = w.task(
        "t.json",
        json!({"kind": "maximize", "model": "f1.json", "config": {"algorithm": "merge", "merge_L": 2}}),
    );
    let out = w.path("out");
    ok(&run_cmd("run", &t, &out));
    let r = result_doc(&out).result.unwrap();
    assert_eq!(r.status, Status::Exact);
    assert_eq!((r.upper, r.lower), (Some(13.0), Some(13.0)));
    // ceil(log2 M) + 1 rows for M = 2 trees
    let rows = csv_rows(&out.join("trace.csv"));
    assert!(!rows.is_empty() && rows.len() <= 2, "{rows:?}");
}

#[test]
fn minimize_and_difference_agree_with_oracle() {
    let w = Work::new();
    let cases = [
        (json!({"kind": "minimize", "model": "f1.json"}), 8.0, &["veritas", "oracle", "merge"][..]),
        (
            json!({"kind": "diff_maximize", "models": ["f1.json", "f2.json"],
                   "constraints": [{"kind": "differs_only", "attrs": []}]}),
            0.0,
            &["veritas", "oracle", "merge"][..],
        ),
        (json!({"kind": "diff_maximize", "models": ["f1.json", "f2.json"]}), 11.0 - 8.0, &["veritas", "oracle"][..]),
    ];
    for (i, (doc, expected, algs)) in cases.into_iter().enumerate() {
        let mut values = Vec::new();
        for &alg in algs {
            let mut doc = doc.clone();
            doc["config"] = json!({"algorithm": alg});
            let t = w.task(&format!("t{i}{alg}.json"), doc);
            let out = w.path(&format!("o{i}{alg}"));
            ok(&run_cmd("run", &t, &out));
            let r = result_doc(&out).result.unwrap();
            assert_eq!(r.status, Status::Exact, "case {i} {alg}");
            values.push(r.lower.unwrap());
        }
        assert!(values.iter().all(|&v| v == expected), "case {i}: {values:?}");
    }
}

#[test]
fn robustness_task_reports_every_step() {
    let w = Work::new();
    // class 1 outscores class 0 only when X0 >= 10, so from x = 3 the distance is 7
    let src = Ensemble::constant(1, 0.0);
    let tgt = Ensemble::new(vec![stump(10.0, -1.0, 1.0)], 1).unwrap();
    w.write("mc.json", &serialize_multiclass(&[src, tgt]));
    for alg in ["veritas", "merge"] {
        let t = w.task(
            "r.json",
            json!({"kind": "robustness", "model": "mc.json",
                   "robustness": {"x": [3.0], "source": 0, "target": 1, "steps": 10, "integer_grid": true},
                   "config": {"algorithm": alg}}),
        );
        let out = w.path(&format!("out_{alg}"));
        ok(&run_cmd("run", &t, &out));
        let doc = result_doc(&out);
        let rob = doc.robustness.unwrap();
        assert_eq!(rob.per_step.len(), 10);
        assert_eq!(rob.per_step[0].delta, 20.0);
        assert!(rob.delta_lower > 6.9 && rob.delta_lower <= 7.0, "{}", rob.delta_lower);
        assert!(rob.proven_exact);
        assert_eq!(rob.witness_distance, Some(7.0));
        let r = doc.result.unwrap();
        assert_eq!(r.status, Status::Exact);
        assert_eq!((r.upper, r.lower), (Some(7.0), Some(7.0)));
        csv_rows(&out.join("trace.csv"));
    }
}

#[test]
fn compare_f2_both_exact() {
    let w = Work::new();
    let t = w.task("t.json", json!({"kind": "maximize", "model": "f2.json"}));
    let out = w.path("out");
    ok(&run_cmd("compare", &t, &out));
    let m: Metrics = serde_json::from_str(&std::fs::read_to_string(out.join("metrics.json")).unwrap()).unwrap();
    assert!(m.exact_ours && m.exact_baseline);
    assert_eq!((m.gap_ours, m.gap_baseline), (Some(0.0), Some(0.0)));
    assert!(m.ttb.is_some_and(|t| t < 1.0), "{:?}", m.ttb);
    let doc = result_doc(&out);
    assert_eq!(doc.metrics, Some(m));
    for s in [doc.result.unwrap(), doc.baseline.unwrap()] {
        assert_eq!(s.upper, Some(11.0));
        let rows = csv_rows(&out.join(&s.trace_file));
        assert_eq!(rows.last().unwrap().1, 11.0);
    }
}

#[test]
fn compare_infeasible_is_degenerate() {
    let w = Work::new();
    let t = w.task(
        "t.json",
        json!({"kind": "maximize", "model": "f1.json", "constraints": [
            {"kind": "box", "intervals": [{"attr": 0, "lo": 5.0}]},
            {"kind": "box", "intervals": [{"attr": 0, "hi": 1.0}]}]}),
    );
    let out = w.path("out");
    ok(&run_cmd("compare", &t, &out));
    let doc = result_doc(&out);
    for s in [doc.result.unwrap(), doc.baseline.unwrap()] {
        assert_eq!(s.status, Status::Infeasible);
        assert_eq!((s.upper, s.lower), (None, None));
    }
    let m = doc.metrics.unwrap();
    assert!(m.gap_ours_degenerate && m.gap_baseline_degenerate);
    assert_eq!((m.gap_ours, m.gap_baseline), (None, None));
}

#[test]
fn result_schema_holds_for_every_status() {
    let w = Work::new();
    let cases = [
        (json!({"kind": "maximize", "model": "f1.json"}), Status::Exact, vec![]),
        (json!({"kind": "maximize", "model": "f1.json", "config": {"node_budget": 0}}), Status::Timeout, vec![]),
        (json!({"kind": "maximize", "model": "f1.json", "config": {"memory_budget_mb": 0}}), Status::Memory, vec![]),
        (json!({"kind": "maximize", "model": "f1.json"}), Status::Memory, vec![("TREEVERIFY_MEMORY_MB", "0")]),
        (
            json!({"kind": "maximize", "model": "f1.json",
                   "constraints": [{"kind": "one_out_of_k", "groups": [[0]]},
                                   {"kind": "box", "intervals": [{"attr": 0, "hi": 0.25}]}]}),
            Status::Infeasible,
            vec![],
        ),
    ];
    for (i, (doc, status, env)) in cases.into_iter().enumerate() {
        let t = w.task(&format!("t{i}.json"), doc);
        let out = w.path(&format!("o{i}"));
        let o = treeverify(&["run", t.to_str().unwrap(), "--out", out.to_str().unwrap()], &env);
        ok(&o);
        let r = result_doc(&out).result.unwrap();
        assert_eq!(r.status, status, "case {i}");
        let rows = csv_rows(&out.join("trace.csv"));
        let last = rows.last().unwrap();
        assert_eq!((fin(last.1), fin(last.2)), (r.upper, r.lower), "case {i}");
    }
}

#[test]
fn malformed_tasks_exit_with_2() {
    let w = Work::new();
    let bad = [
        "{not json",
        r#"{"kind": "maximise", "model": "f1.json"}"#,
        r#"{"kind": "maximize", "model": "missing.json"}"#,
        r#"{"kind": "maximize", "model": "f1.json", "constraints": [{"kind": "l2_ball"}]}"#,
        r#"{"kind": "maximize", "model": "f1.json", "config": {"epsilon_start": 2.0}}"#,
        r#"{"kind": "maximize", "model": "f1.json", "config": {"merge_L": 1}}"#,
        r#"{"kind": "maximize", "model": "f1.json", "extra": 1}"#,
        r#"{"kind": "robustness", "model": "f1.json"}"#,
        r#"{"kind": "maximize", "model": "f1.json", "config": {"algorithm": "merge"},
            "constraints": [{"kind": "at_most_k", "attrs": [0], "k": 0}]}"#,
    ];
    for (i, text) in bad.iter().enumerate() {
        let t = w.write(&format!("bad{i}.json"), text.as_bytes());
        let o = run_cmd("run", &t, &w.path("out"));
        assert_eq!(o.status.code(), Some(2), "case {i}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(treeverify(&["run"], &[]).status.code(), Some(2));
}

fn random_model(w: &Work) -> (Ensemble, PathBuf) {
    let spec = RandomEnsembleSpec {
        num_trees: 12,
        num_attributes: 6,
        min_depth: 3,
        max_depth: 4,
        ..RandomEnsembleSpec::default()
    };
    let ens = spec.generate_seeded(5);
    let p = w.write("rand.json", &serialize_model(&ens));
    (ens, p)
}

fn gen(model: &Path, fractions: &str, seed: &str, out: &Path) -> Vec<ManifestEntry> {
    let o = treeverify(
        &[
            "gen-tasks", "--model", model.to_str().unwrap(), "--count", "3", "--fractions", fractions,
            "--seed", seed, "--out", out.to_str().unwrap(), "--jobs", "2",
        ],
        &[],
    );
    ok(&o);
    serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn generated_tasks_hit_their_fractions_deterministically() {
    let w = Work::new();
    let (ens, model) = random_model(&w);
    let (a, b) = (w.path("a"), w.path("b"));
    let ma = gen(&model, "0.1,0.5,1.0", "42", &a);
    let mb = gen(&model, "0.1,0.5,1.0", "42", &b);
    assert_eq!(ma, mb);
    for e in &ma {
        let file = e.file.as_ref().unwrap_or_else(|| panic!("task {} failed: {:?}", e.index, e.error));
        let bytes = std::fs::read(a.join(file)).unwrap();
        assert_eq!(bytes, std::fs::read(b.join(file)).unwrap());
        let doc: TaskDoc = serde_json::from_slice(&bytes).unwrap();
        let intervals: Hyperbox = serde_json::from_value(doc.constraints[0]["intervals"].clone()).unwrap();
        let measured = reachable_fraction(&ens, &intervals).unwrap();
        assert!((measured - e.target_fraction).abs() <= FRACTION_TOLERANCE, "{measured} vs {}", e.target_fraction);

        let out = w.path(&format!("run_{file}"));
        ok(&run_cmd("run", &a.join(file), &out));
        assert!(result_doc(&out).result.is_some());
    }
}

#[test]
fn zero_fraction_is_recorded_per_task() {
    let w = Work::new();
    let (_, model) = random_model(&w);
    let out = w.path("g");
    let m = gen(&model, "0.5,0", "1", &out);
    assert!(m[0].file.is_some() && m[2].file.is_some());
    assert!(m[1].file.is_none());
    assert!(m[1].error.as_ref().unwrap().contains("fraction"));
    assert!(!out.join("task_001.json").exists());
}

#[test]
fn random_task_batch_runs_in_parallel() {
    let w = Work::new();
    random_model(&w);
    let t = w.task(
        "t.json",
        json!({"kind": "random_tasks", "model": "rand.json",
               "random_tasks": {"count": 4, "fractions": [0.3, 0.8]},
               "config": {"seed": 9, "time_budget_s": 5.0}}),
    );
    let out = w.path("out");
    let o = treeverify(&["run", t.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "3"], &[]);
    ok(&o);
    let doc = result_doc(&out);
    assert!(doc.result.is_none());
    let tasks = doc.tasks.unwrap();
    assert_eq!(tasks.len(), 4);
    for (i, e) in tasks.iter().enumerate() {
        assert_eq!(e.index, i);
        let r = e.result.as_ref().unwrap_or_else(|| panic!("task {i}: {:?}", e.error));
        csv_rows(&out.join(&r.trace_file));
    }
}
