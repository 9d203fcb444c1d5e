use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;
use vtirt::checkpoint::Checkpoint;
use vtirt::config::Config;
use vtirt::data::{Dataset, LoadOptions};
use vtirt::eval::{fold_split, next_step_predictions};
use vtirt::synth::simulate;
use vtirt_core::recognition::{linspace, potential_grid};

const CONFIG: &str = r#"
[model]
sigma_theta = 0.25

[train]
epochs = 4
batch_size = 8
seed = 3

[train.optimizer]
learning_rate = 0.01

[synth]
n_learners = 40
n_items = 8
seed = 17
"#;

fn vtirt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vtirt")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = vtirt(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("config.toml"), config).unwrap();
        Workspace { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn p(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_owned()
    }

    fn simulated(config: &str) -> Self {
        let w = Workspace::new(config);
        ok(&["simulate", "--config", &w.p("config.toml"), "--out", &w.p("data.jsonl")]);
        w
    }

    fn trained(config: &str) -> Self {
        let w = Workspace::simulated(config);
        ok(&["train", "--data", &w.p("data.jsonl"), "--config", &w.p("config.toml"), "--out", &w.p("model.json"), "--log", &w.p("log.jsonl")]);
        w
    }
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    let mut rows = vec![r.headers().unwrap().iter().map(str::to_owned).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(str::to_owned).collect()));
    rows
}

#[test]
fn simulate_writes_dataset_and_sidecars() {
    let w = Workspace::simulated(CONFIG);
    let cfg = Config::parse(CONFIG).unwrap().synth_config().unwrap();
    let expected = simulate(&cfg).unwrap();
    let loaded = Dataset::load(&w.path("data.jsonl"), LoadOptions::default()).unwrap();
    assert_eq!(loaded, expected.dataset);
    assert_eq!(loaded.len(), 320);
    let items: Vec<vtirt_core::ItemParams> = serde_json::from_str(&read(&w.path("items.json"))).unwrap();
    assert_eq!(items, expected.true_items.into_values().collect::<Vec<_>>());
    let abilities: Vec<vtirt_core::Trajectory> = serde_json::from_str(&read(&w.path("abilities.json"))).unwrap();
    assert_eq!(abilities, expected.true_abilities.into_values().collect::<Vec<_>>());
}

#[test]
fn outputs_create_missing_directories() {
    let w = Workspace::simulated(CONFIG);
    ok(&["simulate", "--config", &w.p("config.toml"), "--out", &w.p("new/syn/data.jsonl")]);
    assert!(w.path("new/syn/items.json").exists());
    ok(&["train", "--data", &w.p("data.jsonl"), "--config", &w.p("config.toml"), "--out", &w.p("runs/a/model.json"), "--log", &w.p("runs/a/log.jsonl")]);
    ok(&["infer", "--model", &w.p("runs/a/model.json"), "--data", &w.p("data.jsonl"), "--out", &w.p("out/infer/abilities.csv")]);
    assert!(w.path("out/infer/abilities.csv").exists());
}

#[test]
fn simulate_is_byte_reproducible_and_refuses_overwrite() {
    let a = Workspace::simulated(CONFIG);
    let b = Workspace::simulated(CONFIG);
    for f in ["data.jsonl", "items.json", "abilities.json"] {
        assert_eq!(std::fs::read(a.path(f)).unwrap(), std::fs::read(b.path(f)).unwrap(), "{f}");
    }
    let again = vtirt(&["simulate", "--config", &a.p("config.toml"), "--out", &a.p("data.jsonl")]);
    assert_eq!(again.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    ok(&["simulate", "--config", &a.p("config.toml"), "--out", &a.p("data.jsonl"), "--force"]);
    let other = Workspace::simulated(&CONFIG.replace("seed = 17", "seed = 18"));
    assert_ne!(std::fs::read(a.path("data.jsonl")).unwrap(), std::fs::read(other.path("data.jsonl")).unwrap());
}

#[test]
fn exit_codes() {
    let w = Workspace::simulated(CONFIG);
    let missing = vtirt(&["train", "--data", &w.p("nope.jsonl"), "--config", &w.p("config.toml"), "--out", &w.p("m.json")]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.jsonl"));

    assert_eq!(vtirt(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(vtirt(&[]).status.code(), Some(2));

    std::fs::write(w.path("bad.toml"), "[train]\nepoch = 3\n").unwrap();
    let bad = vtirt(&["train", "--data", &w.p("data.jsonl"), "--config", &w.p("bad.toml"), "--out", &w.p("m.json")]);
    assert_eq!(bad.status.code(), Some(2));

    std::fs::write(w.path("dup.jsonl"), "{\"learner\":\"a\",\"item\":\"x\",\"correct\":1,\"step\":1}\n{\"learner\":\"a\",\"item\":\"y\",\"correct\":1,\"step\":1}\n").unwrap();
    let dup = vtirt(&["train", "--data", &w.p("dup.jsonl"), "--config", &w.p("config.toml"), "--out", &w.p("m.json")]);
    assert_eq!(dup.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&dup.stderr).contains("dup.jsonl:2"));

    let mut cfg = CONFIG.replace("learning_rate = 0.01", "learning_rate = 1e300");
    cfg = cfg.replace("epochs = 4", "epochs = 2");
    std::fs::write(w.path("huge.toml"), cfg).unwrap();
    let nan = vtirt(&["train", "--data", &w.p("data.jsonl"), "--config", &w.p("huge.toml"), "--out", &w.p("m.json")]);
    assert_eq!(nan.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&nan.stderr).contains("epoch 1, batch 2"));
}

fn strip_wall_time(log: &str) -> Vec<String> {
    log.lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("wall_time");
            v.to_string()
        })
        .collect()
}

#[test]
fn train_is_deterministic_and_logs_json_lines() {
    let a = Workspace::trained(CONFIG);
    let b = Workspace::trained(CONFIG);
    assert_eq!(read(&a.path("model.json")), read(&b.path("model.json")));
    let log = read(&a.path("log.jsonl"));
    assert_eq!(strip_wall_time(&log), strip_wall_time(&read(&b.path("log.jsonl"))));
    assert_eq!(log.lines().count(), 4);
    for (i, line) in log.lines().enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["epoch"], i + 1);
        assert!(v["train_elbo"].is_f64() && v["val_elbo"].is_f64() && v["wall_time"].is_f64());
    }
    let stdout = ok(&["train", "--data", &a.p("data.jsonl"), "--config", &a.p("config.toml"), "--out", &a.p("m2.json"), "--epochs", "1"]);
    assert_eq!(String::from_utf8(stdout.stdout).unwrap().lines().count(), 1);
}

#[test]
fn resume_reproduces_next_epochs() {
    let full = Workspace::trained(CONFIG);
    let w = &full;
    ok(&["train", "--data", &w.p("data.jsonl"), "--config", &w.p("config.toml"), "--out", &w.p("half.json"), "--log", &w.p("half.jsonl"), "--epochs", "2"]);
    ok(&[
        "train", "--data", &w.p("data.jsonl"), "--config", &w.p("config.toml"), "--out", &w.p("resumed.json"),
        "--log", &w.p("resumed.jsonl"), "--resume", &w.p("half.json"),
    ]);
    let full_log = strip_wall_time(&read(&w.path("log.jsonl")));
    assert_eq!(strip_wall_time(&read(&w.path("resumed.jsonl"))), full_log[2..]);
    assert_eq!(read(&w.path("resumed.json")), read(&w.path("model.json")));
}

#[test]
fn infer_matches_library_and_handles_empty_data() {
    let w = Workspace::trained(CONFIG);
    ok(&["infer", "--model", &w.p("model.json"), "--data", &w.p("data.jsonl"), "--out", &w.p("traj.csv")]);
    let rows = csv_rows(&w.path("traj.csv"));
    assert_eq!(rows[0], vec!["learner", "step", "mean", "variance"]);
    let model = Checkpoint::load(&w.path("model.json")).unwrap().trained_model().unwrap();
    let data = Dataset::load(&w.path("data.jsonl"), LoadOptions::default()).unwrap();
    let mut expected = Vec::new();
    for l in &data.learners {
        let inf = model.infer_trajectory(&l.records).unwrap();
        for (t, r) in l.records.iter().enumerate() {
            expected.push(vec![r.learner_id.clone(), r.step.to_string(), inf.marginals.means[t].to_string(), inf.marginals.variances[t].to_string()]);
        }
    }
    assert_eq!(rows[1..], expected[..]);
    for row in &rows[1..] {
        assert!(row[2].parse::<f64>().is_ok() && row[3].parse::<f64>().unwrap() > 0.0);
    }

    std::fs::write(w.path("empty.jsonl"), "").unwrap();
    ok(&["infer", "--model", &w.p("model.json"), "--data", &w.p("empty.jsonl"), "--out", &w.p("empty.csv")]);
    assert_eq!(read(&w.path("empty.csv")), "learner,step,mean,variance\n");
}

#[test]
fn infer_emits_a_column_for_knowledge_components() {
    let w = Workspace::trained(CONFIG);
    std::fs::write(
        w.path("kc.jsonl"),
        "{\"learner\":\"z\",\"item\":\"1\",\"correct\":1,\"step\":1,\"kc\":[\"a\",\"b\"]}\n{\"learner\":\"z\",\"item\":\"new\",\"correct\":0,\"step\":2,\"kc\":[\"b\"]}\n",
    )
    .unwrap();
    let out = ok(&["infer", "--model", &w.p("model.json"), "--data", &w.p("kc.jsonl"), "--out", &w.p("kc.csv")]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: 1"));
    let rows = csv_rows(&w.path("kc.csv"));
    assert_eq!(rows[0], vec!["learner", "step", "mean", "variance", "kc"]);
    let keys: Vec<(&str, &str)> = rows[1..].iter().map(|r| (r[1].as_str(), r[4].as_str())).collect();
    assert_eq!(keys, vec![("1", "a"), ("1", "b"), ("2", "b")]);
}

#[test]
fn eval_reports_auroc_and_optional_recovery() {
    let w = Workspace::trained(CONFIG);
    ok(&["eval", "--model", &w.p("model.json"), "--data", &w.p("data.jsonl"), "--out", &w.p("plain.json"), "--predictions", &w.p("pred.csv"), "--summary", &w.p("summary.csv")]);
    let plain: serde_json::Value = serde_json::from_str(&read(&w.path("plain.json"))).unwrap();
    assert!(plain.get("recovery").is_none());
    let model = Checkpoint::load(&w.path("model.json")).unwrap().trained_model().unwrap();
    let data = Dataset::load(&w.path("data.jsonl"), LoadOptions::default()).unwrap();
    let preds = next_step_predictions(&model, &data, false).unwrap();
    assert_eq!(plain["auroc"].as_f64().unwrap(), preds.auroc().unwrap());
    assert_eq!(plain["predictions"], 320);
    let rows = csv_rows(&w.path("pred.csv"));
    assert_eq!(rows.len(), 321);
    assert_eq!(rows[1][3].parse::<f64>().unwrap(), preds.records[0].probability);
    let summary = csv_rows(&w.path("summary.csv"));
    assert_eq!(summary[1][0], "vtirt");
    assert_eq!(summary[1][3], "");

    ok(&[
        "eval", "--model", &w.p("model.json"), "--data", &w.p("data.jsonl"), "--out", &w.p("full.json"),
        "--items", &w.p("items.json"), "--abilities", &w.p("abilities.json"),
    ]);
    let full: serde_json::Value = serde_json::from_str(&read(&w.path("full.json"))).unwrap();
    let rec = &full["recovery"];
    for key in ["ability_r", "discrimination_r", "difficulty_r", "inference_seconds"] {
        assert!(rec[key].is_f64(), "{key}");
    }
    assert_eq!(rec["n_abilities"], 320);
}

#[test]
fn folds_route_learners_disjointly() {
    let w = Workspace::trained(CONFIG);
    let mut seen = BTreeSet::new();
    for fold in 0..4 {
        let f = fold.to_string();
        let out = w.p(&format!("fold{fold}.json"));
        let preds = w.p(&format!("fold{fold}.csv"));
        ok(&["eval", "--model", &w.p("model.json"), "--data", &w.p("data.jsonl"), "--out", &out, "--predictions", &preds, "--folds", "4", "--fold", &f, "--split-seed", "9"]);
        let learners: BTreeSet<String> = csv_rows(Path::new(&preds))[1..].iter().map(|r| r[0].clone()).collect();
        assert_eq!(learners.len(), 10);
        assert!(learners.is_disjoint(&seen));
        seen.extend(learners);
        let (_, held) = fold_split(40, 4, fold, 9).unwrap();
        let expected: BTreeSet<String> = held.iter().map(|i| format!("{i:02}")).collect();
        assert_eq!(seen.intersection(&expected).count(), 10);
    }
    assert_eq!(seen.len(), 40);
    ok(&[
        "train", "--data", &w.p("data.jsonl"), "--config", &w.p("config.toml"), "--out", &w.p("f.json"),
        "--log", &w.p("f.jsonl"), "--folds", "4", "--fold", "0", "--split-seed", "9",
    ]);
    assert_eq!(vtirt(&["eval", "--model", &w.p("model.json"), "--data", &w.p("data.jsonl"), "--out", &w.p("x.json"), "--folds", "4"]).status.code(), Some(2));
}

#[test]
fn potential_grid_exports_both_blocks() {
    let w = Workspace::trained(CONFIG);
    ok(&["potential-grid", "--model", &w.p("model.json"), "--out", &w.p("grid.csv"), "--a-min", "0.25", "--a-max", "3", "--a-steps", "4", "--d-min", "-1", "--d-max", "1", "--d-steps", "3"]);
    let rows = csv_rows(&w.path("grid.csv"));
    assert_eq!(rows[0], vec!["correct", "a", "d", "mu", "log_var"]);
    assert_eq!(rows.len(), 1 + 2 * 12);
    let model = Checkpoint::load(&w.path("model.json")).unwrap().trained_model().unwrap();
    let (av, dv) = (linspace(0.25, 3.0, 4), linspace(-1.0, 1.0, 3));
    for (block, correct) in [(0, true), (1, false)] {
        let g = potential_grid(&model.net(), correct, &av, &dv);
        for i in 0..3 {
            for j in 0..4 {
                let row = &rows[1 + block * 12 + i * 4 + j];
                assert_eq!(row[0], if correct { "1" } else { "0" });
                assert_eq!(row[1].parse::<f64>().unwrap(), av[j]);
                assert_eq!(row[2].parse::<f64>().unwrap(), dv[i]);
                assert_eq!(row[3].parse::<f64>().unwrap(), g.cells[i][j].0);
                assert_eq!(row[4].parse::<f64>().unwrap(), g.cells[i][j].1);
            }
        }
    }
    let dl = Workspace::trained(&CONFIG.replace("seed = 3", "seed = 3\nvariant = \"dir_loc\""));
    let out = vtirt(&["potential-grid", "--model", &dl.p("model.json"), "--out", &dl.p("grid.csv")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn vibo_models_support_transfer_commands() {
    let w = Workspace::trained(&CONFIG.replace("seed = 3", "seed = 3\nvariant = \"vibo_poe\""));
    ok(&["infer", "--model", &w.p("model.json"), "--data", &w.p("data.jsonl"), "--out", &w.p("static.csv")]);
    ok(&["infer", "--model", &w.p("model.json"), "--data", &w.p("data.jsonl"), "--out", &w.p("transfer.csv"), "--transfer"]);
    let stat = csv_rows(&w.path("static.csv"));
    assert_eq!(stat[1][2], stat[2][2]);
    assert_ne!(stat, csv_rows(&w.path("transfer.csv")));
    ok(&["eval", "--model", &w.p("model.json"), "--data", &w.p("data.jsonl"), "--out", &w.p("e.json"), "--transfer"]);
    let e: serde_json::Value = serde_json::from_str(&read(&w.path("e.json"))).unwrap();
    assert_eq!(e["transfer"], true);
    assert_eq!(e["variant"], "vibo_poe");

    let v = Workspace::trained(CONFIG);
    let out = vtirt(&["eval", "--model", &v.p("model.json"), "--data", &v.p("data.jsonl"), "--out", &v.p("e.json"), "--transfer"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_writes_json_rows() {
    let w = Workspace::trained(CONFIG);
    ok(&["bench", "--model", &w.p("model.json"), "--trajectories", "20", "--lengths", "5,10", "--repeats", "2", "--out", &w.p("bench.json")]);
    let rows: serde_json::Value = serde_json::from_str(&read(&w.path("bench.json"))).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    assert_eq!(rows[1]["length"], 10);
}
