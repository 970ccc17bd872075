//! Black-box tests of the `gft` binary: artifact shapes, exit codes,
//! warnings, determinism, and config resolution through real invocations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn gft() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gft"))
}

fn run(args: &[&str]) -> Output {
    gft().args(args).output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "command failed (code {:?})\nstdout: {}\nstderr: {}",
        output.status.code(),
        stdout(output),
        stderr(output)
    );
}

fn read_json(path: &Path) -> Value {
    let text = fs::read_to_string(path).unwrap_or_else(|_| panic!("missing {}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|_| panic!("bad json in {}", path.display()))
}

/// Data lines of a CSV artifact: comment lines stripped, header kept.
fn csv_lines(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap_or_else(|_| panic!("missing {}", path.display()));
    assert!(
        text.starts_with("# config: "),
        "{} lacks the config comment",
        path.display()
    );
    text.lines()
        .filter(|line| !line.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Three sources at increasing rotation away from the target's concept
/// (label follows f0), plus unlabeled target training data and a labeled
/// target test split.
const THREE_SOURCES: &str = "\
domain,split,label,f0,f1
s1,train,1,0.82,0.12
s1,train,1,0.74,0.05
s1,train,1,0.88,0.18
s1,train,-1,-0.80,-0.11
s1,train,-1,-0.71,-0.04
s1,train,-1,-0.86,-0.16
s2,train,1,0.61,0.34
s2,train,1,0.55,0.40
s2,train,1,0.66,0.29
s2,train,-1,-0.60,-0.36
s2,train,-1,-0.53,-0.41
s2,train,-1,-0.64,-0.30
s3,train,1,0.31,0.62
s3,train,1,0.25,0.55
s3,train,1,0.36,0.67
s3,train,-1,-0.30,-0.60
s3,train,-1,-0.24,-0.56
s3,train,-1,-0.35,-0.66
target,train,,0.84,0.06
target,train,,0.78,-0.02
target,train,,0.90,0.10
target,train,,-0.83,-0.07
target,train,,-0.76,0.01
target,train,,-0.88,-0.12
target,test,1,0.81,0.04
target,test,1,0.87,0.09
target,test,-1,-0.82,-0.05
target,test,-1,-0.79,-0.09
";

/// Single source plus target: every method trains on the same stage list.
const ONE_SOURCE: &str = "\
domain,split,label,f0,f1
s1,train,1,0.82,0.12
s1,train,1,0.74,0.05
s1,train,-1,-0.80,-0.11
s1,train,-1,-0.71,-0.04
target,train,,0.84,0.06
target,train,,-0.83,-0.07
target,test,1,0.81,0.04
target,test,-1,-0.82,-0.05
";

/// Two near sources and one source pushed far from everything, so a
/// mid-range threshold isolates it from the target component.
const FAR_THIRD_SOURCE: &str = "\
domain,split,label,f0,f1
s1,train,1,0.82,0.12
s1,train,1,0.74,0.05
s1,train,-1,-0.80,-0.11
s1,train,-1,-0.71,-0.04
s2,train,1,0.61,0.34
s2,train,1,0.55,0.40
s2,train,-1,-0.60,-0.36
s2,train,-1,-0.53,-0.41
s3,train,1,90.0,88.0
s3,train,1,91.0,89.5
s3,train,-1,88.5,90.5
s3,train,-1,89.5,91.0
target,train,,0.84,0.06
target,train,,0.78,-0.02
target,train,,-0.83,-0.07
target,train,,-0.76,0.01
target,test,1,0.81,0.04
target,test,-1,-0.82,-0.05
";

/// Loads fine (target training data needs no labels) but leaves nothing to
/// evaluate trained models on.
const NO_TARGET_TEST: &str = "\
domain,split,label,f0,f1
s1,train,1,0.82,0.12
s1,train,-1,-0.80,-0.11
target,train,,0.84,0.06
target,train,,-0.83,-0.07
";

struct Workspace {
    _dir: tempfile::TempDir,
    data: PathBuf,
    out: PathBuf,
}

impl Workspace {
    fn new(csv: &str) -> Workspace {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data.csv");
        fs::write(&data, csv).unwrap();
        let out = dir.path().join("out");
        Workspace {
            _dir: dir,
            data,
            out,
        }
    }

    fn data(&self) -> &str {
        self.data.to_str().unwrap()
    }

    fn out(&self) -> &str {
        self.out.to_str().unwrap()
    }
}

#[test]
fn distances_writes_a_symmetric_zero_diagonal_matrix() {
    let ws = Workspace::new(THREE_SOURCES);
    let output = run(&["distances", "--data", ws.data(), "--out", ws.out()]);
    assert_success(&output);
    assert!(stdout(&output).contains("4 domains"));

    let rows = csv_lines(&ws.out.join("distances.csv"));
    assert_eq!(rows.len(), 5);
    let header: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(header, ["domain", "s1", "s2", "s3", "target"]);
    let mut matrix = [[0.0f64; 4]; 4];
    for (i, row) in rows[1..].iter().enumerate() {
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells[0], header[i + 1], "rows follow header order");
        for j in 0..4 {
            matrix[i][j] = cells[j + 1].parse().unwrap();
        }
    }
    for i in 0..4 {
        assert_eq!(matrix[i][i], 0.0, "self-disparity is exactly zero");
        for j in 0..4 {
            assert!(matrix[i][j] >= 0.0);
            assert_eq!(matrix[i][j], matrix[j][i], "matrix is symmetric");
        }
    }

    let json = read_json(&ws.out.join("distances.json"));
    assert_eq!(json["config"]["strategy"], "tgft");
    assert_eq!(json["cache_key"].as_str().unwrap().len(), 64);
    assert_eq!(json["matrix"]["ids"].as_array().unwrap().len(), 4);
    assert_eq!(json["provenance"]["sizes"]["target"], 6);
}

#[test]
fn rerun_with_the_same_inputs_is_byte_identical() {
    let ws = Workspace::new(THREE_SOURCES);
    let args = ["distances", "--data", ws.data(), "--out", ws.out()];

    let first = run(&args);
    assert_success(&first);
    assert!(stdout(&first).contains("cache miss"));
    let csv = fs::read(ws.out.join("distances.csv")).unwrap();
    let json = fs::read(ws.out.join("distances.json")).unwrap();

    let second = run(&args);
    assert_success(&second);
    assert!(stdout(&second).contains("cache hit"));
    assert_eq!(csv, fs::read(ws.out.join("distances.csv")).unwrap());
    assert_eq!(json, fs::read(ws.out.join("distances.json")).unwrap());
}

#[test]
fn missing_data_file_exits_two_and_names_the_path() {
    let output = run(&["distances", "--data", "/no/such/file.csv"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("/no/such/file.csv"));
}

#[test]
fn data_commands_require_a_data_source() {
    let output = run(&["route"]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("--data"));
}

#[test]
fn route_nearest_neighbor_visits_every_source() {
    let ws = Workspace::new(THREE_SOURCES);
    let output = run(&[
        "route",
        "--data",
        ws.data(),
        "--out",
        ws.out(),
        "--strategy",
        "nn",
    ]);
    assert_success(&output);

    let json = read_json(&ws.out.join("route.json"));
    let path = &json["strategies"]["nn"]["path"];
    let mut domains: Vec<&str> = path["domains"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d.as_str().unwrap())
        .collect();
    assert_eq!(path["terminal"], "target");
    assert_eq!(domains.len(), 3, "greedy chain covers a complete graph");
    domains.sort_unstable();
    assert_eq!(domains, ["s1", "s2", "s3"]);
    assert!(
        json.get("candidates").is_none(),
        "nn routing alone does not score candidates"
    );
}

#[test]
fn threshold_prunes_the_far_source_and_warns() {
    let ws = Workspace::new(FAR_THIRD_SOURCE);
    assert_success(&run(&["distances", "--data", ws.data(), "--out", ws.out()]));

    let json = read_json(&ws.out.join("distances.json"));
    let ids: Vec<String> = json["matrix"]["ids"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let values: Vec<f64> = json["matrix"]["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let n = ids.len();
    let s3 = ids.iter().position(|id| id == "s3").unwrap();
    let mut near_max = f64::NEG_INFINITY;
    let mut far_min = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if i == s3 || j == s3 {
                far_min = far_min.min(values[i * n + j]);
            } else {
                near_max = near_max.max(values[i * n + j]);
            }
        }
    }
    assert!(near_max < far_min, "fixture separates s3 from the rest");
    let tau = 0.5 * (near_max + far_min);

    let output = run(&[
        "route",
        "--data",
        ws.data(),
        "--out",
        ws.out(),
        "--strategy",
        "sp",
        "--tau",
        &tau.to_string(),
    ]);
    assert_success(&output);
    assert!(stderr(&output).contains("warning:"));
    assert!(stderr(&output).contains("s3"));

    let json = read_json(&ws.out.join("route.json"));
    let warnings = json["warnings"].as_array().unwrap();
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0].as_str().unwrap().contains("s3"));
    let per_source = json["strategies"]["sp"]["per_source"].as_array().unwrap();
    assert_eq!(per_source.len(), 2, "one shortest path per surviving source");
    for path in per_source {
        for domain in path["domains"].as_array().unwrap() {
            assert_ne!(domain, "s3");
        }
    }
}

#[test]
fn tgft_routing_minimizes_the_bound_over_all_candidates() {
    let ws = Workspace::new(THREE_SOURCES);
    let output = run(&["route", "--data", ws.data(), "--out", ws.out()]);
    assert_success(&output);

    let json = read_json(&ws.out.join("route.json"));
    let candidates = json["candidates"]
        .as_array()
        .expect("tgft routing reports the scored candidates");
    assert_eq!(candidates.len(), 15, "all simple paths over three sources");
    let winner_total = json["strategies"]["tgft"]["bound"]["total"].as_f64().unwrap();
    let winner_domains = &json["strategies"]["tgft"]["path"]["domains"];
    let mut totals: Vec<f64> = candidates
        .iter()
        .map(|c| c["total"].as_f64().unwrap())
        .collect();
    assert_eq!(winner_total, totals[0], "candidates are sorted by total");
    assert_eq!(winner_domains, &candidates[0]["path"]["domains"]);
    totals.sort_by(f64::total_cmp);
    assert_eq!(
        winner_total, totals[0],
        "the chosen path attains the minimum bound"
    );
}

#[test]
fn explain_prints_the_candidate_table() {
    let ws = Workspace::new(THREE_SOURCES);
    let output = run(&[
        "route",
        "--data",
        ws.data(),
        "--out",
        ws.out(),
        "--strategy",
        "nn",
        "--explain",
    ]);
    assert_success(&output);
    assert!(stdout(&output).contains("candidates (total | term1..term6 | path):"));
    let json = read_json(&ws.out.join("route.json"));
    assert!(json["candidates"].is_array(), "--explain persists candidates");
}

#[test]
fn train_reports_one_row_per_method() {
    let ws = Workspace::new(THREE_SOURCES);
    let output = run(&["train", "--data", ws.data(), "--out", ws.out()]);
    assert_success(&output);

    let rows = csv_lines(&ws.out.join("accuracy.csv"));
    assert_eq!(rows[0], "method,stages,accuracy");
    let methods: Vec<&str> = rows[1..]
        .iter()
        .map(|row| row.split(',').next().unwrap())
        .collect();
    assert_eq!(methods, ["gft-tgft", "all-sources", "closest"]);

    let json = read_json(&ws.out.join("accuracy.json"));
    for row in json["rows"].as_array().unwrap() {
        let acc = row["accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
    let models = read_json(&ws.out.join("models.json"));
    let recorded: Vec<&String> = models["models"]
        .as_object()
        .unwrap()
        .keys()
        .collect();
    assert_eq!(recorded, ["all-sources", "closest", "gft-tgft"]);
    assert_eq!(
        models["models"]["all-sources"]["stages"],
        serde_json::json!(["union"])
    );
}

#[test]
fn train_with_every_strategy_adds_a_row_each() {
    let ws = Workspace::new(THREE_SOURCES);
    let output = run(&[
        "train",
        "--data",
        ws.data(),
        "--out",
        ws.out(),
        "--strategy",
        "all",
    ]);
    assert_success(&output);
    let rows = csv_lines(&ws.out.join("accuracy.csv"));
    let methods: Vec<&str> = rows[1..]
        .iter()
        .map(|row| row.split(',').next().unwrap())
        .collect();
    assert_eq!(
        methods,
        ["gft-nn", "gft-sp", "gft-mst", "gft-tgft", "all-sources", "closest"]
    );
}

#[test]
fn single_source_levels_every_method() {
    let ws = Workspace::new(ONE_SOURCE);
    let output = run(&["train", "--data", ws.data(), "--out", ws.out()]);
    assert_success(&output);
    let json = read_json(&ws.out.join("accuracy.json"));
    let rows = json["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let first = rows[0]["accuracy"].as_f64().unwrap();
    for row in rows {
        assert_eq!(
            row["accuracy"].as_f64().unwrap(),
            first,
            "with a lone source every method trains on the same data"
        );
    }
}

#[test]
fn training_without_target_labels_exits_four() {
    let ws = Workspace::new(NO_TARGET_TEST);
    let output = run(&["train", "--data", ws.data(), "--out", ws.out()]);
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn simulate_writes_the_comparison_artifacts() {
    let ws = Workspace::new(THREE_SOURCES);
    let output = run(&["simulate", "--out", ws.out()]);
    assert_success(&output);

    let rows = csv_lines(&ws.out.join("comparison.csv"));
    assert_eq!(rows[0], "method,seed,accuracy");
    assert_eq!(rows.len(), 1 + 4 * 5, "four methods over five seeds");

    let json = read_json(&ws.out.join("comparison.json"));
    assert_eq!(json["seeds"], serde_json::json!([0, 1, 2, 3, 4]));
    assert_eq!(json["scenario_train"]["epochs"], 1);
    assert_eq!(json["report"]["methods"].as_array().unwrap().len(), 4);
    let methods: Vec<&str> = json["report"]["methods"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["method"].as_str().unwrap())
        .collect();
    assert_eq!(methods, ["s1", "s2", "union", "gft"]);
}

#[test]
fn simulate_seed_flag_offsets_the_run_seeds() {
    let ws = Workspace::new(THREE_SOURCES);
    let output = run(&["simulate", "--out", ws.out(), "--seed", "7"]);
    assert_success(&output);
    let json = read_json(&ws.out.join("comparison.json"));
    assert_eq!(json["seeds"], serde_json::json!([7, 8, 9, 10, 11]));
}

#[test]
fn ablate_emits_one_row_per_path_prefix_length() {
    let ws = Workspace::new(THREE_SOURCES);
    let output = run(&["ablate", "--data", ws.data(), "--out", ws.out()]);
    assert_success(&output);

    let json = read_json(&ws.out.join("ablation.json"));
    let kappa = json["report"]["path"].as_array().unwrap().len();
    let rows = json["report"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), kappa);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row["kappa"].as_u64().unwrap() as usize, i + 1);
    }
    let csv = csv_lines(&ws.out.join("ablation.csv"));
    assert_eq!(csv[0], "kappa,accuracy");
    assert_eq!(csv.len(), 1 + kappa);
}

#[test]
fn ablate_rejects_the_all_strategy() {
    let ws = Workspace::new(THREE_SOURCES);
    let output = run(&[
        "ablate",
        "--data",
        ws.data(),
        "--out",
        ws.out(),
        "--strategy",
        "all",
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("single routing strategy"));
}

#[test]
fn malformed_thread_cap_exits_two() {
    let ws = Workspace::new(THREE_SOURCES);
    let output = gft()
        .env("GFT_ROUTER_THREADS", "lots")
        .args(["simulate", "--out", ws.out()])
        .output()
        .expect("binary runs");
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr(&output).contains("GFT_ROUTER_THREADS"));
}

#[test]
fn thread_cap_does_not_change_results() {
    let ws = Workspace::new(THREE_SOURCES);
    let args = ["simulate", "--out", ws.out()];
    assert_success(&run(&args));
    let unrestricted = fs::read(ws.out.join("comparison.csv")).unwrap();
    fs::remove_dir_all(&ws.out).unwrap();

    let output = gft()
        .env("GFT_ROUTER_THREADS", "1")
        .args(args)
        .output()
        .expect("binary runs");
    assert_success(&output);
    assert_eq!(
        unrestricted,
        fs::read(ws.out.join("comparison.csv")).unwrap(),
        "results are independent of the worker count"
    );
}

#[test]
fn flags_override_the_config_file() {
    let ws = Workspace::new(THREE_SOURCES);
    let cfg = ws._dir.path().join("run.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"data": "{}", "out": "{}", "sinkhorn": {{"epsilon": 0.2}}}}"#,
            ws.data(),
            ws.out()
        ),
    )
    .unwrap();

    let output = run(&[
        "distances",
        "--config",
        cfg.to_str().unwrap(),
        "--epsilon",
        "0.09",
    ]);
    assert_success(&output);
    let json = read_json(&ws.out.join("distances.json"));
    assert_eq!(json["config"]["sinkhorn"]["epsilon"], 0.09);
    assert_eq!(
        json["config"]["sinkhorn"]["max_iterations"], 1000,
        "unset fields keep their defaults"
    );
    assert_eq!(json["config"]["data"], ws.data());
}
