//! Contract tests for the `rdiffbr` binary: exit codes, emitted files, and
//! the shape of each command's reports, driven through real process spawns.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

/// A configuration small enough that every command finishes in well under a
/// second, yet deep enough to exercise the full pipeline.
const BASE_CONFIG: &str = r#"
[dataset]
source = "synthetic"

[dataset.synthetic]
n_themes = 2
items_per_theme = 20
bundles_per_theme = 5
bundle_size = 10
n_users = 30
user_bundle_density = 0.2

[backbone]
dim = 8
init_scale = 0.1
l2_reg = 1e-4

[schedule]
t_max = 10
s = 0.1
alpha_min = 0.1
alpha_max = 0.9

[approximator]
depth = 1
hidden_size = 8
step_dim = 4
delta = 0.5

[training]
lambda = 1.0
lr = 0.01
epochs = 2
batch_size = 16
t_prime = 4
seed = 0

[eval]
ks = [5]
rhos = [-1, 0, 1]
n_seeds = 1

[output]
dir = "runs"
"#;

fn write_config(dir: &Path, contents: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, contents).expect("config written");
    path
}

fn rdiffbr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdiffbr"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn files_with_prefix(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
        .expect("run dir listable")
        .map(|e| e.expect("entry").path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(prefix))
        })
        .collect();
    found.sort();
    found
}

fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).expect("report readable");
    serde_json::from_str(&text).expect("report is JSON")
}

#[test]
fn train_writes_snapshot_checkpoints_and_loss_curve() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), BASE_CONFIG);
    let run = tmp.path().join("out");

    let out = rdiffbr(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--run-dir",
        run.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    assert_eq!(files_with_prefix(&run, "config-").len(), 1);
    assert_eq!(files_with_prefix(&run, "backbone-").len(), 2); // .bin + .bin.json
    assert_eq!(files_with_prefix(&run, "approx-").len(), 2);

    let losses = files_with_prefix(&run, "loss-");
    assert_eq!(losses.len(), 1);
    let csv = std::fs::read_to_string(&losses[0]).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,total,ranking,diffusion,skipped_negatives");
    assert_eq!(lines.len(), 1 + 2, "one row per configured epoch");
}

#[test]
fn an_omitted_blend_weight_is_named_in_the_error() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &BASE_CONFIG.replace("delta = 0.5\n", ""));

    let out = rdiffbr(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("approximator.delta"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn out_of_range_values_exit_2_and_name_the_field() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &BASE_CONFIG.replace("lambda = 1.0", "lambda = 7.0"));

    let out = rdiffbr(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("training.lambda"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &BASE_CONFIG.replace("lambda = 1.0", "lamda = 1.0"));

    let out = rdiffbr(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn a_missing_config_file_exits_4() {
    let out = rdiffbr(&["train", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn diverging_training_exits_3() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &BASE_CONFIG.replace("lr = 0.01", "lr = 1e160"));
    let run = tmp.path().join("out");

    let out = rdiffbr(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--run-dir",
        run.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(
        stderr_of(&out).contains("non-finite"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn sweep_expands_rho_ranges_inclusively_and_multiplies_out_rows() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &BASE_CONFIG.replace("epochs = 2", "epochs = 1"));
    let run = tmp.path().join("out");

    let out = rdiffbr(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--run-dir",
        run.to_str().unwrap(),
        "--rhos",
        "-4..5",
        "--train-first",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let csvs = files_with_prefix(&run, "sweep-");
    assert_eq!(csvs.len(), 1);
    let csv = std::fs::read_to_string(&csvs[0]).unwrap();
    // 1 grid point x 10 levels x 2 variants x 1 K x 1 seed, plus the header.
    assert_eq!(csv.lines().count(), 1 + 10 * 2);
    assert_eq!(
        csv.lines().next().unwrap(),
        "lambda,delta,d,rho,K,variant,seed,recall,ndcg"
    );
}

#[test]
fn sweep_writes_one_report_per_grid_point() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &BASE_CONFIG.replace("epochs = 2", "epochs = 1"));
    let run = tmp.path().join("out");

    let out = rdiffbr(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--run-dir",
        run.to_str().unwrap(),
        "--rhos",
        "0",
        "--grid",
        "lambda=0.5,1.5",
        "--train-first",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let reports = files_with_prefix(&run, "report-");
    assert_eq!(reports.len(), 2, "one report per grid point");
    let lambdas: Vec<f64> = reports
        .iter()
        .map(|p| read_json(p)["metadata"]["lambda"].as_f64().unwrap())
        .collect();
    let mut sorted = lambdas.clone();
    sorted.sort_by(f64::total_cmp);
    assert_eq!(sorted, vec![0.5, 1.5]);
}

#[test]
fn sweep_rejects_unknown_grid_keys() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), BASE_CONFIG);

    let out = rdiffbr(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--grid",
        "gamma=1,2",
        "--train-first",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr_of(&out).contains("grid"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn absent_checkpoints_exit_4_with_guidance() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), BASE_CONFIG);
    let run = tmp.path().join("out");

    let out = rdiffbr(&[
        "ablate",
        "--config",
        config.to_str().unwrap(),
        "--run-dir",
        run.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(
        stderr_of(&out).contains("--train-first"),
        "stderr: {}",
        stderr_of(&out)
    );
}

#[test]
fn ablate_compares_the_three_fixed_variants() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), BASE_CONFIG);
    let run = tmp.path().join("out");

    let out = rdiffbr(&[
        "ablate",
        "--config",
        config.to_str().unwrap(),
        "--run-dir",
        run.to_str().unwrap(),
        "--train-first",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let reports = files_with_prefix(&run, "ablation-");
    let json = reports
        .iter()
        .find(|p| p.extension().is_some_and(|e| e == "json"))
        .expect("ablation report");
    let doc = read_json(json);
    assert_eq!(
        doc["metadata"]["variants"],
        serde_json::json!(["backbone", "rdiffbr", "rdiffbr_wo_r"])
    );
    assert_eq!(doc["metadata"]["wo_r_delta"], serde_json::json!(1.0));
    assert_eq!(doc["metadata"]["rhos"], serde_json::json!([-3, 3]));

    let rows = doc["rows"].as_array().expect("rows");
    let mut variants: Vec<&str> = rows
        .iter()
        .map(|r| r["variant"].as_str().unwrap())
        .collect();
    variants.sort();
    variants.dedup();
    assert_eq!(variants, ["backbone", "rdiffbr", "rdiffbr_wo_r"]);
}

#[test]
fn bench_times_both_variants_and_reports_their_ratio() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), BASE_CONFIG);
    let run = tmp.path().join("out");

    let out = rdiffbr(&[
        "bench",
        "--config",
        config.to_str().unwrap(),
        "--run-dir",
        run.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let doc = read_json(&files_with_prefix(&run, "bench-")[0]);
    let per_epoch = doc["timing"]["seconds_per_epoch"]
        .as_object()
        .expect("timing map");
    assert!(per_epoch.contains_key("backbone"));
    assert!(per_epoch.contains_key("rdiffbr"));
    assert_eq!(doc["timing"]["epochs_averaged"], serde_json::json!(5));
    assert!(doc["timing"]["overhead_ratio"].as_f64().unwrap() > 0.0);
}

#[test]
fn case_study_lists_exactly_k_neighbours_with_membership_flags() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), BASE_CONFIG);
    let run = tmp.path().join("out");

    let args = [
        "case-study",
        "--config",
        config.to_str().unwrap(),
        "--run-dir",
        run.to_str().unwrap(),
        "--bundle",
        "3",
        "--k",
        "5",
        "--rho",
        "-1",
        "--train-first",
    ];
    let out = rdiffbr(&args);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let listing = files_with_prefix(&run, "case-study-");
    assert_eq!(listing.len(), 1);
    let doc = read_json(&listing[0]);
    let variants = doc["variants"].as_array().expect("variants");
    assert_eq!(variants.len(), 3);
    for variant in variants {
        let neighbours = variant["neighbours"].as_array().expect("neighbours");
        assert_eq!(neighbours.len(), 5);
        for n in neighbours {
            assert!(n["in_bundle"].is_boolean());
            assert!(n["cosine"].is_number());
        }
    }

    // The listing is a pure function of config and seed: a rerun reproduces
    // it byte for byte.
    let first = std::fs::read(&listing[0]).unwrap();
    std::fs::remove_file(&listing[0]).unwrap();
    let out = rdiffbr(&args);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert_eq!(std::fs::read(&listing[0]).unwrap(), first);
}

#[test]
fn identical_runs_produce_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), BASE_CONFIG);
    let (run_a, run_b) = (tmp.path().join("a"), tmp.path().join("b"));

    for run in [&run_a, &run_b] {
        let out = rdiffbr(&[
            "train",
            "--config",
            config.to_str().unwrap(),
            "--run-dir",
            run.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    }

    for file in files_with_prefix(&run_a, "") {
        let name = file.file_name().unwrap();
        let twin = run_b.join(name);
        assert!(twin.exists(), "missing {name:?} in second run");
        assert_eq!(
            std::fs::read(&file).unwrap(),
            std::fs::read(&twin).unwrap(),
            "{name:?} differs between identical runs"
        );
    }
}

#[test]
fn command_line_overrides_reach_the_snapshot() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), BASE_CONFIG);
    let run = tmp.path().join("out");

    let out = rdiffbr(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--run-dir",
        run.to_str().unwrap(),
        "--seed",
        "9",
        "--epochs",
        "1",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let snapshot = std::fs::read_to_string(&files_with_prefix(&run, "config-")[0]).unwrap();
    assert!(snapshot.contains("seed = 9"));
    assert!(snapshot.contains("epochs = 1"));
    let losses = files_with_prefix(&run, "loss-");
    assert!(losses[0].to_str().unwrap().contains("-s9.csv"));
}
