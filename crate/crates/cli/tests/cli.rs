use std::path::Path;
use std::process::{Command, Output};

fn corrbai(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrbai")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) {
    let text = format!(
        "algorithms = [\"lucb\", \"c-lucb\"]\ndeltas = [0.05, 0.1]\ntrials = 4\n{extra}\n\
         [env]\nkind = \"builtin\"\nname = \"three-arm\"\n[table]\nkind = \"exact\"\n"
    );
    std::fs::write(dir.join("exp.toml"), text).unwrap();
}

#[test]
fn run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let out = corrbai(&["run", "--config", "exp.toml", "--out", "r.csv", "--json", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "algorithm,delta,mean_samples,std_samples,success_rate,trials,capped_trials");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("c-lucb,0.1,") && lines[4].starts_with("lucb,0.05,"));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 4);

    let again = corrbai(&["run", "--config", "exp.toml", "--workers", "3"], dir.path());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), csv);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "sample_cap = 4");
    assert_eq!(corrbai(&["run", "--config", "exp.toml"], dir.path()).status.code(), Some(4));
    write_config(dir.path(), "trials = 0");
    assert_eq!(corrbai(&["run", "--config", "exp.toml"], dir.path()).status.code(), Some(2));
    assert_eq!(corrbai(&["run", "--config", "missing.toml"], dir.path()).status.code(), Some(3));
    assert_eq!(corrbai(&["validate-bounds", "--family", "x", "--delta", "0.1"], dir.path()).status.code(), Some(2));
    assert_eq!(corrbai(&["validate-bounds", "--family", "kl", "--delta", "2"], dir.path()).status.code(), Some(2));
}

#[test]
fn analyze_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    corrbai::instances::two_arm_joint_a().write_csv(dir.path().join("joint.csv")).unwrap();
    corrbai::instances::two_arm_table().write_csv(dir.path().join("table.csv")).unwrap();
    let out = corrbai(&["analyze", "--joint", "joint.csv", "--table", "table.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["best_arm"], 0);
    assert_eq!(v["competitive_set"], serde_json::json!([0, 1]));
}

#[test]
fn build_table_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let mut ratings = String::from("uid,iid,stars\n");
    for u in 0..40 {
        for item in 0..4 {
            if (u + item) % 5 != 0 {
                ratings.push_str(&format!("u{u},i{item},{}\n", 1 + (u + 2 * item) % 5));
            }
        }
    }
    std::fs::write(dir.path().join("ratings.csv"), ratings).unwrap();
    let out = corrbai(
        &[
            "build-table", "--ratings", "ratings.csv", "--out", "table.csv", "--top-items", "3", "--columns",
            "uid,iid,stars", "--p", "0.5", "--q", "0.1", "--mode", "mean-std", "--pools-out", "pools.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let support = corrbai::Support::integers(5).unwrap();
    let table = corrbai::Table::read_csv(dir.path().join("table.csv"), Some(support.clone())).unwrap();
    assert_eq!(table.arms(), 3);
    let pools = corrbai::DatasetEnv::read_pools(dir.path().join("pools.csv"), support).unwrap();
    assert_eq!(pools.counts().len(), 3);

    let out = corrbai(&["validate-bounds", "--family", "howard-lil", "--delta", "0.1", "--streams", "50", "--horizon", "200"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], true);
    let out = corrbai(&["lemma-check", "--t", "5,10", "--trials", "2000"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 4);
}
