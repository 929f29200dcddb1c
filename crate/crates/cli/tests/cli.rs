use std::process::{Command, Output};

fn ringsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringsim")).args(args).output().expect("spawn ringsim")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn simulate_both_checks_oracle() {
    let out = ringsim(&["simulate", "--devices", "4", "--seq-len", "64", "--d-head", "16", "--check-oracle"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("[ring]") && text.contains("[striped]"));
    assert!(text.contains("simulated speedup"));
    assert_eq!(text.matches(" ok\n").count(), 2);
}

#[test]
fn indivisible_sequence_is_a_usage_error() {
    let out = ringsim(&["simulate", "--devices", "3", "--seq-len", "16"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ringsim(&["simulate", "--devices", "4", "--seq-len", "16", "--tile-q", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ringsim(&["simulate", "--devices", "1", "--seq-len", "16"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ring_csv_shows_idle_and_saturated_devices() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("work.csv");
    let out = ringsim(&[
        "simulate",
        "--algo",
        "ring",
        "--devices",
        "4",
        "--seq-len",
        "64",
        "--d-head",
        "2",
        "--tile-q",
        "1",
        "--tile-k",
        "1",
        "--csv",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(&path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "algo,round,device,block_index,tiles_total,tiles_skipped,tiles_partial,tiles_full,interactions_computed,interactions_required"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 16);
    let round1: Vec<u64> = rows.iter().filter(|r| r[1] == "1").map(|r| r[9].parse().unwrap()).collect();
    assert_eq!(round1.len(), 4);
    assert!(round1.iter().all(|&r| r == 0 || r == 256), "{round1:?}");
    assert!(round1.contains(&0) && round1.contains(&256));
}

#[test]
fn tms_reports_anchor_values() {
    let out = ringsim(&["tms", "--model", "1b", "--sp", "4", "--seq-len", "262144"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("1.72"));
    let out = ringsim(&["tms", "--model", "3b", "--sp", "8", "--flop-weight", "1", "--seq-len", "786432"]);
    assert!(stdout(&out).contains("1.84"));
    let out = ringsim(&["tms", "--model", "7b", "--sp", "4", "--seq-len", "32768,65536"]);
    let text = stdout(&out);
    assert!(text.contains("1.47") && text.contains("1.58"), "{text}");
}

#[test]
fn tms_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tms.csv");
    let out =
        ringsim(&["tms", "--model", "1b", "--sp", "4", "--seq-len", "32768,262144", "--csv", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn golden_table_passes() {
    let out = ringsim(&["tms", "--golden", "builtin"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("137 rows"));
}

#[test]
fn golden_table_flags_rows_outside_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("golden.csv");
    std::fs::write(
        &path,
        "hardware,model,mesh_mp,mesh_sp,n_seq,flop_weight,tms\na100,1b,1,4,262144,2,1.72\na100,1b,1,4,32768,2,1.70\n",
    )
    .unwrap();
    let out = ringsim(&["tms", "--golden", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("OUT") && text.contains("1 outside"), "{text}");
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let out = ringsim(&["tms", "--model", "13b", "--sp", "4", "--seq-len", "1024"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("13b"));
}

#[test]
fn preset_from_toml_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("one_b.toml");
    std::fs::write(&path, "name = \"mine\"\nn_vocab = 32000\nd_model = 2048\nd_ff = 5504\nn_layer = 22\nn_head = 16\n")
        .unwrap();
    let from_file = ringsim(&["tms", "--model", path.to_str().unwrap(), "--sp", "4", "--seq-len", "262144"]);
    assert_eq!(from_file.status.code(), Some(0), "{}", String::from_utf8_lossy(&from_file.stderr));
    let builtin = ringsim(&["tms", "--model", "1b", "--sp", "4", "--seq-len", "262144"]);
    let tail = |o: &Output| stdout(o).lines().skip(1).collect::<Vec<_>>().join("\n");
    assert_eq!(tail(&from_file), tail(&builtin));

    std::fs::write(&path, "n_vocab = \"lots\"\n").unwrap();
    let bad = ringsim(&["tms", "--model", path.to_str().unwrap(), "--sp", "4", "--seq-len", "1024"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn verify_quick_passes() {
    let out = ringsim(&["verify", "--quick"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 6);
    assert!(!text.contains("FAIL"));
}
