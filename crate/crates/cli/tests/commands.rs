use std::path::Path;
use std::process::{Command, Output};

use virtimu_core::io::read_imu_csv;
use virtimu_core::sensorsim::Source;

fn virtimu(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_virtimu"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn synth_writes_one_file_per_clip_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[synth]\nduration_s = [2.0, 3.0]\n").unwrap();
    for out in ["a", "b"] {
        let o = virtimu(
            &[
                "--config", "c.toml", "--seed", "5", "synth", "--clips", "3", "--out", out,
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let names = files(&dir.path().join("a"));
    assert_eq!(names.len(), 18);
    assert!(names.contains(&"walking_002.json".to_string()));
    for n in &names {
        let a = std::fs::read(dir.path().join("a").join(n)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("b").join(n)).unwrap(), "{n}");
    }
}

#[test]
fn gen_imu_emits_one_location_group_per_placement() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        r#"
[synth]
activities = ["running"]
duration_s = [2.0, 2.0]
[[placements]]
joint = "left_wrist"
location = "wrist"
[[placements]]
joint = "pelvis"
location = "hip"
mount_deg = [0.0, 0.0, 30.0]
"#,
    )
    .unwrap();
    assert!(virtimu(
        &["--config", "c.toml", "synth", "--clips", "1", "--out", "m"],
        dir.path()
    )
    .status
    .success());
    let o = virtimu(&["--config", "c.toml", "gen-imu", "m/*.json", "--out", "v"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let streams = read_imu_csv(dir.path().join("v/running_000.csv"), Source::Virtual).unwrap();
    assert_eq!(streams.len(), 1);
    assert_eq!(streams[0].locations(), vec!["wrist", "hip"]);
    assert_eq!(streams[0].meta.subject.as_deref(), Some("virtual-running_000"));
    assert_eq!(streams[0].meta.activity.as_deref(), Some("running"));
    assert_eq!(streams[0].sample_rate(), 20.0);
}

#[test]
fn empty_glob_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = virtimu(&["gen-imu", "missing/*.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no inputs"), "{}", stderr(&o));
}

#[test]
fn mixed_scenario_without_virtual_data_fails_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    assert!(virtimu(
        &["benchmark", "--subjects", "2", "--clips", "1", "--out", "b"],
        dir.path()
    )
    .status
    .success());
    std::fs::write(
        dir.path().join("c.toml"),
        "[experiment]\nreal = [\"b/real\"]\nvirtual = [\"nowhere\"]\nscenarios = [\"mixed\"]\noutput_dir = \"r\"\n",
    )
    .unwrap();
    let o = virtimu(&["--config", "c.toml", "experiment"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("virtual"), "{}", stderr(&o));
    assert!(!dir.path().join("r").exists());
}

#[test]
fn bad_config_and_thread_count_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[forest]\nn_tree = 3\n").unwrap();
    assert_eq!(
        virtimu(&["--config", "c.toml", "synth"], dir.path()).status.code(),
        Some(2)
    );
    let o = Command::new(env!("CARGO_BIN_EXE_virtimu"))
        .args(["synth", "--dry-run"])
        .current_dir(dir.path())
        .env("VIRTIMU_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dry_run_prints_the_plan_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = virtimu(&["--dry-run", "--seed", "42", "synth", "--out", "m"], dir.path());
    assert!(o.status.success());
    let plan = String::from_utf8_lossy(&o.stdout);
    assert!(plan.contains("seed: 42") && plan.contains("300 files"), "{plan}");
    assert!(!dir.path().join("m").exists());
}

#[test]
fn experiment_writes_reports_curve_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    assert!(virtimu(
        &["benchmark", "--subjects", "3", "--clips", "3", "--out", "b"],
        dir.path()
    )
    .status
    .success());
    std::fs::write(
        dir.path().join("c.toml"),
        r#"
[forest]
n_trees = 5
[experiment]
real = ["b/real/*.csv"]
virtual = ["b/virtual"]
scenarios = ["virtual", "mixed"]
fractions = [0.5]
n_runs = 2
output_dir = "r"
"#,
    )
    .unwrap();
    let o = virtimu(&["--config", "c.toml", "experiment"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = dir.path().join("r");
    assert_eq!(
        files(&r),
        vec![
            "curve.dat",
            "report_mixed_0.5.csv",
            "report_virtual_0.5.csv",
            "summary.json"
        ]
    );
    let csv = std::fs::read_to_string(r.join("report_mixed_0.5.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(r.join("summary.json")).unwrap()).unwrap();
    let virtual_only = &summary[0];
    assert_eq!(virtual_only["scenario"], "virtual");
    assert!(virtual_only["results"]
        .as_array()
        .unwrap()
        .iter()
        .all(|x| x["n_train_real"] == 0));
    let curve = std::fs::read_to_string(r.join("curve.dat")).unwrap();
    assert!(curve.starts_with("# real_fraction virtual_mean virtual_std mixed_mean mixed_std\n0.5 "));
}

#[test]
fn calibrate_then_featurize() {
    let dir = tempfile::tempdir().unwrap();
    assert!(virtimu(
        &["benchmark", "--subjects", "2", "--clips", "2", "--out", "b"],
        dir.path()
    )
    .status
    .success());
    let o = virtimu(
        &[
            "calibrate",
            "--real",
            "b/real",
            "--virtual",
            "b/virtual",
            "--out",
            "cal.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let cal = virtimu_core::calibration::Calibration::load(dir.path().join("cal.json")).unwrap();
    assert_eq!(cal.per_class.len(), 6);
    let o = virtimu(
        &[
            "featurize",
            "--real",
            "b/real",
            "--virtual",
            "b/virtual",
            "--calibration",
            "cal.json",
            "--out",
            "f.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let fm = virtimu_core::features::FeatureMatrix::load_csv(dir.path().join("f.csv")).unwrap();
    assert_eq!(fm.feature_dim(), 3 * 3 * 16);
    assert!(fm.sources.contains(&Source::Virtual) && fm.sources.contains(&Source::Real));
}
