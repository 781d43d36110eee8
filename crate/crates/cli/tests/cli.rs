use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scalesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scalesim"))
        .args(args)
        .output()
        .unwrap()
}

fn bundled(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.json"))
}

fn short_scenario(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(bundled("bursty")).unwrap()).unwrap();
    v["horizon"] = 900.into();
    edit(&mut v);
    let path = dir.join("scenario.json");
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

type Edit = Box<dyn FnOnce(&mut serde_json::Value)>;

fn run_into(scenario: &Path, out: &Path) -> Output {
    scalesim(&[
        "run",
        scenario.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--controllers",
        "default_hpa,tuned_hpa,proposed",
        "--seed",
        "7",
        "--repeats",
        "2",
        "--quiet",
    ])
}

fn read_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                ));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn run_writes_the_full_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = short_scenario(tmp.path(), |_| {});
    let out = tmp.path().join("not/yet/there");
    let o = run_into(&scenario, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty(), "--quiet printed output");

    let root = out.join("bursty");
    for c in ["default_hpa", "tuned_hpa", "proposed"] {
        for seed in ["7", "8"] {
            let dir = root.join(c).join(seed);
            for f in ["trace.jsonl", "decisions.jsonl", "report.json"] {
                assert!(dir.join(f).is_file(), "{}", dir.join(f).display());
            }
        }
    }
    let traces = read_tree(&root)
        .into_iter()
        .filter(|(p, _)| p.ends_with("trace.jsonl"))
        .count();
    assert_eq!(traces, 6);

    let csv = fs::read_to_string(root.join("comparison.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "controller,slo_count,slo_duration_s,ttscale_s,node_hours,replica_hours,cost,events,oscillations,churn"
    );
    assert_eq!(csv.lines().count(), 4);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("comparison.json")).unwrap()).unwrap();
    assert_eq!(json["baseline"], "default_hpa");

    let first = fs::read_to_string(root.join("proposed/7/trace.jsonl")).unwrap();
    let row: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
    let mut keys: Vec<&str> = row
        .as_object()
        .unwrap()
        .keys()
        .map(String::as_str)
        .collect();
    keys.sort_unstable();
    let mut expected = vec![
        "t",
        "arrivals",
        "ready",
        "starting",
        "pending",
        "nodes_active",
        "queue",
        "latency",
        "utilization",
        "action",
        "decision_id",
    ];
    expected.sort_unstable();
    assert_eq!(keys, expected);
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = short_scenario(tmp.path(), |v| v["workload"]["noise_std"] = 0.2.into());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run_into(&scenario, &a).status.success());
    assert!(run_into(&scenario, &b).status.success());
    assert_eq!(read_tree(&a), read_tree(&b));
}

#[test]
fn validate_and_version() {
    for name in ["bursty", "mixed", "queue_driven"] {
        let o = scalesim(&["validate", bundled(name).to_str().unwrap()]);
        assert!(
            o.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(String::from_utf8_lossy(&o.stdout).contains("ok"));
    }
    let o = scalesim(&["version"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn config_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: Vec<(&str, Edit)> = vec![
        ("unknown key", Box::new(|v| v["surprise"] = 1.into())),
        ("schema", Box::new(|v| v["schema"] = 2.into())),
        (
            "interval",
            Box::new(|v| v["controller"]["control_interval"] = 15.5.into()),
        ),
        (
            "negative rate",
            Box::new(|v| v["workload"]["base_rate"] = (-1.0).into()),
        ),
    ];
    for (label, edit) in cases {
        let path = short_scenario(tmp.path(), edit);
        let out = tmp.path().join("out");
        let validate = ["validate", path.to_str().unwrap()];
        let run = [
            "run",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        for args in [&validate[..], &run[..]] {
            let o = scalesim(args);
            assert_eq!(
                o.status.code(),
                Some(1),
                "{label} via {}: {}",
                args[0],
                String::from_utf8_lossy(&o.stderr)
            );
            assert!(!o.stderr.is_empty());
        }
        assert!(
            !out.exists(),
            "{label}: run wrote output despite a bad config"
        );
    }

    let path = short_scenario(tmp.path(), |_| {});
    let o = scalesim(&[
        "run",
        path.to_str().unwrap(),
        "--controllers",
        "magic",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = scalesim(&[
        "validate",
        tmp.path().join("missing.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn interval_error_names_both_values() {
    let tmp = tempfile::tempdir().unwrap();
    let path = short_scenario(tmp.path(), |v| {
        v["controller"]["control_interval"] = 15.5.into()
    });
    let o = scalesim(&["validate", path.to_str().unwrap()]);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("15.5") && err.contains('1'), "{err}");
}

#[test]
fn unwritable_output_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let scenario = short_scenario(tmp.path(), |_| {});
    let blocker = tmp.path().join("file");
    fs::write(&blocker, b"x").unwrap();
    let o = run_into(&scenario, &blocker);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}
