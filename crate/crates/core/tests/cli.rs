use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use metricpat::eval::{read_predictions, write_series_csv};
use metricpat::synth::{self, SuiteParams};
use metricpat::{MetricSeries, PatternStore};

fn metricpat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metricpat")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = metricpat(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes the reference, offline and online segments of one synthetic curve.
fn segments(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let params = SuiteParams::default();
    let curve = &synth::injection_suite(params)[0];
    let s = &curve.series;
    let files = [
        ("normal.csv", 0..params.normal_end),
        ("detect.csv", params.normal_end..params.offline_end),
        ("online.csv", params.offline_end..s.len()),
    ]
    .map(|(name, range)| {
        let p = dir.join(name);
        write_series_csv(&s.slice(range).unwrap(), &p).unwrap();
        p
    });
    let [a, b, c] = files;
    (a, b, c)
}

#[test]
fn offline_online_label_eval_export() {
    let dir = tempfile::tempdir().unwrap();
    let (normal, detect, online) = segments(dir.path());
    let store = dir.path().join("store.json");
    let pred = dir.path().join("pred.csv");

    let out = ok(&[
        "offline", "--normal", path(&normal), "--detect", path(&detect), "-m", "9", "-p", "99",
        "--store", path(&store), "--pred-out", path(&pred),
    ]);
    assert!(out.contains("anomalous"), "{out}");
    let patterns = PatternStore::load(&store).unwrap();
    let anomalous = patterns.anomalous_ids();
    assert!(!anomalous.is_empty());
    assert_eq!(read_predictions(&pred).unwrap().len(), 2000);

    let score = ok(&["eval", "--pred", path(&pred), "--truth", path(&detect)]);
    let f1: f64 = score.lines().find_map(|l| l.strip_prefix("f1")).unwrap().trim().parse().unwrap();
    assert!(f1 > 0.5, "{score}");

    let id = anomalous[0].to_string();
    ok(&["label", "--store", path(&store), "--pattern-id", &id, "--add", "disk full", "--add", "gc pause"]);
    let labelled = PatternStore::load(&store).unwrap();
    let labels = &labelled.cluster(anomalous[0]).unwrap().labels;
    assert!(labels.contains("disk full") && labels.contains("gc pause"));

    let online_pred = dir.path().join("online.csv.pred");
    let store_out = dir.path().join("adapted.json");
    ok(&[
        "online", "--store", path(&store), "--input", path(&online), "--adaptive",
        "--pred-out", path(&online_pred), "--store-out", path(&store_out),
    ]);
    let rows = read_predictions(&online_pred).unwrap();
    assert_eq!(rows.len(), 2000);
    // Flagged points matched to the labelled pattern carry its labels.
    for r in rows.iter().filter(|r| r.is_anomaly() && r.cluster_id == anomalous[0]) {
        assert!(r.labels.contains("disk full"), "{r:?}");
    }
    assert!(PatternStore::load(&store_out).unwrap().len() >= labelled.len());

    let csv = dir.path().join("patterns.csv");
    ok(&["export-patterns", "--store", path(&store), "--out", path(&csv)]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("id,role,size,radius,labels,v0,"));
    assert_eq!(text.lines().count(), labelled.len() + 1);
}

#[test]
fn run_command_prints_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    std::fs::create_dir(&data).unwrap();
    let params = SuiteParams { curves: 2, ..SuiteParams::default() };
    for c in synth::injection_suite(params) {
        write_series_csv(&c.series, data.join(format!("{}.csv", c.series.name()))).unwrap();
    }
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{"dataset_dir": "data", "m": 9, "p": 99.0, "adaptive": true,
            "split": {"normal_end": 1000, "offline_end": 3000}}"#,
    )
    .unwrap();
    let out = ok(&["run", "--config", path(&config)]);
    assert!(out.contains("offline") && out.contains("online (adaptive)"), "{out}");
    assert_eq!(out.matches("weighted").count(), 3, "{out}");
}

#[test]
fn failures_exit_non_zero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = metricpat(&["export-patterns", "--store", path(&missing), "--out", path(&dir.path().join("x.csv"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "timestamp,value\n0,1.0\n1,\n").unwrap();
    let store = dir.path().join("s.json");
    let pred = dir.path().join("p.csv");
    let out = metricpat(&[
        "offline", "--normal", path(&bad), "--detect", path(&bad), "--store", path(&store), "--pred-out", path(&pred),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.csv:3: missing value"));

    let short = MetricSeries::from_values("short", vec![1.0, 2.0, 3.0]).unwrap();
    let short_path = dir.path().join("short.csv");
    write_series_csv(&short, &short_path).unwrap();
    let out = metricpat(&[
        "offline", "--normal", path(&short_path), "--detect", path(&short_path),
        "--store", path(&store), "--pred-out", path(&pred),
    ]);
    assert!(!out.status.success());
}
