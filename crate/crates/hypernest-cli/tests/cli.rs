//! Command-level behavior: round trips through model files, usage errors,
//! and plot output properties.

use std::path::Path;
use std::process::{Command, Output};

fn hypernest(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypernest"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn grab(line_prefix: &str, text: &str) -> Option<String> {
    text.lines()
        .find(|l| l.starts_with(line_prefix))
        .map(str::to_string)
}

#[test]
fn reduce_model_reload_reproduces_reported_error() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let gen = hypernest(
        &[
            "generate",
            "offset-curve",
            "--count",
            "60",
            "--sigma",
            "0.02",
            "--r0",
            "0.5",
            "--seed",
            "9",
            "--out",
            "curve.csv",
        ],
        dir,
    );
    assert!(gen.status.success());

    let fit = hypernest(
        &[
            "reduce",
            "--input",
            "curve.csv",
            "--method",
            "nh",
            "--target-dim",
            "1",
            "--out-model",
            "curve.model",
            "--report",
            "report.jsonl",
            "--seed",
            "9",
        ],
        dir,
    );
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let fitted = grab("mean_error=", &stdout(&fit)).expect("fit prints mean_error");

    let eval = hypernest(
        &[
            "reduce",
            "--input",
            "curve.csv",
            "--method",
            "nh",
            "--target-dim",
            "1",
            "--eval-model",
            "curve.model",
        ],
        dir,
    );
    assert!(eval.status.success());
    let reloaded = grab("mean_error=", &stdout(&eval)).expect("eval prints mean_error");
    assert_eq!(fitted, reloaded, "model reload must reproduce the error exactly");

    // The report is one JSON record with the promised fields.
    let report = std::fs::read_to_string(dir.join("report.jsonl")).unwrap();
    let record: serde_json::Value = serde_json::from_str(report.lines().next().unwrap()).unwrap();
    for field in ["method", "target_dim", "mean_error", "std_error", "seconds", "seed"] {
        assert!(record.get(field).is_some(), "report missing {field}");
    }
}

#[test]
fn tpca_on_geodesic_data_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    // r0 = 0, sigma = 0: points on a geodesic through the mean.
    assert!(hypernest(
        &[
            "generate",
            "offset-curve",
            "--count",
            "40",
            "--sigma",
            "0",
            "--r0",
            "0",
            "--seed",
            "3",
            "--out",
            "geo.csv",
        ],
        dir,
    )
    .status
    .success());
    let fit = hypernest(
        &[
            "reduce",
            "--input",
            "geo.csv",
            "--method",
            "tpca",
            "--target-dim",
            "1",
        ],
        dir,
    );
    assert!(fit.status.success());
    let line = grab("mean_error=", &stdout(&fit)).unwrap();
    let value: f64 = line.trim_start_matches("mean_error=").parse().unwrap();
    assert!(value < 1e-6, "geodesic data should be near-exact, got {value}");
}

#[test]
fn gcn_eval_reproduces_training_metric() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    assert!(hypernest(
        &[
            "generate",
            "two-community",
            "--size",
            "15",
            "--p-in",
            "0.5",
            "--p-out",
            "0.05",
            "--seed",
            "4",
            "--out",
            "toy",
        ],
        dir,
    )
    .status
    .success());
    let train = hypernest(
        &[
            "gcn", "train", "--graph", "toy", "--task", "nc", "--dims", "2,2", "--steps",
            "15", "--seed", "6", "--out-model", "toy.model", "--metrics", "metrics.csv",
        ],
        dir,
    );
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    let trained = grab("test_metric=", &stdout(&train)).unwrap();

    let eval = hypernest(
        &["gcn", "eval", "--graph", "toy", "--model", "toy.model", "--task", "nc"],
        dir,
    );
    assert!(eval.status.success());
    let evaluated = grab("test_metric=", &stdout(&eval)).unwrap();
    assert_eq!(trained, evaluated, "checkpoint eval must match training-time metric");

    // Metric trace has the promised header.
    let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("step,loss,metric\n"));
}

#[test]
fn gcn_nc_without_labels_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    assert!(hypernest(
        &[
            "generate",
            "two-community",
            "--size",
            "8",
            "--p-in",
            "0.5",
            "--p-out",
            "0.05",
            "--seed",
            "4",
            "--out",
            "toy",
        ],
        dir,
    )
    .status
    .success());
    std::fs::remove_file(dir.join("toy.labels.csv")).unwrap();
    let train = hypernest(
        &[
            "gcn", "train", "--graph", "toy", "--task", "nc", "--out-model", "x.model",
        ],
        dir,
    );
    assert!(!train.status.success());
    let err = String::from_utf8_lossy(&train.stderr).to_lowercase();
    assert!(err.contains("labels"), "stderr should name the problem: {err}");
}

#[test]
fn wrapped_normal_has_the_requested_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = hypernest(
        &[
            "generate",
            "wrapped-normal",
            "--dim",
            "10",
            "--sigma",
            "0.5",
            "--count",
            "200",
            "--seed",
            "7",
            "--out",
            "wn.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let body = std::fs::read_to_string(dir.path().join("wn.csv")).unwrap();
    let lines: Vec<&str> = body.lines().collect();
    assert_eq!(lines.len(), 201, "header plus 200 rows");
    assert!(lines.iter().all(|l| l.split(',').count() == 11));
}

#[test]
fn negative_sigma_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hypernest(
        &[
            "generate",
            "wrapped-normal",
            "--dim",
            "3",
            "--sigma=-1",
            "--count",
            "5",
            "--out",
            "x.csv",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("usage"));
}

#[test]
fn plot_outputs_stay_in_the_disk() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    assert!(hypernest(
        &[
            "generate",
            "offset-curve",
            "--count",
            "50",
            "--seed",
            "12",
            "--out",
            "curve.csv",
        ],
        dir,
    )
    .status
    .success());
    assert!(hypernest(
        &[
            "reduce",
            "--input",
            "curve.csv",
            "--method",
            "nh",
            "--target-dim",
            "1",
            "--out-model",
            "curve.model",
            "--seed",
            "12",
        ],
        dir,
    )
    .status
    .success());
    let plot = hypernest(
        &[
            "plot",
            "--input",
            "curve.csv",
            "--model",
            "curve.model",
            "--out",
            "plot.csv",
            "--svg",
            "plot.svg",
        ],
        dir,
    );
    assert!(plot.status.success(), "{}", String::from_utf8_lossy(&plot.stderr));

    let body = std::fs::read_to_string(dir.join("plot.csv")).unwrap();
    let mut lines = body.lines();
    assert_eq!(lines.next().unwrap(), "p1,p2");
    for line in lines {
        let coords: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let norm = (coords[0] * coords[0] + coords[1] * coords[1]).sqrt();
        assert!(norm < 1.0, "emitted coordinate outside the disk: {norm}");
    }

    // The overlay polyline samples 200 parameters.
    let svg = std::fs::read_to_string(dir.join("plot.svg")).unwrap();
    let path_line = svg.lines().find(|l| l.contains("<path")).unwrap();
    let samples = path_line.matches("L").count() + 1;
    assert_eq!(samples, 200, "expected a 200-sample polyline");
}

#[test]
fn plot_origin_maps_to_disk_center() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    std::fs::write(
        dir.join("origin.csv"),
        "x0,x1,x2\n1.0,0.0,0.0\n",
    )
    .unwrap();
    let plot = hypernest(
        &["plot", "--input", "origin.csv", "--out", "plot.csv"],
        dir,
    );
    assert!(plot.status.success());
    let body = std::fs::read_to_string(dir.join("plot.csv")).unwrap();
    let row = body.lines().nth(1).unwrap();
    for v in row.split(',') {
        assert_eq!(v.parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn sweep_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let sweep = hypernest(
        &[
            "sweep",
            "--dim",
            "3",
            "--target-dim",
            "1",
            "--sigmas",
            "0.3,0.8",
            "--count",
            "25",
            "--seeds",
            "0",
            "--seed",
            "2",
            "--out",
            "sweep.csv",
        ],
        dir,
    );
    assert!(sweep.status.success(), "{}", String::from_utf8_lossy(&sweep.stderr));
    let body = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let mut lines = body.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sigma,method,mean_error,std_error,seconds"
    );
    // 2 sigma values x 2 methods, NH row never above the tPCA row.
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 4);
    for pair in rows.chunks(2) {
        assert_eq!(pair[0][1], "nh");
        assert_eq!(pair[1][1], "tpca");
        let nh: f64 = pair[0][2].parse().unwrap();
        let tpca: f64 = pair[1][2].parse().unwrap();
        assert!(nh <= tpca + 1e-12);
    }
}
