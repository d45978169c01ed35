use std::path::Path;
use std::process::{Command, Output};

use pin_twsvm::data::Dataset;
use pin_twsvm::synth::{gaussian_blobs, two_blobs};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pin-twsvm")).args(args).output().unwrap()
}

fn write_csv(path: &Path, ds: &Dataset<f64>) {
    let d = ds.dim();
    let mut s: String = (1..=d).map(|j| format!("x{j},")).collect();
    s.push_str("label\n");
    for i in 0..ds.len() {
        for j in 0..d {
            s.push_str(&format!("{},", ds.features[(i, j)]));
        }
        s.push_str(&format!("{}\n", ds.labels[i]));
    }
    std::fs::write(path, s).unwrap();
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn train_then_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test, model) = (dir.path().join("train.csv"), dir.path().join("test.csv"), dir.path().join("m.json"));
    write_csv(&train, &two_blobs(120, 6.0, 1).unwrap());
    write_csv(&test, &two_blobs(60, 6.0, 2).unwrap());

    let out = run(&["train", "--data", p(&train), "--model-out", p(&model)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("train_accuracy="));
    assert!(model.exists());

    let preds = dir.path().join("pred.csv");
    let out = run(&["predict", "--model", p(&model), "--data", p(&test), "--out", p(&preds)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row,prediction,d_pos,d_neg"));
    assert_eq!(lines.count(), 60);
    let acc: f64 = String::from_utf8_lossy(&out.stdout).trim().trim_start_matches("accuracy=").parse().unwrap();
    assert!(acc >= 0.95, "{acc}");

    // the same model predicts identically the second time
    let again = dir.path().join("pred2.csv");
    assert!(run(&["predict", "--model", p(&model), "--data", p(&test), "--out", p(&again)]).status.success());
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());
}

#[test]
fn multiclass_predictions_use_original_labels() {
    let dir = tempfile::tempdir().unwrap();
    let (data, model) = (dir.path().join("three.csv"), dir.path().join("m.json"));
    let ds: Dataset<f64> =
        gaussian_blobs(&[vec![0.0, 6.0], vec![6.0, 0.0], vec![-6.0, -6.0]], &[3, 5, 7], 30, 1.0, 4).unwrap();
    write_csv(&data, &ds);
    assert!(run(&["train", "--data", p(&data), "--model-out", p(&model), "--kernel", "rbf", "--sigma", "2"])
        .status
        .success());
    let out = run(&["predict", "--model", p(&model), "--data", p(&data)]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    let labels: Vec<&str> = stdout.lines().skip(1).filter_map(|l| l.split(',').nth(1)).collect();
    assert_eq!(labels.len(), 90);
    assert!(labels.iter().all(|l| ["3", "5", "7"].contains(l)));
}

#[test]
fn dimension_mismatch_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (train, wide, model) = (dir.path().join("train.csv"), dir.path().join("wide.csv"), dir.path().join("m.json"));
    write_csv(&train, &two_blobs(40, 6.0, 1).unwrap());
    let ds: Dataset<f64> = gaussian_blobs(&[vec![1.0, 1.0, 1.0], vec![-1.0, -1.0, -1.0]], &[1, -1], 5, 1.0, 3).unwrap();
    write_csv(&wide, &ds);
    assert!(run(&["train", "--data", p(&train), "--model-out", p(&model)]).status.success());
    let out = run(&["predict", "--model", p(&model), "--data", p(&wide)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension mismatch"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_csv(&data, &two_blobs(200, 1.0, 9).unwrap());
    let model = dir.path().join("m.json");
    let code = |args: &[&str]| run(args).status.code();

    assert_eq!(code(&["train", "--data", p(&data), "--model-out", p(&model), "--tau", "-1"]), Some(2));
    assert_eq!(code(&["train", "--data", p(&data), "--model-out", p(&model), "--c1", "0.1,1"]), Some(2));
    assert_eq!(code(&["train", "--bogus"]), Some(2));
    assert_eq!(code(&["train", "--data", "/nonexistent/file.csv", "--model-out", p(&model)]), Some(3));

    let garbled = dir.path().join("bad.csv");
    std::fs::write(&garbled, "x,label\n1.0,1\nnot-a-number,-1\n").unwrap();
    assert_eq!(code(&["train", "--data", p(&garbled), "--model-out", p(&model)]), Some(3));

    let one_class = dir.path().join("one.csv");
    std::fs::write(&one_class, "x,label\n1.0,1\n2.0,1\n3.0,1\n").unwrap();
    assert_eq!(code(&["train", "--data", p(&one_class), "--model-out", p(&model)]), Some(3));

    // a one-step budget cannot reach the tolerance on 200 overlapping points
    let out = run(&["train", "--data", p(&data), "--model-out", p(&model), "--max-iter", "1", "--tol", "1e-12"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn cv_report_layout() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_csv(&data, &two_blobs(60, 6.0, 3).unwrap());
    let out = run(&["cv", "--data", p(&data), "--folds", "3", "--timing"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("fold,n_train,n_test,accuracy,f1"));
    assert!(lines[0].ends_with(",train_seconds"));
    assert_eq!(lines.len(), 1 + 3 + 2);
    let width = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == width));
    assert!(lines[4].starts_with("mean,") && lines[5].starts_with("std,"));
}

#[test]
fn extract_pi_then_apply_basis() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let ds: Dataset<f64> = gaussian_blobs(&[vec![2.0, 0.0, 1.0], vec![-2.0, 0.0, -1.0]], &[1, -1], 20, 1.0, 5).unwrap();
    write_csv(&data, &ds);
    let (pi, basis, pi2) = (dir.path().join("pi.csv"), dir.path().join("basis.json"), dir.path().join("pi2.csv"));
    let out =
        run(&["extract-pi", "--data", p(&data), "--pca-components", "2", "--out", p(&pi), "--basis-out", p(&basis)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&pi).unwrap();
    assert_eq!(text.lines().next(), Some("pc1,pc2"));
    assert_eq!(text.lines().count(), 41);
    let out = run(&[
        "extract-pi",
        "--data",
        p(&data),
        "--basis",
        p(&basis),
        "--out",
        p(&pi2),
        "--basis-out",
        p(&dir.path().join("b2.json")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(text, std::fs::read_to_string(&pi2).unwrap());
    assert_eq!(
        run(&["extract-pi", "--data", p(&data), "--pca-components", "9", "--out", p(&pi), "--basis-out", p(&basis)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn detect_eval_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    let (det, gt) = (dir.path().join("det.txt"), dir.path().join("gt.txt"));
    std::fs::write(&det, "img1 0 0 2 2 0.9\nimg1 5 5 6 6 0.4\nimg2 0 0 1 1 0.8\n").unwrap();
    std::fs::write(&gt, "img1 0 0 2 2\nimg2 3 3 4 4\n").unwrap();
    let out = run(&["detect-eval", "--detections", p(&det), "--ground-truth", p(&gt), "--thresholds", "0.3,0.85"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "threshold,miss_rate,fppi,tp,fp,fn");
    // at 0.85 only the matching box survives; at 0.3 every box is kept
    assert!(lines.contains(&"0.85,0.5,0,1,0,1"), "{text}");
    assert!(lines.contains(&"0.3,0.5,1,1,2,1"), "{text}");
}
