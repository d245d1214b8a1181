mod common;

use std::path::Path;
use std::process::{Command, Output};

use prockit::alignment::random_motion;
use prockit::geometry::pairwise_distances;
use prockit::io::{load_config, save_config, save_distances};
use prockit::PointConfig;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn prockit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prockit")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn save(dir: &Path, name: &str, config: &PointConfig) -> String {
    let path = dir.join(name);
    save_config(&path, config).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn align_relabels_a_shuffled_copy() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = common::random_config(&mut rng, 60, 2);
    let q = random_motion(&mut rng, 2, true, 4.0).apply(&p).unwrap();
    let mut rows = q.points().to_vec();
    rows.shuffle(&mut rng);
    let q = PointConfig::new(2, rows).unwrap();
    let (a, b) = (save(dir.path(), "p.json", &p), save(dir.path(), "q.json", &q));

    let out = prockit(&["align", &a, &b, "--relabel"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let line = text.lines().find(|l| l.starts_with("max_residual ")).unwrap();
    let residual: f64 = line["max_residual ".len()..].parse().unwrap();
    assert!(residual <= 1e-9, "{line}");

    // Without relabelling the points do not correspond.
    let out = prockit(&["align", &a, &b]);
    let text = stdout(&out);
    let line = text.lines().find(|l| l.starts_with("max_residual ")).unwrap();
    assert!(line["max_residual ".len()..].parse::<f64>().unwrap() > 1e-3);
}

#[test]
fn match_reports_the_bad_points() {
    let dir = tempfile::tempdir().unwrap();
    let p = PointConfig::from_rows(&[[0.0, 0.0], [0.0, 1.0], [0.0, 2.0], [2.0, 1.0]]).unwrap();
    let q = PointConfig::from_rows(&[[0.0, 0.0], [0.0, 1.0], [2.0, 0.0], [2.0, 1.0]]).unwrap();
    let (a, b) = (save(dir.path(), "p.json", &p), save(dir.path(), "q.json", &q));
    let out = prockit(&["match", &a, &b]);
    assert_eq!(out.status.code(), Some(2));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["congruent"], false);
    assert_eq!(json["max_support"], 3);
    assert_eq!(json["bad_p"].as_array().unwrap().len(), 1);
    assert_eq!(json["bad_q"].as_array().unwrap().len(), 1);

    let out = prockit(&["match", &a, &a, "--mode", "quad"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn simulate_writes_one_row_per_cell() {
    let out = prockit(&["simulate", "--eps-grid", "0.01,0.1", "--n-grid", "10:20:5", "--repeats", "2", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("eps,n,mean_sq_error"));
    assert_eq!(lines.count(), 6);
    assert_eq!(text, stdout(&prockit(&["simulate", "--eps-grid", "0.01,0.1", "--n-grid", "10:20:5", "--repeats", "2", "--seed", "3"])));
}

#[test]
fn usage_and_input_errors() {
    assert_eq!(prockit(&[]).status.code(), Some(64));
    assert_eq!(prockit(&["align", "only-one"]).status.code(), Some(64));
    assert_eq!(prockit(&["match", "a", "b", "--mode", "hexagon"]).status.code(), Some(64));
    assert_eq!(prockit(&["--help"]).status.code(), Some(0));
    let out = prockit(&["align", "/nonexistent/a.json", "/nonexistent/b.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"dim\": 2, \"points\": [[0, 0], [1]]}").unwrap();
    let out = prockit(&["match", bad.to_str().unwrap(), bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 1"));
}

#[test]
fn reconstruct3d_from_a_distance_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let config = common::random_sphere_config(&mut rng, 6);
    let dists = dir.path().join("d.txt");
    save_distances(&dists, &pairwise_distances(&config).unwrap()).unwrap();
    let out_path = dir.path().join("r.json");
    let volume = common::hull_volume(&config).to_string();
    let out = prockit(&[
        "reconstruct3d",
        dists.to_str().unwrap(),
        "--volume",
        &volume,
        "--n",
        "6",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let recon = load_config(&out_path).unwrap();
    let (a, b) = (pairwise_distances(&config).unwrap().values(), pairwise_distances(&recon).unwrap().values());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-6);
    }

    let out = prockit(&["reconstruct3d", dists.to_str().unwrap(), "--volume", "1e6", "--n", "6"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_reconstructible_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let generic = save(dir.path(), "g.json", &common::random_config(&mut rng, 11, 2));
    let planted = save(dir.path(), "z.json", &common::planted_zero_config(&mut ChaCha8Rng::seed_from_u64(5)));

    let out = prockit(&["check-reconstructible", &generic]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["verdict"], "reconstructible");

    let out = prockit(&["check-reconstructible", &planted, "--exhaustive"]);
    assert_eq!(out.status.code(), Some(2));

    let out = prockit(&["check-reconstructible", &generic, "--samples", "500", "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["samples"], 500);

    assert_eq!(prockit(&["check-reconstructible", &generic, "--exhaustive", "--samples", "5"]).status.code(), Some(64));
    assert_eq!(prockit(&["check-reconstructible", &generic, "--samples", "0"]).status.code(), Some(1));
}
