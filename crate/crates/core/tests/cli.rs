use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const QUICK: &[&str] = &[
    "--epochs",
    "2",
    "--pretrain-epochs",
    "2",
    "--set",
    "synth_samples=45",
    "--set",
    "synth_dim=6",
    "--set",
    "hidden=16",
    "--set",
    "latent=4",
    "--set",
    "projection=4",
];

fn rmvc(args: &[&str], extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmvc"))
        .args(args)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_synth_writes_a_loadable_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("blobs");
    let out = rmvc(
        &["gen-synth", "--out", s(&dir), "--samples", "30", "--views", "2", "--dim", "5"],
        &[],
    );
    ok(&out);
    let d = rmvc::data::load_dataset(&dir).unwrap();
    assert_eq!(d.num_samples(), 30);
    assert_eq!(d.view_dims(), vec![5, 5]);
    assert_eq!(d.num_clusters, 3);
}

#[test]
fn single_repeat_writes_one_row_and_a_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("r");
    ok(&rmvc(&["run", "--repeats", "1", "--noise-ratio", "0.3", "--out", s(&out_dir)], QUICK));
    let runs = rows(&out_dir.join("runs.csv"));
    assert_eq!(runs.len(), 1);
    assert_eq!(runs[0][1], "0.3");
    assert_eq!(rows(&out_dir.join("summary.csv")).len(), 1);
    let seed_dir = out_dir.join("seed0");
    for f in ["train.log", "assignments.csv", "model.bin", "embeddings_view1.csv", "phi_view3.csv"] {
        assert!(seed_dir.join(f).is_file(), "missing {f}");
    }
    let log = fs::read_to_string(seed_dir.join("train.log")).unwrap();
    assert_eq!(log.lines().count(), 1 + 4);
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&rmvc(&["run", "--repeats", "2", "--out", s(d), "--set", "checkpoint_every=1"], QUICK));
    }
    for f in ["runs.csv", "summary.csv", "seed1/model.bin", "seed1/checkpoint_epoch2.bin", "seed0/train.log"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn summary_is_the_mean_and_sample_std_of_the_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("r");
    ok(&rmvc(&["run", "--repeats", "3", "--seed", "5", "--out", s(&out_dir)], QUICK));
    let runs = rows(&out_dir.join("runs.csv"));
    let seeds: Vec<&str> = runs.iter().map(|r| r[2].as_str()).collect();
    assert_eq!(seeds, ["5", "6", "7"]);
    let acc: Vec<f64> = runs.iter().map(|r| r[4].parse().unwrap()).collect();
    let mean = acc.iter().sum::<f64>() / 3.0;
    let std = (acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
    let summary = &rows(&out_dir.join("summary.csv"))[0];
    assert_eq!(summary[3], "3");
    assert!((summary[4].parse::<f64>().unwrap() - mean).abs() < 1e-12);
    assert!((summary[5].parse::<f64>().unwrap() - std).abs() < 1e-12);
}

#[test]
fn sweep_keeps_the_requested_ratio_order() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("s");
    ok(&rmvc(&["sweep", "--repeats", "1", "--ratios", "0.5,0.1", "--out", s(&out_dir)], QUICK));
    let ratios: Vec<String> = rows(&out_dir.join("summary.csv")).into_iter().map(|r| r[1].clone()).collect();
    assert_eq!(ratios, ["0.5", "0.1"]);
    assert!(out_dir.join("ratio_0.5/seed0/model.bin").is_file());
    let table = fs::read_to_string(out_dir.join("table.md")).unwrap();
    assert!(table.find("| 50% |").unwrap() < table.find("| 10% |").unwrap());
}

#[test]
fn ablate_reports_all_four_variants() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("a");
    ok(&rmvc(&["ablate", "--repeats", "1", "--noise-ratio", "0.3", "--out", s(&out_dir)], QUICK));
    let variants: Vec<String> = rows(&out_dir.join("runs.csv")).into_iter().map(|r| r[3].clone()).collect();
    assert_eq!(variants, ["full", "no_dr", "no_con", "no_dr_con"]);
    assert_eq!(fs::read_to_string(out_dir.join("table.md")).unwrap().lines().count(), 6);
}

#[test]
fn unknown_config_key_is_named_and_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "tau = 0.7\nlearning_rat = 0.1\n").unwrap();
    let out = rmvc(&["run", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))], &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));
    assert!(!tmp.path().join("o").exists());

    let out = rmvc(&["run", "--tau", "1.5"], &[]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));
}

#[test]
fn eval_scores_an_assignment_file() {
    let tmp = tempfile::tempdir().unwrap();
    let pred = tmp.path().join("pred.csv");
    let truth = tmp.path().join("truth.csv");
    fs::write(&pred, "1\n1\n0\n0\n0\n").unwrap();
    fs::write(&truth, "0\n0\n1\n1\n0\n").unwrap();
    let out = rmvc(&["eval", "--assignments", s(&pred), "--labels", s(&truth)], &[]);
    ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("ACC 0.8000"), "{text}");
    assert!(text.contains("PUR 0.8000"), "{text}");
}
