use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use binn_core::data::read_shard;
use binn_core::metrics::read_reports_json;

fn binn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_binn"))
        .args(args)
        .output()
        .expect("spawn binn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, extra: &str) -> PathBuf {
    let cfg = dir.join("synth.cfg");
    std::fs::write(
        &cfg,
        format!("verticals = 4\nentities = 20\nfeature_dim = 12\ntrain_videos = 1500\nval_videos = 200\n{extra}"),
    )
    .unwrap();
    let out = dir.join("data");
    let o = binn(&["synth", "--config", p(&cfg), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn train(data: &Path, ck: &Path, extra: &[&str]) -> Output {
    let vocab = data.join("vocab.txt");
    let shard = data.join("train.hlvs");
    let mut args = vec![
        "train",
        "--vocab",
        p(&vocab),
        "--train",
        p(&shard),
        "--out",
        p(ck),
        "--batch-size",
        "64",
    ];
    args.extend_from_slice(extra);
    binn(&args)
}

fn losses(out: &str) -> Vec<f64> {
    out.lines()
        .filter_map(|l| l.strip_prefix("step "))
        .map(|l| l.split_whitespace().last().unwrap().parse().unwrap())
        .collect()
}

fn metric(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing from:\n{out}"))
        .parse()
        .unwrap()
}

#[test]
fn synth_prints_stats_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "seed = 4\n");
    let first = std::fs::read(a.join("train.hlvs")).unwrap();
    let o = binn(&["synth", "--config", p(&dir.path().join("synth.cfg")), "--out", p(&dir.path().join("again"))]);
    let again = std::fs::read(dir.path().join("again/train.hlvs")).unwrap();
    assert_eq!(first, again);
    let mean = metric(&stdout(&o), "entity_labels_per_video");
    assert!((mean - 1.8).abs() / 1.8 < 0.05, "{mean}");
    assert!(dir.path().join("again/vocab.txt").is_file());
}

#[test]
fn train_reduces_loss_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "");
    let a = train(&data, &dir.path().join("a.hlck"), &["--iters", "500", "--seed", "2"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let la = losses(&stdout(&a));
    assert_eq!(la.len(), 6);
    assert!(la.last().unwrap() < la.first().unwrap());

    let b = train(&data, &dir.path().join("b.hlck"), &["--iters", "500", "--seed", "2"]);
    assert_eq!(la, losses(&stdout(&b)));
    assert_eq!(
        std::fs::read(dir.path().join("a.hlck")).unwrap(),
        std::fs::read(dir.path().join("b.hlck")).unwrap()
    );
}

#[test]
fn logreg_defaults_to_lr_point_zero_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "");
    let o = train(&data, &dir.path().join("m.hlck"), &["--model", "logreg", "--iters", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("lr = 0.01,"), "{}", stdout(&o));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "model = logreg\niters = 7\nlr = 0.5\nnorm = pca\n").unwrap();
    let o = train(&data, &dir.path().join("m.hlck"), &["--config", p(&cfg), "--lr", "0.02"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("model = logreg") && out.contains("lr = 0.02") && out.contains("iters = 7"));
    assert!(out.contains("norm = pca"));
}

#[test]
fn resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "");
    let full = dir.path().join("full.hlck");
    let half = dir.path().join("half.hlck");
    let resumed = dir.path().join("resumed.hlck");
    assert!(train(&data, &full, &["--iters", "200"]).status.success());
    assert!(train(&data, &half, &["--iters", "100"]).status.success());
    // The half run was configured for 100 iterations; extend it to 200.
    let o = train(&data, &resumed, &["--resume", p(&half), "--iters", "200"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = binn_core::Checkpoint::load(&full).unwrap();
    let b = binn_core::Checkpoint::load(&resumed).unwrap();
    assert_eq!(a.tensors, b.tensors);
    assert_eq!(a.step, b.step);
}

#[test]
fn fit_norm_output_feeds_training() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "");
    let norm = dir.path().join("norm.hlck");
    let o = binn(&[
        "fit-norm",
        "--train",
        p(&data.join("train.hlvs")),
        "--norm",
        "pca",
        "--out",
        p(&norm),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = train(
        &data,
        &dir.path().join("m.hlck"),
        &["--iters", "20", "--normalizer", p(&norm)],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn evaluate_and_predict_agree() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "");
    let ck = dir.path().join("m.hlck");
    assert!(train(&data, &ck, &["--iters", "400"]).status.success());
    let val = data.join("val.hlvs");

    let prefix = dir.path().join("report");
    let o = binn(&["evaluate", "--checkpoint", p(&ck), "--shard", p(&val), "--out", p(&prefix)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let hit = metric(&stdout(&o), "entities.hit_at_1");
    let reports = read_reports_json(&dir.path().join("report.json")).unwrap();
    assert_eq!(reports.len(), 2);
    let text = std::fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert_eq!(text, reports.iter().map(|r| r.to_key_values()).collect::<String>());

    let pred = dir.path().join("pred.tsv");
    let o = binn(&[
        "predict",
        "--checkpoint",
        p(&ck),
        "--shard",
        p(&val),
        "--top-k",
        "3",
        "--out",
        p(&pred),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let truth: HashMap<String, Vec<usize>> = read_shard(&val)
        .unwrap()
        .into_iter()
        .map(|r| (r.id.clone(), r.entity_labels().to_vec()))
        .collect();
    let text = std::fs::read_to_string(&pred).unwrap();
    let (mut hits, mut videos) = (0, 0);
    for line in text.lines() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 5);
        let pairs: Vec<(&str, f64)> = fields[2..]
            .iter()
            .map(|f| {
                let (l, s) = f.rsplit_once(':').unwrap();
                (l, s.parse().unwrap())
            })
            .collect();
        assert!(pairs.iter().all(|&(_, s)| s > 0.0 && s < 1.0));
        assert!(pairs.windows(2).all(|w| w[0].1 >= w[1].1));
        if fields[1] == "entities" {
            videos += 1;
            let top: usize = pairs[0].0.trim_start_matches("entity_").parse().unwrap();
            if truth[fields[0]].contains(&top) {
                hits += 1;
            }
        }
    }
    assert_eq!(videos, 200);
    assert!((hits as f64 / videos as f64 - hit).abs() < 1e-6);
}

#[test]
fn overfit_noiseless_run_approaches_one() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "noise_std = 0\nmean_entities = 1\n");
    let ck = dir.path().join("m.hlck");
    assert!(train(&data, &ck, &["--model", "logreg", "--iters", "1500"]).status.success());
    let o = binn(&["evaluate", "--checkpoint", p(&ck), "--shard", p(&data.join("train.hlvs"))]);
    let out = stdout(&o);
    assert!(metric(&out, "entities.map") > 0.95, "{out}");
    assert!(metric(&out, "entities.hit_at_1") > 0.95, "{out}");
}

#[test]
fn untrained_model_is_near_chance() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "");
    let ck = dir.path().join("m.hlck");
    assert!(train(&data, &ck, &["--iters", "0"]).status.success());
    let o = binn(&["evaluate", "--checkpoint", p(&ck), "--shard", p(&data.join("val.hlvs"))]);
    let hit = metric(&stdout(&o), "entities.hit_at_1");
    // 1.8 positives among 20 entities.
    assert!(hit < 0.3, "{hit}");
}

#[test]
fn exit_codes() {
    assert_eq!(binn(&["--help"]).status.code(), Some(0));
    assert_eq!(binn(&["--version"]).status.code(), Some(0));
    assert_eq!(binn(&["train", "--model", "svm"]).status.code(), Some(1));
    assert_eq!(binn(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(binn(&["train"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "");
    let missing = dir.path().join("missing.hlvs");
    let o = train(&data, &dir.path().join("m.hlck"), &["--iters", "1"]);
    assert!(o.status.success());
    let o = binn(&["evaluate", "--checkpoint", p(&dir.path().join("m.hlck")), "--shard", p(&missing)]);
    assert_eq!(o.status.code(), Some(2));

    let corrupt = dir.path().join("corrupt.hlvs");
    let mut bytes = std::fs::read(data.join("val.hlvs")).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&corrupt, bytes).unwrap();
    let o = binn(&["evaluate", "--checkpoint", p(&dir.path().join("m.hlck")), "--shard", p(&corrupt)]);
    assert_eq!(o.status.code(), Some(2));

    let o = train(&data, &dir.path().join("n.hlck"), &["--iters", "50", "--lr", "1e308"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    let o = train(&data, &dir.path().join("n.hlck"), &["--iters", "5", "--lr", "-1"]);
    assert_eq!(o.status.code(), Some(1));
}
