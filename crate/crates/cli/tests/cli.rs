use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use imh::dataset::save_native;
use imh::model::Model;
use imh::{CodeSet, DataMatrix, Matrix};

fn imh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imh"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = imh(args);
    assert!(
        out.status.success(),
        "imh {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SYNTH: [&str; 4] = ["--synth", "gaussian_clusters", "--synth-n", "400"];

fn train_small(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["train"];
    args.extend_from_slice(&SYNTH);
    args.extend_from_slice(&["--test-count", "50", "--m", "40", "--tsne-iters", "250"]);
    if !extra.contains(&"--r") {
        args.extend_from_slice(&["--r", "8"]);
    }
    args.extend_from_slice(extra);
    args.extend_from_slice(&["--out", p(&out)]);
    ok(&args);
    out
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn defaults_are_recorded_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[dataset]\nsynth = \"gaussian_clusters\"\nsynth_n = 500\n[train]\nmethod = \"imh-le-base\"\nr = 8\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    ok(&["train", "--config", p(&cfg), "--out", p(&out)]);
    let m = manifest(&out.join("manifest.json"));
    let train = &m["config"]["train"];
    assert_eq!(train["m"], 400);
    assert_eq!(train["k"], 5);
    assert_eq!(train["lambda"], 2.0);
    assert_eq!(m["seed"], 0);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let stages: Vec<&str> = m["timings"].as_array().unwrap().iter().map(|t| t["stage"].as_str().unwrap()).collect();
    assert_eq!(stages, ["load", "base", "bandwidth", "affinity", "embed", "center"]);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[dataset]\nsynth = \"gaussian_clusters\"\nsynth_n = 300\n[train]\nmethod = \"lsh\"\nr = 8\n").unwrap();
    let out = dir.path().join("o");
    ok(&["train", "--config", p(&cfg), "--r", "12", "--seed", "4", "--out", p(&out)]);
    let m = manifest(&out.join("manifest.json"));
    assert_eq!(m["config"]["train"]["r"], 12);
    assert_eq!(m["config"]["train"]["method"], "lsh");
    assert_eq!(m["seed"], 4);
}

#[test]
fn same_config_and_seed_give_identical_models() {
    let dir = tempfile::tempdir().unwrap();
    let a = train_small(dir.path(), "a", &["--seed", "11"]);
    let b = train_small(dir.path(), "b", &["--seed", "11"]);
    let c = train_small(dir.path(), "c", &["--seed", "12"]);
    let read = |d: &Path| std::fs::read(d.join("model.bin")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(
        std::fs::read(a.join("split.json")).unwrap(),
        std::fs::read(b.join("split.json")).unwrap()
    );
}

#[test]
fn manifest_reruns_reproduce_and_detect_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let a = train_small(dir.path(), "a", &["--method", "imh-le"]);
    let rerun = dir.path().join("rerun");
    ok(&["train", "--manifest", p(&a.join("manifest.json")), "--out", p(&rerun)]);
    assert_eq!(
        std::fs::read(a.join("model.bin")).unwrap(),
        std::fs::read(rerun.join("model.bin")).unwrap()
    );

    let mut m = manifest(&a.join("manifest.json"));
    m["config"]["train"]["r"] = serde_json::json!(6);
    let tampered = dir.path().join("tampered.json");
    std::fs::write(&tampered, serde_json::to_string(&m).unwrap()).unwrap();
    let out = imh(&["train", "--manifest", p(&tampered)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hash mismatch"));
}

#[test]
fn le_code_length_is_rejected_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    // the dataset path does not exist: validation must fail first
    let res = imh(&[
        "train", "--data", "/nonexistent.fvecs", "--method", "imh-le", "--m", "10", "--r", "10", "--out", p(&out),
    ]);
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("r < m - 1"), "{err}");
    assert!(!out.exists());
}

#[test]
fn user_errors_exit_with_one() {
    assert_eq!(imh(&["train", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(imh(&["train", "--data", "/nonexistent.fvecs"]).status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_imh"))
        .args(["train", "--synth", "gaussian_clusters", "--method", "lsh"])
        .env("IMH_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(imh(&["--help"]).status.success());
}

#[test]
fn encoding_base_points_with_one_neighbour_gives_signs_of_the_embedding() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_small(dir.path(), "run", &["--k", "1", "--method", "imh-le-base"]);
    let model = match Model::load(run.join("model.bin")).unwrap() {
        Model::Manifold(h) => h,
        Model::Linear(_) => unreachable!(),
    };
    let centers = DataMatrix::from_matrix(model.centers().clone(), "centers").unwrap();
    let centers_path = dir.path().join("centers.imhdata");
    save_native(&centers, &centers_path).unwrap();
    let codes_path = dir.path().join("codes.bin");
    ok(&["encode", "--model", p(&run.join("model.bin")), "--data", p(&centers_path), "--out", p(&codes_path)]);

    let emb = model.embedding();
    let (m, r) = emb.values.shape();
    let mut shifted = Matrix::zeros(m, r);
    for j in 0..m {
        for i in 0..r {
            shifted[(j, i)] = emb.values[(j, i)] - emb.center_offset[i];
        }
    }
    let expected = CodeSet::from_signs(&shifted, (0..m as u64).collect()).unwrap();
    assert_eq!(CodeSet::load(&codes_path).unwrap(), expected);
    assert!(codes_path.with_extension("manifest.json").exists());
}

#[test]
fn reencoding_is_idempotent_and_empty_input_gives_empty_codes() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_small(dir.path(), "run", &[]);
    let model = run.join("model.bin");
    let mut bytes = Vec::new();
    for name in ["a.bin", "b.bin"] {
        let out = dir.path().join(name);
        let mut args = vec!["encode", "--model", p(&model)];
        args.extend_from_slice(&SYNTH);
        args.extend_from_slice(&["--out", p(&out)]);
        ok(&args);
        bytes.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);

    let empty = dir.path().join("empty.bin");
    let mut args = vec!["encode", "--model", p(&model)];
    args.extend_from_slice(&SYNTH);
    args.extend_from_slice(&["--limit", "0", "--out", p(&empty)]);
    ok(&args);
    let codes = CodeSet::load(&empty).unwrap();
    assert!(codes.is_empty());
    assert_eq!(codes.r(), 8);
}

#[test]
fn encode_rejects_dimension_mismatch_naming_both() {
    let dir = tempfile::tempdir().unwrap();
    let run = train_small(dir.path(), "run", &[]);
    let data = DataMatrix::from_matrix(Matrix::zeros(4, 3), "three").unwrap();
    let path = dir.path().join("d3.imhdata");
    save_native(&data, &path).unwrap();
    let out = imh(&["encode", "--model", p(&run.join("model.bin")), "--data", p(&path), "--out", p(&dir.path().join("x.bin"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("d = 2") && err.contains("d = 3"), "{err}");
}

/// Two labelled classes whose codes are all-zeros and all-ones.
fn perfect_instance(dir: &Path, r: usize) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
    let n = 20;
    let labels: Vec<i64> = (0..n).map(|i| (i % 2) as i64).collect();
    let data = DataMatrix::from_matrix(Matrix::zeros(n, 1), "toy").unwrap().with_labels(labels.clone()).unwrap();
    let data_path = dir.join("toy.imhdata");
    save_native(&data, &data_path).unwrap();
    let split = imh::dataset::split(&data, 6, 0).unwrap();
    let split_path = dir.join("split.json");
    std::fs::write(&split_path, serde_json::to_string(&split).unwrap()).unwrap();
    let codes = |ids: &[u64]| {
        let bits: Vec<Vec<bool>> = ids.iter().map(|&id| vec![labels[id as usize] == 1; r]).collect();
        CodeSet::from_bits(r, ids.to_vec(), &bits).unwrap()
    };
    let db = dir.join(format!("db{r}.bin"));
    let q = dir.join(format!("q{r}.bin"));
    codes(&split.train_ids).save(&db).unwrap();
    codes(&split.test_ids).save(&q).unwrap();
    (data_path, split_path, db, q)
}

#[test]
fn perfect_codes_score_map_one() {
    let dir = tempfile::tempdir().unwrap();
    let (data, split, db, q) = perfect_instance(dir.path(), 16);
    let out = dir.path().join("ev");
    ok(&["eval", "--data", p(&data), "--split", p(&split), "--db", p(&db), "--queries", p(&q), "--out", p(&out)]);
    let report = manifest(&out.join("report_0_r16.json"));
    assert_eq!(report["map"], 1.0);
    assert_eq!(report["radius"], 2);
    let curves = std::fs::read_to_string(out.join("curves_0_r16.csv")).unwrap();
    assert!(curves.starts_with("curve,parameter,precision,recall\n"));
}

#[test]
fn eval_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (data, split, db16, _) = perfect_instance(dir.path(), 16);
    let (_, _, _, q8) = perfect_instance(dir.path(), 8);
    let out = dir.path().join("ev");
    let res = imh(&["eval", "--data", p(&data), "--split", p(&split), "--db", p(&db16), "--queries", p(&q8), "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("code length mismatch"));
    let res = imh(&["eval", "--data", p(&data), "--db", p(&db16), "--queries", p(&q8), "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("--split"));
}

#[test]
fn code_length_sweep_gives_one_summary_row_per_length() {
    let dir = tempfile::tempdir().unwrap();
    let mut args: Vec<String> = vec!["eval".into()];
    let run_dir = dir.path().join("run16");
    for r in [16, 32, 64, 128] {
        let run = train_small(dir.path(), &format!("run{r}"), &["--method", "lsh", "--r", &r.to_string()]);
        let (model, split) = (run.join("model.bin"), run.join("split.json"));
        for part in ["train", "test"] {
            let out = dir.path().join(format!("{part}{r}.bin"));
            let mut enc = vec!["encode", "--model", p(&model)];
            enc.extend_from_slice(&SYNTH);
            enc.extend_from_slice(&["--split", p(&split), "--part", part, "--out", p(&out)]);
            ok(&enc);
        }
        args.extend([
            "--db".into(),
            p(&dir.path().join(format!("train{r}.bin"))).into(),
            "--queries".into(),
            p(&dir.path().join(format!("test{r}.bin"))).into(),
        ]);
    }
    let out = dir.path().join("ev");
    args.extend(SYNTH.iter().map(|s| s.to_string()));
    args.extend(["--split".into(), p(&run_dir.join("split.json")).into(), "--out".into(), p(&out).into()]);
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    for (i, (row, r)) in rows.iter().zip([16, 32, 64, 128]).enumerate() {
        assert!(row.starts_with(&format!("{i},{r},")), "{row}");
    }
}

#[test]
fn query_ranks_and_looks_up() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, db, q) = perfect_instance(dir.path(), 16);
    let out = ok(&["query", "--db", p(&db), "--queries", p(&q), "--top-k", "3"]);
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 6);
    for l in &lines {
        let res = l["results"].as_array().unwrap();
        assert_eq!(res.len(), 3);
        assert!(res.iter().all(|h| h["distance"] == 0));
    }
    let out = ok(&["query", "--db", p(&db), "--queries", p(&q), "--radius", "2"]);
    for line in String::from_utf8(out.stdout).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let class = v["query_id"].as_u64().unwrap() % 2;
        let ids = v["ids"].as_array().unwrap();
        assert!(!ids.is_empty());
        assert!(ids.iter().all(|id| id.as_u64().unwrap() % 2 == class));
    }
}

#[test]
fn bench_table1_prefers_kmeans_on_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b");
    ok(&["bench", "table1", "--m", "100", "--tsne-iters", "300", "--bits", "16,32", "--out", p(&out)]);
    let text = std::fs::read_to_string(out.join("table1_summary.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let (mut random, mut kmeans, mut count) = (0.0, 0.0, 0);
    for rec in rows.records() {
        let rec = rec.unwrap();
        random += rec[2].parse::<f64>().unwrap();
        kmeans += rec[3].parse::<f64>().unwrap();
        count += 1;
    }
    assert_eq!(count, 6);
    assert!(kmeans >= random, "kmeans {kmeans} < random {random}");
    assert_eq!(std::fs::read_to_string(out.join("table1.csv")).unwrap().lines().count(), 1 + 12);
}

#[test]
fn bench_sensitivity_has_one_row_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    ok(&[
        "bench", "sensitivity", "--synth-n", "600", "--methods", "imh-le", "--ms", "50,100", "--ks", "2,3,4", "--m", "80",
        "--r", "16", "--out", p(&out),
    ]);
    let text = std::fs::read_to_string(out.join("sensitivity.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "method,varying,m,k,r,seed,map");
    assert_eq!(rows.len(), 1 + 2 + 3);
}

#[test]
fn bench_bounds_reports_bound_and_empirical_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bd");
    ok(&["bench", "bounds", "--trials", "500", "--n-primes", "10,20", "--out", p(&out)]);
    let text = std::fs::read_to_string(out.join("bounds.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert!(header.contains(&"bound") && header.contains(&"empirical"));
    assert_eq!(text.lines().count(), 3);
}
