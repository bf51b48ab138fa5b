use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use convac_core::info::DiscreteDist;
use convac_core::model::{ComponentBank, HtModel, LatentPriors, Model};
use convac_core::tensor::{HtFactors, Mode};
use convac_lab::format::{to_json, ModelDoc};
use serde_json::Value;

const LN2: f64 = std::f64::consts::LN_2;

fn lab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convac-lab"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

/// N = 2, deterministic components `[1, 0]` and `[0, 1]`, all weights uniform.
fn hand_model_file(dir: &Path) -> String {
    let bank = ComponentBank::shared(vec![
        DiscreteDist::point_mass(2, 0).unwrap(),
        DiscreteDist::point_mass(2, 1).unwrap(),
    ])
    .unwrap();
    let half = vec![0.5, 0.5];
    let weights = vec![vec![vec![half.clone(), half.clone()], vec![half.clone(), half.clone()]]];
    let f = HtFactors::new(Mode::Probabilistic, 2, vec![2], weights, half).unwrap();
    let m = Model::Ht(HtModel::new(bank, f, LatentPriors::Induced).unwrap());
    write(dir, "hand.json", &to_json(&ModelDoc::new(&m, None)))
}

#[test]
fn verify_law_on_hand_model() {
    let dir = tempfile::tempdir().unwrap();
    hand_model_file(dir.path());
    let cfg = write(dir.path(), "hand.toml", "[model]\nfile = \"hand.json\"\n");
    let out = lab(&["verify-law", "--config", &cfg, "--out", "o"], dir.path());
    ok(&out);
    let r = json(dir.path().join("o/report.json"));
    assert!((r["gap"].as_f64().unwrap() - 2.0 * LN2).abs() < 1e-12);
    assert!((r["c_hat"].as_f64().unwrap() - LN2).abs() < 1e-12);
    assert_eq!(r["pass"], Value::Bool(true));
    assert_eq!(r["mapping_count"], 3);
    assert_eq!(r["ratio"]["applicable"], Value::Bool(false));
    let csv = fs::read_to_string(dir.path().join("o/mappings.csv")).unwrap();
    assert!(csv.starts_with("layer,node,side,in_channels,out_channels,rank,source_entropy_nats,"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn activation_uniform_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "a.toml",
        "[[activation.densities]]\nfamily = \"uniform\"\nlo = 0.0\nhi = 1.0\n\n[[activation.densities]]\nfamily = \"normal\"\nmean = 0.0\nsd = 1.0\n",
    );
    ok(&lab(&["activation", "--config", &cfg, "--out", "o"], dir.path()));
    let text = fs::read_to_string(dir.path().join("o/activation.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let uniform = &rows[0];
    let f = |r: &csv::StringRecord, c: &str| r[col(c)].parse::<f64>().unwrap();
    assert!(f(uniform, "h_x_nats").abs() < 1e-9);
    assert!(f(uniform, "h_relu_nats").abs() < 1e-9);
    assert!(f(uniform, "h_sigmoid_nats") < -1.38);
    assert_eq!(&uniform[col("relu_status")], "ok");
    assert!(rows[1][col("relu_status")].starts_with("rejected"));
    assert_eq!(&rows[1][col("h_relu_nats")], "");
}

#[test]
fn activation_defaults_without_config() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lab(&["activation", "--out", "o"], dir.path()));
    let text = fs::read_to_string(dir.path().join("o/activation.csv")).unwrap();
    assert_eq!(text.lines().count(), 6);
}

#[test]
fn ensemble_of_one_matches_verify_law() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.toml", "seed = 31\n[ensemble]\nmodels = 1\n");
    ok(&lab(&["ensemble", "--config", &cfg, "--out", "e"], dir.path()));
    ok(&lab(&["verify-law", "--config", &cfg, "--out", "v"], dir.path()));
    let r = json(dir.path().join("v/report.json"));
    let text = fs::read_to_string(dir.path().join("e/ensemble_models.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let h = rdr.headers().unwrap().clone();
    let row = rdr.records().next().unwrap().unwrap();
    let get = |name: &str| row[h.iter().position(|x| x == name).unwrap()].parse::<f64>().unwrap();
    assert_eq!(get("h_x_nats"), r["h_x"].as_f64().unwrap());
    assert_eq!(get("leaf_sum_nats"), r["leaf_sum"].as_f64().unwrap());
    assert_eq!(get("c_hat_nats"), r["c_hat"].as_f64().unwrap());
    assert_eq!(get("beta_hat"), r["beta_hat"].as_f64().unwrap());
    assert_eq!(get("seed"), 31.0);
}

#[test]
fn reruns_from_manifest_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    hand_model_file(dir.path());
    let configs = [
        ("gen-model", "seed = 4\n[model]\nkind = \"cp\"\nn = 3\nm = 2\ns = 3\nz = 2\n"),
        ("entropy", "seed = 5\n"),
        ("verify-law", "seed = 6\n[model]\nkind = \"cp\"\nn = 4\nm = 3\n"),
        ("activation", "log_base = \"bits\"\n"),
        ("ensemble", "seed = 7\n[ensemble]\nmodels = 12\nmode = \"train_test\"\n"),
    ];
    for (cmd, text) in configs {
        let cfg = write(dir.path(), &format!("{cmd}.toml"), text);
        let first = format!("{cmd}-1");
        let second = format!("{cmd}-2");
        ok(&lab(&[cmd, "--config", &cfg, "--out", &first], dir.path()));
        let manifest = dir.path().join(&first).join("manifest.json");
        ok(&lab(&[cmd, "--config", manifest.to_str().unwrap(), "--out", &second], dir.path()));
        let m1 = json(manifest);
        let m2 = json(dir.path().join(&second).join("manifest.json"));
        assert_eq!(m1["outputs"], m2["outputs"], "{cmd}");
        for o in m1["outputs"].as_array().unwrap() {
            let f = o["file"].as_str().unwrap();
            let a = fs::read(dir.path().join(&first).join(f)).unwrap();
            let b = fs::read(dir.path().join(&second).join(f)).unwrap();
            assert_eq!(a, b, "{cmd}/{f}");
        }
    }
}

#[test]
fn generated_model_reloads() {
    let dir = tempfile::tempdir().unwrap();
    ok(&lab(&["gen-model", "--seed", "12", "--out", "g"], dir.path()));
    let cfg = write(dir.path(), "r.toml", "[model]\nfile = \"g/model.json\"\n");
    ok(&lab(&["entropy", "--config", &cfg, "--out", "from-file"], dir.path()));
    ok(&lab(&["entropy", "--seed", "12", "--out", "from-seed"], dir.path()));
    let a = fs::read(dir.path().join("from-file/entropy.json")).unwrap();
    let b = fs::read(dir.path().join("from-seed/entropy.json")).unwrap();
    assert_eq!(a, b);
    let e = json(dir.path().join("from-seed/entropy.json"));
    assert_eq!(e["layers"].as_array().unwrap().len(), 5);
    assert_eq!(e["chain_nondecreasing"], Value::Bool(true));
}

#[test]
fn seed_flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "seed = 7\n");
    ok(&lab(&["gen-model", "--config", &cfg, "--seed", "9", "--out", "o"], dir.path()));
    assert_eq!(json(dir.path().join("o/model.json"))["seed"], 9);
    assert_eq!(json(dir.path().join("o/manifest.json"))["config"]["seed"], 9);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "seed = 1\n[model]\nn = 6\n");
    let out = lab(&["verify-law", "--config", &bad], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.n: N must be a power of two"));

    assert_eq!(lab(&["entropy"], dir.path()).status.code(), Some(2));
    assert_eq!(
        lab(&["entropy", "--config", "missing.toml"], dir.path()).status.code(),
        Some(1)
    );

    let big = write(dir.path(), "big.toml", "seed = 1\n[model]\nn = 32\n");
    assert_eq!(lab(&["entropy", "--config", &big], dir.path()).status.code(), Some(3));

    let strict = write(
        dir.path(),
        "strict.toml",
        "seed = 1\n[model]\nn = 4\n[ensemble]\nmodels = 3\nmode = \"external\"\nc = 0.0\nbeta = 1.0\n",
    );
    let out = lab(&["ensemble", "--config", &strict, "--strict", "--out", "st"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(dir.path().join("st/ensemble.json").exists());
    let e = json(dir.path().join("st/ensemble.json"));
    assert_eq!(e["additive"]["violations"], 3);
    ok(&lab(&["ensemble", "--config", &strict, "--out", "lax"], dir.path()));
}

#[test]
fn bits_rescale_entropies() {
    let dir = tempfile::tempdir().unwrap();
    hand_model_file(dir.path());
    let cfg = write(dir.path(), "b.toml", "log_base = \"bits\"\n[model]\nfile = \"hand.json\"\n");
    ok(&lab(&["entropy", "--config", &cfg, "--out", "o"], dir.path()));
    let e = json(dir.path().join("o/entropy.json"));
    assert_eq!(e["unit"], "bits");
    assert!((e["h_x"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let csv = fs::read_to_string(dir.path().join("o/entropy_layers.csv")).unwrap();
    assert!(csv.starts_with("level,label,entropy_bits"));
}
