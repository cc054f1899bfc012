// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn userrec(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_userrec"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// 24 items on a line (external ids 100, 101, ...), alternating groups.
fn fixture() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let mut f = String::from("item,v0,v1\n");
    let mut a = String::from("item,label\n");
    for i in 0..24u64 {
        f.push_str(&format!("{},{},{}\n", 100 + i, i * i % 17, i));
        a.push_str(&format!("{},{}\n", 100 + i, if i % 3 == 0 { "b" } else { "a" }));
    }
    fs::write(dir.path().join("features.csv"), f).unwrap();
    fs::write(dir.path().join("attrs.csv"), a).unwrap();
    let p = dir.path().to_path_buf();
    (dir, p)
}

fn list_items(csv: &str) -> Vec<String> {
    csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().to_string()).collect()
}

#[test]
fn consul_tau_zero_returns_the_provider_list() {
    let (_d, p) = fixture();
    let base = ["recommend", "--features", "features.csv", "--attributes", "attrs.csv", "--k", "4", "--source", "103"];
    let provider = userrec(&[&base[..], &["--method", "provider"]].concat(), &p);
    let consul = userrec(&[&base[..], &["--method", "consul", "--tau", "0"]].concat(), &p);
    assert!(provider.status.success() && consul.status.success(), "{}", stderr(&consul));
    assert_eq!(list_items(&stdout(&consul)), list_items(&stdout(&provider)));
    assert_eq!(list_items(&stdout(&consul)).len(), 4);
    assert!(stdout(&consul).starts_with("rank,item,group,fallback\n"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let (_d, p) = fixture();
    let o = userrec(&["frobnicate"], &p);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn tau_above_bound_exits_three() {
    let (_d, p) = fixture();
    let o = userrec(
        &["recommend", "--features", "features.csv", "--attributes", "attrs.csv", "--k", "10", "--source", "100", "--method", "consul", "--tau", "6"],
        &p,
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("K / |groups| = 10 / 2"), "{}", stderr(&o));
}

#[test]
fn missing_file_exits_one() {
    let (_d, p) = fixture();
    let o = userrec(&["crawl", "--features", "nope.csv"], &p);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.csv"));
}

#[test]
fn config_file_with_flag_override() {
    let (_d, p) = fixture();
    fs::write(
        p.join("run.toml"),
        "[recommend]\nfeatures = \"features.csv\"\nattributes = \"attrs.csv\"\nk = 6\nmethod = \"privatewalk\"\ntau = 3\nseed = 5\nsource = 110\n",
    )
    .unwrap();
    let from_file = userrec(&["--config", "run.toml", "recommend"], &p);
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    let items = list_items(&stdout(&from_file));
    assert_eq!(items.len(), 6);
    let groups: Vec<String> = stdout(&from_file).lines().skip(1).map(|l| l.split(',').nth(2).unwrap().to_string()).collect();
    assert_eq!(groups.iter().filter(|g| *g == "b").count(), 3);

    let overridden = userrec(&["recommend", "--config", "run.toml", "--method", "provider", "--tau", "0"], &p);
    assert!(overridden.status.success());
    let again = userrec(&["recommend", "--features", "features.csv", "--attributes", "attrs.csv", "--k", "6", "--source", "110", "--method", "provider"], &p);
    assert_eq!(stdout(&overridden), stdout(&again));

    fs::write(p.join("bad.toml"), "[recommend]\ntua = 3\n").unwrap();
    let bad = userrec(&["--config", "bad.toml", "recommend"], &p);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("tua"));
}

#[test]
fn crawl_then_recommend_from_the_network() {
    let (_d, p) = fixture();
    let o = userrec(&["crawl", "--features", "features.csv", "--k", "3", "--out", "net.csv"], &p);
    assert!(o.status.success(), "{}", stderr(&o));
    let net = fs::read_to_string(p.join("net.csv")).unwrap();
    assert!(net.starts_with("src,dst,rank\n"));
    assert_eq!(net.lines().count(), 1 + 24 * 3);
    // dense ids on the network provider
    let mut dense = String::from("item,label\n");
    for i in 0..24 {
        dense.push_str(&format!("{i},{}\n", if i % 3 == 0 { "b" } else { "a" }));
    }
    fs::write(p.join("dense.csv"), dense).unwrap();
    let rec = userrec(&["recommend", "--network", "net.csv", "--attributes", "dense.csv", "--source", "5", "--method", "consul"], &p);
    assert!(rec.status.success(), "{}", stderr(&rec));
    let want: Vec<String> = net.lines().filter(|l| l.starts_with("5,")).map(|l| l.split(',').nth(1).unwrap().to_string()).collect();
    assert_eq!(list_items(&stdout(&rec)), want);
    // no temp files left next to the output
    let leftovers = fs::read_dir(&p).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with(".tmp")).count();
    assert_eq!(leftovers, 0);
}

#[test]
fn recover_writes_embeddings_and_diagnostics() {
    let (_d, p) = fixture();
    let mut truth = String::from("item,v0,v1\n");
    for i in 0..24u64 {
        truth.push_str(&format!("{},{},{}\n", 100 + i, (i % 6) as f64, (i / 6) as f64));
    }
    fs::write(p.join("truth.csv"), &truth).unwrap();
    let o = userrec(
        &["recover", "--features", "truth.csv", "--k", "4", "--dim", "2", "--truth", "truth.csv", "--out", "emb.csv", "--diagnostics", "diag.json"],
        &p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let emb = fs::read_to_string(p.join("emb.csv")).unwrap();
    assert!(emb.starts_with("item,v0,v1\n"));
    assert_eq!(emb.lines().count(), 25);
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("diag.json")).unwrap()).unwrap();
    assert_eq!(diag["n"], 24);
    assert!(diag["distance_spearman"].as_f64().unwrap() > 0.8);
}

#[test]
fn ingest_writes_clean_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut log = String::from("user,item,timestamp\n");
    for u in 0..30u64 {
        for j in 0..6u64 {
            log.push_str(&format!("{},{},{}\n", 1000 + u, 50 + (u + j * 3) % 20, u * 10 + j));
        }
    }
    log.push_str("9999,77,1\n");
    fs::write(dir.path().join("log.csv"), log).unwrap();
    let o = userrec(&["ingest", "--interactions", "log.csv", "--k-core", "3", "--popularity-threshold", "9", "--out-dir", "out"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out");
    for f in ["interactions.csv", "items.csv", "users.csv", "attributes.csv", "split.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let users = fs::read_to_string(out.join("users.csv")).unwrap();
    assert!(!users.contains("9999"));
    assert_eq!(fs::read_to_string(out.join("split.csv")).unwrap().lines().count(), 31);
}

#[test]
fn version_and_schema() {
    let (_d, p) = fixture();
    let v = userrec(&["--version"], &p);
    assert_eq!(stdout(&v).trim(), format!("userrec {}", env!("CARGO_PKG_VERSION")));
    let s = userrec(&["--schema"], &p);
    assert!(s.status.success());
    let schema: serde_json::Value = serde_json::from_str(&stdout(&s)).unwrap();
    assert_eq!(schema["csv"]["columns"][0], "dataset");
}

#[test]
fn sweep_json_report() {
    let (_d, p) = fixture();
    let o = userrec(
        &["sweep", "--n", "200", "--taus", "0,5", "--methods", "consul,provider", "--queries", "20", "--out", "r.json"],
        &p,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["rows"].as_array().unwrap().len(), 4);
    assert_eq!(r["rows"][1]["least_ratio"], 0.5);
}
