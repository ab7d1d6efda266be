use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use trendlab::experiment::*;
use trendlab::models::Family;
use trendlab::synthetic::{generate, SynthConfig};

fn market_dir(rows: usize) -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let m = generate(&SynthConfig { rows, ..SynthConfig::default() }, 3).unwrap();
    m.write_dir(dir.path()).unwrap();
    let end = m.last_date() - chrono::Duration::days(70);
    (dir, end.format("%Y-%m-%d").to_string())
}

const FAMILIES: &str = r#"families = ["nb", "knn", "rf"]"#;

/// `head` holds top-level keys, `tail` extra tables.
fn write_config(dir: &Path, name: &str, train_end: &str, head: &str, tail: &str) -> PathBuf {
    let body = format!(
        r#"
seed = 5
{head}

[data]
ohlcv = "prices.csv"
tweets = "tweets.csv"
trends = "trends.csv"
train_end = "{train_end}"
reduced_rows = 150

[protocol]
kind = "cv"
k = 4

[grids]
preset = "defaults"
{tail}
"#
    );
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

/// Every file under `dir`, relative path to bytes.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn deterministic(files: BTreeMap<String, Vec<u8>>) -> BTreeMap<String, Vec<u8>> {
    files.into_iter().filter(|(k, _)| !k.starts_with("timing_") && k != MANIFEST_FILE).collect()
}

#[test]
fn end_to_end_run_is_reproducible() {
    let (dir, end) = market_dir(500);
    let cfg = ExperimentConfig::load(write_config(dir.path(), "experiment.toml", &end, FAMILIES, "")).unwrap();
    let run_into = |name: &str| {
        let out = dir.path().join(name);
        let m = run(&cfg, &RunOptions { seed: None, output_dir: Some(out.clone()) }).unwrap();
        (m, out)
    };
    let (m1, out1) = run_into("a");
    let (_, out2) = run_into("b");

    assert_eq!(m1.results.len(), 2 * 2 * 3);
    assert!(m1.results.iter().all(|r| r.error.is_none()), "{:?}", m1.results.iter().find(|r| r.error.is_some()));
    for r in &m1.results {
        assert_eq!(r.validation.len(), 2, "{}/{}/{}", r.kind, r.window, r.family);
        let t = r.test.as_ref().unwrap();
        assert!((0.0..=1.0).contains(&t.metrics.accuracy));
        assert_eq!(t.unit_accuracy.len(), 4);
    }
    assert!(!out1.join(STALE_FILE).exists());

    let a = snapshot(&out1);
    for name in [
        "continuous_complete/comparison.csv",
        "trend_reduced/comparison.txt",
        "accuracy_by_model.csv",
        "timing_trend.csv",
    ] {
        assert!(a.contains_key(name), "missing {name}");
    }
    for r in &m1.reports {
        assert!(a.contains_key(r), "manifest lists {r} but it was not written");
    }
    let a = deterministic(a);
    let b = deterministic(snapshot(&out2));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(v == &b[k], "{k} differs between identical runs");
    }

    // Reports regenerate byte-for-byte from the manifest alone.
    let loaded = RunManifest::load(out1.join(MANIFEST_FILE)).unwrap();
    let regen = dir.path().join("regen");
    write_reports(&loaded, &regen, ReportFormat::Both).unwrap();
    let c = deterministic(snapshot(&regen));
    for (k, v) in &c {
        assert!(v == &a[k], "{k} differs after regeneration");
    }
}

#[test]
fn grid_ties_pick_smallest_parameters() {
    let (dir, end) = market_dir(400);
    let head = "families = [\"nb\"]\nkinds = [\"trend\"]\nwindows = [\"complete\"]\nvalidation = []";
    let tail = "[grids.custom.nb]\nvariant = \"gaussian\"\nalpha = [2.0, 1.0, 3.0]";
    let cfg = ExperimentConfig::load(write_config(dir.path(), "ties.toml", &end, head, tail)).unwrap();

    let m = run(&cfg, &RunOptions { seed: None, output_dir: Some(dir.path().join("out")) }).unwrap();
    assert_eq!(m.results.len(), 1);
    let r = &m.results[0];
    assert_eq!(r.family, Family::Nb);
    assert_eq!(r.grid.len(), 3);
    // The Gaussian variant ignores alpha, so all three cells score the same.
    let accs: Vec<f64> = r.grid.iter().map(|c| c.accuracy.unwrap()).collect();
    assert!(accs.iter().all(|a| *a == accs[0]));
    let best = r.best.as_ref().unwrap();
    assert_eq!(best.params.get("alpha").and_then(|v| v.as_f64()), Some(1.0));
}

#[test]
fn validate_reports_infeasible_protocol_and_missing_files() {
    let (dir, end) = market_dir(400);
    let good = write_config(dir.path(), "experiment.toml", &end, FAMILIES, "");
    let d = validate_config(&good);
    assert!(d.is_clean(), "{}", render_diagnostics(&d));

    let text = std::fs::read_to_string(&good).unwrap();
    let bad_k = dir.path().join("bad_k.toml");
    std::fs::write(&bad_k, text.replace("k = 4", "k = 100000")).unwrap();
    let d = validate_config(&bad_k);
    assert!(!d.is_clean());
    assert!(d.errors.iter().any(|e| e.starts_with("protocol on ")), "{:?}", d.errors);

    let missing = dir.path().join("missing.toml");
    std::fs::write(&missing, text.replace("tweets.csv", "nope.csv")).unwrap();
    let d = validate_config(&missing);
    assert!(d.errors.iter().any(|e| e.contains("data.tweets") && e.contains("nope.csv")), "{:?}", d.errors);

    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, text.replace("seed = 5", "sede = 5")).unwrap();
    let d = validate_config(&typo);
    assert_eq!(d.errors.len(), 1);
    assert!(d.errors[0].contains("sede"), "{:?}", d.errors);

    let family = dir.path().join("family.toml");
    std::fs::write(&family, text.replace("\"rf\"", "\"xgb\"")).unwrap();
    let d = validate_config(&family);
    assert!(d.errors[0].contains("knn, nb, rf, gbt, svm, ann, lstm"), "{:?}", d.errors);
}

#[test]
fn report_format_parsing() {
    assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
    assert_eq!("aligned-text".parse::<ReportFormat>().unwrap(), ReportFormat::Text);
    assert_eq!("both".parse::<ReportFormat>().unwrap(), ReportFormat::Both);
    assert!("html".parse::<ReportFormat>().is_err());
}
