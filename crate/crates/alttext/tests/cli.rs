mod common;

use std::process::Command;

use common::Corpus;

fn alttext(c: &Corpus, args: &[&str]) -> std::process::Output {
    let cfg_path = c.root.join("alttext.toml");
    std::fs::write(&cfg_path, c.cfg.to_toml()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_alttext"))
        .arg("--config")
        .arg(&cfg_path)
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

#[test]
fn detect_then_annotate_in_mock_mode() {
    let dir = tempfile::tempdir().unwrap();
    let c = Corpus::create(dir.path());
    let out = alttext(&c, &["detect"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("icons 6"));

    let icons = c.out("icons.csv");
    let out = alttext(&c, &["--mock", "--workers", "2", "annotate", "--icons", icons.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let results = std::fs::read_to_string(c.out("results.jsonl")).unwrap();
    assert!(results.contains(common::STROBE_ALT));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = Corpus::create(dir.path());

    std::fs::write(c.root.join("bad.toml"), "[annotate]\nworkers = 0\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_alttext"))
        .args(["--config", c.root.join("bad.toml").to_str().unwrap(), "stats"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    assert_eq!(alttext(&c, &["detect"]).status.code(), Some(0));
    std::fs::remove_file(c.cfg.paths.screenshots_dir.join("toolbar.png")).unwrap();
    assert_eq!(alttext(&c, &["annotate", "--icons", c.out("icons.csv").to_str().unwrap()]).status.code(), Some(2));

    c.cfg.annotate.mock = false;
    let out = alttext(&c, &["annotate", "--icons", c.out("icons.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));

    let out = alttext(&c, &["evaluate", "--corpus", c.root.join("missing.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn example_config_parses() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../alttext.example.toml");
    let cfg = alttext::PipelineConfig::load(&path).unwrap();
    assert_eq!(cfg.providers.len(), 4);
    assert_eq!(cfg.fetch.len(), 4);
    assert!(cfg.providers.values().all(|p| p.api_key_env.as_deref() != Some("")));
}
