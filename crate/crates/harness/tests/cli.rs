use std::fs;
use std::path::Path;

use hdlog::cli::run;
use hdlog_core::{parse_facts, parse_program, EngineConfig, FactSet, Interner, MaterialisationState};
use tempfile::TempDir;

fn hdlog(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["hdlog".to_string()];
    for a in args {
        argv.push(if a.ends_with(".dl") || a.ends_with(".facts") || a.ends_with(".json") {
            dir.join(a).display().to_string()
        } else {
            a.to_string()
        });
    }
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn value<'a>(report: &'a str, key: &str) -> &'a str {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in\n{report}"))
}

fn collab(dir: &Path, n: &str, k: &str) {
    let prefix = dir.join("c").display().to_string();
    let (code, _, err) = hdlog(dir, &["gen", "collab", "--n", n, "--k", k, "--out-prefix", &prefix]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn gen_collab_writes_the_stated_number_of_facts() {
    let dir = TempDir::new().unwrap();
    collab(dir.path(), "50", "20");
    let text = fs::read_to_string(dir.path().join("c.facts")).unwrap();
    assert_eq!(text.lines().count(), 4002);
    assert!(dir.path().join("c.dl").exists());
}

#[test]
fn mat_reports_modules_and_writes_the_materialisation() {
    let dir = TempDir::new().unwrap();
    collab(dir.path(), "6", "3");
    for mode in ["standard", "hd", "combined"] {
        let (code, out, err) = hdlog(
            dir.path(),
            &["--program", "c.dl", "--facts", "c.facts", "--mode", mode, "mat", "--out", "i.facts"],
        );
        assert_eq!(code, 0, "{err}");
        assert_eq!(value(&out, "derived"), "21");
        let module = if mode == "standard" { "standard" } else { "hd" };
        assert_eq!(value(&out, "rule.r0"), module);
        let written = fs::read_to_string(dir.path().join("i.facts")).unwrap();
        assert_eq!(written.lines().count(), 95);
    }
}

#[test]
fn dump_and_reload_round_trip() {
    let dir = TempDir::new().unwrap();
    collab(dir.path(), "5", "4");
    let (code, _, err) = hdlog(dir.path(), &["--program", "c.dl", "--facts", "c.facts", "mat", "--out", "i.facts"]);
    assert_eq!(code, 0, "{err}");

    let mut i = Interner::new();
    let program = parse_program(&fs::read_to_string(dir.path().join("c.dl")).unwrap(), &mut i).unwrap();
    let explicit = parse_facts(&fs::read_to_string(dir.path().join("c.facts")).unwrap(), &mut i).unwrap();
    let (state, _) = MaterialisationState::materialise(&program, &explicit, EngineConfig::default()).unwrap();
    let reloaded: FactSet = parse_facts(&fs::read_to_string(dir.path().join("i.facts")).unwrap(), &mut i).unwrap();
    assert_eq!(reloaded, state.facts());

    // Materialising the dump again adds nothing.
    let (code, out, _) = hdlog(dir.path(), &["--program", "c.dl", "--facts", "i.facts", "mat"]);
    assert_eq!(code, 0);
    assert_eq!(value(&out, "derived"), "0");
}

#[test]
fn update_and_check_on_the_collab_deletion() {
    let dir = TempDir::new().unwrap();
    collab(dir.path(), "6", "3");
    fs::write(dir.path().join("d.facts"), "CA(a6,a3).\n").unwrap();
    fs::write(dir.path().join("a.facts"), "CW(a6,a4).\nCA(a6,a5).\n").unwrap();
    let base = ["--program", "c.dl", "--facts", "c.facts"];

    let (code, out, err) = hdlog(dir.path(), &[&base[..], &["update", "--del", "d.facts"]].concat());
    assert_eq!(code, 0, "{err}");
    // The deleted fact itself plus PC(a6,d1..d3), none of which come back.
    assert_eq!(value(&out, "update.overdeleted"), "4");
    assert_eq!(value(&out, "update.rederived"), "0");
    assert_eq!(value(&out, "facts_after"), "91");

    let args = [&base[..], &["check", "--add", "a.facts", "--del", "d.facts"]].concat();
    let (code, out, err) = hdlog(dir.path(), &args);
    assert_eq!(code, 0, "{err}");
    assert_eq!(value(&out, "check"), "ok");
    // Rederivation sees only I minus the overdeleted facts; the PC facts
    // return in the addition phase through the new CA fact.
    assert_eq!(value(&out, "update.rederived"), "0");
    assert_eq!(value(&out, "update.added"), "5");
    assert_eq!(value(&out, "facts_after"), "96");
}

#[test]
fn stats_file_is_json() {
    let dir = TempDir::new().unwrap();
    collab(dir.path(), "4", "2");
    let args = ["--program", "c.dl", "--facts", "c.facts", "--stats", "s.json", "mat"];
    let (code, _, err) = hdlog(dir.path(), &args);
    assert_eq!(code, 0, "{err}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(json["derived"], 10);
}

#[test]
fn decompose_prints_the_pairing() {
    let dir = TempDir::new().unwrap();
    collab(dir.path(), "6", "3");
    let (code, out, _) = hdlog(dir.path(), &["--program", "c.dl", "--facts", "c.facts", "decompose"]);
    assert_eq!(code, 0);
    assert!(out.contains("lambda={CW(?x,?z1),PC(?z1,?y)}"), "{out}");
    assert!(out.contains("lambda={CA(?x,?z2),PC(?z2,?y)}"), "{out}");
    assert_eq!(value(&out, "rule.r0.width"), "2");
}

#[test]
fn gen_exp_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    for (prefix, seed) in [("x", "7"), ("y", "7"), ("z", "8")] {
        let path = dir.path().join(prefix).display().to_string();
        let args = ["--seed", seed, "gen", "exp", "--expressions", "5", "--value-sets", "4", "--out-prefix", &path];
        assert_eq!(hdlog(dir.path(), &args).0, 0);
    }
    assert_eq!(read("x.facts"), read("y.facts"));
    assert_eq!(read("x.dl"), read("y.dl"));
    assert_ne!(read("x.facts"), read("z.facts"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    assert_eq!(hdlog(dir.path(), &["mat", "--bogus"]).0, 1);
    assert_eq!(hdlog(dir.path(), &["--mode", "fast", "mat"]).0, 1);
    assert_eq!(hdlog(dir.path(), &["--help"]).0, 0);
    assert_eq!(hdlog(dir.path(), &["--program", "missing.dl", "--facts", "missing.facts", "mat"]).0, 2);

    fs::write(dir.path().join("bad.dl"), "H(?x) :- \n").unwrap();
    fs::write(dir.path().join("e.facts"), "E(a).\n").unwrap();
    let (code, _, err) = hdlog(dir.path(), &["--program", "bad.dl", "--facts", "e.facts", "mat"]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error:"), "{err}");

    fs::write(dir.path().join("unsafe.dl"), "H(?x,?y) :- E(?x).\n").unwrap();
    assert_eq!(hdlog(dir.path(), &["--program", "unsafe.dl", "--facts", "e.facts", "mat"]).0, 2);
}
