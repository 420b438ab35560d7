mod common;

use common::{cli, corpus};

#[test]
fn every_corpus_file_validates() {
    for path in common::corpus_files() {
        let p = path.to_string_lossy();
        let r = cli(&["validate", "--spec", &p, "--json"]);
        assert_eq!(r.code, 0, "{p}: {}", r.stdout);
        assert_eq!(r.json()["status"], "ok");
    }
}

#[test]
fn eval_prints_exact_values() {
    let spec = corpus("01-markov.spec");
    let r = cli(&["eval", "--spec", &spec, "--event", "x0=0", "--json"]);
    assert_eq!(r.code, 0);
    assert_eq!(r.json()["value"], "1/2");
    let r = cli(&["eval", "--spec", &spec, "--event", "x0=0 & x1=0 & x2=0 & x3=0", "--json"]);
    assert_eq!(r.json()["value"], "4/27");
    assert!(r.stderr.is_empty());
}

#[test]
fn human_summary_goes_to_stderr() {
    let r = cli(&["eval", "--spec", &corpus("01-markov.spec"), "--event", "x0=1"]);
    assert_eq!(r.code, 0);
    assert!(r.stderr.contains("1/2"), "{}", r.stderr);
    assert_eq!(r.stdout.lines().count(), 1);
}

#[test]
fn violation_exits_one() {
    let r = cli(&["consistency", "--spec", &corpus("04-broken-rows.spec"), "--depth", "2", "--json"]);
    assert_eq!(r.code, 1);
    let v = r.json();
    assert_eq!(v["status"], "violation");
    assert_eq!(v["violation"]["projected"], "343/432");
    assert_eq!(v["violation"]["coarse_value"], "1/2");
}

#[test]
fn parse_errors_exit_two_with_position() {
    let dir = std::env::temp_dir().join(format!("cm-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.spec");
    std::fs::write(&bad, "[tree]\nk = 2\n[spins]\nsize = 2\n[family]\nkind = product\nweights = 0.5 1/2\n").unwrap();
    let r = cli(&["validate", "--spec", &bad.to_string_lossy(), "--json"]);
    assert_eq!(r.code, 2);
    let v = r.json();
    assert_eq!(v["error"]["kind"], "parse");
    assert_eq!(v["error"]["line"], 7);
    assert_eq!(v["error"]["column"], 11);

    let r = cli(&["eval", "--spec", &corpus("01-markov.spec"), "--event", "x0 = 2", "--json"]);
    assert_eq!(r.code, 2);
    assert!(r.json()["error"]["message"].as_str().unwrap().contains("out of range"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(cli(&["eval"]).code, 2);
    assert_eq!(cli(&["no-such-command"]).code, 2);
    let r = cli(&["covers-compare", "--spec", &corpus("03-naturals.spec"), "--cover", "root-slices"]);
    assert_eq!(r.code, 2);
    let r = cli(&["sigma-eval", "--spec", &corpus("03-naturals.spec"), "--cover", "missing", "--event", "x0=0"]);
    assert_eq!(r.code, 2);
}

#[test]
fn divergent_series_exits_three() {
    let r = cli(&[
        "sigma-eval",
        "--spec",
        &corpus("03-naturals.spec"),
        "--cover",
        "root-slices",
        "--event",
        "x1=0",
        "--json",
    ]);
    assert_eq!(r.code, 3);
    let v = r.json();
    assert_eq!(v["status"], "inconclusive");
    assert_eq!(v["series"]["outcome"], "diverges-beyond");
    assert_eq!(v["series"]["partial"], "1000");
}

#[test]
fn condition_passes_on_root_constrained_event() {
    let r = cli(&[
        "condition27",
        "--spec",
        &corpus("03-naturals.spec"),
        "--cover",
        "root-slices",
        "--event",
        "x0 in {0..9}",
        "--json",
    ]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.json()["verdict"], "PASS");
}

#[test]
fn covers_compare_is_deterministic_in_the_seed() {
    let spec = corpus("03-naturals.spec");
    let args = |seed: &'static str| {
        vec![
            "covers-compare", "--cover", "root-slices", "--cover", "root-pairs", "--trials", "8", "--seed", seed,
            "--json",
        ]
    };
    let mut a = args("11");
    a.extend(["--spec", &spec]);
    let first = cli(&a);
    let second = cli(&a);
    assert_eq!(first.code, 0, "{}", first.stdout);
    assert_eq!(first.stdout, second.stdout);
    let mut b = args("12");
    b.extend(["--spec", &spec]);
    assert_ne!(cli(&b).stdout, first.stdout);
}

#[test]
fn probe_empty_values_decrease() {
    let r = cli(&["probe-empty", "--spec", &corpus("01-markov.spec"), "--maxdepth", "3", "--json"]);
    assert_eq!(r.code, 0);
    let text = r.stdout;
    for v in ["1/2", "4/27", "256/19683", "1048576/10460353203"] {
        assert!(text.contains(v), "{v} missing from {text}");
    }
}
