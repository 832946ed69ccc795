//! End-to-end runs of the binary: exit codes, files and verdicts.

use std::path::Path;
use std::process::{Command, Output};

fn osposg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osposg"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn generate_solve_play_pennies() {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("pennies.json");
    let bounds = dir.path().join("bounds.json");
    let log = dir.path().join("progress.jsonl");

    let g = osposg(&["generate", "pennies", "--gamma", "0.9", "-o", path(&game)]);
    assert_eq!(g.status.code(), Some(0), "{}", String::from_utf8_lossy(&g.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&game).unwrap()).unwrap();
    assert_eq!(doc["states"].as_array().unwrap().len(), 4);

    let s = osposg(&[
        "solve",
        path(&game),
        "-o",
        path(&bounds),
        "--epsilon",
        "0.4",
        "--log",
        path(&log),
    ]);
    assert_eq!(s.status.code(), Some(0), "{}", String::from_utf8_lossy(&s.stderr));
    assert!(stdout(&s).contains("converged"));
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&bounds).unwrap()).unwrap();
    assert!(meta["meta"]["epsilon_achieved"].as_f64().unwrap() <= 0.4);
    let records = std::fs::read_to_string(&log).unwrap();
    assert!(records.lines().count() >= 1);
    for line in records.lines() {
        let r: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(r["gap"].is_number());
    }

    let p = osposg(&["play", path(&game), path(&bounds), "--episodes", "500", "--seed", "3"]);
    assert_eq!(p.status.code(), Some(0), "{}", String::from_utf8_lossy(&p.stderr));
    assert!(stdout(&p).contains("verdict pass"), "{}", stdout(&p));
}

#[test]
fn generated_games_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    let args = ["generate", "pursuit", "--rows", "2", "--cols", "3", "--pursuers", "1"];
    assert_eq!(osposg(&[&args[..], &["-o", path(&a)]].concat()).status.code(), Some(0));
    let to_stdout = osposg(&args);
    assert_eq!(to_stdout.status.code(), Some(0));
    std::fs::write(&b, &to_stdout.stdout).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    let out = dir.path().join("out.json");
    assert_eq!(osposg(&["solve", path(&missing), "-o", path(&out)]).status.code(), Some(2));

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    assert_eq!(osposg(&["solve", path(&broken), "-o", path(&out)]).status.code(), Some(2));

    let game = dir.path().join("g.json");
    osposg(&["generate", "pennies", "-o", path(&game)]);
    let bad_eps = osposg(&["solve", path(&game), "-o", path(&out), "--epsilon", "-1"]);
    assert_eq!(bad_eps.status.code(), Some(2));

    assert_eq!(osposg(&["generate", "pennies", "--gamma", "1.5"]).status.code(), Some(2));
}

#[test]
fn bounds_for_another_game_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let g9 = dir.path().join("g9.json");
    let g8 = dir.path().join("g8.json");
    let bounds = dir.path().join("b.json");
    osposg(&["generate", "pennies", "--gamma", "0.9", "-o", path(&g9)]);
    osposg(&["generate", "pennies", "--gamma", "0.8", "-o", path(&g8)]);
    let s = osposg(&["solve", path(&g9), "-o", path(&bounds), "--epsilon", "0.4"]);
    assert_eq!(s.status.code(), Some(0));
    let p = osposg(&["play", path(&g8), path(&bounds), "--episodes", "10"]);
    assert_eq!(p.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&p.stderr).contains("hash"));
}

#[test]
fn exhausted_budget_exits_with_three_and_keeps_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let game = dir.path().join("pursuit.json");
    let bounds = dir.path().join("b.json");
    osposg(&["generate", "pursuit", "-o", path(&game)]);
    let s = osposg(&[
        "solve",
        path(&game),
        "-o",
        path(&bounds),
        "--epsilon",
        "0.01",
        "--time-limit",
        "0",
    ]);
    assert_eq!(s.status.code(), Some(3), "{}", String::from_utf8_lossy(&s.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&bounds).unwrap()).unwrap();
    assert!(doc["meta"]["epsilon_achieved"].as_f64().unwrap() > 0.01);
}
