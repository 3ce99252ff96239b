mod common;

use std::path::Path;
use std::process::Command;

use common::{fixture, fixture_path, single_hour};
use dayahead::cli::{run, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_LIMIT, EXIT_OK};
use dayahead::io::{parse_solution, write_instance, write_solution};
use dayahead::model::welfare;

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn clear(instance: &Path, mode: &str, out: &Path) -> i32 {
    run(["dayahead", "clear", "--instance", path(instance), "--mode", mode, "--out", path(out)])
}

#[test]
fn exact_clear_of_four_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.json");
    assert_eq!(clear(&fixture_path("four_blocks"), "exact", &out), EXIT_OK);
    let doc = parse_solution(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc.welfare, Some(2.0));
    assert_eq!(doc.selection.blocks, ["c", "d"]);
    assert_eq!(doc.prbs.len(), 1);
    assert_eq!(doc.prbs[0].id, "a");
}

#[test]
fn reported_welfare_matches_the_serialized_solution() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["four_blocks", "two_area_open", "two_area_congested", "ramp", "diamond"] {
        let out = dir.path().join(format!("{name}.json"));
        assert_eq!(clear(&fixture_path(name), "heuristic", &out), EXIT_OK, "{name}");
        let inst = fixture(name);
        let doc = parse_solution(&std::fs::read_to_string(&out).unwrap()).unwrap();
        let (sol, _) = doc.to_parts(&inst).unwrap();
        let w = welfare(&inst, &sol.delta, &sol.selection).unwrap();
        assert!((w - doc.welfare.unwrap()).abs() < 1e-9, "{name}");
    }
}

#[test]
fn output_is_byte_identical_across_runs() {
    let bin = env!("CARGO_BIN_EXE_dayahead");
    let run_once = |name: &str| {
        Command::new(bin)
            .args(["clear", "--instance", path(&fixture_path(name)), "--mode", "exact"])
            .output()
            .unwrap()
    };
    for name in ["four_blocks", "ramp", "diamond"] {
        let a = run_once(name);
        let b = run_once(name);
        assert_eq!(a.status.code(), Some(EXIT_OK));
        assert!(!a.stdout.is_empty());
        assert_eq!(a.stdout, b.stdout, "{name}");
    }
}

#[test]
fn verify_reports_tampered_prices() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    let report = dir.path().join("report.json");
    assert_eq!(clear(&fixture_path("two_area_congested"), "exact", &good), EXIT_OK);

    let code = run(["dayahead", "verify", "--instance", path(&fixture_path("two_area_congested")), "--solution", path(&good), "--out", path(&report)]);
    assert_eq!(code, EXIT_OK);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["pass"], true);

    let mut doc = parse_solution(&std::fs::read_to_string(&good).unwrap()).unwrap();
    doc.prices[1].values[0] += 7.0;
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, write_solution(&doc)).unwrap();
    let code = run(["dayahead", "verify", "--instance", path(&fixture_path("two_area_congested")), "--solution", path(&bad), "--out", path(&report)]);
    assert_eq!(code, EXIT_OK);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["pass"], false);
    assert_eq!(r["filling"]["pass"], false);
}

#[test]
fn oracle_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.json");
    let code = run(["dayahead", "oracle", "--instance", path(&fixture_path("four_blocks")), "--out", path(&out)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(parse_solution(&std::fs::read_to_string(&out).unwrap()).unwrap().welfare, Some(2.0));

    let blocks: Vec<(String, f64, f64)> = (0..20).map(|b| (format!("b{b}"), 1.0, 1.0)).collect();
    let refs: Vec<(&str, f64, f64)> = blocks.iter().map(|(id, p, q)| (id.as_str(), *p, *q)).collect();
    let big = dir.path().join("big.json");
    std::fs::write(&big, write_instance(&single_hour((-10.0, 10.0), vec![(-10.0, 0.0), (10.0, 0.0)], &refs))).unwrap();
    let code = run(["dayahead", "oracle", "--instance", path(&big), "--out", path(&out)]);
    assert_eq!(code, EXIT_INPUT);
}

#[test]
fn input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.json");
    assert_eq!(clear(&dir.path().join("missing.json"), "exact", &out), EXIT_INPUT);
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{\"version\": 1, \"hours\": \"two\"}").unwrap();
    assert_eq!(clear(&broken, "exact", &out), EXIT_INPUT);
    assert_eq!(run(["dayahead", "clear", "--instance", path(&fixture_path("four_blocks")), "--mode", "greedy"]), EXIT_INPUT);
    assert_eq!(run(["dayahead", "frobnicate"]), EXIT_INPUT);
    assert_eq!(run(["dayahead", "--help"]), EXIT_OK);
}

#[test]
fn infeasible_and_limit_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.json");
    assert_eq!(clear(&fixture_path("ramp_curtailment"), "exact", &out), EXIT_INFEASIBLE);
    let code = run(["dayahead", "clear", "--instance", path(&fixture_path("four_blocks")), "--time-limit", "0", "--out", path(&out)]);
    assert_eq!(code, EXIT_LIMIT);
}
