use std::fs;
use std::path::{Path, PathBuf};

use mtbp_cli::exit;
use mtbp_core::fixtures::{STUDY_TRUTH_MODEL, WORKED_EXAMPLE_MODEL};
use mtbp_core::parse_model;
use tempfile::TempDir;

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn mtbp(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mtbp").chain(args.iter().copied());
    let code = mtbp_cli::run(argv, &mut out, &mut err);
    Run {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const WORKED_OBS: &str = "root,T1,T2,T1t,T2t\nT1,1,0,1,1\n";

#[test]
fn simulate_is_deterministic_and_bounded() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "truth.model", STUDY_TRUTH_MODEL);
    let run = |seed: &str, out: &Path, trees: &Path| {
        mtbp(&[
            "simulate", "--model", s(&model), "--root", "T1", "--count", "20", "--seed", seed,
            "--min-leaves", "3", "--max-leaves", "12", "--out", s(out), "--trees", s(trees),
        ])
    };
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    let ta = dir.path().join("a.trees");
    assert_eq!(run("1", &a, &ta).code, exit::OK);
    assert_eq!(run("1", &b, &dir.path().join("b.trees")).code, exit::OK);
    assert_eq!(run("2", &c, &dir.path().join("c.trees")).code, exit::OK);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_ne!(text, fs::read_to_string(&c).unwrap());

    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("root,T1,T2,T1t,T2t"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 20);
    for row in rows {
        let total: u64 = row.split(',').skip(1).map(|f| f.parse::<u64>().unwrap()).sum();
        assert!((3..=12).contains(&total), "{row}");
    }
    assert_eq!(fs::read_to_string(&ta).unwrap().lines().count(), 20);
    assert!(dir.path().join("a.csv.manifest.json").exists());
}

#[test]
fn simulate_rejects_unknown_root_and_bad_bounds() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "truth.model", STUDY_TRUTH_MODEL);
    let out = dir.path().join("o.csv");
    let base = ["simulate", "--model", s(&model), "--count", "3", "--seed", "0", "--out", s(&out)];
    let mut args = base.to_vec();
    args.extend(["--root", "T1t"]);
    assert_eq!(mtbp(&args).code, exit::USAGE);
    let mut args = base.to_vec();
    args.extend(["--root", "T1", "--min-leaves", "5", "--max-leaves", "2"]);
    assert_eq!(mtbp(&args).code, exit::USAGE);
}

#[test]
fn estimate_worked_example_and_restart_from_fit() {
    let dir = TempDir::new().unwrap();
    let structure = write(&dir, "m.model", WORKED_EXAMPLE_MODEL);
    let obs = write(&dir, "obs.csv", WORKED_OBS);
    let (fitted, trace) = (dir.path().join("fit.model"), dir.path().join("trace.tsv"));
    let run = mtbp(&[
        "estimate", "--structure", s(&structure), "--obs", s(&obs), "--out", s(&fitted), "--trace", s(&trace),
    ]);
    assert_eq!(run.code, exit::OK, "{}", run.err);
    assert!(run.out.contains("iterations\t2\n"));
    assert!(run.out.contains("converged\ttrue\n"));
    let model = parse_model(&fs::read_to_string(&fitted).unwrap()).unwrap();
    let t1 = &model.probabilities()[model.structure().rules_of(0)];
    assert!(t1.iter().all(|p| (p - 0.25).abs() < 1e-12));
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 3);

    let again = dir.path().join("again.model");
    let run = mtbp(&[
        "estimate", "--structure", s(&structure), "--obs", s(&obs), "--init", "file", "--init-file",
        s(&fitted), "--out", s(&again), "--trace", s(&trace),
    ]);
    assert_eq!(run.code, exit::OK);
    assert!(run.out.contains("iterations\t1\n"));
    assert_eq!(fs::read_to_string(&again).unwrap(), fs::read_to_string(&fitted).unwrap());
}

#[test]
fn estimate_reports_or_skips_underivable_rows() {
    let dir = TempDir::new().unwrap();
    let structure = write(&dir, "m.model", WORKED_EXAMPLE_MODEL);
    let obs = write(&dir, "obs.csv", "root,T1,T2,T1t,T2t\nT1,1,0,1,1\nT2,0,0,1,0\n");
    let (fitted, trace) = (dir.path().join("fit.model"), dir.path().join("trace.tsv"));
    let base = ["estimate", "--structure", s(&structure), "--obs", s(&obs), "--out", s(&fitted), "--trace", s(&trace)];
    let run = mtbp(&base);
    assert_eq!(run.code, exit::DATA);
    assert!(run.err.contains('2'), "{}", run.err);

    let mut args = base.to_vec();
    args.push("--skip-impossible");
    let run = mtbp(&args);
    assert_eq!(run.code, exit::OK);
    assert!(run.err.contains("skipped observation row 2"), "{}", run.err);
}

#[test]
fn estimate_exits_four_when_iterations_run_out() {
    let dir = TempDir::new().unwrap();
    let structure = write(&dir, "truth.model", STUDY_TRUTH_MODEL);
    let obs = write(&dir, "obs.csv", "root,T1,T2,T1t,T2t\nT1,0,0,3,2\nT1,0,0,2,0\nT1,0,0,1,4\n");
    let (fitted, trace) = (dir.path().join("fit.model"), dir.path().join("trace.tsv"));
    let run = mtbp(&[
        "estimate", "--structure", s(&structure), "--obs", s(&obs), "--max-iter", "1", "--out", s(&fitted),
        "--trace", s(&trace),
    ]);
    assert_eq!(run.code, exit::NOT_CONVERGED);
    assert!(fitted.exists());
}

#[test]
fn malformed_observations_are_data_errors() {
    let dir = TempDir::new().unwrap();
    let structure = write(&dir, "m.model", WORKED_EXAMPLE_MODEL);
    let obs = write(&dir, "obs.csv", "root,T1,T2,T1t,T2t\nT1,1,x,1,1\n");
    let run = mtbp(&[
        "estimate", "--structure", s(&structure), "--obs", s(&obs), "--out", s(&dir.path().join("f")),
        "--trace", s(&dir.path().join("t")),
    ]);
    assert_eq!(run.code, exit::DATA);
}

#[test]
fn oracle_agrees_and_guards_large_observations() {
    let dir = TempDir::new().unwrap();
    let model = write(&dir, "m.model", WORKED_EXAMPLE_MODEL);
    let obs = write(&dir, "obs.csv", WORKED_OBS);
    let run = mtbp(&["oracle", "--model", s(&model), "--obs", s(&obs)]);
    assert_eq!(run.code, exit::OK, "{}", run.err);
    assert!(run.out.contains("trees\t"));

    let big = write(&dir, "big.csv", "root,T1,T2,T1t,T2t\nT1,0,0,30,20\n");
    let run = mtbp(&["oracle", "--model", s(&model), "--obs", s(&big)]);
    assert_eq!(run.code, exit::RESOURCE);
}

#[test]
fn mle_counts_trees_and_rejects_empty_input() {
    let dir = TempDir::new().unwrap();
    let structure = write(&dir, "truth.model", STUDY_TRUTH_MODEL);
    let trees = write(&dir, "t.txt", "T1(T1(T1t) T2(T2t))\nT1(T1t)\n");
    let out = dir.path().join("mle.model");
    let run = mtbp(&["mle", "--trees", s(&trees), "--structure", s(&structure), "--out", s(&out)]);
    assert_eq!(run.code, exit::OK, "{}", run.err);
    let model = parse_model(&fs::read_to_string(&out).unwrap()).unwrap();
    let emission = model
        .structure()
        .find(0, &mtbp_core::CountVector::from(vec![0, 0, 1, 0]))
        .unwrap();
    assert_eq!(model.probability(emission), 2.0 / 3.0);

    let empty = write(&dir, "empty.txt", "");
    let run = mtbp(&["mle", "--trees", s(&empty), "--structure", s(&structure), "--out", s(&out)]);
    assert_eq!(run.code, exit::USAGE);

    let bad = write(&dir, "bad.txt", "T1(T1(T1t) T9(T2t))\n");
    let run = mtbp(&["mle", "--trees", s(&bad), "--structure", s(&structure), "--out", s(&out)]);
    assert_eq!(run.code, exit::DATA);
}

#[test]
fn example_is_reproducible_in_both_modes() {
    let first = mtbp(&["example"]);
    assert_eq!(first.code, exit::OK, "{}", first.err);
    assert_eq!(first.out, mtbp(&["example"]).out);
    assert!(first.out.contains("all 43 checks passed"));
    let ordered = mtbp(&["example", "--mode", "ordered"]);
    assert_eq!(ordered.code, exit::OK);
    assert!(ordered.out.contains("## checks skipped"));
}

#[test]
fn study_single_sample_has_no_spread_row() {
    let args = ["study", "--samples", "1", "--sample-size", "20", "--tree-size", "small", "--seed", "3"];
    let run = mtbp(&args);
    assert_eq!(run.code, exit::OK, "{}", run.err);
    assert!(run.out.lines().any(|l| l.starts_with("s.1\t")));
    assert!(!run.out.lines().any(|l| l.starts_with("s.2\t")));
    assert!(run.out.lines().any(|l| l.starts_with("mean\t")));
    assert!(!run.out.contains("st.dev."));
    assert_eq!(run.out, mtbp(&args).out);
}

#[test]
fn study_rejects_bad_sizes() {
    let run = mtbp(&["study", "--samples", "2", "--sample-size", "30", "--tree-size", "small"]);
    assert_eq!(run.code, exit::USAGE);
    let run = mtbp(&["study", "--samples", "0", "--sample-size", "20", "--tree-size", "small"]);
    assert_eq!(run.code, exit::USAGE);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(mtbp(&["frobnicate"]).code, exit::USAGE);
    assert_eq!(mtbp(&["estimate"]).code, exit::USAGE);
    let help = mtbp(&["--help"]);
    assert_eq!(help.code, exit::OK);
    assert!(help.out.contains("estimate"));
}
