//! Acceptance report: one PASS/FAIL line per criterion with pinned tolerances.
//!
//! Runs as a plain binary (`harness = false`). Every criterion is evaluated
//! and reported; the process exits nonzero only if a criterion cannot be
//! evaluated at all (a command errors out), so a faithful statistical or
//! reference-value miss shows up as a FAIL line rather than aborting the suite.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use mtbp_core::fixtures::{
    random_model, random_observations, study_structure, study_truth_model, worked_example_model,
    worked_example_observation,
};
use mtbp_core::oracle::DEFAULT_GUARD;
use mtbp_core::{
    complete_data_mle, fit, observation_counts, oracle_expected_counts, parse_tree_list,
    simulate_sample, uniform_init, CountingMode, EmConfig, ExpectedCounts, SimConfig,
};

const GOLDEN_TOL: f64 = 1e-12;
const ORACLE_TOL: f64 = 1e-10;
const MONOTONE_TOL: f64 = 1e-10;
const SUM_TOL: f64 = 1e-12;
const STUDY_MEAN_TOL: f64 = 0.10;
const STUDY_MIN_SD: f64 = 0.15;
const MLE_TOL: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mtbp").chain(args.iter().copied());
    let code = mtbp_cli::run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).expect("utf-8 output"))
}

/// `kind type vector value` rows and `expected`/`estimate` rows of `mtbp example`.
fn example_values(text: &str) -> BTreeMap<String, f64> {
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        match f.as_slice() {
            [kind @ ("alpha" | "beta"), ty, vec, value] => {
                map.insert(format!("{kind} {ty} {vec}"), value.parse().unwrap());
            }
            [kind @ ("expected" | "estimate"), name, value] => {
                map.insert(format!("{kind} {name}"), value.parse().unwrap());
            }
            [key @ ("likelihood" | "iterations"), value] => {
                map.insert(key.to_string(), value.parse().unwrap());
            }
            ["converged", value] => {
                map.insert("converged".into(), if *value == "true" { 1.0 } else { 0.0 });
            }
            _ => {}
        }
    }
    map
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (_, text) = cli(&["example"]);
    let elapsed = start.elapsed();
    let got = example_values(&text);
    let want: &[(&str, f64)] = &[
        ("alpha T1 1,0,0,0", 0.25),
        ("alpha T1 1,0,1,0", 1.0 / 64.0),
        ("alpha T1 1,0,0,1", 1.0 / 48.0),
        ("alpha T1 1,0,1,1", 1.0 / 256.0),
        ("beta T1 1,0,1,0", 1.0 / 12.0),
        ("beta T1 1,0,0,1", 1.0 / 16.0),
        ("beta T1 1,0,0,0", 1.0 / 64.0),
        ("beta T1 0,0,0,1", 3.0 / 256.0),
        ("beta T2 1,0,0,0", 5.0 / 288.0),
        ("beta T2 0,0,0,1", 1.0 / 256.0),
        ("expected T1", 4.0),
        ("expected T2", 1.0),
        ("expected T1->T1t", 1.0),
        ("expected T1->T1", 1.0),
        ("expected T1->T1+T2", 1.0),
        ("expected T1->T1+T1", 1.0),
        ("expected T2->T2+T2", 0.0),
        ("expected T2->T2t", 1.0),
        ("estimate T1->T1t", 0.25),
        ("estimate T1->T1", 0.25),
        ("estimate T1->T1+T2", 0.25),
        ("estimate T1->T1+T1", 0.25),
        ("estimate T2->T2t", 1.0),
        ("estimate T2->T2", 0.0),
        ("estimate T2->T2+T2", 0.0),
        ("iterations", 2.0),
        ("converged", 1.0),
    ];
    let mut misses = Vec::new();
    for (key, value) in want {
        match got.get(*key) {
            Some(actual) if (actual - value).abs() <= GOLDEN_TOL => {}
            Some(actual) => misses.push(format!("{key}: want {value:e}, got {actual:e}")),
            None => misses.push(format!("{key}: missing")),
        }
    }
    let fast = elapsed < Duration::from_secs(1);
    if !fast {
        misses.push(format!("runtime {elapsed:?} >= 1s"));
    }
    Outcome {
        pass: misses.is_empty(),
        detail: format!(
            "{} of {} values within {GOLDEN_TOL:e}, runtime {elapsed:.2?}{}",
            want.len() - misses.len() + usize::from(!fast),
            want.len(),
            if misses.is_empty() { String::new() } else { format!("; misses: {}", misses.join("; ")) }
        ),
    }
}

fn max_diff(a: &ExpectedCounts, b: &ExpectedCounts) -> f64 {
    let types = a.type_expectations.iter().zip(&b.type_expectations);
    let rules = a.production_expectations.iter().zip(&b.production_expectations);
    types
        .chain(rules)
        .map(|(x, y)| (x - y).abs())
        .fold((a.likelihood - b.likelihood).abs(), f64::max)
}

/// Runs the 200 random instances once and reports criteria 2 and 4 together.
fn criteria_2_and_4() -> (Outcome, Outcome) {
    let start = Instant::now();
    let mut worst_oracle = 0.0f64;
    let mut worst_identity = 0.0f64;
    let mut instances = 0usize;
    for seed in 0..200u64 {
        let model = random_model(seed);
        for obs in random_observations(&model, seed, 2, 6) {
            let dp = observation_counts(&model, &obs, CountingMode::Ordered).expect("dp");
            let en = oracle_expected_counts(&model, &obs, CountingMode::Ordered, DEFAULT_GUARD)
                .expect("oracle");
            worst_oracle = worst_oracle.max(max_diff(&dp, &en));
            for v in 0..model.types().num_nonterminals() {
                let gap = (dp.production_total(&model, v) - dp.type_expectations[v]).abs();
                worst_identity = worst_identity.max(gap);
            }
            instances += 1;
        }
    }
    let elapsed = start.elapsed();

    let model = worked_example_model();
    let obs = worked_example_observation();
    let dp = observation_counts(&model, &obs, CountingMode::Multiset).expect("dp");
    let en = oracle_expected_counts(&model, &obs, CountingMode::Multiset, DEFAULT_GUARD).expect("oracle");
    let fixture_diff = max_diff(&dp, &en);
    let fixture_sum = dp.production_total(&model, 0);
    let t1_rules_are_one = model
        .structure()
        .rules_of(0)
        .all(|r| (dp.production_expectations[r] - 1.0).abs() <= ORACLE_TOL);

    let c2 = Outcome {
        pass: worst_oracle <= ORACLE_TOL && fixture_diff <= GOLDEN_TOL && elapsed < Duration::from_secs(60),
        detail: format!(
            "{instances} ordered instances, max |dp - oracle| {worst_oracle:e} (tol {ORACLE_TOL:e}); \
             multiset fixture {fixture_diff:e} (tol {GOLDEN_TOL:e}); runtime {elapsed:.2?}"
        ),
    };
    let c4 = Outcome {
        pass: worst_identity <= ORACLE_TOL && (fixture_sum - 4.0).abs() <= ORACLE_TOL && t1_rules_are_one,
        detail: format!(
            "max |sum_A E c(v->A) - E c(v)| {worst_identity:e} (tol {ORACLE_TOL:e}); \
             fixture T1 sum {fixture_sum}, each T1 rule 1: {t1_rules_are_one}"
        ),
    };
    (c2, c4)
}

fn criterion_3() -> Outcome {
    let truth = study_truth_model();
    let init = uniform_init(&study_structure()).expect("structure");
    let cfg = EmConfig::default();
    let mut worst_drop = 0.0f64;
    let mut worst_sum = 0.0f64;
    for seed in 0..20u64 {
        let sim = SimConfig::new(0, 1000 + seed, 20).with_bounds(3, 12);
        let (_, obs) = simulate_sample(&truth, &sim).expect("simulate");
        let res = fit(&init, &obs, &cfg).expect("fit");
        for w in res.trace.windows(2) {
            worst_drop = worst_drop.max(w[0].log_likelihood - w[1].log_likelihood);
        }
        let s = res.model.structure();
        for entry in &res.trace {
            for v in 0..s.types().num_nonterminals() {
                let sum: f64 = entry.probabilities[s.rules_of(v)].iter().sum();
                worst_sum = worst_sum.max((sum - 1.0).abs());
            }
        }
    }
    Outcome {
        pass: worst_drop <= MONOTONE_TOL && worst_sum <= SUM_TOL,
        detail: format!(
            "20 datasets x 20 observations; largest log-likelihood drop {worst_drop:e} (tol {MONOTONE_TOL:e}); \
             largest |parent sum - 1| {worst_sum:e} (tol {SUM_TOL:e})"
        ),
    }
}

/// Parses the `mean` and `st.dev.` rows of a study table, keyed by column label.
fn study_summary(text: &str) -> (BTreeMap<String, f64>, BTreeMap<String, f64>) {
    let mut labels = Vec::new();
    let mut means = BTreeMap::new();
    let mut sds = BTreeMap::new();
    for line in text.lines() {
        let f: Vec<&str> = line.split('\t').collect();
        if f[0].starts_with("size ") {
            labels = f[1..].iter().map(|s| s.to_string()).collect();
        } else if f[0] == "mean" || f[0] == "st.dev." {
            let target = if f[0] == "mean" { &mut means } else { &mut sds };
            for (l, v) in labels.iter().zip(&f[1..]) {
                target.insert(l.clone(), v.parse().unwrap());
            }
        }
    }
    (means, sds)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let (small_code, small) = cli(&["study", "--samples", "16", "--sample-size", "20", "--tree-size", "small"]);
    let (large_code, large) = cli(&["study", "--samples", "16", "--sample-size", "20", "--tree-size", "large"]);
    let elapsed = start.elapsed();
    assert_eq!((small_code, large_code), (0, 0), "study runs must succeed");
    let (means, sds) = study_summary(&small);
    let (large_means, _) = study_summary(&large);
    let third = 1.0 / 3.0;
    let mut parts = Vec::new();
    let mut pass = true;
    for label in ["T1->T1t", "T1->T1+T1", "T1->T1+T2"] {
        let m = means[label];
        let ok = (m - third).abs() <= STUDY_MEAN_TOL;
        pass &= ok;
        parts.push(format!("mean {label} {m:.4}{}", if ok { "" } else { " (outside 1/3 +- 0.10)" }));
    }
    let sd = sds["T2->T2t"];
    let sd_ok = sd >= STUDY_MIN_SD;
    pass &= sd_ok;
    parts.push(format!("sd T2->T2t {sd:.4}{}", if sd_ok { "" } else { " (below 0.15)" }));
    let p22 = large_means["T2->T2+T2"];
    let p22_ok = p22 < 0.5;
    pass &= p22_ok;
    parts.push(format!("large-tree mean T2->T2+T2 {p22:.4}{}", if p22_ok { "" } else { " (not below 1/2)" }));
    let fast = elapsed < Duration::from_secs(600);
    pass &= fast;
    parts.push(format!("runtime {elapsed:.2?}"));
    Outcome { pass, detail: parts.join("; ") }
}

fn criterion_6() -> Outcome {
    let truth = study_truth_model();
    let structure = study_structure();
    let (trees, _) = simulate_sample(&truth, &SimConfig::new(0, 7, 10_000)).expect("simulate");
    let fitted = complete_data_mle(&trees, &structure).expect("mle");
    let worst = truth.max_abs_diff(&fitted);

    // Two hand-countable trees: T1 appears 3 times (2 emissions, 1 mixed
    // branching), T2 once (emission).
    let text = "T1(T1(T1t) T2(T2t))\nT1(T1t)\n";
    let pair = parse_tree_list(text, structure.types(), Some(&structure)).expect("fixture");
    let hand = complete_data_mle(&pair, &structure).expect("mle");
    let types = structure.types();
    let expected: BTreeMap<&str, f64> = [
        ("T1->T1t", 2.0 / 3.0),
        ("T1->T1+T2", 1.0 / 3.0),
        ("T1->T1+T1", 0.0),
        ("T2->T2t", 1.0),
        ("T2->T2+T2", 0.0),
    ]
    .into_iter()
    .collect();
    let exact = structure
        .rules()
        .iter()
        .enumerate()
        .all(|(r, rule)| expected.get(rule.label(types).as_str()) == Some(&hand.probability(r)));
    Outcome {
        pass: worst <= MLE_TOL && exact,
        detail: format!(
            "10^4 trees, max |p_hat - p| {worst:.4} (tol {MLE_TOL}); two-tree fixture exact ratios: {exact}"
        ),
    }
}

fn main() {
    let (c2, c4) = criteria_2_and_4();
    let outcomes = [
        ("1 worked-example golden values", criterion_1()),
        ("2 oracle equivalence", c2),
        ("3 EM monotonicity", criterion_3()),
        ("4 count consistency", c4),
        ("5 simulation study", criterion_5()),
        ("6 complete-data MLE", criterion_6()),
    ];
    println!();
    for (name, o) in &outcomes {
        println!("acceptance {name}: {} -- {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let passed = outcomes.iter().filter(|(_, o)| o.pass).count();
    println!("acceptance summary: {passed}/{} criteria passed", outcomes.len());
}
