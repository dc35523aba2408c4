use std::io::Write;

use mtbp_core::numfmt::sig17;
use mtbp_core::{
    enumerate_trees, inner_probabilities, observation_counts, oracle_expected_counts,
    CountingMode, InsideOutsideError, OracleError,
};

use crate::files::{read_model, read_observations};
use crate::manifest::RunManifest;
use crate::{exit, CliError, CmdResult, OracleArgs};

/// DP and enumeration must agree this closely for a zero exit status.
pub const AGREEMENT: f64 = 1e-9;

fn oracle_err(row: usize, e: OracleError) -> CliError {
    match e {
        OracleError::GuardExceeded { .. } => CliError::Resource(format!("observation row {row}: {e}")),
        OracleError::Invalid(InsideOutsideError::Underivable { .. }) => {
            CliError::Data(format!("observation row {row}: zero likelihood under the model"))
        }
        other => CliError::Data(format!("observation row {row}: {other}")),
    }
}

pub fn run(args: &OracleArgs, stdout: &mut dyn Write) -> CmdResult {
    let mut manifest = RunManifest::new("oracle");
    let model = read_model(&args.model, "model", &mut manifest)?;
    let observations = read_observations(&args.obs, model.types(), &mut manifest)?;
    let mode: CountingMode = args.mode.into();
    manifest
        .set("mode", mode.as_str())
        .set("max_leaves_guard", args.max_leaves_guard)
        .set("agreement", AGREEMENT);
    write!(stdout, "{}", manifest.comment_line())?;

    let types = model.types();
    let structure = model.structure();
    let mut worst = 0.0f64;
    for (i, obs) in observations.iter().enumerate() {
        let row = i + 1;
        let trees = enumerate_trees(&model, obs, args.max_leaves_guard).map_err(|e| oracle_err(row, e))?;
        writeln!(stdout, "observation {row}\troot={}\tx={}", types.name(obs.root), obs.x)?;
        writeln!(stdout, "trees\t{}", trees.len())?;
        for m in [CountingMode::Multiset, CountingMode::Ordered] {
            let dp = inner_probabilities(&model, obs, m)
                .map_err(|e| oracle_err(row, e.into()))?
                .likelihood();
            let en: f64 = trees.iter().map(|t| t.weight(m)).sum();
            writeln!(
                stdout,
                "likelihood {}\tdp={}\toracle={}\tdiff={}",
                m.as_str(),
                sig17(dp),
                sig17(en),
                sig17((dp - en).abs())
            )?;
            if m == mode {
                worst = worst.max((dp - en).abs());
            }
        }
        let dp = observation_counts(&model, obs, mode).map_err(|e| oracle_err(row, e.into()))?;
        let en = oracle_expected_counts(&model, obs, mode, args.max_leaves_guard)
            .map_err(|e| oracle_err(row, e))?;
        writeln!(stdout, "quantity\tdp\toracle\tabs_diff")?;
        let mut line = |name: String, a: f64, b: f64| -> std::io::Result<()> {
            worst = worst.max((a - b).abs());
            writeln!(stdout, "{name}\t{}\t{}\t{}", sig17(a), sig17(b), sig17((a - b).abs()))
        };
        for v in 0..types.num_nonterminals() {
            line(
                format!("E c({})", types.name(v)),
                dp.type_expectations[v],
                en.type_expectations[v],
            )?;
        }
        for (r, rule) in structure.rules().iter().enumerate() {
            line(
                format!("E c({})", rule.label(types)),
                dp.production_expectations[r],
                en.production_expectations[r],
            )?;
        }
    }
    writeln!(stdout, "max abs diff\t{}", sig17(worst))?;
    if worst < AGREEMENT {
        Ok(exit::OK)
    } else {
        Err(CliError::Mismatch(format!(
            "DP and enumeration differ by {} (threshold {})",
            sig17(worst),
            sig17(AGREEMENT)
        )))
    }
}
