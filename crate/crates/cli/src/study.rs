//! Repeated simulate-then-estimate runs from the study truth model.
//!
//! Each sample draws `sample_size` observations from a `T1` root within the
//! tree-size bounds, fits them by EM from uniform probabilities, and
//! contributes one row to the table. The mean and sample standard deviation
//! of each parameter close the table.

use std::io::Write;

use mtbp_core::fixtures::{study_structure, study_truth_model};
use mtbp_core::numfmt::sig17;
use mtbp_core::{fit, simulate_sample, uniform_init, CountingMode, EmConfig, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::manifest::RunManifest;
use crate::{exit, CliError, CmdResult, StudyArgs, TreeSize};

pub const SMALL_TREES: (u64, u64) = (3, 12);
pub const LARGE_TREES: (u64, u64) = (13, 40);

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub seed: u64,
    pub probabilities: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-sample seeds, drawn from a ChaCha8 stream keyed by the master seed.
pub fn sample_seeds(master: u64, samples: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..samples).map(|_| rng.gen()).collect()
}

pub fn bounds(size: TreeSize) -> (u64, u64) {
    match size {
        TreeSize::Small => SMALL_TREES,
        TreeSize::Large => LARGE_TREES,
    }
}

pub fn run_samples(
    seeds: &[u64],
    sample_size: usize,
    (lo, hi): (u64, u64),
    mode: CountingMode,
) -> Result<Vec<StudyRow>, CliError> {
    let truth = study_truth_model();
    let init = uniform_init(&study_structure()).expect("built-in structure");
    let cfg = EmConfig {
        mode,
        ..EmConfig::default()
    };
    seeds
        .par_iter()
        .map(|&seed| {
            let sim = SimConfig::new(0, seed, sample_size).with_bounds(lo, hi);
            let (_, obs) = simulate_sample(&truth, &sim).map_err(|e| CliError::Resource(e.to_string()))?;
            let res = fit(&init, &obs, &cfg).map_err(|e| CliError::Data(e.to_string()))?;
            Ok(StudyRow {
                seed,
                probabilities: res.model.probabilities().to_vec(),
                iterations: res.iterations,
                converged: res.converged,
            })
        })
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor n - 1).
pub fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn run(args: &StudyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let sample_size: usize = args
        .sample_size
        .parse()
        .map_err(|_| CliError::Usage("--sample-size must be 20, 50 or 100".into()))?;
    let range = bounds(args.tree_size);
    let mode: CountingMode = args.mode.into();
    let seeds = sample_seeds(args.seed, args.samples);
    let mut manifest = RunManifest::new("study");
    manifest
        .set("samples", args.samples)
        .set("sample_size", sample_size)
        .set("tree_size", format!("{:?}", args.tree_size).to_lowercase())
        .set("leaf_bounds", range)
        .set("seed", args.seed)
        .set("sample_seeds", &seeds)
        .set("root", "T1")
        .set("init", "uniform")
        .set("mode", mode.as_str())
        .set("max_depth", SimConfig::new(0, 0, 0).max_depth);
    write!(stdout, "{}", manifest.comment_line())?;

    let rows = run_samples(&seeds, sample_size, range, mode)?;
    let structure = study_structure();
    let types = structure.types();
    let labels: Vec<String> = structure.rules().iter().map(|r| r.label(types)).collect();
    writeln!(stdout, "size {sample_size}\t{}", labels.join("\t"))?;
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row.probabilities.iter().map(|&p| sig17(p)).collect();
        writeln!(stdout, "s.{}\t{}", i + 1, cells.join("\t"))?;
    }
    let column = |k: usize| -> Vec<f64> { rows.iter().map(|r| r.probabilities[k]).collect() };
    let means: Vec<String> = (0..labels.len()).map(|k| sig17(mean(&column(k)))).collect();
    writeln!(stdout, "mean\t{}", means.join("\t"))?;
    if rows.len() > 1 {
        let sds: Vec<String> = (0..labels.len()).map(|k| sig17(std_dev(&column(k)))).collect();
        writeln!(stdout, "st.dev.\t{}", sds.join("\t"))?;
    }
    let converged = rows.iter().filter(|r| r.converged).count();
    writeln!(stdout, "# converged {converged}/{}", rows.len())?;
    for (i, row) in rows.iter().enumerate().filter(|(_, r)| !r.converged) {
        writeln!(
            stderr,
            "warning: sample s.{} stopped after {} iterations without converging",
            i + 1,
            row.iterations
        )?;
    }
    Ok(exit::OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((std_dev(&xs) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        let a = sample_seeds(9, 16);
        assert_eq!(a, sample_seeds(9, 16));
        assert_eq!(&sample_seeds(9, 4)[..], &a[..4]);
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 16);
    }
}
