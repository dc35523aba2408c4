use std::io::Write;

use mtbp_core::{serialize_tree, simulate_sample, SimConfig, SimError};

use crate::files::{observations_csv, read_model, write_text};
use crate::manifest::RunManifest;
use crate::{exit, CliError, CmdResult, SimulateArgs};

pub fn run(args: &SimulateArgs, stdout: &mut dyn Write) -> CmdResult {
    let mut manifest = RunManifest::new("simulate");
    let model = read_model(&args.model, "model", &mut manifest)?;
    let types = model.types();
    let root = types
        .index_of(&args.root)
        .filter(|&r| !types.is_terminal(r))
        .ok_or_else(|| CliError::Usage(format!("--root `{}` is not a nonterminal of the model", args.root)))?;

    let mut cfg = SimConfig::new(root, args.seed, args.count).with_max_depth(args.max_depth);
    if let (Some(lo), Some(hi)) = (args.min_leaves, args.max_leaves) {
        cfg = cfg.with_bounds(lo, hi);
    }
    manifest
        .set("root", &args.root)
        .set("count", args.count)
        .set("seed", args.seed)
        .set("max_depth", args.max_depth)
        .set("size_bounds", cfg.size_bounds)
        .set("out", args.out.display().to_string())
        .set("trees", args.trees.as_ref().map(|p| p.display().to_string()));

    let (trees, observations) = simulate_sample(&model, &cfg).map_err(|e| match e {
        SimError::BoundsInfeasible { .. } => CliError::Resource(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    })?;

    write_text(&args.out, &observations_csv(types, &observations))?;
    if let Some(path) = &args.trees {
        let text: String = trees
            .iter()
            .map(|t| serialize_tree(t, types) + "\n")
            .collect();
        write_text(path, &text)?;
    }
    manifest.write_beside(&args.out)?;
    writeln!(stdout, "wrote {} observations to {}", observations.len(), args.out.display())?;
    Ok(exit::OK)
}
