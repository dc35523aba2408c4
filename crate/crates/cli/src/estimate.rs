use std::io::Write;

use mtbp_core::em::trace_tsv;
use mtbp_core::numfmt::sig17;
use mtbp_core::{fit, random_init, serialize_model, uniform_init, EmConfig, EmError, ImpossiblePolicy};

use crate::files::{read_model, read_observations, read_structure, write_text};
use crate::manifest::RunManifest;
use crate::{exit, CliError, CmdResult, EstimateArgs, InitArg};

pub fn run(args: &EstimateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CmdResult {
    if !(args.tol > 0.0) || args.max_iter == 0 {
        return Err(CliError::Usage("--tol must be positive and --max-iter at least 1".into()));
    }
    let mut manifest = RunManifest::new("estimate");
    let structure = read_structure(&args.structure, "structure", &mut manifest)?;
    let observations = read_observations(&args.obs, structure.types(), &mut manifest)?;
    let init = match args.init {
        InitArg::Uniform => uniform_init(&structure),
        InitArg::Random => random_init(&structure, args.seed),
        InitArg::File => {
            let path = args
                .init_file
                .as_ref()
                .ok_or_else(|| CliError::Usage("--init file needs --init-file".into()))?;
            let model = read_model(path, "init", &mut manifest)?;
            if model.structure().as_ref() != structure.as_ref() {
                return Err(CliError::Usage(format!(
                    "{}: productions differ from {}",
                    path.display(),
                    args.structure.display()
                )));
            }
            Ok(model)
        }
    }
    .map_err(|e| CliError::Usage(format!("{}: {e}", args.structure.display())))?;

    let cfg = EmConfig {
        mode: args.mode.into(),
        tol_loglik: args.tol,
        tol_param: args.tol,
        max_iter: args.max_iter,
        on_impossible: if args.skip_impossible {
            ImpossiblePolicy::Skip
        } else {
            ImpossiblePolicy::Abort
        },
    };
    manifest
        .set("init", format!("{:?}", args.init).to_lowercase())
        .set("seed", args.seed)
        .set("mode", cfg.mode.as_str())
        .set("tol_loglik", cfg.tol_loglik)
        .set("tol_param", cfg.tol_param)
        .set("max_iter", cfg.max_iter)
        .set("skip_impossible", args.skip_impossible)
        .set("out", args.out.display().to_string())
        .set("trace", args.trace.display().to_string());

    let result = fit(&init, &observations, &cfg).map_err(|e| match e {
        EmError::Underivable { rows } => {
            let rows: Vec<String> = rows.iter().map(|r| (r + 1).to_string()).collect();
            CliError::Data(format!(
                "observation rows with zero likelihood: {} (use --skip-impossible to drop them)",
                rows.join(", ")
            ))
        }
        EmError::NothingDerivable | EmError::NoObservations => CliError::Data(e.to_string()),
        other => CliError::Usage(other.to_string()),
    })?;
    for row in &result.skipped_observations {
        writeln!(stderr, "warning: skipped observation row {}: zero likelihood", row + 1)?;
    }
    let mut kept: Vec<usize> = result.trace.iter().flat_map(|t| t.kept_parents.iter().copied()).collect();
    kept.sort_unstable();
    kept.dedup();
    for v in kept {
        writeln!(
            stderr,
            "warning: type {} has no expected occurrences; its distribution was carried over",
            structure.types().name(v)
        )?;
    }

    write_text(&args.out, &serialize_model(&result.model))?;
    write_text(&args.trace, &trace_tsv(&result))?;
    manifest.write_beside(&args.out)?;
    writeln!(stdout, "log-likelihood\t{}", sig17(result.log_likelihood))?;
    writeln!(stdout, "iterations\t{}", result.iterations)?;
    writeln!(stdout, "converged\t{}", result.converged)?;
    Ok(if result.converged {
        exit::OK
    } else {
        exit::NOT_CONVERGED
    })
}
