use std::io::Write;

use mtbp_core::{complete_data_mle, parse_tree_list, serialize_model, TreeError};

use crate::files::{read_structure, read_text, write_text};
use crate::manifest::RunManifest;
use crate::{exit, CliError, CmdResult, MleArgs};

pub fn run(args: &MleArgs, stdout: &mut dyn Write) -> CmdResult {
    let mut manifest = RunManifest::new("mle");
    let structure = read_structure(&args.structure, "structure", &mut manifest)?;
    let text = read_text(&args.trees)?;
    manifest
        .input("trees", &args.trees, text.as_bytes())
        .set("out", args.out.display().to_string());

    let trees = parse_tree_list(&text, structure.types(), Some(&structure))
        .map_err(|e| CliError::Data(format!("{}: {e}", args.trees.display())))?;
    if trees.is_empty() {
        return Err(CliError::Usage(format!("{}: no trees", args.trees.display())));
    }
    let fitted = complete_data_mle(&trees, &structure).map_err(|e| match e {
        TreeError::Empty => CliError::Usage(e.to_string()),
        _ => CliError::Data(e.to_string()),
    })?;
    write_text(&args.out, &serialize_model(&fitted))?;
    manifest.write_beside(&args.out)?;
    writeln!(stdout, "fitted {} trees; wrote {}", trees.len(), args.out.display())?;
    Ok(exit::OK)
}
