//! Reading and writing the on-disk formats: model files, observation CSVs,
//! and tree lists.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use mtbp_core::{parse_model, parse_structure, ModelStructure, Observation, OffspringModel, TypeTable};

use crate::manifest::RunManifest;
use crate::CliError;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

/// Reads a model file and records its digest under `role`.
pub fn read_model(path: &Path, role: &str, manifest: &mut RunManifest) -> Result<OffspringModel, CliError> {
    let text = read_text(path)?;
    manifest.input(role, path, text.as_bytes());
    parse_model(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn read_structure(
    path: &Path,
    role: &str,
    manifest: &mut RunManifest,
) -> Result<Arc<ModelStructure>, CliError> {
    let text = read_text(path)?;
    manifest.input(role, path, text.as_bytes());
    parse_structure(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn observation_header(types: &TypeTable) -> Vec<String> {
    std::iter::once("root".to_string())
        .chain(types.names().iter().cloned())
        .collect()
}

/// Parses an observations CSV whose header must list `types` in order.
pub fn parse_observations(text: &str, types: &TypeTable) -> Result<Vec<Observation>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("observations header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let expected = observation_header(types);
    if header != expected {
        return Err(CliError::Data(format!(
            "observations header is `{}`, expected `{}`",
            header.join(","),
            expected.join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CliError::Data(format!("observation row {row}: {e}")))?;
        let root_name = &record[0];
        let root = types
            .index_of(root_name)
            .filter(|&r| !types.is_terminal(r))
            .ok_or_else(|| {
                CliError::Data(format!("observation row {row}: `{root_name}` is not a nonterminal type"))
            })?;
        let counts = record
            .iter()
            .skip(1)
            .map(|c| c.parse::<u32>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Data(format!("observation row {row}: {e}")))?;
        if counts.iter().all(|&c| c == 0) {
            return Err(CliError::Data(format!("observation row {row}: no particles")));
        }
        out.push(Observation::new(root, counts));
    }
    Ok(out)
}

pub fn read_observations(
    path: &Path,
    types: &TypeTable,
    manifest: &mut RunManifest,
) -> Result<Vec<Observation>, CliError> {
    let text = read_text(path)?;
    manifest.input("observations", path, text.as_bytes());
    parse_observations(&text, types).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn observations_csv(types: &TypeTable, observations: &[Observation]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(observation_header(types))
        .expect("writing to memory");
    for obs in observations {
        let mut row = vec![types.name(obs.root).to_string()];
        row.extend(obs.x.counts().iter().map(u32::to_string));
        writer.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(writer.into_inner().expect("writing to memory")).expect("utf-8 fields")
}
