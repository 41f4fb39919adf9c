//! TOML study/estimation configs. Flags always override file values.

use crate::{CliError, EstimateArgs};
use serde::Deserialize;
use std::path::Path;
use transmed_core::dgp::Labeling;
use transmed_core::terms::{Term, TermSpec, Var, Variant};
use transmed_core::DgmSpec;

/// Optional-everything mirror of SimConfig for `simulate --config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    pub dgm: Option<u8>,
    pub labeling: Option<String>,
    pub n: Option<usize>,
    pub reps: Option<usize>,
    pub boot: Option<usize>,
    pub seed: Option<u64>,
    pub s_ref: Option<u8>,
    pub scenario: Option<String>,
    /// Comma list, same syntax as the flag.
    pub estimators: Option<String>,
    pub eff_mode: Option<String>,
    pub clip: Option<f64>,
    pub threads: Option<usize>,
}

impl SimFile {
    pub fn load(path: Option<&Path>) -> Result<SimFile, CliError> {
        let Some(path) = path else {
            return Ok(SimFile::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn labeling(&self) -> Result<Option<Labeling>, CliError> {
        match self.labeling.as_deref() {
            None => Ok(None),
            Some("main") => Ok(Some(Labeling::Main)),
            Some("appendix") => Ok(Some(Labeling::Appendix)),
            Some(other) => Err(CliError::Config(format!("unknown labeling `{other}`"))),
        }
    }
}

/// Model terms for `estimate`: lists of variable-name products per model,
/// one table per variant.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermsFile {
    restricted: TermsTable,
    unrestricted: TermsTable,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermsTable {
    #[serde(default)]
    a: Vec<Vec<String>>,
    z: Vec<Vec<String>>,
    m: Vec<Vec<String>>,
    s: Vec<Vec<String>>,
    y: Vec<Vec<String>>,
}

fn parse_var(name: &str) -> Result<Var, CliError> {
    match name {
        "W1" => Ok(Var::W1),
        "W2" => Ok(Var::W2),
        "A" => Ok(Var::A),
        "Z" => Ok(Var::Z),
        "M" => Ok(Var::M),
        "S" => Ok(Var::S),
        other => Err(CliError::Config(format!("unknown variable `{other}` in terms"))),
    }
}

fn parse_terms(lists: &[Vec<String>]) -> Result<Vec<Term>, CliError> {
    lists
        .iter()
        .map(|product| product.iter().map(|v| parse_var(v)).collect())
        .collect()
}

impl TermsTable {
    fn to_spec(&self) -> Result<TermSpec, CliError> {
        Ok(TermSpec {
            a: parse_terms(&self.a)?,
            z: parse_terms(&self.z)?,
            m: parse_terms(&self.m)?,
            s: parse_terms(&self.s)?,
            y: parse_terms(&self.y)?,
        })
    }
}

/// Resolve the (restricted, unrestricted) TermSpecs for `estimate`: either
/// a DGM preset or a config file with explicit term lists.
pub fn estimate_terms(args: &EstimateArgs) -> Result<(TermSpec, TermSpec), CliError> {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let file: TermsFile = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let restricted = file.restricted.to_spec()?;
        let unrestricted = file.unrestricted.to_spec()?;
        for (spec, variant) in
            [(&restricted, Variant::Restricted), (&unrestricted, Variant::Unrestricted)]
        {
            spec.validate(variant)
                .map_err(|e| CliError::Config(e.to_string()))?;
        }
        return Ok((restricted, unrestricted));
    }
    let id = args.dgm.ok_or_else(|| {
        CliError::Config("estimate needs model terms: pass --dgm or --config".into())
    })?;
    let dgm = DgmSpec::preset(id, args.labeling.into())
        .ok_or_else(|| CliError::Config(format!("unknown DGM id {id}")))?;
    Ok((
        dgm.correct_terms(Variant::Restricted),
        dgm.correct_terms(Variant::Unrestricted),
    ))
}
