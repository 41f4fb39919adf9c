//! File and JSON rendering for the CLI commands.

use crate::{CliError, FormatArg};
use serde::Serialize;
use std::path::Path;
use std::time::Duration;
use transmed_core::error::Violation;
use transmed_core::sim::{summary_csv, SimConfig, SimSummary};
use transmed_core::{EffectEstimate, EstimatorEffects};

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    config: &'a SimConfig,
    outputs: Vec<String>,
    wall_clock_ms: u128,
}

/// Write summary.(csv|json) plus manifest.json into `out`.
pub fn write_simulation(
    out: &Path,
    format: FormatArg,
    config: &SimConfig,
    summary: &SimSummary,
    elapsed: Duration,
) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    let write = |name: &str, contents: &str| -> Result<String, CliError> {
        let path = out.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        Ok(path.display().to_string())
    };
    let summary_path = match format {
        FormatArg::Csv => write("summary.csv", &summary_csv(summary))?,
        FormatArg::Json => {
            let json = serde_json::to_string_pretty(summary)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            write("summary.json", &json)?
        }
    };
    let manifest = RunManifest {
        tool: "transmed",
        version: env!("CARGO_PKG_VERSION"),
        config,
        outputs: vec![summary_path.clone()],
        wall_clock_ms: elapsed.as_millis(),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    write("manifest.json", &manifest_json)?;
    eprintln!("wrote {summary_path}");
    Ok(())
}

#[derive(Serialize)]
struct EffectJson {
    estimate: f64,
    se_ic: f64,
    ci_ic: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    se_boot: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ci_boot: Option<(f64, f64)>,
}

impl From<&EffectEstimate> for EffectJson {
    fn from(e: &EffectEstimate) -> Self {
        EffectJson {
            estimate: e.estimate,
            se_ic: e.se_ic,
            ci_ic: e.ci_ic,
            se_boot: e.se_boot,
            ci_boot: e.ci_boot,
        }
    }
}

#[derive(Serialize)]
struct EstimatorJson {
    estimator: &'static str,
    psi: [f64; 3],
    sde: EffectJson,
    sie: EffectJson,
}

#[derive(Serialize)]
struct EstimateOutput {
    positivity_screen: Vec<String>,
    results: Vec<EstimatorJson>,
}

pub fn estimate_json(results: &[EstimatorEffects], screen: &[Violation]) -> String {
    let out = EstimateOutput {
        positivity_screen: screen.iter().map(|v| v.to_string()).collect(),
        results: results
            .iter()
            .map(|r| EstimatorJson {
                estimator: r.estimator.label(),
                psi: [r.components[0].psi, r.components[1].psi, r.components[2].psi],
                sde: (&r.sde).into(),
                sie: (&r.sie).into(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&out).expect("serializable output")
}
