//! CSV trajectories and JSON reports.

use std::fs;
use std::path::{Path, PathBuf};

use avgnet::rng::RNG_ALGORITHM;
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::{Execution, Outcome};
use crate::CliError;

/// Environment variable that redirects relative output paths.
pub const OUT_DIR_ENV: &str = "AVGNET_OUT_DIR";

/// Resolves `path` against the output directory override, if any.
pub fn resolve_output(path: &Path, out_dir: Option<&Path>) -> PathBuf {
    match out_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

#[derive(Serialize)]
struct UnquantizedRow {
    k: usize,
    #[serde(rename = "V")]
    v: f64,
    #[serde(rename = "V_underbar")]
    v_underbar: f64,
    min: f64,
    max: f64,
    mean: f64,
}

#[derive(Serialize)]
struct QuantizedRow {
    k: usize,
    #[serde(rename = "V_underbar")]
    v_underbar: f64,
    #[serde(rename = "V")]
    v: f64,
    min_numerator: i64,
    max_numerator: i64,
    mean: f64,
}

/// One row per recorded round.
pub fn trajectory_csv(outcome: &Outcome) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match outcome {
        Outcome::Unquantized(r) => {
            for rec in &r.trajectory {
                w.serialize(UnquantizedRow {
                    k: rec.round,
                    v: rec.variance,
                    v_underbar: rec.min_anchored,
                    min: rec.min,
                    max: rec.max,
                    mean: rec.mean,
                })?;
            }
        }
        Outcome::Quantized(r) => {
            for rec in &r.trajectory {
                w.serialize(QuantizedRow {
                    k: rec.round,
                    v_underbar: rec.min_anchored,
                    v: rec.variance,
                    min_numerator: rec.min_numerator,
                    max_numerator: rec.max_numerator,
                    mean: rec.mean,
                })?;
            }
        }
    }
    csv_string(w)
}

pub(crate) fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Summary, full report and the resolved config.
pub fn report_json(execution: &Execution) -> Value {
    let outcome = &execution.outcome;
    let (rounds, windows, compliant) = match outcome {
        Outcome::Unquantized(r) => (
            r.rounds_executed,
            r.windows.len(),
            r.windows.iter().filter(|w| w.compliant()).count(),
        ),
        Outcome::Quantized(r) => (
            r.rounds_executed,
            r.windows.len(),
            r.windows.iter().filter(|w| w.compliant()).count(),
        ),
    };
    json!({
        "config": execution.config,
        "rng": RNG_ALGORITHM,
        "summary": {
            "completion_round": outcome.completion_round(),
            "final_error": outcome.final_error(),
            "rounds_executed": rounds,
            "windows_audited": windows,
            "windows_compliant": compliant,
        },
        "report": outcome,
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Writes the trajectory CSV to `csv_path` and the JSON report next to it.
pub fn write_execution(execution: &Execution, csv_path: &Path) -> Result<PathBuf, CliError> {
    write_text(csv_path, &trajectory_csv(&execution.outcome)?)?;
    let json_path = csv_path.with_extension("report.json");
    let json = serde_json::to_string_pretty(&report_json(execution))?;
    write_text(&json_path, &(json + "\n"))?;
    Ok(json_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{InitialCondition, Protocol, ScenarioConfig};
    use crate::scenario::execute;

    #[test]
    fn unquantized_header() {
        let mut cfg = ScenarioConfig::new(Protocol::Circulant, 6);
        cfg.eta = Some(0.25);
        cfg.initial = Some(InitialCondition::Eigenvector);
        let csv = trajectory_csv(&execute(&cfg).unwrap().outcome).unwrap();
        assert_eq!(csv.lines().next(), Some("k,V,V_underbar,min,max,mean"));
        assert!(csv.lines().nth(1).unwrap().starts_with("0,"));
    }

    #[test]
    fn quantized_header() {
        let mut cfg = ScenarioConfig::new(Protocol::Converse, 6);
        cfg.q = Some(2);
        let csv = trajectory_csv(&execute(&cfg).unwrap().outcome).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "k,V_underbar,V,min_numerator,max_numerator,mean");
        assert_eq!(lines.len(), 5);
        assert!(lines[4].starts_with("3,0.0,0.0,0,0,"));
    }

    #[test]
    fn report_embeds_config() {
        let mut cfg = ScenarioConfig::new(Protocol::Converse, 10);
        cfg.q = Some(4);
        let v = report_json(&execute(&cfg).unwrap());
        assert_eq!(v["config"]["protocol"], "converse");
        assert_eq!(v["config"]["q"], 4);
        assert_eq!(v["summary"]["final_error"], 0.5);
    }

    #[test]
    fn output_override_applies_to_relative_paths() {
        let dir = Path::new("/tmp/out");
        assert_eq!(resolve_output(Path::new("a.csv"), Some(dir)), dir.join("a.csv"));
        assert_eq!(
            resolve_output(Path::new("/abs/a.csv"), Some(dir)),
            PathBuf::from("/abs/a.csv")
        );
        assert_eq!(resolve_output(Path::new("a.csv"), None), PathBuf::from("a.csv"));
    }
}
