//! Parameter sweeps over one scenario field.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::output::csv_string;
use crate::scenario::execute;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    N,
    Window,
    Eta,
    Epsilon,
    Q,
    Seed,
    MaxRounds,
    Eps,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::Window => "window",
            SweepAxis::Eta => "eta",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Q => "q",
            SweepAxis::Seed => "seed",
            SweepAxis::MaxRounds => "max_rounds",
            SweepAxis::Eps => "eps",
        }
    }

    const ALL: [SweepAxis; 8] = [
        SweepAxis::N,
        SweepAxis::Window,
        SweepAxis::Eta,
        SweepAxis::Epsilon,
        SweepAxis::Q,
        SweepAxis::Seed,
        SweepAxis::MaxRounds,
        SweepAxis::Eps,
    ];

    /// `base` with this field set to `value`.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig, String> {
        let mut cfg = base.clone();
        let whole = || {
            if value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64 {
                Ok(value as u64)
            } else {
                Err(format!("{} needs a nonnegative integer, got {value}", self.name()))
            }
        };
        match self {
            SweepAxis::N => cfg.n = whole()? as usize,
            SweepAxis::Window => cfg.window = whole()? as usize,
            SweepAxis::Eta => cfg.eta = Some(value),
            SweepAxis::Epsilon => cfg.epsilon = value,
            SweepAxis::Q => cfg.q = Some(whole()? as i64),
            SweepAxis::Seed => cfg.seed = Some(whole()?),
            SweepAxis::MaxRounds => cfg.max_rounds = whole()? as usize,
            SweepAxis::Eps => cfg.eps = Some(value),
        }
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SweepAxis::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let names: Vec<_> = SweepAxis::ALL.iter().map(|a| a.name()).collect();
            format!("unknown sweep axis {s:?}; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub ok: bool,
    /// Convergence time, or termination round for quantized runs.
    pub completion_round: Option<usize>,
    pub rounds_executed: Option<usize>,
    pub final_error: Option<f64>,
    pub error: Option<String>,
}

/// Runs one configuration per value, concurrently. Rows come back sorted by
/// value; a failed run becomes a failed row.
pub fn sweep(base: &ScenarioConfig, axis: SweepAxis, values: &[f64]) -> Vec<SweepRow> {
    let mut values = values.to_vec();
    values.sort_by(f64::total_cmp);
    values
        .par_iter()
        .map(|&value| {
            let result = axis
                .apply(base, value)
                .map_err(|e| e.to_string())
                .and_then(|cfg| execute(&cfg).map_err(|e| one_line(&e.to_string())));
            match result {
                Ok(exec) => {
                    let rounds = match &exec.outcome {
                        crate::scenario::Outcome::Unquantized(r) => r.rounds_executed,
                        crate::scenario::Outcome::Quantized(r) => r.rounds_executed,
                    };
                    SweepRow {
                        value,
                        ok: true,
                        completion_round: exec.outcome.completion_round(),
                        rounds_executed: Some(rounds),
                        final_error: exec.outcome.final_error(),
                        error: None,
                    }
                }
                Err(e) => SweepRow {
                    value,
                    ok: false,
                    completion_round: None,
                    rounds_executed: None,
                    final_error: None,
                    error: Some(e),
                },
            }
        })
        .collect()
}

/// Keeps each CSV record on one line.
fn one_line(message: &str) -> String {
    message.lines().map(str::trim).collect::<Vec<_>>().join("; ")
}

/// Summary table; the first column is named after the axis.
pub fn sweep_csv(axis: SweepAxis, rows: &[SweepRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        axis.name(),
        "status",
        "completion_round",
        "rounds_executed",
        "final_error",
        "error",
    ])?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        w.write_record([
            r.value.to_string(),
            if r.ok { "ok" } else { "failed" }.to_string(),
            opt(r.completion_round.map(|v| v.to_string())),
            opt(r.rounds_executed.map(|v| v.to_string())),
            opt(r.final_error.map(|v| v.to_string())),
            opt(r.error.clone()),
        ])?;
    }
    csv_string(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Protocol;

    #[test]
    fn axis_names_round_trip() {
        for a in SweepAxis::ALL {
            assert_eq!(a.name().parse::<SweepAxis>().unwrap(), a);
        }
        assert!("bogus".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn integer_axes_reject_fractions() {
        let base = ScenarioConfig::new(Protocol::Circulant, 10);
        assert!(SweepAxis::N.apply(&base, 2.5).is_err());
        assert_eq!(SweepAxis::N.apply(&base, 12.0).unwrap().n, 12);
    }

    #[test]
    fn failed_runs_become_rows() {
        let mut base = ScenarioConfig::new(Protocol::Converse, 10);
        base.q = Some(2);
        let rows = sweep(&base, SweepAxis::Q, &[6.0, 4.0]);
        assert_eq!(rows.iter().map(|r| r.value).collect::<Vec<_>>(), vec![4.0, 6.0]);
        assert!(rows[0].ok && !rows[1].ok);
        assert!(rows[1].error.as_deref().unwrap().contains("q"));
    }
}
