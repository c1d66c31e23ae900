//! Offline checks of matrices and graph sequences.

use avgnet::engine::step;
use avgnet::graph::{cut_crossing_holds, is_strongly_connected, GraphSnapshot};
use avgnet::lyapunov::NodeVector;
use avgnet::weights::{validate_assumption_1, ValidationReport, WeightMatrix};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A finite sequence to audit: either graphs or weight matrices, grouped in
/// windows of `window` rounds. `x` is the starting vector for the
/// cut-crossing check.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionsInput {
    pub window: usize,
    #[serde(default)]
    pub snapshots: Option<Vec<GraphSnapshot>>,
    #[serde(default)]
    pub matrices: Option<Vec<WeightMatrix>>,
    #[serde(default)]
    pub x: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowCheck {
    pub window: usize,
    pub first_round: usize,
    pub last_round: usize,
    pub strongly_connected: bool,
    /// Only available where the window-start values are known: window 0 for
    /// graph input, every window for matrix input.
    pub cut_crossing: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixCheck {
    pub round: usize,
    pub passed: bool,
    pub report: ValidationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionsReport {
    pub n: usize,
    pub window: usize,
    /// Rounds past the last complete window are not audited.
    pub unaudited_rounds: usize,
    pub weights_valid: Option<bool>,
    pub b_connected: bool,
    pub cut_crossing: Option<bool>,
    pub matrices: Vec<MatrixCheck>,
    pub windows: Vec<WindowCheck>,
}

impl AssumptionsReport {
    pub fn passed(&self) -> bool {
        self.weights_valid != Some(false) && self.b_connected && self.cut_crossing != Some(false)
    }
}

fn invalid(reason: impl Into<String>) -> CliError {
    CliError::Input(reason.into())
}

pub fn verify_matrix(a: &WeightMatrix) -> ValidationReport {
    validate_assumption_1(a)
}

pub fn verify_assumptions(input: &AssumptionsInput) -> Result<AssumptionsReport, CliError> {
    let b = input.window;
    if b == 0 {
        return Err(invalid("window must be at least 1"));
    }
    let (graphs, matrices) = match (&input.snapshots, &input.matrices) {
        (Some(gs), None) => (gs.clone(), None),
        (None, Some(ms)) => (ms.iter().map(WeightMatrix::support_graph).collect(), Some(ms)),
        _ => return Err(invalid("give exactly one of `snapshots` or `matrices`")),
    };
    let n = graphs.first().ok_or_else(|| invalid("the sequence is empty"))?.n();
    if graphs.iter().any(|g| g.n() != n) {
        return Err(invalid("all rounds must have the same node count"));
    }
    if graphs.len() < b {
        return Err(invalid(format!(
            "{} round(s) do not fill one window of {b}",
            graphs.len()
        )));
    }
    let mut x = match &input.x {
        Some(v) if v.len() != n => return Err(invalid(format!("x has {} entries, expected {n}", v.len()))),
        Some(v) => Some(NodeVector::new(v.clone())?),
        None => None,
    };

    let matrix_checks: Vec<MatrixCheck> = matrices
        .map(|ms| {
            ms.iter()
                .enumerate()
                .map(|(round, a)| {
                    let report = validate_assumption_1(a);
                    MatrixCheck {
                        round,
                        passed: report.passed(),
                        report,
                    }
                })
                .collect()
        })
        .unwrap_or_default();

    let complete = graphs.len() / b;
    let mut windows = Vec::with_capacity(complete);
    for k in 0..complete {
        let mut union = GraphSnapshot::empty(n);
        for g in &graphs[k * b..(k + 1) * b] {
            union.union_with(g)?;
        }
        let cut_crossing = x.as_ref().map(|x| cut_crossing_holds(x, &union));
        windows.push(WindowCheck {
            window: k,
            first_round: k * b,
            last_round: (k + 1) * b - 1,
            strongly_connected: is_strongly_connected(&union),
            cut_crossing,
        });
        // advance to the next window start when the matrices are known
        x = match (x, matrices) {
            (Some(mut v), Some(ms)) => {
                for a in &ms[k * b..(k + 1) * b] {
                    v = step(&v, a)?;
                }
                Some(v)
            }
            _ => None,
        };
    }

    let checked: Vec<bool> = windows.iter().filter_map(|w| w.cut_crossing).collect();
    Ok(AssumptionsReport {
        n,
        window: b,
        unaudited_rounds: graphs.len() - complete * b,
        weights_valid: matrices.map(|_| matrix_checks.iter().all(|m| m.passed)),
        b_connected: windows.iter().all(|w| w.strongly_connected),
        cut_crossing: (!checked.is_empty()).then(|| checked.iter().all(|&c| c)),
        matrices: matrix_checks,
        windows,
    })
}
