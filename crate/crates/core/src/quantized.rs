//! Floor-quantized averaging.
//!
//! Values live on the grid `ℤ/Q` and are stored as exact integer numerators.
//! Each round forms the real combination `Σ a_ij x_j` and rounds it down to
//! the grid:
//!
//! ```text
//! x_i(k+1) = ⌊ Σ_j a_ij(k) x_j(k) ⌋_Q
//! ```
//!
//! Rounding down keeps every value within `[L, U]`, never raises the maximum,
//! never lowers the minimum, and drops the mean by less than `1/Q` per round,
//! so the iteration reaches exact consensus at a value at most the initial
//! mean. `V̲` (the min-anchored variance) is the potential that decreases.

use std::borrow::Cow;

use serde::Serialize;

use crate::balancing::balancing_round;
use crate::engine::{MatrixSequence, PeriodicMatrices, WindowAudit, WindowTracker};
use crate::error::{Error, Result};
use crate::graph::{GraphSnapshot, TopologySequence};
use crate::lyapunov::{sample_variance, NodeVector};
use crate::weights::{equal_neighbor_matrix, WeightMatrix};

/// Values whose scaled form `v·Q` lies within this distance of an integer
/// are treated as exactly on the grid.
pub const FLOOR_GUARD: f64 = 1e-9;

/// Numerator of the largest multiple of `1/q` not above `v`.
///
/// If `v·q` is within [`FLOOR_GUARD`] of an integer, that integer is
/// returned, so grid values that picked up a few ulps of error below the
/// grid point do not drop a whole level.
pub fn floor_quantize(v: f64, q: i64) -> i64 {
    let scaled = v * q as f64;
    let nearest = scaled.round();
    if (scaled - nearest).abs() <= FLOOR_GUARD {
        nearest as i64
    } else {
        scaled.floor() as i64
    }
}

/// Node values `numerator_i / q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuantizedVector {
    numerators: Vec<i64>,
    q: i64,
}

impl QuantizedVector {
    pub fn new(numerators: Vec<i64>, q: i64) -> Result<Self> {
        if q < 1 {
            return Err(Error::param("q", "resolution must be a positive integer"));
        }
        if numerators.is_empty() {
            return Err(Error::EmptyVector);
        }
        Ok(QuantizedVector { numerators, q })
    }

    /// Accepts real values that are multiples of `1/q` (up to the floor
    /// guard).
    pub fn from_values(values: &[f64], q: i64) -> Result<Self> {
        let mut numerators = Vec::with_capacity(values.len());
        for (index, &v) in values.iter().enumerate() {
            let scaled = v * q as f64;
            if !scaled.is_finite() || (scaled - scaled.round()).abs() > FLOOR_GUARD {
                return Err(Error::NotQuantized { index, value: v, q });
            }
            numerators.push(scaled.round() as i64);
        }
        Self::new(numerators, q)
    }

    /// `⌊x⌋` componentwise onto the grid.
    pub fn floor_of(x: &NodeVector, q: i64) -> Result<Self> {
        let numerators = x.values().iter().map(|&v| floor_quantize(v, q)).collect();
        Self::new(numerators, q)
    }

    pub fn numerators(&self) -> &[i64] {
        &self.numerators
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn min_numerator(&self) -> i64 {
        *self.numerators.iter().min().expect("nonempty")
    }

    pub fn max_numerator(&self) -> i64 {
        *self.numerators.iter().max().expect("nonempty")
    }

    pub fn is_consensus(&self) -> bool {
        self.numerators.windows(2).all(|w| w[0] == w[1])
    }

    /// `K = (U − L)·Q`, the number of grid levels spanned.
    pub fn levels(&self) -> i64 {
        self.max_numerator() - self.min_numerator()
    }

    pub fn values(&self) -> NodeVector {
        let q = self.q as f64;
        NodeVector::new(self.numerators.iter().map(|&m| m as f64 / q).collect()).expect("finite")
    }

    /// Mean value, from the exact integer sum.
    pub fn mean(&self) -> f64 {
        let sum: i128 = self.numerators.iter().map(|&m| m as i128).sum();
        sum as f64 / (self.q as f64 * self.len() as f64)
    }

    /// `V̲`, from exact integer offsets.
    pub fn min_anchored_variance(&self) -> f64 {
        let m = self.min_numerator();
        let s: i128 = self.numerators.iter().map(|&v| ((v - m) as i128).pow(2)).sum();
        s as f64 / (self.q as f64).powi(2)
    }
}

/// `⌊A x⌋` on the grid of `x`.
pub fn quantized_step(x: &QuantizedVector, a: &WeightMatrix) -> Result<QuantizedVector> {
    if a.n() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: x.len(),
        });
    }
    let q = x.q as f64;
    let values: Vec<f64> = x.numerators.iter().map(|&m| m as f64 / q).collect();
    let numerators = a.mul_vec(&values).into_iter().map(|v| floor_quantize(v, x.q)).collect();
    Ok(QuantizedVector { numerators, q: x.q })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantizedRoundRecord {
    pub round: usize,
    /// `V̲`
    pub min_anchored: f64,
    /// `V`
    pub variance: f64,
    pub min_numerator: i64,
    pub max_numerator: i64,
    pub mean: f64,
}

impl QuantizedRoundRecord {
    fn of(round: usize, x: &QuantizedVector) -> Self {
        QuantizedRoundRecord {
            round,
            min_anchored: x.min_anchored_variance(),
            variance: sample_variance(&x.values()),
            min_numerator: x.min_numerator(),
            max_numerator: x.max_numerator(),
            mean: x.mean(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantizedRunReport {
    pub n: usize,
    pub window: usize,
    pub q: i64,
    /// `K = (U − L)·Q` of the initial vector.
    pub levels: i64,
    pub initial_mean: f64,
    pub trajectory: Vec<QuantizedRoundRecord>,
    /// First round at which all numerators are equal.
    pub termination_round: Option<usize>,
    /// Common numerator at termination (`x_f = final_numerator / q`).
    pub final_numerator: Option<i64>,
    /// `|x_f − mean(x(0))|`, once terminated.
    pub mean_drift: Option<f64>,
    pub rounds_executed: usize,
    pub final_state: QuantizedVector,
    pub windows: Vec<WindowAudit>,
}

impl QuantizedRunReport {
    pub fn final_value(&self) -> Option<f64> {
        self.final_numerator.map(|m| m as f64 / self.q as f64)
    }
}

/// Where each round's weights come from.
#[derive(Clone, Copy)]
pub enum QuantizedProtocol<'a> {
    /// A fixed matrix sequence.
    Matrices(&'a dyn MatrixSequence),
    /// The balancing protocol's implied matrix, computed from the current
    /// quantized values on each round's graph.
    Balancing(&'a dyn TopologySequence),
}

impl QuantizedProtocol<'_> {
    fn node_count(&self) -> usize {
        match self {
            QuantizedProtocol::Matrices(s) => s.node_count(),
            QuantizedProtocol::Balancing(s) => s.node_count(),
        }
    }

    fn window(&self) -> usize {
        match self {
            QuantizedProtocol::Matrices(s) => s.window(),
            QuantizedProtocol::Balancing(s) => s.window(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantizedRunConfig {
    pub max_rounds: usize,
    /// Record every `stride`-th round (the last round is always recorded).
    pub stride: usize,
}

impl QuantizedRunConfig {
    pub fn new(max_rounds: usize) -> Self {
        QuantizedRunConfig { max_rounds, stride: 1 }
    }
}

/// Iterates the quantized update until all values agree or `max_rounds`.
pub fn run_quantized(
    x0: &QuantizedVector,
    protocol: QuantizedProtocol<'_>,
    config: &QuantizedRunConfig,
) -> Result<QuantizedRunReport> {
    let n = x0.len();
    if protocol.node_count() != n {
        return Err(Error::DimensionMismatch {
            expected: protocol.node_count(),
            found: n,
        });
    }
    if config.stride == 0 {
        return Err(Error::param("stride", "must be at least 1"));
    }
    let window = protocol.window();
    let mut report = QuantizedRunReport {
        n,
        window,
        q: x0.q,
        levels: x0.levels(),
        initial_mean: x0.mean(),
        trajectory: vec![QuantizedRoundRecord::of(0, x0)],
        termination_round: None,
        final_numerator: None,
        mean_drift: None,
        rounds_executed: 0,
        final_state: x0.clone(),
        windows: Vec::new(),
    };
    let mut x = x0.clone();
    if !x.is_consensus() {
        let mut tracker = WindowTracker::new(n, window);
        for k in 0..config.max_rounds {
            let values = x.values();
            tracker.before_round(k, &values);
            let a: Cow<'_, WeightMatrix> = match protocol {
                QuantizedProtocol::Matrices(seq) => seq.matrix(k)?,
                QuantizedProtocol::Balancing(seq) => {
                    Cow::Owned(balancing_round(&values, &seq.snapshot(k)?)?.implied_matrix)
                }
            };
            if a.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: a.n(),
                });
            }
            tracker.observe(&a);
            x = quantized_step(&x, &a)?;
            report.rounds_executed = k + 1;
            if let Some(audit) = tracker.after_round(k, &x.values()) {
                report.windows.push(audit);
            }
            let done = x.is_consensus();
            if (k + 1) % config.stride == 0 || done || k + 1 == config.max_rounds {
                report.trajectory.push(QuantizedRoundRecord::of(k + 1, &x));
            }
            if done {
                break;
            }
        }
    }
    if x.is_consensus() {
        let m = x.numerators[0];
        report.termination_round = Some(report.rounds_executed);
        report.final_numerator = Some(m);
        report.mean_drift = Some((m as f64 / x.q as f64 - report.initial_mean).abs());
    }
    report.final_state = x;
    Ok(report)
}

/// `(c/Q)·(n²/η)·B·ln(Q·n·(U−L))`, meaningful for `U > L`.
pub fn error_bound(n: usize, eta: f64, window: usize, q: i64, u: f64, l: f64, c: f64) -> f64 {
    let (n, q) = (n as f64, q as f64);
    (c / q) * (n * n / eta) * window as f64 * (q * n * (u - l)).ln()
}

/// `n·B·K` rounds, after which all values are equal.
pub fn equalization_bound(n: u64, window: u64, levels: u64) -> u64 {
    n * window * levels
}

/// The complete-subgraph construction that keeps the quantized consensus
/// value half a unit away from the true average.
///
/// Nodes `0..n/2` start at 0 and nodes `n/2..n` at 1. In phase `p` the graph
/// is a clique over every node currently at 0 plus node `n/2 + p`, and each
/// clique member averages its closed neighbourhood with equal weights
/// `1/m`. With `Q < n/2` the lone 1 contributes `1/m < 1/Q`, so every member
/// floors back to 0 and the 1-node joins the zeros.
#[derive(Debug, Clone)]
pub struct ConverseScenario {
    pub n: usize,
    pub q: i64,
    pub x0: QuantizedVector,
    pub graphs: Vec<GraphSnapshot>,
    schedule: PeriodicMatrices,
}

impl ConverseScenario {
    /// Matrix schedule: one phase per round, `n/2` rounds, window `n/2`.
    pub fn schedule(&self) -> &PeriodicMatrices {
        &self.schedule
    }

    pub fn simulate(&self) -> Result<QuantizedRunReport> {
        run_quantized(
            &self.x0,
            QuantizedProtocol::Matrices(&self.schedule),
            &QuantizedRunConfig::new(self.n / 2),
        )
    }
}

pub fn converse_scenario(n: usize, q: i64) -> Result<ConverseScenario> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::param("n", "must be a positive even number"));
    }
    let half = n / 2;
    if !(q >= 1 && (q as usize) < half) {
        return Err(Error::param("q", format!("need 1 <= Q < n/2 = {half}")));
    }
    let numerators = (0..n).map(|i| if i < half { 0 } else { q }).collect();
    let x0 = QuantizedVector::new(numerators, q)?;

    let mut graphs = Vec::with_capacity(half);
    let mut matrices = Vec::with_capacity(half);
    for phase in 0..half {
        let members: Vec<usize> = (0..=half + phase).collect();
        let pairs = members
            .iter()
            .flat_map(|&a| members.iter().filter(move |&&b| b > a).map(move |&b| (a, b)));
        let g = GraphSnapshot::undirected(n, pairs)?;
        matrices.push(equal_neighbor_matrix(&g, 1.0 / members.len() as f64)?);
        graphs.push(g);
    }
    let schedule = PeriodicMatrices::new(matrices, half)?.with_horizon(half);
    Ok(ConverseScenario {
        n,
        q,
        x0,
        graphs,
        schedule,
    })
}
