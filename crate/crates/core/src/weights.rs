//! Weight matrices `A(k)` and their Gram products.

use std::f64::consts::PI;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphSnapshot;
use crate::lyapunov::NodeVector;
use crate::rng;

/// Absolute tolerance on row and column sums.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Dense `n × n` weight matrix with a declared lower bound `eta` on its
/// positive entries.
///
/// Construction only checks shape and finiteness; whether the matrix is
/// usable as an averaging step is answered by [`validate_assumption_1`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct WeightMatrix {
    n: usize,
    entries: Vec<f64>,
    eta: f64,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    n: usize,
    eta: f64,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<MatrixRepr> for WeightMatrix {
    type Error = Error;

    fn try_from(repr: MatrixRepr) -> Result<Self> {
        if repr.rows.len() != repr.n {
            return Err(Error::DimensionMismatch {
                expected: repr.n,
                found: repr.rows.len(),
            });
        }
        WeightMatrix::from_rows(repr.rows, repr.eta)
    }
}

impl From<WeightMatrix> for MatrixRepr {
    fn from(a: WeightMatrix) -> Self {
        MatrixRepr {
            n: a.n,
            eta: a.eta,
            rows: a.rows(),
        }
    }
}

impl WeightMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, eta: f64) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::param("rows", "matrix must have at least one row"));
        }
        let mut entries = Vec::with_capacity(n * n);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != n {
                return Err(Error::NotSquare { row, len: r.len(), n });
            }
            entries.extend(r);
        }
        Self::from_entries(n, entries, eta)
    }

    fn from_entries(n: usize, entries: Vec<f64>, eta: f64) -> Result<Self> {
        if let Some(index) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NotFinite { index });
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::param("eta", "must be a positive real"));
        }
        Ok(WeightMatrix { n, entries, eta })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        WeightMatrix { n, entries, eta: 1.0 }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Same entries with a different declared `eta`.
    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::param("eta", "must be a positive real"));
        }
        self.eta = eta;
        Ok(self)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for r in self.entries.chunks(self.n) {
            for (s, v) in sums.iter_mut().zip(r) {
                *s += v;
            }
        }
        sums
    }

    /// Smallest strictly positive entry, if any.
    pub fn min_positive_entry(&self) -> Option<f64> {
        self.entries.iter().copied().filter(|&v| v > 0.0).min_by(f64::total_cmp)
    }

    pub fn is_row_stochastic(&self) -> bool {
        self.entries.iter().all(|&v| v >= 0.0) && self.row_sums().iter().all(|s| (s - 1.0).abs() <= STOCHASTIC_TOL)
    }

    pub fn is_doubly_stochastic(&self) -> bool {
        self.is_row_stochastic() && self.column_sums().iter().all(|s| (s - 1.0).abs() <= STOCHASTIC_TOL)
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        self.entries
            .chunks(self.n)
            .map(|r| r.iter().zip(x).map(|(a, v)| a * v).sum())
            .collect()
    }

    /// The edge set `E(A)`: `(j, i)` whenever `a_ij > 0`.
    pub fn support_graph(&self) -> GraphSnapshot {
        let mut g = GraphSnapshot::empty(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                if self.get(i, j) > 0.0 {
                    g.add_edge(j, i).expect("indices within range");
                }
            }
        }
        g
    }

    pub fn gram(&self) -> GramMatrix {
        gram_weights(self)
    }
}

/// `W = AᵀA`, with `w_ij = Σ_k a_ki a_kj`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl GramMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

pub fn gram_weights(a: &WeightMatrix) -> GramMatrix {
    let n = a.n;
    let mut entries = vec![0.0; n * n];
    for k in 0..n {
        let row = a.row(k);
        for i in 0..n {
            let aki = row[i];
            if aki == 0.0 {
                continue;
            }
            for j in 0..n {
                entries[i * n + j] += aki * row[j];
            }
        }
    }
    GramMatrix { n, entries }
}

/// One failed condition of the weight assumption.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NegativeEntry {
        row: usize,
        col: usize,
        value: f64,
    },
    RowSum {
        row: usize,
        sum: f64,
    },
    ColumnSum {
        col: usize,
        sum: f64,
    },
    NonPositiveDiagonal {
        index: usize,
        value: f64,
    },
    BelowEta {
        row: usize,
        col: usize,
        value: f64,
        eta: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeEntry { row, col, value } => {
                write!(f, "entry ({row}, {col}) is negative: {value}")
            }
            Violation::RowSum { row, sum } => write!(f, "row {row} sums to {sum}"),
            Violation::ColumnSum { col, sum } => write!(f, "column {col} sums to {sum}"),
            Violation::NonPositiveDiagonal { index, value } => {
                write!(f, "diagonal entry {index} is not positive: {value}")
            }
            Violation::BelowEta { row, col, value, eta } => {
                write!(f, "entry ({row}, {col}) = {value} is below eta = {eta}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return writeln!(f, "PASS: doubly stochastic, positive diagonal, positive entries >= eta");
        }
        writeln!(f, "FAIL: {} violation(s)", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// Checks nonnegativity, unit row and column sums (to 1e-12), a positive
/// diagonal, and that every positive entry is at least `eta` (to 1e-12).
pub fn validate_assumption_1(a: &WeightMatrix) -> ValidationReport {
    let n = a.n;
    let mut violations = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = a.get(i, j);
            if v < 0.0 {
                violations.push(Violation::NegativeEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            } else if v > 0.0 && v < a.eta - STOCHASTIC_TOL {
                violations.push(Violation::BelowEta {
                    row: i,
                    col: j,
                    value: v,
                    eta: a.eta,
                });
            }
        }
    }
    for (row, sum) in a.row_sums().into_iter().enumerate() {
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            violations.push(Violation::RowSum { row, sum });
        }
    }
    for (col, sum) in a.column_sums().into_iter().enumerate() {
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            violations.push(Violation::ColumnSum { col, sum });
        }
    }
    for i in 0..n {
        let v = a.get(i, i);
        if v <= 0.0 {
            violations.push(Violation::NonPositiveDiagonal { index: i, value: v });
        }
    }
    ValidationReport { violations }
}

/// Equal-neighbour weights on an undirected graph: `a_ij = eps` for each
/// neighbour `j`, `a_ii = 1 − eps·deg(i)`.
pub fn equal_neighbor_matrix(g: &GraphSnapshot, eps: f64) -> Result<WeightMatrix> {
    g.ensure_undirected()?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::param("eps", "must be a positive real"));
    }
    let n = g.n();
    let mut entries = vec![0.0; n * n];
    let mut min_diag = f64::INFINITY;
    for (i, nbrs) in g.neighbors().iter().enumerate() {
        let diag = 1.0 - eps * nbrs.len() as f64;
        if diag <= 0.0 {
            return Err(Error::param(
                "eps",
                format!(
                    "eps * deg({i}) = {} leaves no positive diagonal",
                    eps * nbrs.len() as f64
                ),
            ));
        }
        for &j in nbrs {
            entries[i * n + j] = eps;
        }
        entries[i * n + i] = diag;
        min_diag = min_diag.min(diag);
    }
    WeightMatrix::from_entries(n, entries, eps.min(min_diag))
}

/// `(1 − 2η) I + η P + η P⁻¹` with `P` the cyclic shift.
pub fn circulant_matrix(n: usize, eta: f64) -> Result<WeightMatrix> {
    if n < 3 {
        return Err(Error::param("n", "circulant construction needs n >= 3"));
    }
    if !(eta > 0.0 && eta < 0.5) {
        return Err(Error::param("eta", "must lie in (0, 1/2)"));
    }
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        entries[i * n + i] = 1.0 - 2.0 * eta;
        entries[i * n + (i + 1) % n] = eta;
        entries[i * n + (i + n - 1) % n] = eta;
    }
    WeightMatrix::from_entries(n, entries, eta.min(1.0 - 2.0 * eta))
}

/// Second-largest eigenvalue of the circulant: `1 − 2η + 2η·cos(2π/n)`.
pub fn circulant_lambda2(n: usize, eta: f64) -> f64 {
    1.0 - 2.0 * eta + 2.0 * eta * (2.0 * PI / n as f64).cos()
}

/// Real eigenvector `v_i = cos(2π i / n)` for the circulant's second
/// eigenvalue.
pub fn circulant_second_eigenvector(n: usize) -> NodeVector {
    let values = (0..n).map(|i| (2.0 * PI * i as f64 / n as f64).cos()).collect();
    NodeVector::new(values).expect("cosines are finite")
}

/// Convex combination of the identity and `num_permutations − 1` random
/// permutation matrices, every coefficient at least `eta`.
///
/// Coefficients are `eta + (1 − m·eta)·d` with `d` drawn from a flat
/// Dirichlet, so they sum to one and respect the floor exactly.
pub fn random_birkhoff_matrix(n: usize, num_permutations: usize, eta: f64, seed: u64) -> Result<WeightMatrix> {
    let mut rng = rng::seeded(seed);
    random_birkhoff_with(n, num_permutations, eta, &mut rng)
}

pub(crate) fn random_birkhoff_with(
    n: usize,
    num_permutations: usize,
    eta: f64,
    rng: &mut impl Rng,
) -> Result<WeightMatrix> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if num_permutations == 0 {
        return Err(Error::param("num_permutations", "must be at least 1"));
    }
    if !(eta > 0.0 && eta * num_permutations as f64 <= 1.0) {
        return Err(Error::param(
            "eta",
            format!("need 0 < eta and eta * num_permutations <= 1 (got {eta} * {num_permutations})"),
        ));
    }
    let coefficients = floored_dirichlet(num_permutations, eta, rng);
    let mut entries = vec![0.0; n * n];
    let mut perm: Vec<usize> = (0..n).collect();
    for (p, c) in coefficients.into_iter().enumerate() {
        if p > 0 {
            perm.shuffle(rng);
        }
        for (i, &j) in perm.iter().enumerate() {
            entries[i * n + j] += c;
        }
    }
    WeightMatrix::from_entries(n, entries, eta)
}

/// `m` weights summing to one, each at least `floor`.
fn floored_dirichlet(m: usize, floor: f64, rng: &mut impl Rng) -> Vec<f64> {
    if m == 1 {
        return vec![1.0];
    }
    let draws: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    let slack = 1.0 - m as f64 * floor;
    draws.iter().map(|d| floor + slack * d / total).collect()
}

/// Random row-stochastic matrix with positive diagonal: each row is
/// supported on its diagonal plus a random subset of other columns (each
/// kept with probability `edge_probability`), with weights floored at `eta`.
/// Columns generally do not sum to one.
pub fn random_row_stochastic(n: usize, eta: f64, edge_probability: f64, seed: u64) -> Result<WeightMatrix> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    if !(eta > 0.0 && eta * n as f64 <= 1.0) {
        return Err(Error::param("eta", "need 0 < eta <= 1/n"));
    }
    if !(0.0..=1.0).contains(&edge_probability) {
        return Err(Error::param("edge_probability", "must lie in [0, 1]"));
    }
    let mut rng = rng::seeded(seed);
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let support: Vec<usize> = (0..n)
            .filter(|&j| j == i || rng.random_bool(edge_probability))
            .collect();
        let weights = floored_dirichlet(support.len(), eta, &mut rng);
        for (j, w) in support.into_iter().zip(weights) {
            entries[i * n + j] = w;
        }
    }
    WeightMatrix::from_entries(n, entries, eta)
}
