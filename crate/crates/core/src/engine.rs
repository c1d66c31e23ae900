//! The unquantized iteration `x(k+1) = A(k) x(k)`.
//!
//! [`run`] drives a [`MatrixSequence`] until the sample variance falls to an
//! `epsilon` fraction of its initial value (or a round budget runs out),
//! recording the trajectory and auditing each completed window of `B`
//! rounds: weight validity, strong connectivity of the window's union graph,
//! the cut-crossing condition at the window start, and the Lyapunov values
//! needed to check the per-window decrease bounds.

use std::borrow::Cow;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{cut_crossing_holds, is_strongly_connected, GraphSnapshot, TopologySequence};
use crate::lyapunov::{min_anchored_variance, sample_variance, sorted_gap_energy, NodeVector};
use crate::rng;
use crate::weights::{equal_neighbor_matrix, random_birkhoff_with, validate_assumption_1, WeightMatrix};

/// A deterministic map from round index to weight matrix.
pub trait MatrixSequence: Send + Sync {
    fn node_count(&self) -> usize;

    /// Window length `B`.
    fn window(&self) -> usize;

    /// Number of rounds the sequence defines, if finite.
    fn horizon(&self) -> Option<usize> {
        None
    }

    fn matrix(&self, round: usize) -> Result<Cow<'_, WeightMatrix>>;
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 {
        return Err(Error::param("window", "must be at least 1"));
    }
    Ok(())
}

/// The same matrix every round.
#[derive(Debug, Clone)]
pub struct StaticMatrices {
    matrix: WeightMatrix,
    window: usize,
}

impl StaticMatrices {
    pub fn new(matrix: WeightMatrix, window: usize) -> Result<Self> {
        check_window(window)?;
        Ok(StaticMatrices { matrix, window })
    }
}

impl MatrixSequence for StaticMatrices {
    fn node_count(&self) -> usize {
        self.matrix.n()
    }

    fn window(&self) -> usize {
        self.window
    }

    fn matrix(&self, _round: usize) -> Result<Cow<'_, WeightMatrix>> {
        Ok(Cow::Borrowed(&self.matrix))
    }
}

/// Round-robin over a list of matrices.
#[derive(Debug, Clone)]
pub struct PeriodicMatrices {
    matrices: Vec<WeightMatrix>,
    window: usize,
    horizon: Option<usize>,
}

impl PeriodicMatrices {
    pub fn new(matrices: Vec<WeightMatrix>, window: usize) -> Result<Self> {
        check_window(window)?;
        let Some(first) = matrices.first() else {
            return Err(Error::param("matrices", "at least one matrix required"));
        };
        if let Some(bad) = matrices.iter().find(|a| a.n() != first.n()) {
            return Err(Error::DimensionMismatch {
                expected: first.n(),
                found: bad.n(),
            });
        }
        Ok(PeriodicMatrices {
            matrices,
            window,
            horizon: None,
        })
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn matrices(&self) -> &[WeightMatrix] {
        &self.matrices
    }
}

impl MatrixSequence for PeriodicMatrices {
    fn node_count(&self) -> usize {
        self.matrices[0].n()
    }

    fn window(&self) -> usize {
        self.window
    }

    fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    fn matrix(&self, round: usize) -> Result<Cow<'_, WeightMatrix>> {
        if let Some(h) = self.horizon {
            if round >= h {
                return Err(Error::HorizonExceeded { round, horizon: h });
            }
        }
        Ok(Cow::Borrowed(&self.matrices[round % self.matrices.len()]))
    }
}

/// The slow-mixing schedule: the circulant `(1 − 2η)I + ηP + ηP⁻¹` on rounds
/// that are multiples of `B`, the identity otherwise.
#[derive(Debug, Clone)]
pub struct CirculantSchedule {
    circulant: WeightMatrix,
    identity: WeightMatrix,
    window: usize,
}

impl CirculantSchedule {
    pub fn new(n: usize, eta: f64, window: usize) -> Result<Self> {
        check_window(window)?;
        let circulant = crate::weights::circulant_matrix(n, eta)?;
        // identity rounds carry the circulant's eta so window minima stay meaningful
        let identity = WeightMatrix::identity(n).with_eta(circulant.eta())?;
        Ok(CirculantSchedule {
            circulant,
            identity,
            window,
        })
    }

    pub fn circulant(&self) -> &WeightMatrix {
        &self.circulant
    }
}

impl MatrixSequence for CirculantSchedule {
    fn node_count(&self) -> usize {
        self.circulant.n()
    }

    fn window(&self) -> usize {
        self.window
    }

    fn matrix(&self, round: usize) -> Result<Cow<'_, WeightMatrix>> {
        Ok(Cow::Borrowed(if round.is_multiple_of(self.window) {
            &self.circulant
        } else {
            &self.identity
        }))
    }
}

/// Equal-neighbour weights with a fixed `eps` over an undirected topology.
#[derive(Debug, Clone)]
pub struct EqualNeighborSequence<T> {
    topology: T,
    eps: f64,
}

impl<T: TopologySequence> EqualNeighborSequence<T> {
    pub fn new(topology: T, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps * (topology.node_count() as f64 - 1.0) < 1.0) {
            return Err(Error::param("eps", "need 0 < eps and eps * (n - 1) < 1"));
        }
        Ok(EqualNeighborSequence { topology, eps })
    }

    pub fn topology(&self) -> &T {
        &self.topology
    }
}

impl<T: TopologySequence> MatrixSequence for EqualNeighborSequence<T> {
    fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    fn window(&self) -> usize {
        self.topology.window()
    }

    fn horizon(&self) -> Option<usize> {
        self.topology.horizon()
    }

    fn matrix(&self, round: usize) -> Result<Cow<'_, WeightMatrix>> {
        let g = self.topology.snapshot(round)?;
        // a fixed eta across rounds, independent of the round's degrees
        let a = equal_neighbor_matrix(&g, self.eps)?;
        let eta = self.eps.min(1.0 - self.eps * (self.node_count() as f64 - 1.0));
        Ok(Cow::Owned(a.with_eta(eta)?))
    }
}

/// A fresh random Birkhoff matrix each round, drawn from the round's own
/// substream of the seed.
#[derive(Debug, Clone)]
pub struct BirkhoffSequence {
    n: usize,
    num_permutations: usize,
    eta: f64,
    seed: u64,
    window: usize,
}

impl BirkhoffSequence {
    pub fn new(n: usize, num_permutations: usize, eta: f64, seed: u64, window: usize) -> Result<Self> {
        check_window(window)?;
        // validates the parameters once up front
        random_birkhoff_with(n, num_permutations, eta, &mut rng::seeded(seed))?;
        Ok(BirkhoffSequence {
            n,
            num_permutations,
            eta,
            seed,
            window,
        })
    }
}

impl MatrixSequence for BirkhoffSequence {
    fn node_count(&self) -> usize {
        self.n
    }

    fn window(&self) -> usize {
        self.window
    }

    fn matrix(&self, round: usize) -> Result<Cow<'_, WeightMatrix>> {
        let mut rng = rng::substream(self.seed, round as u64);
        random_birkhoff_with(self.n, self.num_permutations, self.eta, &mut rng).map(Cow::Owned)
    }
}

/// Views a matrix sequence as the topology of its edge sets `E(A(k))`.
pub struct SupportGraphs<'a>(pub &'a dyn MatrixSequence);

impl TopologySequence for SupportGraphs<'_> {
    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    fn window(&self) -> usize {
        self.0.window()
    }

    fn horizon(&self) -> Option<usize> {
        self.0.horizon()
    }

    fn snapshot(&self, round: usize) -> Result<GraphSnapshot> {
        Ok(self.0.matrix(round)?.support_graph())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunConfig {
    /// Stop once `V(k) ≤ epsilon · V(0)`.
    pub epsilon: f64,
    pub max_rounds: usize,
    /// Record every `stride`-th round (the last round is always recorded).
    pub stride: usize,
}

impl RunConfig {
    pub fn new(epsilon: f64, max_rounds: usize) -> Result<Self> {
        let cfg = RunConfig {
            epsilon,
            max_rounds,
            stride: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_stride(mut self, stride: usize) -> Result<Self> {
        self.stride = stride;
        self.validate()?;
        Ok(self)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::param("epsilon", "must lie in (0, 1)"));
        }
        if self.stride == 0 {
            return Err(Error::param("stride", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    /// `V`
    pub variance: f64,
    /// `V̲`
    pub min_anchored: f64,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl RoundRecord {
    pub fn of(round: usize, x: &NodeVector) -> Self {
        RoundRecord {
            round,
            variance: sample_variance(x),
            min_anchored: min_anchored_variance(x),
            min: x.min(),
            max: x.max(),
            mean: x.mean(),
        }
    }
}

/// Audit of one completed window, rounds `start_round .. start_round + B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowAudit {
    pub window: usize,
    pub start_round: usize,
    /// Smallest declared `eta` among the window's matrices.
    pub eta: f64,
    /// Every matrix in the window passed weight validation.
    pub weights_valid: bool,
    /// The window's union of edge sets is strongly connected.
    pub b_connected: bool,
    /// Cut-crossing condition at the window start.
    pub cut_assumption: bool,
    pub variance_start: f64,
    pub variance_end: f64,
    pub min_anchored_start: f64,
    pub min_anchored_end: f64,
    /// `sorted_gap_energy` of the values at the window start.
    pub gap_energy: f64,
}

impl WindowAudit {
    /// `(V(kB) − V((k+1)B)) / V(kB)`, if `V(kB) > 0`.
    pub fn relative_variance_decrease(&self) -> Option<f64> {
        (self.variance_start > 0.0).then(|| (self.variance_start - self.variance_end) / self.variance_start)
    }

    pub fn relative_min_anchored_decrease(&self) -> Option<f64> {
        (self.min_anchored_start > 0.0)
            .then(|| (self.min_anchored_start - self.min_anchored_end) / self.min_anchored_start)
    }

    /// Assumptions under which the per-window decrease bounds apply.
    pub fn compliant(&self) -> bool {
        self.weights_valid && self.cut_assumption
    }
}

/// Accumulates one window's matrices and start state.
pub(crate) struct WindowTracker {
    window: usize,
    index: usize,
    start: Option<(NodeVector, usize)>,
    union: GraphSnapshot,
    eta: f64,
    valid: bool,
}

impl WindowTracker {
    pub(crate) fn new(n: usize, window: usize) -> Self {
        WindowTracker {
            window,
            index: 0,
            start: None,
            union: GraphSnapshot::empty(n),
            eta: f64::INFINITY,
            valid: true,
        }
    }

    /// Call before applying the matrix of `round`.
    pub(crate) fn before_round(&mut self, round: usize, x: &NodeVector) {
        if round.is_multiple_of(self.window) {
            self.index = round / self.window;
            self.start = Some((x.clone(), round));
            self.union = GraphSnapshot::empty(x.len());
            self.eta = f64::INFINITY;
            self.valid = true;
        }
    }

    pub(crate) fn observe(&mut self, a: &WeightMatrix) {
        self.union
            .union_with(&a.support_graph())
            .expect("matrix size checked by caller");
        self.eta = self.eta.min(a.eta());
        self.valid &= validate_assumption_1(a).passed();
    }

    /// Call after applying the matrix of `round`; yields the audit when the
    /// round closes a window.
    pub(crate) fn after_round(&mut self, round: usize, x: &NodeVector) -> Option<WindowAudit> {
        if !(round + 1).is_multiple_of(self.window) {
            return None;
        }
        let (x_start, start_round) = self.start.take()?;
        Some(WindowAudit {
            window: self.index,
            start_round,
            eta: self.eta,
            weights_valid: self.valid,
            b_connected: is_strongly_connected(&self.union),
            cut_assumption: cut_crossing_holds(&x_start, &self.union),
            variance_start: sample_variance(&x_start),
            variance_end: sample_variance(x),
            min_anchored_start: min_anchored_variance(&x_start),
            min_anchored_end: min_anchored_variance(x),
            gap_energy: sorted_gap_energy(&x_start),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub n: usize,
    pub window: usize,
    pub initial_mean: f64,
    pub trajectory: Vec<RoundRecord>,
    /// First round with `V(k) ≤ epsilon · V(0)`.
    pub convergence_time: Option<usize>,
    pub rounds_executed: usize,
    pub final_values: NodeVector,
    pub windows: Vec<WindowAudit>,
}

impl RunReport {
    /// `max_i |x_i − mean(x(0))|` at the final round.
    pub fn final_error(&self) -> f64 {
        self.final_values
            .values()
            .iter()
            .map(|v| (v - self.initial_mean).abs())
            .fold(0.0, f64::max)
    }
}

/// `x(k+1) = A x(k)`.
pub fn step(x: &NodeVector, a: &WeightMatrix) -> Result<NodeVector> {
    if a.n() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: x.len(),
        });
    }
    NodeVector::new(a.mul_vec(x.values()))
}

/// Iterates `seq` from `x0` until `V(k) ≤ epsilon·V(0)` or `max_rounds`.
///
/// Assumption violations are recorded in the window audits, never fatal.
pub fn run(x0: &NodeVector, seq: &dyn MatrixSequence, config: &RunConfig) -> Result<RunReport> {
    if seq.node_count() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: seq.node_count(),
            found: x0.len(),
        });
    }
    iterate(x0, seq.window(), config, |k, x| {
        let a = seq.matrix(k)?;
        let next = step(x, &a)?;
        Ok((a, next))
    })
}

/// Shared driver: `advance(k, x)` returns the round's matrix and the new
/// values.
pub(crate) fn iterate<'s, F>(x0: &NodeVector, window: usize, config: &RunConfig, mut advance: F) -> Result<RunReport>
where
    F: FnMut(usize, &NodeVector) -> Result<(Cow<'s, WeightMatrix>, NodeVector)>,
{
    config.validate()?;
    check_window(window)?;
    let n = x0.len();
    let v0 = sample_variance(x0);
    let threshold = config.epsilon * v0;
    let mut report = RunReport {
        n,
        window,
        initial_mean: x0.mean(),
        trajectory: vec![RoundRecord::of(0, x0)],
        convergence_time: None,
        rounds_executed: 0,
        final_values: x0.clone(),
        windows: Vec::new(),
    };
    if v0 == 0.0 {
        report.convergence_time = Some(0);
        return Ok(report);
    }

    let mut tracker = WindowTracker::new(n, window);
    let mut x = x0.clone();
    for k in 0..config.max_rounds {
        tracker.before_round(k, &x);
        let (a, next) = advance(k, &x)?;
        if a.n() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: a.n(),
            });
        }
        tracker.observe(&a);
        x = next;
        report.rounds_executed = k + 1;
        if let Some(audit) = tracker.after_round(k, &x) {
            report.windows.push(audit);
        }
        let record = RoundRecord::of(k + 1, &x);
        let converged = record.variance <= threshold;
        if (k + 1) % config.stride == 0 || converged || k + 1 == config.max_rounds {
            report.trajectory.push(record);
        }
        if converged {
            report.convergence_time = Some(k + 1);
            break;
        }
    }
    report.final_values = x;
    Ok(report)
}

/// `c · (n²/η) · B · ln(1/ε)`.
pub fn convergence_time_bound(n: usize, window: usize, eta: f64, epsilon: f64, c: f64) -> f64 {
    let n = n as f64;
    c * (n * n / eta) * window as f64 * (1.0 / epsilon).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::check_b_connectivity;
    use crate::weights::circulant_matrix;

    fn nv(v: &[f64]) -> NodeVector {
        NodeVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn step_examples() {
        let x = nv(&[1.0, 2.0, 3.0]);
        assert_eq!(step(&x, &WeightMatrix::identity(3)).unwrap(), x);

        let half = WeightMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]], 0.5).unwrap();
        assert_eq!(step(&nv(&[1.0, -1.0]), &half).unwrap(), nv(&[0.0, 0.0]));

        let c = circulant_matrix(4, 0.25).unwrap();
        assert_eq!(
            step(&nv(&[1.0, 0.0, -1.0, 0.0]), &c).unwrap(),
            nv(&[0.5, 0.0, -0.5, 0.0])
        );

        assert_eq!(
            step(&nv(&[1.0]), &half),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn constant_start_converges_immediately() {
        let seq = StaticMatrices::new(circulant_matrix(5, 0.2).unwrap(), 1).unwrap();
        let r = run(&nv(&[0.3; 5]), &seq, &RunConfig::new(0.01, 100).unwrap()).unwrap();
        assert_eq!(r.convergence_time, Some(0));
        assert_eq!(r.rounds_executed, 0);
        assert_eq!(r.trajectory.len(), 1);
    }

    #[test]
    fn identity_never_converges() {
        let seq = StaticMatrices::new(WeightMatrix::identity(3), 1).unwrap();
        let r = run(&nv(&[1.0, 0.0, 0.0]), &seq, &RunConfig::new(0.01, 50).unwrap()).unwrap();
        assert_eq!(r.convergence_time, None);
        assert_eq!(r.rounds_executed, 50);
        assert_eq!(r.trajectory.len(), 51);
        assert!(r.windows.iter().all(|w| !w.b_connected && !w.cut_assumption));
    }

    #[test]
    fn eigenvector_decays_geometrically() {
        let n = 100;
        let seq = CirculantSchedule::new(n, 0.25, 1).unwrap();
        let x0 = crate::weights::circulant_second_eigenvector(n);
        let r = run(&x0, &seq, &RunConfig::new(0.01, 5000).unwrap()).unwrap();
        let lam = crate::weights::circulant_lambda2(n, 0.25);
        let v0 = r.trajectory[0].variance;
        for rec in &r.trajectory {
            let expected = lam.powi(2 * rec.round as i32);
            let rel = (rec.variance / v0 - expected).abs() / expected;
            assert!(rel <= 1e-6, "k={} rel={rel}", rec.round);
        }
        assert!(r.convergence_time.is_some());
    }

    #[test]
    fn stride_thins_trajectory() {
        let seq = StaticMatrices::new(circulant_matrix(6, 0.1).unwrap(), 1).unwrap();
        let cfg = RunConfig::new(1e-3, 1000).unwrap().with_stride(10).unwrap();
        let r = run(&nv(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]), &seq, &cfg).unwrap();
        let last = r.trajectory.last().unwrap().round;
        assert_eq!(Some(last), r.convergence_time);
        assert!(r.trajectory[..r.trajectory.len() - 1]
            .iter()
            .all(|rec| rec.round % 10 == 0));
    }

    #[test]
    fn circulant_schedule_uses_identity_between_windows() {
        let s = CirculantSchedule::new(5, 0.2, 3).unwrap();
        assert_eq!(*s.matrix(0).unwrap(), *s.circulant());
        assert_eq!(s.matrix(1).unwrap().rows(), WeightMatrix::identity(5).rows());
        assert_eq!(*s.matrix(3).unwrap(), *s.circulant());
        assert!(check_b_connectivity(&SupportGraphs(&s), 4).unwrap());
    }

    #[test]
    fn bound_scaling() {
        let base = convergence_time_bound(10, 2, 0.2, 0.01, 1.0);
        assert!((convergence_time_bound(20, 2, 0.2, 0.01, 1.0) / base - 4.0).abs() < 1e-12);
        assert!((convergence_time_bound(10, 2, 0.1, 0.01, 1.0) / base - 2.0).abs() < 1e-12);
        let v = convergence_time_bound(100, 1, 0.25, 0.01, 1.0);
        assert!((v - 40000.0 * 100f64.ln()).abs() < 1e-6);
        assert!((v - 184206.8).abs() < 0.1);
    }

    #[test]
    fn run_config_validation() {
        assert!(RunConfig::new(0.0, 10).is_err());
        assert!(RunConfig::new(1.0, 10).is_err());
        assert!(RunConfig::new(0.5, 10).unwrap().with_stride(0).is_err());
    }
}
