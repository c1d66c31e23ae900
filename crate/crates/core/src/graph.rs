//! Directed communication graphs and time-varying topologies.
//!
//! An edge `(j, i)` means node `i` receives from node `j` in that round.
//! Self-edges `(i, i)` are always present. Node indices are 0-based.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::NodeVector;
use crate::rng;

/// One round's communication graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct GraphSnapshot {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

/// On-disk form: `{"n": 3, "edges": [[0, 1], ...]}` with self-edges implied.
#[derive(Serialize, Deserialize)]
struct GraphRepr {
    n: usize,
    #[serde(default)]
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphRepr> for GraphSnapshot {
    type Error = Error;

    fn try_from(repr: GraphRepr) -> Result<Self> {
        GraphSnapshot::from_edges(repr.n, repr.edges.into_iter().map(|[j, i]| (j, i)))
    }
}

impl From<GraphSnapshot> for GraphRepr {
    fn from(g: GraphSnapshot) -> Self {
        GraphRepr {
            n: g.n,
            edges: g.cross_edges().map(|(j, i)| [j, i]).collect(),
        }
    }
}

impl GraphSnapshot {
    /// Graph with only self-edges.
    pub fn empty(n: usize) -> Self {
        GraphSnapshot {
            n,
            edges: (0..n).map(|i| (i, i)).collect(),
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::empty(n);
        for (j, i) in edges {
            g.add_edge(j, i)?;
        }
        Ok(g)
    }

    /// Undirected graph: each pair `{a, b}` contributes both directions.
    pub fn undirected(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut g = Self::empty(n);
        for (a, b) in pairs {
            g.add_undirected(a, b)?;
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for a in 0..n {
            for b in 0..n {
                g.edges.insert((a, b));
            }
        }
        g
    }

    /// Directed cycle `0 → 1 → … → n−1 → 0`.
    pub fn directed_cycle(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 0..n {
            g.edges.insert((i, (i + 1) % n));
        }
        g
    }

    /// Undirected path `0 – 1 – … – n−1`.
    pub fn path(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 1..n {
            g.edges.insert((i - 1, i));
            g.edges.insert((i, i - 1));
        }
        g
    }

    /// Adds `(j, i)`: node `i` receives from node `j`.
    pub fn add_edge(&mut self, j: usize, i: usize) -> Result<()> {
        for index in [j, i] {
            if index >= self.n {
                return Err(Error::NodeOutOfRange { index, n: self.n });
            }
        }
        self.edges.insert((j, i));
        Ok(())
    }

    pub fn add_undirected(&mut self, a: usize, b: usize) -> Result<()> {
        self.add_edge(a, b)?;
        self.add_edge(b, a)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, j: usize, i: usize) -> bool {
        self.edges.contains(&(j, i))
    }

    /// All edges including self-edges, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Edges between distinct nodes.
    pub fn cross_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges().filter(|(j, i)| j != i)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_undirected(&self) -> bool {
        self.cross_edges().all(|(j, i)| self.contains(i, j))
    }

    /// Fails with the first edge lacking its reverse.
    pub fn ensure_undirected(&self) -> Result<()> {
        match self.cross_edges().find(|&(j, i)| !self.contains(i, j)) {
            Some((from, to)) => Err(Error::NotUndirected { from, to }),
            None => Ok(()),
        }
    }

    /// Neighbour lists (excluding self) over the undirected view of the
    /// graph, each sorted ascending.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); self.n];
        for (j, i) in self.cross_edges() {
            adj[i].insert(j);
            adj[j].insert(i);
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.cross_edges().filter(|&(_, to)| to == i).count()
    }

    /// Adds every edge of `other` into `self`.
    pub fn union_with(&mut self, other: &GraphSnapshot) -> Result<()> {
        if other.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        self.edges.extend(other.edges.iter().copied());
        Ok(())
    }

    fn out_adjacency(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for (j, i) in self.cross_edges() {
            out[j].push(i);
        }
        out
    }

    fn in_adjacency(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n];
        for (j, i) in self.cross_edges() {
            inc[i].push(j);
        }
        inc
    }

    /// Nodes that `source` reaches along directed edges (including itself).
    pub fn reachable_from(&self, source: usize) -> Vec<bool> {
        sweep(&self.out_adjacency(), source)
    }

    /// Strongly connected components, each sorted, ordered by smallest
    /// member.
    pub fn strong_components(&self) -> Vec<Vec<usize>> {
        let out = self.out_adjacency();
        let reach: Vec<Vec<bool>> = (0..self.n).map(|s| sweep(&out, s)).collect();
        let mut assigned = vec![false; self.n];
        let mut components = Vec::new();
        for s in 0..self.n {
            if assigned[s] {
                continue;
            }
            let comp: Vec<usize> = (s..self.n).filter(|&t| reach[s][t] && reach[t][s]).collect();
            for &t in &comp {
                assigned[t] = true;
            }
            components.push(comp);
        }
        components
    }
}

fn sweep(adj: &[Vec<usize>], source: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![source];
    seen[source] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// True iff every node reaches every other node.
pub fn is_strongly_connected(g: &GraphSnapshot) -> bool {
    if g.n <= 1 {
        return true;
    }
    sweep(&g.out_adjacency(), 0).iter().all(|&r| r) && sweep(&g.in_adjacency(), 0).iter().all(|&r| r)
}

/// Cut-crossing test for one window, given the union of the window's edges:
/// after sorting `x` largest first, every cut between sorted positions
/// `d` and `d+1` must either separate equal values or be crossed by an edge
/// (in either direction).
pub fn cut_crossing_holds(x: &NodeVector, window_edges: &GraphSnapshot) -> bool {
    let n = x.len();
    assert_eq!(n, window_edges.n(), "vector and graph sizes differ");
    let order = x.descending_order();
    let mut position = vec![0usize; n];
    for (p, &i) in order.iter().enumerate() {
        position[i] = p;
    }
    // cover[d] > 0 iff some edge joins positions < d and ≥ d (cuts d = 1..n-1)
    let mut delta = vec![0i64; n + 1];
    for (j, i) in window_edges.cross_edges() {
        let (lo, hi) = if position[i] < position[j] {
            (position[i], position[j])
        } else {
            (position[j], position[i])
        };
        delta[lo + 1] += 1;
        delta[hi + 1] -= 1;
    }
    let v = x.values();
    let mut cover = 0i64;
    for d in 1..n {
        cover += delta[d];
        if cover == 0 && v[order[d - 1]] != v[order[d]] {
            return false;
        }
    }
    true
}

/// A deterministic map from round index to communication graph, grouped in
/// windows of `window()` consecutive rounds.
pub trait TopologySequence: Send + Sync {
    fn node_count(&self) -> usize;

    /// Window length `B`.
    fn window(&self) -> usize;

    /// Number of rounds the sequence defines, if finite.
    fn horizon(&self) -> Option<usize> {
        None
    }

    fn snapshot(&self, round: usize) -> Result<GraphSnapshot>;
}

impl<T: TopologySequence + ?Sized> TopologySequence for Box<T> {
    fn node_count(&self) -> usize {
        (**self).node_count()
    }

    fn window(&self) -> usize {
        (**self).window()
    }

    fn horizon(&self) -> Option<usize> {
        (**self).horizon()
    }

    fn snapshot(&self, round: usize) -> Result<GraphSnapshot> {
        (**self).snapshot(round)
    }
}

fn check_horizon(round: usize, horizon: Option<usize>) -> Result<()> {
    match horizon {
        Some(h) if round >= h => Err(Error::HorizonExceeded { round, horizon: h }),
        _ => Ok(()),
    }
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 {
        Err(Error::param("window", "must be at least 1"))
    } else {
        Ok(())
    }
}

/// The same graph every round.
#[derive(Debug, Clone)]
pub struct StaticTopology {
    graph: GraphSnapshot,
    window: usize,
}

impl StaticTopology {
    pub fn new(graph: GraphSnapshot, window: usize) -> Result<Self> {
        check_window(window)?;
        Ok(StaticTopology { graph, window })
    }
}

impl TopologySequence for StaticTopology {
    fn node_count(&self) -> usize {
        self.graph.n()
    }

    fn window(&self) -> usize {
        self.window
    }

    fn snapshot(&self, _round: usize) -> Result<GraphSnapshot> {
        Ok(self.graph.clone())
    }
}

/// Round-robin over a list of snapshots: round `k` uses `snapshots[k % len]`.
#[derive(Debug, Clone)]
pub struct PeriodicTopology {
    snapshots: Vec<GraphSnapshot>,
    window: usize,
    horizon: Option<usize>,
}

impl PeriodicTopology {
    pub fn new(snapshots: Vec<GraphSnapshot>, window: usize) -> Result<Self> {
        check_window(window)?;
        let Some(first) = snapshots.first() else {
            return Err(Error::param("snapshots", "at least one snapshot required"));
        };
        let n = first.n();
        if let Some(bad) = snapshots.iter().find(|g| g.n() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.n(),
            });
        }
        Ok(PeriodicTopology {
            snapshots,
            window,
            horizon: None,
        })
    }

    /// Limits the sequence to rounds `0..horizon`.
    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn snapshots(&self) -> &[GraphSnapshot] {
        &self.snapshots
    }
}

impl TopologySequence for PeriodicTopology {
    fn node_count(&self) -> usize {
        self.snapshots[0].n()
    }

    fn window(&self) -> usize {
        self.window
    }

    fn horizon(&self) -> Option<usize> {
        self.horizon
    }

    fn snapshot(&self, round: usize) -> Result<GraphSnapshot> {
        check_horizon(round, self.horizon)?;
        Ok(self.snapshots[round % self.snapshots.len()].clone())
    }
}

/// Seeded Erdős–Rényi rounds with a repair pass that makes every window's
/// union strongly connected.
///
/// Each round draws every candidate edge independently with probability
/// `edge_probability` from its own substream of the seed. On the last round
/// of each window, the union of the window is checked; if it is not strongly
/// connected, a chain of two-way edges through one random member of each
/// strong component is added to that last round.
#[derive(Debug, Clone)]
pub struct RandomTopology {
    n: usize,
    window: usize,
    edge_probability: f64,
    seed: u64,
    directed: bool,
}

impl RandomTopology {
    pub fn undirected(n: usize, window: usize, edge_probability: f64, seed: u64) -> Result<Self> {
        Self::new(n, window, edge_probability, seed, false)
    }

    pub fn directed(n: usize, window: usize, edge_probability: f64, seed: u64) -> Result<Self> {
        Self::new(n, window, edge_probability, seed, true)
    }

    fn new(n: usize, window: usize, edge_probability: f64, seed: u64, directed: bool) -> Result<Self> {
        check_window(window)?;
        if n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&edge_probability) {
            return Err(Error::param("edge_probability", "must lie in [0, 1]"));
        }
        Ok(RandomTopology {
            n,
            window,
            edge_probability,
            seed,
            directed,
        })
    }

    fn base(&self, rng: &mut impl Rng) -> GraphSnapshot {
        let mut g = GraphSnapshot::empty(self.n);
        for a in 0..self.n {
            for b in 0..self.n {
                if a == b || (!self.directed && b < a) {
                    continue;
                }
                if rng.random_bool(self.edge_probability) {
                    g.edges.insert((a, b));
                    if !self.directed {
                        g.edges.insert((b, a));
                    }
                }
            }
        }
        g
    }
}

impl TopologySequence for RandomTopology {
    fn node_count(&self) -> usize {
        self.n
    }

    fn window(&self) -> usize {
        self.window
    }

    fn snapshot(&self, round: usize) -> Result<GraphSnapshot> {
        let mut rng = rng::substream(self.seed, round as u64);
        let mut g = self.base(&mut rng);
        if round % self.window != self.window - 1 {
            return Ok(g);
        }
        let start = round + 1 - self.window;
        let mut union = g.clone();
        for t in start..round {
            let mut earlier = rng::substream(self.seed, t as u64);
            union.union_with(&self.base(&mut earlier))?;
        }
        if is_strongly_connected(&union) {
            return Ok(g);
        }
        let mut reps: Vec<usize> = union
            .strong_components()
            .iter()
            .map(|c| *c.choose(&mut rng).expect("components are nonempty"))
            .collect();
        reps.shuffle(&mut rng);
        for pair in reps.windows(2) {
            g.add_undirected(pair[0], pair[1])?;
        }
        Ok(g)
    }
}

/// Union of the edge sets of rounds `k_start..=k_end`.
pub fn union_graph(seq: &dyn TopologySequence, k_start: usize, k_end: usize) -> Result<GraphSnapshot> {
    if k_start > k_end {
        return Err(Error::param("k_start", "must not exceed k_end"));
    }
    let mut union = GraphSnapshot::empty(seq.node_count());
    for k in k_start..=k_end {
        union.union_with(&seq.snapshot(k)?)?;
    }
    Ok(union)
}

/// True iff each of the first `num_windows` windows has a strongly connected
/// union.
pub fn check_b_connectivity(seq: &dyn TopologySequence, num_windows: usize) -> Result<bool> {
    let b = seq.window();
    for k in 0..num_windows {
        if !is_strongly_connected(&union_graph(seq, k * b, (k + 1) * b - 1)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Cut-crossing test for window `window_index`, with `x` the values at the
/// start of that window.
pub fn check_cut_assumption(seq: &dyn TopologySequence, window_index: usize, x: &NodeVector) -> Result<bool> {
    if x.len() != seq.node_count() {
        return Err(Error::DimensionMismatch {
            expected: seq.node_count(),
            found: x.len(),
        });
    }
    let b = seq.window();
    let union = union_graph(seq, window_index * b, (window_index + 1) * b - 1)?;
    Ok(cut_crossing_holds(x, &union))
}
