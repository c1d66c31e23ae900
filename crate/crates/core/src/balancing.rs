//! Offer/accept load balancing on undirected graphs.
//!
//! Each round runs four barrier-separated phases over all nodes:
//!
//! 1. every node broadcasts its value to its neighbours;
//! 2. a node with at least one strictly smaller neighbour offers
//!    `(x_C − x_D)/3` to a smallest such neighbour `D` (lowest index on ties);
//! 3. every node holding offers accepts the largest (lowest offerer index on
//!    ties) and adds it to its value;
//! 4. every node whose offer was accepted subtracts the offered amount.
//!
//! Each accepted exchange `i → j` moves a third of the gap, so the round is
//! `x' = A x` for a doubly stochastic `A` whose positive entries are all
//! multiples of 1/3. The matrix is assembled from the exchanges as they
//! happen.

use std::borrow::Cow;

use serde::Serialize;

use crate::engine::{iterate, RunConfig, RunReport};
use crate::error::{Error, Result};
use crate::graph::{GraphSnapshot, TopologySequence};
use crate::lyapunov::NodeVector;
use crate::weights::WeightMatrix;

/// Smallest positive entry of every implied matrix.
pub const BALANCING_ETA: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exchange {
    pub offerer: usize,
    pub acceptor: usize,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundOutcome {
    pub new_values: NodeVector,
    pub implied_matrix: WeightMatrix,
    pub accepted_exchanges: Vec<Exchange>,
}

/// Runs one synchronous round of the protocol on `g`.
pub fn balancing_round(x: &NodeVector, g: &GraphSnapshot) -> Result<RoundOutcome> {
    let n = x.len();
    if g.n() != n {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: n,
        });
    }
    g.ensure_undirected()?;
    let v = x.values();
    let neighbors = g.neighbors();

    // phase 2: offers, computed from the broadcast values of phase 1
    let offers: Vec<Option<Exchange>> = (0..n)
        .map(|c| {
            let target = neighbors[c]
                .iter()
                .copied()
                .filter(|&d| v[d] < v[c])
                .min_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)))?;
            Some(Exchange {
                offerer: c,
                acceptor: target,
                amount: (v[c] - v[target]) / 3.0,
            })
        })
        .collect();

    // phase 3: each node keeps its largest incoming offer
    let mut best: Vec<Option<Exchange>> = vec![None; n];
    for offer in offers.iter().flatten() {
        let slot = &mut best[offer.acceptor];
        let better = match slot {
            None => true,
            Some(cur) => offer.amount > cur.amount || (offer.amount == cur.amount && offer.offerer < cur.offerer),
        };
        if better {
            *slot = Some(*offer);
        }
    }
    let accepted: Vec<Exchange> = best.into_iter().flatten().collect();

    // phases 3 and 4: settle
    let mut incoming = vec![0.0; n];
    let mut outgoing = vec![0.0; n];
    let mut involvement = vec![0usize; n];
    let mut off_diagonal = Vec::with_capacity(2 * accepted.len());
    for e in &accepted {
        incoming[e.acceptor] += e.amount;
        outgoing[e.offerer] += e.amount;
        involvement[e.acceptor] += 1;
        involvement[e.offerer] += 1;
        off_diagonal.push((e.offerer, e.acceptor));
        off_diagonal.push((e.acceptor, e.offerer));
    }
    let new_values = NodeVector::new((0..n).map(|i| v[i] + incoming[i] - outgoing[i]).collect())?;

    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = (3 - involvement[i]) as f64 / 3.0;
    }
    for (i, j) in off_diagonal {
        rows[i][j] += BALANCING_ETA;
    }
    let implied_matrix = WeightMatrix::from_rows(rows, BALANCING_ETA)?;

    Ok(RoundOutcome {
        new_values,
        implied_matrix,
        accepted_exchanges: accepted,
    })
}

/// Iterates the protocol over `seq` until `V(k) ≤ epsilon·V(0)` or
/// `max_rounds`. Window audits are taken on the implied matrices, so the
/// cut-crossing check applies to the realized edge sets `E(A(k))`.
pub fn run_balancing(x0: &NodeVector, seq: &dyn TopologySequence, config: &RunConfig) -> Result<RunReport> {
    if seq.node_count() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: seq.node_count(),
            found: x0.len(),
        });
    }
    iterate(x0, seq.window(), config, |k, x| {
        let g = seq.snapshot(k)?;
        let out = balancing_round(x, &g)?;
        Ok((Cow::Owned(out.implied_matrix), out.new_values))
    })
}
