//! Lyapunov functions for the averaging iteration.
//!
//! Two potentials are tracked:
//!
//! ```text
//! V(x)  = Σ (x_i − mean(x))²      sample variance, nonincreasing under any doubly stochastic A
//! V̲(x)  = Σ (x_i − min(x))²       min-anchored variance, nonincreasing under floor quantization
//! ```
//!
//! with `V(x) ≤ V̲(x) ≤ 4n·V(x)`. For a doubly stochastic `A` with Gram matrix
//! `W = AᵀA` the one-step decrease is exact:
//!
//! ```text
//! V(x) − V(Ax) = Σ_{i<j} w_ij (x_i − x_j)²
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::{GramMatrix, WeightMatrix};

/// Node values `x(k)`, one finite real per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct NodeVector(Vec<f64>);

impl NodeVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NotFinite { index });
        }
        Ok(NodeVector(values))
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Arithmetic mean, clamped into `[min, max]` so that a constant vector
    /// has its own value as mean exactly.
    pub fn mean(&self) -> f64 {
        let raw = self.0.iter().sum::<f64>() / self.0.len() as f64;
        raw.clamp(self.min(), self.max())
    }

    pub fn is_constant(&self) -> bool {
        self.0.windows(2).all(|w| w[0] == w[1])
    }

    /// Node indices sorted by value, largest first; equal values keep
    /// ascending index order.
    pub fn descending_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.0.len()).collect();
        order.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]));
        order
    }

    /// Values sorted largest first.
    pub fn sorted_descending(&self) -> Vec<f64> {
        self.descending_order().into_iter().map(|i| self.0[i]).collect()
    }
}

impl TryFrom<Vec<f64>> for NodeVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        NodeVector::new(values)
    }
}

impl From<NodeVector> for Vec<f64> {
    fn from(x: NodeVector) -> Self {
        x.0
    }
}

/// Two-sided node partition `(S⁻, S⁺)`, both sides nonempty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutPartition {
    s_minus: Vec<usize>,
    s_plus: Vec<usize>,
}

impl CutPartition {
    /// Builds the cut whose `S⁻` side is `s_minus`; `S⁺` is the complement.
    pub fn new(s_minus: &[usize], n: usize) -> Result<Self> {
        let mut in_minus = vec![false; n];
        for &i in s_minus {
            if i >= n {
                return Err(Error::NodeOutOfRange { index: i, n });
            }
            in_minus[i] = true;
        }
        Self::from_membership(&in_minus)
    }

    /// Builds a cut from a bitmask over nodes: bit `i` set places node `i` in
    /// `S⁺`.
    pub fn from_mask(mask: u64, n: usize) -> Result<Self> {
        if n > 64 {
            return Err(Error::param("n", "bitmask cuts support at most 64 nodes"));
        }
        let in_minus: Vec<bool> = (0..n).map(|i| mask & (1u64 << i) == 0).collect();
        Self::from_membership(&in_minus)
    }

    fn from_membership(in_minus: &[bool]) -> Result<Self> {
        let (mut s_minus, mut s_plus) = (Vec::new(), Vec::new());
        for (i, &m) in in_minus.iter().enumerate() {
            if m {
                s_minus.push(i);
            } else {
                s_plus.push(i);
            }
        }
        if s_minus.is_empty() || s_plus.is_empty() {
            return Err(Error::param("cut", "both sides must be nonempty"));
        }
        Ok(CutPartition { s_minus, s_plus })
    }

    /// Every cut of `n` nodes up to swapping the sides: node 0 is always in
    /// `S⁻`, giving `2^(n−1) − 1` partitions.
    pub fn enumerate(n: usize) -> impl Iterator<Item = CutPartition> {
        let count = if (2..=64).contains(&n) { 1u64 << (n - 1) } else { 1 };
        (1..count).map(move |m| CutPartition::from_mask(m << 1, n).expect("mask leaves node 0 in S⁻"))
    }

    pub fn s_minus(&self) -> &[usize] {
        &self.s_minus
    }

    pub fn s_plus(&self) -> &[usize] {
        &self.s_plus
    }
}

/// `V(x) = Σ (x_i − mean(x))²`, computed mean-first.
pub fn sample_variance(x: &NodeVector) -> f64 {
    let mean = x.mean();
    x.values().iter().map(|v| (v - mean).powi(2)).sum()
}

/// `V̲(x) = Σ (x_i − min(x))²`.
pub fn min_anchored_variance(x: &NodeVector) -> f64 {
    let m = x.min();
    x.values().iter().map(|v| (v - m).powi(2)).sum()
}

/// Both sides of the one-step variance identity, evaluated independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecreaseRecord {
    /// `V(x) − V(Ax)`
    pub lhs: f64,
    /// `Σ_{i<j} w_ij (x_i − x_j)²`
    pub rhs: f64,
    pub residual: f64,
}

pub fn variance_decrease(x: &NodeVector, a: &WeightMatrix) -> Result<DecreaseRecord> {
    if a.n() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            found: x.len(),
        });
    }
    if !a.is_doubly_stochastic() {
        return Err(Error::InvalidMatrix("not doubly stochastic".into()));
    }
    let ax = NodeVector::new(a.mul_vec(x.values()))?;
    let lhs = sample_variance(x) - sample_variance(&ax);

    let w = a.gram();
    let v = x.values();
    let mut rhs = 0.0;
    for j in 0..v.len() {
        for i in 0..j {
            rhs += w.get(i, j) * (v[i] - v[j]).powi(2);
        }
    }
    Ok(DecreaseRecord {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

/// `Σ_{i∈S⁻, j∈S⁺} w_ij`.
pub fn cut_weight_sum(w: &GramMatrix, cut: &CutPartition) -> f64 {
    cut.s_minus()
        .iter()
        .flat_map(|&i| cut.s_plus().iter().map(move |&j| w.get(i, j)))
        .sum()
}

/// Sum of squared gaps between consecutive values after sorting largest
/// first.
pub fn sorted_gap_energy(x: &NodeVector) -> f64 {
    x.sorted_descending().windows(2).map(|w| (w[0] - w[1]).powi(2)).sum()
}

/// Checks that `f(z) = Σ(u_i − z)² − Σ(w_i − z)²` takes the same value at
/// every sample `z` (to 1e-9 relative). Requires `Σu = Σw`.
pub fn constant_difference_check(u: &NodeVector, w: &NodeVector, z_samples: &[f64]) -> Result<bool> {
    if u.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: w.len(),
        });
    }
    let (su, sw): (f64, f64) = (u.values().iter().sum(), w.values().iter().sum());
    if (su - sw).abs() > 1e-9 {
        return Err(Error::SumMismatch { left: su, right: sw });
    }
    let f = |z: f64| -> f64 {
        let a: f64 = u.values().iter().map(|v| (v - z).powi(2)).sum();
        let b: f64 = w.values().iter().map(|v| (v - z).powi(2)).sum();
        a - b
    };
    let Some((&first, rest)) = z_samples.split_first() else {
        return Ok(true);
    };
    let reference = f(first);
    let scale = reference.abs().max(1.0);
    Ok(rest.iter().all(|&z| (f(z) - reference).abs() <= 1e-9 * scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nv(v: &[f64]) -> NodeVector {
        NodeVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn node_vector_rejects_bad_input() {
        assert_eq!(NodeVector::new(vec![]), Err(Error::EmptyVector));
        assert_eq!(NodeVector::new(vec![1.0, f64::NAN]), Err(Error::NotFinite { index: 1 }));
    }

    #[test]
    fn constant_vector_mean_is_exact() {
        let x = nv(&[0.1; 7]);
        assert_eq!(x.mean(), 0.1);
        assert_eq!(sample_variance(&x), 0.0);
    }

    #[test]
    fn sample_variance_examples() {
        assert_eq!(sample_variance(&nv(&[3.0, 3.0, 3.0])), 0.0);
        assert_eq!(sample_variance(&nv(&[1.0, 2.0, 3.0, 4.0])), 5.0);
        assert_eq!(sample_variance(&nv(&[1.0, -1.0])), 2.0);
    }

    #[test]
    fn min_anchored_variance_examples() {
        assert_eq!(min_anchored_variance(&nv(&[2.0, 2.0])), 0.0);
        assert_eq!(min_anchored_variance(&nv(&[1.0, 2.0, 3.0, 4.0])), 14.0);
        assert_eq!(min_anchored_variance(&nv(&[0.0, 1.0])), 1.0);
    }

    #[test]
    fn descending_order_breaks_ties_by_index() {
        let x = nv(&[1.0, 3.0, 1.0, 3.0, 2.0]);
        assert_eq!(x.descending_order(), vec![1, 3, 4, 0, 2]);
    }

    #[test]
    fn sorted_gap_energy_examples() {
        assert_eq!(sorted_gap_energy(&nv(&[5.0; 4])), 0.0);
        assert_eq!(sorted_gap_energy(&nv(&[3.0, 1.0, 2.0])), 2.0);
        let mut unit = vec![0.0; 9];
        unit[0] = 1.0;
        assert_eq!(sorted_gap_energy(&nv(&unit)), 1.0);
    }

    #[test]
    fn cut_partition_validation() {
        assert!(CutPartition::new(&[0, 1], 2).is_err());
        assert!(CutPartition::new(&[], 2).is_err());
        assert!(CutPartition::new(&[5], 2).is_err());
        let c = CutPartition::new(&[2, 0], 4).unwrap();
        assert_eq!(c.s_minus(), &[0, 2]);
        assert_eq!(c.s_plus(), &[1, 3]);
    }

    #[test]
    fn enumerate_counts_cuts() {
        for n in 2..=8 {
            let cuts: Vec<_> = CutPartition::enumerate(n).collect();
            assert_eq!(cuts.len(), (1 << (n - 1)) - 1);
            assert!(cuts.iter().all(|c| c.s_minus().contains(&0)));
        }
        assert_eq!(CutPartition::enumerate(1).count(), 0);
    }

    #[test]
    fn constant_difference_examples() {
        let z = [0.0, 5.0, -3.0];
        assert!(constant_difference_check(&nv(&[1.0, 2.0]), &nv(&[1.0, 2.0]), &z).unwrap());
        assert!(constant_difference_check(&nv(&[1.0, -1.0]), &nv(&[0.0, 0.0]), &z).unwrap());
        assert!(constant_difference_check(&nv(&[2.0, 0.0]), &nv(&[1.0, 1.0]), &[0.0, 1.0]).unwrap());
    }

    #[test]
    fn constant_difference_rejects_sum_mismatch() {
        let err = constant_difference_check(&nv(&[1.0, 1.0]), &nv(&[0.0, 0.0]), &[0.0]);
        assert!(matches!(err, Err(Error::SumMismatch { .. })));
    }

    #[test]
    fn constant_difference_value_matches_expansion() {
        // f(z) = Σu² − Σw² when the sums agree; u = (1,−1), w = 0 gives 2.
        let u = nv(&[1.0, -1.0]);
        let w = nv(&[0.0, 0.0]);
        for z in [0.0, 5.0, -3.0] {
            let f: f64 = u.values().iter().map(|v| (v - z).powi(2)).sum::<f64>()
                - w.values().iter().map(|v| (v - z).powi(2)).sum::<f64>();
            assert!((f - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_decrease_examples() {
        let id = WeightMatrix::identity(3);
        let r = variance_decrease(&nv(&[1.0, 5.0, -2.0]), &id).unwrap();
        assert_eq!((r.lhs, r.rhs), (0.0, 0.0));

        let half = WeightMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]], 0.5).unwrap();
        let r = variance_decrease(&nv(&[1.0, -1.0]), &half).unwrap();
        assert_eq!(r.lhs, 2.0);
        assert_eq!(r.rhs, 2.0);

        let c = crate::weights::circulant_matrix(3, 0.25).unwrap();
        let r = variance_decrease(&nv(&[1.0, 0.0, 0.0]), &c).unwrap();
        assert!(r.residual <= 1e-12, "{r:?}");
    }

    #[test]
    fn variance_decrease_rejects_row_stochastic_only() {
        let a = WeightMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.5, 0.5]], 0.5).unwrap();
        assert!(variance_decrease(&nv(&[1.0, 0.0]), &a).is_err());
    }

    #[test]
    fn cut_weight_sum_examples() {
        let id = WeightMatrix::identity(4).gram();
        for cut in CutPartition::enumerate(4) {
            assert_eq!(cut_weight_sum(&id, &cut), 0.0);
        }
        let cut = CutPartition::new(&[0], 2).unwrap();
        let half = WeightMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]], 0.5).unwrap();
        assert_eq!(cut_weight_sum(&half.gram(), &cut), 0.5);

        let third =
            WeightMatrix::from_rows(vec![vec![2.0 / 3.0, 1.0 / 3.0], vec![1.0 / 3.0, 2.0 / 3.0]], 1.0 / 3.0).unwrap();
        let s = cut_weight_sum(&third.gram(), &cut);
        assert!((s - 4.0 / 9.0).abs() < 1e-15);
        assert!(s >= 1.0 / 6.0);
    }
}
