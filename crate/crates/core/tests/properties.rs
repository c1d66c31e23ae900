use avgnet::balancing::{balancing_round, BALANCING_ETA};
use avgnet::engine::{run, BirkhoffSequence, EqualNeighborSequence, RunConfig};
use avgnet::graph::{
    check_b_connectivity, check_cut_assumption, cut_crossing_holds, union_graph, GraphSnapshot, RandomTopology,
    TopologySequence,
};
use avgnet::lyapunov::{
    cut_weight_sum, min_anchored_variance, sample_variance, variance_decrease, CutPartition, NodeVector,
};
use avgnet::quantized::{quantized_step, QuantizedVector};
use avgnet::weights::{
    circulant_lambda2, circulant_matrix, gram_weights, random_birkhoff_matrix, random_row_stochastic,
    validate_assumption_1, WeightMatrix,
};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn sized_values(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    (2..=max_n).prop_flat_map(values)
}

/// Values drawn from a handful of levels, so ties are common.
fn tied_values(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u8..4, n).prop_map(|v| v.into_iter().map(f64::from).collect())
}

fn nv(v: Vec<f64>) -> NodeVector {
    NodeVector::new(v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn b_connected_windows_satisfy_cut_crossing(
        n in 2usize..12,
        window in 1usize..4,
        p in 0.0f64..0.4,
        seed in any::<u64>(),
        directed in any::<bool>(),
        x in values(12),
    ) {
        let seq = if directed {
            RandomTopology::directed(n, window, p, seed).unwrap()
        } else {
            RandomTopology::undirected(n, window, p, seed).unwrap()
        };
        let x = nv(x[..n].to_vec());
        for k in 0..3 {
            let union = union_graph(&seq, k * window, (k + 1) * window - 1).unwrap();
            if avgnet::graph::is_strongly_connected(&union) {
                prop_assert!(check_cut_assumption(&seq, k, &x).unwrap());
            }
        }
        prop_assert!(check_b_connectivity(&seq, 3).unwrap());
    }

    #[test]
    fn cut_crossing_ignores_order_among_ties(
        x in tied_values(8),
        pairs in prop::collection::vec((0usize..8, 0usize..8), 0..10),
        perm_seed in any::<u64>(),
    ) {
        // relabel nodes by a permutation; the answer must not change
        let n = x.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = perm_seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let pairs: Vec<_> = pairs.into_iter().filter(|(a, b)| a != b).collect();
        let g = GraphSnapshot::undirected(n, pairs.iter().copied()).unwrap();
        let g_perm = GraphSnapshot::undirected(n, pairs.iter().map(|&(a, b)| (perm[a], perm[b]))).unwrap();
        let mut x_perm = vec![0.0; n];
        for (i, &v) in x.iter().enumerate() {
            x_perm[perm[i]] = v;
        }
        prop_assert_eq!(cut_crossing_holds(&nv(x), &g), cut_crossing_holds(&nv(x_perm), &g_perm));
    }

    #[test]
    fn window_union_is_monotone(n in 2usize..10, p in 0.0f64..0.5, seed in any::<u64>(), len in 1usize..6) {
        let seq = RandomTopology::directed(n, 1, p, seed).unwrap();
        let mut prev = union_graph(&seq, 0, 0).unwrap();
        for end in 1..len {
            let next = union_graph(&seq, 0, end).unwrap();
            prop_assert!(prev.edges().all(|(j, i)| next.contains(j, i)));
            prev = next;
        }
    }

    #[test]
    fn gram_decomposition_holds(n in 2usize..12, m in 1usize..6, seed in any::<u64>()) {
        let a = random_birkhoff_matrix(n, m, 0.5 / m as f64, seed).unwrap();
        let w = gram_weights(&a);
        // AᵀA = I − Σ_{i<j} w_ij (e_i − e_j)(e_i − e_j)ᵀ, entrywise
        for i in 0..n {
            for j in 0..n {
                let ata: f64 = (0..n).map(|r| a.get(r, i) * a.get(r, j)).sum();
                let rhs = if i == j {
                    1.0 - (0..n).filter(|&l| l != i).map(|l| w.get(i, l)).sum::<f64>()
                } else {
                    w.get(i, j)
                };
                prop_assert!((ata - rhs).abs() <= 1e-10, "({}, {}): {} vs {}", i, j, ata, rhs);
            }
        }
    }

    #[test]
    fn gram_positive_entries_at_least_eta_squared(n in 2usize..10, eta_scale in 0.1f64..1.0, p in 0.0f64..1.0, seed in any::<u64>()) {
        let eta = eta_scale / n as f64;
        let a = random_row_stochastic(n, eta, p, seed).unwrap();
        prop_assert!(a.is_row_stochastic());
        let w = gram_weights(&a);
        for i in 0..n {
            for j in 0..n {
                let v = w.get(i, j);
                prop_assert!(v == 0.0 || v >= eta * eta - 1e-15, "w[{}][{}] = {}", i, j, v);
            }
        }
    }

    #[test]
    fn circulant_passes_assumption_1(n in 3usize..40, eta in 0.01f64..0.49) {
        let a = circulant_matrix(n, eta).unwrap();
        prop_assert!(validate_assumption_1(&a).passed());
        prop_assert_eq!(a.eta(), eta.min(1.0 - 2.0 * eta));
    }

    #[test]
    fn doubly_stochastic_step_preserves_mean_and_shrinks_variance(
        x in sized_values(14),
        m in 1usize..5,
        seed in any::<u64>(),
    ) {
        let n = x.len();
        let a = random_birkhoff_matrix(n, m, 0.5 / m as f64, seed).unwrap();
        let x = nv(x);
        let y = nv(a.mul_vec(x.values()));
        prop_assert!((x.mean() - y.mean()).abs() <= 1e-12);
        prop_assert!(sample_variance(&y) <= sample_variance(&x) + 1e-12);
        let d = variance_decrease(&x, &a).unwrap();
        prop_assert!(d.residual.abs() <= 1e-9 * sample_variance(&x).max(1.0));
    }

    #[test]
    fn sandwich(x in sized_values(40)) {
        let x = nv(x);
        let v = sample_variance(&x);
        let vu = min_anchored_variance(&x);
        prop_assert!(v <= vu * (1.0 + 1e-12) + 1e-300);
        prop_assert!(vu <= 4.0 * x.len() as f64 * v * (1.0 + 1e-12));
    }

    #[test]
    fn cut_bound_exhaustive(n in 2usize..=7, eta_scale in 0.1f64..1.0, p in 0.0f64..1.0, seed in any::<u64>()) {
        let eta = eta_scale / n as f64;
        let a = random_row_stochastic(n, eta, p, seed).unwrap();
        let eta = a.min_positive_entry().unwrap();
        let w = gram_weights(&a);
        for cut in CutPartition::enumerate(n) {
            let s = cut_weight_sum(&w, &cut);
            prop_assert!(s == 0.0 || s >= eta / 2.0 - 1e-12);
        }
    }

    #[test]
    fn balancing_round_invariants(
        n in 2usize..14,
        p in 0.0f64..0.6,
        seed in any::<u64>(),
        x in values(14),
        tied in tied_values(14),
        use_ties in any::<bool>(),
    ) {
        let g = RandomTopology::undirected(n, 1, p, seed).unwrap().snapshot(0).unwrap();
        let x = nv(if use_ties { tied[..n].to_vec() } else { x[..n].to_vec() });
        let out = balancing_round(&x, &g).unwrap();
        let a = &out.implied_matrix;

        prop_assert!(a.is_doubly_stochastic());
        prop_assert!(validate_assumption_1(a).passed());
        prop_assert_eq!(a.eta(), BALANCING_ETA);
        for i in 0..n {
            for j in 0..n {
                let v = a.get(i, j);
                prop_assert!(v == 0.0 || v >= BALANCING_ETA - 1e-12);
                // rows supported on the closed neighbourhood
                prop_assert!(v == 0.0 || g.contains(j, i));
            }
        }
        let via_matrix = a.mul_vec(x.values());
        for (u, v) in via_matrix.iter().zip(out.new_values.values()) {
            prop_assert!((u - v).abs() <= 1e-12);
        }
        let before: f64 = x.values().iter().sum();
        let after: f64 = out.new_values.values().iter().sum();
        prop_assert!((before - after).abs() <= 1e-9);
    }

    #[test]
    fn balancing_is_three_hop_local(
        n in 6usize..16,
        x in values(16),
        far in values(16),
        target_frac in 0.0f64..1.0,
    ) {
        // On a path, a node's update depends only on nodes within distance 3.
        let g = GraphSnapshot::path(n);
        let target = ((n - 1) as f64 * target_frac).round() as usize;
        let x = x[..n].to_vec();
        let mut perturbed = x.clone();
        for i in 0..n {
            if i.abs_diff(target) > 3 {
                perturbed[i] = far[i];
            }
        }
        let a = balancing_round(&nv(x), &g).unwrap();
        let b = balancing_round(&nv(perturbed), &g).unwrap();
        prop_assert_eq!(a.new_values.values()[target], b.new_values.values()[target]);

        // removing edges beyond distance 3 changes nothing either
        let lo = target.saturating_sub(3);
        let hi = (target + 3).min(n - 1);
        let trimmed = GraphSnapshot::undirected(n, (lo..hi).map(|i| (i, i + 1))).unwrap();
        let c = balancing_round(&b.new_values.clone(), &g).unwrap();
        let d = balancing_round(&b.new_values, &trimmed).unwrap();
        prop_assert_eq!(c.new_values.values()[target], d.new_values.values()[target]);
    }

    #[test]
    fn quantized_step_invariants(
        n in 2usize..16,
        q in 1i64..1000,
        nums in prop::collection::vec(-2000i64..2000, 16),
        m in 1usize..5,
        seed in any::<u64>(),
    ) {
        let a = random_birkhoff_matrix(n, m, 0.5 / m as f64, seed).unwrap();
        let x = QuantizedVector::new(nums[..n].to_vec(), q).unwrap();
        let y = quantized_step(&x, &a).unwrap();
        prop_assert!(y.min_anchored_variance() <= x.min_anchored_variance() * (1.0 + 1e-12) + 1e-12);
        let drop = x.mean() - y.mean();
        prop_assert!(drop >= -1e-12 && drop < 1.0 / q as f64);
        prop_assert!(y.min_numerator() >= x.min_numerator());
        prop_assert!(y.max_numerator() <= x.max_numerator());
        let yv = y.values();
        let v = sample_variance(&yv);
        let vu = y.min_anchored_variance();
        prop_assert!(v <= vu * (1.0 + 1e-12) + 1e-15 && vu <= 4.0 * n as f64 * v * (1.0 + 1e-12));
    }

    #[test]
    fn quantized_shadows_unquantized(
        n in 2usize..10,
        q in 1i64..10_000,
        x0 in values(10),
        seed in any::<u64>(),
        rounds in 1usize..30,
    ) {
        let seq = BirkhoffSequence::new(n, 3, 0.1, seed, 1).unwrap();
        let x0 = nv(x0[..n].to_vec());
        let mut hat = QuantizedVector::floor_of(&x0, q).unwrap();
        let mut x = hat.values();
        for t in 1..=rounds {
            let a = avgnet::engine::MatrixSequence::matrix(&seq, t - 1).unwrap();
            x = nv(a.mul_vec(x.values()));
            hat = quantized_step(&hat, &a).unwrap();
            let slack = t as f64 / q as f64;
            for (xi, hi) in x.values().iter().zip(hat.values().values()) {
                prop_assert!(*xi >= hi - 1e-9);
                prop_assert!(*hi >= xi - slack - 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn circulant_lambda2_matches_eigensolver(n in 3usize..=200, eta in 0.01f64..0.49) {
        let a = circulant_matrix(n, eta).unwrap();
        let m = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let mut eig: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let lambda2 = circulant_lambda2(n, eta);
        prop_assert!((eig[0] - 1.0).abs() <= 1e-9);
        prop_assert!((eig[1] - lambda2).abs() <= 1e-9, "{} vs {}", eig[1], lambda2);

        // by magnitude it is second unless the frequency ⌊n/2⌋ eigenvalue is more negative
        let lowest = 1.0 - 2.0 * eta + 2.0 * eta * (2.0 * std::f64::consts::PI * (n / 2) as f64 / n as f64).cos();
        prop_assert!((eig[n - 1] - lowest).abs() <= 1e-9, "{} vs {}", eig[n - 1], lowest);
        let mut mags: Vec<f64> = eig.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let expected = lambda2.abs().max(lowest.abs());
        prop_assert!((mags[1] - expected).abs() <= 1e-9, "{} vs {}", mags[1], expected);
    }

    #[test]
    fn compliant_runs_meet_window_bounds(
        n in 3usize..16,
        window in 1usize..4,
        p in 0.0f64..0.3,
        seed in any::<u64>(),
        x0 in values(16),
    ) {
        let topo = RandomTopology::undirected(n, window, p, seed).unwrap();
        let seq = EqualNeighborSequence::new(topo, 1.0 / n as f64).unwrap();
        let report = run(&nv(x0[..n].to_vec()), &seq, &RunConfig::new(1e-6, 40 * window).unwrap()).unwrap();
        let mut prev = f64::INFINITY;
        for rec in &report.trajectory {
            prop_assert!(rec.variance <= prev + 1e-12);
            prop_assert!((rec.mean - report.initial_mean).abs() <= 1e-9);
            prev = rec.variance;
        }
        for w in &report.windows {
            prop_assert!(w.compliant());
            prop_assert!(w.variance_start - w.variance_end >= w.eta / 2.0 * w.gap_energy - 1e-10);
            if let Some(r) = w.relative_variance_decrease() {
                prop_assert!(r >= w.eta / (2.0 * (n * n) as f64) - 1e-12);
            }
        }
    }
}

#[test]
fn identity_is_a_fixed_point_of_the_quantized_step() {
    let x = QuantizedVector::new(vec![4, -7, 0, 11], 6).unwrap();
    assert_eq!(quantized_step(&x, &WeightMatrix::identity(4)).unwrap(), x);
}
