mod common;

use common::*;
use obliq::alternating::{hard_leaf_update, leaf_counts};
use obliq::axis::{best_axis_split, grow_axis_aligned};
use obliq::em::{e_step, fit_em, log_likelihood, m_step_leaves, split_objective, PosteriorMatrix};
use obliq::entropy::{information_gain, weighted_leaf_entropy};
use obliq::structure::{partition_indices, GrowthConfig};
use obliq::testutil::{balanced_tree, random_samples, random_stump, random_tree};
use obliq::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn path_probabilities_match_enumeration() {
    let mut r = rng(1);
    for _ in 0..50 {
        let t = balanced_tree(&mut r, 4, 3, 3);
        assert_eq!(t.num_leaves(), 8);
        let x: Vec<f64> = (0..4).map(|_| r.gen_range(-2.0..2.0)).collect();
        let gamma = r.gen_range(0.1..5.0);
        let mu = path_probabilities(&t, &x, Steepness::soft(gamma).unwrap()).unwrap();
        for (a, b) in mu.iter().zip(brute_mu(&t, &x, Some(gamma))) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn predict_proba_matches_double_sum() {
    let mut r = rng(2);
    for _ in 0..50 {
        let t = balanced_tree(&mut r, 3, 4, 4);
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(-2.0..2.0)).collect();
        let p = predict_proba(&t, &x, Steepness::soft(1.5).unwrap()).unwrap();
        for (a, b) in p.iter().zip(brute_proba(&t, &x, Some(1.5))) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn path_sets_match_recursive_walk() {
    let mut r = rng(3);
    for _ in 0..100 {
        let t = random_tree(&mut r, 2, 2, 10);
        let sets = t.compute_path_sets().unwrap();
        let paths = walk_paths(&t);
        assert_eq!(paths.len(), t.num_leaves());
        for (l, (leaf, path)) in paths.iter().enumerate() {
            assert_eq!(t.leaf_node(l), *leaf);
            let right: Vec<usize> = path.iter().filter(|s| s.1).map(|s| s.0).collect();
            let left: Vec<usize> = path.iter().filter(|s| !s.1).map(|s| s.0).collect();
            assert_eq!(sets.right_ancestors(l), right.as_slice());
            assert_eq!(sets.left_ancestors(l), left.as_slice());
            assert_eq!(path.len(), t.node_depth(*leaf));
        }
    }
}

#[test]
fn routing_agrees_with_steep_sigmoid() {
    let mut r = rng(4);
    let mut checked = 0;
    while checked < 1000 {
        let t = random_tree(&mut r, 3, 2, 5);
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(-3.0..3.0)).collect();
        let near_zero = (0..t.num_splits()).any(|i| dot1(t.split_beta(i), &x).abs() < 1e-12);
        if near_zero {
            continue;
        }
        let mu = path_probabilities(&t, &x, Steepness::soft(1e6).unwrap()).unwrap();
        let leaf = route_deterministic(&t, &x).unwrap();
        assert_eq!(obliq::inference::argmax(&mu), leaf);
        assert_eq!(leaf, brute_route(&t, &x));
        let hard = path_probabilities(&t, &x, Steepness::Hard).unwrap();
        assert_eq!(hard[leaf], 1.0);
        assert_eq!(hard.iter().sum::<f64>(), 1.0);
        checked += 1;
    }
}

#[test]
fn accuracy_matches_scalar_loop() {
    let mut r = rng(5);
    for _ in 0..20 {
        let t = random_tree(&mut r, 3, 3, 4);
        let data = random_samples(&mut r, 200, 3, 3);
        let correct = (0..data.len())
            .filter(|&n| {
                let pi = t.leaf_pi(brute_route(&t, data.row(n)));
                let mut best = 0;
                for k in 1..pi.len() {
                    if pi[k] > pi[best] {
                        best = k;
                    }
                }
                best == data.label(n)
            })
            .count();
        assert_eq!(accuracy(&t, &data).unwrap(), correct as f64 / data.len() as f64);
    }
}

#[test]
fn log_likelihood_matches_scalar_oracle() {
    let mut r = rng(6);
    for _ in 0..20 {
        let t = random_tree(&mut r, 4, 3, 4);
        let data = random_samples(&mut r, 150, 4, 3);
        let ll = log_likelihood(&t, &data, Steepness::soft(2.0).unwrap()).unwrap();
        assert!((ll.value - brute_log_likelihood(&t, &data, Some(2.0))).abs() < 1e-10);
    }
}

#[test]
fn split_objective_matches_double_loop() {
    let mut r = rng(7);
    for _ in 0..20 {
        let t = random_tree(&mut r, 4, 3, 4);
        let data = random_samples(&mut r, 60, 4, 3);
        let h = e_step(&t, &data, Steepness::soft(1.3).unwrap()).unwrap();
        let mut oracle = 0.0;
        for n in 0..data.len() {
            let mu = brute_mu(&t, data.row(n), Some(1.3));
            for l in 0..mu.len() {
                oracle += h.get(n, l) * mu[l].ln();
            }
        }
        let got = split_objective(&t, &h, &data, Steepness::soft(1.3).unwrap(), None).unwrap();
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
    }
}

#[test]
fn e_step_rows_match_bayes_rule() {
    let mut r = rng(8);
    let t = random_tree(&mut r, 3, 3, 4);
    let data = random_samples(&mut r, 80, 3, 3);
    let h = e_step(&t, &data, Steepness::soft(0.8).unwrap()).unwrap();
    for n in 0..data.len() {
        let mu = brute_mu(&t, data.row(n), Some(0.8));
        let w: Vec<f64> = (0..mu.len()).map(|l| t.leaf_pi(l)[data.label(n)] * mu[l]).collect();
        let z: f64 = w.iter().sum();
        for l in 0..mu.len() {
            assert!((h.get(n, l) - w[l] / z).abs() < 1e-12);
        }
    }
}

#[test]
fn one_hot_m_step_reproduces_hard_counts() {
    let mut r = rng(9);
    for _ in 0..20 {
        let t = random_tree(&mut r, 3, 4, 4);
        let data = random_samples(&mut r, 120, 3, 4);
        let rows: Vec<Vec<f64>> = (0..data.len())
            .map(|n| {
                let mut row = vec![0.0; t.num_leaves()];
                row[brute_route(&t, data.row(n))] = 1.0;
                row
            })
            .collect();
        let h = PosteriorMatrix::from_rows(&rows).unwrap();
        let counts = brute_hard_counts(&t, &data);
        let pis = m_step_leaves(&h, data.labels(), &t.leaf_pis()).unwrap();
        for (l, row) in counts.iter().enumerate() {
            let total: usize = row.iter().sum();
            if total == 0 {
                assert_eq!(pis[l], t.leaf_pi(l), "empty leaf keeps its distribution");
            } else {
                for k in 0..row.len() {
                    assert_eq!(pis[l][k], row[k] as f64 / total as f64);
                }
            }
        }
    }
}

#[test]
fn hard_counts_match_scalar_routing() {
    let mut r = rng(10);
    for _ in 0..20 {
        let t = random_tree(&mut r, 3, 3, 5);
        let data = random_samples(&mut r, 300, 3, 3);
        let counts = leaf_counts(&t, &data).unwrap();
        let oracle = brute_hard_counts(&t, &data);
        for l in 0..t.num_leaves() {
            for k in 0..3 {
                assert_eq!(counts.count(l, k) as usize, oracle[l][k]);
            }
        }
        assert_eq!(counts.totals().iter().sum::<u64>(), 300);
        assert_eq!(hard_leaf_update(&t, &data).unwrap(), counts_to_pis(&oracle));
    }
}

#[test]
fn hard_likelihood_is_negative_weighted_entropy() {
    let mut r = rng(11);
    for _ in 0..100 {
        let mut t = random_tree(&mut r, 3, 3, 5);
        let data = random_samples(&mut r, 200, 3, 3);
        let counts = brute_hard_counts(&t, &data);
        t.set_leaf_pis(counts_to_pis(&counts)).unwrap();
        let ll = log_likelihood(&t, &data, Steepness::Hard).unwrap().value / data.len() as f64;
        let oracle: f64 = counts
            .iter()
            .map(|row| row.iter().sum::<usize>() as f64 / data.len() as f64 * brute_entropy(row))
            .sum();
        assert!((ll + oracle).abs() < 1e-9, "{ll} vs {oracle}");
        assert!((weighted_leaf_entropy(&t, &data).unwrap() - oracle).abs() < 1e-12);
    }
}

#[test]
fn stump_likelihood_gain_is_information_gain() {
    let mut r = rng(12);
    for _ in 0..50 {
        let data = random_samples(&mut r, 100, 2, 3);
        let mut stump = random_stump(&mut r, 2, 3);
        let counts = brute_hard_counts(&stump, &data);
        stump.set_leaf_pis(counts_to_pis(&counts)).unwrap();
        let parent = data.class_counts();
        let root = Tree::single_leaf(2, counts_to_pis(std::slice::from_ref(&parent)).remove(0)).unwrap();
        let n = data.len() as f64;
        let before = log_likelihood(&root, &data, Steepness::Hard).unwrap().value;
        let after = log_likelihood(&stump, &data, Steepness::Hard).unwrap().value;
        let gain = information_gain(&parent, &counts[0], &counts[1]).unwrap();
        assert!(((after - before) / n - gain).abs() < 1e-9);
    }
}

#[test]
fn axis_search_matches_brute_force_induction() {
    let mut r = rng(13);
    for _ in 0..20 {
        let n = r.gen_range(10..200);
        let p = r.gen_range(1..=5);
        let k = r.gen_range(2..=4);
        // Coarse values create ties and repeated thresholds.
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| f64::from(r.gen_range(0..8))).collect())
            .collect();
        let labels = (0..n).map(|_| r.gen_range(0..k)).collect();
        let data = SampleSet::from_rows(&rows, labels, k).unwrap();
        let all: Vec<usize> = (0..n).collect();
        let found = best_axis_split(&data, &all).map(|s| s.gain);
        let oracle = brute_best_axis_gain(&data);
        match (found, oracle) {
            (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12, "{a} vs {b}"),
            (None, None) => {}
            other => panic!("mismatch {other:?}"),
        }
    }
}

#[test]
fn axis_tree_routes_like_thresholds() {
    let mut r = rng(14);
    let data = random_samples(&mut r, 150, 3, 2);
    let t = grow_axis_aligned(&data, 3, 2).unwrap();
    for i in 0..t.num_splits() {
        let beta = t.split_beta(i);
        assert_eq!(beta[..3].iter().filter(|v| **v != 0.0).count(), 1);
    }
    assert!(t.depth() <= 3);
}

#[test]
fn greedy_partitions_are_exhaustive_and_nested() {
    let data = obliq::synthetic::xor_oblique(300, 3).unwrap();
    let growth = GrowthConfig {
        max_depth: Some(3),
        stump: TrainConfig {
            epochs: 10,
            batch_size: 32,
            adam: AdamConfig {
                alpha: 0.01,
                ..Default::default()
            },
            ..Default::default()
        },
        ..Default::default()
    };
    let (t, trace) = obliq::grow_greedy(&data, &growth).unwrap();
    let mut seen = vec![0; data.len()];
    for l in 0..t.num_leaves() {
        for i in partition_indices(&data, &t, t.leaf_node(l)).unwrap() {
            seen[i] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1));
    // Each expanded node's recorded subset size equals the sum over its children.
    for e in trace.events.iter().filter(|e| e.frozen.is_none()) {
        if let Node::Split { left, right, .. } = &t.nodes()[e.leaf] {
            let size = |id: NodeId| trace.events.iter().find(|c| c.leaf == id).map(|c| c.subset_size);
            if let (Some(a), Some(b)) = (size(*left), size(*right)) {
                assert_eq!(a + b, e.subset_size);
            }
        }
    }
}

#[test]
fn guarded_full_batch_em_is_monotone() {
    let data = obliq::synthetic::xor_oblique(400, 0).unwrap();
    let mut t = balanced_tree(&mut rng(15), 2, 2, 2);
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 400,
        gamma0: 5.0,
        gamma_increment: 0.0,
        adam: AdamConfig {
            alpha: 0.05,
            ..Default::default()
        },
        guarded: true,
        ..Default::default()
    };
    let before = log_likelihood(&t, &data, Steepness::soft(5.0).unwrap()).unwrap().value;
    let report = fit_em(&mut t, &data, &cfg).unwrap();
    let mut prev = before;
    for e in &report.epochs {
        assert!(e.log_likelihood >= prev - 1e-8, "{} < {prev}", e.log_likelihood);
        prev = e.log_likelihood;
    }
}

#[test]
fn adam_solves_quadratic() {
    let mut r = rng(16);
    for _ in 0..20 {
        let dim = r.gen_range(1..6);
        let mut w: Vec<f64> = obliq::tree::unit_sphere_sample(dim, &mut r)
            .into_iter()
            .map(|v| v * r.gen_range(0.0..1.0))
            .collect();
        // The default step size cannot cover a unit distance in 2000 steps.
        let cfg = AdamConfig {
            alpha: 0.005,
            ..Default::default()
        };
        let mut state = AdamState::new(dim, cfg).unwrap();
        for _ in 0..2000 {
            let g: Vec<f64> = w.iter().map(|v| 2.0 * v).collect();
            state.step(&mut w, &g).unwrap();
        }
        assert!(w.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-3);
    }
}
