use std::collections::HashMap;

use proptest::prelude::*;

use piks::aggregate::FeatureSubset;
use piks::baselines::{isolation_forest_scores, lof_scores, IsolationForestParams, LofParams};
use piks::cluster::Termination;
use piks::error::Result;
use piks::lattice::{traverse, Execution, NodeExecutor, NodeStatus};
use piks::{iterative_kmeans, KMeansParams};

/// Lattice executor with a fixed (qualified, outlier count) per node.
#[derive(Debug, Clone)]
struct Table(HashMap<u32, (bool, usize)>);

impl NodeExecutor for Table {
    type Detail = ();
    fn execute(&self, s: FeatureSubset) -> Result<Execution<()>> {
        let (qualified, count) = self.0[&s.num()];
        Ok(Execution {
            series_count: if qualified { 100 } else { 1 },
            qualified,
            outliers: (0..count).map(|i| vec![i.to_string()]).collect(),
            detail: (),
        })
    }
}

fn lattice_table() -> impl Strategy<Value = (usize, Table)> {
    (1usize..=6).prop_flat_map(|n| {
        proptest::collection::vec((proptest::bool::weighted(0.8), 0usize..3), (1 << n) - 1)
            .prop_map(move |v| (n, Table(v.into_iter().enumerate().map(|(i, x)| (i as u32 + 1, x)).collect())))
    })
}

fn points(max_n: usize, max_d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_d).prop_flat_map(move |d| proptest::collection::vec(proptest::collection::vec(-100.0..100.0f64, d), 2..max_n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pruning_is_sound((n, table) in lattice_table()) {
        let names: Vec<String> = (0..n).map(|i| format!("f{i}")).collect();
        let on = traverse(&names, true, &table).unwrap();
        let off = traverse(&names, false, &table).unwrap();
        let zero = |num: u32| {
            let (q, c) = table.0[&num];
            q && c == 0
        };
        prop_assert_eq!(on.stats.executed + on.stats.pruned + on.stats.unqualified, (1 << n) - 1);
        prop_assert_eq!(off.stats.pruned, 0);
        for node in &on.nodes {
            let s = node.subset(n);
            match node.status {
                NodeStatus::Pruned => {
                    let by = node.pruned_by.unwrap();
                    prop_assert!(zero(by) && (by & node.num) == by && by != node.num);
                    prop_assert_eq!(on.node(by).unwrap().status, NodeStatus::Executed);
                }
                _ => {
                    // no visited strict subset with zero outliers
                    for other in on.executed() {
                        let o = other.subset(n);
                        prop_assert!(!(o.is_subset_of(s) && o != s && zero(other.num)));
                    }
                    prop_assert_eq!(&node.outliers, &off.node(node.num).unwrap().outliers);
                }
            }
        }
    }

    #[test]
    fn outliers_and_survivors_partition_the_input(pts in points(60, 4), k in 1usize..6, seed in any::<u64>()) {
        let params = KMeansParams { k, seed, ..Default::default() };
        let r = iterative_kmeans(&pts, &params).unwrap();
        let mut all: Vec<usize> = r.outlier_ids();
        all.extend(&r.survivors);
        all.sort();
        prop_assert_eq!(all, (0..pts.len()).collect::<Vec<_>>());
        prop_assert_eq!(r.iterations_run, r.rounds.len());
        for round in &r.rounds {
            let mut sizes = HashMap::new();
            for &l in &round.labels {
                *sizes.entry(l).or_insert(0usize) += 1;
            }
            for (&id, &l) in round.members.iter().zip(&round.labels) {
                prop_assert_eq!(round.removed.contains(&id), sizes[&l] <= params.small_cluster_max);
            }
        }
        match r.terminated_by {
            Termination::NoSmallClusters => prop_assert!(r.rounds.last().unwrap().removed.is_empty()),
            Termination::TooFewPoints => prop_assert!(r.survivors.len() < k),
            Termination::MaxIterations => prop_assert_eq!(r.iterations_run, params.max_outer_iterations),
        }
    }

    #[test]
    fn lof_is_similarity_invariant(pts in points(30, 3), shift in -50.0..50.0f64, scale in 0.1..10.0f64) {
        let k = (pts.len() - 1).min(5);
        let params = LofParams { k_neighbors: k };
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|x| x * scale + shift).collect()).collect();
        let a = lof_scores(&pts, &params).unwrap();
        let b = lof_scores(&moved, &params).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{} vs {}", x, y);
        }
    }

    #[test]
    fn iforest_is_seeded_and_bounded(pts in points(80, 5), seed in any::<u64>()) {
        let params = IsolationForestParams { n_trees: 20, seed, ..Default::default() };
        let a = isolation_forest_scores(&pts, &params).unwrap();
        prop_assert_eq!(&a, &isolation_forest_scores(&pts, &params).unwrap());
        prop_assert!(a.iter().all(|&s| s > 0.0 && s < 1.0));
    }
}
