//! Breadth-first walk of the feature-subset lattice with zero-outlier
//! pruning, driven by a hand-written executor.
//!
//! ```text
//! cargo run --example lattice_pruning
//! ```

use piks::aggregate::FeatureSubset;
use piks::lattice::{descendants, traverse, Execution, NodeExecutor, NodeStatus};

/// Every node reports one outlier except `abc`, which reports none.
struct Scripted;

impl NodeExecutor for Scripted {
    type Detail = ();

    fn execute(&self, s: FeatureSubset) -> piks::Result<Execution<()>> {
        let outliers = if s.num() == 0b00111 { vec![] } else { vec![vec![s.to_string()]] };
        Ok(Execution {
            series_count: 100,
            qualified: true,
            outliers,
            detail: (),
        })
    }
}

fn main() -> piks::Result<()> {
    let names: Vec<String> = "abcde".chars().map(String::from).collect();
    let pruned: Vec<String> = descendants(0b00111, 5)
        .into_iter()
        .map(|d| FeatureSubset::new(d, 5).unwrap().to_string())
        .collect();
    println!("descendants of abc: {}", pruned.join(", "));

    for pruning in [false, true] {
        let t = traverse(&names, pruning, &Scripted)?;
        println!(
            "pruning {pruning}: {} executed, {} pruned of {}",
            t.stats.executed, t.stats.pruned, t.stats.total
        );
        for node in t.nodes.iter().filter(|n| n.status == NodeStatus::Pruned) {
            let by = FeatureSubset::new(node.pruned_by.unwrap(), 5)?;
            println!("  {} skipped (zero outliers at {by})", node.subset(5));
        }
    }
    Ok(())
}
