//! Isolation forest, LOF and feature bagging next to iterative k-means on
//! the same matrix.
//!
//! ```text
//! cargo run --example baselines
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use piks::baselines::{compare_detectors, isolation_forest_scores, lof_scores, DetectorParams, LofParams, Method};
use piks::synth::gaussian_blobs;
use piks::KMeansParams;

fn main() -> piks::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let centers = vec![vec![0.0; 5], vec![20.0, 0.0, 0.0, 0.0, 0.0]];
    let mut points = gaussian_blobs(&centers, 40, 1.0, &mut rng);
    points.push(vec![10.0, 15.0, -12.0, 8.0, 0.0]);
    let keys: Vec<Vec<String>> = (0..points.len()).map(|i| vec![format!("series {i}")]).collect();

    let iforest = isolation_forest_scores(&points, &Default::default())?;
    let lof = lof_scores(&points, &LofParams::default())?;
    println!("planted point: iforest {:.3}, LOF {:.2}", iforest[80], lof[80]);

    let params = DetectorParams {
        kmeans: KMeansParams {
            k: 3,
            ..Default::default()
        },
        top_m: Some(3),
        ..Default::default()
    };
    let cmp = compare_detectors(&points, &keys, &params)?;
    for m in Method::ALL {
        let top: Vec<&str> = cmp.outliers(m).iter().map(|&i| cmp.rows[i].key[0].as_str()).collect();
        println!("{m}: {}", top.join(", "));
    }
    for (a, b, j) in &cmp.jaccard {
        let j = j.map(|v| format!("{v:.2}")).unwrap_or_else(|| "undefined".into());
        println!("jaccard({a}, {b}) = {j}");
    }
    Ok(())
}
