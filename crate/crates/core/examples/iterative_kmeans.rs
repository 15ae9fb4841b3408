//! Peel small clusters off repeatedly until none remain.
//!
//! ```text
//! cargo run --example iterative_kmeans
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use piks::synth::gaussian_blobs;
use piks::{iterative_kmeans, KMeansParams};

fn main() -> piks::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let centers = vec![vec![0.0, 0.0], vec![10.0, 0.0], vec![5.0, 8.7]];
    let mut points = gaussian_blobs(&centers, 25, 0.5, &mut rng);
    points.push(vec![40.0, 40.0]);
    points.push(vec![-35.0, 20.0]);

    let params = KMeansParams {
        k: 3,
        seed: 1,
        ..Default::default()
    };
    let result = iterative_kmeans(&points, &params)?;
    for (i, round) in result.rounds.iter().enumerate() {
        println!("iteration {}: {} points, removed {:?}", i + 1, round.members.len(), round.removed);
    }
    println!("terminated by {:?} after {} iterations", result.terminated_by, result.iterations_run);
    for o in &result.outliers {
        println!("  outlier {} {:?} (iteration {})", o.id, points[o.id], o.iteration);
    }
    if let Some(a) = &result.final_assignment {
        println!("final cluster sizes {:?}, inertia {:.3}", a.cluster_sizes(), a.inertia);
    }
    Ok(())
}
