//! Lloyd's k-means with k-means++ seeding, and iterative small-cluster
//! removal built on top of it.
//!
//! All randomness comes from [`ChaCha8Rng`] seeded from
//! [`KMeansParams::seed`], so a run is reproducible across platforms and
//! thread counts. Distance is squared Euclidean; nearest-centroid ties go to
//! the lowest centroid index.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansParams {
    pub k: usize,
    /// Clusters with at most this many members are peeled off as outliers.
    pub small_cluster_max: usize,
    pub max_outer_iterations: usize,
    pub lloyd_max_iterations: usize,
    /// Relative inertia change below which Lloyd iterations stop.
    pub convergence_tol: f64,
    /// Independent k-means++ restarts; the lowest-inertia run is kept.
    pub n_init: usize,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            k: 8,
            small_cluster_max: 2,
            max_outer_iterations: 10,
            lloyd_max_iterations: 300,
            convergence_tol: 1e-6,
            n_init: 10,
            seed: 0,
        }
    }
}

impl KMeansParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.small_cluster_max == 0 {
            return Err(Error::InvalidParameter("small_cluster_max must be at least 1".into()));
        }
        if self.max_outer_iterations == 0 || self.lloyd_max_iterations == 0 || self.n_init == 0 {
            return Err(Error::InvalidParameter("iteration limits must be at least 1".into()));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol < 0.0 {
            return Err(Error::InvalidParameter("convergence_tol must be non-negative".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

impl ClusterAssignment {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }
}

/// Inertia after each assignment step of a Lloyd run.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydTrace {
    pub inertia: Vec<f64>,
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_points<P: AsRef<[f64]>>(points: &[P]) -> Result<usize> {
    let Some(first) = points.first() else {
        return Err(Error::EmptyInput);
    };
    let dim = first.as_ref().len();
    for (i, p) in points.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.len(),
                index: i,
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
    }
    Ok(dim)
}

fn kmeans_plus_plus<P: AsRef<[f64]>>(points: &[P], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].as_ref().to_vec()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p.as_ref(), &centroids[0]))
        .collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a candidate")
        } else {
            // Every point coincides with a centroid; take the first unused one.
            chosen.iter().position(|&c| !c).expect("n >= k")
        };
        chosen[next] = true;
        let c = points[next].as_ref().to_vec();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p.as_ref(), &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Labels each point with its nearest centroid; returns per-point squared
/// distances.
fn assign<P: AsRef<[f64]>>(points: &[P], centroids: &[Vec<f64>], labels: &mut [usize]) -> Vec<f64> {
    points
        .iter()
        .zip(labels.iter_mut())
        .map(|(p, label)| {
            let p = p.as_ref();
            let mut best = 0;
            let mut best_d = squared_distance(p, &centroids[0]);
            for (j, c) in centroids.iter().enumerate().skip(1) {
                let d = squared_distance(p, c);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            *label = best;
            best_d
        })
        .collect()
}

fn update<P: AsRef<[f64]>>(points: &[P], labels: &[usize], dists: &[f64], centroids: &mut [Vec<f64>]) {
    let k = centroids.len();
    let dim = centroids[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p.as_ref()) {
            *s += v;
        }
    }
    let mut taken = vec![false; points.len()];
    for j in 0..k {
        if counts[j] > 0 {
            let inv = counts[j] as f64;
            centroids[j] = sums[j].iter().map(|s| s / inv).collect();
        } else {
            // Empty cluster: move it onto the point farthest from its centroid.
            let mut far = None;
            let mut far_d = f64::NEG_INFINITY;
            for (i, &d) in dists.iter().enumerate() {
                if !taken[i] && d > far_d {
                    far = Some(i);
                    far_d = d;
                }
            }
            if let Some(i) = far {
                taken[i] = true;
                centroids[j] = points[i].as_ref().to_vec();
            }
        }
    }
}

pub fn kmeans<P: AsRef<[f64]>>(points: &[P], params: &KMeansParams) -> Result<ClusterAssignment> {
    kmeans_traced(points, params).map(|(a, _)| a)
}

/// [`kmeans`], also returning the inertia after every assignment step of the
/// kept restart.
///
/// Restart `r` draws from stream `r` of a generator seeded with
/// `params.seed`. Equal inertia keeps the earlier restart.
pub fn kmeans_traced<P: AsRef<[f64]>>(
    points: &[P],
    params: &KMeansParams,
) -> Result<(ClusterAssignment, LloydTrace)> {
    params.validate()?;
    check_points(points)?;
    let n = points.len();
    if n < params.k {
        return Err(Error::TooFewPoints {
            points: n,
            required: params.k,
        });
    }
    let mut best: Option<(ClusterAssignment, LloydTrace)> = None;
    for r in 0..params.n_init {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(r as u64);
        let run = lloyd(points, params, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| run.0.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("n_init >= 1"))
}

fn lloyd<P: AsRef<[f64]>>(
    points: &[P],
    params: &KMeansParams,
    rng: &mut ChaCha8Rng,
) -> (ClusterAssignment, LloydTrace) {
    let mut centroids = kmeans_plus_plus(points, params.k, rng);
    let mut labels = vec![0usize; points.len()];
    let mut prev_labels: Option<Vec<usize>> = None;
    let mut trace = Vec::new();

    loop {
        let dists = assign(points, &centroids, &mut labels);
        let inertia: f64 = dists.iter().sum();
        let prev = trace.last().copied();
        trace.push(inertia);

        let stable = prev_labels.as_deref() == Some(labels.as_slice());
        let small_change = prev.is_some_and(|p: f64| {
            p <= 0.0 || (p - inertia) / p <= params.convergence_tol
        });
        if stable || small_change || inertia == 0.0 || trace.len() >= params.lloyd_max_iterations {
            return (
                ClusterAssignment {
                    labels,
                    centroids,
                    inertia,
                },
                LloydTrace { inertia: trace },
            );
        }
        update(points, &labels, &dists, &mut centroids);
        prev_labels = Some(labels.clone());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    NoSmallClusters,
    MaxIterations,
    TooFewPoints,
}

/// One outer iteration: which points were clustered and how.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Round {
    pub members: Vec<usize>,
    pub labels: Vec<usize>,
    pub removed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outlier {
    pub id: usize,
    /// 1-based outer iteration in which the point was removed.
    pub iteration: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterativeKMeansResult {
    pub outliers: Vec<Outlier>,
    pub survivors: Vec<usize>,
    /// Last clustering restricted to the survivors, aligned with `survivors`.
    pub final_assignment: Option<ClusterAssignment>,
    pub iterations_run: usize,
    pub terminated_by: Termination,
    pub rounds: Vec<Round>,
}

impl IterativeKMeansResult {
    pub fn outlier_ids(&self) -> Vec<usize> {
        self.outliers.iter().map(|o| o.id).collect()
    }

    /// Cluster label of `id` in each round it took part in.
    pub fn label_history(&self, id: usize) -> Vec<usize> {
        self.rounds
            .iter()
            .filter_map(|r| r.members.binary_search(&id).ok().map(|pos| r.labels[pos]))
            .collect()
    }

    /// Final cluster of a survivor, or the cluster an outlier was removed from.
    pub fn cluster_of(&self, id: usize) -> Option<usize> {
        self.label_history(id).last().copied()
    }
}

/// Repeatedly clusters, removing every cluster with at most
/// `small_cluster_max` members, until none remain, the iteration limit is
/// hit, or fewer than `k` points survive.
pub fn iterative_kmeans<P: AsRef<[f64]>>(
    points: &[P],
    params: &KMeansParams,
) -> Result<IterativeKMeansResult> {
    params.validate()?;
    check_points(points)?;

    let mut survivors: Vec<usize> = (0..points.len()).collect();
    let mut outliers = Vec::new();
    let mut rounds: Vec<Round> = Vec::new();
    let mut last: Option<(Vec<usize>, ClusterAssignment)> = None;
    let mut terminated_by = Termination::MaxIterations;

    for iteration in 1..=params.max_outer_iterations {
        if survivors.len() < params.k {
            terminated_by = Termination::TooFewPoints;
            break;
        }
        let subset: Vec<&[f64]> = survivors.iter().map(|&i| points[i].as_ref()).collect();
        let round_params = KMeansParams {
            seed: params.seed.wrapping_add(iteration as u64 - 1),
            ..params.clone()
        };
        let assignment = kmeans(&subset, &round_params)?;
        let sizes = assignment.cluster_sizes();
        let removed: Vec<usize> = survivors
            .iter()
            .zip(&assignment.labels)
            .filter(|&(_, &l)| sizes[l] <= params.small_cluster_max)
            .map(|(&id, _)| id)
            .collect();

        rounds.push(Round {
            members: survivors.clone(),
            labels: assignment.labels.clone(),
            removed: removed.clone(),
        });
        let members = survivors.clone();
        last = Some((members, assignment));

        if removed.is_empty() {
            terminated_by = Termination::NoSmallClusters;
            break;
        }
        outliers.extend(removed.iter().map(|&id| Outlier { id, iteration }));
        survivors.retain(|id| removed.binary_search(id).is_err());
    }

    let final_assignment = last.map(|(members, a)| restrict(points, &members, &a, &survivors));
    Ok(IterativeKMeansResult {
        outliers,
        survivors,
        final_assignment,
        iterations_run: rounds.len(),
        terminated_by,
        rounds,
    })
}

fn restrict<P: AsRef<[f64]>>(
    points: &[P],
    members: &[usize],
    a: &ClusterAssignment,
    survivors: &[usize],
) -> ClusterAssignment {
    let labels: Vec<usize> = survivors
        .iter()
        .map(|id| a.labels[members.binary_search(id).expect("survivor was clustered")])
        .collect();
    let inertia = survivors
        .iter()
        .zip(&labels)
        .map(|(&id, &l)| squared_distance(points[id].as_ref(), &a.centroids[l]))
        .sum();
    ClusterAssignment {
        labels,
        centroids: a.centroids.clone(),
        inertia,
    }
}
