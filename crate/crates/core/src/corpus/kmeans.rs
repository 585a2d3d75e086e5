//! Lloyd's k-means with seeded k-means++ initialisation.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub max_iters: usize,
    /// Stop once no centroid moves further than this (Euclidean).
    pub tolerance: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            max_iters: 300,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Vec<Vec<f64>>,
    /// Cluster index of each input point.
    pub assignments: Vec<usize>,
    pub iterations: usize,
    /// Within-cluster sum of squares after each assignment step.
    pub wcss_history: Vec<f64>,
}

impl KMeansFit {
    pub fn wcss(&self) -> f64 {
        self.wcss_history.last().copied().unwrap_or(0.0)
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn plus_plus_init<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())].clone());
    while centroids.len() < k {
        let weights: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let idx = match WeightedIndex::new(&weights) {
            Ok(dist) => dist.sample(rng),
            // Every point already coincides with a centroid.
            Err(_) => rng.random_range(0..points.len()),
        };
        centroids.push(points[idx].clone());
    }
    centroids
}

/// Clusters `points` into exactly `k` groups.
///
/// Panics if `k == 0` or `points.len() < k`; callers validate first.
/// A cluster left empty by an assignment step is re-seeded with the point
/// farthest from its own centroid.
pub fn kmeans<R: Rng>(points: &[Vec<f64>], k: usize, params: &KMeansParams, rng: &mut R) -> KMeansFit {
    assert!(k >= 1 && points.len() >= k, "need at least k points");
    let dim = points[0].len();
    let mut centroids = plus_plus_init(points, k, rng);
    let mut assignments = vec![0usize; points.len()];
    let mut wcss_history: Vec<f64> = Vec::new();
    let mut iterations = 0;

    loop {
        iterations += 1;
        let mut dists = vec![0.0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            assignments[i] = c;
            dists[i] = d;
        }
        reseed_empty(points, &mut centroids, &mut assignments, &mut dists);

        let wcss: f64 = dists.iter().sum();
        if let Some(prev) = wcss_history.last() {
            debug_assert!(
                wcss <= prev + 1e-9 * prev.max(1.0),
                "k-means objective increased: {prev} -> {wcss}"
            );
        }
        wcss_history.push(wcss);

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut max_shift: f64 = 0.0;
        for (c, (sum, count)) in sums.into_iter().zip(counts).enumerate() {
            let mean: Vec<f64> = sum.into_iter().map(|s| s / count as f64).collect();
            max_shift = max_shift.max(squared_distance(&mean, &centroids[c]).sqrt());
            centroids[c] = mean;
        }

        if max_shift <= params.tolerance || iterations >= params.max_iters {
            break;
        }
    }

    // Final assignment against the settled centroids.
    let mut dists = vec![0.0; points.len()];
    for (i, p) in points.iter().enumerate() {
        let (c, d) = nearest(p, &centroids);
        assignments[i] = c;
        dists[i] = d;
    }
    reseed_empty(points, &mut centroids, &mut assignments, &mut dists);
    wcss_history.push(dists.iter().sum());

    KMeansFit {
        centroids,
        assignments,
        iterations,
        wcss_history,
    }
}

fn reseed_empty(
    points: &[Vec<f64>],
    centroids: &mut [Vec<f64>],
    assignments: &mut [usize],
    dists: &mut [f64],
) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        for &c in assignments.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&n| n == 0) else {
            return;
        };
        // Farthest point whose cluster can spare it; lowest index on ties.
        let donor = (0..points.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .fold(None::<usize>, |best, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            })
            .expect("points.len() >= k guarantees a donor");
        centroids[empty] = points[donor].clone();
        assignments[donor] = empty;
        dists[donor] = 0.0;
    }
}
