//! Seeded k-means on min-max normalized coordinates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_points, TrustRegionError};

const MAX_ITERATIONS: usize = 300;
const SHIFT_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub k: usize,
    /// Cluster of each point.
    pub assignment: Vec<usize>,
    /// Centroids in the original coordinates.
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl Clustering {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == cluster).collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(p, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn normalize(points: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points {
        for j in 0..d {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    points
        .iter()
        .map(|p| {
            (0..d)
                .map(|j| {
                    let span = hi[j] - lo[j];
                    if span > 0.0 {
                        (p[j] - lo[j]) / span
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

fn seed_centers(z: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = z.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = z.iter().map(|p| sq_dist(p, &z[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &v) in d2.iter().enumerate() {
                if v > 0.0 && r < v {
                    pick = i;
                    break;
                }
                r -= v;
            }
            if d2[pick] == 0.0 {
                pick = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // All remaining points coincide with a center.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, p) in z.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &z[next]));
        }
    }
    chosen.into_iter().map(|i| z[i].clone()).collect()
}

/// Partitions `points` into `k` clusters with k-means++ seeding and Lloyd
/// iterations. Deterministic for a fixed `seed`.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Clustering, TrustRegionError> {
    let d = check_points(points)?;
    let n = points.len();
    if k == 0 || k > n {
        return Err(TrustRegionError::TooManyClusters { k, n });
    }
    let z = normalize(points, d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(&z, k, &mut rng);
    let mut assignment = vec![0; n];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for (i, p) in z.iter().enumerate() {
            assignment[i] = nearest(p, &centers).0;
        }
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for (i, p) in z.iter().enumerate() {
            counts[assignment[i]] += 1;
            for j in 0..d {
                sums[assignment[i]][j] += p[j];
            }
        }
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(k);
        for c in 0..k {
            if counts[c] > 0 {
                next.push(sums[c].iter().map(|s| s / counts[c] as f64).collect());
            } else {
                next.push(centers[c].clone());
            }
        }
        // Reseed empty clusters at the point farthest from its centroid.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[assignment[i]] > 1)
                .max_by(|&a, &b| {
                    let da = sq_dist(&z[a], &next[assignment[a]]);
                    let db = sq_dist(&z[b], &next[assignment[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                });
            if let Some(i) = far {
                counts[assignment[i]] -= 1;
                assignment[i] = c;
                counts[c] = 1;
                next[c] = z[i].clone();
            }
        }
        let shift = centers
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centers = next;
        if shift < SHIFT_TOL {
            break;
        }
    }
    for (i, p) in z.iter().enumerate() {
        assignment[i] = nearest(p, &centers).0;
    }
    repair_empty(&mut assignment, k);
    let mut centroids = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, p) in points.iter().enumerate() {
        counts[assignment[i]] += 1;
        for j in 0..d {
            centroids[assignment[i]][j] += p[j];
        }
    }
    for c in 0..k {
        for v in &mut centroids[c] {
            *v /= counts[c].max(1) as f64;
        }
    }
    Ok(Clustering {
        k,
        assignment,
        centroids,
        iterations,
    })
}

/// Ensures every cluster has a member, moving points out of the largest
/// clusters when the final assignment leaves one empty.
fn repair_empty(assignment: &mut [usize], k: usize) {
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = (0..k).find(|&c| counts[c] == 0) else {
            return;
        };
        let (big, _) = counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).unwrap();
        let i = assignment.iter().rposition(|&a| a == big).unwrap();
        assignment[i] = empty;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(vec![i as f64 * 0.01, 0.0]);
            pts.push(vec![10.0 + i as f64 * 0.01, 5.0]);
        }
        let c = kmeans(&pts, 2, 7).unwrap();
        for i in (0..20).step_by(2) {
            assert_eq!(c.assignment[i], c.assignment[0]);
            assert_ne!(c.assignment[i + 1], c.assignment[0]);
        }
    }

    #[test]
    fn k_equal_n_gives_singletons_even_with_duplicates() {
        let pts = vec![vec![0.0], vec![0.0], vec![1.0]];
        let c = kmeans(&pts, 3, 1).unwrap();
        let mut a = c.assignment.clone();
        a.sort();
        assert_eq!(a, vec![0, 1, 2]);
    }

    #[test]
    fn too_many_clusters() {
        assert!(matches!(
            kmeans(&[vec![0.0]], 2, 0),
            Err(TrustRegionError::TooManyClusters { k: 2, n: 1 })
        ));
    }
}
