use rand::Rng;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;

/// Offset applied to all-zero vectors before taking their direction.
pub(crate) const ZERO_OFFSET: f64 = 1e-12;

/// Unit vector in the direction of `v`. A zero vector is shifted by
/// [`ZERO_OFFSET`] on every axis first, which yields the uniform direction.
pub(crate) fn unit(v: &[f64; 3]) -> ([f64; 3], bool) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        return ([v[0] / norm, v[1] / norm, v[2] / norm], false);
    }
    let shifted = [v[0] + ZERO_OFFSET, v[1] + ZERO_OFFSET, v[2] + ZERO_OFFSET];
    let norm = shifted.iter().map(|x| x * x).sum::<f64>().sqrt();
    ([shifted[0] / norm, shifted[1] / norm, shifted[2] / norm], true)
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Cluster labels plus unit-length centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    assignments: Vec<usize>,
    centroids: Vec<[f64; 3]>,
    /// How many input vectors were zero and got the uniform direction.
    pub zero_vectors: usize,
}

impl ClusterSet {
    /// Builds a set from labels alone; centroids are left empty.
    pub fn from_assignments(assignments: Vec<usize>, k: usize) -> Self {
        debug_assert!(assignments.iter().all(|&a| a < k));
        Self {
            assignments,
            centroids: vec![[0.0; 3]; k],
            zero_vectors: 0,
        }
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn centroids(&self) -> &[[f64; 3]] {
        &self.centroids
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    /// Member indices of every cluster, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.centroids.len()];
        for (i, &c) in self.assignments.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

fn mean_direction(points: &[[f64; 3]], members: impl Iterator<Item = usize>) -> [f64; 3] {
    let mut s = [0.0; 3];
    for i in members {
        for k in 0..3 {
            s[k] += points[i][k];
        }
    }
    unit(&s).0
}

/// Spherical k-means: Lloyd iterations under the distance `1 - cos(a, b)`
/// with k-means++ seeding. Ties go to the lowest cluster index; a cluster
/// that empties takes the worst-fitting point of a cluster with at least
/// two members.
pub fn kmeans_cosine<R: Rng + ?Sized>(vectors: &[[f64; 3]], m: usize, rng: &mut R) -> Result<ClusterSet> {
    let n = vectors.len();
    if m == 0 || m > n {
        return Err(Error::Input(format!(
            "cluster count must lie in [1, {n}], got {m}"
        )));
    }
    let mut zero_vectors = 0;
    let points: Vec<[f64; 3]> = vectors
        .iter()
        .map(|v| {
            let (u, was_zero) = unit(v);
            if was_zero {
                zero_vectors += 1;
            }
            u
        })
        .collect();
    if zero_vectors > 0 {
        log::warn!("{zero_vectors} zero objective vector(s) replaced by the uniform direction");
    }

    // k-means++ seeding with squared cosine distance.
    let mut chosen = vec![rng.random_range(0..n)];
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| 1.0 - dot(p, &points[chosen[0]]))
        .collect();
    while chosen.len() < m {
        let weights: Vec<f64> = nearest
            .iter()
            .enumerate()
            .map(|(i, d)| if chosen.contains(&i) { 0.0 } else { d.max(0.0).powi(2) })
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 {
                    pick = Some(i);
                    if target < *w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(pick);
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(1.0 - dot(p, &points[pick]));
        }
    }
    let mut centroids: Vec<[f64; 3]> = chosen.iter().map(|&i| points[i]).collect();

    let mut assignments = vec![usize::MAX; n];
    for _ in 0..MAX_ITERATIONS {
        let mut next: Vec<usize> = points
            .iter()
            .map(|p| {
                let mut best = 0;
                let mut best_sim = dot(p, &centroids[0]);
                for (c, centroid) in centroids.iter().enumerate().skip(1) {
                    let s = dot(p, centroid);
                    if s > best_sim {
                        best = c;
                        best_sim = s;
                    }
                }
                best
            })
            .collect();
        repair_empty(&points, &centroids, &mut next, m);
        let stable = next == assignments;
        assignments = next;
        for (c, centroid) in centroids.iter_mut().enumerate() {
            *centroid = mean_direction(&points, (0..n).filter(|&i| assignments[i] == c));
        }
        if stable {
            break;
        }
    }
    Ok(ClusterSet {
        assignments,
        centroids,
        zero_vectors,
    })
}

fn repair_empty(points: &[[f64; 3]], centroids: &[[f64; 3]], assignments: &mut [usize], m: usize) {
    loop {
        let mut sizes = vec![0usize; m];
        for &a in assignments.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        // Worst-fitting point among clusters that can spare one.
        let mut donor = None;
        let mut worst = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let c = assignments[i];
            if sizes[c] < 2 {
                continue;
            }
            let d = 1.0 - dot(p, &centroids[c]);
            if d > worst {
                worst = d;
                donor = Some(i);
            }
        }
        match donor {
            Some(i) => assignments[i] = empty,
            None => return,
        }
    }
}
